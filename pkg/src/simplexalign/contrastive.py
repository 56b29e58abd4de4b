"""InfoNCE over tuple energies with mismatched negatives drawn from the batch."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .energy import EnergyParams, energy, energy_grad
from .errors import BatchTooSmallError, DimensionMismatchError

SLOTS = ("L", "I", "F")


class ModalityTuple(NamedTuple):
    z_L: np.ndarray
    z_I: np.ndarray
    z_F: np.ndarray


@dataclass
class TupleBatch:
    """Matched embeddings stacked per modality, each of shape ``(B, d)``."""

    z_L: np.ndarray
    z_I: np.ndarray
    z_F: np.ndarray

    def __post_init__(self):
        self.z_L, self.z_I, self.z_F = (np.asarray(z, dtype=np.float64) for z in (self.z_L, self.z_I, self.z_F))
        if not (self.z_L.shape == self.z_I.shape == self.z_F.shape) or self.z_L.ndim != 2:
            raise DimensionMismatchError("z_L, z_I, z_F must all have shape (B, d)")

    @classmethod
    def from_tuples(cls, tuples: Sequence[ModalityTuple]) -> "TupleBatch":
        return cls(*(np.stack([t[s] for t in tuples]) for s in range(3)))

    @property
    def size(self) -> int:
        return self.z_L.shape[0]

    @property
    def dim(self) -> int:
        return self.z_L.shape[1]

    def stacked(self) -> np.ndarray:
        """Embeddings as one array of shape ``(3, B, d)``."""
        return np.stack([self.z_L, self.z_I, self.z_F])

    def tuple(self, i: int) -> ModalityTuple:
        return ModalityTuple(self.z_L[i], self.z_I[i], self.z_F[i])

    def permuted(self, order) -> "TupleBatch":
        order = np.asarray(order)
        return TupleBatch(self.z_L[order], self.z_I[order], self.z_F[order])


class NegativeMode(str, Enum):
    SINGLE_MODALITY = "SingleModality"
    ALL_SINGLE_AND_DOUBLE = "AllSingleAndDouble"


@dataclass(frozen=True)
class NegativePolicy:
    mode: NegativeMode = NegativeMode.SINGLE_MODALITY
    per_anchor_cap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", NegativeMode(self.mode))
        if self.per_anchor_cap is not None and self.per_anchor_cap < 1:
            raise ValueError("per_anchor_cap must be a positive integer")

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "per_anchor_cap": self.per_anchor_cap}


def negative_indices(batch_size: int, anchor: int, policy: NegativePolicy = NegativePolicy(), seed: int = 0) -> np.ndarray:
    """Index triples ``(iL, iI, iF)`` of the negatives for one anchor.

    Single-slot swaps come first, modality-major then batch index. The
    double-swap mode appends tuples where two slots come from the same other
    element ``j`` (slot pairs LI, LF, IF in that order).
    """
    if batch_size < 2:
        raise BatchTooSmallError(f"need a batch of at least 2, got {batch_size}")
    if not 0 <= anchor < batch_size:
        raise IndexError(f"anchor {anchor} out of range for batch of {batch_size}")
    others = [j for j in range(batch_size) if j != anchor]
    rows = []
    for slot in range(3):
        for j in others:
            row = [anchor, anchor, anchor]
            row[slot] = j
            rows.append(row)
    if policy.mode is NegativeMode.ALL_SINGLE_AND_DOUBLE:
        for s1, s2 in ((0, 1), (0, 2), (1, 2)):
            for j in others:
                row = [anchor, anchor, anchor]
                row[s1] = row[s2] = j
                rows.append(row)
    idx = np.array(rows, dtype=np.intp)
    cap = policy.per_anchor_cap
    if cap is not None and cap < len(idx):
        rng = np.random.default_rng([seed, anchor])
        keep = np.sort(rng.choice(len(idx), size=cap, replace=False))
        idx = idx[keep]
    return idx


def build_negatives(batch: TupleBatch, anchor: int, policy: NegativePolicy = NegativePolicy(), seed: int = 0) -> list[ModalityTuple]:
    emb = batch.stacked()
    return [
        ModalityTuple(emb[0, iL], emb[1, iI], emb[2, iF])
        for iL, iI, iF in negative_indices(batch.size, anchor, policy, seed)
    ]


@dataclass
class LossReport:
    loss: float
    per_anchor: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    negatives: np.ndarray = field(repr=False)


def _tuple_indices(batch_size: int, policy: NegativePolicy, seed: int) -> np.ndarray:
    """``(B, 1 + n_neg, 3)``: the matched tuple first, then its negatives."""
    out = []
    for i in range(batch_size):
        neg = negative_indices(batch_size, i, policy, seed)
        out.append(np.vstack([[i, i, i], neg]))
    return np.stack(out)


def logsumexp(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    top = np.max(logits, axis=axis, keepdims=True)
    return np.squeeze(top, axis) + np.log(np.sum(np.exp(logits - top), axis=axis))


def info_nce(batch: TupleBatch, p: EnergyParams = EnergyParams(), policy: NegativePolicy = NegativePolicy(), seed: int = 0) -> LossReport:
    """Mean over anchors of ``-log softmax(-E / tau)[matched]``."""
    if batch.size < 2:
        raise BatchTooSmallError(f"need a batch of at least 2, got {batch.size}")
    idx = _tuple_indices(batch.size, policy, seed)
    emb = batch.stacked()
    energies = energy(emb[0, idx[..., 0]], emb[1, idx[..., 1]], emb[2, idx[..., 2]], p)
    logits = -np.asarray(energies) / p.tau
    lse = logsumexp(logits)
    per_anchor = lse - logits[:, 0]
    probs = np.exp(logits - lse[:, None])
    return LossReport(
        loss=float(np.mean(per_anchor)),
        per_anchor=per_anchor,
        p_plus=probs[:, 0],
        p_minus=probs[:, 1:],
        E_plus=energies[:, 0],
        E_minus=energies[:, 1:],
        negatives=idx[:, 1:],
    )


@dataclass
class LossGradient:
    """Loss gradients as ``(3, B, d)`` arrays indexed by modality, then item."""

    total: np.ndarray
    alignment: np.ndarray
    uniformity: np.ndarray
    report: LossReport


def _scatter(weighted: np.ndarray, idx: np.ndarray, shape) -> np.ndarray:
    # np.add.at accumulates in index order, so the reduction is reproducible.
    out = np.zeros(shape)
    for slot in range(3):
        np.add.at(out[slot], idx[..., slot].ravel(), weighted[slot].reshape(-1, shape[-1]))
    return out


def loss_grad(
    batch: TupleBatch,
    p: EnergyParams = EnergyParams(),
    policy: NegativePolicy = NegativePolicy(),
    seed: int = 0,
    *,
    degenerate: str | None = None,
) -> LossGradient:
    """Sphere gradient of :func:`info_nce` with its alignment/uniformity split.

    The total is accumulated in a single pass with weights ``dL/dE``; the two
    named components are accumulated separately, so their sum agreeing with
    the total is a genuine check rather than a tautology.
    """
    report = info_nce(batch, p, policy, seed)
    bsz = batch.size
    idx = np.concatenate([np.repeat(np.arange(bsz), 3).reshape(bsz, 1, 3), report.negatives], axis=1)
    emb = batch.stacked()
    g = np.stack(energy_grad(emb[0, idx[..., 0]], emb[1, idx[..., 1]], emb[2, idx[..., 2]], p, degenerate=degenerate))

    # dL/dE for the matched tuple and each negative, averaged over anchors.
    w_plus = (1.0 - report.p_plus) / p.tau / bsz
    w_minus = -report.p_minus / p.tau / bsz
    weights = np.concatenate([w_plus[:, None], w_minus], axis=1)

    shape = (3, bsz, batch.dim)
    total = _scatter(g * weights[None, :, :, None], idx, shape)
    alignment = _scatter(g[:, :, :1] * w_plus[None, :, None, None], idx[:, :1], shape)
    uniformity = _scatter(g[:, :, 1:] * w_minus[None, :, :, None], idx[:, 1:], shape)
    return LossGradient(total=total, alignment=alignment, uniformity=uniformity, report=report)
