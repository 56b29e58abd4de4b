"""Deterministic training loop for the toy three-modal encoders."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from ..contrastive import NegativePolicy, TupleBatch, loss_grad
from ..energy import EnergyParams, area_grad, energy
from ..errors import DatasetTooSmallError, TooFewCandidatesError
from ..sphere import triangle_area
from .data import TripletDataset
from .encoders import TripletEncoders
from .optim import SGD, AdamW

COLLAPSE_THRESHOLD = 0.05


class Optimizer(str, Enum):
    SGD = "SGD"
    ADAMW = "AdamWStyle"


class Objective(str, Enum):
    FULL_CONTRASTIVE = "FullContrastive"
    VOLUME_ONLY = "VolumeOnlyDescent"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    batch_size: int = 32
    steps: int = 4000
    optimizer: Optimizer = Optimizer.ADAMW
    energy: EnergyParams = field(default_factory=EnergyParams)
    seed: int = 0
    objective: Objective = Objective.FULL_CONTRASTIVE
    embed_dim: int = 16
    negatives: NegativePolicy = field(default_factory=NegativePolicy)
    # Carried for manifest fidelity only; the corresponding losses are not implemented.
    lambda_tcn: float = 1.0
    lambda_act: float = 1.0
    flow_window: int = 7

    def __post_init__(self):
        self.optimizer = Optimizer(self.optimizer)
        self.objective = Objective(self.objective)
        if isinstance(self.energy, dict):
            self.energy = EnergyParams(**self.energy)
        if isinstance(self.negatives, dict):
            self.negatives = NegativePolicy(**self.negatives)
        if self.batch_size < 2 or self.steps < 0:
            raise ValueError("batch_size must be >= 2 and steps >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = self.optimizer.value
        d["objective"] = self.objective.value
        d["energy"] = self.energy.to_dict()
        d["negatives"] = self.negatives.to_dict()
        return d


@dataclass
class StepRecord:
    step: int
    loss: float
    mean_area: float
    pair_cosine: float
    spread: float


@dataclass
class TrainResult:
    encoders: TripletEncoders
    trace: list[StepRecord]
    config: TrainConfig


def spread(emb: np.ndarray) -> float:
    """Mean pairwise distance between distinct items, averaged over modalities.

    ``emb`` has shape ``(3, n, d)``.
    """
    n = emb.shape[1]
    if n < 2:
        return 0.0
    total = 0.0
    for z in emb:
        sq = np.maximum(2.0 - 2.0 * (z @ z.T), 0.0)
        total += np.sqrt(sq)[np.triu_indices(n, 1)].mean()
    return float(total / emb.shape[0])


def tuple_stats(emb: np.ndarray, p: EnergyParams) -> tuple[float, float]:
    """Mean matched-tuple area and mean regularized-pair cosine."""
    i, j = p.regularized_pair.slots
    area = float(np.mean(triangle_area(emb[0], emb[1], emb[2])))
    cos = float(np.mean(np.sum(emb[i] * emb[j], axis=-1)))
    return area, cos


def _objective_grad(emb: np.ndarray, config: TrainConfig, seed: int) -> tuple[float, np.ndarray]:
    if config.objective is Objective.VOLUME_ONLY:
        areas = triangle_area(emb[0], emb[1], emb[2])
        g = np.stack(area_grad(emb[0], emb[1], emb[2], degenerate="zero")) / emb.shape[1]
        return float(np.mean(areas)), g
    out = loss_grad(TupleBatch(*emb), config.energy, config.negatives, seed, degenerate="zero")
    return out.report.loss, out.total


def train(config: TrainConfig, data: TripletDataset, encoders: TripletEncoders | None = None) -> TrainResult:
    """Train encoders on ``data``; every step appends one :class:`StepRecord`."""
    n = len(data)
    if n < config.batch_size:
        raise DatasetTooSmallError(f"dataset has {n} items, batch_size is {config.batch_size}")
    if encoders is None:
        in_dims = (data.obs_L.shape[1], data.obs_I.shape[2], data.obs_F.shape[1])
        encoders = TripletEncoders(in_dims, config.embed_dim, config.seed)
    params = {f"{name}.{k}": arr for name, enc in encoders.modules.items() for k, arr in enc.params.items()}
    if config.optimizer is Optimizer.ADAMW:
        opt = AdamW(config.learning_rate, config.weight_decay)
    else:
        opt = SGD(config.learning_rate, config.weight_decay)

    rng = np.random.default_rng([config.seed, 2])
    order = rng.permutation(n)
    cursor = 0
    trace: list[StepRecord] = []
    for step in range(config.steps):
        if cursor + config.batch_size > n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor : cursor + config.batch_size]
        cursor += config.batch_size

        xs = encoders.inputs(data, idx)
        fwd = [enc.forward(x, cache=True) for enc, x in zip(encoders.modules.values(), xs)]
        emb = np.stack([z for z, _ in fwd])
        loss, g_emb = _objective_grad(emb, config, seed=config.seed + step)

        area, cos = tuple_stats(emb, config.energy)
        trace.append(StepRecord(step, loss, area, cos, spread(emb)))

        grads = {}
        for (name, enc), (_, saved), g in zip(encoders.modules.items(), fwd, g_emb):
            for k, v in enc.backward(g, saved).items():
                grads[f"{name}.{k}"] = v
        opt.step(params, grads)
    return TrainResult(encoders, trace, config)


def retrieval_accuracy(
    encoders: TripletEncoders, data: TripletDataset, candidates: int = 64, p: EnergyParams = EnergyParams(), seed: int = 0
) -> float:
    """Top-1 rate at which the matched (image, flow) pair has the lowest energy.

    Each language query is scored against its own pair plus
    ``candidates - 1`` pairs drawn from other items. Ties count as misses.
    """
    if candidates < 2:
        raise TooFewCandidatesError(f"need at least 2 candidates, got {candidates}")
    n = len(data)
    if candidates > n:
        raise TooFewCandidatesError(f"only {n} items for {candidates} candidates")
    emb = encoders.embed(data)
    rng = np.random.default_rng([seed, 3])
    hits = 0
    for i in range(n):
        others = rng.choice(n - 1, size=candidates - 1, replace=False)
        others = others + (others >= i)
        cand = np.concatenate([[i], others])
        e = np.asarray(energy(np.broadcast_to(emb[0, i], (candidates, emb.shape[2])), emb[1, cand], emb[2, cand], p))
        hits += bool(np.all(e[0] < e[1:]))
    return hits / n


def evaluate(encoders: TripletEncoders, data: TripletDataset, p: EnergyParams, candidates: int = 64, seed: int = 0) -> dict:
    emb = encoders.embed(data)
    area, cos = tuple_stats(emb, p)
    s = spread(emb)
    return {
        "mean_area": area,
        "pair_cosine": cos,
        "spread": s,
        "collapse_threshold": COLLAPSE_THRESHOLD,
        "collapsed": s < COLLAPSE_THRESHOLD,
        "retrieval_top1": retrieval_accuracy(encoders, data, candidates, p, seed),
        "candidates": candidates,
    }
