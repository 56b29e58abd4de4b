"""Cosine-regularized triangle-area energy and its sphere gradients.

The area of three unit vectors depends only on the cosines
``a=<x,y>``, ``b=<x,z>``, ``c=<y,z>``::

    A(a, b, c) = 1/2 * sqrt((2 - 2a)(2 - 2b) - (c - b - a + 1)^2)

so the Riemannian gradient with respect to ``x`` is
``dA/da * P_x(y) + dA/db * P_x(z)`` with ``P_x`` the tangent projection at
``x``, and symmetrically for ``y`` and ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import BothZeroError, DegenerateTriangleError
from .sphere import (
    CosineTriple,
    _as_vectors,
    _scalar,
    area_from_cosines,
    area_radicand,
    inner,
    pairwise_cosines,
    tangent_project,
    triangle_area,
)

DEGENERATE_AREA = 1e-8


class Pair(str, Enum):
    """Which two modalities the cosine regularizer attracts."""

    LANGUAGE_FLOW = "LanguageFlow"
    LANGUAGE_IMAGE = "LanguageImage"
    IMAGE_FLOW = "ImageFlow"

    @property
    def slots(self) -> tuple[int, int]:
        return _PAIR_SLOTS[self]


_PAIR_SLOTS = {
    Pair.LANGUAGE_FLOW: (0, 2),
    Pair.LANGUAGE_IMAGE: (0, 1),
    Pair.IMAGE_FLOW: (1, 2),
}


@dataclass(frozen=True)
class EnergyParams:
    alpha: float = 1.0
    tau: float = 0.07
    regularized_pair: Pair = Pair.LANGUAGE_FLOW

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        object.__setattr__(self, "regularized_pair", Pair(self.regularized_pair))

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "tau": self.tau, "regularized_pair": self.regularized_pair.value}


class TupleGradient(NamedTuple):
    """Per-modality gradients, ordered (language, image, flow) = (x, y, z)."""

    g_L: np.ndarray
    g_I: np.ndarray
    g_F: np.ndarray


def energy(zL, zI, zF, p: EnergyParams = EnergyParams()):
    """``A(zL, zI, zF) - alpha * <selected pair>``."""
    pts = _as_vectors(zL, zI, zF)
    i, j = p.regularized_pair.slots
    area = triangle_area(*pts)
    if p.alpha == 0:
        return area
    return _scalar(np.asarray(area) - p.alpha * np.asarray(inner(pts[i], pts[j])))


def area_partials(t: CosineTriple, *, degenerate: str = "error"):
    """Closed-form ``(dA/da, dA/db, dA/dc)``.

    ``degenerate="error"`` raises when any area is at or below
    :data:`DEGENERATE_AREA`; ``"zero"`` returns zero partials there instead.
    """
    a, b, c = (np.asarray(v, dtype=np.float64) for v in t)
    area = 0.5 * np.sqrt(np.maximum(area_radicand(t), 0.0))
    bad = area <= DEGENERATE_AREA
    if np.any(bad) and degenerate == "error":
        raise DegenerateTriangleError(
            f"triangle area {float(np.min(area)):.3g} <= {DEGENERATE_AREA:g}"
        )
    s = c - b - a + 1.0
    denom = 8.0 * np.where(bad, 1.0, area)
    da = np.where(bad, 0.0, (-2.0 * (2.0 - 2.0 * b) + 2.0 * s) / denom)
    db = np.where(bad, 0.0, (-2.0 * (2.0 - 2.0 * a) + 2.0 * s) / denom)
    dc = np.where(bad, 0.0, (-2.0 * s) / denom)
    return _scalar(da), _scalar(db), _scalar(dc)


def _project(base, v, riemannian: bool):
    return tangent_project(base, v) if riemannian else v


def area_grad(x, y, z, *, degenerate: str = "error", riemannian: bool = True) -> TupleGradient:
    """Gradient of the triangle area with respect to each vertex.

    Tangent-space (Riemannian) by default. ``riemannian=False`` returns the
    ambient gradient of ``A(<x,y>, <x,z>, <y,z>)``, useful only when
    comparing against unconstrained finite differences.
    """
    x, y, z = _as_vectors(x, y, z)
    wa, wb, wc = (np.asarray(w)[..., None] for w in area_partials(pairwise_cosines(x, y, z), degenerate=degenerate))
    return TupleGradient(
        wa * _project(x, y, riemannian) + wb * _project(x, z, riemannian),
        wa * _project(y, x, riemannian) + wc * _project(y, z, riemannian),
        wb * _project(z, x, riemannian) + wc * _project(z, y, riemannian),
    )


def energy_grad(
    zL, zI, zF, p: EnergyParams = EnergyParams(), *, degenerate: str | None = None, riemannian: bool = True
) -> TupleGradient:
    """Area gradient minus ``alpha`` times the selected cosine gradient.

    With ``alpha > 0`` a degenerate triangle contributes a zero area
    subgradient; with ``alpha == 0`` the ``degenerate`` policy applies
    (default ``"error"``).
    """
    pts = _as_vectors(zL, zI, zF)
    if degenerate is None:
        degenerate = "zero" if p.alpha > 0 else "error"
    grads = list(area_grad(*pts, degenerate=degenerate, riemannian=riemannian))
    if p.alpha > 0:
        i, j = p.regularized_pair.slots
        grads[i] = grads[i] - p.alpha * _project(pts[i], pts[j], riemannian)
        grads[j] = grads[j] - p.alpha * _project(pts[j], pts[i], riemannian)
    return TupleGradient(*grads)


def edgewise_pulls(x, y, z, *, degenerate: str = "error") -> tuple[np.ndarray, np.ndarray]:
    """Split ``-grad_x A`` into the pulls toward ``y`` and toward ``z``."""
    x, y, z = _as_vectors(x, y, z)
    wa, wb, _ = (np.asarray(w)[..., None] for w in area_partials(pairwise_cosines(x, y, z), degenerate=degenerate))
    return -wa * tangent_project(x, y), -wb * tangent_project(x, z)


def cancellation_ratio(u1, u2):
    """``|u1 + u2| / (|u1| + |u2|)``: 1 for aligned pulls, 0 for opposite ones."""
    u1, u2 = _as_vectors(u1, u2)
    total = np.linalg.norm(u1, axis=-1) + np.linalg.norm(u2, axis=-1)
    if np.any(total <= 1e-12):
        raise BothZeroError("both vectors are zero")
    return _scalar(np.linalg.norm(u1 + u2, axis=-1) / total)


def ascent_rate(x, y):
    """Rate of change of ``<x, y>`` when ``x`` moves along ``P_x(y)``."""
    a = np.clip(np.asarray(inner(x, y)), -1.0, 1.0)
    return _scalar(1.0 - a * a)


def cosine_distance_check(x, y):
    """Both sides of ``1 - <x,y> = |x - y|^2 / 2`` for unit vectors."""
    x, y = _as_vectors(x, y)
    lhs = 1.0 - np.einsum("...i,...i->...", x, y)
    diff = x - y
    rhs = 0.5 * np.einsum("...i,...i->...", diff, diff)
    return _scalar(lhs), _scalar(rhs)


__all__ = [
    "DEGENERATE_AREA",
    "EnergyParams",
    "Pair",
    "TupleGradient",
    "area_from_cosines",
    "area_grad",
    "area_partials",
    "ascent_rate",
    "cancellation_ratio",
    "cosine_distance_check",
    "edgewise_pulls",
    "energy",
    "energy_grad",
]
