"""The flat-triangle ambiguity descent and the edge-pull conflict search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..energy import (
    DEGENERATE_AREA,
    EnergyParams,
    Pair,
    area_grad,
    area_partials,
    ascent_rate,
    cancellation_ratio,
    edgewise_pulls,
    energy,
    energy_grad,
)
from ..sphere import inner, normalize, pairwise_cosines, random_unit, triangle_area

# x, y, z map onto the (language, image, flow) slots of the energy.
GRAD_TOL = 1e-12
DEMO_PAIRS = {"xy": Pair.LANGUAGE_IMAGE, "xz": Pair.LANGUAGE_FLOW, "yz": Pair.IMAGE_FLOW}


@dataclass
class AmbiguityStep:
    step: int
    area: float
    energy: float
    cos_xy: float
    theta: float
    step_size: float


@dataclass
class AmbiguityReport:
    theta0: float
    alpha: float
    pair: str
    free: str
    steps: list[AmbiguityStep]
    final: np.ndarray = field(repr=False)

    @property
    def initial_area(self) -> float:
        return self.steps[0].area

    @property
    def final_area(self) -> float:
        return self.steps[-1].area

    @property
    def final_cos_xy(self) -> float:
        return self.steps[-1].cos_xy


def _record(step, pts, p, lr) -> AmbiguityStep:
    x, y, z = pts
    return AmbiguityStep(
        step=step,
        area=float(triangle_area(x, y, z)),
        energy=float(energy(x, y, z, p)),
        cos_xy=float(inner(x, y)),
        theta=float(math.acos(max(-1.0, min(1.0, inner(x, z))))),
        step_size=lr,
    )


def demo_ambiguity(
    theta0: float = math.pi / 4,
    alpha: float = 0.0,
    steps: int = 2000,
    lr: float = 0.1,
    pair: str = "xy",
    free: str = "yz",
    max_halvings: int = 40,
) -> AmbiguityReport:
    """Riemannian descent on the energy from ``x=e1, y=-e1, z=(cos t, sin t, 0)``.

    Only the points named in ``free`` move; by default ``x`` stays fixed at
    ``e1`` as the anchor the other two are pulled toward. Each step starts
    at ``lr`` and halves it until the energy does not increase. When no
    trial step helps, or the gradient vanishes, the iteration stops early.
    """
    if not 0 < theta0 <= math.pi / 2:
        raise ValueError("theta0 must lie in (0, pi/2]")
    p = EnergyParams(alpha=alpha, regularized_pair=DEMO_PAIRS[pair])
    pts = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [math.cos(theta0), math.sin(theta0), 0.0]])
    mask = np.array([[c in free] for c in "xyz"], dtype=np.float64)
    if not mask.any():
        raise ValueError("at least one of x, y, z must be free")
    history = [_record(0, pts, p, 0.0)]
    current = history[0].energy
    for k in range(1, steps + 1):
        g = np.stack(energy_grad(*pts, p, degenerate="zero")) * mask
        if np.linalg.norm(g) <= GRAD_TOL:
            break
        eta = lr
        for _ in range(max_halvings):
            trial = normalize(pts - eta * g)
            e = float(energy(*trial, p))
            if e <= current:
                break
            eta *= 0.5
        else:
            break
        pts, current = trial, e
        history.append(_record(k, pts, p, eta))
    return AmbiguityReport(theta0, alpha, pair, free, history, pts)


@dataclass
class ConflictReport:
    trials: int
    evaluated: int
    skipped: int
    min_ratio: float
    config: np.ndarray
    pulls: tuple[np.ndarray, np.ndarray]
    cosine_pull: float
    alpha: float
    max_decomposition_error: float
    max_ascent_error: float


def demo_conflict(search_seed: int = 0, trials: int = 10_000, dim: int = 3, alpha: float = 1.0) -> ConflictReport:
    """Random search for unit triples whose two edge pulls on ``x`` cancel most.

    Triples with ``x`` coinciding with ``y`` or a degenerate triangle are
    skipped. For every evaluated triple the decomposition
    ``u_xy + u_xz = -grad_x A`` and the ascent rate ``1 - <x,y>^2`` are
    checked against independent computations.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(search_seed)
    pts = random_unit(rng, (trials, 3), dim)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    area = np.asarray(triangle_area(x, y, z))
    same_xy = np.linalg.norm(x - y, axis=1) <= 1e-9
    ok = (area > DEGENERATE_AREA) & ~same_xy
    x, y, z = x[ok], y[ok], z[ok]

    u_xy, u_xz = edgewise_pulls(x, y, z)
    g_x = area_grad(x, y, z).g_L
    decomposition = float(np.abs(u_xy + u_xz + g_x).max()) if ok.any() else 0.0
    a = np.sum(x * y, axis=1)
    ascent = float(np.abs(np.asarray(ascent_rate(x, y)) - (1.0 - a * a)).max()) if ok.any() else 0.0

    ratio = np.asarray(cancellation_ratio(u_xy, u_xz))
    best = int(np.argmin(ratio))
    return ConflictReport(
        trials=trials,
        evaluated=int(ok.sum()),
        skipped=int((~ok).sum()),
        min_ratio=float(ratio[best]),
        config=np.stack([x[best], y[best], z[best]]),
        pulls=(u_xy[best], u_xz[best]),
        cosine_pull=float(alpha * math.sqrt(ascent_rate(x[best], y[best]))),
        alpha=alpha,
        max_decomposition_error=decomposition,
        max_ascent_error=ascent,
    )


__all__ = ["AmbiguityReport", "ConflictReport", "demo_ambiguity", "demo_conflict", "area_partials", "pairwise_cosines"]
