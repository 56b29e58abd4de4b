"""Central finite differences on products of spheres.

These oracles only evaluate the scalar objective; they never touch the
analytic gradient code they are used to check.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

FD_STEP = 1e-5


def sphere_fd_grad(f: Callable[[np.ndarray], float], points: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Tangent-space gradient of ``f`` at ``points`` (shape ``(n, d)``).

    Each coordinate of each point is perturbed by ``+-h`` and the point is
    renormalized back onto the sphere before evaluating ``f``. The ambient
    difference quotient is then projected onto each point's tangent space.
    """
    pts = np.array(points, dtype=np.float64)
    n, d = pts.shape
    grad = np.zeros_like(pts)
    for i in range(n):
        for k in range(d):
            plus = pts.copy()
            minus = pts.copy()
            plus[i, k] += h
            minus[i, k] -= h
            plus[i] /= np.linalg.norm(plus[i])
            minus[i] /= np.linalg.norm(minus[i])
            grad[i, k] = (f(plus) - f(minus)) / (2.0 * h)
        grad[i] -= np.dot(grad[i], pts[i]) * pts[i]
    return grad


def relative_error(analytic, reference, floor: float = 1e-8) -> float:
    """``|analytic - reference| / max(|analytic|, |reference|, floor)``."""
    analytic = np.asarray(analytic, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(reference), floor)
    return float(np.linalg.norm(analytic - reference) / scale)


def central_difference(f: Callable[[float], float], x: float, h: float = 1e-6) -> float:
    return (f(x + h) - f(x - h)) / (2.0 * h)
