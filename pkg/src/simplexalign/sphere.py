"""Hypersphere and simplex geometry.

Every function accepts single vectors of shape ``(d,)`` or stacks of shape
``(..., d)`` and broadcasts over the leading axes. Scalar results for
unbatched input are returned as Python floats.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatchError, TooFewPointsError, ZeroVectorError

ZERO_NORM = 1e-12
UNIT_TOL = 1e-9
MAX_POINTS = 20


class CosineTriple(NamedTuple):
    """Pairwise inner products a=<x,y>, b=<x,z>, c=<y,z>."""

    a: np.ndarray | float
    b: np.ndarray | float
    c: np.ndarray | float


def _scalar(value):
    if isinstance(value, np.ndarray) and value.ndim == 0:
        return float(value)
    return value


def _as_vectors(*arrays) -> list[np.ndarray]:
    out = [np.asarray(a, dtype=np.float64) for a in arrays]
    dims = {a.shape[-1] if a.ndim else None for a in out}
    if None in dims or len(dims) != 1:
        raise DimensionMismatchError(
            "inputs must share the trailing dimension, got shapes "
            + ", ".join(str(a.shape) for a in out)
        )
    return out


def inner(x, y):
    x, y = _as_vectors(x, y)
    return _scalar(np.einsum("...i,...i->...", x, y))


def normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0:
        raise DimensionMismatchError("expected a vector")
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm <= ZERO_NORM):
        raise ZeroVectorError("cannot normalize a vector with norm <= 1e-12")
    return v / norm


def is_unit(v, tol: float = UNIT_TOL) -> bool:
    v = np.asarray(v, dtype=np.float64)
    return bool(np.all(np.abs(np.linalg.norm(v, axis=-1) - 1.0) <= tol))


def tangent_project(x, v) -> np.ndarray:
    """Remove the component of ``v`` along the unit base point ``x``."""
    x, v = _as_vectors(x, v)
    return v - np.einsum("...i,...i->...", x, v)[..., None] * x


def edge_matrix(points) -> np.ndarray:
    """Columns ``z_k - z_1`` for k = 2..m, shape ``(..., d, m-1)``."""
    pts = _stack_points(points)
    return np.swapaxes(pts[..., 1:, :] - pts[..., :1, :], -1, -2)


def gram_matrix(points) -> np.ndarray:
    """Gram matrix of the simplex edge vectors, shape ``(..., m-1, m-1)``."""
    u = edge_matrix(points)
    return np.swapaxes(u, -1, -2) @ u


def _stack_points(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        pts = points.astype(np.float64, copy=False)
    else:
        pts = np.stack(_as_vectors(*points), axis=-2)
    if pts.ndim < 2:
        raise DimensionMismatchError("points must have shape (..., m, d)")
    m = pts.shape[-2]
    if m < 2:
        raise TooFewPointsError(f"need at least 2 points, got {m}")
    if m > MAX_POINTS:
        raise TooFewPointsError(f"at most {MAX_POINTS} points supported, got {m}")
    return pts


def gram_volume(points):
    """Simplex volume straight from ``sqrt(max(det G, 0)) / (m-1)!``.

    Kept as an independent route for cross-checking :func:`simplex_volume`.
    """
    g = gram_matrix(points)
    m = g.shape[-1] + 1
    det = np.linalg.det(g)
    return _scalar(np.sqrt(np.maximum(det, 0.0)) / math.factorial(m - 1))


def simplex_volume(points: Sequence | np.ndarray):
    """Generalized (m-1)-volume of the simplex spanned by ``m`` points.

    ``sqrt(det(U^T U))`` is evaluated as ``|prod diag(R)|`` from a QR
    factorization of the edge matrix ``U``. This is the same quantity as the
    Gram determinant but does not lose half the significant digits when the
    simplex is nearly flat.
    """
    u = edge_matrix(points)
    d, k = u.shape[-2], u.shape[-1]
    if d < k:
        return _scalar(np.zeros(u.shape[:-2]))
    r = np.linalg.qr(u, mode="r")
    diag = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
    return _scalar(np.prod(diag, axis=-1) / math.factorial(k))


def triangle_area(x, y, z):
    """Area of the triangle (x, y, z): half the Gram-determinant square root."""
    x, y, z = _as_vectors(x, y, z)
    u = y - x
    v = z - x
    uu = np.einsum("...i,...i->...", u, u)
    vv = np.einsum("...i,...i->...", v, v)
    uv = np.einsum("...i,...i->...", u, v)
    return _scalar(0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0)))


def pairwise_cosines(x, y, z) -> CosineTriple:
    x, y, z = _as_vectors(x, y, z)
    dot = lambda p, q: np.clip(np.einsum("...i,...i->...", p, q), -1.0, 1.0)  # noqa: E731
    return CosineTriple(_scalar(dot(x, y)), _scalar(dot(x, z)), _scalar(dot(y, z)))


def area_radicand(t: CosineTriple):
    a, b, c = (np.asarray(v, dtype=np.float64) for v in t)
    s = c - b - a + 1.0
    return (2.0 - 2.0 * a) * (2.0 - 2.0 * b) - s * s


def area_from_cosines(t: CosineTriple):
    """Triangle area of three unit vectors as a function of their cosines."""
    return _scalar(0.5 * np.sqrt(np.maximum(area_radicand(t), 0.0)))


def random_unit(rng: np.random.Generator, shape, d: int) -> np.ndarray:
    """Uniform samples on the (d-1)-sphere."""
    if isinstance(shape, int):
        shape = (shape,)
    return normalize(rng.standard_normal((*shape, d)))
