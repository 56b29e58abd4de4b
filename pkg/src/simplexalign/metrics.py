"""Control-relevant score: per-dimension min-max normalized probe scores."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AllDimensionsDegenerateError, EmptyInputError, LengthMismatchError, TooFewModelsError


def neg_mse(preds, truths) -> float:
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(truths, dtype=np.float64).ravel()
    if p.size == 0 or t.size == 0:
        raise EmptyInputError("predictions and truths must be non-empty")
    if p.size != t.size:
        raise LengthMismatchError(f"{p.size} predictions vs {t.size} truths")
    return -float(np.mean((p - t) ** 2))


@dataclass
class ScoreResult:
    models: list[str]
    scores: np.ndarray
    included: list[str]
    excluded: list[str] = field(default_factory=list)


def control_relevant_score(raw, models: Sequence[str] | None = None, dimensions: Sequence[str] | None = None) -> ScoreResult:
    """Average over state dimensions of ``(r - min) / (max - min)`` across models.

    ``raw`` is a models-by-dimensions matrix of negative MSEs. Dimensions on
    which every model scores the same are left out of the average and listed
    in ``ScoreResult.excluded``.
    """
    r = np.asarray(raw, dtype=np.float64)
    if r.ndim != 2 or r.shape[1] < 1:
        raise EmptyInputError("score matrix must be models x dimensions with at least one dimension")
    if r.shape[0] < 2:
        raise TooFewModelsError(f"need at least 2 models, got {r.shape[0]}")
    if not np.all(np.isfinite(r)):
        raise ValueError("scores must be finite")
    models = list(models) if models is not None else [f"model_{i}" for i in range(r.shape[0])]
    dimensions = list(dimensions) if dimensions is not None else [f"dim_{j}" for j in range(r.shape[1])]
    lo = r.min(axis=0)
    hi = r.max(axis=0)
    span = hi - lo
    keep = span > 0
    if not np.any(keep):
        raise AllDimensionsDegenerateError("every dimension has identical scores across models")
    norm = (r[:, keep] - lo[keep]) / span[keep]
    return ScoreResult(
        models=models,
        scores=norm.mean(axis=1),
        included=[d for d, k in zip(dimensions, keep) if k],
        excluded=[d for d, k in zip(dimensions, keep) if not k],
    )


def read_score_table(lines: Iterable[str]) -> tuple[np.ndarray, list[str], list[str]]:
    """Parse ``model,dimension,value`` rows (an optional header row is skipped)."""
    entries: dict[tuple[str, str], float] = {}
    models: list[str] = []
    dims: list[str] = []
    for n, row in enumerate(csv.reader(lines)):
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 3:
            raise ValueError(f"row {n + 1}: expected model,dimension,value")
        model, dim, value = (c.strip() for c in row)
        try:
            x = float(value)
        except ValueError:
            if n == 0:
                continue
            raise ValueError(f"row {n + 1}: bad value {value!r}") from None
        if (model, dim) in entries:
            raise ValueError(f"row {n + 1}: duplicate entry for {model}/{dim}")
        entries[model, dim] = x
        if model not in models:
            models.append(model)
        if dim not in dims:
            dims.append(dim)
    missing = [(m, d) for m in models for d in dims if (m, d) not in entries]
    if missing:
        raise ValueError(f"missing scores for {missing[:3]}")
    mat = np.array([[entries[m, d] for d in dims] for m in models])
    return mat, models, dims
