"""Five-frame clip sampling and sequential transition pairs."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import ClipTooShortError

N_FRAMES = 5


class FrameSample(NamedTuple):
    indices: tuple[int, int, int, int, int]


def band_width(clip_len: int) -> int:
    """Frames in the first (or last) 10% of a clip, ``ceil(T / 10)``."""
    return -(-clip_len // 10)


def frame_sample(clip_len: int, seed: int = 0) -> FrameSample:
    """Initial frame from the first 10%, final from the last 10%, three sorted frames between."""
    if clip_len < N_FRAMES:
        raise ClipTooShortError(f"clip of {clip_len} frames is shorter than {N_FRAMES}")
    rng = np.random.default_rng([seed, clip_len])
    band = band_width(clip_len)
    first = int(rng.integers(0, band))
    last = int(rng.integers(clip_len - band, clip_len))
    between = last - first - 1
    if between < 3:
        # Bands too tight to leave three interior frames: fall back to even spacing.
        idx = np.round(np.linspace(0, clip_len - 1, N_FRAMES)).astype(int)
        return FrameSample(tuple(int(i) for i in idx))
    mid = np.sort(rng.choice(between, size=3, replace=False)) + first + 1
    return FrameSample((first, *(int(i) for i in mid), last))


def transition_pairs(sample: FrameSample) -> list[tuple[int, int]]:
    idx = sample.indices if isinstance(sample, FrameSample) else tuple(sample)
    return [(idx[k], idx[k + 1]) for k in range(len(idx) - 1)]
