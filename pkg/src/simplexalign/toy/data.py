"""Seeded synthetic language / image-transition / flow triplets."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class SyntheticTripletSpec:
    latent_dim: int = 8
    obs_dims: tuple[int, int, int] = (32, 32, 32)
    noise_std: float = 0.05
    count: int = 512
    seed: int = 0
    # Per-coordinate standard deviation of the noiseless signal.
    signal_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "obs_dims", tuple(int(n) for n in self.obs_dims))
        if self.noise_std < 0 or self.signal_scale <= 0:
            raise ValueError("noise_std must be >= 0 and signal_scale > 0")
        if self.count < 2:
            raise ValueError("count must be >= 2")
        if self.latent_dim < 1 or len(self.obs_dims) != 3 or min(self.obs_dims) < 1:
            raise ValueError("latent_dim and obs_dims must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["obs_dims"] = list(self.obs_dims)
        return d


@dataclass
class TripletDataset:
    """Observations for ``count`` items.

    The image modality is a transition: ``obs_I`` has shape ``(count, 2, n_I)``
    holding a before and an after frame, each a separate linear view of the
    latent.
    """

    obs_L: np.ndarray
    obs_I: np.ndarray
    obs_F: np.ndarray
    latent_id: np.ndarray
    latents: np.ndarray
    maps: dict

    def __len__(self) -> int:
        return self.obs_L.shape[0]

    def subset(self, idx) -> "TripletDataset":
        idx = np.asarray(idx)
        return TripletDataset(
            self.obs_L[idx], self.obs_I[idx], self.obs_F[idx], self.latent_id[idx], self.latents[idx], self.maps
        )


def gen_triplets(spec: SyntheticTripletSpec) -> TripletDataset:
    rng = np.random.default_rng(spec.seed)
    k = spec.latent_dim
    n_L, n_I, n_F = spec.obs_dims
    scale = spec.signal_scale / np.sqrt(k)
    maps = {
        "L": rng.standard_normal((n_L, k)) * scale,
        "I0": rng.standard_normal((n_I, k)) * scale,
        "I1": rng.standard_normal((n_I, k)) * scale,
        "F": rng.standard_normal((n_F, k)) * scale,
    }
    u = rng.standard_normal((spec.count, k))

    def view(name, n):
        return u @ maps[name].T + spec.noise_std * rng.standard_normal((spec.count, n))

    obs_L = view("L", n_L)
    obs_I = np.stack([view("I0", n_I), view("I1", n_I)], axis=1)
    obs_F = view("F", n_F)
    return TripletDataset(obs_L, obs_I, obs_F, np.arange(spec.count), u, maps)
