"""Two-layer MLP encoders whose outputs live on the unit sphere."""

from __future__ import annotations

import numpy as np

HIDDEN = 64


class ToyEncoder:
    """``normalize(W2 tanh(W1 x + b1) + b2)`` with a hand-written backward pass."""

    def __init__(self, in_dim: int, output_dim: int, rng: np.random.Generator, hidden: int = HIDDEN):
        self.params = {
            "W1": rng.standard_normal((in_dim, hidden)) * np.sqrt(1.0 / in_dim),
            "b1": np.zeros(hidden),
            "W2": rng.standard_normal((hidden, output_dim)) * np.sqrt(1.0 / hidden),
            "b2": np.zeros(output_dim),
        }
        self.output_dim = output_dim

    def forward(self, x: np.ndarray, cache: bool = False):
        p = self.params
        h = np.tanh(x @ p["W1"] + p["b1"])
        out = h @ p["W2"] + p["b2"]
        norm = np.linalg.norm(out, axis=-1, keepdims=True)
        z = out / np.maximum(norm, 1e-12)
        if cache:
            return z, (x, h, z, norm)
        return z

    __call__ = forward

    def backward(self, grad_z: np.ndarray, saved) -> dict:
        """Parameter gradients given ``dL/dz`` for the normalized outputs."""
        x, h, z, norm = saved
        p = self.params
        g_out = (grad_z - np.sum(grad_z * z, axis=-1, keepdims=True) * z) / norm
        g_h = (g_out @ p["W2"].T) * (1.0 - h * h)
        return {
            "W1": x.T @ g_h,
            "b1": g_h.sum(axis=0),
            "W2": h.T @ g_out,
            "b2": g_out.sum(axis=0),
        }

    def state(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


class TripletEncoders:
    """One encoder per modality; the image encoder reads concatenated frame pairs."""

    def __init__(self, in_dims: tuple[int, int, int], output_dim: int, seed: int, hidden: int = HIDDEN):
        rng = np.random.default_rng([seed, 1])
        n_L, n_I, n_F = in_dims
        self.L = ToyEncoder(n_L, output_dim, rng, hidden)
        self.I = ToyEncoder(2 * n_I, output_dim, rng, hidden)
        self.F = ToyEncoder(n_F, output_dim, rng, hidden)

    @property
    def modules(self):
        return {"L": self.L, "I": self.I, "F": self.F}

    @staticmethod
    def inputs(data, idx=None):
        sl = slice(None) if idx is None else idx
        obs_I = data.obs_I[sl]
        return data.obs_L[sl], obs_I.reshape(obs_I.shape[0], -1), data.obs_F[sl]

    def embed(self, data, idx=None) -> np.ndarray:
        """Embeddings of shape ``(3, n, d)``."""
        xs = self.inputs(data, idx)
        return np.stack([enc(x) for enc, x in zip(self.modules.values(), xs)])

    def state(self) -> dict:
        return {f"{name}.{k}": v for name, enc in self.modules.items() for k, v in enc.state().items()}

    def load_state(self, state: dict) -> None:
        for key, value in state.items():
            name, param = key.split(".")
            self.modules[name].params[param] = np.array(value, dtype=np.float64)
