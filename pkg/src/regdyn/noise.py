"""Gradient noise for the discrete oracle and diffusion increments for the SDE.

Randomness comes from counter-based Philox streams keyed by ``(seed, stream)``:
each Monte Carlo path owns one stream, so the numbers a path sees do not depend
on how paths are scheduled across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

NOISE_MODELS = ("isotropic", "matrix")


@dataclass(frozen=True)
class SeededStream:
    """Identifier of an independent random stream.

    ``index`` is a path identifier; tuples allow nesting (sweep cell, path).
    """

    seed: int
    index: tuple[int, ...] | int = 0

    @property
    def key(self) -> tuple[int, ...]:
        return self.index if isinstance(self.index, tuple) else (int(self.index),)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) % 2**64, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def generators(seed: int, path_ids, prefix: tuple[int, ...] = ()):
    return [SeededStream(seed, prefix + (int(i),)).generator() for i in path_ids]


def draw_normals(gens, n_steps: int, width: int) -> np.ndarray:
    """Standard normals of shape (n_steps, n_paths, width), one stream per path."""
    out = np.empty((n_steps, len(gens), width))
    for j, g in enumerate(gens):
        out[:, j, :] = g.standard_normal((n_steps, width))
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Either isotropic Gaussian noise of scale ``sigma`` or a constant diffusion matrix."""

    model: str = "isotropic"
    sigma: float = 0.0
    matrix: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.model not in NOISE_MODELS:
            raise DomainError(f"unknown noise model {self.model!r}; valid models: {', '.join(NOISE_MODELS)}")
        if self.model == "isotropic" and not self.sigma >= 0:
            raise DomainError("noise sigma must be non-negative")
        if self.model == "matrix":
            if self.matrix is None:
                raise DomainError("matrix noise model needs a diffusion matrix")
            object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in self.matrix))

    @cached_property
    def Sigma(self) -> np.ndarray | None:
        return None if self.matrix is None else np.array(self.matrix, dtype=float)

    def width(self, d: int) -> int:
        """Number of driving standard normals per step for a d-dimensional state."""
        if self.model == "isotropic":
            return d
        if self.Sigma.shape[0] != d:
            raise DomainError(f"diffusion matrix has {self.Sigma.shape[0]} rows, state has {d} coordinates")
        return self.Sigma.shape[1]

    def covariation(self, d: int) -> np.ndarray:
        """Psi = Sigma Sigma'."""
        if self.model == "isotropic":
            return self.sigma**2 * np.eye(d)
        return self.Sigma @ self.Sigma.T

    def sigma_min_sq(self, d: int) -> float:
        if self.model == "isotropic":
            return float(self.sigma**2)
        return float(np.linalg.eigvalsh(self.covariation(d))[0])

    def sigma_max_sq(self, d: int) -> float:
        if self.model == "isotropic":
            return float(self.sigma**2)
        return float(np.linalg.eigvalsh(self.covariation(d))[-1])

    def sigma_eff_sq(self, d: int) -> float:
        """E||U||^2 in l2, i.e. trace(Psi).

        Exact for the Euclidean dual norm and an upper bound for l-inf blocks;
        this is the value the discrete-time bounds use as the noise variance.
        """
        if self.model == "isotropic":
            return float(d * self.sigma**2)
        return float(np.trace(self.covariation(d)))

    def apply(self, xi):
        """Map standard normals (..., width) to noise vectors (..., d)."""
        xi = np.asarray(xi, dtype=float)
        if self.model == "isotropic":
            return self.sigma * xi
        return np.sum(self.Sigma * xi[..., None, :], axis=-1)

    def describe(self, d: int) -> dict:
        return {
            "model": self.model,
            "sigma": self.sigma,
            "matrix": None if self.matrix is None else [list(r) for r in self.matrix],
            "sigma_min_sq": self.sigma_min_sq(d),
            "sigma_max_sq": self.sigma_max_sq(d),
            "sigma_eff_sq": self.sigma_eff_sq(d),
        }


def sample_gradient_noise(noise: NoiseSpec, x, rng: np.random.Generator):
    """Zero-mean oracle error U(x; omega), one draw per row of ``x``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if noise.model == "isotropic" and noise.sigma == 0:
        return np.zeros_like(x)
    xi = rng.standard_normal(x.shape[:-1] + (noise.width(d),))
    return noise.apply(xi)


def sfo(game, noise: NoiseSpec, x, rng: np.random.Generator):
    """Stochastic first-order oracle v(x) + U(x; omega)."""
    return game.gradient_field(x) + sample_gradient_noise(noise, x, rng)


def brownian_increment(noise: NoiseSpec, x, dt: float, rng: np.random.Generator):
    """Sigma dW over a step of length dt."""
    if not dt > 0:
        raise DomainError("time step must be positive")
    return np.sqrt(dt) * sample_gradient_noise(noise, x, rng)
