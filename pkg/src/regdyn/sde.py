"""Continuous-time stochastic FTRL, dY = v(Q(Y)) dt + Sigma dW.

Euler-Maruyama in the dual space, plus an exact sampler for the
Ornstein-Uhlenbeck process that solves the quadratic saddle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Ensemble, integrate, resolve_workers, run_blocks
from .errors import DomainError, SimulationError
from .noise import NoiseSpec, brownian_increment
from .regularizers import as_joint

MAX_STEPS = 10**9


@dataclass(frozen=True)
class SdeConfig:
    dt: float = 1e-3
    horizon: float = 1.0
    record_stride: int = 1
    n_paths: int = 1
    y0: tuple[float, ...] | None = None
    y0_space: str = "dual"

    def __post_init__(self):
        if not self.dt > 0 or not self.horizon > 0:
            raise DomainError("dt and horizon must be positive")
        if self.dt > self.horizon:
            raise DomainError("dt must not exceed the horizon")
        if self.horizon / self.dt > MAX_STEPS:
            raise DomainError(f"horizon/dt exceeds {MAX_STEPS} steps")
        if self.record_stride < 1 or self.n_paths < 1:
            raise DomainError("record_stride and n_paths must be at least 1")
        if self.y0_space not in ("dual", "primal"):
            raise DomainError("y0_space must be 'dual' or 'primal'")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


def initial_scores(reg, config: SdeConfig, n: int) -> np.ndarray:
    d = reg.dim
    if config.y0 is None:
        return np.zeros((n, d))
    y0 = np.asarray(config.y0, dtype=float)
    if y0.shape != (d,):
        raise DomainError(f"y0 has {y0.size} coordinates, state has {d}")
    if config.y0_space == "primal":
        if reg.kind != "euclidean":
            raise DomainError("primal initial points are only accepted for the unconstrained Euclidean regularizer")
        y0 = reg.preimage(y0)
    return np.tile(y0, (n, 1))


def euler_maruyama_step(y, game, reg, noise: NoiseSpec, dt: float, rng):
    """One step y + v(Q(y)) dt + Sigma dW."""
    if not dt > 0:
        raise DomainError("time step must be positive")
    y = np.asarray(y, dtype=float)
    x = reg.mirror(y)
    out = y + game.gradient_field(x) * dt + brownian_increment(noise, x, dt, rng)
    if not np.all(np.isfinite(out)):
        raise SimulationError("Euler-Maruyama step produced a non-finite state")
    return out


def _sde_block(game, reg, noise, config, seed, monitors, path_ids):
    reg = as_joint(reg)
    n, d = len(path_ids), reg.dim
    dt = config.dt
    sq = np.sqrt(dt)
    zero = noise.model == "isotropic" and noise.sigma == 0

    def advance(y, x, xi):
        y = y + game.gradient_field(x) * dt
        if not zero:
            y = y + sq * noise.apply(xi)
        return y

    times, scores, events = integrate(
        initial_scores(reg, config, n), advance, reg, config.n_steps, dt,
        noise.width(d), config.record_stride, seed, path_ids, monitors,
    )
    return Ensemble(times, scores, reg, np.asarray(path_ids), events, _metadata(game, reg, noise, seed, dt=dt))


def _metadata(game, reg, noise, seed, **extra):
    meta = {
        "game": game.name,
        "regularizer": reg.kind,
        "noise": noise.describe(reg.dim),
        "seed": int(seed),
    }
    meta.update(extra)
    return meta


def simulate_sde(game, reg, noise: NoiseSpec, config: SdeConfig, seed: int, path_ids=None, monitors=(), workers=None):
    """Simulate ``config.n_paths`` independent S-FTRL paths.

    ``path_ids`` defaults to ``range(n_paths)`` and selects the random stream
    of each path. ``monitors`` observe every step (see ``regdyn.monitors``).
    """
    reg = as_joint(reg)
    if reg.dim != game.dim:
        raise DomainError(f"regularizer dimension {reg.dim} does not match game dimension {game.dim}")
    if path_ids is None:
        path_ids = np.arange(config.n_paths)
    return run_blocks(_sde_block, path_ids, resolve_workers(workers), game, reg, noise, config, seed, tuple(monitors))


def ou_exact_step(x, dt: float, sigma: float, rng):
    """Exact transition of dX = -X dt + sigma dW over a step dt."""
    if not dt > 0:
        raise DomainError("time step must be positive")
    x = np.asarray(x, dtype=float)
    a = np.exp(-dt)
    s = sigma * np.sqrt(-np.expm1(-2 * dt) / 2)
    return x * a + s * rng.standard_normal(x.shape)


def _ou_block(sigma, x0, dt, n_steps, record_stride, seed, monitors, path_ids):
    from .regularizers import make_regularizer

    x0 = np.asarray(x0, dtype=float)
    reg = make_regularizer("euclidean", (1,) * x0.size)
    a = np.exp(-dt)
    s = sigma * np.sqrt(-np.expm1(-2 * dt) / 2)

    def advance(y, x, xi):
        return y * a + s * xi

    times, scores, events = integrate(
        np.tile(x0, (len(path_ids), 1)), advance, reg, n_steps, dt, x0.size,
        record_stride, seed, path_ids, monitors,
    )
    meta = {"game": "quadratic", "regularizer": "euclidean", "sampler": "ou-exact", "sigma": sigma, "seed": int(seed), "dt": dt}
    return Ensemble(times, scores, reg, np.asarray(path_ids), events, meta)


def simulate_ou_exact(sigma: float, x0, dt: float, horizon: float, n_paths: int, seed: int,
                      record_stride: int = 1, path_ids=None, monitors=(), workers=None):
    """Ensemble of exact OU paths on a uniform grid (the quadratic saddle's S-GDA)."""
    config = SdeConfig(dt=dt, horizon=horizon, record_stride=record_stride, n_paths=n_paths)
    if path_ids is None:
        path_ids = np.arange(n_paths)
    return run_blocks(
        _ou_block, path_ids, resolve_workers(workers), float(sigma), tuple(np.asarray(x0, dtype=float)),
        dt, config.n_steps, record_stride, seed, tuple(monitors),
    )
