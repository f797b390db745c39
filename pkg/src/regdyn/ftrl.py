"""Discrete constant-step FTRL with stochastic first-order feedback.

    y_{n+1} = y_n + gamma * (v(x_n) + U_n),   x_n = Q(y_n)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Ensemble, integrate, resolve_workers, run_blocks
from .errors import DomainError, SimulationError
from .noise import NoiseSpec, generators, sfo
from .regularizers import as_joint, fenchel_coupling

MAX_TOTAL_STEPS = 10**10
INIT_MODES = ("zero", "uniform-random-primal")


@dataclass(frozen=True)
class FtrlConfig:
    step: float = 0.1
    n_steps: int = 100
    n_runs: int = 1
    record_stride: int = 1
    init: str | tuple[float, ...] = "zero"

    def __post_init__(self):
        if not (self.step > 0 and np.isfinite(self.step * self.n_steps)):
            raise DomainError("step must be positive and step * n_steps finite")
        if self.n_steps < 1 or self.n_runs < 1 or self.record_stride < 1:
            raise DomainError("n_steps, n_runs and record_stride must be at least 1")
        if self.n_steps * self.n_runs > MAX_TOTAL_STEPS:
            raise DomainError(f"n_runs * n_steps exceeds {MAX_TOTAL_STEPS}")
        if isinstance(self.init, str):
            if self.init not in INIT_MODES:
                raise DomainError(f"unknown init {self.init!r}; use {' or '.join(INIT_MODES)} or a dual vector")
        else:
            object.__setattr__(self, "init", tuple(float(v) for v in self.init))


def initial_scores(reg, init, gens) -> np.ndarray:
    """Starting scores for each path; random inits consume the path stream first."""
    n, d = len(gens), reg.dim
    if isinstance(init, str) and init == "zero":
        return np.zeros((n, d))
    if isinstance(init, str):
        x0 = np.stack([reg.sample_uniform(g) for g in gens])
        return reg.preimage(x0)
    y0 = np.asarray(init, dtype=float)
    if y0.shape != (d,):
        raise DomainError(f"initial score has {y0.size} coordinates, state has {d}")
    return np.tile(y0, (n, 1))


def ftrl_step(y, game, reg, noise: NoiseSpec, gamma: float, rng):
    """One FTRL update y + gamma * SFO(Q(y))."""
    if not gamma > 0:
        raise DomainError("step size must be positive")
    y = np.asarray(y, dtype=float)
    out = y + gamma * sfo(game, noise, reg.mirror(y), rng)
    if not np.all(np.isfinite(out)):
        raise SimulationError("FTRL step produced a non-finite state")
    return out


def _ftrl_block(game, reg, noise, config, seed, monitors, path_ids):
    d = reg.dim
    gamma = config.step
    zero = noise.model == "isotropic" and noise.sigma == 0
    gens = generators(seed, path_ids)
    y0 = initial_scores(reg, config.init, gens)

    def advance(y, x, xi):
        g = game.gradient_field(x)
        if not zero:
            g = g + noise.apply(xi)
        return y + gamma * g

    times, scores, events = integrate(
        y0, advance, reg, config.n_steps, 1.0, noise.width(d),
        config.record_stride, seed, path_ids, monitors, gens=gens,
    )
    meta = {
        "game": game.name,
        "regularizer": reg.kind,
        "noise": noise.describe(d),
        "seed": int(seed),
        "gamma": gamma,
        "init": config.init if isinstance(config.init, str) else list(config.init),
    }
    return Ensemble(times.astype(np.int64), scores, reg, np.asarray(path_ids), events, meta)


def run_ftrl(game, reg, noise: NoiseSpec, config: FtrlConfig, seed: int, path_ids=None, monitors=(), workers=None):
    """``config.n_runs`` independent FTRL runs; times are step indices."""
    reg = as_joint(reg)
    if reg.dim != game.dim:
        raise DomainError(f"regularizer dimension {reg.dim} does not match game dimension {game.dim}")
    if path_ids is None:
        path_ids = np.arange(config.n_runs)
    return run_blocks(_ftrl_block, path_ids, resolve_workers(workers), game, reg, noise, config, seed, tuple(monitors))


def fenchel_energy_curve(traj, p) -> np.ndarray:
    """F(p, y_n) at every recorded step of a trajectory or ensemble."""
    return fenchel_coupling(traj.regularizer, np.asarray(p, dtype=float), traj.scores)
