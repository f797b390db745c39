"""Closed-form hitting-time and occupation bounds.

All calculators are pure functions of scalars and raise ``DomainError``
outside the parameter range where the bound is meaningful.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError


class Bound(NamedTuple):
    value: float
    r_sigma: float


def _positive(**kw):
    for k, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise DomainError(f"{k} must be positive, got {v}")


def _above_noise_radius(r, r_sigma):
    if not r > r_sigma:
        raise DomainError(f"bound vacuous below noise radius: r = {r} <= r_sigma = {r_sigma}")


def bound_hit_quadratic(x0_norm: float, r: float, sigma: float) -> float:
    """E[tau_r] <= (|x0|^2 - r^2) / (2 (r^2 - sigma^2)) for the quadratic saddle."""
    if not 0 <= sigma < r < x0_norm:
        raise DomainError(f"need 0 <= sigma < r < |x0|, got sigma={sigma}, r={r}, |x0|={x0_norm}")
    return 0.5 * (x0_norm**2 - r**2) / (r**2 - sigma**2)


def noise_radius_cont(sigma_max: float, K: float, beta: float) -> float:
    _positive(K=K, beta=beta)
    return sigma_max / math.sqrt(2 * K * beta)


def bound_hit_strong_cont(F0: float, beta: float, K: float, sigma_max: float, r: float) -> Bound:
    """(F0 / beta) / (r^2 - r_sigma^2), with r_sigma = sigma_max / sqrt(2 K beta)."""
    if F0 < 0:
        raise DomainError("F0 must be non-negative")
    rs = noise_radius_cont(sigma_max, K, beta)
    _above_noise_radius(r, rs)
    return Bound((F0 / beta) / (r**2 - rs**2), rs)


def bound_occupation_cont(r: float, r_sigma: float) -> float:
    """Asymptotic lower bound 1 - r_sigma^2 / r^2 on the ball's occupation."""
    _above_noise_radius(r, r_sigma)
    return 1.0 - r_sigma**2 / r**2


def bound_hit_null_cont_plus(eps: float, kappa: float, sigma_min: float) -> float:
    """E[tau_eps^+] <= 2 eps / (kappa sigma_min^2) in null-monotone games."""
    _positive(eps=eps, kappa=kappa, sigma_min=sigma_min)
    return 2 * eps / (kappa * sigma_min**2)


def noise_radius_disc(gamma: float, sigma_sq: float, L: float, beta: float, K: float) -> float:
    _positive(gamma=gamma, beta=beta, K=K)
    if sigma_sq < 0 or L < 0:
        raise DomainError("sigma_sq and L must be non-negative")
    return math.sqrt(gamma * (sigma_sq + L**2) / (beta * K))


def bound_stop_strong_disc(F0, beta, K, gamma, sigma_sq, L, r, started_inside: bool) -> Bound:
    """Expected number of steps to reach B_r(x*) under constant-step FTRL.

    Outside start: F0 / (beta gamma (r^2 - r_sigma^2)).
    Inside start (return time, n >= 1): (F0 + beta gamma r^2) / (beta gamma (r^2 - r_sigma^2)).
    """
    if F0 < 0:
        raise DomainError("F0 must be non-negative")
    rs = noise_radius_disc(gamma, sigma_sq, L, beta, K)
    _above_noise_radius(r, rs)
    num = F0 + beta * gamma * r**2 if started_inside else F0
    return Bound(num / (beta * gamma * (r**2 - rs**2)), rs)


def bound_occupation_disc(r: float, r_sigma: float) -> float:
    """Long-run lower bound 1 - r_sigma^2 / r^2; the ball must lie in the relative interior."""
    _above_noise_radius(r, r_sigma)
    return 1.0 - r_sigma**2 / r**2


def ball_in_relative_interior(game, r: float, norm: str = "l2") -> bool:
    """Whether B_r(x*) stays inside every player's feasible region (box/full geometries)."""
    xs = game.x_star
    for g, sl in zip(game.geometries, game.slices):
        if g.kind == "full":
            continue
        if g.kind == "box":
            gap = min(np.min(xs[sl] - float(g.lo)), np.min(float(g.hi) - xs[sl]))
            if gap <= r:
                return False
        else:
            # simplex: the ball must keep every coordinate positive
            if np.min(xs[sl]) <= (r if norm == "l2" else r / 2):
                return False
    return True


def estimate_kappa(reg, scores, energies, level: float) -> float:
    """Smallest mirror-Jacobian trace over recorded states with energy <= level.

    For the unconstrained Euclidean regularizer this is the dimension.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1, reg.dim)
    mask = np.asarray(energies, dtype=float).reshape(-1) <= level
    if reg.kind == "euclidean":
        return float(reg.dim)
    if not mask.any():
        raise DomainError("no recorded state lies in the energy sublevel set")
    return float(np.min(reg.jacobian_trace(scores[mask])))


def default_ball_norm(game) -> str:
    return "l1" if any(g.kind == "simplex" for g in game.geometries) else "l2"
