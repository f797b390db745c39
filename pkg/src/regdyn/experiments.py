"""Reference experiments comparing simulated dynamics with their theoretical bounds.

Each ``check_*`` function runs one Monte Carlo protocol and returns a
``CheckResult`` whose ``passed`` flag applies the protocol's tolerance. The
grid functions reproduce the step-size / noise sweeps on the unit-square
min-max game and the corner concentration in matching pennies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import bounds, stats
from .ftrl import FtrlConfig, fenchel_energy_curve, run_ftrl
from .games import GAME_IDS, make_game, monotonicity_gap, weakest_direction
from .monitors import BallHit, BallOccupation, FenchelCrossing
from .noise import NoiseSpec
from .regularizers import KINDS, fenchel_coupling, make_regularizer
from .sde import SdeConfig, simulate_ou_exact, simulate_sde

GAMMAS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)
SIGMAS = (0.01, 0.05, 0.1, 0.5, 1.0)
RADII = (0.005, 0.01, 0.05, 0.1)


@dataclass
class CheckResult:
    name: str
    passed: bool
    empirical: dict = field(default_factory=dict)
    theoretical: dict = field(default_factory=dict)
    notes: str = ""

    def line(self) -> str:
        parts = [f"{k}={_fmt(v)}" for k, v in self.empirical.items()]
        parts += [f"{k}={_fmt(v)}" for k, v in self.theoretical.items()]
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: " + ", ".join(parts)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "empirical": _jsonable(self.empirical),
            "theoretical": _jsonable(self.theoretical),
            "notes": self.notes,
        }


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(u) for u in v) + "]"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _sq_norms(ens):
    return np.sum(ens.actions**2, axis=-1)


# -- continuous time ---------------------------------------------------------


def check_ou_stationarity(sigmas=(0.5, 1.0), n_paths=2000, horizon=10.0, dt=1e-3, seed=0, workers=None):
    """E|X_T|^2 = sigma^2 for the quadratic saddle, exact sampler vs. Euler-Maruyama."""
    game = make_game("quadratic")
    reg = make_regularizer("euclidean", game.player_dims)
    emp, theo, ok = {}, {}, True
    for k, s in enumerate(sigmas):
        exact = simulate_ou_exact(s, (1.0, 0.0), horizon, horizon, n_paths, seed + 2 * k, workers=workers)
        em = simulate_sde(
            game, reg, NoiseSpec(sigma=s),
            SdeConfig(dt=dt, horizon=horizon, record_stride=int(round(horizon / dt)), n_paths=n_paths, y0=(1.0, 0.0)),
            seed + 2 * k + 1, workers=workers,
        )
        m_ex, se_ex = stats.mean_with_stderr(_sq_norms(exact)[:, -1])
        m_em, se_em = stats.mean_with_stderr(_sq_norms(em)[:, -1])
        target = s**2
        ok_exact = abs(m_ex - target) <= max(0.05 * target, 3 * se_ex)
        ok_em = abs(m_em - m_ex) <= 3 * math.hypot(se_ex, se_em)
        ok &= ok_exact and ok_em
        emp[f"exact[{s}]"] = m_ex
        emp[f"em[{s}]"] = m_em
        emp[f"stderr[{s}]"] = se_ex
        theo[f"sigma^2[{s}]"] = target
    return CheckResult("ou_stationarity", bool(ok), emp, theo)


def check_bilinear_escape(sigma=0.5, n_paths=2000, horizon=10.0, dt=1e-3, seed=0, record_stride=100, workers=None):
    """Slope of E|X_t|^2 in the bilinear saddle equals 2 sigma^2."""
    game = make_game("bilinear")
    reg = make_regularizer("euclidean", game.player_dims)
    ens = simulate_sde(
        game, reg, NoiseSpec(sigma=sigma),
        SdeConfig(dt=dt, horizon=horizon, record_stride=record_stride, n_paths=n_paths, y0=(1.0, 0.0)),
        seed, workers=workers,
    )
    slope, se = stats.escape_slope(ens)
    target = 2 * sigma**2
    ok = abs(slope - target) <= 0.05 * target
    return CheckResult("bilinear_escape", bool(ok), {"slope": slope, "stderr": se}, {"2sigma^2": target})


def check_quadratic_hitting(x0_norm=1.0, r=0.8, sigma=0.5, n_paths=2000, horizon=20.0, dt=1e-3, seed=0, workers=None):
    """Mean hitting time of B_r(0) by the OU process against its closed-form bound."""
    mon = BallHit("hit", (0.0, 0.0), r)
    ens = simulate_ou_exact(sigma, (x0_norm, 0.0), dt, horizon, n_paths, seed,
                            record_stride=int(round(horizon / dt)), monitors=(mon,), workers=workers)
    st = stats.HittingTimeStats.from_times(ens.events["hit"], horizon)
    bound = bounds.bound_hit_quadratic(x0_norm, r, sigma)
    ok = st.censoring < 0.01 and st.mean is not None and st.mean <= bound + 3 * st.stderr
    return CheckResult(
        "quadratic_hitting", bool(ok),
        {"mean": st.mean, "stderr": st.stderr, "censoring": st.censoring}, {"bound": bound},
    )


def check_null_asymmetry(sigma=0.5, x0_norm=1.0, eps_frac=0.5, n_paths=2000, horizon=20.0, dt=1e-3, seed=0, workers=None):
    """Energy crossing asymmetry in the bilinear saddle.

    tau^+ should be censored on fewer than 10% of paths with mean below the
    bound; tau^- should be censored on more than 90% of paths.
    """
    game = make_game("bilinear")
    reg = make_regularizer("euclidean", game.player_dims)
    F0 = 0.5 * x0_norm**2
    eps = eps_frac * F0
    mon = FenchelCrossing("F", (0.0, 0.0), eps)
    ens = simulate_sde(
        game, reg, NoiseSpec(sigma=sigma),
        SdeConfig(dt=dt, horizon=horizon, record_stride=int(round(horizon / dt)), n_paths=n_paths, y0=(x0_norm, 0.0)),
        seed, monitors=(mon,), workers=workers,
    )
    plus = stats.HittingTimeStats.from_times(ens.events["F.plus"], horizon)
    minus = stats.HittingTimeStats.from_times(ens.events["F.minus"], horizon)
    energies = fenchel_coupling(reg, np.zeros(2), ens.scores)
    kappa = bounds.estimate_kappa(reg, ens.scores, energies, F0 + eps)
    bound = bounds.bound_hit_null_cont_plus(eps, kappa, math.sqrt(NoiseSpec(sigma=sigma).sigma_min_sq(2)))
    ok_plus = plus.censoring < 0.10 and plus.mean is not None and plus.mean <= bound
    ok_minus = minus.censoring > 0.90
    return CheckResult(
        "null_asymmetry", bool(ok_plus and ok_minus),
        {
            "plus_mean": plus.mean, "plus_stderr": plus.stderr, "plus_censoring": plus.censoring,
            "minus_censoring": minus.censoring,
            "plus_ok": bool(ok_plus), "minus_ok": bool(ok_minus),
        },
        {"bound_plus": bound, "kappa": kappa},
    )


def check_strong_occupation(sigma=1.0, n_paths=500, t_from=20.0, horizon=100.0, dt=1e-3, seed=0, workers=None):
    """Long-run occupation of B_{2 r_sigma}(0) in the quadratic saddle."""
    game = make_game("quadratic")
    reg = make_regularizer("euclidean", game.player_dims)
    noise = NoiseSpec(sigma=sigma)
    rs = bounds.noise_radius_cont(math.sqrt(noise.sigma_max_sq(2)), reg.K, game.beta)
    r = 2 * rs
    mon = BallOccupation("occ", (0.0, 0.0), r, t_from=t_from)
    ens = simulate_sde(
        game, reg, noise,
        SdeConfig(dt=dt, horizon=horizon, record_stride=int(round(horizon / dt)), n_paths=n_paths, y0=(1.0, 0.0)),
        seed, monitors=(mon,), workers=workers,
    )
    m, se = stats.mean_with_stderr(ens.events["occ"])
    lb = bounds.bound_occupation_cont(r, rs)
    exact = 1 - math.exp(-(r**2) / sigma**2)
    ok = m >= lb - 3 * se and abs(m - exact) <= 3 * se
    return CheckResult(
        "strong_occupation", bool(ok),
        {"occupation": m, "stderr": se}, {"bound": lb, "stationary": exact, "r": r, "r_sigma": rs},
    )


# -- discrete time -----------------------------------------------------------


def check_null_energy_growth(gamma=0.1, sigma=1.0, n_runs=1000, n_steps=10_000, record_stride=100, seed=0, workers=None):
    """Mean Fenchel energy of FTRL in matching pennies grows without bound."""
    game = make_game("matching_pennies")
    reg = make_regularizer("entropic", game.player_dims)
    ens = run_ftrl(game, reg, NoiseSpec(sigma=sigma),
                   FtrlConfig(step=gamma, n_steps=n_steps, n_runs=n_runs, record_stride=record_stride), seed,
                   workers=workers)
    F = fenchel_energy_curve(ens, game.x_star)
    slope, se = stats.slope_with_stderr(ens.times, F)
    nondec, worst = stats.nondecreasing_beyond_noise(F, z=3.0)
    ok = slope > 3 * se and nondec
    return CheckResult(
        "null_energy_growth", bool(ok),
        {"slope": slope, "stderr": se, "worst_increment_z": worst, "F_final": float(F[:, -1].mean())}, {},
    )


def check_strong_discrete(gamma=0.1, sigma=0.1, n_runs=1000, n_steps=10_000, occ_from=1000, seed=0, workers=None,
                          regularizer="euclidean_box"):
    """Hitting step and occupation of B_{2 r_sigma}(x*) for FTRL on the unit-square game."""
    game = make_game("appendixE")
    reg = make_regularizer(regularizer, game.player_dims)
    noise = NoiseSpec(sigma=sigma)
    sigma_sq = noise.sigma_eff_sq(game.dim)
    rs = bounds.noise_radius_disc(gamma, sigma_sq, game.lipschitz, game.beta, reg.K)
    r = 2 * rs
    xs = game.x_star
    mons = (
        BallHit("hit", tuple(xs), r, include_start=False),
        BallOccupation("occ", tuple(xs), r, t_from=occ_from),
    )
    ens = run_ftrl(game, reg, noise,
                   FtrlConfig(step=gamma, n_steps=n_steps, n_runs=n_runs, record_stride=n_steps,
                              init="uniform-random-primal"),
                   seed, monitors=mons, workers=workers)
    y0 = ens.scores[:, 0]
    F0 = fenchel_coupling(reg, xs, y0)
    inside = np.linalg.norm(reg.mirror(y0) - xs, axis=-1) <= r
    per_run = np.array([
        bounds.bound_stop_strong_disc(f, game.beta, reg.K, gamma, sigma_sq, game.lipschitz, r, bool(i)).value
        for f, i in zip(F0, inside)
    ])
    hit = stats.HittingTimeStats.from_times(ens.events["hit"], n_steps)
    occ, occ_se = stats.mean_with_stderr(ens.events["occ"])
    lb = bounds.bound_occupation_disc(r, rs)
    ok_hit = hit.mean is not None and hit.censoring == 0 and hit.mean <= per_run.mean()
    ok_occ = occ >= lb - 3 * occ_se
    return CheckResult(
        "strong_discrete", bool(ok_hit and ok_occ),
        {
            "hit_mean": hit.mean, "hit_censoring": hit.censoring, "occupation": occ, "occ_stderr": occ_se,
            "started_inside": float(inside.mean()),
        },
        {
            "hit_bound": float(per_run.mean()), "occ_bound": lb, "r": r, "r_sigma": rs,
            "ball_in_relint": bounds.ball_in_relative_interior(game, r),
        },
    )


# -- parameter sweeps on the unit-square game ---------------------------------


@dataclass
class SweepCell:
    gamma: float
    sigma: float
    final_mean: float
    final_stderr: float
    final_std: float
    hits: dict


def ftrl_sweep(game, reg, gammas, sigmas, n_runs, n_steps, seed, radii=(), init="uniform-random-primal",
               workers=None, norm="l2"):
    """FTRL final distances and hitting times over a step-size x noise grid.

    Cell ``(i, j)`` uses the random streams of runs
    ``(i * len(sigmas) + j) * n_runs + k`` so cells are independent.
    """
    cells = []
    xs = game.x_star
    for i, g in enumerate(gammas):
        for j, s in enumerate(sigmas):
            cell = i * len(sigmas) + j
            mons = tuple(BallHit(f"hit[{r}]", tuple(xs), r, norm, include_start=False) for r in radii)
            ens = run_ftrl(game, reg, NoiseSpec(sigma=s),
                           FtrlConfig(step=g, n_steps=n_steps, n_runs=n_runs, record_stride=n_steps, init=init),
                           seed, path_ids=cell * n_runs + np.arange(n_runs), monitors=mons, workers=workers)
            d = stats.final_distances(ens, xs, norm)
            m, se = stats.mean_with_stderr(d)
            hits = {r: stats.HittingTimeStats.from_times(ens.events[f"hit[{r}]"], n_steps) for r in radii}
            cells.append(SweepCell(g, s, m, se, float(d.std(ddof=1)), hits))
    return cells


def restricted_mean(h: stats.HittingTimeStats) -> float:
    """Mean of min(tau, horizon): censored paths count as the horizon."""
    t = np.where(np.isnan(h.times), h.horizon, h.times)
    return float(t.mean())


def axis_spearman(grid):
    """Spearman correlations of a (len gammas, len sigmas) grid along each axis."""
    grid = np.asarray(grid, dtype=float)
    along_gamma = [stats.spearman(np.arange(grid.shape[0]), grid[:, j]) for j in range(grid.shape[1])]
    along_sigma = [stats.spearman(np.arange(grid.shape[1]), grid[i, :]) for i in range(grid.shape[0])]
    return along_gamma, along_sigma


def check_final_distance_grid(gammas=GAMMAS, sigmas=SIGMAS, n_runs=100, n_steps=10_000, seed=0, workers=None,
                              regularizer="binary_entropy", cells=None):
    game = make_game("appendixE")
    reg = make_regularizer(regularizer, game.player_dims)
    if cells is None:
        cells = ftrl_sweep(game, reg, gammas, sigmas, n_runs, n_steps, seed, workers=workers)
    grid = np.array([c.final_mean for c in cells]).reshape(len(gammas), len(sigmas))
    ag, asg = axis_spearman(grid)
    ok = min(ag) > 0.9 and min(asg) > 0.9
    return CheckResult(
        "final_distance_grid", bool(ok),
        {"min_spearman_gamma": min(ag), "min_spearman_sigma": min(asg), "grid": grid.tolist()}, {},
    )


def check_hitting_time_grid(gammas=GAMMAS, sigmas=SIGMAS, radii=RADII, n_runs=100, n_steps=10_000, seed=0,
                            workers=None, regularizer="binary_entropy", cells=None):
    """Hitting times should decrease in gamma for every sigma and radius (Spearman < -0.9)."""
    game = make_game("appendixE")
    reg = make_regularizer(regularizer, game.player_dims)
    if cells is None:
        cells = ftrl_sweep(game, reg, gammas, sigmas, n_runs, n_steps, seed, radii=radii, workers=workers)
    emp, worst, failing = {}, 1.0, []
    for r in radii:
        grid = np.array([restricted_mean(c.hits[r]) for c in cells]).reshape(len(gammas), len(sigmas))
        ag, _ = axis_spearman(grid)
        emp[f"spearman_gamma[r={r}]"] = ag
        worst = min(worst, -max(ag))
        failing += [(r, s) for s, v in zip(sigmas, ag) if not v < -0.9]
    return CheckResult(
        "hitting_time_grid", not failing,
        {"failing_cells": [list(f) for f in failing], **emp}, {},
    )


def check_corner_concentration(gamma=0.1, sigma=1.0, n_runs=10_000, n_steps=100, tol=0.1, threshold=0.6, seed=0,
                               workers=None):
    """Share of final matching-pennies iterates with a player within tol of a pure strategy."""
    game = make_game("matching_pennies")
    reg = make_regularizer("entropic", game.player_dims)
    ens = run_ftrl(game, reg, NoiseSpec(sigma=sigma),
                   FtrlConfig(step=gamma, n_steps=n_steps, n_runs=n_runs, record_stride=n_steps,
                              init="uniform-random-primal"), seed, workers=workers)
    final = ens.actions[:, -1]
    frac = stats.near_vertex_fraction(final, tol)
    both = float(np.mean(np.all(np.abs(final - np.round(final)) <= tol, axis=-1)))
    return CheckResult("corner_concentration", frac >= threshold,
                       {"near_vertex": frac, "both_players_near_vertex": both}, {"threshold": threshold})


# -- property suite (no simulation) ------------------------------------------


def _rand_dual(rng, reg, n):
    return rng.normal(scale=3.0, size=(n, reg.dim))


def _rand_primal(rng, reg, n):
    if reg.kind == "euclidean":
        return rng.normal(size=(n, reg.dim))
    return reg.sample_uniform(rng, n)


def check_properties(n_cases=1000, seed=0):
    """Mirror/conjugate/Fenchel identities, gradient fields and exact spectra."""
    rng = np.random.default_rng(seed)
    emp, ok = {}, True
    for kind in KINDS:
        dims = (3,) if kind in ("entropic",) else (2,)
        reg = make_regularizer(kind, dims)
        p = _rand_primal(rng, reg, n_cases)
        y = _rand_dual(rng, reg, n_cases)
        y2 = _rand_dual(rng, reg, n_cases)
        x = reg.mirror(y)
        three = (fenchel_coupling(reg, p, y2) - fenchel_coupling(reg, p, y) - fenchel_coupling(reg, x, y2)
                 - np.sum((y2 - y) * (x - p), axis=-1))
        w = y2 - y
        onestep = fenchel_coupling(reg, p, y + w) - (
            fenchel_coupling(reg, p, y) + np.sum(w * (x - p), axis=-1) + reg.dual_norm(w) ** 2 / (2 * reg.K)
        )
        lip = reg.norm(reg.mirror(y2) - x) - reg.dual_norm(y2 - y) / reg.K
        sc = fenchel_coupling(reg, p, y) + 1e-12 - 0.5 * reg.K * reg.norm(x - p) ** 2
        h = 1e-6
        fd = np.stack([
            (reg.conjugate(y[:100] + h * e) - reg.conjugate(y[:100] - h * e)) / (2 * h) for e in np.eye(reg.dim)
        ], axis=-1)
        fd_err = float(np.max(np.abs(fd - x[:100]) / np.maximum(np.abs(x[:100]), 1e-3)))
        res = {
            "three_point": float(np.max(np.abs(three))),
            "one_step": float(np.max(onestep)),
            "lipschitz": float(np.max(lip)),
            "strong_convexity": float(np.min(sc)),
            "grad_conjugate": fd_err,
        }
        k_ok = (res["three_point"] <= 1e-10 and res["one_step"] <= 1e-10 and res["lipschitz"] <= 1e-12
                and res["strong_convexity"] >= 0 and fd_err <= 1e-5)
        emp[kind] = res
        ok &= k_ok

    fd_errs = {}
    for gid in GAME_IDS:
        game = make_game(gid)
        x = game.sample_interior(rng, 100)
        v = game.gradient_field(x)
        err = 0.0
        for i, sl in enumerate(game.slices):
            for c in range(sl.start, sl.stop):
                e = np.zeros(game.dim)
                e[c] = 1e-5
                g = (game.payoff(i, x + e) - game.payoff(i, x - e)) / 2e-5
                err = max(err, float(np.max(np.abs(g - v[:, c]) / np.maximum(np.abs(v[:, c]), 1.0))))
        fd_errs[gid] = err
        ok &= err <= 1e-6
    emp["gradient_fd"] = fd_errs

    spectra = {}
    for N in (2, 3, 5):
        game = make_game("cournot", N=N, b=1)
        ok_N = exact_eigenvalue_multiplicity(game.symmetrized_jacobian(), Fraction(-1)) == N - 1
        ok_N &= exact_eigenvalue_multiplicity(game.symmetrized_jacobian(), Fraction(-(N + 1))) == 1
        spectra[N] = bool(ok_N)
        ok &= ok_N
    emp["cournot_spectrum"] = spectra

    e = make_game("appendixE")
    resid = float(np.linalg.norm(e.gradient_field(e.x_star)))
    exact_zero = all(
        sum(Fraction(e.jacobian[i][j]) * e.equilibrium[j] for j in range(2)) + e.offset[i] == 0 for i in range(2)
    )
    emp["appendixE_residual"] = resid
    ok &= resid <= 1e-12 and exact_zero
    return CheckResult("properties", bool(ok), emp, {})


def exact_eigenvalue_multiplicity(M, lam: Fraction) -> int:
    """Geometric multiplicity of ``lam`` for a rational symmetric matrix (= algebraic)."""
    n = len(M)
    A = [[Fraction(M[i][j]) - (lam if i == j else 0) for j in range(n)] for i in range(n)]
    rank, row = 0, 0
    for col in range(n):
        piv = next((r for r in range(row, n) if A[r][col] != 0), None)
        if piv is None:
            continue
        A[row], A[piv] = A[piv], A[row]
        for r in range(n):
            if r != row and A[r][col] != 0:
                f = A[r][col] / A[row][col]
                A[r] = [u - f * w for u, w in zip(A[r], A[row])]
        row += 1
        rank += 1
    return n - rank


def monotonicity_certificate(game, n_pairs=1000, seed=0):
    """Worst violation of the declared monotonicity class on random pairs.

    Returns (max violation, ratio achieved along the weakest direction / beta).
    """
    rng = np.random.default_rng(seed)
    x = game.sample_feasible(rng, n_pairs)
    x2 = game.sample_feasible(rng, n_pairs)
    gap = monotonicity_gap(game, x, x2)
    sq = np.sum((x2 - x) ** 2, axis=-1)
    if game.monotonicity.kind == "null":
        return float(np.max(np.abs(gap))), None
    viol = float(np.max(gap + game.beta * sq))
    if game.beta == 0:
        return viol, None
    u = weakest_direction(game)
    base = game.x_star if game.equilibrium_is_interior else game.sample_interior(rng, 1)[0]
    t = 1e-3
    ratio = float(-monotonicity_gap(game, base, base + t * u) / (t * t) / game.beta)
    return viol, ratio


def occupancy_grid(gamma, sigma, n_runs, n_steps, bins, seed, workers=None, regularizer="binary_entropy",
                   game_id="appendixE", dims=None, path_offset=0):
    """Histogram of final iterates of many short runs from uniform random starts."""
    game = make_game(game_id)
    reg = make_regularizer(regularizer, game.player_dims)
    ens = run_ftrl(game, reg, NoiseSpec(sigma=sigma),
                   FtrlConfig(step=gamma, n_steps=n_steps, n_runs=n_runs, record_stride=n_steps,
                              init="uniform-random-primal"),
                   seed, path_ids=path_offset + np.arange(n_runs), workers=workers)
    final = ens.actions[:, -1]
    if dims is not None:
        final = final[:, list(dims)]
    k = final.shape[1]
    hist, edges = np.histogramdd(final, bins=bins, range=[(0.0, 1.0)] * k)
    return hist / n_runs, edges
