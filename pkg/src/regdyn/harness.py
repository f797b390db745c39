"""Run experiment configs and write reproducible, self-verifying outputs.

Every output directory holds a ``summary.json`` (sorted keys, the config
text echoed verbatim, its SHA-256, the seed, the results and a manifest of
file hashes) plus CSV files whose first line is a ``# config_sha256=...
seed=...`` comment. Outputs depend only on (config, seed), never on the
number of worker processes.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from . import bounds, stats
from .config import ExperimentConfig, noise_radius_for, validate_config
from .engine import resolve_workers
from .errors import ConfigError
from .experiments import _jsonable, axis_spearman, ftrl_sweep, restricted_mean
from .ftrl import fenchel_energy_curve, run_ftrl
from .monitors import BallHit, BallOccupation, FenchelCrossing
from .regularizers import fenchel_coupling
from .sde import simulate_sde

SUMMARY = "summary.json"


class OutputWriter:
    """Collects files in memory and writes them in a fixed order."""

    def __init__(self, config_hash: str, seed: int):
        self.header = f"# config_sha256={config_hash} seed={seed}\n"
        self.files: dict[str, bytes] = {}

    def csv(self, name: str, columns, rows):
        buf = io.StringIO()
        buf.write(self.header)
        buf.write(",".join(columns) + "\n")
        for row in rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        self.files[name] = buf.getvalue().encode("utf-8")

    def write(self, out_dir: Path, summary: dict):
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            (out_dir / name).write_bytes(self.files[name])
        summary = dict(summary)
        summary["manifest"] = {n: hashlib.sha256(b).hexdigest() for n, b in sorted(self.files.items())}
        text = json.dumps(_jsonable(summary), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
        (out_dir / SUMMARY).write_text(text, encoding="utf-8")
        return summary


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return repr(f) if math.isfinite(f) else ("nan" if math.isnan(f) else repr(f))
    return str(v)


def _check(name, passed, applicable=True, **detail):
    return {"name": name, "pass": bool(passed), "applicable": bool(applicable), **detail}


# -- experiment kinds --------------------------------------------------------


def _simulate(cfg, game, reg, noise, seed, workers, out):
    xs = game.x_star
    if cfg.engine == "sde":
        ens = simulate_sde(game, reg, noise, cfg.sde_config(), seed, workers=workers)
    else:
        ens = run_ftrl(game, reg, noise, cfg.ftrl_config(), seed, workers=workers)
    sq = np.sum((ens.actions - xs) ** 2, axis=-1)
    F = fenchel_energy_curve(ens, xs)
    m, se = stats.mean_curve(sq)
    out.csv("distance_sq.csv", ["t_or_n", "mean", "stderr"], zip(ens.times.tolist(), m, se))
    m, se = stats.mean_curve(F)
    out.csv("energy.csv", ["t_or_n", "mean", "stderr"], zip(ens.times.tolist(), m, se))
    if cfg.get("output.paths"):
        d = reg.dim
        cols = ["path", "t"] + [f"y{i}" for i in range(d)] + [f"x{i}" for i in range(d)]
        acts = ens.actions
        rows = (
            [int(ens.path_ids[p]), ens.times[k], *ens.scores[p, k], *acts[p, k]]
            for p in range(ens.n_paths)
            for k in range(len(ens.times))
        )
        out.csv("paths.csv", cols, rows)
    fd, fd_se = stats.mean_with_stderr(np.sqrt(sq[:, -1]))
    return {"final_distance": fd, "final_distance_stderr": fd_se, "metadata": ens.metadata}, []


def _grid_rows(gammas, sigmas, grid, err):
    for i, g in enumerate(gammas):
        yield [g, *grid[i], *err[i]]


def _grid_columns(sigmas, what="mean"):
    return ["gamma"] + [f"{what}[sigma={s:g}]" for s in sigmas] + [f"stderr[sigma={s:g}]" for s in sigmas]


def _final_distance_grid(cfg, game, reg, noise, seed, workers, out):
    gammas, sigmas = cfg.gammas(), cfg.sigmas()
    f = cfg.ftrl_config()
    cells = ftrl_sweep(game, reg, gammas, sigmas, f.n_runs, f.n_steps, seed, init=f.init, workers=workers,
                       norm=bounds.default_ball_norm(game))
    shape = (len(gammas), len(sigmas))
    grid = np.array([c.final_mean for c in cells]).reshape(shape)
    err = np.array([c.final_stderr for c in cells]).reshape(shape)
    out.csv("final_distance.csv", _grid_columns(sigmas), _grid_rows(gammas, sigmas, grid, err))
    ag, asg = axis_spearman(grid)
    thr = cfg.number("check.spearman")
    checks = [_check("final_distance_monotone", min(ag) > thr and min(asg) > thr,
                     spearman_gamma=ag, spearman_sigma=asg, threshold=thr)]
    return {"grid": grid, "stderr": err, "gammas": gammas, "sigmas": sigmas}, checks


def _hitting_time_grid(cfg, game, reg, noise, seed, workers, out):
    gammas, sigmas, radii = cfg.gammas(), cfg.sigmas(), cfg.number_list("sweep.r")
    f = cfg.ftrl_config()
    cells = ftrl_sweep(game, reg, gammas, sigmas, f.n_runs, f.n_steps, seed, radii=radii, init=f.init,
                       workers=workers, norm=bounds.default_ball_norm(game))
    shape = (len(gammas), len(sigmas))
    thr = cfg.number("check.spearman")
    results, checks = {}, []
    for r in radii:
        hs = [c.hits[r] for c in cells]
        rmean = np.array([restricted_mean(h) for h in hs]).reshape(shape)
        umean = np.array([np.nan if h.mean is None else h.mean for h in hs]).reshape(shape)
        se = np.array([np.nan if h.stderr is None else h.stderr for h in hs]).reshape(shape)
        cens = np.array([h.censoring for h in hs]).reshape(shape)
        cols = (["gamma"] + [f"restricted_mean[sigma={s:g}]" for s in sigmas]
                + [f"mean[sigma={s:g}]" for s in sigmas] + [f"stderr[sigma={s:g}]" for s in sigmas]
                + [f"censoring[sigma={s:g}]" for s in sigmas])
        rows = ([g, *rmean[i], *umean[i], *se[i], *cens[i]] for i, g in enumerate(gammas))
        out.csv(f"hitting_time_r{r:g}.csv", cols, rows)
        ag, _ = axis_spearman(rmean)
        results[f"r={r:g}"] = {"restricted_mean": rmean, "mean": umean, "stderr": se, "censoring": cens}
        checks.append(_check(f"hitting_time_decreasing[r={r:g}]", max(ag) < -thr, spearman_gamma=ag, threshold=-thr))
    results.update({"gammas": gammas, "sigmas": sigmas, "radii": radii})
    return results, checks


def _histogram_cells(cfg, game, reg, seed, workers, dims):
    from .noise import NoiseSpec

    gammas, sigmas = cfg.gammas(), cfg.sigmas()
    f = cfg.ftrl_config()
    bins = cfg.number("histogram.bins", int)
    for i, g in enumerate(gammas):
        for j, s in enumerate(sigmas):
            cell = i * len(sigmas) + j
            ens = run_ftrl(game, reg, NoiseSpec(sigma=s), cfg.ftrl_config(step=g), seed,
                           path_ids=cell * f.n_runs + np.arange(f.n_runs), workers=workers)
            final = ens.actions[:, -1]
            hist, edges = np.histogramdd(final[:, list(dims)], bins=bins, range=[(0.0, 1.0)] * len(dims))
            yield g, s, final, hist / f.n_runs, edges


def _histogram_rows(g, s, hist, edges):
    for idx in np.ndindex(hist.shape):
        lo = [edges[a][k] for a, k in enumerate(idx)]
        hi = [edges[a][k + 1] for a, k in enumerate(idx)]
        yield [g, s, *idx, *lo, *hi, hist[idx]]


def _default_dims(game):
    # first coordinate of each player's block (the probability of the first action on a simplex)
    return [sl.start for sl in game.slices]


def _occupancy_grid(cfg, game, reg, noise, seed, workers, out):
    dims = cfg.get("histogram.dims") or _default_dims(game)
    k = len(dims)
    cols = ["gamma", "sigma"] + [f"i{a}" for a in range(k)] + [f"lo{a}" for a in range(k)] + [f"hi{a}" for a in range(k)] + ["fraction"]
    rows, results, checks = [], {}, []
    for g, s, final, hist, edges in _histogram_cells(cfg, game, reg, seed, workers, dims):
        rows += list(_histogram_rows(g, s, hist, edges))
        mass = float(hist.sum())
        results[f"gamma={g:g},sigma={s:g}"] = {"mass": mass, "max_cell": float(hist.max())}
        checks.append(_check(f"mass[gamma={g:g},sigma={s:g}]", abs(mass - 1) <= 1e-12, mass=mass))
    out.csv("occupancy.csv", cols, rows)
    return results, checks


def _corner_concentration(cfg, game, reg, noise, seed, workers, out):
    dims = cfg.get("histogram.dims") or _default_dims(game)
    k = len(dims)
    tol, thr = cfg.number("check.corner_tol"), cfg.number("check.corner_threshold")
    cols = ["gamma", "sigma"] + [f"i{a}" for a in range(k)] + [f"lo{a}" for a in range(k)] + [f"hi{a}" for a in range(k)] + ["fraction"]
    rows, summary, results, checks = [], [], {}, []
    for g, s, final, hist, edges in _histogram_cells(cfg, game, reg, seed, workers, dims):
        rows += list(_histogram_rows(g, s, hist, edges))
        frac = stats.near_vertex_fraction(final, tol)
        corners = [hist[tuple(-1 if b else 0 for b in c)] for c in np.ndindex(*(2,) * k)]
        interior = hist[tuple(slice(1, -1) for _ in range(k))]
        dominate = bool(interior.size == 0 or min(corners) > interior.max())
        summary.append([g, s, frac, min(corners), float(interior.max()) if interior.size else 0.0])
        results[f"gamma={g:g},sigma={s:g}"] = {"near_vertex": frac, "corners_dominate": dominate}
        checks.append(_check(f"corner_concentration[gamma={g:g},sigma={s:g}]", frac >= thr, near_vertex=frac,
                             threshold=thr))
    out.csv("corner_histogram.csv", cols, rows)
    out.csv("corner_summary.csv", ["gamma", "sigma", "near_vertex", "min_corner_cell", "max_interior_cell"], summary)
    return results, checks


def _bounds_check(cfg, game, reg, noise, seed, workers, out):
    xs = game.x_star
    d = game.dim
    checks, results = [], {}
    if game.monotonicity.kind == "strong":
        radii = cfg.number_list("sweep.r")
        rs = noise_radius_for(cfg, game, reg, noise)
        if cfg.engine == "sde":
            sc = cfg.sde_config()
            horizon = sc.n_steps * sc.dt
            t_from = cfg.get("bounds.occupation_from")
            t_from = horizon / 5 if t_from is None else float(t_from)
            mons = [m for r in radii for m in (BallHit(f"hit[{r}]", tuple(xs), r),
                                              BallOccupation(f"occ[{r}]", tuple(xs), r, t_from=t_from))]
            ens = simulate_sde(game, reg, noise, sc, seed, monitors=tuple(mons), workers=workers)
            F0 = float(fenchel_coupling(reg, xs, ens.scores[0, 0]))
            for r in radii:
                h = stats.HittingTimeStats.from_times(ens.events[f"hit[{r}]"], horizon)
                b = bounds.bound_hit_strong_cont(F0, game.beta, reg.K, math.sqrt(noise.sigma_max_sq(d)), r).value
                occ, occ_se = stats.mean_with_stderr(ens.events[f"occ[{r}]"])
                lb = bounds.bound_occupation_cont(r, rs)
                results[f"r={r:g}"] = {"hit": h.to_dict(), "hit_bound": b, "occupation": occ,
                                       "occupation_stderr": occ_se, "occupation_bound": lb}
                checks.append(_check(f"hit_strong_cont[r={r:g}]", h.reliable and h.mean <= b + 3 * h.stderr,
                                     mean=h.mean, bound=b))
                checks.append(_check(f"occupation_cont[r={r:g}]", occ >= lb - 3 * occ_se, occupation=occ, bound=lb))
                if game.name == "quadratic" and reg.kind == "euclidean" and noise.model == "isotropic":
                    x0n = float(np.linalg.norm(ens.actions[0, 0]))
                    if noise.sigma < r < x0n:
                        bq = bounds.bound_hit_quadratic(x0n, r, noise.sigma)
                        checks.append(_check(f"hit_quadratic[r={r:g}]", h.reliable and h.mean <= bq + 3 * h.stderr,
                                             mean=h.mean, bound=bq))
        else:
            fc = cfg.ftrl_config()
            t_from = cfg.get("bounds.occupation_from")
            t_from = fc.n_steps // 10 if t_from is None else int(t_from)
            mons = [m for r in radii for m in (BallHit(f"hit[{r}]", tuple(xs), r, include_start=False),
                                              BallOccupation(f"occ[{r}]", tuple(xs), r, t_from=t_from))]
            ens = run_ftrl(game, reg, noise, fc, seed, monitors=tuple(mons), workers=workers)
            y0 = ens.scores[:, 0]
            F0 = fenchel_coupling(reg, xs, y0)
            dist0 = reg.norm(reg.mirror(y0) - xs)
            s2 = noise.sigma_eff_sq(d)
            for r in radii:
                per_run = np.array([
                    bounds.bound_stop_strong_disc(f, game.beta, reg.K, fc.step, s2, game.lipschitz, r, bool(dd <= r)).value
                    for f, dd in zip(F0, dist0)
                ])
                h = stats.HittingTimeStats.from_times(ens.events[f"hit[{r}]"], fc.n_steps)
                occ, occ_se = stats.mean_with_stderr(ens.events[f"occ[{r}]"])
                lb = bounds.bound_occupation_disc(r, rs)
                relint = bounds.ball_in_relative_interior(game, r, bounds.default_ball_norm(game))
                results[f"r={r:g}"] = {"hit": h.to_dict(), "hit_bound": float(per_run.mean()), "occupation": occ,
                                       "occupation_stderr": occ_se, "occupation_bound": lb, "ball_in_relint": relint}
                checks.append(_check(f"stop_strong_disc[r={r:g}]",
                                     h.reliable and h.mean <= per_run.mean() + 3 * h.stderr,
                                     mean=h.mean, bound=float(per_run.mean())))
                checks.append(_check(f"occupation_disc[r={r:g}]", occ >= lb - 3 * occ_se, applicable=relint,
                                     occupation=occ, bound=lb))
        results["r_sigma"] = rs
    elif cfg.engine == "sde":
        sc = cfg.sde_config()
        horizon = sc.n_steps * sc.dt
        y0 = np.zeros(d) if sc.y0 is None else np.asarray(sc.y0, dtype=float)
        F0 = float(fenchel_coupling(reg, xs, reg.preimage(y0) if sc.y0_space == "primal" else y0))
        eps = cfg.get("bounds.eps")
        eps = 0.5 * F0 if eps is None else float(eps)
        ens = simulate_sde(game, reg, noise, sc, seed, monitors=(FenchelCrossing("F", tuple(xs), eps),),
                           workers=workers)
        energies = fenchel_coupling(reg, xs, ens.scores)
        kappa = bounds.estimate_kappa(reg, ens.scores, energies, F0 + eps)
        b = bounds.bound_hit_null_cont_plus(eps, kappa, math.sqrt(noise.sigma_min_sq(d)))
        plus = stats.HittingTimeStats.from_times(ens.events["F.plus"], horizon)
        minus = stats.HittingTimeStats.from_times(ens.events["F.minus"], horizon)
        results = {"eps": eps, "F0": F0, "kappa": kappa, "bound_plus": b, "plus": plus.to_dict(),
                   "minus": minus.to_dict()}
        checks.append(_check("hit_null_cont_plus", plus.reliable and plus.mean <= b + 3 * plus.stderr,
                             mean=plus.mean, bound=b))
    else:
        fc = cfg.ftrl_config()
        ens = run_ftrl(game, reg, noise, fc, seed, workers=workers)
        F = fenchel_energy_curve(ens, xs)
        slope, se = stats.slope_with_stderr(ens.times, F)
        nondec, worst = stats.nondecreasing_beyond_noise(F)
        m, mse = stats.mean_curve(F)
        out.csv("energy.csv", ["t_or_n", "mean", "stderr"], zip(ens.times.tolist(), m, mse))
        results = {"energy_slope": slope, "energy_slope_stderr": se, "worst_increment_z": worst}
        checks.append(_check("energy_growth", slope > 3 * se and nondec, slope=slope, stderr=se))
    rows = [[c["name"], c["pass"], c["applicable"]] for c in checks]
    out.csv("checks.csv", ["check", "pass", "applicable"], rows)
    return results, checks


RUNNERS = {
    "simulate": _simulate,
    "final-distance-grid": _final_distance_grid,
    "hitting-time-grid": _hitting_time_grid,
    "occupancy-grid": _occupancy_grid,
    "corner-concentration": _corner_concentration,
    "bounds-check": _bounds_check,
}


def run_experiment(config, out_dir=None, seed=None, workers=None):
    """Run a config and write its outputs. Returns (exit status, summary dict).

    ``seed``, ``workers`` and ``out_dir`` default to the SEED, THREADS and
    OUT_DIR environment variables, then to the config.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.parse(str(config))
    diags = validate_config(config)
    if diags:
        raise ConfigError("; ".join(diags))
    if seed is None:
        seed = int(os.environ["SEED"]) if "SEED" in os.environ else config.seed
    if out_dir is None:
        out_dir = os.environ.get("OUT_DIR") or config.get("output.dir")
    workers = resolve_workers(workers)

    game = config.game()
    reg = config.regularizer(game)
    noise = config.noise()
    out = OutputWriter(config.sha256, seed)
    results, checks = RUNNERS[config.kind](config, game, reg, noise, seed, workers, out)
    enabled = bool(config.get("checks"))
    counted = [c for c in checks if c["applicable"]] if enabled else []
    passed = all(c["pass"] for c in counted)
    summary = {
        "config": {"text": config.text, "values": config.values, "sha256": config.sha256},
        "seed": int(seed),
        "kind": config.kind,
        "game": game.name,
        "regularizer": reg.kind,
        "noise": noise.describe(game.dim),
        "empirical": results,
        "checks": checks,
        "checks_enabled": enabled,
        "pass": passed,
    }
    summary = out.write(Path(out_dir), summary)
    return (0 if passed else 1), summary


def verify_output(out_dir) -> list:
    """Problems found when re-checking an output directory (empty = intact)."""
    out_dir = Path(out_dir)
    problems = []
    try:
        summary = json.loads((out_dir / SUMMARY).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        return [f"{SUMMARY}: unreadable ({exc})"]
    cfg = summary.get("config", {})
    text = cfg.get("text", "")
    h = hashlib.sha256(text.encode("utf-8")).hexdigest()
    if h != cfg.get("sha256"):
        problems.append(f"{SUMMARY}: config hash does not match the echoed config text")
    header = f"# config_sha256={h} seed={summary.get('seed')}"
    for name, digest in sorted(summary.get("manifest", {}).items()):
        path = out_dir / name
        if not path.exists():
            problems.append(f"{name}: missing")
            continue
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != digest:
            problems.append(f"{name}: content hash mismatch")
        first = data.split(b"\n", 1)[0].decode("utf-8", "replace")
        if first != header:
            problems.append(f"{name}: embedded config hash or seed does not match {SUMMARY}")
    return problems
