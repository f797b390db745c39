"""Path statistics: hitting times, occupation measures and trend estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats as _sps

from .errors import DomainError
from .monitors import vector_norm
from .regularizers import fenchel_coupling

RELIABLE_CENSORING = 0.5


class HitTime(NamedTuple):
    time: float | None
    horizon: float

    @property
    def censored(self) -> bool:
        return self.time is None


def _first_time(times, mask):
    idx = np.flatnonzero(mask)
    return HitTime(None if idx.size == 0 else float(times[idx[0]]), float(times[-1]))


def hitting_time(traj, center, r: float, norm: str = "l2", include_start: bool = True) -> HitTime:
    """First recorded time with |x_t - center| <= r, or censored."""
    if not r > 0:
        raise DomainError("radius must be positive")
    dist = vector_norm(traj.actions - np.asarray(center, dtype=float), norm)
    mask = dist <= r
    if not include_start:
        mask[0] = False
    return _first_time(traj.times, mask)


def hitting_times(ens, center, r: float, norm: str = "l2", include_start: bool = True) -> np.ndarray:
    """Per-path first recorded hitting times of an ensemble (NaN = censored)."""
    if not r > 0:
        raise DomainError("radius must be positive")
    dist = vector_norm(ens.actions - np.asarray(center, dtype=float), norm)
    mask = dist <= r
    if not include_start:
        mask[:, 0] = False
    first = np.argmax(mask, axis=1)
    return np.where(mask.any(axis=1), ens.times[first], np.nan)


def fenchel_crossing_times(traj, p, eps: float) -> tuple[HitTime, HitTime]:
    """(tau_eps^-, tau_eps^+) of the energy F(p, y_t) relative to F_0."""
    if not eps > 0:
        raise DomainError("threshold must be positive")
    F = fenchel_coupling(traj.regularizer, np.asarray(p, dtype=float), traj.scores)
    later = np.arange(len(F)) > 0
    return (
        _first_time(traj.times, later & (F <= F[0] - eps)),
        _first_time(traj.times, later & (F >= F[0] + eps)),
    )


@dataclass(frozen=True)
class HittingTimeStats:
    """Summary of possibly censored hitting times (NaN marks a censored path)."""

    times: np.ndarray
    horizon: float
    n: int
    censoring: float
    mean: float | None
    stderr: float | None
    reliable: bool

    @classmethod
    def from_times(cls, times, horizon: float) -> "HittingTimeStats":
        t = np.asarray(times, dtype=float)
        hit = t[~np.isnan(t)]
        cens = 1.0 - hit.size / max(t.size, 1)
        reliable = cens < RELIABLE_CENSORING and hit.size > 0
        mean = float(hit.mean()) if reliable else None
        se = float(hit.std(ddof=1) / np.sqrt(hit.size)) if reliable and hit.size > 1 else (0.0 if reliable else None)
        return cls(t, float(horizon), int(t.size), float(cens), mean, se, reliable)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "horizon": self.horizon,
            "censoring": self.censoring,
            "mean": self.mean,
            "stderr": self.stderr,
            "reliable": self.reliable,
        }


@dataclass(frozen=True)
class OccupationHistogram:
    """Time fractions spent in regions.

    For ``region == "balls"`` the cells are the balls of ``radii`` (nested, so
    they do not partition the space); for ``region == "grid"`` the cells are
    the bins of a rectangular grid and the fractions sum to one.
    """

    region: str
    fractions: np.ndarray
    stderr: np.ndarray
    total: int
    radii: tuple[float, ...] | None = None
    edges: tuple[np.ndarray, ...] | None = None
    per_path: np.ndarray | None = field(default=None, repr=False)


def _window(source, t_from):
    times = np.asarray(source.times)
    sel = times >= t_from
    if not sel.any():
        raise DomainError("no recorded points at or after t_from")
    acts = source.actions
    if acts.ndim == 2:
        acts = acts[None]
    return acts[:, sel], int(sel.sum())


def occupation_measure(source, center=None, radii=None, grid=None, t_from: float = 0.0,
                       norm: str = "l2", dims=None) -> OccupationHistogram:
    """Fraction of recorded points (times >= t_from) per region.

    ``grid`` is ``(bins, ranges)`` as accepted by ``numpy.histogramdd``;
    ``dims`` selects the action coordinates the grid is laid over.
    """
    acts, total = _window(source, t_from)
    n = acts.shape[0]
    if radii is not None:
        if center is None:
            raise DomainError("ball occupation needs a center")
        dist = vector_norm(acts - np.asarray(center, dtype=float), norm)
        per_path = np.stack([(dist <= r).mean(axis=1) for r in radii], axis=1)
        return OccupationHistogram(
            "balls", per_path.mean(axis=0), _stderr(per_path), total, tuple(float(r) for r in radii), None, per_path
        )
    if grid is None:
        raise DomainError("give either radii or a grid")
    bins, ranges = grid
    pts = acts if dims is None else acts[..., list(dims)]
    k = pts.shape[-1]
    per = []
    edges = None
    for i in range(n):
        h, edges = np.histogramdd(pts[i], bins=bins, range=ranges)
        per.append(h / total)
    per = np.stack(per)
    frac = per.mean(axis=0)
    if k and not np.isclose(frac.sum(), 1.0, atol=1e-12):
        raise DomainError("grid does not cover all recorded points")
    return OccupationHistogram("grid", frac, _stderr(per), total, None, tuple(edges), per)


def _stderr(per_path):
    n = per_path.shape[0]
    if n < 2:
        return np.zeros(per_path.shape[1:])
    return per_path.std(axis=0, ddof=1) / np.sqrt(n)


def ols_slopes(times, values) -> np.ndarray:
    """Least-squares slope of each row of ``values`` against ``times``."""
    t = np.asarray(times, dtype=float)
    v = np.atleast_2d(np.asarray(values, dtype=float))
    tc = t - t.mean()
    return (v - v.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)


def slope_with_stderr(times, values) -> tuple[float, float]:
    """Slope of the ensemble mean, with a standard error across paths.

    OLS is linear, so the slope of the mean curve equals the mean of the
    per-path slopes; their spread gives the Monte Carlo error.
    """
    s = ols_slopes(times, values)
    se = float(s.std(ddof=1) / np.sqrt(s.size)) if s.size > 1 else 0.0
    return float(s.mean()), se


def escape_slope(ens, center=None, t_max: float | None = None) -> tuple[float, float]:
    """Slope of the ensemble-mean |X_t - center|^2 against t."""
    acts = ens.actions
    c = np.zeros(acts.shape[-1]) if center is None else np.asarray(center, dtype=float)
    sq = np.sum((acts - c) ** 2, axis=-1)
    t = np.asarray(ens.times, dtype=float)
    sel = slice(None) if t_max is None else t <= t_max
    return slope_with_stderr(t[sel], sq[:, sel])


def mean_curve(values) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=float)
    return v.mean(axis=0), _stderr(v)


def nondecreasing_beyond_noise(values, z: float = 3.0) -> tuple[bool, float]:
    """One-sided check that successive mean increments are never significantly negative.

    Returns the verdict and the most negative increment z-score.
    """
    v = np.asarray(values, dtype=float)
    dv = np.diff(v, axis=1)
    se = _stderr(dv)
    m = dv.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(se > 0, m / se, np.where(m < 0, -np.inf, 0.0))
    worst = float(zs.min()) if zs.size else 0.0
    return worst >= -z, worst


def final_distances(ens, center, norm: str = "l2") -> np.ndarray:
    return vector_norm(ens.actions[:, -1] - np.asarray(center, dtype=float), norm)


def near_vertex_fraction(actions, tol: float = 0.1) -> float:
    """Share of points with some coordinate above 1 - tol or below tol."""
    a = np.asarray(actions, dtype=float)
    return float(np.mean(np.any((a > 1 - tol) | (a < tol), axis=-1)))


def mean_with_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float).ravel()
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0


def spearman(a, b) -> float:
    return float(_sps.spearmanr(a, b).statistic)
