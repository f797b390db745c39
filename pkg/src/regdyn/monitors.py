"""Streaming path observers.

Monitors see every integration step, independently of how sparsely the
trajectory itself is recorded, and reduce it to per-path arrays (hitting
times, crossing times, occupation counts). Censored events are NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def vector_norm(v, kind: str = "l2"):
    v = np.asarray(v, dtype=float)
    if kind == "l2":
        return np.sqrt(np.sum(v * v, axis=-1))
    if kind == "l1":
        return np.sum(np.abs(v), axis=-1)
    if kind == "linf":
        return np.max(np.abs(v), axis=-1)
    raise ValueError(f"unknown norm {kind!r}")


def record_first(times, mask, t):
    """Write ``t`` into the still-NaN entries of ``times`` where ``mask`` holds."""
    hit = mask & np.isnan(times)
    times[hit] = t
    return times


@dataclass(frozen=True)
class BallHit:
    """First time the action enters the closed ball of ``radius`` around ``center``."""

    name: str
    center: tuple[float, ...]
    radius: float
    norm: str = "l2"
    include_start: bool = True

    def start(self, n, reg):
        return {"t": np.full(n, np.nan)}

    def observe(self, state, k, t, y, x, reg):
        if k == 0 and not self.include_start:
            return
        inside = vector_norm(x - np.asarray(self.center), self.norm) <= self.radius
        record_first(state["t"], inside, t)

    def finish(self, state):
        return {self.name: state["t"]}


@dataclass(frozen=True)
class FenchelCrossing:
    """First times F(base, Y_t) drops to F_0 - eps / rises to F_0 + eps."""

    name: str
    base: tuple[float, ...]
    eps: float

    def start(self, n, reg):
        return {"minus": np.full(n, np.nan), "plus": np.full(n, np.nan), "F0": None}

    def observe(self, state, k, t, y, x, reg):
        from .regularizers import fenchel_coupling

        F = fenchel_coupling(reg, np.asarray(self.base), y)
        if k == 0:
            state["F0"] = F.copy()
            return
        record_first(state["minus"], F <= state["F0"] - self.eps, t)
        record_first(state["plus"], F >= state["F0"] + self.eps, t)

    def finish(self, state):
        return {
            f"{self.name}.minus": state["minus"],
            f"{self.name}.plus": state["plus"],
            f"{self.name}.F0": state["F0"],
        }


@dataclass(frozen=True)
class BallOccupation:
    """Fraction of grid points with time >= ``t_from`` spent inside a ball."""

    name: str
    center: tuple[float, ...]
    radius: float
    t_from: float = 0.0
    norm: str = "l2"

    def start(self, n, reg):
        return {"inside": np.zeros(n), "total": 0}

    def observe(self, state, k, t, y, x, reg):
        if t < self.t_from:
            return
        state["inside"] += vector_norm(x - np.asarray(self.center), self.norm) <= self.radius
        state["total"] += 1

    def finish(self, state):
        total = max(state["total"], 1)
        return {self.name: state["inside"] / total}
