"""Shared integration loop and trajectory containers.

Both the SDE and the discrete FTRL engine iterate ``y <- advance(y, x, xi)``
in the dual space over a batch of paths, with ``x = Q(y)`` refreshed after
every step. Normals are drawn per path in fixed-size chunks from the path's
own stream, so a path's numbers are independent of the batch it runs in.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationError
from .noise import draw_normals, generators

CHUNK = 1024


@dataclass
class Trajectory:
    """One recorded path. ``actions`` is recomputed from ``scores`` on access."""

    times: np.ndarray
    scores: np.ndarray
    regularizer: object
    path_id: int
    events: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def actions(self) -> np.ndarray:
        return self.regularizer.mirror(self.scores)

    def __len__(self):
        return len(self.times)


@dataclass
class Ensemble:
    """A batch of paths sharing one time grid.

    ``scores`` has shape (n_paths, n_records, d); ``events`` maps monitor
    outputs to per-path arrays.
    """

    times: np.ndarray
    scores: np.ndarray
    regularizer: object
    path_ids: np.ndarray
    events: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def actions(self) -> np.ndarray:
        return self.regularizer.mirror(self.scores)

    @property
    def n_paths(self) -> int:
        return self.scores.shape[0]

    def __len__(self):
        return self.n_paths

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(
            self.times,
            self.scores[i],
            self.regularizer,
            int(self.path_ids[i]),
            {k: v[i] for k, v in self.events.items()},
            dict(self.metadata),
        )

    def __iter__(self):
        return (self[i] for i in range(self.n_paths))

    @staticmethod
    def concatenate(parts) -> "Ensemble":
        parts = list(parts)
        first = parts[0]
        keys = first.events.keys()
        return Ensemble(
            first.times,
            np.concatenate([p.scores for p in parts], axis=0),
            first.regularizer,
            np.concatenate([p.path_ids for p in parts]),
            {k: np.concatenate([p.events[k] for p in parts]) for k in keys},
            dict(first.metadata),
        )


def record_steps(n_steps: int, stride: int) -> np.ndarray:
    """Indices of recorded steps: every ``stride``-th plus the final one."""
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.array(idx, dtype=np.int64)


def integrate(
    y0,
    advance,
    reg,
    n_steps: int,
    time_step: float,
    width: int,
    record_stride: int,
    seed: int,
    path_ids,
    monitors=(),
    gens=None,
    chunk: int = CHUNK,
):
    """Run ``n_steps`` steps for every row of ``y0``.

    ``advance(y, x, xi)`` maps the current scores, actions and a (n_paths,
    width) block of standard normals to the next scores. Returns the
    recorded times, recorded scores and merged monitor outputs.
    """
    y = np.array(y0, dtype=float)
    n, d = y.shape
    path_ids = np.asarray(path_ids)
    if gens is None:
        gens = generators(seed, path_ids)
    rec = record_steps(n_steps, record_stride)
    scores = np.empty((n, len(rec), d))
    scores[:, 0] = y
    slot = 1

    x = reg.mirror(y)
    states = [m.start(n, reg) for m in monitors]
    for m, s in zip(monitors, states):
        m.observe(s, 0, 0.0, y, x, reg)

    k = 0
    while k < n_steps:
        c = min(chunk, n_steps - k)
        xi = draw_normals(gens, c, width)
        for j in range(c):
            y = advance(y, x, xi[j])
            k += 1
            bad = ~np.all(np.isfinite(y), axis=1)
            if bad.any():
                p = int(path_ids[np.argmax(bad)])
                raise SimulationError(
                    f"non-finite state on path {p} at step {k} (seed {seed})",
                    path=p, step=k, seed=seed,
                )
            x = reg.mirror(y)
            t = k * time_step
            for m, s in zip(monitors, states):
                m.observe(s, k, t, y, x, reg)
            if slot < len(rec) and rec[slot] == k:
                scores[:, slot] = y
                slot += 1

    events = {}
    for m, s in zip(monitors, states):
        events.update(m.finish(s))
    return rec * time_step, scores, events


def resolve_workers(threads=None) -> int:
    if threads is None:
        threads = os.environ.get("THREADS", 1)
    return max(1, int(threads))


def path_blocks(path_ids, workers: int):
    """Split path identifiers into contiguous, ordered blocks."""
    path_ids = np.asarray(path_ids)
    workers = max(1, min(workers, len(path_ids)))
    return [b for b in np.array_split(path_ids, workers) if len(b)]


def run_blocks(fn, path_ids, workers: int, *args):
    """Evaluate ``fn(*args, path_ids=block)`` per block and merge in path order."""
    blocks = path_blocks(path_ids, workers)
    if len(blocks) == 1:
        return fn(*args, path_ids=blocks[0])
    with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
        futures = [pool.submit(_call, fn, args, b) for b in blocks]
        parts = [f.result() for f in futures]
    return Ensemble.concatenate(parts)


def _call(fn, args, block):
    return fn(*args, path_ids=block)
