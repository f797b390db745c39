"""Regularizers, mirror maps, convex conjugates and the Fenchel coupling.

Every function operates on the last axis of its array arguments, so a batch of
score vectors of shape ``(..., d)`` is handled in one call.

Four regularizer kinds are supported:

``euclidean``       h(x) = ||x||^2 / 2 on R^d; the mirror map is the identity.
``euclidean_box``   h(x) = ||x||^2 / 2 on [lo, hi]^d; the mirror map clamps.
``entropic``        h(x) = sum x log x on the simplex; the mirror map is softmax.
``binary_entropy``  h(x) = sum x log x + (1 - x) log(1 - x) on [0, 1]^d;
                    the mirror map is the logistic function.

Norms: l2 for the Euclidean kinds and for binary entropy, l1 (dual l-inf) for
the entropic simplex. With these norms the strong convexity moduli are 1, 1, 1
and 4 respectively.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

KINDS = ("euclidean", "euclidean_box", "entropic", "binary_entropy")

FEASIBILITY_TOL = 1e-9
_INTERIOR_MARGIN = 1e-6


def _check_finite(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("score vector contains NaN or Inf")
    return y


def _xlogx(x):
    # 0 log 0 = 0
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _logistic(y):
    # split on sign so exp never overflows
    out = np.empty_like(y)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    ey = np.exp(y[~pos])
    out[~pos] = ey / (1.0 + ey)
    return out


def _softplus(y):
    return np.maximum(y, 0.0) + np.log1p(np.exp(-np.abs(y)))


def _logsumexp(y):
    m = np.max(y, axis=-1, keepdims=True)
    return (m + np.log(np.sum(np.exp(y - m), axis=-1, keepdims=True)))[..., 0]


@dataclass(frozen=True)
class Regularizer:
    """A single player's regularizer."""

    kind: str
    dim: int
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown regularizer kind {self.kind!r}; valid kinds: {', '.join(KINDS)}")
        if self.dim < 1:
            raise DomainError("regularizer dimension must be at least 1")
        if self.kind == "euclidean_box" and not self.lo < self.hi:
            raise DomainError("box regularizer needs lo < hi")
        if self.kind == "entropic" and self.dim < 2:
            raise DomainError("entropic simplex needs at least two actions")

    @property
    def K(self) -> float:
        return 4.0 if self.kind == "binary_entropy" else 1.0

    @property
    def primal_norm(self) -> str:
        return "l1" if self.kind == "entropic" else "l2"

    def norm(self, x):
        x = np.asarray(x, dtype=float)
        if self.primal_norm == "l1":
            return np.sum(np.abs(x), axis=-1)
        return np.sqrt(np.sum(x * x, axis=-1))

    def dual_norm(self, y):
        y = np.asarray(y, dtype=float)
        if self.primal_norm == "l1":
            return np.max(np.abs(y), axis=-1)
        return np.sqrt(np.sum(y * y, axis=-1))

    # -- primal side -------------------------------------------------------

    def contains(self, x, tol=FEASIBILITY_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            return np.zeros(x.shape[:-1], dtype=bool)
        if self.kind == "euclidean":
            return np.all(np.isfinite(x), axis=-1)
        if self.kind == "euclidean_box":
            return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)
        if self.kind == "binary_entropy":
            return np.all((x >= -tol) & (x <= 1 + tol), axis=-1)
        return np.all(x >= -tol, axis=-1) & (np.abs(np.sum(x, axis=-1) - 1.0) <= tol)

    def _require_feasible(self, p):
        p = np.asarray(p, dtype=float)
        if not np.all(self.contains(p)):
            raise DomainError(f"base point lies outside the domain of the {self.kind} regularizer")
        return p

    def h(self, x):
        """Regularizer value at a feasible point."""
        x = self._require_feasible(x)
        if self.kind in ("euclidean", "euclidean_box"):
            return 0.5 * np.sum(x * x, axis=-1)
        if self.kind == "entropic":
            return np.sum(_xlogx(np.clip(x, 0.0, None)), axis=-1)
        x = np.clip(x, 0.0, 1.0)
        return np.sum(_xlogx(x) + _xlogx(1.0 - x), axis=-1)

    # -- dual side ---------------------------------------------------------

    def mirror(self, y):
        """Mirror map Q(y) = argmax_x <y, x> - h(x)."""
        y = _check_finite(y)
        if self.kind == "euclidean":
            return y.copy()
        if self.kind == "euclidean_box":
            return np.clip(y, self.lo, self.hi)
        if self.kind == "binary_entropy":
            return _logistic(y)
        z = np.exp(y - np.max(y, axis=-1, keepdims=True))
        return z / np.sum(z, axis=-1, keepdims=True)

    def conjugate(self, y):
        """Convex conjugate h*(y)."""
        y = _check_finite(y)
        if self.kind == "euclidean":
            return 0.5 * np.sum(y * y, axis=-1)
        if self.kind == "euclidean_box":
            lo, hi = self.lo, self.hi
            val = np.where(
                y < lo,
                y * lo - 0.5 * lo * lo,
                np.where(y > hi, y * hi - 0.5 * hi * hi, 0.5 * y * y),
            )
            return np.sum(val, axis=-1)
        if self.kind == "binary_entropy":
            return np.sum(_softplus(y), axis=-1)
        return _logsumexp(y)

    def jacobian_trace(self, y):
        """Trace of the Jacobian of the mirror map (0 where it is not differentiable)."""
        y = _check_finite(y)
        if self.kind == "euclidean":
            return np.full(y.shape[:-1], float(self.dim))
        if self.kind == "euclidean_box":
            return np.sum((y > self.lo) & (y < self.hi), axis=-1).astype(float)
        x = self.mirror(y)
        if self.kind == "binary_entropy":
            return np.sum(x * (1.0 - x), axis=-1)
        return 1.0 - np.sum(x * x, axis=-1)

    def preimage(self, x, margin=_INTERIOR_MARGIN):
        """Canonical score vector y with Q(y) = x (up to clipping at the boundary)."""
        x = self._require_feasible(x)
        if self.kind in ("euclidean", "euclidean_box"):
            return x.copy()
        if self.kind == "binary_entropy":
            x = np.clip(x, margin, 1.0 - margin)
            return np.log(x) - np.log1p(-x)
        return np.log(np.clip(x, margin, None))

    def sample_uniform(self, rng, size=()):
        """Points drawn uniformly from the (bounded) domain."""
        size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        if self.kind == "euclidean":
            raise DomainError("cannot sample uniformly from an unbounded domain")
        if self.kind == "euclidean_box":
            return rng.uniform(self.lo, self.hi, size=size + (self.dim,))
        if self.kind == "binary_entropy":
            return rng.uniform(0.0, 1.0, size=size + (self.dim,))
        return rng.dirichlet(np.ones(self.dim), size=size or None)


@dataclass(frozen=True)
class JointRegularizer:
    """Product of per-player regularizers acting on a concatenated vector.

    The joint norm is the l2 combination of the per-player norms, so the joint
    strong convexity modulus is the smallest per-player modulus.
    """

    blocks: tuple[Regularizer, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise DomainError("joint regularizer needs at least one block")

    @cached_property
    def slices(self):
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.dim))
            start += b.dim
        return tuple(out)

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def K(self) -> float:
        return min(b.K for b in self.blocks)

    @property
    def kind(self) -> str:
        kinds = {b.kind for b in self.blocks}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def _split(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise DomainError(f"expected trailing dimension {self.dim}, got {v.shape[-1]}")
        return [v[..., s] for s in self.slices]

    def norm(self, x):
        return np.sqrt(sum(b.norm(xi) ** 2 for b, xi in zip(self.blocks, self._split(x))))

    def dual_norm(self, y):
        return np.sqrt(sum(b.dual_norm(yi) ** 2 for b, yi in zip(self.blocks, self._split(y))))

    def contains(self, x, tol=FEASIBILITY_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            return np.zeros(x.shape[:-1], dtype=bool)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for b, xi in zip(self.blocks, self._split(x)):
            ok &= b.contains(xi, tol)
        return ok

    def h(self, x):
        return sum(b.h(xi) for b, xi in zip(self.blocks, self._split(x)))

    def mirror(self, y):
        y = _check_finite(y)
        return np.concatenate([b.mirror(yi) for b, yi in zip(self.blocks, self._split(y))], axis=-1)

    def conjugate(self, y):
        return sum(b.conjugate(yi) for b, yi in zip(self.blocks, self._split(y)))

    def jacobian_trace(self, y):
        return sum(b.jacobian_trace(yi) for b, yi in zip(self.blocks, self._split(y)))

    def preimage(self, x, margin=_INTERIOR_MARGIN):
        return np.concatenate(
            [b.preimage(xi, margin) for b, xi in zip(self.blocks, self._split(x))], axis=-1
        )

    def sample_uniform(self, rng, size=()):
        return np.concatenate([b.sample_uniform(rng, size) for b in self.blocks], axis=-1)


def as_joint(reg) -> JointRegularizer:
    return reg if isinstance(reg, JointRegularizer) else JointRegularizer((reg,))


def make_regularizer(kind: str, player_dims, lo=0.0, hi=1.0) -> JointRegularizer:
    """Build the same regularizer kind for every player.

    ``lo``/``hi`` may be scalars or per-player sequences (box bounds).
    """
    n = len(player_dims)
    los = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    his = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    return JointRegularizer(
        tuple(Regularizer(kind, int(d), float(a), float(b)) for d, a, b in zip(player_dims, los, his))
    )


# -- functional surface ------------------------------------------------------


def mirror(reg, y):
    return reg.mirror(y)


def conjugate(reg, y):
    return reg.conjugate(y)


def fenchel_coupling(reg, p, y):
    """F(p, y) = h(p) + h*(y) - <y, p>, clipped at 0 against roundoff."""
    p = np.asarray(p, dtype=float)
    y = _check_finite(y)
    if not np.all(reg.contains(p)):
        raise DomainError("base point is infeasible for this regularizer")
    val = reg.h(p) + reg.conjugate(y) - np.sum(y * p, axis=-1)
    return np.maximum(val, 0.0)


def strong_convexity_lower_bound_check(reg, p, y, slack=1e-12):
    """True iff F(p, y) + slack >= K/2 * ||Q(y) - p||^2 in the regularizer's norm."""
    F = fenchel_coupling(reg, p, y)
    rhs = 0.5 * reg.K * reg.norm(reg.mirror(y) - np.asarray(p, dtype=float)) ** 2
    return bool(np.all(F + slack >= rhs))
