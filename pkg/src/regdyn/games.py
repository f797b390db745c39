"""Closed-form continuous games with affine gradient fields.

Each game stores its data exactly (``fractions.Fraction``) and converts to
floating point at use sites:

* the gradient field ``v(x) = J x + b`` through ``jacobian``/``offset``;
* each player's payoff as a quadratic form ``u_i(x) = x'P_i x / 2 + q_i'x + r_i``.

The two are declared independently in every constructor, which is what makes
the finite-difference consistency check between them meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DomainError

FEASIBILITY_TOL = 1e-9

GAME_IDS = ("bilinear", "quadratic", "appendixE", "matching_pennies", "cournot")


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _frac_matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(_frac(v) for v in row) for row in rows)


def _frac_vector(vals) -> tuple[Fraction, ...]:
    return tuple(_frac(v) for v in vals)


def _as_float(m) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in m]) if m and isinstance(m[0], tuple) else np.array([float(v) for v in m])


# the product J x is written as a broadcast multiply + last-axis sum so each
# row is computed identically whatever the batch size
def _affine(J, b, x):
    return np.sum(J * x[..., None, :], axis=-1) + b


@dataclass(frozen=True)
class Geometry:
    """Action space of one player: ``full`` (R^d), ``box`` ([lo, hi]^d) or ``simplex``."""

    kind: str
    dim: int
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.kind not in ("full", "box", "simplex"):
            raise DomainError(f"unknown geometry {self.kind!r}")

    def contains(self, x, tol=FEASIBILITY_TOL):
        x = np.asarray(x, dtype=float)
        if self.kind == "full":
            return np.all(np.isfinite(x), axis=-1)
        if self.kind == "box":
            return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)
        return np.all(x >= -tol, axis=-1) & (np.abs(np.sum(x, axis=-1) - 1.0) <= tol)

    def project(self, x):
        if self.kind == "full":
            return np.asarray(x, dtype=float)
        if self.kind == "box":
            return np.clip(x, self.lo, self.hi)
        raise NotImplementedError("simplex projection is not needed by the catalog games")

    def sample(self, rng, size):
        """Uniform draws; a bounded window [-2, 2]^d stands in for R^d."""
        if self.kind == "full":
            return rng.uniform(-2.0, 2.0, size=(size, self.dim))
        if self.kind == "box":
            return rng.uniform(self.lo, self.hi, size=(size, self.dim))
        return rng.dirichlet(np.ones(self.dim), size=size)

    def sample_interior(self, rng, size, margin=0.05):
        if self.kind == "box":
            w = self.hi - self.lo
            return rng.uniform(self.lo + margin * w, self.hi - margin * w, size=(size, self.dim))
        if self.kind == "simplex":
            x = rng.dirichlet(np.ones(self.dim), size=size)
            return (1 - margin * self.dim) * x + margin
        return self.sample(rng, size)


@dataclass(frozen=True)
class Monotonicity:
    kind: str  # "null" | "merely" | "strong"
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("null", "merely", "strong"):
            raise DomainError(f"unknown monotonicity class {self.kind!r}")
        if self.beta < 0 or (self.kind == "strong") != (self.beta > 0):
            raise DomainError("strong monotonicity needs beta > 0, other classes beta = 0")


@dataclass(frozen=True)
class GameSpec:
    name: str
    geometries: tuple[Geometry, ...]
    jacobian: tuple[tuple[Fraction, ...], ...]
    offset: tuple[Fraction, ...]
    payoff_quadratic: tuple[tuple[tuple[Fraction, ...], ...], ...]
    payoff_linear: tuple[tuple[Fraction, ...], ...]
    payoff_constant: tuple[Fraction, ...]
    equilibrium: tuple[Fraction, ...]
    monotonicity: Monotonicity
    params: dict = field(default_factory=dict, compare=False)

    @property
    def n_players(self) -> int:
        return len(self.geometries)

    @property
    def player_dims(self) -> tuple[int, ...]:
        return tuple(g.dim for g in self.geometries)

    @property
    def dim(self) -> int:
        return sum(self.player_dims)

    @cached_property
    def slices(self) -> tuple[slice, ...]:
        out, start = [], 0
        for d in self.player_dims:
            out.append(slice(start, start + d))
            start += d
        return tuple(out)

    @cached_property
    def J(self) -> np.ndarray:
        return _as_float(self.jacobian)

    @cached_property
    def b(self) -> np.ndarray:
        return _as_float(self.offset)

    @cached_property
    def x_star(self) -> np.ndarray:
        return _as_float(self.equilibrium)

    @cached_property
    def lipschitz(self) -> float:
        """Lipschitz constant of the gradient field (spectral norm of J)."""
        return float(np.linalg.norm(self.J, 2))

    @property
    def beta(self) -> float:
        return self.monotonicity.beta

    def symmetrized_jacobian(self) -> tuple[tuple[Fraction, ...], ...]:
        """Exact (J + J')/2; for Cournot this is the game's Hessian matrix."""
        n = self.dim
        return tuple(
            tuple((self.jacobian[i][j] + self.jacobian[j][i]) / 2 for j in range(n)) for i in range(n)
        )

    def gradient_field(self, x):
        x = np.asarray(x, dtype=float)
        return _affine(self.J, self.b, x)

    def payoff(self, i: int, x):
        x = np.asarray(x, dtype=float)
        P = _as_float(self.payoff_quadratic[i])
        q = _as_float(self.payoff_linear[i])
        return 0.5 * np.sum(x * np.sum(P * x[..., None, :], axis=-1), axis=-1) + x @ q + float(self.payoff_constant[i])

    def is_feasible(self, x, tol=FEASIBILITY_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            return np.zeros(x.shape[:-1], dtype=bool)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for g, s in zip(self.geometries, self.slices):
            ok &= g.contains(x[..., s], tol)
        return ok

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([g.project(x[..., s]) for g, s in zip(self.geometries, self.slices)], axis=-1)

    def sample_feasible(self, rng, size):
        return np.concatenate([g.sample(rng, size) for g in self.geometries], axis=-1)

    def sample_interior(self, rng, size):
        return np.concatenate([g.sample_interior(rng, size) for g in self.geometries], axis=-1)

    @property
    def equilibrium_is_interior(self) -> bool:
        x = self.x_star
        for g, s in zip(self.geometries, self.slices):
            xi = x[s]
            if g.kind == "box" and np.any((xi <= g.lo + FEASIBILITY_TOL) | (xi >= g.hi - FEASIBILITY_TOL)):
                return False
            if g.kind == "simplex" and np.any(xi <= FEASIBILITY_TOL):
                return False
        return True


def monotonicity_gap(spec: GameSpec, x, x_prime):
    """<v(x') - v(x), x' - x> for feasible x, x'."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if not (np.all(spec.is_feasible(x)) and np.all(spec.is_feasible(x_prime))):
        raise DomainError(f"monotonicity gap needs feasible points of {spec.name}")
    dv = spec.gradient_field(x_prime) - spec.gradient_field(x)
    return np.sum(dv * (x_prime - x), axis=-1)


def symmetrized_jacobian_eigenvalues(spec: GameSpec) -> np.ndarray:
    """Eigenvalues of (J + J')/2, ascending."""
    H = _as_float(spec.symmetrized_jacobian())
    if H.shape == (2, 2):
        a, c, d = H[0, 0], H[0, 1], H[1, 1]
        mid, rad = (a + d) / 2, math.hypot((a - d) / 2, c)
        return np.array([mid - rad, mid + rad])
    return np.linalg.eigvalsh(H)


def weakest_direction(spec: GameSpec) -> np.ndarray:
    """Unit eigenvector of (J + J')/2 with the least negative eigenvalue."""
    H = _as_float(spec.symmetrized_jacobian())
    w, V = np.linalg.eigh(H)
    return V[:, -1]


# -- catalog -----------------------------------------------------------------


def _two_player_full(name, J, b, P1, q1, P2, q2, mono):
    return GameSpec(
        name=name,
        geometries=(Geometry("full", 1), Geometry("full", 1)),
        jacobian=_frac_matrix(J),
        offset=_frac_vector(b),
        payoff_quadratic=(_frac_matrix(P1), _frac_matrix(P2)),
        payoff_linear=(_frac_vector(q1), _frac_vector(q2)),
        payoff_constant=(Fraction(0), Fraction(0)),
        equilibrium=(Fraction(0), Fraction(0)),
        monotonicity=mono,
    )


def make_bilinear_saddle() -> GameSpec:
    """u_1 = -u_2 = -theta * phi on R^2; v = (-phi, theta)."""
    return _two_player_full(
        "bilinear",
        J=[[0, -1], [1, 0]],
        b=[0, 0],
        P1=[[0, -1], [-1, 0]],
        q1=[0, 0],
        P2=[[0, 1], [1, 0]],
        q2=[0, 0],
        mono=Monotonicity("null"),
    )


def make_quadratic_saddle() -> GameSpec:
    """u_1 = -u_2 = phi^2/2 - theta^2/2 on R^2; v = -(theta, phi)."""
    return _two_player_full(
        "quadratic",
        J=[[-1, 0], [0, -1]],
        b=[0, 0],
        P1=[[-1, 0], [0, 1]],
        q1=[0, 0],
        P2=[[1, 0], [0, -1]],
        q2=[0, 0],
        mono=Monotonicity("strong", 1.0),
    )


def make_appendixE_minmax() -> GameSpec:
    """Min-max game on [0, 1]^2 with f = -(x1 - 1/2)^2 + x1 x2 / 2 + 2 (x2 - 1/2)^2.

    Player 1 maximizes f, player 2 maximizes -f. The unique equilibrium is
    (20/33, 14/33); the symmetrized Jacobian is diag(-2, -4), so beta = 2.
    """
    h = Fraction(1, 2)
    # f = -x1^2 + x1 + x1 x2 / 2 + 2 x2^2 - 2 x2 + 1/4
    P1 = [[-2, h], [h, 4]]
    q1 = [1, -2]
    return GameSpec(
        name="appendixE",
        geometries=(Geometry("box", 1, 0.0, 1.0), Geometry("box", 1, 0.0, 1.0)),
        jacobian=_frac_matrix([[-2, h], [-h, -4]]),
        offset=_frac_vector([1, 2]),
        payoff_quadratic=(_frac_matrix(P1), _frac_matrix([[-v for v in row] for row in P1])),
        payoff_linear=(_frac_vector(q1), _frac_vector([-v for v in q1])),
        payoff_constant=(Fraction(1, 4), Fraction(-1, 4)),
        equilibrium=(Fraction(20, 33), Fraction(14, 33)),
        monotonicity=Monotonicity("strong", 2.0),
    )


def make_matching_pennies() -> GameSpec:
    """Mixed extension of matching pennies; u_1 = x_1' A x_2 = -u_2, A = [[1, -1], [-1, 1]]."""
    A = [[1, -1], [-1, 1]]
    Z = [[0, 0], [0, 0]]
    J = [Z[0] + A[0], Z[1] + A[1], [-A[0][0], -A[1][0], 0, 0], [-A[0][1], -A[1][1], 0, 0]]
    # u_1 = x' [[0, A], [A', 0]] x / 2
    P1 = [[0, 0] + A[0], [0, 0] + A[1], [A[0][0], A[1][0], 0, 0], [A[0][1], A[1][1], 0, 0]]
    h = Fraction(1, 2)
    return GameSpec(
        name="matching_pennies",
        geometries=(Geometry("simplex", 2), Geometry("simplex", 2)),
        jacobian=_frac_matrix(J),
        offset=_frac_vector([0, 0, 0, 0]),
        payoff_quadratic=(_frac_matrix(P1), _frac_matrix([[-v for v in row] for row in P1])),
        payoff_linear=(_frac_vector([0] * 4), _frac_vector([0] * 4)),
        payoff_constant=(Fraction(0), Fraction(0)),
        equilibrium=(h, h, h, h),
        monotonicity=Monotonicity("null"),
    )


def make_cournot(N: int = 2, a=1.0, b=1.0, costs: Sequence | None = None, budgets: Sequence | None = None) -> GameSpec:
    """Cournot oligopoly with linear inverse demand P(x) = a - b * sum(x).

    Firm i earns x_i P(x) - c_i x_i on [0, B_i], so
    v_i(x) = a - c_i - b * sum(x) - b x_i.  Budgets default to 2a/b.
    """
    if N < 2:
        raise DomainError("Cournot competition needs N >= 2 firms")
    a, b = _frac(a), _frac(b)
    if b <= 0:
        raise DomainError("Cournot slope b must be positive (otherwise not strongly monotone)")
    c = _frac_vector(costs if costs is not None else [0] * N)
    B = _frac_vector(budgets if budgets is not None else [2 * a / b] * N)
    if len(c) != N or len(B) != N:
        raise DomainError("costs and budgets need one entry per firm")
    if any(Bi <= 0 for Bi in B):
        raise DomainError("budgets must be positive")
    if any(ci < 0 or ci >= a for ci in c):
        raise DomainError("costs must satisfy 0 <= c_i < a")

    J = [[-b - (b if i == j else 0) for j in range(N)] for i in range(N)]
    Ps, qs = [], []
    for i in range(N):
        # u_i = (a - c_i) x_i - b x_i sum_j x_j
        Ps.append([[-b * ((r == i) + (s == i)) for s in range(N)] for r in range(N)])
        qs.append([(a - c[i]) if r == i else 0 for r in range(N)])
    spec = GameSpec(
        name="cournot",
        geometries=tuple(Geometry("box", 1, 0.0, float(Bi)) for Bi in B),
        jacobian=_frac_matrix(J),
        offset=tuple(a - ci for ci in c),
        payoff_quadratic=tuple(_frac_matrix(P) for P in Ps),
        payoff_linear=tuple(_frac_vector(q) for q in qs),
        payoff_constant=tuple(Fraction(0) for _ in range(N)),
        equilibrium=(),
        monotonicity=Monotonicity("strong", float(b)),
        params={"N": N, "a": float(a), "b": float(b), "c": [float(v) for v in c], "B": [float(v) for v in B]},
    )
    x_star = solve_cournot_equilibrium(spec)
    return _with_equilibrium(spec, x_star)


def _with_equilibrium(spec: GameSpec, x_star) -> GameSpec:
    from dataclasses import replace

    return replace(spec, equilibrium=tuple(x_star))


def solve_cournot_equilibrium(spec: GameSpec, tol: float = 1e-10, max_iter: int = 100_000):
    """Equilibrium of a Cournot game.

    Tries the interior solution of v(x) = 0 exactly (rational arithmetic); if
    it violates a budget, falls back to the projected fixed point
    x <- proj(x + v(x) / L).  Returns a tuple of Fractions (interior case) or
    floats (projected case).
    """
    n = spec.dim
    # exact Gauss-Jordan on J x = -b
    M = [list(row) + [-spec.offset[i]] for i, row in enumerate(spec.jacobian)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [u - f * w for u, w in zip(M[r], M[col])]
    x_exact = tuple(M[i][n] / M[i][i] for i in range(n))
    if all(spec.geometries[i].lo <= x_exact[i] <= spec.geometries[i].hi for i in range(n)):
        return x_exact

    step = 1.0 / spec.lipschitz
    x = spec.project(np.zeros(n))
    for _ in range(max_iter):
        x_new = spec.project(x + step * spec.gradient_field(x))
        if np.max(np.abs(x_new - x)) <= tol:
            return tuple(float(v) for v in x_new)
        x = x_new
    raise ConvergenceError(
        f"projected fixed point did not converge in {max_iter} iterations; check Cournot parameters"
    )


def make_game(game_id: str, **params) -> GameSpec:
    if game_id == "bilinear":
        return make_bilinear_saddle()
    if game_id == "quadratic":
        return make_quadratic_saddle()
    if game_id == "appendixE":
        return make_appendixE_minmax()
    if game_id == "matching_pennies":
        return make_matching_pennies()
    if game_id == "cournot":
        return make_cournot(
            N=int(params.get("N", 2)),
            a=params.get("a", 1.0),
            b=params.get("b", 1.0),
            costs=params.get("c"),
            budgets=params.get("B"),
        )
    raise DomainError(f"unknown game {game_id!r}; valid games: {', '.join(GAME_IDS)}")
