import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regdyn.errors import DomainError
from regdyn.regularizers import (
    KINDS,
    Regularizer,
    conjugate,
    fenchel_coupling,
    make_regularizer,
    mirror,
    strong_convexity_lower_bound_check,
)

N_CASES = 1000


def _reg(kind):
    return make_regularizer(kind, (3,) if kind == "entropic" else (2,))


def _primal(rng, reg, n):
    if reg.kind == "euclidean":
        return rng.normal(size=(n, reg.dim))
    return reg.sample_uniform(rng, n)


@pytest.fixture(params=KINDS)
def reg(request):
    return _reg(request.param)


# -- examples ------------------------------------------------------------------


def test_entropic_zero_scores_give_uniform():
    r = make_regularizer("entropic", (4,))
    assert np.allclose(mirror(r, np.zeros(4)), 0.25, atol=0, rtol=1e-15)


def test_box_mirror_clamps():
    r = make_regularizer("euclidean_box", (2,))
    assert mirror(r, np.array([1.7, -0.3])).tolist() == [1.0, 0.0]


def test_logit_map_value_and_grid_argmax():
    r = make_regularizer("entropic", (3,))
    y = np.array([1.0, 2.0, 3.0])
    x = mirror(r, y)
    z = np.exp(y)
    assert np.allclose(x, z / z.sum(), rtol=0, atol=1e-15)
    assert np.allclose(x, [0.09003057, 0.24472847, 0.66524096], atol=5e-9)
    # brute-force argmax of <y, x> - sum x log x over a 1e-3 mesh of the simplex
    m = 1000
    i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    keep = i + j <= m
    P = np.stack([i[keep], j[keep], m - i[keep] - j[keep]], axis=-1) / m
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(P > 0, P * np.log(np.where(P > 0, P, 1)), 0).sum(-1)
    best = P[np.argmax(P @ y - ent)]
    assert np.max(np.abs(best - x)) <= 1e-3


def test_binary_entropy_mirror_is_logistic():
    r = make_regularizer("binary_entropy", (3,))
    y = np.array([-800.0, 0.0, 800.0])
    assert mirror(r, y).tolist() == [0.0, 0.5, 1.0]


def test_conjugate_examples():
    assert conjugate(make_regularizer("entropic", (2,)), np.zeros(2)) == pytest.approx(math.log(2), abs=1e-15)
    assert conjugate(make_regularizer("euclidean", (2,)), np.array([3.0, 4.0])) == 12.5
    box = make_regularizer("euclidean_box", (3,))
    y = np.array([-1.0, 0.5, 2.0])
    assert conjugate(box, y) == pytest.approx(1.625, abs=1e-15)
    grid = np.linspace(0, 1, 100001)
    oracle = sum(np.max(v * grid - grid**2 / 2) for v in y)
    assert conjugate(box, y) == pytest.approx(oracle, abs=1e-9)


def test_fenchel_examples():
    e = make_regularizer("euclidean", (2,))
    assert fenchel_coupling(e, np.ones(2), np.ones(2)) == 0
    p, y = np.array([0.3, -2.0]), np.array([1.5, 0.25])
    assert fenchel_coupling(e, p, y) == pytest.approx(0.5 * np.sum((y - p) ** 2), rel=1e-14)
    s = make_regularizer("entropic", (2,))
    assert fenchel_coupling(s, np.array([0.5, 0.5]), np.zeros(2)) == pytest.approx(0, abs=1e-15)
    assert fenchel_coupling(s, np.array([1.0, 0.0]), np.zeros(2)) == pytest.approx(math.log(2), abs=1e-15)


def test_fenchel_is_kl_on_simplex():
    rng = np.random.default_rng(1)
    s = make_regularizer("entropic", (4,))
    p = s.sample_uniform(rng, 50)
    y = rng.normal(size=(50, 4))
    q = mirror(s, y)
    kl = np.sum(p * np.log(p / q), axis=-1)
    assert np.allclose(fenchel_coupling(s, p, y), kl, atol=1e-12)


def test_binary_entropy_strong_convexity_example():
    r = make_regularizer("binary_entropy", (1,))
    p, y = np.array([0.9]), np.array([0.0])
    F = fenchel_coupling(r, p, y)
    assert F >= 0.5 * 4 * 0.4**2
    assert strong_convexity_lower_bound_check(r, p, y)


def test_euclidean_strong_convexity_is_equality():
    r = make_regularizer("euclidean", (2,))
    assert strong_convexity_lower_bound_check(r, np.array([1.0, 2.0]), np.array([-1.0, 0.5]), slack=0.0)


def test_moduli():
    assert [_reg(k).K for k in KINDS] == [1.0, 1.0, 1.0, 4.0]


# -- errors ----------------------------------------------------------------------


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_scores_rejected(reg, bad):
    y = np.zeros(reg.dim)
    y[0] = bad
    with pytest.raises(DomainError):
        mirror(reg, y)
    with pytest.raises(DomainError):
        conjugate(reg, y)


def test_infeasible_base_point_rejected():
    s = make_regularizer("entropic", (2,))
    with pytest.raises(DomainError):
        fenchel_coupling(s, np.array([0.7, 0.7]), np.zeros(2))
    b = make_regularizer("euclidean_box", (2,))
    with pytest.raises(DomainError):
        fenchel_coupling(b, np.array([1.5, 0.0]), np.zeros(2))


def test_invalid_specs():
    with pytest.raises(DomainError):
        Regularizer("tsallis", 2)
    with pytest.raises(DomainError):
        Regularizer("entropic", 1)
    with pytest.raises(DomainError):
        Regularizer("euclidean_box", 2, lo=1.0, hi=0.0)


# -- identities on randomized cases --------------------------------------------------


def test_mirror_is_gradient_of_conjugate(reg):
    rng = np.random.default_rng(2)
    y = rng.normal(scale=2.0, size=(100, reg.dim))
    h = 1e-6
    fd = np.stack([(conjugate(reg, y + h * e) - conjugate(reg, y - h * e)) / (2 * h) for e in np.eye(reg.dim)], -1)
    x = mirror(reg, y)
    err = np.abs(fd - x) / np.maximum(np.abs(x), 1e-3)
    assert err.max() <= 1e-5


def test_mirror_lipschitz(reg):
    rng = np.random.default_rng(3)
    y, y2 = rng.normal(scale=3.0, size=(2, N_CASES, reg.dim))
    lhs = reg.norm(mirror(reg, y2) - mirror(reg, y))
    assert np.all(lhs <= reg.dual_norm(y2 - y) / reg.K + 1e-12)


def test_three_point_identity(reg):
    rng = np.random.default_rng(4)
    p = _primal(rng, reg, N_CASES)
    y, y2 = rng.normal(scale=3.0, size=(2, N_CASES, reg.dim))
    x = mirror(reg, y)
    resid = (fenchel_coupling(reg, p, y2) - fenchel_coupling(reg, p, y) - fenchel_coupling(reg, x, y2)
             - np.sum((y2 - y) * (x - p), axis=-1))
    assert np.max(np.abs(resid)) <= 1e-10


def test_one_step_inequality(reg):
    rng = np.random.default_rng(5)
    p = _primal(rng, reg, N_CASES)
    y, w = rng.normal(scale=3.0, size=(2, N_CASES, reg.dim))
    x = mirror(reg, y)
    rhs = fenchel_coupling(reg, p, y) + np.sum(w * (x - p), axis=-1) + reg.dual_norm(w) ** 2 / (2 * reg.K)
    assert np.all(fenchel_coupling(reg, p, y + w) <= rhs + 1e-10)


def test_strong_convexity_bound(reg):
    rng = np.random.default_rng(6)
    p = _primal(rng, reg, N_CASES)
    y = rng.normal(scale=3.0, size=(N_CASES, reg.dim))
    assert strong_convexity_lower_bound_check(reg, p, y)


def test_fenchel_zero_iff_mirror_hits_base(reg):
    rng = np.random.default_rng(7)
    y = rng.normal(size=(200, reg.dim))
    x = mirror(reg, y)
    assert np.all(fenchel_coupling(reg, x, y) <= 1e-12)
    other = _primal(rng, reg, 200)
    far = reg.norm(other - x) > 1e-3
    assert np.all(fenchel_coupling(reg, other, y)[far] > 0)


def test_mirror_lands_in_prox_domain():
    rng = np.random.default_rng(8)
    y = rng.normal(scale=5.0, size=(N_CASES, 3))
    x = mirror(make_regularizer("entropic", (3,)), y)
    assert np.all(x > 0) and np.allclose(x.sum(-1), 1, atol=1e-15)
    z = mirror(make_regularizer("binary_entropy", (3,)), y)
    assert np.all((z > 0) & (z < 1))
    b = mirror(make_regularizer("euclidean_box", (3,), lo=-0.5, hi=2.0), y)
    assert np.all((b >= -0.5) & (b <= 2.0))


def test_preimage_round_trip(reg):
    rng = np.random.default_rng(9)
    x = reg.sample_uniform(rng, 100) if reg.kind != "euclidean" else rng.normal(size=(100, reg.dim))
    assert np.allclose(mirror(reg, reg.preimage(x)), x, atol=1e-5)


def test_jacobian_trace_matches_finite_difference(reg):
    rng = np.random.default_rng(10)
    y = rng.normal(size=(50, reg.dim)) * 0.4 + 0.5
    h = 1e-6
    fd = sum((mirror(reg, y + h * e) - mirror(reg, y - h * e))[:, i] / (2 * h) for i, e in enumerate(np.eye(reg.dim)))
    assert np.allclose(reg.jacobian_trace(y), fd, atol=1e-6)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(-50 * 2**20, 50 * 2**20), min_size=3, max_size=3),
    st.integers(-1000, 1000),
)
def test_simplex_shift_invariance(y, c):
    # dyadic scores so that y + c is exact and only the mirror map's own roundoff is measured
    s = make_regularizer("entropic", (3,))
    y = np.array(y, dtype=float) / 2**20
    assert np.max(np.abs(mirror(s, y + c) - mirror(s, y))) <= 1e-14


def test_simplex_shift_invariance_small_real_shifts():
    rng = np.random.default_rng(12)
    s = make_regularizer("entropic", (3,))
    y = rng.normal(scale=5.0, size=(N_CASES, 3))
    c = rng.uniform(-1, 1, size=(N_CASES, 1))
    assert np.max(np.abs(mirror(s, y + c) - mirror(s, y))) <= 1e-14


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=2, max_size=2))
def test_conjugate_is_finite_for_large_scores(y):
    for kind in ("entropic", "binary_entropy"):
        assert np.isfinite(conjugate(make_regularizer(kind, (2,)), np.array(y)))


def test_joint_regularizer_concatenates_blocks():
    joint = make_regularizer("entropic", (2, 3))
    y = np.arange(5.0)
    x = mirror(joint, y)
    assert np.isclose(x[:2].sum(), 1) and np.isclose(x[2:].sum(), 1)
    single = make_regularizer("entropic", (3,))
    assert np.allclose(x[2:], mirror(single, y[2:]), rtol=0, atol=0)
    p = np.array([0.5, 0.5, 0.2, 0.3, 0.5])
    parts = fenchel_coupling(make_regularizer("entropic", (2,)), p[:2], y[:2]) + fenchel_coupling(single, p[2:], y[2:])
    assert fenchel_coupling(joint, p, y) == pytest.approx(parts, rel=1e-14)


def test_batch_rows_match_single_evaluation(reg):
    rng = np.random.default_rng(11)
    y = rng.normal(size=(7, reg.dim))
    batch = mirror(reg, y)
    for i in range(7):
        assert np.array_equal(batch[i], mirror(reg, y[i]))
