import numpy as np
import pytest

from regdyn.errors import DomainError, SimulationError
from regdyn.games import make_game
from regdyn.monitors import BallHit
from regdyn.noise import NoiseSpec, SeededStream
from regdyn.regularizers import make_regularizer
from regdyn.sde import (
    SdeConfig,
    euler_maruyama_step,
    ou_exact_step,
    simulate_ou_exact,
    simulate_sde,
)

EUC = make_regularizer("euclidean", (1, 1))
QUIET = NoiseSpec(sigma=0)


def rng(i=0):
    return SeededStream(11, i).generator()


def test_em_step_examples():
    y = np.array([1.0, 0.0])
    assert euler_maruyama_step(y, make_game("quadratic"), EUC, QUIET, 0.1, rng()).tolist() == [0.9, 0.0]
    assert euler_maruyama_step(y, make_game("bilinear"), EUC, QUIET, 0.1, rng()).tolist() == [1.0, 0.1]


def test_em_step_rejects_bad_dt():
    with pytest.raises(DomainError):
        euler_maruyama_step(np.zeros(2), make_game("quadratic"), EUC, QUIET, 0.0, rng())


def test_deterministic_quadratic_contracts():
    x0 = (3.0, -4.0)
    cfg = SdeConfig(dt=1e-3, horizon=2.0, y0=x0, record_stride=100)
    ens = simulate_sde(make_game("quadratic"), EUC, QUIET, cfg, seed=0)
    norms = np.linalg.norm(ens.actions[0], axis=-1)
    bound = np.exp(-ens.times) * 5.0 + 1e-6
    assert np.all(norms <= bound)
    assert np.all(np.diff(norms) < 0)


def test_deterministic_bilinear_conserves_norm():
    cfg = SdeConfig(dt=1e-4, horizon=10.0, y0=(1.0, 0.0), record_stride=1000)
    ens = simulate_sde(make_game("bilinear"), EUC, QUIET, cfg, seed=0)
    norms = np.linalg.norm(ens.actions[0], axis=-1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-3


def test_ou_exact_step_moments():
    x = np.full(10**6, 2.0)
    out = ou_exact_step(x, 0.5, 0.7, rng(1))
    assert out.mean() == pytest.approx(2 * np.exp(-0.5), abs=4e-3)
    assert out.var() == pytest.approx(0.49 * (1 - np.exp(-1)) / 2, rel=0.01)


def test_ou_exact_stationary_variance():
    sigma = 0.5
    ens = simulate_ou_exact(sigma, (0.0, 0.0), dt=10.0, horizon=10.0, n_paths=20000, seed=3)
    final = ens.scores[:, -1]
    assert final.var(0) == pytest.approx([sigma**2 / 2] * 2, rel=0.03)


def test_em_ou_stationary_variance():
    sigma = 1.0
    cfg = SdeConfig(dt=1e-2, horizon=8.0, n_paths=4000, record_stride=800)
    ens = simulate_sde(make_game("quadratic"), EUC, NoiseSpec(sigma=sigma), cfg, seed=4)
    v = ens.scores[:, -1].var(0)
    # the EM chain is stationary at sigma^2 / (2 - dt)
    assert np.all(np.abs(v / (sigma**2 / (2 - 1e-2)) - 1) <= 0.06)


@pytest.mark.parametrize("dt", [1e-2, 1e-3])
def test_em_weakly_matches_exact_ou(dt):
    n, T, x0 = 10000, 2.0, (2.0, 0.0)
    cfg = SdeConfig(dt=dt, horizon=T, y0=x0, n_paths=n, record_stride=10**6)
    em = simulate_sde(make_game("quadratic"), EUC, NoiseSpec(sigma=1.0), cfg, seed=5)
    ex = simulate_ou_exact(1.0, x0, dt=T, horizon=T, n_paths=n, seed=6)
    a = np.sum(em.scores[:, -1] ** 2, -1)
    b = np.sum(ex.scores[:, -1] ** 2, -1)
    se = np.sqrt(a.var() / n + b.var() / n)
    assert abs(a.mean() - b.mean()) <= 4 * se + 2 * dt
    assert abs(em.scores[:, -1, 0].mean() - 2 * np.exp(-T)) <= 4 * em.scores[:, -1, 0].std() / np.sqrt(n) + dt


@pytest.mark.parametrize("kind", ["entropic", "binary_entropy", "euclidean_box"])
def test_actions_stay_feasible(kind):
    g = make_game("matching_pennies" if kind == "entropic" else "appendixE")
    reg = make_regularizer(kind, g.player_dims)
    cfg = SdeConfig(dt=1e-2, horizon=2.0, n_paths=20)
    x = simulate_sde(g, reg, NoiseSpec(sigma=2.0), cfg, seed=7).actions
    assert np.all(np.isfinite(x))
    if kind == "entropic":
        for sl in g.slices:
            assert np.allclose(x[..., sl].sum(-1), 1)
    assert np.all((x >= 0) & (x <= 1))


def test_record_grid_and_times():
    cfg = SdeConfig(dt=0.01, horizon=1.0, record_stride=30)
    ens = simulate_sde(make_game("quadratic"), EUC, QUIET, cfg, seed=0)
    assert np.allclose(ens.times, [0, 0.3, 0.6, 0.9, 1.0])
    assert np.all(np.diff(ens.times) > 0)


def test_paths_have_distinct_streams():
    cfg = SdeConfig(dt=0.01, horizon=0.5, n_paths=3)
    s = simulate_sde(make_game("bilinear"), EUC, NoiseSpec(sigma=1), cfg, seed=8).scores
    assert not np.array_equal(s[0], s[1]) and not np.array_equal(s[1], s[2])


def test_path_ids_select_streams():
    cfg = SdeConfig(dt=0.01, horizon=0.5, n_paths=5)
    g, noise = make_game("bilinear"), NoiseSpec(sigma=1)
    full = simulate_sde(g, EUC, noise, cfg, seed=9)
    part = simulate_sde(g, EUC, noise, cfg, seed=9, path_ids=[3])
    assert np.array_equal(full.scores[3], part.scores[0])


def test_seed_reproducibility_and_workers():
    cfg = SdeConfig(dt=0.01, horizon=0.5, n_paths=6)
    g, noise = make_game("appendixE"), NoiseSpec(sigma=0.5)
    reg = make_regularizer("euclidean_box", g.player_dims)
    a = simulate_sde(g, reg, noise, cfg, seed=10, workers=1)
    b = simulate_sde(g, reg, noise, cfg, seed=10, workers=3)
    assert a.scores.tobytes() == b.scores.tobytes()
    assert a.path_ids.tolist() == b.path_ids.tolist()


def test_monitor_sees_unrecorded_steps():
    mon = BallHit("hit", center=(0.0, 0.0), radius=0.5)
    cfg = SdeConfig(dt=1e-3, horizon=2.0, y0=(1.0, 0.0), record_stride=10**6)
    ens = simulate_sde(make_game("quadratic"), EUC, QUIET, cfg, seed=0, monitors=[mon])
    assert len(ens.times) == 2
    assert ens.events["hit"][0] == pytest.approx(np.log(2), abs=2e-3)


def test_config_guards():
    with pytest.raises(DomainError):
        SdeConfig(dt=0)
    with pytest.raises(DomainError):
        SdeConfig(dt=2, horizon=1)
    with pytest.raises(DomainError):
        SdeConfig(dt=1e-12, horizon=1e3)
    with pytest.raises(DomainError):
        SdeConfig(n_paths=0)
    with pytest.raises(DomainError):
        SdeConfig(y0_space="tangent")


def test_primal_start_requires_euclidean():
    g = make_game("appendixE")
    cfg = SdeConfig(y0=(0.5, 0.5), y0_space="primal")
    with pytest.raises(DomainError):
        simulate_sde(g, make_regularizer("binary_entropy", g.player_dims), QUIET, cfg, seed=0)


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        simulate_sde(make_game("matching_pennies"), EUC, QUIET, SdeConfig(), seed=0)


def test_divergence_is_reported():
    class Exploding:
        name, dim = "exploding", 2

        def gradient_field(self, x):
            with np.errstate(over="ignore"):
                return np.asarray(x) ** 2 * 1e200

    cfg = SdeConfig(dt=0.1, horizon=1.0, y0=(1.0, 1.0))
    with pytest.raises(SimulationError) as err:
        simulate_sde(Exploding(), EUC, QUIET, cfg, seed=12)
    assert err.value.seed == 12 and err.value.path == 0 and err.value.step >= 1
