import numpy as np
import pytest

from regdyn.errors import DomainError
from regdyn.ftrl import FtrlConfig, fenchel_energy_curve, ftrl_step, run_ftrl
from regdyn.games import make_game
from regdyn.noise import NoiseSpec, SeededStream
from regdyn.regularizers import fenchel_coupling, make_regularizer

EUC = make_regularizer("euclidean", (1, 1))
QUIET = NoiseSpec(sigma=0)


def rng(i=0):
    return SeededStream(21, i).generator()


def test_step_examples():
    q, b = make_game("quadratic"), make_game("bilinear")
    assert ftrl_step(np.array([1.0, 1.0]), q, EUC, QUIET, 0.5, rng()).tolist() == [0.5, 0.5]
    assert ftrl_step(np.array([1.0, 0.0]), b, EUC, QUIET, 0.1, rng()).tolist() == [1.0, 0.1]
    with pytest.raises(DomainError):
        ftrl_step(np.zeros(2), q, EUC, QUIET, 0.0, rng())


def test_matching_pennies_rests_at_uniform_without_noise():
    g = make_game("matching_pennies")
    reg = make_regularizer("entropic", g.player_dims)
    ens = run_ftrl(g, reg, QUIET, FtrlConfig(step=0.1, n_steps=500), seed=0)
    assert np.array_equal(ens.actions[0], np.full((501, 4), 0.5))


def test_bilinear_norm_grows_geometrically():
    gamma = 0.1
    cfg = FtrlConfig(step=gamma, n_steps=200, init=(1.0, 0.0))
    ens = run_ftrl(make_game("bilinear"), EUC, QUIET, cfg, seed=0)
    norms = np.linalg.norm(ens.scores[0], axis=-1)
    # direct iteration oracle of the rotation-plus-Euler map
    y, oracle = np.array([1.0, 0.0]), [1.0]
    for _ in range(200):
        y = y + gamma * np.array([-y[1], y[0]])
        oracle.append(np.linalg.norm(y))
    assert np.allclose(norms, oracle, rtol=1e-12)
    assert np.allclose(norms, np.sqrt(1 + gamma**2) ** np.arange(201), rtol=1e-10)
    assert np.all(np.diff(norms) > 0)


def test_quadratic_converges_linearly():
    gamma = 0.1
    cfg = FtrlConfig(step=gamma, n_steps=100, init=(2.0, -1.0))
    d = np.linalg.norm(run_ftrl(make_game("quadratic"), EUC, QUIET, cfg, seed=0).actions[0], axis=-1)
    assert np.all(d <= (1 - gamma) ** np.arange(101) * d[0] * (1 + 1e-12))


@pytest.mark.parametrize("kind", ["euclidean", "euclidean_box", "entropic", "binary_entropy"])
def test_one_step_inequality_holds_pathwise(kind):
    g = make_game("matching_pennies" if kind == "entropic" else "appendixE")
    reg = make_regularizer(kind, g.player_dims)
    noise, gamma = NoiseSpec(sigma=1.0), 0.2
    r = rng(1)
    p = g.x_star
    y = r.normal(size=(500, g.dim))
    for _ in range(20):
        x = reg.mirror(y)
        y_next = ftrl_step(y, g, reg, noise, gamma, r)
        w = y_next - y
        rhs = fenchel_coupling(reg, p, y) + np.sum(w * (x - p), -1) + reg.dual_norm(w) ** 2 / (2 * reg.K)
        assert np.all(fenchel_coupling(reg, p, y_next) <= rhs + 1e-10)
        y = y_next


def test_energy_curve_examples():
    cfg = FtrlConfig(step=0.1, n_steps=50, init=(1.0, 2.0))
    traj = run_ftrl(make_game("quadratic"), EUC, QUIET, cfg, seed=0)[0]
    F = fenchel_energy_curve(traj, [0.0, 0.0])
    assert np.allclose(F, 0.5 * np.sum(traj.scores**2, -1), rtol=1e-14)
    assert np.all(np.diff(F) < 0) and F[-1] < 1e-4 * F[0]
    assert fenchel_energy_curve(traj, traj.actions[7])[7] == 0


def test_energy_grows_in_null_monotone_game():
    g = make_game("matching_pennies")
    reg = make_regularizer("entropic", g.player_dims)
    ens = run_ftrl(g, reg, NoiseSpec(sigma=1.0), FtrlConfig(step=0.1, n_steps=2000, n_runs=200, record_stride=100), seed=3)
    F = fenchel_energy_curve(ens, g.x_star).mean(0)
    assert F[-1] > F[0]


def test_times_are_step_indices():
    ens = run_ftrl(make_game("quadratic"), EUC, QUIET, FtrlConfig(n_steps=10, record_stride=4), seed=0)
    assert ens.times.tolist() == [0, 4, 8, 10]
    assert ens.metadata["gamma"] == 0.1


def test_random_primal_init_is_uniform_and_feasible():
    g = make_game("appendixE")
    reg = make_regularizer("binary_entropy", g.player_dims)
    cfg = FtrlConfig(step=0.1, n_steps=1, n_runs=4000, init="uniform-random-primal")
    x0 = run_ftrl(g, reg, QUIET, cfg, seed=4).actions[:, 0]
    assert np.all((x0 > 0) & (x0 < 1))
    assert np.allclose(x0.mean(0), 0.5, atol=0.03)
    assert np.allclose(x0.var(0), 1 / 12, atol=0.01)


def test_worker_count_does_not_change_results():
    g = make_game("matching_pennies")
    reg = make_regularizer("entropic", g.player_dims)
    cfg = FtrlConfig(step=0.1, n_steps=100, n_runs=10, init="uniform-random-primal")
    a = run_ftrl(g, reg, NoiseSpec(sigma=1.0), cfg, seed=5, workers=1)
    b = run_ftrl(g, reg, NoiseSpec(sigma=1.0), cfg, seed=5, workers=4)
    assert a.scores.tobytes() == b.scores.tobytes()


def test_corner_concentration_example():
    g = make_game("matching_pennies")
    reg = make_regularizer("entropic", g.player_dims)
    cfg = FtrlConfig(step=0.1, n_steps=100, n_runs=1000, record_stride=100, init="uniform-random-primal")
    x = run_ftrl(g, reg, NoiseSpec(sigma=1.0), cfg, seed=6).actions[:, -1]
    assert np.mean(np.any((x > 0.9) | (x < 0.1), axis=-1)) > 0.6


def test_config_guards():
    with pytest.raises(DomainError):
        FtrlConfig(step=0)
    with pytest.raises(DomainError):
        FtrlConfig(n_steps=0)
    with pytest.raises(DomainError):
        FtrlConfig(n_steps=10**6, n_runs=10**5)
    with pytest.raises(DomainError):
        FtrlConfig(init="gaussian")
    with pytest.raises(DomainError):
        run_ftrl(make_game("quadratic"), EUC, QUIET, FtrlConfig(init=(1.0, 2.0, 3.0)), seed=0)
