"""Stochastic regularized learning dynamics in continuous games."""

from .bounds import (
    bound_hit_null_cont_plus,
    bound_hit_quadratic,
    bound_hit_strong_cont,
    bound_occupation_cont,
    bound_occupation_disc,
    bound_stop_strong_disc,
)
from .engine import Ensemble, Trajectory
from .errors import ConfigError, ConvergenceError, DomainError, SimulationError
from .ftrl import FtrlConfig, fenchel_energy_curve, ftrl_step, run_ftrl
from .games import GameSpec, make_game
from .noise import NoiseSpec, SeededStream, brownian_increment, sample_gradient_noise, sfo
from .regularizers import conjugate, fenchel_coupling, make_regularizer, mirror
from .sde import SdeConfig, euler_maruyama_step, ou_exact_step, simulate_ou_exact, simulate_sde

__all__ = [
    "ConfigError", "ConvergenceError", "DomainError", "Ensemble", "FtrlConfig", "GameSpec",
    "NoiseSpec", "SdeConfig", "SeededStream", "SimulationError", "Trajectory",
    "bound_hit_null_cont_plus", "bound_hit_quadratic", "bound_hit_strong_cont",
    "bound_occupation_cont", "bound_occupation_disc", "bound_stop_strong_disc",
    "brownian_increment", "conjugate", "euler_maruyama_step", "fenchel_coupling",
    "fenchel_energy_curve", "ftrl_step", "make_game", "make_regularizer", "mirror",
    "ou_exact_step", "run_ftrl", "sample_gradient_noise", "sfo", "simulate_ou_exact", "simulate_sde",
]
