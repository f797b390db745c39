"""Experiment configuration files.

One ``key = value`` pair per line, dotted keys, ``#`` starts a comment.
Values are JSON (numbers, lists, true/false, quoted strings); anything that
is not valid JSON is kept as a bare string, so ``game.id = appendixE`` works.

    kind = final-distance-grid
    game.id = appendixE
    regularizer.id = binary_entropy
    ftrl.n_steps = 10000
    sweep.gamma = [0.01, 0.1, 0.5]
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DomainError

KINDS = (
    "simulate",
    "occupancy-grid",
    "final-distance-grid",
    "hitting-time-grid",
    "bounds-check",
    "corner-concentration",
)
GRID_KINDS = ("occupancy-grid", "final-distance-grid", "hitting-time-grid", "corner-concentration")
DEFAULT_BUDGET = 10**8

# key -> default (None = no default)
KEYS = {
    "kind": None,
    "engine": None,
    "seed": 0,
    "output.dir": "out",
    "output.paths": False,
    "budget.max_steps": DEFAULT_BUDGET,
    "game.id": None,
    "game.N": 2,
    "game.a": 1.0,
    "game.b": 1.0,
    "game.c": None,
    "game.B": None,
    "regularizer.id": None,
    "noise.model": "isotropic",
    "noise.sigma": 0.0,
    "noise.matrix": None,
    "sde.dt": 1e-3,
    "sde.horizon": 1.0,
    "sde.record_stride": 1,
    "sde.n_paths": 1,
    "sde.y0": None,
    "sde.y0_space": "dual",
    "ftrl.step": 0.1,
    "ftrl.n_steps": 100,
    "ftrl.n_runs": 1,
    "ftrl.record_stride": 1,
    "ftrl.init": "zero",
    "sweep.gamma": None,
    "sweep.sigma": None,
    "sweep.r": None,
    "bounds.eps": None,
    "bounds.occupation_from": None,
    "histogram.bins": 10,
    "histogram.dims": None,
    "check.spearman": 0.9,
    "check.corner_threshold": 0.6,
    "check.corner_tol": 0.1,
    "checks": True,
}

REGULARIZER_IDS = ("euclidean", "euclidean_box", "entropic", "binary_entropy")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


@dataclass
class ExperimentConfig:
    text: str
    values: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        cfg = cls(text)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip() if not raw.lstrip().startswith('"') else raw.strip()
            if not line:
                continue
            if "=" not in line:
                cfg.errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            if not key:
                cfg.errors.append(f"line {lineno}: empty key")
                continue
            if key in cfg.values:
                cfg.errors.append(f"{key}: duplicate key on line {lineno}")
                continue
            if key not in KEYS:
                cfg.errors.append(f"{key}: unknown key")
                continue
            cfg.values[key] = _parse_value(val)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def get(self, key):
        return self.values.get(key, KEYS[key])

    def require(self, key):
        v = self.get(key)
        if v is None:
            raise ConfigError("missing required key", key)
        return v

    def number(self, key, kind=float):
        v = self.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", key)
        if kind is int:
            if float(v) != int(v):
                raise ConfigError(f"expected an integer, got {v!r}", key)
            return int(v)
        return float(v)

    def number_list(self, key, default=None):
        v = self.get(key)
        if v is None:
            if default is None:
                raise ConfigError("missing required list", key)
            return list(default)
        if not isinstance(v, list) or not v or not all(isinstance(u, (int, float)) and not isinstance(u, bool) for u in v):
            raise ConfigError(f"expected a non-empty list of numbers, got {v!r}", key)
        return [float(u) for u in v]

    # -- typed views ---------------------------------------------------------

    @property
    def kind(self) -> str:
        k = self.require("kind")
        if k not in KINDS:
            raise ConfigError(f"unknown experiment kind {k!r}; valid kinds: {', '.join(KINDS)}", "kind")
        return k

    @property
    def engine(self) -> str:
        if self.kind in GRID_KINDS:
            return "ftrl"
        e = self.get("engine")
        if e is None:
            e = "sde" if any(k.startswith("sde.") for k in self.values) else "ftrl"
        if e not in ("sde", "ftrl"):
            raise ConfigError(f"unknown engine {e!r}; valid engines: sde, ftrl", "engine")
        return e

    @property
    def seed(self) -> int:
        s = self.number("seed", int)
        if not 0 <= s < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
        return s

    def game(self):
        from .games import GAME_IDS, make_game

        gid = self.require("game.id")
        if gid not in GAME_IDS:
            raise ConfigError(f"unknown game {gid!r}; valid games: {', '.join(GAME_IDS)}", "game.id")
        params = {}
        if gid == "cournot":
            params = {"N": self.number("game.N", int), "a": self.number("game.a"), "b": self.number("game.b")}
            if self.get("game.c") is not None:
                params["c"] = self.number_list("game.c")
            if self.get("game.B") is not None:
                params["B"] = self.number_list("game.B")
        try:
            return make_game(gid, **params)
        except DomainError as exc:
            raise ConfigError(str(exc), "game.id") from exc

    def regularizer(self, game):
        from .regularizers import make_regularizer

        rid = self.require("regularizer.id")
        if rid not in REGULARIZER_IDS:
            raise ConfigError(
                f"unknown regularizer {rid!r}; valid regularizers: {', '.join(REGULARIZER_IDS)}", "regularizer.id"
            )
        need = {"euclidean": "full", "euclidean_box": "box", "entropic": "simplex", "binary_entropy": "box"}[rid]
        for g in game.geometries:
            if g.kind != need:
                raise ConfigError(f"{rid} needs {need} action sets, {game.name} has {g.kind}", "regularizer.id")
            if rid == "binary_entropy" and (float(g.lo), float(g.hi)) != (0.0, 1.0):
                raise ConfigError("binary_entropy needs [0, 1] action sets", "regularizer.id")
        lo = [float(g.lo) for g in game.geometries]
        hi = [float(g.hi) for g in game.geometries]
        return make_regularizer(rid, game.player_dims, lo, hi)

    def noise(self, sigma=None):
        from .noise import NoiseSpec

        model = self.get("noise.model")
        if model in ("isotropic-gaussian",):
            model = "isotropic"
        if model in ("constant-matrix",):
            model = "matrix"
        try:
            if model == "matrix":
                m = self.require("noise.matrix")
                return NoiseSpec("matrix", 0.0, m)
            s = self.number("noise.sigma") if sigma is None else float(sigma)
            return NoiseSpec(model, s)
        except DomainError as exc:
            raise ConfigError(str(exc), "noise.model" if "model" in str(exc) else "noise.sigma") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed diffusion matrix: {exc}", "noise.matrix") from exc

    def sde_config(self):
        from .sde import SdeConfig

        y0 = self.get("sde.y0")
        try:
            return SdeConfig(
                dt=self.number("sde.dt"),
                horizon=self.number("sde.horizon"),
                record_stride=self.number("sde.record_stride", int),
                n_paths=self.number("sde.n_paths", int),
                y0=None if y0 is None else tuple(float(v) for v in y0),
                y0_space=self.get("sde.y0_space"),
            )
        except DomainError as exc:
            raise ConfigError(str(exc), "sde") from exc
        except TypeError as exc:
            raise ConfigError(f"expected a list of numbers: {exc}", "sde.y0") from exc

    def ftrl_config(self, step=None, n_steps=None):
        from .ftrl import FtrlConfig

        init = self.get("ftrl.init")
        if isinstance(init, list):
            init = tuple(float(v) for v in init)
        try:
            return FtrlConfig(
                step=self.number("ftrl.step") if step is None else float(step),
                n_steps=self.number("ftrl.n_steps", int) if n_steps is None else int(n_steps),
                n_runs=self.number("ftrl.n_runs", int),
                record_stride=self.number("ftrl.record_stride", int),
                init=init,
            )
        except DomainError as exc:
            raise ConfigError(str(exc), "ftrl") from exc

    def gammas(self):
        return self.number_list("sweep.gamma", [self.number("ftrl.step")])

    def sigmas(self):
        return self.number_list("sweep.sigma", [self.number("noise.sigma")])

    def total_steps(self) -> int:
        kind = self.kind
        if kind in GRID_KINDS:
            f = self.ftrl_config()
            return len(self.gammas()) * len(self.sigmas()) * f.n_runs * f.n_steps
        if self.engine == "sde":
            s = self.sde_config()
            return s.n_paths * s.n_steps
        f = self.ftrl_config()
        return f.n_runs * f.n_steps


def noise_radius_for(cfg: ExperimentConfig, game, reg, noise) -> float:
    from . import bounds

    d = game.dim
    if cfg.engine == "sde":
        return bounds.noise_radius_cont(math.sqrt(noise.sigma_max_sq(d)), reg.K, game.beta)
    return bounds.noise_radius_disc(cfg.number("ftrl.step"), noise.sigma_eff_sq(d), game.lipschitz, game.beta, reg.K)


def validate_config(config) -> list:
    """Key-level diagnostics; an empty list means the config can be run."""
    if isinstance(config, str):
        config = ExperimentConfig.parse(config)
    diags = list(config.errors)
    if diags:
        return diags

    def attempt(fn):
        try:
            return fn()
        except ConfigError as exc:
            diags.append(str(exc))
            return None

    kind = attempt(lambda: config.kind)
    attempt(lambda: config.seed)
    game = attempt(config.game)
    reg = attempt(lambda: config.regularizer(game)) if game is not None else None
    noise = attempt(config.noise)
    if kind is None:
        return diags
    engine = attempt(lambda: config.engine)
    if engine == "sde":
        s = attempt(config.sde_config)
        if s is not None and reg is not None and s.y0 is not None and len(s.y0) != reg.dim:
            diags.append(f"sde.y0: expected {reg.dim} coordinates, got {len(s.y0)}")
        if s is not None and s.y0_space == "primal" and reg is not None and reg.kind != "euclidean":
            diags.append("sde.y0_space: primal initial points need the euclidean regularizer")
    elif engine == "ftrl":
        f = attempt(config.ftrl_config)
        if f is not None and reg is not None and not isinstance(f.init, str) and len(f.init) != reg.dim:
            diags.append(f"ftrl.init: expected {reg.dim} coordinates, got {len(f.init)}")
        if f is not None and reg is not None and f.init == "uniform-random-primal" and reg.kind == "euclidean":
            diags.append("ftrl.init: cannot draw uniformly from an unbounded action set")
    if noise is not None and reg is not None:
        try:
            noise.width(reg.dim)
        except DomainError as exc:
            diags.append(f"noise.matrix: {exc}")
    if kind in GRID_KINDS:
        attempt(config.gammas)
        attempt(config.sigmas)
    if kind == "hitting-time-grid":
        attempt(lambda: config.number_list("sweep.r"))
    if kind == "corner-concentration" and game is not None and not all(g.kind == "simplex" for g in game.geometries):
        diags.append("game.id: corner concentration needs simplex action sets")
    if kind == "occupancy-grid" and game is not None and any(g.kind == "full" for g in game.geometries):
        diags.append("game.id: occupancy grids need bounded action sets")

    if kind == "bounds-check" and game is not None and reg is not None and noise is not None and not diags:
        if game.monotonicity.kind == "strong":
            radii = attempt(lambda: config.number_list("sweep.r"))
            try:
                rs = noise_radius_for(config, game, reg, noise)
            except DomainError as exc:
                diags.append(f"noise: {exc}")
                rs = None
            for r in radii or []:
                if rs is not None and not r > rs:
                    diags.append(
                        f"sweep.r: r = {r:g} <= r_sigma = {rs:.6g}; the bound is vacuous below the noise radius"
                    )
        elif game.monotonicity.kind == "null" and engine == "sde":
            eps = config.get("bounds.eps")
            if eps is not None and not (isinstance(eps, (int, float)) and eps > 0):
                diags.append("bounds.eps: energy threshold must be positive")
            if noise.sigma_min_sq(game.dim) <= 0:
                diags.append("noise: the escape bound needs sigma_min > 0")
        elif game.monotonicity.kind == "merely":
            diags.append("game.id: bounds are only available for null or strongly monotone games")

    if not diags:
        try:
            need = config.total_steps()
            budget = config.number("budget.max_steps", int)
            if need > budget:
                diags.append(f"budget.max_steps: experiment needs {need} steps, budget is {budget}")
        except ConfigError as exc:
            diags.append(str(exc))
    return diags
