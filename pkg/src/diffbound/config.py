"""Experiment configuration: a flat, diff-able key = value text format.

Lines are `key = value`, blank, or `#` comments.  Keys are dotted, the full
schema lives in _SCHEMA below; unknown keys, bad values, and violated
constraints are reported with file and line.  The same parser handles
command-line overrides (`--set key=value`), which behave like extra lines
appended to the file.

Seed discipline: four named root seeds (data / train / bound / validate).
Every consumer derives its own stream through numpy SeedSequence spawn keys,
so adding consumers never shifts the draws of existing ones.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .bound import K1_MODES, K_SOURCES, MODES, McConfig
from .data import SampleSet, uniform_circle, uniform_square
from .schedule import NoiseSchedule, SIGMA_MODES, constant_schedule, cosine_schedule, linear_schedule
from .trainer import TrainConfig

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config_text", "derived_rng", "DEFAULT_CONFIG_TEXT"]


class ConfigError(ValueError):
    """Invalid configuration, with file:line context when available."""

    def __init__(self, message: str, where: str | None = None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def _parse_int(s: str) -> int:
    return int(s, 10)


def _parse_float(s: str) -> float:
    v = float(s)
    if not np.isfinite(v):
        raise ValueError("must be finite")
    return v


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _parse_floats(s: str) -> tuple:
    s = s.strip()
    if not s:
        return ()
    return tuple(_parse_float(p) for p in s.split(","))


def _parse_ints(s: str) -> tuple:
    s = s.strip()
    if not s:
        return ()
    return tuple(_parse_int(p) for p in s.split(","))


def _choice(*options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {s!r}")
        return s

    return parse


@dataclass(frozen=True)
class _Key:
    attr: str
    parse: object
    default: object
    check: object = None  # predicate on the parsed value
    why: str = ""  # message when check fails


def _pos_int(v) -> bool:
    return isinstance(v, int) and v >= 1


def _pos(v) -> bool:
    return v > 0


_SCHEMA: dict[str, _Key] = {
    "config_version": _Key("config_version", _parse_int, 1, lambda v: v == 1, "only version 1 is understood"),
    "data.generator": _Key("data_generator", _choice("uniform_square", "uniform_circle"), "uniform_square"),
    "data.n_train": _Key("n_train", _parse_int, 50000, _pos_int, "must be >= 1"),
    "data.side": _Key("side", _parse_float, 2.0, _pos, "must be positive"),
    "data.radius": _Key("radius", _parse_float, 1.0, _pos, "must be positive"),
    "schedule.family": _Key("schedule_family", _choice("linear", "constant", "cosine"), "linear"),
    "schedule.T": _Key("T", _parse_int, 50, _pos_int, "must be >= 1"),
    "schedule.beta_start": _Key("beta_start", _parse_float, 1e-4, lambda v: 0.0 < v < 1.0, "must lie in (0,1)"),
    "schedule.beta_end": _Key("beta_end", _parse_float, 0.2, lambda v: 0.0 < v < 1.0, "must lie in (0,1)"),
    "schedule.beta": _Key("beta", _parse_float, 0.1, lambda v: 0.0 < v < 1.0, "must lie in (0,1)"),
    "schedule.cosine_offset": _Key("cosine_offset", _parse_float, 0.008, _pos, "must be positive"),
    "schedule.sigma_mode": _Key("sigma_mode", _choice(*SIGMA_MODES), "posterior"),
    "net.hidden": _Key("hidden", _parse_ints, (128, 128), lambda v: len(v) >= 1 and all(h >= 1 for h in v), "need at least one positive width"),
    "net.time_embed_dim": _Key("time_embed_dim", _parse_int, 16, lambda v: v >= 2 and v % 2 == 0, "must be an even integer >= 2"),
    "net.activation": _Key("activation", _choice("tanh", "softplus"), "tanh"),
    "train.steps": _Key("steps", _parse_int, 20000, _pos_int, "must be >= 1"),
    "train.batch_size": _Key("batch_size", _parse_int, 256, _pos_int, "must be >= 1"),
    "train.learning_rate": _Key("learning_rate", _parse_float, 1e-3, _pos, "must be positive"),
    "train.adam_beta1": _Key("adam_beta1", _parse_float, 0.9, lambda v: 0.0 <= v < 1.0, "must lie in [0,1)"),
    "train.adam_beta2": _Key("adam_beta2", _parse_float, 0.999, lambda v: 0.0 <= v < 1.0, "must lie in [0,1)"),
    "train.adam_eps": _Key("adam_eps", _parse_float, 1e-8, _pos, "must be positive"),
    "bound.n": _Key("bound_n", _parse_int, 5000, _pos_int, "must be >= 1"),
    "bound.lambda_factors": _Key("lambda_factors", _parse_floats, (0.1, 0.2, 0.5, 1.0, 2.0, 10.0), lambda v: all(f > 0 for f in v), "factors must be positive"),
    "bound.lambdas": _Key("lambdas", _parse_floats, (), lambda v: all(f > 0 for f in v), "lambdas must be positive"),
    "bound.delta": _Key("delta", _parse_float, 0.05, lambda v: 0.0 < v < 1.0, "must lie in (0,1)"),
    "bound.k_source": _Key("k_source", _choice(*K_SOURCES), "schedule"),
    "bound.k1_mode": _Key("k1_mode", _choice(*K1_MODES), "probe"),
    "bound.mode": _Key("mode", _choice(*MODES), "monte-carlo"),
    "bound.n_noise": _Key("n_noise", _parse_int, 16, _pos_int, "must be >= 1"),
    "bound.n_chains": _Key("n_chains", _parse_int, 1, _pos_int, "must be >= 1"),
    "bound.n_cross": _Key("n_cross", _parse_int, 1_000_000, _pos_int, "must be >= 1"),
    "bound.n_pair": _Key("n_pair", _parse_int, 1_000_000, _pos_int, "must be >= 1"),
    "bound.probe_pairs": _Key("probe_pairs", _parse_int, 4096, _pos_int, "must be >= 1"),
    "bound.probe_scales": _Key("probe_scales", _parse_floats, (1e-2, 1e-1, 1.0), lambda v: len(v) >= 1 and all(s > 0 for s in v), "need at least one positive scale"),
    "bound.chunk_size": _Key("chunk_size", _parse_int, 65536, _pos_int, "must be >= 1"),
    "validate.n_exact": _Key("validate_n_exact", _parse_int, 512, lambda v: 1 <= v <= 512, "must lie in [1, 512]"),
    "validate.n_projections": _Key("validate_projections", _parse_int, 128, _pos_int, "must be >= 1"),
    "validate.n_trials": _Key("validate_trials", _parse_int, 10000, _pos_int, "must be >= 1"),
    "validate.contraction_noise": _Key("validate_noise", _parse_int, 256, lambda v: v >= 2, "need >= 2 draws for a standard error"),
    "validate.chains": _Key("validate_chains", _parse_int, 8, lambda v: v >= 2, "need >= 2 chains for a standard error"),
    "validate.contraction_steps": _Key("validate_steps", _parse_ints, (), lambda v: all(t >= 1 for t in v), "steps must be >= 1"),
    "sample.n": _Key("sample_n", _parse_int, 2000, _pos_int, "must be >= 1"),
    "seeds.data": _Key("seed_data", _parse_int, 1, lambda v: v >= 0, "must be >= 0"),
    "seeds.train": _Key("seed_train", _parse_int, 2, lambda v: v >= 0, "must be >= 0"),
    "seeds.bound": _Key("seed_bound", _parse_int, 3, lambda v: v >= 0, "must be >= 0"),
    "seeds.validate": _Key("seed_validate", _parse_int, 4, lambda v: v >= 0, "must be >= 0"),
    "workers": _Key("workers", _parse_int, 1, _pos_int, "must be >= 1"),
    "plots": _Key("plots", _parse_bool, True),
}

DEFAULT_CONFIG_TEXT = "\n".join(
    f"{key} = {','.join(str(x) for x in k.default) if isinstance(k.default, tuple) else k.default}"
    for key, k in _SCHEMA.items()
) + "\n"


@dataclass(frozen=True)
class ExperimentConfig:
    config_version: int
    data_generator: str
    n_train: int
    side: float
    radius: float
    schedule_family: str
    T: int
    beta_start: float
    beta_end: float
    beta: float
    cosine_offset: float
    sigma_mode: str
    hidden: tuple
    time_embed_dim: int
    activation: str
    steps: int
    batch_size: int
    learning_rate: float
    adam_beta1: float
    adam_beta2: float
    adam_eps: float
    bound_n: int
    lambda_factors: tuple
    lambdas: tuple
    delta: float
    k_source: str
    k1_mode: str
    mode: str
    n_noise: int
    n_chains: int
    n_cross: int
    n_pair: int
    probe_pairs: int
    probe_scales: tuple
    chunk_size: int
    validate_n_exact: int
    validate_projections: int
    validate_trials: int
    validate_noise: int
    validate_chains: int
    validate_steps: tuple
    sample_n: int
    seed_data: int
    seed_train: int
    seed_bound: int
    seed_validate: int
    workers: int
    plots: bool

    # -- factory bridges into the library ---------------------------------
    def build_schedule(self) -> NoiseSchedule:
        if self.schedule_family == "linear":
            return linear_schedule(self.T, self.beta_start, self.beta_end, self.sigma_mode)
        if self.schedule_family == "constant":
            return constant_schedule(self.T, self.beta, self.sigma_mode)
        return cosine_schedule(self.T, self.cosine_offset, self.sigma_mode)

    def draw_data(self, n: int, rng: np.random.Generator) -> SampleSet:
        if self.data_generator == "uniform_square":
            return uniform_square(n, self.side, rng)
        return uniform_circle(n, self.radius, rng)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_train=self.n_train,
            steps=self.steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            seed=self.seed_train,
        )

    def mc_config(self) -> McConfig:
        return McConfig(
            n_noise=self.n_noise,
            n_chains=self.n_chains,
            n_cross=self.n_cross,
            n_pair=self.n_pair,
            probe_pairs=self.probe_pairs,
            probe_scales=self.probe_scales,
            chunk_size=self.chunk_size,
            workers=self.workers,
        )

    def lambda_list(self) -> list:
        if self.lambdas:
            return [float(v) for v in self.lambdas]
        return [f * self.bound_n for f in self.lambda_factors]

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse `key = value` lines into {key: (raw_value, "source:line")}."""
    seen: dict[str, tuple] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError("expected 'key = value'", where)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", where)
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", where)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set at {seen[key][1]})", where)
        seen[key] = (value, where)
    return seen


def _build(values: dict) -> ExperimentConfig:
    kwargs = {}
    wheres = {}
    for key, spec in _SCHEMA.items():
        if key in values:
            raw, where = values[key]
            try:
                v = spec.parse(raw)
            except ValueError as e:
                raise ConfigError(f"{key}: {e}", where) from e
            if spec.check is not None and not spec.check(v):
                raise ConfigError(f"{key}: {spec.why}", where)
            kwargs[spec.attr] = v
            wheres[key] = where
        else:
            kwargs[spec.attr] = spec.default
    cfg = ExperimentConfig(**kwargs)

    def where_of(key: str) -> str | None:
        return wheres.get(key)

    if cfg.schedule_family == "linear" and cfg.beta_start > cfg.beta_end:
        raise ConfigError(
            "schedule.beta_start must not exceed schedule.beta_end",
            where_of("schedule.beta_start") or where_of("schedule.beta_end"),
        )
    if not cfg.lambdas and not cfg.lambda_factors:
        raise ConfigError(
            "need bound.lambdas or bound.lambda_factors to be nonempty",
            where_of("bound.lambdas") or where_of("bound.lambda_factors"),
        )
    if any(t > cfg.T for t in cfg.validate_steps):
        raise ConfigError(
            "validate.contraction_steps entries must be <= schedule.T",
            where_of("validate.contraction_steps"),
        )
    return cfg


def load_config(path=None, sets: tuple = (), text: str | None = None) -> ExperimentConfig:
    """Load a config file (or raw text), then apply --set style overrides."""
    if text is not None:
        values = parse_config_text(text, str(path) if path else "<text>")
    elif path is not None:
        p = Path(path)
        try:
            content = p.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}", str(p)) from e
        values = parse_config_text(content, str(p))
    else:
        values = {}
    for i, item in enumerate(sets, start=1):
        where = f"--set #{i}"
        if "=" not in item:
            raise ConfigError("expected key=value", where)
        key, _, value = item.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", where)
        values[key] = (value, where)
    return _build(values)


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical resolved `key = value` text, in schema order."""
    lines = [f"{key} = {_format_value(getattr(cfg, spec.attr))}" for key, spec in _SCHEMA.items()]
    return "\n".join(lines) + "\n"


def derived_rng(root_seed: int, *spawn_key: int) -> np.random.Generator:
    """Deterministic stream: SeedSequence(root) advanced down a spawn key."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.default_rng(ss)
