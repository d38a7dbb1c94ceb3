"""Flat ``section.key = value`` run configuration.

Every recognised key has a default and a parser; unknown keys are
rejected. ``sweep.<key> = v1, v2, ...`` lines declare grid axes over any
other key.
"""

from dataclasses import dataclass, field
import itertools

from .estimators import MPCAuthenticator
from .exceptions import ConfigError, MPCError
from .session import ScenarioConfig, ScoreDistribution


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(parser):
    def parse(text):
        if str(text).strip().lower() in ("", "none", "null"):
            return None
        return parser(text)
    return parse


def _int(text):
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    return [_int(p) for p in parts]


def _choice(*options):
    def parse(text):
        t = str(text).strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


_SCENARIO = {
    "n_windows": (500, _int),
    "legit_loc": (0.3, float),
    "legit_scale": (0.1, float),
    "legit_kind": ("normal", _choice("normal", "uniform")),
    "illegit_loc": (0.7, float),
    "illegit_scale": (0.1, float),
    "illegit_kind": ("normal", _choice("normal", "uniform")),
    "overlap_target": (None, _optional(float)),
    "drift": (0.0, float),
    "sensor_noise_sd": (0.0, float),
    "illegit_fraction": (0.0, float),
    "intrusion_onset": (None, _optional(_int)),
    "n_train": (100, _int),
    "window_seconds": (15.0, float),
    "baseline_threshold": (0.5, float),
}

_ENGINE_PARSERS = {
    "n_levels": _int, "level_spacing": float, "mu_l": _optional(float),
    "mu_a": _optional(float), "mode": _choice("gradual", "jump"), "lookback": _int,
    "evidence_rule": _choice("most-recent", "majority"), "delta": float, "theta": float,
    "bandwidth": _optional(float), "expansion": _choice("on", "off", "paper-literal"),
    "second_factor": _bool, "W2": float, "v0": float, "sigma_a": float, "r_obs": float,
    "rescale": float, "w1_floor": float, "rd_floor": float, "r_min": float, "r_max": float,
    "eps_div": float, "tau": float, "retrain_window": _int, "initial_position": float,
    "legit_correct_prob": float, "illegit_correct_prob": float,
}

_RUN = {
    "seeds": ([0], _int_list),
    "jobs": (1, _int),
    "out": ("out", str),
    "k_stable": (5, _int),
    "train_path": (None, _optional(str)),
    "reference": ("baseline", _choice("baseline", "mpc")),
}


_NOT_EMBEDDED = {"run.out", "run.jobs"}


def _build_schema():
    schema = {}
    for key, spec in _SCENARIO.items():
        schema[f"scenario.{key}"] = spec
    defaults = MPCAuthenticator().get_params()
    for key, parser in _ENGINE_PARSERS.items():
        schema[f"engine.{key}"] = (defaults[key], parser)
    missing = set(defaults) - set(_ENGINE_PARSERS) - {"random_state"}
    assert not missing, missing
    for key, spec in _RUN.items():
        schema[f"run.{key}"] = spec
    return schema


SCHEMA = _build_schema()


@dataclass
class RunConfig:
    """Resolved configuration: every key present, values parsed."""

    values: dict = field(default_factory=lambda: {k: d for k, (d, _) in SCHEMA.items()})
    grid: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, raw):
        if key.startswith("sweep."):
            target = key[len("sweep."):]
            if target not in SCHEMA or target.startswith("run."):
                raise ConfigError(f"unknown sweep key: {key}")
            parser = SCHEMA[target][1]
            items = [p.strip() for p in str(raw).split(",") if p.strip()]
            if not items:
                raise ConfigError(f"sweep key {key} has no values")
            try:
                self.grid[target] = [parser(p) for p in items]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
            return
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        parser = SCHEMA[key][1]
        try:
            self.values[key] = parser(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None

    def section(self, name):
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)}

    def with_overrides(self, overrides):
        new = RunConfig(dict(self.values), dict(self.grid))
        new.values.update(overrides)
        return new

    def cells(self):
        """Grid cells in deterministic order (axes sorted by key)."""
        axes = sorted(self.grid)
        for combo in itertools.product(*(self.grid[a] for a in axes)):
            yield dict(zip(axes, combo))

    def scenario(self, seed):
        sc = self.section("scenario")
        try:
            return ScenarioConfig(
                n_windows=sc["n_windows"],
                legit_dist=ScoreDistribution(sc["legit_loc"], sc["legit_scale"], sc["legit_kind"]),
                illegit_dist=ScoreDistribution(sc["illegit_loc"], sc["illegit_scale"],
                                               sc["illegit_kind"]),
                overlap_target=sc["overlap_target"], drift=sc["drift"],
                sensor_noise_sd=sc["sensor_noise_sd"], illegit_fraction=sc["illegit_fraction"],
                intrusion_onset=sc["intrusion_onset"], n_train=sc["n_train"], seed=seed,
                window_seconds=sc["window_seconds"], baseline_threshold=sc["baseline_threshold"])
        except MPCError as exc:
            raise ConfigError(f"invalid scenario: {exc}") from None

    def engine(self, seed):
        try:
            est = MPCAuthenticator(random_state=seed, **self.section("engine"))
            est._validate_params()
        except MPCError as exc:
            raise ConfigError(f"invalid engine: {exc}") from None
        return est

    def dump(self):
        """Text form that :func:`parse_config` reads back unchanged."""
        lines = []
        for key in sorted(self.values):
            lines.append(f"{key} = {format_value(self.values[key])}")
        for key in sorted(self.grid):
            lines.append(f"sweep.{key} = {', '.join(format_value(v) for v in self.grid[key])}")
        return "\n".join(lines) + "\n"

    def flat(self):
        """Result-affecting settings as ``config.<key>`` entries for reports.

        Output location and worker count are left out so reports do not
        depend on where or how wide a run was executed.
        """
        return {f"config.{k}": (format_value(v) if isinstance(v, list) else v)
                for k, v in sorted(self.values.items()) if k not in _NOT_EMBEDDED}


def format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def parse_config(text, config=None):
    config = config if config is not None else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        config.set(key, value)
    return config


def load_config(path, config=None):
    with open(path) as fh:
        return parse_config(fh.read(), config)
