"""Experiment configuration documents.

One JSON document describes one experiment. Unknown keys are rejected,
numeric fields are coerced to their declared types, and the canonical form
(sorted keys, shortest round-trip floats, defaults filled in) is hashed with
SHA-256 to give the config hash.
"""
import json
from dataclasses import dataclass, fields, asdict

from . import lab, models
from ._util import _canonical_json, _sha256_bytes, UINT64_MASK
from .errors import ConfigError, ModelError

EXPERIMENT_KINDS = ("synth", "census", "density", "identity", "scaling", "paired", "rpw-trunc", "kl-bound")

# required fields per kind; everything else is optional
_REQUIRED = {
    "synth": ("model", "R"),
    "census": ("model", "R", "levels"),
    "density": ("model", "R", "levels", "n_samples"),
    "identity": ("model", "R", "a", "b", "n_samples"),
    "scaling": ("model", "level", "R_list", "n_per_R"),
    "paired": ("model", "level", "a_rule", "R_list", "n_per_R"),
    "rpw-trunc": ("R", "N_list", "n_samples"),
    "kl-bound": ("level", "a", "R_list"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    model: str = None
    R: float = None
    R_list: tuple = None
    h: float = None
    margin: float = 0.0
    level: float = None
    levels: tuple = None
    a: float = None
    b: float = None
    a_rule: str = None
    n_samples: int = None
    n_per_R: int = None
    N_list: tuple = None
    N_ref: int = None
    s_list: tuple = None
    out_dir: str = None

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError(f"Expected a JSON object, got {type(data).__name__}.")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}.")
        if "kind" not in data:
            raise ConfigError("Missing config key 'kind'.")
        try:
            values = {k: _coerce(k, v) for k, v in data.items()}
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid config value: {e}")
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON config: {e}")
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    def replace(self, **changes):
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(data)

    def to_dict(self):
        """All fields, tuples as lists, ``None`` fields dropped."""
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items() if v is not None}

    def canonical_json(self):
        """Canonical serialisation of the experiment; ``out_dir`` is not part of it."""
        data = self.to_dict()
        data.pop("out_dir", None)
        return _canonical_json(data)

    @property
    def config_hash(self):
        return _sha256_bytes(self.canonical_json().encode("utf-8"))

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"Invalid kind. Expected one of {EXPERIMENT_KINDS}, got {self.kind}.")
        missing = [name for name in _REQUIRED[self.kind] if getattr(self, name) is None]
        if missing:
            raise ConfigError(f"{self.kind}: missing required fields {missing}.")
        if not 0 <= self.seed <= UINT64_MASK:
            raise ConfigError(f"Invalid seed. Expected a 64-bit unsigned integer, got {self.seed}.")
        if self.model is not None:
            try:
                model = models.parse_model(self.model)
            except ModelError as e:
                raise ConfigError(str(e))
            if self.kind == "rpw-trunc" and model.kind != models.ModelKind.RPW:
                raise ConfigError("rpw-trunc only applies to the rpw model.")
        if self.R_list is not None:
            if any(b <= a for a, b in zip(self.R_list, self.R_list[1:])) or min(self.R_list) <= 0:
                raise ConfigError(f"R_list must be positive and strictly increasing, got {list(self.R_list)}.")
            if self.kind == "scaling" and len(self.R_list) < 4:
                raise ConfigError(f"scaling needs at least 4 window sizes, got {len(self.R_list)}.")
        if self.kind == "scaling" and self.n_per_R < 200:
            raise ConfigError(f"scaling needs n_per_R >= 200, got {self.n_per_R}.")
        if self.kind == "identity" and self.a > self.b:
            raise ConfigError(f"Invalid level window: a={self.a} > b={self.b}.")
        if self.kind == "paired":
            try:
                lab.parse_a_rule(self.a_rule, models.parse_model(self.model))
            except ValueError as e:
                raise ConfigError(str(e))
        for name in ("n_samples", "n_per_R"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"Invalid {name}. Expected a positive integer, got {value}.")
        if self.kind == "density" and self.n_samples < 2:
            raise ConfigError(f"density needs n_samples >= 2, got {self.n_samples}.")
        if self.kind == "rpw-trunc" and self.N_ref is not None and self.N_ref <= max(self.N_list):
            raise ConfigError(f"N_ref={self.N_ref} must exceed max(N_list)={max(self.N_list)}.")
        if self.kind == "kl-bound" and self.level == 0:
            raise ConfigError("The nodal level is excluded.")
        if self.kind == "kl-bound" and self.level + self.a == 0:
            raise ConfigError(f"Invalid shift: level + a = 0 for level={self.level}, a={self.a}.")


_INT_FIELDS = {"seed", "n_samples", "n_per_R", "N_ref"}
_FLOAT_FIELDS = {"R", "h", "margin", "level", "a", "b"}
_FLOAT_LISTS = {"R_list", "levels", "s_list"}
_INT_LISTS = {"N_list"}
_STR_FIELDS = {"kind", "model", "a_rule", "out_dir"}


def _as_int(value):
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise TypeError(f"expected an integer, got {value!r}")
    return int(value)


def _as_float(value):
    if isinstance(value, bool):
        raise TypeError(f"expected a number, got {value!r}")
    return float(value)


def _coerce(name, value):
    if value is None:
        return None
    if name in _INT_FIELDS:
        return _as_int(value)
    if name in _FLOAT_FIELDS:
        return _as_float(value)
    if name in _FLOAT_LISTS or name in _INT_LISTS:
        if not isinstance(value, (list, tuple)) or not value:
            raise TypeError(f"{name} must be a nonempty list")
        convert = _as_int if name in _INT_LISTS else _as_float
        return tuple(convert(v) for v in value)
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise TypeError(f"{name} must be a string")
        return value
    return value
