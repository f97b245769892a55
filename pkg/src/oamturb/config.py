"""Run configuration documents.

A run configuration is a YAML mapping. Physical quantities carry their
unit in the key (``waist_m``, ``cn2_m-2/3``); unknown keys are rejected
and every error message names the offending line.

Example::

    scenarios: [single, two]
    q_values: [1, 3, 5, 7]
    strengths: {start: 0, stop: 4, step: 0.2}
    ensemble_size: 200
    waist_m: 0.1
    wavelength_m: 1.55e-6
    master_seed: 2013
    screens:
      count: 500
      strength: 2.0
    crosstalk:
      q_max: 7
      strengths: [0, 2, 4]
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .experiments import Scenario, SweepConfig, default_strengths
from .grid import GridSpec
from .turbulence import DEFAULT_SUBHARMONIC_LEVELS


class ConfigError(ValueError):
    """Schema violation in a run configuration; ``line`` is 1-based or None."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = f"{source}:" if source else ""
        where += f"{line}: " if line else (" " if source else "")
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class ScreensSection:
    count: int = 500
    strength: float | None = 2.0
    cn2: float | None = None
    path: float | None = None
    export: bool = True


@dataclass(frozen=True)
class CrosstalkSection:
    q_max: int = 7
    strengths: tuple = (0.0, 2.0, 4.0)
    ensemble_size: int = 200
    scenarios: tuple = ("single", "two")


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple = ("single", "two")
    q_values: tuple = (1, 3, 5, 7)
    strengths: tuple = field(default_factory=default_strengths)
    ensemble_size: int = 200
    waist: float = 0.1
    wavelength: float = 1550e-9
    grid_samples: int = 256
    window_waists: float = 8.0
    propagation: float = 0.0
    master_seed: int = 0
    subharmonic_levels: int = DEFAULT_SUBHARMONIC_LEVELS
    bootstrap_resamples: int = 200
    output_dir: str | None = None
    workers: int = 1
    float_digits: int = 9
    screens: ScreensSection = field(default_factory=ScreensSection)
    crosstalk: CrosstalkSection = field(default_factory=CrosstalkSection)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.grid_samples, self.waist * self.window_waists / self.grid_samples)

    def sweep_config(self, scenario) -> SweepConfig:
        return SweepConfig(
            scenario=Scenario(scenario),
            q_values=self.q_values,
            strengths=self.strengths,
            ensemble_size=self.ensemble_size,
            waist=self.waist,
            wavelength=self.wavelength,
            grid=self.grid,
            propagation_distance=self.propagation,
            master_seed=self.master_seed,
            subharmonic_levels=self.subharmonic_levels,
            bootstrap_resamples=self.bootstrap_resamples,
        )

    def to_document(self) -> dict:
        """Mapping in the on-disk schema, suitable for :func:`parse_config`."""
        doc = {}
        for key, attr in _TOP_KEYS.items():
            value = getattr(self, attr)
            doc[key] = list(value) if isinstance(value, tuple) else value
        doc["screens"] = {
            k: v
            for k, v in {
                "count": self.screens.count,
                "strength": self.screens.strength,
                "cn2_m-2/3": self.screens.cn2,
                "path_m": self.screens.path,
                "export": self.screens.export,
            }.items()
            if v is not None
        }
        doc["crosstalk"] = {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.crosstalk).items()}
        return doc

    def result_hash(self) -> str:
        """Digest of every setting that affects numerical results."""
        doc = self.to_document()
        for key in ("output_dir", "workers", "float_digits"):
            doc.pop(key, None)
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


_TOP_KEYS = {
    "scenarios": "scenarios",
    "q_values": "q_values",
    "strengths": "strengths",
    "ensemble_size": "ensemble_size",
    "waist_m": "waist",
    "wavelength_m": "wavelength",
    "grid_samples": "grid_samples",
    "window_waists": "window_waists",
    "propagation_m": "propagation",
    "master_seed": "master_seed",
    "subharmonic_levels": "subharmonic_levels",
    "bootstrap_resamples": "bootstrap_resamples",
    "output_dir": "output_dir",
    "workers": "workers",
    "float_digits": "float_digits",
}
_SCREEN_KEYS = {"count", "strength", "cn2_m-2/3", "path_m", "export"}
_CROSSTALK_KEYS = {"q_max", "strengths", "ensemble_size", "scenarios"}


class _Doc:
    """YAML mapping with per-key line numbers."""

    def __init__(self, node, source):
        self.source = source
        self.lines = {}
        self.values = {}
        if not isinstance(node, yaml.MappingNode):
            raise ConfigError("configuration must be a mapping", _line(node), source)
        loader = yaml.SafeLoader("")
        for key_node, value_node in node.value:
            key = key_node.value
            self.lines[key] = key_node.start_mark.line + 1
            if isinstance(value_node, yaml.MappingNode):
                self.values[key] = _Doc(value_node, source)
            else:
                self.values[key] = loader.construct_object(value_node, deep=True)

    def error(self, key, message):
        return ConfigError(f"{key}: {message}", self.lines.get(key), self.source)

    def check_keys(self, allowed, prefix=""):
        for key in self.values:
            if key not in allowed:
                raise ConfigError(f"unknown key '{prefix}{key}'", self.lines[key], self.source)


def _line(node):
    return node.start_mark.line + 1 if node is not None else None


def _number(doc, key, kind=float, positive=False, nonnegative=False):
    value = doc.values[key]
    if isinstance(value, bool):
        raise doc.error(key, f"expected a number, got {value!r}")
    try:
        out = kind(float(value)) if kind is int else kind(value)
    except (TypeError, ValueError):
        raise doc.error(key, f"expected a number, got {value!r}") from None
    if kind is int and float(value) != out:
        raise doc.error(key, f"expected an integer, got {value!r}")
    if positive and not out > 0:
        raise doc.error(key, f"must be positive, got {value!r}")
    if nonnegative and not out >= 0:
        raise doc.error(key, f"must be non-negative, got {value!r}")
    return out


def _number_list(doc, key, kind=float):
    value = doc.values[key]
    if isinstance(value, _Doc):
        value.check_keys({"start", "stop", "step"}, f"{key}.")
        try:
            start, stop, step = (float(value.values[k]) for k in ("start", "stop", "step"))
        except KeyError as exc:
            raise doc.error(key, f"range needs start, stop and step (missing {exc})") from None
        except (TypeError, ValueError):
            raise doc.error(key, "range bounds must be numbers") from None
        if step <= 0:
            raise doc.error(key, "range step must be positive")
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    if not isinstance(value, list) or not value:
        raise doc.error(key, "expected a non-empty list")
    try:
        return tuple(kind(float(v)) if kind is int else kind(v) for v in value)
    except (TypeError, ValueError):
        raise doc.error(key, f"expected a list of numbers, got {value!r}") from None


def _scenarios(doc, key):
    value = doc.values[key]
    value = [value] if isinstance(value, str) else value
    try:
        return tuple(Scenario(str(v)).value for v in value)
    except ValueError:
        raise doc.error(key, f"scenarios must be 'single' or 'two', got {value!r}") from None


def parse_config(text: str, source=None) -> RunConfig:
    """Parse and validate a configuration document."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", mark.line + 1 if mark else None, source) from None
    if node is None:
        return RunConfig()
    doc = _Doc(node, source)
    if "manifest_version" in doc.values and isinstance(doc.values.get("config"), _Doc):
        doc = doc.values["config"]
    allowed = set(_TOP_KEYS) | {"screens", "crosstalk"}
    doc.check_keys(allowed)

    kw = {}
    v = doc.values
    if "scenarios" in v:
        kw["scenarios"] = _scenarios(doc, "scenarios")
    if "q_values" in v:
        kw["q_values"] = _number_list(doc, "q_values", int)
        if min(kw["q_values"]) < 1:
            raise doc.error("q_values", "q values must be positive")
    if "strengths" in v:
        s = _number_list(doc, "strengths")
        if s[0] != 0 or any(b <= a for a, b in zip(s, s[1:])):
            raise doc.error("strengths", "must be strictly ascending and start at 0")
        kw["strengths"] = s
    for key, attr, kind, pos in (
        ("ensemble_size", "ensemble_size", int, True),
        ("waist_m", "waist", float, True),
        ("wavelength_m", "wavelength", float, True),
        ("grid_samples", "grid_samples", int, True),
        ("window_waists", "window_waists", float, True),
        ("subharmonic_levels", "subharmonic_levels", int, False),
        ("bootstrap_resamples", "bootstrap_resamples", int, False),
        ("workers", "workers", int, True),
        ("float_digits", "float_digits", int, True),
        ("propagation_m", "propagation", float, False),
        ("master_seed", "master_seed", int, False),
    ):
        if key in v:
            kw[attr] = _number(doc, key, kind, positive=pos, nonnegative=not pos)
    if kw.get("ensemble_size", 200) < 30:
        raise doc.error("ensemble_size", "must be at least 30")
    if "output_dir" in v:
        kw["output_dir"] = None if v["output_dir"] is None else str(v["output_dir"])

    if "screens" in v:
        kw["screens"] = _screens_section(doc)
    if "crosstalk" in v:
        kw["crosstalk"] = _crosstalk_section(doc)

    cfg = RunConfig(**kw)
    try:
        cfg.grid.check_waist(cfg.waist)
    except ValueError as exc:
        raise ConfigError(str(exc), doc.lines.get("grid_samples") or doc.lines.get("waist_m"), source) from None
    return cfg


def _screens_section(parent):
    doc = parent.values["screens"]
    if not isinstance(doc, _Doc):
        raise parent.error("screens", "expected a mapping")
    doc.check_keys(_SCREEN_KEYS, "screens.")
    kw = {}
    if "count" in doc.values:
        kw["count"] = _number(doc, "count", int, positive=True)
    has_cn2 = "cn2_m-2/3" in doc.values or "path_m" in doc.values
    if has_cn2:
        if "strength" in doc.values:
            raise doc.error("strength", "give either strength or cn2_m-2/3 with path_m, not both")
        if not ("cn2_m-2/3" in doc.values and "path_m" in doc.values):
            raise doc.error(
                "cn2_m-2/3" if "cn2_m-2/3" in doc.values else "path_m", "cn2_m-2/3 and path_m go together"
            )
        kw["strength"] = None
        kw["cn2"] = _number(doc, "cn2_m-2/3", nonnegative=True)
        kw["path"] = _number(doc, "path_m", positive=True)
    elif "strength" in doc.values:
        kw["strength"] = _number(doc, "strength", nonnegative=True)
    if "export" in doc.values:
        if not isinstance(doc.values["export"], bool):
            raise doc.error("export", "expected true or false")
        kw["export"] = doc.values["export"]
    return ScreensSection(**kw)


def _crosstalk_section(parent):
    doc = parent.values["crosstalk"]
    if not isinstance(doc, _Doc):
        raise parent.error("crosstalk", "expected a mapping")
    doc.check_keys(_CROSSTALK_KEYS, "crosstalk.")
    kw = {}
    if "q_max" in doc.values:
        kw["q_max"] = _number(doc, "q_max", int, positive=True)
    if "strengths" in doc.values:
        kw["strengths"] = _number_list(doc, "strengths")
        if min(kw["strengths"]) < 0:
            raise doc.error("strengths", "strengths must be non-negative")
    if "ensemble_size" in doc.values:
        kw["ensemble_size"] = _number(doc, "ensemble_size", int, positive=True)
    if "scenarios" in doc.values:
        kw["scenarios"] = _scenarios(doc, "scenarios")
    return CrosstalkSection(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", None, str(path)) from None
    return parse_config(text, source=str(path))
