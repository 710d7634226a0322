"""Experiment configuration files.

A config is a TOML document: top-level ``kind``, ``seed`` and ``output``,
plus sectioned tables whose keys depend on the kind.  See the README for the
full grammar.  Every validation failure raises :class:`ConfigError` naming
the offending ``section.key``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, HomlabError
from .ensemble import ClassicalSetup, RfChain
from .fock import (FilterTable, JsaModel, QuantumModelParams, load_filter_csv,
                   sigma_omega_from_nm)
from .signals import PhaseDistribution
from .splitter import MziConfig, SplitterSpec

KINDS = ("classical-dip", "quantum-dip", "complementarity-classical",
         "complementarity-quantum", "mzi-scan", "fit", "min-n", "bootstrap")
SECTIONS = ("delays", "phases", "pulse", "splitter", "mzi", "rf", "sampling",
            "quantum", "fit", "min-n", "bootstrap")
MAX_SEED = 2 ** 64 - 1


class Section:
    """Typed read access to one config table; errors carry the dotted field name."""

    def __init__(self, name: str, data: dict | None):
        self.name = name
        self.data = dict(data or {})

    def _field(self, key: str) -> str:
        return f"{self.name}.{key}" if self.name else key

    def __contains__(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def number(self, key: str, default: float | None = None, *, positive: bool = False,
               nonneg: bool = False, lo: float | None = None, hi: float | None = None,
               required: bool = False) -> float | None:
        if key not in self.data:
            if required:
                raise ConfigError(self._field(key), "is required")
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self._field(key), f"expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(self._field(key), "must be finite")
        if positive and not v > 0:
            raise ConfigError(self._field(key), f"must be > 0, got {v!r}")
        if nonneg and v < 0:
            raise ConfigError(self._field(key), f"must be >= 0, got {v!r}")
        if lo is not None and v < lo or hi is not None and v > hi:
            raise ConfigError(self._field(key), f"must lie in [{lo}, {hi}], got {v!r}")
        return v

    def integer(self, key: str, default: int | None = None, *, minimum: int | None = None) -> int | None:
        if key not in self.data:
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self._field(key), f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise ConfigError(self._field(key), f"must be >= {minimum}, got {v}")
        return v

    def choice(self, key: str, options: Sequence[str], default: str | None = None) -> str | None:
        if key not in self.data:
            return default
        v = self.data[key]
        if v not in options:
            raise ConfigError(self._field(key), f"must be one of {', '.join(options)}; got {v!r}")
        return v

    def flag(self, key: str, default: bool = False) -> bool:
        v = self.data.get(key, default)
        if not isinstance(v, bool):
            raise ConfigError(self._field(key), f"expected true or false, got {v!r}")
        return v

    def numbers(self, key: str, default=None) -> list[float] | None:
        if key not in self.data:
            return default
        v = self.data[key]
        if not isinstance(v, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ConfigError(self._field(key), "expected a list of numbers")
        return [float(x) for x in v]

    def strings(self, key: str, default=None) -> list[str] | None:
        if key not in self.data:
            return default
        v = self.data[key]
        if isinstance(v, str):
            v = [s.strip() for s in v.split(",") if s.strip()]
        if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
            raise ConfigError(self._field(key), "expected a list of strings")
        return list(v)

    def text(self, key: str, default: str | None = None) -> str | None:
        v = self.data.get(key, default)
        if v is not None and not isinstance(v, str):
            raise ConfigError(self._field(key), f"expected a string, got {v!r}")
        return v


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    output: str | None = None
    tables: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}; got {self.kind!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("seed", f"must be an integer in [0, 2^64), got {self.seed!r}")
        for name, table in self.tables.items():
            if name not in SECTIONS:
                raise ConfigError(name, f"unknown section; expected one of {', '.join(SECTIONS)}")
            if not isinstance(table, dict):
                raise ConfigError(name, "must be a table")

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind is None:
            raise ConfigError("kind", "is required")
        seed = data.pop("seed", 0)
        output = data.pop("output", None)
        if output is not None and not isinstance(output, str):
            raise ConfigError("output", "expected a path string")
        tables = {}
        for k, v in data.items():
            if not isinstance(v, dict):
                raise ConfigError(k, "unknown top-level key")
            tables[k] = v
        return cls(kind, seed, output, tables, base_dir or Path.cwd())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"invalid TOML: {exc}") from None
        return cls.from_mapping(data, path.parent)

    def section(self, name: str) -> Section:
        return Section(name, self.tables.get(name))

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def as_record(self) -> dict:
        """JSON-ready echo of the config (seed always present)."""
        return {"kind": self.kind, "seed": self.seed, **{k: self.tables[k] for k in sorted(self.tables)}}


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def delay_grid(cfg: ExperimentConfig, default: Sequence[float] | None = None,
               unit_scale: float = 1.0) -> np.ndarray:
    """Delays in seconds from ``[delays]``: either ``values`` or ``start``/``stop``/``step``.

    ``unit_scale`` multiplies every entry (e.g. 1e-3 when ``unit = "ms"``).
    """
    sec = cfg.section("delays")
    scale = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "fs": 1e-15}[
        sec.choice("unit", ("s", "ms", "us", "ns", "fs"), "s")] * unit_scale
    if "values" in sec:
        grid = np.array(sec.numbers("values"), dtype=float)
    elif "start" in sec or "stop" in sec or "step" in sec:
        start = sec.number("start", required=True)
        stop = sec.number("stop", required=True)
        step = sec.number("step", positive=True, required=True)
        count = (stop - start) / step
        n = round(count)
        if abs(count - n) > 1e-9 * max(1.0, abs(count)) or n < 0:
            raise ConfigError("delays.step", "stop - start must be a non-negative multiple of step")
        grid = start + step * np.arange(n + 1)
    elif default is not None:
        return np.asarray(default, dtype=float)
    else:
        raise ConfigError("delays", "give values or start/stop/step")
    grid = grid * scale
    if grid.size == 0:
        raise ConfigError("delays", "delay grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("delays", "delay grid must be strictly increasing")
    return grid


def phase_distribution(cfg: ExperimentConfig, default: str = "0,pi") -> PhaseDistribution:
    """``[phases]``: ``kind = "uniform"`` or ``values_pi = [...]`` (multiples of pi)."""
    sec = cfg.section("phases")
    jitter = sec.number("jitter", 0.0, nonneg=True)
    kind = sec.choice("kind", ("discrete", "uniform"), "discrete")
    if kind == "uniform":
        if jitter:
            raise ConfigError("phases.jitter", "jitter is meaningless for the uniform law")
        return PhaseDistribution.continuous_uniform()
    values = sec.numbers("values_pi")
    if values is None:
        values = [0.0, 1.0] if default == "0,pi" else [0.0, 0.5, 1.0, 1.5]
    if not values:
        raise ConfigError("phases.values_pi", "must not be empty")
    phases = [math.pi * v for v in values]
    weights = sec.numbers("weights")
    try:
        if weights is None:
            return PhaseDistribution.discrete_uniform(phases, jitter)
        if len(weights) != len(phases):
            raise ConfigError("phases.weights", "must match values_pi in length")
        return PhaseDistribution.weighted(list(zip(phases, weights)), jitter)
    except ConfigError:
        raise
    except HomlabError as exc:
        raise ConfigError("phases", str(exc)) from None


def splitter_spec(sec: Section) -> SplitterSpec:
    return SplitterSpec(sec.number("t_power", 0.5, lo=0.0, hi=1.0),
                        sec.number("phase_error", 0.0))


def rf_chain(cfg: ExperimentConfig, force: bool = False) -> RfChain | None:
    sec = cfg.section("rf")
    if not (force or sec.flag("enabled", False)):
        return None
    return RfChain(sec.number("lo_freq", 16e3, positive=True),
                   sec.number("lo_amp", 1.0, positive=True),
                   sec.number("cutoff", None, positive=True))


def mzi_config(cfg: ExperimentConfig, blocked: str = "none") -> MziConfig:
    sec = cfg.section("mzi")
    return MziConfig(splitter_spec(Section("mzi.ps1", sec.raw("ps1"))),
                     splitter_spec(Section("mzi.ps2", sec.raw("ps2"))),
                     sec.number("arm_phase", 0.0), blocked)


def classical_setup(cfg: ExperimentConfig, rf_override: bool = False) -> ClassicalSetup:
    pulse = cfg.section("pulse")
    rf = rf_chain(cfg, rf_override)
    rep = pulse.choice("representation", ("analytic", "real_voltage"), "analytic")
    if rf is not None:
        rep = "real_voltage"
    try:
        return ClassicalSetup(
            envelope_sigma=pulse.number("envelope_sigma", 1e-3, positive=True),
            carrier_freq=pulse.number("carrier_freq", 1e3, positive=True),
            amplitude=pulse.number("amplitude", 0.05, positive=True),
            amplitude_ratio=pulse.number("amplitude_ratio", 1.0, nonneg=True),
            splitter=splitter_spec(cfg.section("splitter")),
            representation=rep,
            rf=rf,
            dt=pulse.number("dt", None, positive=True),
            intensity_cutoff=pulse.number("intensity_cutoff", None, positive=True),
        )
    except ConfigError:
        raise
    except HomlabError as exc:
        raise ConfigError("pulse", str(exc)) from None


def sample_setting(cfg: ExperimentConfig, override: str | None = None):
    """``"auto"`` or a positive integer sample count (CLI override wins)."""
    raw = override if override is not None else cfg.section("sampling").raw("samples", "auto")
    if raw == "auto":
        return "auto"
    try:
        n = int(raw)
    except (TypeError, ValueError):
        raise ConfigError("sampling.samples", f"expected an integer or 'auto', got {raw!r}") from None
    if isinstance(raw, float) or n < 2:
        raise ConfigError("sampling.samples", f"must be an integer >= 2, got {raw!r}")
    return n


def quantum_params(cfg: ExperimentConfig) -> QuantumModelParams:
    sec = cfg.section("quantum")
    return QuantumModelParams(sec.number("t_power", 0.5, lo=0.0, hi=1.0),
                              sec.number("eta", 1.0, lo=0.0, hi=1.0),
                              sec.number("zeta", 0.0, lo=0.0, hi=1.0),
                              sec.number("scale_k", 1.0, positive=True))


def jsa_model(cfg: ExperimentConfig) -> JsaModel:
    """Gaussian JSA from ``sigma_omega`` (rad/s) or ``sigma_nm`` + ``center_nm``."""
    sec = cfg.section("quantum")
    if "sigma_omega" in sec and "sigma_nm" in sec:
        raise ConfigError("quantum.sigma_omega", "give sigma_omega or sigma_nm, not both")
    if "sigma_omega" in sec:
        sigma = sec.number("sigma_omega", positive=True)
    else:
        sigma = sigma_omega_from_nm(sec.number("sigma_nm", 0.581, positive=True),
                                    sec.number("center_nm", 810.0, positive=True))
    filt: FilterTable | None = None
    path = sec.text("filter_csv")
    if path:
        try:
            filt = load_filter_csv(cfg.resolve_path(path))
        except (OSError, HomlabError) as exc:
            raise ConfigError("quantum.filter_csv", str(exc)) from None
    return JsaModel(sigma, filt, sec.flag("renormalize", True))
