"""Run configuration as flat ``namespace.key=value`` text.

Example::

    constitutive.gamma = 1.7
    domain.force_amplitude = 1e-2
    approx.N_x = 3
    controls.tol = 1e-8
    outputs.directory = runs

Numbers may be written as fractions (``23/15``); they are converted to the
nearest float. Unknown namespaces or keys are rejected, and every component
is re-validated when the configuration is assembled.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .constitutive import ConstitutiveParams, DVariant, ParameterError
from .discretization import DomainSpec, ShearForcing
from .solvers import ApproxParams, Controls


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class DomainConfig:
    """Serializable description of the domain; the force is a shear pulse of
    the given sup-norm amplitude (0 means no force)."""
    period_L: float = 1.0
    box: tuple = (1.0, 1.0, 1.0)
    M0: float = 1.0
    Theta0: float = 1.0
    force_amplitude: float = 0.0

    def build(self) -> DomainSpec:
        force = (ShearForcing(self.force_amplitude, self.period_L, self.box)
                 if self.force_amplitude != 0 else None)
        return DomainSpec(period_L=self.period_L, box=tuple(self.box), M0=self.M0,
                          Theta0=self.Theta0, force=force)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs"
    run_id: str = ""
    formats: tuple = ("jsonl", "csv")
    single_thread: bool = True


@dataclass(frozen=True)
class AuditConfig:
    a_bog: Optional[float] = None
    regularized_energy: bool = True
    theta_ref: float = 1.0
    energy_tol: float = 1e-6
    entropy_tol: float = 1e-9
    mass_tol: float = 1e-9
    pressure_test: bool = True


@dataclass(frozen=True)
class RunConfig:
    constitutive: ConstitutiveParams = field(default_factory=ConstitutiveParams)
    domain: DomainConfig = field(default_factory=DomainConfig)
    approx: ApproxParams = field(default_factory=ApproxParams)
    controls: Controls = field(default_factory=Controls)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)

    def to_flat(self) -> dict[str, str]:
        out = {}
        for ns in NAMESPACES:
            obj = getattr(self, ns)
            for f in fields(obj):
                out[f"{ns}.{f.name}"] = _format(getattr(obj, f.name))
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_flat().items())

    def hash(self) -> str:
        """SHA-256 of the canonical text, excluding output placement."""
        body = "".join(f"{k}={v}\n" for k, v in self.to_flat().items()
                       if not k.startswith("outputs."))
        return hashlib.sha256(body.encode()).hexdigest()

    def with_overrides(self, overrides: dict[str, str]) -> "RunConfig":
        flat = self.to_flat()
        for k, v in overrides.items():
            if k not in flat:
                raise ConfigError(f"unknown configuration key {k!r}")
            flat[k] = str(v)
        return from_flat(flat)


NAMESPACES = ("constitutive", "domain", "approx", "controls", "outputs", "audit")
_CLASSES = {"constitutive": ConstitutiveParams, "domain": DomainConfig, "approx": ApproxParams,
            "controls": Controls, "outputs": OutputConfig, "audit": AuditConfig}


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, DVariant):
        return v.value
    if isinstance(v, (tuple, list)):
        return ",".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"not a number: {text!r}") from None


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_value(cls, name: str, text: str):
    default = getattr(cls(), name)
    t = text.strip()
    if name == "d_variant":
        try:
            return DVariant(t.upper())
        except ValueError:
            raise ConfigError(f"unknown boundary variant {t!r}") from None
    if t.lower() == "none":
        if default is None:
            return None
        raise ConfigError(f"{name} may not be none")
    if isinstance(default, bool):
        return _parse_bool(t)
    if isinstance(default, int):
        v = _parse_number(t)
        if v != int(v):
            raise ConfigError(f"{name} must be an integer")
        return int(v)
    if isinstance(default, tuple):
        parts = [p.strip() for p in t.split(",") if p.strip()]
        if all(isinstance(x, str) for x in default):
            return tuple(parts)
        return tuple(_parse_number(p) for p in parts)
    if isinstance(default, str):
        return t
    return _parse_number(t)


def parse_text(text: str) -> dict[str, str]:
    """Split ``key = value`` lines; ``#`` starts a comment."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in entries:
            raise ConfigError(f"line {lineno}: duplicate key {k!r}")
        entries[k] = v
    return entries


def from_flat(entries: dict[str, str]) -> RunConfig:
    grouped: dict[str, dict] = {ns: {} for ns in NAMESPACES}
    for key, value in entries.items():
        ns, _, name = key.partition(".")
        if ns not in grouped or not name:
            raise ConfigError(f"unknown configuration key {key!r}")
        cls = _CLASSES[ns]
        if name not in {f.name for f in fields(cls)}:
            raise ConfigError(f"unknown configuration key {key!r}")
        grouped[ns][name] = _parse_value(cls, name, value)
    try:
        parts = {ns: _CLASSES[ns](**kw) for ns, kw in grouped.items()}
        cfg = RunConfig(**parts)
        validate(cfg)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg


def validate(cfg: RunConfig) -> None:
    """Re-run every component check; raises ConfigError."""
    try:
        cfg.approx.validate(cfg.constitutive)
        cfg.domain.build()
    except (ParameterError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if len(cfg.domain.box) != 3:
        raise ConfigError("domain.box needs three edge lengths")
    bad = set(cfg.outputs.formats) - {"jsonl", "csv"}
    if bad:
        raise ConfigError(f"unknown report formats {sorted(bad)}")
    for name in ("energy_tol", "entropy_tol", "mass_tol"):
        if not getattr(cfg.audit, name) > 0:
            raise ConfigError(f"audit.{name} must be positive")


def load_config(path) -> RunConfig:
    return from_flat(parse_text(Path(path).read_text()))


def default_config(**sections) -> RunConfig:
    """Defaults with whole sections replaced, e.g. ``default_config(approx=ApproxParams(N_x=2))``."""
    cfg = replace(RunConfig(), **sections)
    validate(cfg)
    return cfg
