"""Scenario configuration.

Configs are flat ``section.key = value`` text files. Blank lines and lines
starting with ``#`` are ignored; values are Python literals (numbers, lists,
quoted or bare strings). Every key maps to one :class:`SimConfig` field and
its section is checked, so typos fail loudly with the offending line number.

Units used throughout the package: data in Mbit, rates in Mbit/s, bandwidth
in MHz, energy in J, power in W, time in s, prices in RMB/kWh in the file
(converted to RMB/J when the environment is sampled).
"""

from __future__ import annotations

import ast
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

JOULES_PER_KWH = 3.6e6

CONTROLLERS = ("proposed", "baseline1", "baseline2", "baseline3")
PRICE_MODELS = ("sinusoid", "two_tier", "constant")


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


def _f(section: str, default: Any, unit: str = "", **kw):
    md = {"section": section, "unit": unit}
    if isinstance(default, (list, tuple)):
        return field(default_factory=lambda d=list(default): list(d), metadata=md, **kw)
    return field(default=default, metadata=md, **kw)


@dataclass
class SimConfig:
    # horizon and topology
    N: int = _f("sim", 5)
    K: int = _f("sim", 12)
    T: int = _f("sim", 5)
    M: int = _f("sim", 200)
    T0: float = _f("sim", 1.0, "s")
    seed: int = _f("sim", 1)

    # Lyapunov weights and rate control
    V: float = _f("control", 100.0)
    beta: float = _f("control", 5000.0)
    chi: list = _f("control", [0.1, 0.15, 0.2, 0.25, 0.3])
    R_max: float = _f("control", 20.0, "Mbit/s")
    q: int = _f("control", 3)
    d_star: float = _f("control", 1e-5, "s")
    l_r: int = _f("control", 0)  # 0 -> floor(N/2)
    rho: float = _f("control", 0.0)  # 0 -> curvature-matched
    eps_pri: float = _f("control", 1e-4, "Mbit/s")
    eps_dual: float = _f("control", 1e-4, "Mbit/s")
    admm_max_iter: int = _f("control", 500)
    delta_lambda: float = _f("control", 0.0)  # 0 -> 1% of median |f_D3|
    delta_lambda_frac: float = _f("control", 0.01)

    # energy side
    g_max: float = _f("energy", 2.5, "J")
    E_max: float = _f("energy", 5.0, "J")
    E_init: float = _f("energy", 2.0, "J")
    phi_max: float = _f("energy", 2.5, "J")
    price_model: str = _f("energy", "sinusoid")
    price_min: float = _f("energy", 1.8, "RMB/kWh")
    price_max: float = _f("energy", 9.0, "RMB/kWh")
    price_period: int = _f("energy", 24, "frames")
    kappa: float = _f("energy", 0.0, "RMB/kWh")

    # radio
    bandwidth: float = _f("channel", 1.0, "MHz")
    noise: float = _f("channel", 1e-13, "W")
    pathloss_db: list = _f("channel", [105.0])
    p_max: float = _f("channel", 1.0, "W")

    # data queues
    Q_init: float = _f("queue", 3.0, "Mbit")
    storage_cap: float = _f("queue", 4.0e6, "Mbit")  # 500 GB

    def __post_init__(self):
        if isinstance(self.chi, (int, float)):
            self.chi = [float(self.chi)] * int(self.N)
        if isinstance(self.pathloss_db, (int, float)):
            self.pathloss_db = [float(self.pathloss_db)]

    # derived quantities
    @property
    def horizon(self) -> int:
        return self.M * self.T

    @property
    def block_split(self) -> int:
        return self.l_r if self.l_r > 0 else max(1, self.N // 2)

    def chi_vector(self) -> list[float]:
        return [float(c) for c in self.chi]

    def large_scale_gains(self) -> list[float]:
        """Linear per-device large-scale gain from the configured path loss."""
        pl = list(self.pathloss_db)
        if len(pl) == 1:
            pl = pl * self.N
        return [10.0 ** (-float(x) / 10.0) for x in pl]

    def with_overrides(self, **kw) -> "SimConfig":
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def validate(self) -> "SimConfig":
        """Raise :class:`ConfigError` on inconsistent values; returns self."""
        errors = []
        for name in ("N", "K", "T", "M", "q", "admm_max_iter", "price_period"):
            if int(getattr(self, name)) < 1:
                errors.append((name, f"{name} must be a positive integer"))
        for name in ("T0", "R_max", "g_max", "E_max", "bandwidth", "noise",
                     "p_max", "eps_pri", "eps_dual", "d_star", "storage_cap",
                     "delta_lambda_frac"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                errors.append((name, f"{name} must be positive, got {v!r}"))
        for name in ("V", "beta", "E_init", "phi_max", "price_min", "price_max",
                     "kappa", "Q_init", "delta_lambda", "rho"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                errors.append((name, f"{name} must be nonnegative, got {v!r}"))
        if not errors:
            if self.E_init > self.E_max:
                errors.append(("E_init", "E_init exceeds E_max"))
            if self.price_min > self.price_max:
                errors.append(("price_min", "price_min exceeds price_max"))
            if len(self.chi) != self.N:
                errors.append(("chi", f"chi has {len(self.chi)} entries, expected N={self.N}"))
            elif any(c < 0 for c in self.chi):
                errors.append(("chi", "chi entries must be nonnegative"))
            if len(self.pathloss_db) not in (1, self.N):
                errors.append(("pathloss_db", "pathloss_db needs 1 or N entries"))
            if self.l_r and not 1 <= self.l_r <= max(1, self.N - 1):
                errors.append(("l_r", "l_r must lie in [1, N-1]"))
            if self.price_model not in PRICE_MODELS:
                errors.append(("price_model", f"price_model must be one of {PRICE_MODELS}"))
        if errors:
            name, msg = errors[0]
            raise ConfigError(msg, line=getattr(self, "_lines", {}).get(name),
                              source=getattr(self, "_source", None))
        if self.kappa >= self.price_min and self.price_max > 0:
            warnings.warn(
                "kappa is not below the minimum grid price; the closed-form "
                "energy schedule assumes kappa < eta", RuntimeWarning, stacklevel=2)
        return self

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        lines = []
        section = None
        for f in fields(self):
            sec = f.metadata["section"]
            if sec != section:
                if section is not None:
                    lines.append("")
                lines.append(f"# [{sec}]")
                section = sec
            value = getattr(self, f.name)
            unit = f.metadata.get("unit")
            text = f"\"{value}\"" if isinstance(value, str) else repr(value)
            lines.append(f"{sec}.{f.name} = {text}" + (f"  # {unit}" if unit else ""))
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(SimConfig)}


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        if "," in raw:
            return [_parse_value(p) for p in raw.split(",")]
        return raw


def _coerce(name: str, value, line: int, source: str | None):
    target = _FIELDS[name].type
    try:
        if target == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if target == "float":
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if target == "str":
            return str(value)
        if target == "list":
            if isinstance(value, (int, float)):
                return [float(value)]
            return [float(v) for v in value]
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"bad value for {name}: expected {target}, got {value!r}",
                      line=line, source=source)


def parse_config(text: str, source: str | None = None, base: SimConfig | None = None) -> SimConfig:
    """Parse config text on top of ``base`` (built-in defaults if omitted)."""
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip() if not _quoted_hash(line) else line.strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'section.key = value', got {stripped!r}",
                              line=lineno, source=source)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if "." not in key:
            raise ConfigError(f"key {key!r} lacks a section prefix", line=lineno, source=source)
        section, name = key.rsplit(".", 1)
        if name not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, source=source)
        expected = _FIELDS[name].metadata["section"]
        if section != expected:
            raise ConfigError(f"key {name!r} belongs to section {expected!r}, not {section!r}",
                              line=lineno, source=source)
        if name in values:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[name]})",
                              line=lineno, source=source)
        values[name] = _coerce(name, _parse_value(raw), lineno, source)
        lines[name] = lineno
    cfg = replace(base or SimConfig(), **values)
    cfg._lines = lines
    cfg._source = source
    cfg.validate()
    return cfg


def _quoted_hash(line: str) -> bool:
    i = line.find("#")
    return i >= 0 and (line[:i].count('"') % 2 == 1 or line[:i].count("'") % 2 == 1)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", source=str(path)) from exc
    return parse_config(text, source=str(path))


def default_text() -> str:
    return resources.files("twotimescale").joinpath("presets/default.cfg").read_text()


def default_config(**overrides) -> SimConfig:
    """Default scenario, optionally with field overrides."""
    cfg = parse_config(default_text(), source="default.cfg")
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    return cfg
