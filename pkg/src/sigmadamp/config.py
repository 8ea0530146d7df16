"""
Run configuration files.

Grammar, one entry per line::

    # comment to end of line
    key = value

Keys are dotted names (``grid.points``).  A value is parsed as JSON when it
is valid JSON (numbers, true/false/null, "strings", [arrays]); anything else
is taken as a bare string with surrounding whitespace removed.  Repeated
keys and unknown keys are errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "ConfigError",
    "parse_kv",
    "load_kv",
    "DataSpec",
    "TimeSpec",
    "RunConfig",
    "MODELS",
    "CHECKS",
]

MODELS = ("linear", "semilinear_u", "semilinear_q", "semilinear_ut_plus_u")
CHECKS = ("rates", "identities")


class ConfigError(ValueError):
    pass


def _strip_comment(line: str) -> str:
    # a '#' inside a JSON string is kept
    out = []
    quoted = False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def parse_kv(text: str, source: str = "<string>") -> dict[str, object]:
    out: dict[str, object] = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not all(part.isidentifier() for part in key.split(".")):
            raise ConfigError(f"{source}:{no}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def load_kv(path: str | Path) -> dict[str, object]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return parse_kv(text, str(p))


def _num(d, key, default=None, kind=float):
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{key} must be an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return float(v)


def _bool(d, key, default):
    v = d.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{key} must be true or false, got {v!r}")
    return v


def _window(d, key, default):
    v = d.get(key, default)
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
        raise ConfigError(f"{key} must be [lo, hi], got {v!r}")
    if not v[1] > v[0]:
        raise ConfigError(f"{key} must have hi > lo")
    return (float(v[0]), float(v[1]))


@dataclass(frozen=True)
class DataSpec:
    shape: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple[float, ...] = ()
    u0_zero: bool = True
    u0_amplitude: float = 0.0
    bumps: int = 3


@dataclass(frozen=True)
class TimeSpec:
    dt: float
    t_end: float
    sample_every: int = 1
    blowup_threshold: float = 1e8
    dealias: bool | None = None


@dataclass(frozen=True)
class RunConfig:
    dim: int
    points: int
    half_length: float
    sigma: float
    model: str
    p: float | None
    data: DataSpec
    time: TimeSpec
    checks: tuple[str, ...] = CHECKS
    poly_window: tuple[float, float] | None = None
    exp_window: tuple[float, float] | None = None
    seed: int = 0
    output_dir: Path = Path("out")
    source: str = "<string>"
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    _KEYS = {
        "grid.dim", "grid.points", "grid.half_length", "grid.sigma",
        "model", "p", "seed", "output_dir", "checks", "u0_zero",
        "data.shape", "data.amplitude", "data.width", "data.center",
        "data.u0_zero", "data.u0_amplitude", "data.bumps",
        "time.dt", "time.t_end", "time.sample_every", "time.blowup_threshold",
        "time.dealias", "rates.window", "rates.exp_window",
    }

    @classmethod
    def from_mapping(cls, d: dict, source: str = "<string>", base_dir: Path | None = None) -> RunConfig:
        unknown = sorted(set(d) - cls._KEYS)
        if unknown:
            raise ConfigError(f"{source}: unknown keys {unknown}")
        model = d.get("model", "linear")
        if model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
        if model != "linear" and "p" not in d:
            raise ConfigError(f"model {model} needs p")
        p = None if model == "linear" and "p" not in d else _num(d, "p")
        dim = _num(d, "grid.dim", kind=int)
        center = d.get("data.center", [0.0] * dim)
        if not (isinstance(center, list) and len(center) == dim):
            raise ConfigError(f"data.center must be a list of {dim} numbers")
        if "u0_zero" in d and "data.u0_zero" in d:
            raise ConfigError("give u0_zero only once")
        u0_zero = _bool(d, "data.u0_zero" if "data.u0_zero" in d else "u0_zero", True)
        amplitude = _num(d, "data.amplitude", 1.0)
        if not amplitude > 0:
            raise ConfigError(f"data.amplitude must be > 0, got {amplitude}")
        shape = d.get("data.shape", "gaussian")
        if shape not in ("gaussian", "bumps"):
            raise ConfigError(f"data.shape must be gaussian or bumps, got {shape!r}")
        data = DataSpec(
            shape=shape,
            amplitude=amplitude,
            width=_num(d, "data.width", 1.0),
            center=tuple(float(c) for c in center),
            u0_zero=u0_zero,
            u0_amplitude=_num(d, "data.u0_amplitude", amplitude),
            bumps=_num(d, "data.bumps", 3, int),
        )
        if not data.width > 0:
            raise ConfigError("data.width must be > 0")
        dealias = d.get("time.dealias", "auto")
        if dealias == "auto":
            dealias = None
        elif not isinstance(dealias, bool):
            raise ConfigError(f"time.dealias must be true, false or auto, got {dealias!r}")
        time = TimeSpec(
            dt=_num(d, "time.dt"),
            t_end=_num(d, "time.t_end"),
            sample_every=_num(d, "time.sample_every", 1, int),
            blowup_threshold=_num(d, "time.blowup_threshold", 1e8),
            dealias=dealias,
        )
        checks = d.get("checks", list(CHECKS))
        if not (isinstance(checks, list) and all(c in CHECKS for c in checks)):
            raise ConfigError(f"checks must be a list drawn from {CHECKS}, got {checks!r}")
        out = d.get("output_dir", "out")
        if not isinstance(out, str):
            raise ConfigError("output_dir must be a path")
        out = Path(out)
        if base_dir is not None and not out.is_absolute():
            out = base_dir / out
        return cls(
            dim=dim,
            points=_num(d, "grid.points", kind=int),
            half_length=_num(d, "grid.half_length"),
            sigma=_num(d, "grid.sigma", 1.0),
            model=model,
            p=p,
            data=data,
            time=time,
            checks=tuple(checks),
            poly_window=_window(d, "rates.window", None) if "rates.window" in d else None,
            exp_window=_window(d, "rates.exp_window", None) if "rates.exp_window" in d else None,
            seed=_num(d, "seed", 0, int),
            output_dir=out,
            source=source,
            raw=dict(d),
        )

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        p = Path(path)
        return cls.from_mapping(load_kv(p), str(p), p.parent)
