"""Run configuration: a flat sectioned ``key = value`` format.

Example::

    [run]
    model = svucm
    case = stoker
    nx = 33
    ny = 33
    t_end = 0.2

    [physics]
    g = 10
    G = 10
    lambda = 1

    [output]
    dir = out
    formats = csv, gnuplot
    sections = diagonal

Lines starting with ``#`` or ``;`` are comments. Keys are case-sensitive
(``g`` and ``G`` differ); section names are not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import OutOfRange, ParseError, UnknownKey
from .rheology import ModelKind
from .state import PhysParams

CASES = ("stoker", "column", "cavity")
FORMATS = ("csv", "vtk", "gnuplot")


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce a run.

    Attributes:
        model: Model kind.
        case: Preset name.
        nx, ny: Cell counts.
        Lx, Ly: Domain size.
        params: Physical parameters.
        cfl: CFL number.
        t_end: Final time.
        regularized_lid: Smooth lid profile for the cavity.
        out_dir: Output directory.
        every: Field output cadence in steps (``None`` writes only the final state).
        sections: Cross-sections (``diagonal``, ``x=c`` or ``y=c``).
        formats: Output formats.
    """

    model: ModelKind = ModelKind.SVTM
    case: str = "stoker"
    nx: int = 33
    ny: int = 33
    Lx: float = 1.0
    Ly: float = 1.0
    params: PhysParams = field(default_factory=PhysParams)
    cfl: float = 0.9
    t_end: float = 0.2
    regularized_lid: bool = False
    out_dir: str = "out"
    every: int | None = None
    sections: tuple[str, ...] = ()
    formats: tuple[str, ...] = ("csv",)


def _float(text: str) -> float:
    x = float(text)
    if not math.isfinite(x):
        raise ValueError("not finite")
    return x


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _optional_int(text: str) -> int | None:
    t = text.strip().lower()
    return None if t in ("", "none", "final") else int(t)


# section -> key -> (RunSpec field or physics field, converter)
_SCHEMA = {
    "run": {
        "model": ("model", ModelKind.parse), "case": ("case", str.lower), "nx": ("nx", _int),
        "ny": ("ny", _int), "Lx": ("Lx", _float), "Ly": ("Ly", _float), "cfl": ("cfl", _float),
        "t_end": ("t_end", _float), "regularized_lid": ("regularized_lid", _bool),
    },
    "physics": {
        "g": ("g", _float), "G": ("G", _float), "lambda": ("lam", _float), "k": ("k", _float),
        "nu_s": ("nu_s", _float),
    },
    "output": {
        "dir": ("out_dir", str), "every": ("every", _optional_int), "sections": ("sections", _list),
        "formats": ("formats", _list),
    },
}


def _key_index():
    index: dict[str, str] = {}
    for sec, keys in _SCHEMA.items():
        for k in keys:
            index[k] = sec
    return index


_KEY_SECTION = _key_index()


def _check_section(sec: str, line: int, col: int) -> str:
    name = sec.strip().lower()
    if name not in _SCHEMA:
        raise UnknownKey(f"line {line}, column {col}: unknown section [{sec.strip()}]")
    return name


def _check_section_name(name: str) -> str:
    if name not in ("diagonal",) and not (name[:2] in ("x=", "y=")):
        raise ValueError(f"bad cross-section {name!r}")
    if name != "diagonal":
        _float(name[2:])
    return name


def _validate(spec: RunSpec) -> RunSpec:
    checks = [
        ("nx >= 1", spec.nx >= 1), ("ny >= 1", spec.ny >= 1), ("Lx > 0", spec.Lx > 0),
        ("Ly > 0", spec.Ly > 0), ("0 < cfl <= 1", 0 < spec.cfl <= 1), ("t_end > 0", spec.t_end > 0),
        ("every >= 1", spec.every is None or spec.every >= 1), ("formats non-empty", bool(spec.formats)),
    ]
    bad = [name for name, ok in checks if not ok]
    if bad:
        raise OutOfRange(f"out of range: {', '.join(bad)}")
    if spec.case not in CASES:
        raise OutOfRange(f"unknown case {spec.case!r}; expected one of {', '.join(CASES)}")
    extra = [f for f in spec.formats if f not in FORMATS]
    if extra:
        raise OutOfRange(f"unknown formats {extra}; expected a subset of {', '.join(FORMATS)}")
    for s in spec.sections:
        try:
            _check_section_name(s)
        except ValueError as exc:
            raise OutOfRange(str(exc)) from None
    return spec


def _build(values: dict, phys: dict, base: RunSpec) -> RunSpec:
    try:
        params = replace(base.params, **phys)
    except ValueError as exc:
        raise OutOfRange(str(exc)) from None
    return _validate(replace(base, params=params, **values))


def parse_config(text: str, base: RunSpec | None = None) -> RunSpec:
    """Parse configuration text into a :class:`RunSpec`.

    Args:
        text: Configuration text.
        base: Spec supplying values for omitted keys (documented defaults if ``None``).

    Raises:
        ParseError: Malformed line or value, with 1-based line and column.
        UnknownKey: Unrecognised section or key.
        OutOfRange: A value outside its allowed range.
    """
    base = base or RunSpec()
    section = None
    seen: set[tuple[str, str]] = set()
    values: dict = {}
    phys: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        indent = len(raw) - len(raw.lstrip())
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("unterminated section header", lineno, indent + len(stripped) + 1)
            section = _check_section(stripped[1:-1], lineno, indent + 2)
            continue
        if "=" not in stripped:
            raise ParseError("expected 'key = value'", lineno, indent + 1)
        if section is None:
            raise ParseError("key outside of any section", lineno, indent + 1)
        key_raw, value_raw = raw.split("=", 1)
        key = key_raw.strip()
        if not key:
            raise ParseError("empty key", lineno, indent + 1)
        if key not in _SCHEMA[section]:
            raise UnknownKey(f"line {lineno}, column {indent + 1}: unknown key {key!r} in [{section}]")
        if (section, key) in seen:
            raise ParseError(f"duplicate key {key!r}", lineno, indent + 1)
        seen.add((section, key))
        value_col = len(key_raw) + 1 + (len(value_raw) - len(value_raw.lstrip())) + 1
        target, conv = _SCHEMA[section][key]
        try:
            val = conv(value_raw.strip())
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {exc}", lineno, value_col) from None
        if section == "physics":
            phys[target] = val
        else:
            values[target] = val
    return _build(values, phys, base)


def apply_overrides(spec: RunSpec, overrides: list[str]) -> RunSpec:
    """Apply ``key=value`` overrides; keys are looked up across all sections."""
    lines: dict[str, list[str]] = {}
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not key=value", 1, 1)
        key, value = (s.strip() for s in item.split("=", 1))
        sec = _KEY_SECTION.get(key)
        if sec is None:
            raise UnknownKey(f"unknown override key {key!r}")
        lines.setdefault(sec, []).append(f"{key} = {value}")
    text = "\n".join(f"[{sec}]\n" + "\n".join(body) for sec, body in lines.items())
    return parse_config(text, base=spec)


def _fmt(value) -> str:
    if isinstance(value, ModelKind):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(value)
    if value is None:
        return "final"
    return str(value)


def render_config(spec: RunSpec) -> str:
    """Canonical text of ``spec``; ``parse_config(render_config(s)) == s``."""
    out = []
    for sec, keys in _SCHEMA.items():
        out.append(f"[{sec}]")
        for key, (target, _) in keys.items():
            src = spec.params if sec == "physics" else spec
            out.append(f"{key} = {_fmt(getattr(src, target))}")
        out.append("")
    return "\n".join(out)


__all__ = ["CASES", "FORMATS", "RunSpec", "apply_overrides", "parse_config", "render_config"]
