"""
TOML run configuration.

    seed = 0                       # randomized suites
    output = "out"                 # artifact directory, relative to the working directory

    [grid]         rmax = 12.0, zmax = 12.0, nr = 129, nz = 129
    [nonlinearity] kind = "power" | "log", p = 3.0
    [gamma]        kind = "constant" | "csv", value = 1.0, path = "gamma.csv"
    [potential]    kind = "constant" | "csv", value = 1.0, path = "V.csv"
    [solver]       init = "gaussian" | "csv", init_path, max_iters = 20000,
                   step0 = 1e-3, shrink = 0.5, armijo = 1e-4,
                   tol_nehari = 1e-10, tol_J = 1e-14, symmetrize_every = 1
    [reconstruct]  L = 3.0, n = 41, method = "quintic" | "bilinear"
    [verify]       corpus_size = 100

Every key is optional except the [grid] block; unknown keys are errors.
CSV paths are resolved relative to the config file.
Errors carry the line of the offending key.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fields import Nonlinearity, Potential, log_nonlinearity, power_nonlinearity
from .grid import Grid, build_grid, read_field_csv
from .nehari import SolverConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "SCHEMA", "DEFAULTS_HELP"]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


# section -> key -> (type, default); a default of ... means required
SCHEMA: dict[str, dict[str, tuple]] = {
    "": {"seed": (int, 0), "output": (str, "out")},
    "grid": {"rmax": (float, ...), "zmax": (float, ...), "nr": (int, ...), "nz": (int, ...)},
    "nonlinearity": {"kind": (str, "power"), "p": (float, 3.0)},
    "gamma": {"kind": (str, "constant"), "value": (float, 1.0), "path": (str, None)},
    "potential": {"kind": (str, "constant"), "value": (float, 1.0), "path": (str, None)},
    "solver": {
        "init": (str, "gaussian"),
        "init_path": (str, None),
        "max_iters": (int, 20000),
        "step0": (float, 1e-3),
        "shrink": (float, 0.5),
        "armijo": (float, 1e-4),
        "tol_nehari": (float, 1e-10),
        "tol_J": (float, 1e-14),
        "symmetrize_every": (int, 1),
    },
    "reconstruct": {"L": (float, 3.0), "n": (int, 41), "method": (str, "quintic")},
    "verify": {"corpus_size": (int, 100)},
}

CHOICES = {
    ("nonlinearity", "kind"): ("power", "log"),
    ("gamma", "kind"): ("constant", "csv"),
    ("potential", "kind"): ("constant", "csv"),
    ("solver", "init"): ("gaussian", "csv"),
    ("reconstruct", "method"): ("quintic", "bilinear"),
}


def _defaults_help() -> str:
    lines = []
    for sec, keys in SCHEMA.items():
        head = f"[{sec}]" if sec else "(top level)"
        items = ", ".join(f"{k}={'required' if d is ... else d!r}" for k, (_, d) in keys.items())
        lines.append(f"  {head} {items}")
    return "\n".join(lines)


DEFAULTS_HELP = _defaults_help()


def _locate(text: str, section: str, key: str | None) -> int | None:
    """1-based line of ``key`` inside ``[section]`` (or of the header when key is None)."""
    lines = text.splitlines()
    current = ""
    header_line = None
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            current = m.group(1).strip()
            if current == section and key is None:
                return no
            if current == section:
                header_line = no
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", line):
            return no
    return header_line


@dataclass
class RunConfig:
    grid: Grid
    nonlinearity: Nonlinearity
    potential: Potential
    solver: SolverConfig
    seed: int = 0
    output: Path = Path("out")
    reconstruct: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _coerce(val, typ, section, key, text, source):
    line = _locate(text, section, key)
    if typ is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if typ is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if typ is str and isinstance(val, str):
        return val
    name = f"{section}.{key}" if section else key
    raise ConfigError(f"{name} must be of type {typ.__name__}, got {val!r}", line, source)


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> RunConfig:
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", int(m.group(1)) if m else None, source) from None

    vals: dict[str, dict] = {}
    for key, val in data.items():
        if isinstance(val, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError(f"unknown section [{key}]", _locate(text, key, None), source)
        elif key not in SCHEMA[""]:
            raise ConfigError(f"unknown top-level key {key!r}", _locate(text, "", key), source)

    for sec, keys in SCHEMA.items():
        given = data if sec == "" else data.get(sec, {})
        if sec == "grid" and "grid" not in data:
            raise ConfigError("missing required section [grid]", None, source)
        out = {}
        for key, val in given.items():
            if sec == "" and isinstance(val, dict):
                continue
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _locate(text, sec, key), source)
            out[key] = _coerce(val, keys[key][0], sec, key, text, source)
        for key, (_, default) in keys.items():
            if key not in out:
                if default is ...:
                    raise ConfigError(f"missing required key {key!r}", _locate(text, sec, None), source)
                out[key] = default
        vals[sec] = out

    for (sec, key), allowed in CHOICES.items():
        if vals[sec][key] not in allowed:
            raise ConfigError(
                f"{sec}.{key} must be one of {', '.join(allowed)}; got {vals[sec][key]!r}",
                _locate(text, sec, key), source,
            )

    def fail(sec, key, msg):
        raise ConfigError(msg, _locate(text, sec, key), source)

    gv = vals["grid"]
    try:
        grid = build_grid(gv["rmax"], gv["zmax"], gv["nr"], gv["nz"])
    except ValueError as exc:
        bad = "nz" if "nz" in str(exc) else ("nr" if "nr" in str(exc) else "rmax")
        fail("grid", bad, str(exc))

    def csv_on_grid(sec):
        path = vals[sec]["path"]
        if path is None:
            fail(sec, "kind", f"[{sec}] kind = \"csv\" needs a path")
        p = (base_dir / path) if not Path(path).is_absolute() else Path(path)
        try:
            fld = read_field_csv(p)
        except (OSError, ValueError) as exc:
            fail(sec, "path", f"cannot read {p}: {exc}")
        if fld.grid != grid:
            fail(sec, "path", f"{p} is sampled on {fld.grid}, expected {grid}")
        return fld

    gamma = vals["gamma"]["value"] if vals["gamma"]["kind"] == "constant" else csv_on_grid("gamma")
    nl = vals["nonlinearity"]
    try:
        f = power_nonlinearity(nl["p"], gamma) if nl["kind"] == "power" else log_nonlinearity(gamma, nl["p"])
    except ValueError as exc:
        fail("nonlinearity", "p", str(exc))

    if vals["potential"]["kind"] == "constant":
        V = Potential.constant(grid, vals["potential"]["value"])
    else:
        V = Potential.from_field(csv_on_grid("potential"))

    sv = dict(vals["solver"])
    if sv["init"] == "csv":
        if sv["init_path"] is None:
            fail("solver", "init", "init = \"csv\" needs init_path")
        p = Path(sv["init_path"])
        sv["init_path"] = str(p if p.is_absolute() else base_dir / p)
    try:
        solver = SolverConfig(grid=grid, V=V, f=f, **sv)
    except ValueError as exc:
        key = next((k for k in sv if k in str(exc)), None) or "tol_nehari"
        fail("solver", key, str(exc))

    rc = vals["reconstruct"]
    if rc["n"] < 5 or rc["n"] % 2 == 0:
        fail("reconstruct", "n", f"reconstruct.n must be odd and >= 5, got {rc['n']}")
    if not (0 < rc["L"] <= min(grid.rmax, grid.zmax)):
        fail("reconstruct", "L", f"reconstruct.L must lie in (0, min(rmax, zmax)], got {rc['L']}")
    if vals["verify"]["corpus_size"] < 1:
        fail("verify", "corpus_size", "verify.corpus_size must be >= 1")

    return RunConfig(
        grid=grid,
        nonlinearity=f,
        potential=V,
        solver=solver,
        seed=vals[""]["seed"],
        output=Path(vals[""]["output"]),
        reconstruct=rc,
        verify=vals["verify"],
        raw=vals,
    )


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror or exc}", None, str(p)) from None
    return parse_config(text, str(p), p.parent)
