"""Run configuration: a sectioned TOML document with strict key checking.

Sections and defaults (every key is optional)::

    seed = 0

    [grid]          n = 1, L = 3.141592653589793, M = 64
    [kernel]        N = 1
    [kernel.a]      kind = "constant", c = 1.0, w = 1.0, q = 2.0
    [kernel.A]      kind = "constant", m2 = 0.0, sigma = 1.0, profile = "one",
                    width = 1.0, index = <component>
                    (a table is broadcast to all N components; an array of
                    tables [[kernel.A]] gives one entry per component)
    [kernel.g]      c = 1.0, r = 0.0
    [nonlinearity]  form = "power", lambda = 0.0, gamma = 1,
                    coupling_matrix = <identity>
    [time]          dt = 0.01, T = 1.0, tol = 1e-12, max_iter = 50,
                    dealias = false
    [diagnostics]   cadence = 1, s = 1.0, alpha = 0.5, blowup = false,
                    b = 1.0, t0 = 1.0, nu_min = 1e-3, nu_max = 10.0,
                    nu_count = 1000, certify_tol = 1e-8, sup_factor = 1e8,
                    sobolev_factor = <off>
    [initial]       project_mean = true
    [initial.u]     profile = "gaussian", amplitude = 1.0, width = 1.0,
                    center = 0.0, mode = 1, shape = "cos", modes = 4, path = ""
    [initial.ut]    profile = "zero", (same keys as initial.u)
    [forcing]       kind = "none", amplitude = 0.0, mode = 1, omega = 0.0,
                    shape = "sin"
    [output]        directory = "out", snapshot_cadence = 0

Unknown sections or keys raise :class:`ParseError` with the offending line;
out-of-range values raise :class:`ValidationError` naming the field.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ParseError, ValidationError
from .nonlinearity import NonlinearitySpec
from .symbols import DispersionKernel, KernelSpec, NonlinearKernel, StiffnessKernel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROFILES = ("zero", "gaussian", "single_mode", "file", "random_modes")


@dataclass(frozen=True)
class GridConfig:
    n: int = 1
    L: float = math.pi
    M: int = 64


@dataclass(frozen=True)
class TimeConfig:
    dt: float = 0.01
    T: float = 1.0
    tol: float = 1e-12
    max_iter: int = 50
    dealias: bool = False


@dataclass(frozen=True)
class DiagnosticsConfig:
    cadence: int = 1
    s: float = 1.0
    alpha: float = 0.5
    blowup: bool = False
    b: float = 1.0
    t0: float = 1.0
    nu_min: float = 1e-3
    nu_max: float = 10.0
    nu_count: int = 1000
    certify_tol: float = 1e-8
    sup_factor: float = 1e8
    sobolev_factor: float | None = None


@dataclass(frozen=True)
class ProfileConfig:
    profile: str = "gaussian"
    amplitude: float | tuple = 1.0
    width: float = 1.0
    center: float | tuple = 0.0
    mode: int | tuple = 1
    shape: str = "cos"
    modes: int = 4
    path: str = ""


@dataclass(frozen=True)
class InitialConfig:
    u: ProfileConfig = field(default_factory=ProfileConfig)
    ut: ProfileConfig = field(default_factory=lambda: ProfileConfig(profile="zero"))
    project_mean: bool = True


@dataclass(frozen=True)
class ForcingConfig:
    kind: str = "none"
    amplitude: float = 0.0
    mode: int | tuple = 1
    omega: float = 0.0
    shape: str = "sin"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    snapshot_cadence: int = 0


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    time: TimeConfig = field(default_factory=TimeConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    @property
    def N(self) -> int:
        return self.kernel.N


def _keys(cls):
    return {f.name for f in fields(cls)}


_SECTIONS = {
    "grid": _keys(GridConfig),
    "kernel": {"N", "a", "A", "g"},
    "kernel.a": _keys(DispersionKernel),
    "kernel.A": _keys(StiffnessKernel),
    "kernel.g": _keys(NonlinearKernel),
    "nonlinearity": {"form", "lambda", "gamma", "coupling_matrix"},
    "time": _keys(TimeConfig),
    "diagnostics": _keys(DiagnosticsConfig),
    "initial": {"u", "ut", "project_mean"},
    "initial.u": _keys(ProfileConfig),
    "initial.ut": _keys(ProfileConfig),
    "forcing": _keys(ForcingConfig),
    "output": _keys(OutputConfig),
}
_TOP = {"seed"} | {s for s in _SECTIONS if "." not in s}


def _find_line(text: str, key: str, section: str | None) -> int | None:
    lines = text.splitlines()
    start = 0
    if section is not None:
        head = re.compile(r"^\s*\[\[?\s*" + re.escape(section) + r"\s*\]\]?\s*(#.*)?$")
        for i, line in enumerate(lines):
            if head.match(line):
                start = i
                break
    pat = re.compile(r"^\s*(\[\[?\s*)?(" + re.escape(key) + r")\b")
    dotted = re.compile(r"(^|[\s.\[])" + re.escape(key) + r"(\s*=|\s*\]|\.)")
    for i in range(start, len(lines)):
        if pat.match(lines[i]) or dotted.search(lines[i]):
            return i + 1
    return None


def _check_keys(text, table, section):
    allowed = _SECTIONS[section]
    for key in table:
        if key not in allowed:
            raise ParseError(
                f"unknown key '{key}' in section [{section}]",
                line=_find_line(text, key, section),
                section=section,
            )


def _as_table(value, name, text):
    if not isinstance(value, dict):
        raise ParseError(f"'{name}' must be a table", line=_find_line(text, name.split(".")[-1], None),
                         section=name)
    return value


def _num(value, name, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ValidationError(name, f"expected an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(name, "must be finite")
    return value


def _build(cls, table, prefix, ints=(), passthrough=()):
    kwargs = {}
    defaults = cls()
    for f in fields(cls):
        if f.name not in table:
            continue
        raw = table[f.name]
        name = f"{prefix}.{f.name}"
        default = getattr(defaults, f.name)
        if f.name in passthrough or isinstance(default, str) or isinstance(default, bool):
            if isinstance(default, bool) and not isinstance(raw, bool):
                raise ValidationError(name, "expected true or false")
            if isinstance(default, str) and not isinstance(raw, str):
                raise ValidationError(name, "expected a string")
            kwargs[f.name] = raw
        elif f.name in ints:
            kwargs[f.name] = _num(raw, name, int)
        else:
            kwargs[f.name] = _num(raw, name)
    return cls(**kwargs)


def _num_or_list(value, name, kind=float):
    if isinstance(value, list):
        if not value:
            raise ValidationError(name, "list must not be empty")
        return tuple(_num(v, name, kind) for v in value)
    return _num(value, name, kind)


def _profile(table, prefix, text, default_profile):
    _check_keys(text, table, prefix)
    kw = {"profile": default_profile}
    for key in ("profile", "shape", "path"):
        if key in table:
            if not isinstance(table[key], str):
                raise ValidationError(f"{prefix}.{key}", "expected a string")
            kw[key] = table[key]
    if "amplitude" in table:
        kw["amplitude"] = _num_or_list(table["amplitude"], f"{prefix}.amplitude")
    if "center" in table:
        kw["center"] = _num_or_list(table["center"], f"{prefix}.center")
    if "mode" in table:
        kw["mode"] = _num_or_list(table["mode"], f"{prefix}.mode", int)
    if "width" in table:
        kw["width"] = _num(table["width"], f"{prefix}.width")
    if "modes" in table:
        kw["modes"] = _num(table["modes"], f"{prefix}.modes", int)
    return ProfileConfig(**kw)


def parse_config(text: str, base_dir: str | Path | None = None) -> RunConfig:
    """Parse and validate a run configuration document."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(f"invalid TOML: {exc}", line=int(m.group(1)) if m else None) from exc

    for key in doc:
        if key not in _TOP:
            raise ParseError(f"unknown section or key '{key}'", line=_find_line(text, key, None),
                             section=key)

    seed = _num(doc.get("seed", 0), "seed", int)
    grid = _build(GridConfig, _section(doc, "grid", text), "grid", ints=("n", "M"))

    kdoc = _section(doc, "kernel", text)
    a = _build(DispersionKernel, _subsection(kdoc, "a", "kernel.a", text), "kernel.a")
    g = _build(NonlinearKernel, _subsection(kdoc, "g", "kernel.g", text), "kernel.g")
    raw_A = kdoc.get("A", {})
    N = _num(kdoc["N"], "kernel.N", int) if "N" in kdoc else None
    if isinstance(raw_A, list):
        entries = []
        for i, tbl in enumerate(raw_A):
            tbl = _as_table(tbl, "kernel.A", text)
            _check_keys(text, tbl, "kernel.A")
            entries.append(_stiffness(tbl, f"kernel.A[{i}]"))
        if N is not None and N != len(entries):
            raise ValidationError("kernel.N", f"{N} does not match {len(entries)} [[kernel.A]] entries")
    else:
        tbl = _as_table(raw_A, "kernel.A", text)
        _check_keys(text, tbl, "kernel.A")
        entries = [_stiffness(tbl, "kernel.A")] * (N if N is not None else 1)
    if not entries:
        raise ValidationError("kernel.N", "must be >= 1")
    kernel = KernelSpec(a=a, A=tuple(entries), g=g)

    ndoc = _section(doc, "nonlinearity", text)
    coupling = ndoc.get("coupling_matrix")
    if coupling is not None:
        if not (isinstance(coupling, list) and all(isinstance(r, list) for r in coupling)):
            raise ValidationError("nonlinearity.coupling_matrix", "expected a list of rows")
        coupling = tuple(tuple(_num(v, "nonlinearity.coupling_matrix") for v in row)
                         for row in coupling)
    form = ndoc.get("form", "power")
    nl = NonlinearitySpec(
        lam=_num(ndoc.get("lambda", 0.0), "nonlinearity.lambda"),
        gamma=_num(ndoc.get("gamma", 1), "nonlinearity.gamma", int),
        coupling=coupling,
        form=form,
    )

    tcfg = _build(TimeConfig, _section(doc, "time", text), "time", ints=("max_iter",))
    dcfg = _build(DiagnosticsConfig, _section(doc, "diagnostics", text), "diagnostics",
                  ints=("cadence", "nu_count"))

    idoc = _section(doc, "initial", text)
    project = idoc.get("project_mean", True)
    if not isinstance(project, bool):
        raise ValidationError("initial.project_mean", "expected true or false")
    initial = InitialConfig(
        u=_profile(_subsection(idoc, "u", "initial.u", text), "initial.u", text, "gaussian"),
        ut=_profile(_subsection(idoc, "ut", "initial.ut", text), "initial.ut", text, "zero"),
        project_mean=project,
    )

    fdoc = _section(doc, "forcing", text)
    forcing = ForcingConfig(
        kind=_str(fdoc, "kind", "forcing", "none"),
        amplitude=_num(fdoc.get("amplitude", 0.0), "forcing.amplitude"),
        mode=_num_or_list(fdoc.get("mode", 1), "forcing.mode", int),
        omega=_num(fdoc.get("omega", 0.0), "forcing.omega"),
        shape=_str(fdoc, "shape", "forcing", "sin"),
    )
    output = _build(OutputConfig, _section(doc, "output", text), "output",
                    ints=("snapshot_cadence",))

    cfg = RunConfig(grid=grid, kernel=kernel, nonlinearity=nl, time=tcfg, diagnostics=dcfg,
                    initial=initial, forcing=forcing, output=output, seed=seed)
    return validate(cfg, base_dir)


def _str(table, key, section, default):
    value = table.get(key, default)
    if not isinstance(value, str):
        raise ValidationError(f"{section}.{key}", "expected a string")
    return value


def _section(doc, name, text):
    table = _as_table(doc.get(name, {}), name, text)
    _check_keys(text, table, name)
    return table


def _subsection(parent, key, name, text):
    table = _as_table(parent.get(key, {}), name, text)
    _check_keys(text, table, name)
    return table


def _stiffness(tbl, prefix):
    kw = {}
    for key in ("kind", "profile"):
        if key in tbl:
            kw[key] = tbl[key]
    for key in ("m2", "sigma", "width"):
        if key in tbl:
            kw[key] = _num(tbl[key], f"{prefix}.{key}")
    if "index" in tbl:
        kw["index"] = _num(tbl["index"], f"{prefix}.index", int)
    return StiffnessKernel(**kw)


def _check_profile(p: ProfileConfig, prefix: str, n: int, N: int, base_dir) -> ProfileConfig:
    if p.profile not in PROFILES:
        raise ValidationError(f"{prefix}.profile", f"must be one of {PROFILES}")
    amps = p.amplitude if isinstance(p.amplitude, tuple) else (p.amplitude,)
    if len(amps) not in (1, N):
        raise ValidationError(f"{prefix}.amplitude", f"needs 1 or N={N} values")
    if not all(math.isfinite(a) for a in amps):
        raise ValidationError(f"{prefix}.amplitude", "must be finite")
    for name, value in (("center", p.center), ("mode", p.mode)):
        if isinstance(value, tuple) and len(value) != n:
            raise ValidationError(f"{prefix}.{name}", f"needs {n} values (one per axis)")
    if p.profile == "gaussian" and not p.width > 0:
        raise ValidationError(f"{prefix}.width", "must be > 0")
    if p.profile == "random_modes" and p.modes < 1:
        raise ValidationError(f"{prefix}.modes", "must be >= 1")
    if p.shape not in ("cos", "sin"):
        raise ValidationError(f"{prefix}.shape", "must be 'cos' or 'sin'")
    if p.profile == "file":
        path = Path(p.path)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not p.path or not path.is_file():
            raise ValidationError(f"{prefix}.path", f"file not found: {p.path!r}")
        p = replace(p, path=str(path))
    return p


def validate(cfg: RunConfig, base_dir=None) -> RunConfig:
    g = cfg.grid
    if g.n not in (1, 2):
        raise ValidationError("grid.n", "must be 1 or 2")
    if not g.L > 0:
        raise ValidationError("grid.L", "must be > 0")
    if g.M < 4 or g.M % 2:
        raise ValidationError("grid.M", "must be an even integer >= 4")
    cfg.kernel.validate()
    if cfg.nonlinearity.coupling is not None:
        cfg.nonlinearity.coupling_matrix(cfg.N)
    t = cfg.time
    if not t.dt > 0:
        raise ValidationError("time.dt", "must be > 0")
    if not t.T >= 0:
        raise ValidationError("time.T", "must be >= 0")
    if not t.tol > 0:
        raise ValidationError("time.tol", "must be > 0")
    if t.max_iter < 1:
        raise ValidationError("time.max_iter", "must be >= 1")
    d = cfg.diagnostics
    if d.cadence < 1:
        raise ValidationError("diagnostics.cadence", "must be >= 1")
    if not 0 < d.alpha < 1:
        raise ValidationError("diagnostics.alpha", "must lie in (0, 1)")
    if not d.b > 0:
        raise ValidationError("diagnostics.b", "must be > 0")
    if not d.t0 > 0:
        raise ValidationError("diagnostics.t0", "must be > 0")
    if not 0 < d.nu_min < d.nu_max:
        raise ValidationError("diagnostics.nu_min", "need 0 < nu_min < nu_max")
    if d.nu_count < 2:
        raise ValidationError("diagnostics.nu_count", "must be >= 2")
    if not d.certify_tol >= 0:
        raise ValidationError("diagnostics.certify_tol", "must be >= 0")
    if not d.sup_factor > 1:
        raise ValidationError("diagnostics.sup_factor", "must be > 1")
    if d.sobolev_factor is not None and not d.sobolev_factor > 1:
        raise ValidationError("diagnostics.sobolev_factor", "must be > 1")
    init = replace(
        cfg.initial,
        u=_check_profile(cfg.initial.u, "initial.u", g.n, cfg.N, base_dir),
        ut=_check_profile(cfg.initial.ut, "initial.ut", g.n, cfg.N, base_dir),
    )
    f = cfg.forcing
    if f.kind not in ("none", "standing_wave"):
        raise ValidationError("forcing.kind", "must be 'none' or 'standing_wave'")
    if f.shape not in ("cos", "sin"):
        raise ValidationError("forcing.shape", "must be 'cos' or 'sin'")
    if isinstance(f.mode, tuple) and len(f.mode) != g.n:
        raise ValidationError("forcing.mode", f"needs {g.n} values (one per axis)")
    if cfg.output.snapshot_cadence < 0:
        raise ValidationError("output.snapshot_cadence", "must be >= 0")
    if cfg.seed < 0:
        raise ValidationError("seed", "must be >= 0")
    return replace(cfg, initial=init)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_document(cfg: RunConfig) -> dict:
    """Plain-dict form of a config, ready for TOML serialization."""
    A = [_clean(asdict(entry)) for entry in cfg.kernel.A]
    nl = cfg.nonlinearity
    doc = {
        "seed": cfg.seed,
        "grid": asdict(cfg.grid),
        "kernel": {
            "N": cfg.N,
            "a": asdict(cfg.kernel.a),
            "A": A,
            "g": asdict(cfg.kernel.g),
        },
        "nonlinearity": {"form": nl.form, "lambda": nl.lam, "gamma": nl.gamma},
        "time": asdict(cfg.time),
        "diagnostics": asdict(cfg.diagnostics),
        "initial": asdict(cfg.initial),
        "forcing": asdict(cfg.forcing),
        "output": asdict(cfg.output),
    }
    if nl.coupling is not None:
        doc["nonlinearity"]["coupling_matrix"] = [list(r) for r in nl.coupling]
    return _clean(doc)


def dump_config(cfg: RunConfig) -> str:
    import tomli_w

    return tomli_w.dumps(to_document(cfg))
