"""Experiment runner: builds every piece from a RunConfig and writes outputs.

Output directory layout::

    diagnostics.csv       one row per recorded time (initial state included)
    snapshots/NNNN.bin    u snapshots (RealField format), if enabled
    checkpoint.bin        final (u, u_t, t)
    certificate.txt       blow-up certificate or refutation, if monitoring
    side_conditions.csv   per-sample slacks backing the certificate
    manifest.txt          stop reason, exit code, wall time, file list
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .config import ProfileConfig, RunConfig
from .errors import (
    InsufficientTrace,
    MaxIterExceeded,
    NegativeSymbol,
    NLWaveError,
    NotRealizable,
    Overflow,
    ParseError,
    UnknownPreset,
    ValidationError,
)
from .propagator import State, run
from .spectral import (
    Grid,
    forward_transform,
    inverse_transform,
    l2_norm,
    make_grid,
    read_snapshot,
    sobolev_norm,
    write_checkpoint,
    write_snapshot,
)
from .symbols import SymbolTable, build_symbol_table, check_admissibility

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "t", "L2_u", "L2_ut", "Hs_u", "fracA_alpha_u", "kinetic", "elastic", "fU_u", "twoF",
    "E_paper", "E_conserved", "H", "Hp", "Hpp",
)


class ExitCode(enum.IntEnum):
    OK = 0
    ERROR = 1
    PARSE_ERROR = 2
    VALIDATION_ERROR = 3
    REJECTED_ADMISSIBILITY = 4
    UNKNOWN_PRESET = 5
    NEGATIVE_SYMBOL = 6
    STOPPED_NORM_THRESHOLD = 10
    STOPPED_SOBOLEV_THRESHOLD = 11
    STOPPED_NON_CONTRACTION = 12
    MAX_ITER_EXCEEDED = 13
    OVERFLOW = 14
    NOT_REALIZABLE = 15
    IO_ERROR = 16

    @property
    def message(self) -> str:
        return _MESSAGES[self]


_MESSAGES = {
    ExitCode.OK: "ok",
    ExitCode.ERROR: "error",
    ExitCode.PARSE_ERROR: "rejected: parse error",
    ExitCode.VALIDATION_ERROR: "rejected: validation",
    ExitCode.REJECTED_ADMISSIBILITY: "rejected: admissibility",
    ExitCode.UNKNOWN_PRESET: "rejected: unknown preset",
    ExitCode.NEGATIVE_SYMBOL: "rejected: negative symbol",
    ExitCode.STOPPED_NORM_THRESHOLD: "stopped: norm threshold",
    ExitCode.STOPPED_SOBOLEV_THRESHOLD: "stopped: sobolev threshold",
    ExitCode.STOPPED_NON_CONTRACTION: "stopped: non-contraction",
    ExitCode.MAX_ITER_EXCEEDED: "failed: picard max iterations",
    ExitCode.OVERFLOW: "failed: overflow",
    ExitCode.NOT_REALIZABLE: "failed: spectrum not realizable",
    ExitCode.IO_ERROR: "failed: i/o",
}

_STOP_CODES = {
    "completed": ExitCode.OK,
    "norm_threshold": ExitCode.STOPPED_NORM_THRESHOLD,
    "sobolev_threshold": ExitCode.STOPPED_SOBOLEV_THRESHOLD,
    "non_contraction": ExitCode.STOPPED_NON_CONTRACTION,
}


def exit_code_for(exc: BaseException) -> ExitCode:
    for cls, code in (
        (ParseError, ExitCode.PARSE_ERROR),
        (ValidationError, ExitCode.VALIDATION_ERROR),
        (UnknownPreset, ExitCode.UNKNOWN_PRESET),
        (NegativeSymbol, ExitCode.NEGATIVE_SYMBOL),
        (MaxIterExceeded, ExitCode.MAX_ITER_EXCEEDED),
        (Overflow, ExitCode.OVERFLOW),
        (NotRealizable, ExitCode.NOT_REALIZABLE),
        (OSError, ExitCode.IO_ERROR),
    ):
        if isinstance(exc, cls):
            return code
    return ExitCode.ERROR


# -- construction ---------------------------------------------------------------


def build_grid(cfg: RunConfig) -> Grid:
    return make_grid(cfg.grid.n, cfg.grid.L, cfg.grid.M)


def build_table(cfg: RunConfig, grid: Grid | None = None) -> SymbolTable:
    return build_symbol_table(grid or build_grid(cfg), cfg.kernel)


def _per_axis(value, n):
    return value if isinstance(value, tuple) else (value,) * n


def _phase(grid: Grid, mode) -> np.ndarray:
    unit = np.pi / grid.L
    return sum(k * unit * x for k, x in zip(_per_axis(mode, grid.n), grid.coords))


def profile_field(p: ProfileConfig, grid: Grid, N: int, seed: int = 0) -> np.ndarray:
    """Sample a named initial profile; returns shape ``(N,) + grid.shape``."""
    amps = np.asarray(p.amplitude if isinstance(p.amplitude, tuple) else (p.amplitude,) * N,
                      dtype=float).reshape((N,) + (1,) * grid.n)
    if p.profile == "zero":
        base = np.zeros(grid.shape)
    elif p.profile == "gaussian":
        r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, _per_axis(p.center, grid.n)))
        base = np.exp(-r2 / p.width**2)
    elif p.profile == "single_mode":
        phase = _phase(grid, p.mode)
        base = np.cos(phase) if p.shape == "cos" else np.sin(phase)
    elif p.profile == "file":
        field_, fgrid = read_snapshot(p.path)
        if fgrid != grid or field_.shape[0] != N:
            raise ValidationError("initial.path", "snapshot grid or component count differs")
        return field_ * amps
    elif p.profile == "random_modes":
        rng = np.random.default_rng(seed)
        out = np.empty(grid.field_shape(N))
        for j in range(N):
            coeffs = np.zeros(grid.shape, dtype=complex)
            for idx in np.ndindex(*([p.modes + 1] * grid.n)):
                if any(idx):
                    coeffs[idx] = rng.normal() + 1j * rng.normal()
            f = np.real(np.fft.ifftn(coeffs))
            out[j] = f / np.abs(f).max()
        return out * amps
    else:
        raise ValidationError("initial.profile", f"unknown profile {p.profile!r}")
    return np.broadcast_to(base, grid.field_shape(N)) * amps


def initial_state(cfg: RunConfig, grid: Grid, seed: int | None = None) -> State:
    seed = cfg.seed if seed is None else seed
    N = cfg.N
    u = profile_field(cfg.initial.u, grid, N, seed)
    ut = profile_field(cfg.initial.ut, grid, N, seed + 1)
    u_hat = forward_transform(u, grid)
    v_hat = forward_transform(ut, grid)
    if cfg.initial.project_mean:
        zero = (slice(None),) + grid.zero_mode()
        u_hat[zero] = 0.0
        v_hat[zero] = 0.0
    return State(0.0, u_hat, v_hat)


def build_forcing(cfg: RunConfig, grid: Grid):
    f = cfg.forcing
    if f.kind == "none":
        return None
    phase = _phase(grid, f.mode)
    shape = np.cos(phase) if f.shape == "cos" else np.sin(phase)
    spatial = forward_transform(np.broadcast_to(f.amplitude * shape, grid.field_shape(cfg.N)), grid)
    omega = f.omega

    def forcing(t):
        return spatial * np.cos(omega * t)

    return forcing


# -- diagnostics rows ----------------------------------------------------------------


def diagnostics_row(state: State, table: SymbolTable, cfg: RunConfig):
    """Values for :data:`CSV_COLUMNS` plus the B-norms used by the certifier."""
    d = cfg.diagnostics
    nl = cfg.nonlinearity
    grid = table.grid
    e = diag.energy(state, table, nl, warn=False)
    H, Hp, Hpp, bu2, but2 = diag.h_values(state, table, nl, d.b, d.t0, warn=False)
    row = (
        state.t,
        l2_norm(state.u_hat),
        l2_norm(state.v_hat),
        sobolev_norm(state.u_hat, grid, d.s),
        diag.frac_power_norm(state.u_hat, table, d.alpha),
        e.kinetic,
        e.elastic,
        e.interaction_paper,
        e.interaction_potential,
        e.E_paper,
        e.E_conserved,
        H,
        Hp,
        Hpp,
    )
    return row, (bu2, but2)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, rows, header=CSV_COLUMNS) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# -- experiment ---------------------------------------------------------------------


@dataclass
class ExitReport:
    code: ExitCode
    stop_reason: str
    wall_time: float
    files: list = field(default_factory=list)
    message: str = ""
    rows: list = field(default_factory=list, repr=False)
    final: State | None = field(default=None, repr=False)
    certificate: object = field(default=None, repr=False)
    admissibility: object = field(default=None, repr=False)
    steps: int = 0

    @property
    def status(self) -> str:
        return self.code.message


def run_experiment(cfg: RunConfig, out_dir=None, force: bool = False,
                   seed: int | None = None, write: bool = True) -> ExitReport:
    """Run one experiment end to end. Module errors become exit codes."""
    started = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    report = ExitReport(code=ExitCode.OK, stop_reason="", wall_time=0.0)
    try:
        _run(cfg, out, force, seed, write, report)
    except NLWaveError as exc:
        report.code = exit_code_for(exc)
        report.stop_reason = report.stop_reason or type(exc).__name__
        t = getattr(exc, "t", None)
        report.message = f"{exc}" + (f" at t={t:.17g}" if t is not None else "")
        log.error("%s: %s", report.code.message, report.message)
    except OSError as exc:
        report.code = ExitCode.IO_ERROR
        report.stop_reason = "io_error"
        report.message = str(exc)
    report.wall_time = time.perf_counter() - started
    if write:
        try:
            out.mkdir(parents=True, exist_ok=True)
            _write_manifest(out, report)
        except OSError as exc:
            report.code = ExitCode.IO_ERROR
            report.message = str(exc)
    return report


def _run(cfg, out, force, seed, write, report):
    grid = build_grid(cfg)
    table = build_table(cfg, grid)
    audit = check_admissibility(table, cfg.kernel, s=cfg.diagnostics.s)
    report.admissibility = audit
    if write:
        out.mkdir(parents=True, exist_ok=True)
    if not audit.overall and not force:
        report.code = ExitCode.REJECTED_ADMISSIBILITY
        report.stop_reason = "admissibility"
        report.message = "failed checks: " + ",".join(audit.failures)
        if write:
            (out / "admissibility.txt").write_text(audit.to_text())
            report.files.append("admissibility.txt")
        return

    state0 = initial_state(cfg, grid, seed)
    forcing = build_forcing(cfg, grid)
    d = cfg.diagnostics
    rows, bnorms = [], []
    row, bn = diagnostics_row(state0, table, cfg)
    rows.append(row)
    bnorms.append(bn)

    def record(state):
        r, b = diagnostics_row(state, table, cfg)
        rows.append(r)
        bnorms.append(b)
        return r

    snap_dir = out / "snapshots"
    snaps = []

    def snapshot(state):
        snap_dir.mkdir(parents=True, exist_ok=True)
        name = f"{len(snaps):04d}.bin"
        write_snapshot(snap_dir / name, inverse_transform(state.u_hat, grid), grid)
        snaps.append(f"snapshots/{name}")

    on_step = None
    if write and cfg.output.snapshot_cadence > 0:
        snapshot(state0)
        cadence = cfg.output.snapshot_cadence

        def on_step(step, state):
            if step % cadence == 0:
                snapshot(state)

    try:
        traj = run(
            state0, table, cfg.nonlinearity, cfg.time.dt, cfg.time.T,
            tol=cfg.time.tol, max_iter=cfg.time.max_iter, dealias=cfg.time.dealias,
            forcing=forcing, cadence=d.cadence, record=record, on_step=on_step,
            sup_factor=d.sup_factor, sobolev_factor=d.sobolev_factor, sobolev_s=d.s,
        )
    finally:
        report.rows = rows
        if write:
            write_csv(out / "diagnostics.csv", rows)
            report.files.append("diagnostics.csv")
            report.files.extend(snaps)

    report.final = traj.final
    report.steps = traj.steps
    report.stop_reason = traj.stop_reason
    report.code = _STOP_CODES[traj.stop_reason]
    if traj.error is not None:
        report.message = f"{traj.error} at t={traj.error.t:.17g}"
    if write:
        write_checkpoint(out / "checkpoint.bin", inverse_transform(traj.final.u_hat, grid),
                         inverse_transform(traj.final.v_hat, grid), traj.final.t, grid)
        report.files.append("checkpoint.bin")

    if d.blowup:
        cert = certify_rows(rows, bnorms, cfg)
        report.certificate = cert
        if write:
            (out / "certificate.txt").write_text(cert.to_text())
            report.files.append("certificate.txt")
            if isinstance(cert, diag.BlowupCertificate):
                write_csv(out / "side_conditions.csv", cert.side_rows,
                          header=("t", "concavity_rel_slack", "c2_slack", "c3_slack"))
                report.files.append("side_conditions.csv")


class _Insufficient:
    def __init__(self, reason):
        self.reason = reason

    def to_text(self):
        return f"status=insufficient\nreason={self.reason}\n"


def certify_rows(rows, bnorms, cfg: RunConfig):
    """Build a monitor from recorded rows and run the certifier."""
    d = cfg.diagnostics
    idx = {c: i for i, c in enumerate(CSV_COLUMNS)}
    E0 = rows[0][idx["E_paper"]]
    mon = diag.BlowupMonitor(b=d.b, t0=d.t0, E0=E0)
    for r, (bu2, but2) in zip(rows, bnorms):
        mon.record(r[idx["t"]], r[idx["H"]], r[idx["Hp"]], r[idx["Hpp"]], bu2, but2)
    try:
        return diag.blowup_certify(mon, d.nu_min, d.nu_max, d.nu_count, d.certify_tol)
    except InsufficientTrace as exc:
        return _Insufficient(str(exc))


def _write_manifest(out: Path, report: ExitReport) -> None:
    lines = [
        f"status={report.code.message}",
        f"exit_code={int(report.code)}",
        f"stop_reason={report.stop_reason}",
        f"steps={report.steps}",
        f"wall_time={report.wall_time:.6f}",
    ]
    if report.message:
        lines.append(f"message={report.message}")
    files = list(report.files)
    lines += [f"file={f}" for f in files + ["manifest.txt"]]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    report.files = files + ["manifest.txt"]
