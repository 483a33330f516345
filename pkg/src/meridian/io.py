"""Configuration parsing, CSV emission, snapshots, manifest, and the CLI.

The config format is flat ``key = value`` lines (``#`` comments and blank
lines allowed).  Unknown keys are a hard error.  Keys and defaults:

    grid.nr = 128      grid.nz = 128
    domain.R = 1.0     domain.H = 1.0
    time.T = 0.1       time.cfl = 0.4      time.dt = (unset; overrides cfl)
    init.family = combined   init.A = 0.1   init.B = 0.1
    init.k = 1         init.m = 1          init.seed = 0
    diag.cadence = 10
    solver.tol = 1e-10
    output.dir = out

All floats are serialized with 17 significant digits, so every CSV value
round-trips exactly and reruns of the same config are byte-identical.  The
run manifest (JSON) is written exactly once per run, on success and on every
error path; it is the only output containing wall-clock times.

Records are emitted at t = 0, after every ``diag.cadence``-th step, and
after the final step (so a run whose step count is a multiple of the cadence
repeats its last row, keeping the row count at floor(steps/cadence) + 2; a
T = 0 run emits the single t = 0 row).
"""

from __future__ import annotations

import argparse
import json
import sys
import time as _time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diagnostics import (CSV_FIELDS, DiagnosticsRecord, compute_constants,
                          energy_drift, first_doubling_time,
                          max_principle_growth, scaling_invariance)
from .dynamics import (FAMILIES, BlowupError, FlowState, RunResult, SimConfig,
                       run, stable_dt_bounds)
from .elliptic import SolverError
from .grid import ConfigurationError, MeridianGrid
from .initdata import DataFamily
from .manufactured import all_orders


class ConfigError(ValueError):
    """Malformed, unknown, or out-of-range configuration input."""


class FormatError(ValueError):
    """A data file does not match its declared layout."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- configuration -----------------------------------------------------------

def _parse_int(v: str) -> int:
    return int(v, 10)


def _parse_float(v: str) -> float:
    return float(v)


def _parse_family(v: str) -> str:
    if v not in FAMILIES:
        raise ValueError(f"family must be one of {', '.join(FAMILIES)}")
    return v


# key -> (config attr, parser, validator, description)
_KEYS = {
    "grid.nr": ("nr", _parse_int, lambda x: x >= 1, "positive integer"),
    "grid.nz": ("nz", _parse_int, lambda x: x >= 1, "positive integer"),
    "domain.R": ("R", _parse_float, lambda x: x > 0, "positive number"),
    "domain.H": ("H", _parse_float, lambda x: x > 0, "positive number"),
    "time.T": ("T", _parse_float, lambda x: x >= 0, "nonnegative number"),
    "time.cfl": ("cfl", _parse_float, lambda x: 0 < x <= 1, "number in (0, 1]"),
    "time.dt": ("dt", _parse_float, lambda x: x > 0, "positive number"),
    "init.family": ("family", _parse_family, lambda x: True, "family tag"),
    "init.A": ("A", _parse_float, np.isfinite, "finite number"),
    "init.B": ("B", _parse_float, np.isfinite, "finite number"),
    "init.k": ("k", _parse_int, lambda x: x >= 1, "positive integer"),
    "init.m": ("m", _parse_int, lambda x: x >= 1, "positive integer"),
    "init.seed": ("seed", _parse_int, lambda x: x >= 0, "nonnegative integer"),
    "diag.cadence": ("cadence", _parse_int, lambda x: x >= 1, "positive integer"),
    "solver.tol": ("tol", _parse_float, lambda x: x > 0, "positive number"),
    "output.dir": ("outdir", str, lambda x: len(x) > 0, "nonempty path"),
}


def parse_config(text: str) -> SimConfig:
    """Parse flat key = value text into a fully resolved SimConfig.

    Every omitted key takes its documented default; unknown keys, malformed
    lines, and out-of-range values raise ConfigError with the line number.
    """
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser, valid, desc = _KEYS[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key} = {value!r}: {exc}") from exc
        if not valid(parsed):
            raise ConfigError(f"line {lineno}: {key} = {value!r} out of range "
                              f"(expected {desc})")
        overrides[attr] = parsed
    try:
        return SimConfig(**overrides)
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: SimConfig) -> dict:
    d = asdict(config)
    return d


# -- CSV time series ----------------------------------------------------------

class TimeseriesWriter:
    """Streams records to CSV, flushing each row (partial output survives a
    failing run)."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="\n")
        self._fh.write(",".join(CSV_FIELDS) + "\n")
        self._fh.flush()

    def write(self, rec: DiagnosticsRecord) -> None:
        self._fh.write(",".join(_fmt(getattr(rec, name)) for name in CSV_FIELDS) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def write_timeseries(records, path) -> None:
    """Write a full record list in the fixed documented column order."""
    w = TimeseriesWriter(path)
    try:
        for rec in records:
            w.write(rec)
    finally:
        w.close()


# -- snapshots -----------------------------------------------------------------

def write_snapshot(state: FlowState, path) -> None:
    """Dump interior (i, j, r, z, gamma, omega) rows; 17-digit floats."""
    g = state.grid
    lines = [f"# snapshot nr={g.nr} nz={g.nz} R={_fmt(g.R)} H={_fmt(g.H)} "
             f"t={_fmt(state.t)}",
             "i,j,r,z,gamma,omega"]
    gam = state.gamma.interior
    om = state.omega.interior
    r, z = g.r, g.z
    for i in range(g.nr):
        for j in range(g.nz):
            lines.append(f"{i},{j},{_fmt(r[i])},{_fmt(z[j])},"
                         f"{_fmt(gam[i, j])},{_fmt(om[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_snapshot(path) -> FlowState:
    """Inverse of write_snapshot; ghosts are rebuilt by the bc closures.

    Raises FormatError on truncation, malformed rows, or any mismatch with
    the declared grid; no partial state is ever returned.
    """
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# snapshot "):
        raise FormatError("missing snapshot header")
    meta = {}
    for tok in lines[0].removeprefix("# snapshot ").split():
        key, _, val = tok.partition("=")
        meta[key] = val
    try:
        nr, nz = int(meta["nr"]), int(meta["nz"])
        R, H, t = float(meta["R"]), float(meta["H"]), float(meta["t"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad snapshot header: {exc}") from exc
    if lines[1] != "i,j,r,z,gamma,omega":
        raise FormatError("bad snapshot column header")
    rows = lines[2:]
    if len(rows) != nr * nz:
        raise FormatError(f"expected {nr * nz} rows for a {nr}x{nz} grid, "
                          f"got {len(rows)}")
    gam = np.empty((nr, nz))
    om = np.empty((nr, nz))
    seen = np.zeros((nr, nz), dtype=bool)
    for row in rows:
        parts = row.split(",")
        if len(parts) != 6:
            raise FormatError(f"malformed snapshot row {row!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            gv, ov = float(parts[4]), float(parts[5])
        except ValueError as exc:
            raise FormatError(f"malformed snapshot row {row!r}") from exc
        if not (0 <= i < nr and 0 <= j < nz):
            raise FormatError(f"row index ({i}, {j}) outside {nr}x{nz} grid")
        gam[i, j] = gv
        om[i, j] = ov
        seen[i, j] = True
    if not seen.all():
        raise FormatError("duplicate or missing cell rows")
    grid = MeridianGrid(nr, nz, R, H)
    return FlowState.create(grid, gam, om, t)


# -- manifest -------------------------------------------------------------------

@dataclass
class RunManifest:
    """Written exactly once per run, before process exit, on every path."""

    config: dict
    version: str
    started_utc: str
    finished_utc: str
    termination: str  # completed | blowup | solver_failure
    steps: int
    error: Optional[str] = None
    first_doubling_time: Optional[float] = None


def write_manifest(manifest: RunManifest, path) -> None:
    Path(path).write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True)
                          + "\n", newline="\n")


def _utcnow() -> str:
    return _time.strftime("%Y-%m-%dT%H:%M:%SZ", _time.gmtime())


def execute_run(config: SimConfig, outdir=None) -> tuple[int, Optional[RunResult]]:
    """Run a configured simulation with full artifact output.

    Writes outdir/timeseries.csv (streamed), outdir/manifest.json (always),
    a final or blow-up snapshot, and returns (exit_code, result) with exit
    code 0 for completed, 1 for blow-up, 3 for solver failure.
    """
    out = Path(outdir if outdir is not None else config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    started = _utcnow()
    termination = "completed"
    error_msg = None
    steps = 0
    result = None
    writer = TimeseriesWriter(out / "timeseries.csv")
    try:
        result = run(config, record_sink=writer.write)
        steps = result.steps
        write_snapshot(result.final, out / "final_snapshot.csv")
        return 0, result
    except BlowupError as exc:
        termination = "blowup"
        error_msg = str(exc)
        if getattr(exc, "state", None) is not None:
            write_snapshot(exc.state, out / "blowup_snapshot.csv")
        return 1, None
    except SolverError as exc:
        termination = "solver_failure"
        error_msg = str(exc)
        return 3, None
    finally:
        writer.close()
        doubling = first_doubling_time(result.records) if result is not None else None
        write_manifest(RunManifest(
            config=config_to_dict(config), version=__version__,
            started_utc=started, finished_utc=_utcnow(),
            termination=termination, steps=steps, error=error_msg,
            first_doubling_time=doubling,
        ), out / "manifest.json")


# -- verification driver ---------------------------------------------------------

def _growth_slack(config: SimConfig) -> float:
    grid = config.grid()
    dt_cap = config.dt if config.dt is not None else \
        stable_dt_bounds(grid, 0.0, 0.0, config.cfl)
    return 10.0 * (dt_cap + grid.dr**2 + grid.dz**2)


def run_checks(config: SimConfig, result: RunResult) -> list[tuple[str, bool, str]]:
    """Evaluate every asserted inequality on a completed run's records.

    Returns (name, passed, detail) triples; reported-only quantities are
    included with passed=True.
    """
    grid = config.grid()
    h2 = max(grid.dr, grid.dz) ** 2
    eps = _growth_slack(config)
    records = result.records
    checks = []

    growth = max_principle_growth(records)
    for name in ("l2", "l4", "linf"):
        checks.append((f"max_principle_{name}", growth[name] <= eps,
                       f"worst relative growth {growth[name]:.3e} (allowed {eps:.3e})"))

    drift = energy_drift(records)
    if drift is None:
        checks.append(("energy_dissipation", True,
                       "not applicable (initial smallness > 1/4)"))
    else:
        checks.append(("energy_dissipation", drift <= eps,
                       f"worst relative energy increase {drift:.3e} (allowed {eps:.3e})"))

    worst_grad = min(r.margin_grad + 10.0 * h2 * r.omega_l2 for r in records)
    checks.append(("gradient_bound", worst_grad >= 0.0,
                   f"worst slack-adjusted margin {worst_grad:.3e}"))
    worst_hess = min(r.margin_hess + 10.0 * h2 * r.dz_omega_l2 for r in records)
    checks.append(("hessian_bound", worst_hess >= 0.0,
                   f"worst slack-adjusted margin {worst_hess:.3e}"))
    worst_sup = min(r.margin_sup for r in records)
    checks.append(("sup_bound", worst_sup >= 0.0, f"worst margin {worst_sup:.3e}"))
    worst_vavg = min(r.margin_vertical_avg for r in records)
    checks.append(("vertical_average", worst_vavg >= 0.0,
                   f"worst margin {worst_vavg:.3e}"))

    doubling = first_doubling_time(records)
    checks.append(("vorticity_doubling", True,
                   "never" if doubling is None else f"first at t = {doubling:.6g}"))
    return checks


# -- CLI ---------------------------------------------------------------------------

def _load_config(path: Optional[str]) -> SimConfig:
    if path is None:
        return SimConfig()
    return parse_config(Path(path).read_text())


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    code, _ = execute_run(config, args.output)
    return code


def _cmd_verify(args) -> int:
    config = _load_config(args.config)
    code, result = execute_run(config, args.output)
    if code != 0:
        print(f"verify: run terminated abnormally (exit {code})")
        return code
    checks = run_checks(config, result)
    failed = False
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed = failed or not ok
    return 4 if failed else 0


def _cmd_constants(args) -> int:
    c = compute_constants()
    print(f"agmon_constant = {c.c_agmon:.12g}")
    print(f"hessian_bound_constant = {c.c_hessian:.12g}")
    print(f"poincare_bound = {c.c_poincare:.12g}")
    return 0


def _cmd_scaling_check(args) -> int:
    family = DataFamily(tag=args.family, A=args.A, B=args.B,
                        k=args.k, m=args.m, seed=args.seed)
    check = scaling_invariance(family, args.lam, args.size, args.size)
    print(f"smallness base = {check.s_base:.12g}")
    print(f"smallness rescaled = {check.s_rescaled:.12g}")
    print(f"relative deviation = {check.deviation:.3e}")
    ratios = {
        "swirl_l4_ratio": check.ratio_v_swirl,
        "gamma_l4_ratio": check.ratio_gamma,
        "omega_l2_sqrt_ratio": check.ratio_omega_sqrt,
    }
    bad = check.deviation > 1e-2
    for name, rc in ratios.items():
        print(f"{name} = {rc.observed:.6g} (expected {rc.expected:.6g}, "
              f"deviation {rc.deviation:.3e})")
        bad = bad or rc.deviation > 1e-2
    return 4 if bad else 0


def _cmd_convergence(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(","))
    studies = all_orders(sizes)
    bad = False
    for name, study in studies.items():
        orders = ", ".join(f"{o:.3f}" for o in study.orders)
        errors = ", ".join(f"{e:.3e}" for e in study.errors)
        ok = all(1.8 <= o <= 2.2 for o in study.orders)
        bad = bad or not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: errors [{errors}] "
              f"orders [{orders}]")
    return 4 if bad else 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config)
    a_values = [float(s) for s in args.a_values.split(",")]
    b_values = [float(s) for s in args.b_values.split(",")]
    out = Path(args.output if args.output is not None else config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    eps = _growth_slack(config)
    rows = ["A,B,smallness0,energy_monotone,blowup,T_reached"]
    for a in a_values:
        for b in b_values:
            member = replace(config, A=a, B=b)
            subdir = out / f"sweep_A{_fmt(a)}_B{_fmt(b)}"
            code, result = execute_run(member, subdir)
            if code == 3:
                return 3
            blowup = code == 1
            if result is not None and result.records:
                s0 = result.records[0].smallness
                t_reached = result.records[-1].t
                drift = energy_drift(result.records)
                mono = "n/a" if drift is None else str(bool(drift <= eps)).lower()
            else:
                s0, t_reached, mono = float("nan"), float("nan"), "n/a"
            row = (f"{_fmt(a)},{_fmt(b)},{_fmt(s0)},{mono},"
                   f"{str(blowup).lower()},{_fmt(t_reached)}")
            rows.append(row)
            print(row)
    (out / "sweep.csv").write_text("\n".join(rows) + "\n", newline="\n")
    return 0


def cli(argv) -> int:
    """Entry point; returns the process exit code.

    Exit codes: 0 success, 1 blow-up detected, 2 configuration error,
    3 solver failure, 4 check failure.
    """
    parser = argparse.ArgumentParser(
        prog="meridian",
        description="Meridian-plane axisymmetric flow simulator and "
                    "verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--output", default=None)
    p_run.set_defaults(fn=_cmd_run)

    p_verify = sub.add_parser("verify", help="run and evaluate every check")
    p_verify.add_argument("--config", default=None)
    p_verify.add_argument("--output", default=None)
    p_verify.set_defaults(fn=_cmd_verify)

    p_const = sub.add_parser("constants", help="print the bound constants")
    p_const.set_defaults(fn=_cmd_constants)

    p_scale = sub.add_parser("scaling-check", help="criticality of the "
                             "smallness quantity under rescaling")
    p_scale.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p_scale.add_argument("--size", type=int, default=256)
    p_scale.add_argument("--family", default="combined", choices=FAMILIES)
    p_scale.add_argument("--A", type=float, default=0.1)
    p_scale.add_argument("--B", type=float, default=0.1)
    p_scale.add_argument("--k", type=int, default=1)
    p_scale.add_argument("--m", type=int, default=1)
    p_scale.add_argument("--seed", type=int, default=0)
    p_scale.set_defaults(fn=_cmd_scaling_check)

    p_conv = sub.add_parser("convergence", help="manufactured-solution "
                            "order studies")
    p_conv.add_argument("--sizes", default="32,64,128")
    p_conv.set_defaults(fn=_cmd_convergence)

    p_sweep = sub.add_parser("sweep", help="amplitude sweep over (A, B)")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--a-values", required=True)
    p_sweep.add_argument("--b-values", required=True)
    p_sweep.add_argument("--output", default=None)
    p_sweep.set_defaults(fn=_cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ConfigurationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except BlowupError as exc:
        print(f"blow-up detected: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli(sys.argv[1:]))
