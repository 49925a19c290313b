"""
Command-line front end
Subcommands: systems list | check | integrate | kepler {invariants, chart, orbit}.
Reports go to stdout as JSON, logs to stderr; exit codes are 0 (pass),
1 (check or drift failure), 2 (usage or configuration error) and 3 (numeric
or domain failure).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

from config import config
from checks import CHECK_IDS, CheckOptions, run_check
from diffcore import ScalarField
from errors import ConfigError, NoetherKitError
from geometry import JetPoint, PhasePoint, jet_frame, phase_frame
from integrate import Trajectory, drift_report, integrate_hamiltonian, integrate_lagrangian
import kepler
from systems import System, SystemManager

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL = 0, 1
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


# ---------------------------------------------------------------------------
# shared helpers

def parse_state(text: str, dim: int) -> List[float]:
    """Comma-separated q1..qn followed by p1..pn (or qt1..qtn)"""
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"State must be comma-separated numbers, got {text!r}") from None
    if len(values) != 2 * dim:
        raise ConfigError(f"State needs {2 * dim} values for dimension {dim}, got {len(values)}")
    return values


def _fmt(x: float) -> str:
    digits = int(config.get("output.digits", 17))
    return f"{float(x):.{digits}g}"


def _write_text(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", target)


def _write_csv(stream: TextIO, header: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])


def _emit_csv(path: Optional[str], header: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    if path is None:
        _write_csv(sys.stdout, header, rows)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as f:
        _write_csv(f, header, rows)
    logger.info("Wrote %s (%d rows)", target, len(rows))


def _print_json(data: Dict[str, Any]) -> str:
    text = json.dumps(data, indent=2)
    print(text)
    return text


def _load_system(ref: str) -> System:
    return SystemManager().get_system(ref)


# ---------------------------------------------------------------------------
# commands

def cmd_systems(args: argparse.Namespace) -> int:
    for name, source in SystemManager().list_systems():
        print(f"{name}\t{source}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    system = _load_system(args.system)
    options = CheckOptions(symmetry=args.symmetry, integral=args.integral, frame=args.frame)
    report = run_check(system, args.check, samples=args.samples, tol=args.tol, seed=args.seed,
                       options=options, workers=args.workers)
    text = _print_json(report.to_dict())
    if args.report:
        _write_text(args.report, text + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def _monitors(system: System, picture: str, names: Optional[str]) -> Dict[str, Any]:
    available = system.phase_monitors() if picture == "hamiltonian" else system.jet_monitors()
    if names is None:
        return available
    frame = phase_frame(system.dim) if picture == "hamiltonian" else jet_frame(system.dim)
    params = (system.hamiltonian_system() if picture == "hamiltonian" else system.lagrangian_system()).params
    chosen: Dict[str, Any] = {}
    for name in (s.strip() for s in names.split(",") if s.strip()):
        chosen[name] = available[name] if name in available else ScalarField.from_text(name, frame, params, name)
    return chosen


def cmd_integrate(args: argparse.Namespace) -> int:
    system = _load_system(args.system)
    picture = args.picture or ("hamiltonian" if system.hamiltonian is not None else "lagrangian")
    values = parse_state(args.state, system.dim)
    q, second = tuple(values[:system.dim]), tuple(values[system.dim:])
    if picture == "hamiltonian":
        traj: Trajectory = integrate_hamiltonian(system.hamiltonian_system(), PhasePoint(args.t0, q, second),
                                                 args.t_end, args.rtol, args.atol, args.samples)
    else:
        traj = integrate_lagrangian(system.lagrangian_system(), JetPoint(args.t0, q, second),
                                    args.t_end, args.rtol, args.atol, args.samples)

    monitors = _monitors(system, picture, args.monitors)
    report = drift_report(traj, monitors, args.drift_tol)
    if args.out:
        names = list(monitors)
        rows = []
        for k, pt in enumerate(traj.points()):
            row = [traj.times[k], *traj.states[k]]
            for name in names:
                try:
                    row.append(float(monitors[name](pt)))
                except NoetherKitError:
                    row.append(float("nan"))
            rows.append(row)
        _emit_csv(args.out, traj.column_names() + names, rows)

    summary = {
        "system": system.name,
        "picture": picture,
        "t0": args.t0,
        "t_end": args.t_end,
        "rtol": traj.rtol,
        "atol": traj.atol,
        "accepted_steps": traj.accepted,
        "rejected_steps": traj.rejected,
        "samples": len(traj),
        "final": [float(x) for x in traj.states[-1]],
        "conservation": report.to_dict(),
    }
    text = _print_json(summary)
    if args.report:
        _write_text(args.report, text + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def _kepler_point(args: argparse.Namespace) -> PhasePoint:
    values = parse_state(args.state, 2)
    return PhasePoint(args.t0, tuple(values[:2]), tuple(values[2:]))


def cmd_kepler(args: argparse.Namespace) -> int:
    at = _kepler_point(args)
    if args.kepler_command == "invariants":
        data = kepler.invariants(at).to_dict()
        data["region"] = kepler.classify(at).value
        _print_json(data)
        return EXIT_OK
    if args.kepler_command == "chart":
        _print_json(kepler.action_angle(at).to_dict())
        return EXIT_OK

    _, hsys = kepler.kepler_system(2)
    traj = integrate_hamiltonian(hsys, at, args.t_end, args.rtol, args.atol, args.samples)
    rows = kepler.orbit_table(traj)
    region = kepler.classify(at)
    header = ["t", "alpha", "I", "x1", "gamma"] if region is kepler.Region.MINUS \
        else ["t", "tau", "I", "x1", "lambda"]
    _emit_csv(args.out, header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    common.add_argument("--config", help="configuration file (default: $NOETHERKIT_CONFIG_DIR/noetherkit.json)")

    parser = argparse.ArgumentParser(prog="noetherkit",
                                     description="Verification toolkit for non-autonomous mechanics")
    sub = parser.add_subparsers(dest="command", required=True)

    systems = sub.add_parser("systems", parents=[common], help="list known systems")
    systems.add_argument("action", choices=["list"])
    systems.set_defaults(handler=cmd_systems)

    check = sub.add_parser("check", parents=[common], help="run a sampled identity check")
    check.add_argument("--system", required=True, help="built-in id, definition name or JSON path")
    check.add_argument("--check", required=True, choices=CHECK_IDS)
    check.add_argument("--samples", type=int)
    check.add_argument("--tol", type=float)
    check.add_argument("--seed", type=int)
    check.add_argument("--symmetry")
    check.add_argument("--integral", help="integral name or phase-space expression")
    check.add_argument("--frame")
    check.add_argument("--workers", type=int)
    check.add_argument("--report", help="also write the JSON report here")
    check.set_defaults(handler=cmd_check)

    integ = sub.add_parser("integrate", parents=[common], help="integrate a flow and report drift")
    integ.add_argument("--system", required=True)
    integ.add_argument("--state", required=True, help="q1,..,qn,p1,..,pn (qt for --picture lagrangian)")
    integ.add_argument("--picture", choices=["hamiltonian", "lagrangian"])
    integ.add_argument("--t0", type=float, default=0.0)
    integ.add_argument("--t-end", type=float, required=True)
    integ.add_argument("--rtol", type=float)
    integ.add_argument("--atol", type=float)
    integ.add_argument("--samples", type=int)
    integ.add_argument("--monitors", help="comma-separated monitor names or expressions")
    integ.add_argument("--drift-tol", type=float, default=1e-6)
    integ.add_argument("--out", help="trajectory CSV")
    integ.add_argument("--report", help="drift report JSON")
    integ.set_defaults(handler=cmd_integrate)

    kep = sub.add_parser("kepler", parents=[common], help="planar Kepler invariants and charts")
    kep.add_argument("kepler_command", choices=["invariants", "chart", "orbit"])
    kep.add_argument("--state", required=True, help="q1,q2,p1,p2")
    kep.add_argument("--t0", type=float, default=0.0)
    kep.add_argument("--t-end", type=float, default=20.0)
    kep.add_argument("--rtol", type=float)
    kep.add_argument("--atol", type=float)
    kep.add_argument("--samples", type=int)
    kep.add_argument("--out", help="plot-ready CSV (default: stdout)")
    kep.set_defaults(handler=cmd_kepler)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr)
    try:
        if args.config:
            config.config_path = Path(args.config)
            config.config_file = args.config
            config.load_config()
        return args.handler(args)
    except NoetherKitError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
