import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

# Add the parent directory to the path so we can import config
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import Config
from config.run_config import ConfigError, RunConfig
from app.models.dynamics import RunSetup, run
from app.models.errors import HypothesisError, InputError, PreparationError
from app.models.functionals import (CertificateInputs, certificate, prepare_blowup_data,
                                    summarize_monitors, trace_monitors)
from app.models.grid import Field
from app.models.hgroup import GaussianBump
from app.models.oracle import convergence_study, eigenmode
from app.models.selftest import format_table, run_selftest
from app.models.trace_io import (build_summary, json_safe, write_config_echo, write_plots,
                                 write_summary_json, write_trace_csv)

logger = logging.getLogger("app.main")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_NUMERICAL = 4
EXIT_BLOWUP = 10

STATUS_EXIT = {"completed": EXIT_OK, "blowup_detected": EXIT_BLOWUP, "nonfinite_abort": EXIT_NUMERICAL}

# support of a Gaussian of width w, cut where it drops below exp(-9)
SUPPORT_WIDTHS = 3.0


def _gaussian(rc: RunConfig, grid) -> Field:
    center = np.zeros(grid.ndim)
    center[grid.s_axis] = rc["init.center_s"]
    return Field.sample(grid, GaussianBump(center, np.full(grid.ndim, rc["init.width"])))


def prepare_data(rc: RunConfig, grid, params, spec) -> Dict[str, Any]:
    """Initial data for every init.kind except synthetic_cert."""
    try:
        kind = rc["init.kind"]
        amplitude, ratio = rc["init.amplitude"], rc["init.velocity_ratio"]
        report = None
        if kind == "gaussian" and rc["init.prepare"]:
            prepared = prepare_blowup_data(grid, params, spec, rc["cert.T0"], width=rc["init.width"],
                                           center_s=rc["init.center_s"], velocity_ratio=ratio)
            u0, u1, report = prepared.u0, prepared.u1, prepared.report
        elif kind == "gaussian":
            bump = _gaussian(rc, grid)
            u0 = bump.with_values(amplitude * bump.values)
            u1 = bump.with_values(ratio * u0.values)
        elif kind == "constant":
            u0 = Field.constant(grid, amplitude)
            u1 = Field.constant(grid, ratio * amplitude)
        elif kind == "eigenmode":
            mode, _ = eigenmode(grid, rc["init.mode"], params.m)
            u0 = mode.with_values(amplitude * mode.values)
            u1 = mode.with_values(ratio * u0.values)
        else:
            raise ConfigError(f"init.kind = {kind} has no fields to build")
        return {"success": True, "u0": u0, "u1": u1, "report": report}
    except (PreparationError, HypothesisError) as e:
        return {"success": False, "error": str(e), "exit_code": EXIT_CERTIFICATE}
    except (ConfigError, InputError) as e:
        return {"success": False, "error": str(e), "exit_code": EXIT_CONFIG}


def _load(path: str) -> Optional[RunConfig]:
    try:
        return RunConfig.from_file(path)
    except ConfigError as e:
        logger.error("%s", e)
        print(f"Configuration error: {e}", file=sys.stderr)
        return None


def cmd_simulate(path: str) -> int:
    """Run a simulation and write trace.csv, summary.json, config.txt and optional plots."""
    rc = _load(path)
    if rc is None:
        return EXIT_CONFIG
    if rc["init.kind"] == "synthetic_cert":
        print("Configuration error: synthetic_cert inputs can only be certified", file=sys.stderr)
        return EXIT_CONFIG

    grid, params, spec = rc.grid(), rc.params(), rc.spec()
    data = prepare_data(rc, grid, params, spec)
    if not data["success"]:
        print(f"Error: {data['error']}", file=sys.stderr)
        return data["exit_code"]

    u0, u1, report = data["u0"], data["u1"], data["report"]
    theorem = params.theorem_mode and spec.alpha > 2
    if report is None and theorem:
        report = certificate(CertificateInputs.from_fields(u0, u1, params, spec, rc["cert.T0"]))

    support = s_support = None
    if rc["init.kind"] == "gaussian":
        support = SUPPORT_WIDTHS * rc["init.width"]
        s_support = abs(rc["init.center_s"]) + support

    try:
        setup = RunSetup(
            grid=grid, params=params, spec=spec, u0=u0, u1=u1, t_end=rc["time.t_end"],
            cfl_fraction=rc["time.cfl_fraction"], output_every=rc["time.output_every"],
            linf_threshold=rc["blowup.linf_threshold"], fit_window=rc["blowup.fit_window"],
            growth_tolerance=rc["time.growth_tolerance"], max_halvings=rc["time.max_halvings"],
            T0=rc["cert.T0"] if theorem else None, support_radius=support, s_support=s_support,
            config=rc.normalized())
    except InputError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    trace, status = run(setup)

    monitors = monitor_summary = None
    if len(trace) >= 3:
        monitors = trace_monitors(trace, report)
        monitor_summary = summarize_monitors(monitors, status.tau_detect)

    out_dir = Path(rc["output.dir"] or Config.OUTPUT_DIR)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out_dir / "trace.csv", monitors)
    summary = build_summary(trace, report, monitor_summary)
    write_summary_json(summary, out_dir / "summary.json")
    write_config_echo(trace.config, out_dir / "config.txt")
    if rc["output.svg"]:
        write_plots(trace, out_dir, monitors)

    print(f"status: {status.tag} at tau={status.tau_stop:.6g}")
    if status.blowup_estimate is not None:
        print(f"blow-up estimate: {status.blowup_estimate:.6g}")
    if report is not None and report.T_star_thm is not None:
        print(f"certificate bound: {report.T_star_thm:.6g} (valid: {report.valid})")
    print(f"outputs written to {out_dir}")
    return STATUS_EXIT[status.tag]


def cmd_certify(path: str) -> int:
    """Print the certificate report as JSON; 0 when every hypothesis holds."""
    rc = _load(path)
    if rc is None:
        return EXIT_CONFIG
    params, spec = rc.params(), rc.spec()

    try:
        if rc["init.kind"] == "synthetic_cert":
            inputs = CertificateInputs(b=params.b, m=params.m, alpha=rc.alpha, T0=rc["cert.T0"],
                                       u0_norm_sq=rc["cert.u0_norm_sq"], corr=rc["cert.corr"],
                                       E0=rc["cert.E0"], I_u0=rc["cert.I_u0"])
        else:
            data = prepare_data(rc, rc.grid(), params, spec)
            if not data["success"]:
                print(json.dumps({"success": False, "error": data["error"]}, indent=2))
                return data["exit_code"]
            inputs = CertificateInputs.from_fields(data["u0"], data["u1"], params, spec, rc["cert.T0"])
        report = certificate(inputs)
    except HypothesisError as e:
        print(json.dumps({"success": False, "error": str(e)}, indent=2))
        return EXIT_CERTIFICATE

    print(json.dumps(json_safe(report.to_dict()), indent=2))
    return EXIT_OK if report.valid else EXIT_CERTIFICATE


def cmd_convergence(levels: List[int], kappa: float = 1.0) -> int:
    """Manufactured-solution ladder; 0 iff the observed order lies in [1.8, 2.2]."""
    try:
        result = convergence_study(levels, kappa=kappa)
    except InputError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(result.table())
    return EXIT_OK if 1.8 <= result.order <= 2.2 else EXIT_FAILED


def cmd_selftest() -> int:
    results = run_selftest()
    print(format_table(results))
    return EXIT_OK if all(r["success"] for r in results) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.main",
                                     description="Damped Klein-Gordon blow-up lab on the Heisenberg group")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="integrate a run config")
    simulate.add_argument("config")
    certify = commands.add_parser("certify", help="evaluate the blow-up certificate")
    certify.add_argument("config")
    convergence = commands.add_parser("convergence", help="manufactured-solution refinement study")
    convergence.add_argument("--levels", type=int, nargs="+", default=[17, 33, 65])
    convergence.add_argument("--kappa", type=float, default=1.0)
    commands.add_parser("selftest", help="fast invariant suite")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # Validate configuration
    try:
        Config.validate()
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=Config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    if args.command == "simulate":
        return cmd_simulate(args.config)
    if args.command == "certify":
        return cmd_certify(args.config)
    if args.command == "convergence":
        return cmd_convergence(args.levels, args.kappa)
    return cmd_selftest()


if __name__ == '__main__':
    sys.exit(main())
