"""
Run artifacts: trace CSV, summary JSON, config echo and optional SVG plots.

Every artifact carries the normalized config echo verbatim. CSV floats use
%.17g so that repeated runs produce identical bytes.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from app.models.errors import InputError  # noqa: E402
from app.models.functionals import CertificateReport, MonitorSeries, Trace  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("step", "tau", "l2_u_sq", "linf_u", "l2_v_sq", "gradh_sq", "F_int",
               "E", "I", "A", "M", "diss_residual", "eta", "Q")
SUMMARY_CERT_KEYS = ("valid", "mu", "omega", "sigma", "T_star_thm", "T_star_M",
                     "I_u0", "E0", "corr", "corr_threshold")
PLOTS = {"E": "E", "I": "I", "A": "A", "M": "M", "linf": "linf_u"}

plt.rcParams["svg.hashsalt"] = "hkg-trace"


def _echo_lines(config: str) -> str:
    return "".join(f"# {line}\n" for line in config.splitlines())


def trace_table(trace: Trace, monitors: Optional[MonitorSeries] = None) -> np.ndarray:
    """Rows x CSV_COLUMNS; eta and Q are NaN without monitors."""
    nan = np.full(len(trace), np.nan)
    columns = []
    for name in CSV_COLUMNS:
        if name in ("eta", "Q"):
            columns.append(getattr(monitors, name) if monitors is not None else nan)
        else:
            columns.append(trace.column(name))
    return np.column_stack(columns) if len(trace) else np.empty((0, len(CSV_COLUMNS)))


def write_trace_csv(trace: Trace, path: Union[str, Path], monitors: Optional[MonitorSeries] = None) -> Path:
    path = Path(path)
    table = trace_table(trace, monitors)
    with open(path, "w") as handle:
        handle.write(_echo_lines(trace.config))
        handle.write(",".join(CSV_COLUMNS) + "\n")
        if table.shape[0]:
            np.savetxt(handle, table, fmt=["%d"] + ["%.17g"] * (len(CSV_COLUMNS) - 1), delimiter=",")
    logger.debug("wrote %d trace rows to %s", table.shape[0], path)
    return path


def json_safe(value: Any) -> Any:
    """JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def energy_drift(trace: Trace) -> Optional[float]:
    if len(trace) == 0:
        return None
    E = trace.column("E")
    scale = abs(E[0]) if E[0] != 0 else 1.0
    return float(np.max(np.abs(E - E[0])) / scale)


def build_summary(trace: Trace, report: Optional[CertificateReport] = None,
                  monitor_summary: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    status = trace.status
    if status is None:
        raise InputError("trace has no run status")
    certificate = None
    if report is not None:
        full = report.to_dict()
        certificate = {key: full[key] for key in SUMMARY_CERT_KEYS}
    monitors = None
    if monitor_summary is not None:
        monitors = dict(monitor_summary)
    summary = {
        "status": status.tag,
        "tau_stop": status.tau_stop,
        "blowup_estimate": status.blowup_estimate,
        "tau_detect": status.tau_detect,
        "steps": status.steps,
        "halvings": status.halvings,
        "certificate": certificate,
        "energy_drift_rel": energy_drift(trace),
        "monitors": monitors,
        "config": trace.config,
    }
    if status.message:
        summary["message"] = status.message
    return json_safe(summary)


def write_summary_json(summary: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w") as handle:
        json.dump(json_safe(summary), handle, indent=2)
        handle.write("\n")
    return path


def write_config_echo(config: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(config)
    return path


def write_plots(trace: Trace, out_dir: Union[str, Path], monitors: Optional[MonitorSeries] = None) -> Dict[str, Path]:
    """One line chart per quantity vs tau; M comes from the monitors when given."""
    out_dir = Path(out_dir)
    taus = trace.taus
    written = {}
    for label, column in PLOTS.items():
        values = monitors.M if (label == "M" and monitors is not None) else trace.column(column)
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(taus, values, linewidth=1.2)
        ax.set_xlabel("tau")
        ax.set_ylabel(label)
        if label == "linf" and values.size and np.all(values > 0):
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        path = out_dir / f"{label}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written[label] = path
    logger.debug("wrote %d plots to %s", len(written), out_dir)
    return written
