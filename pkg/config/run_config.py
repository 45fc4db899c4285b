"""Flat `key = value` run configuration with a canonical echo."""
import logging
from pathlib import Path
from typing import Any, Dict, Union

from app.models.grid import BOUNDARY_CONDITIONS, BoxGrid
from app.models.nonlinearity import NonlinearSpec, PhysParams

logger = logging.getLogger(__name__)

INIT_KINDS = ("gaussian", "constant", "eigenmode", "synthetic_cert")

# key -> (type, default); the order here is the order of the echo
KEYS = {
    "n": (int, 1),
    "bc": (str, "dirichlet"),
    "grid.N_x": (int, 33),
    "grid.N_y": (int, 33),
    "grid.N_s": (int, 33),
    "grid.L_xy": (float, 6.0),
    "grid.L_s": (float, 12.0),
    "phys.b": (float, 1.0),
    "phys.m": (float, 1.0),
    "nonlin.kind": (str, "power"),
    "nonlin.p": (float, 2.0),
    "nonlin.kappa": (float, 1.0),
    "init.kind": (str, "gaussian"),
    "init.amplitude": (float, 1.0),
    "init.width": (float, 1.0),
    "init.center_s": (float, 0.0),
    "init.velocity_ratio": (float, 1.0),
    "init.prepare": (bool, False),
    "init.mode": (int, 0),
    "cert.T0": (float, 1.0),
    "cert.alpha": (float, 0.0),
    "cert.u0_norm_sq": (float, 1.0),
    "cert.corr": (float, 4.0),
    "cert.E0": (float, 0.25),
    "cert.I_u0": (float, -1.0),
    "time.cfl_fraction": (float, 0.5),
    "time.t_end": (float, 2.0),
    "time.output_every": (int, 1),
    "time.growth_tolerance": (float, 0.05),
    "time.max_halvings": (int, 20),
    "blowup.linf_threshold": (float, 1e6),
    "blowup.fit_window": (int, 20),
    "output.dir": (str, ""),
    "output.svg": (bool, False),
}

_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


class ConfigError(ValueError):
    """Run configuration could not be parsed or validated."""


def _parse_value(key: str, raw: str) -> Any:
    kind = KEYS[key][0]
    if kind is bool:
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}")


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunConfig:
    def __init__(self, values: Dict[str, Any] = None):
        self.values = {key: default for key, (_, default) in KEYS.items()}
        for key, value in (values or {}).items():
            if key not in KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            self.values[key] = value

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in KEYS:
                raise ConfigError(f"line {lineno}: unknown config key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
            values[key] = _parse_value(key, raw)
        config = cls(values)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        logger.debug("parsing run config %s", path)
        return cls.from_text(text)

    def validate(self):
        v = self.values
        errors = []
        if v["n"] < 1:
            errors.append("n must be >= 1")
        if v["bc"] not in BOUNDARY_CONDITIONS:
            errors.append(f"bc must be one of {BOUNDARY_CONDITIONS}")
        for key in ("grid.N_x", "grid.N_y", "grid.N_s"):
            if v[key] < 4:
                errors.append(f"{key} must be >= 4")
        for key in ("grid.L_xy", "grid.L_s"):
            if not v[key] > 0:
                errors.append(f"{key} must be positive")
        for key in ("phys.b", "phys.m", "nonlin.kappa"):
            if not v[key] >= 0:
                errors.append(f"{key} must be >= 0")
        if v["nonlin.kind"] != "power":
            errors.append("nonlin.kind must be 'power' (custom nonlinearities are API-only)")
        if not v["nonlin.p"] > 1:
            errors.append("nonlin.p must exceed 1")
        if v["init.kind"] not in INIT_KINDS:
            errors.append(f"init.kind must be one of {INIT_KINDS}")
        if v["init.kind"] == "eigenmode" and v["bc"] != "mixed":
            errors.append("init.kind = eigenmode needs bc = mixed")
        if not v["init.width"] > 0:
            errors.append("init.width must be positive")
        if not v["init.velocity_ratio"] >= 0:
            errors.append("init.velocity_ratio must be >= 0")
        if v["init.prepare"] and v["init.kind"] != "gaussian":
            errors.append("init.prepare needs init.kind = gaussian")
        if v["init.mode"] < 0:
            errors.append("init.mode must be >= 0")
        if not v["cert.T0"] > 0:
            errors.append("cert.T0 must be positive")
        if not v["cert.alpha"] >= 0:
            errors.append("cert.alpha must be >= 0 (0 derives it from the nonlinearity)")
        if not 0 < v["time.cfl_fraction"] <= 1:
            errors.append("time.cfl_fraction must lie in (0, 1]")
        if not v["time.t_end"] >= 0:
            errors.append("time.t_end must be >= 0")
        if v["time.output_every"] < 1:
            errors.append("time.output_every must be >= 1")
        if not v["time.growth_tolerance"] > 0:
            errors.append("time.growth_tolerance must be positive")
        if v["time.max_halvings"] < 0:
            errors.append("time.max_halvings must be >= 0")
        if not v["blowup.linf_threshold"] > 0:
            errors.append("blowup.linf_threshold must be positive")
        if v["blowup.fit_window"] < 8:
            errors.append("blowup.fit_window must be >= 8")

        if errors:
            raise ConfigError("invalid run config: " + "; ".join(errors))

    def normalized(self) -> str:
        return "\n".join(f"{key} = {_format_value(self.values[key])}" for key in KEYS) + "\n"

    def grid(self) -> BoxGrid:
        v = self.values
        return BoxGrid(n=v["n"], N_x=v["grid.N_x"], N_y=v["grid.N_y"], N_s=v["grid.N_s"],
                       L_xy=v["grid.L_xy"], L_s=v["grid.L_s"], bc=v["bc"])

    def params(self) -> PhysParams:
        return PhysParams(b=self.values["phys.b"], m=self.values["phys.m"])

    def spec(self) -> NonlinearSpec:
        return NonlinearSpec.power(self.values["nonlin.p"], self.values["nonlin.kappa"])

    @property
    def alpha(self) -> float:
        return self.values["cert.alpha"] or self.spec().alpha
