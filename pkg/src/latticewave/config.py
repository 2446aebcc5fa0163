"""JSON experiment configuration: schema validation, defaults, builders."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

import jsonschema

from .integrator import auto_dt
from .lattice import (
    InitialData,
    Profile,
    build_boundary_riemann,
    build_riemann,
    smooth_ramp,
)
from .potentials import PotentialSpec, PowerLaw, Quadratic, Toda, XQuadratic

__all__ = [
    "EXPERIMENTS",
    "DYNAMIC",
    "THRESHOLD_DEFAULTS",
    "PARAM_DEFAULTS",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "build_potential",
    "build_data",
]

EXPERIMENTS = (
    "simulate",
    "riemann_compare",
    "linear_convergence",
    "nonlinear_oscillation",
    "light_cone",
    "blowup",
    "shock_obstruction",
    "identity_check",
)
DYNAMIC = ("simulate", "riemann_compare", "linear_convergence", "nonlinear_oscillation", "identity_check")
NEEDS_DATA = DYNAMIC + ("light_cone",)

THRESHOLD_DEFAULTS: dict[str, dict[str, float]] = {
    "simulate": {"energy_drift_max": 1e-4},
    "riemann_compare": {"rh_residual_max": 1e-10},
    "linear_convergence": {},
    "nonlinear_oscillation": {
        "amp_ratio_min": 0.5,
        "amp_ratio_max": 2.0,
        "control_decay_min": 2.0,
        "iqr_ratio_min": 0.8,
        "energy_margin_min": 0.01,
        "hull_change_max": 0.1,
    },
    "light_cone": {"gronwall_margin_min": 0.0},
    "blowup": {"growth_min": 10.0, "verlet_rel_tol": 0.05},
    "shock_obstruction": {"R_affine_tol": 1e-14, "root_tol": 1e-12},
    "identity_check": {"refinement_ratio_min": 2.0, "roundoff_floor": 1e-12},
}

PARAM_DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {"ordering_check": False, "energy_every": None},
    "riemann_compare": {"field_samples": 401},
    "linear_convergence": {"smooth_check": True},
    "nonlinear_oscillation": {"window": None, "control_window": None, "hist_tau": None, "bins": 40},
    "light_cone": {
        "x": 0.75,
        "tau": None,
        "tau_fraction": 0.5,
        "base_u": None,
        "gronwall": {"potential": "quadratic", "N": 64, "amplitude": 0.5, "t_max": 20.0, "j_max": 40, "dt": 1e-4, "sample_dt": 0.1},
    },
    "blowup": {"tau0": 0.4, "verlet_N": 256, "verlet_dt": 1e-4},
    "shock_obstruction": {"u_range": [0.1, 3.0], "pairs": 100, "c_values": [0.1, 0.2, 0.5], "c_grid": 50},
    "identity_check": {"snapshots": 64, "levels": 2},
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class ExperimentConfig:
    experiment: str
    potential: PotentialSpec
    data: Optional[InitialData]
    N_list: list
    T: float
    dt: Optional[float]  # None only for experiments without a default dynamic run
    dt_auto: bool
    output_dir: str
    snapshots: list
    workers: int
    params: dict
    thresholds: dict
    raw: dict = field(repr=False, default_factory=dict)
    derived: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _schema() -> dict:
    text = resources.files("latticewave").joinpath("config_schema.json").read_text()
    return json.loads(text)


def _path(err: jsonschema.ValidationError) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (("." if parts else "") + str(p)))
    return "".join(parts) or "<root>"


def build_potential(desc: dict) -> PotentialSpec:
    kind = desc["kind"]
    dom = tuple(desc["domain"]) if "domain" in desc else None
    kw = {"domain": dom} if dom else {}
    if kind == "quadratic":
        return Quadratic(**kw)
    if kind == "power_law":
        return PowerLaw(float(desc["exponent"]), float(desc.get("A", 1.0)), float(desc.get("B", 0.0)), **kw)
    if kind == "toda":
        return Toda(**kw)
    if kind == "x_quadratic":
        return XQuadratic(list(desc["A"]), list(desc["B"]), **kw)
    raise ConfigError(f"unknown potential kind {kind!r}", "potential.kind")


def build_data(desc: dict) -> InitialData:
    kind = desc["kind"]
    if kind == "riemann":
        return build_riemann(desc["u_l"], desc["u_r"], desc.get("v_l", 0.0), desc.get("v_r", 0.0))
    if kind == "boundary_riemann":
        ix = desc.get("interior_x")
        if ix == "smooth":
            ix = smooth_ramp(desc["u_l"], desc["u_r"])
        elif ix is not None:
            ix = Profile.from_config(ix).pieces
        it = desc.get("interior_tau")
        it = Profile.from_config(it).pieces if it is not None else None
        return build_boundary_riemann(desc["u_l"], desc["u_r"], ix, it)
    if kind == "profiles":
        return InitialData(
            Profile.from_config(desc["phi0_x"]),
            Profile.from_config(desc["phi0_tau"]),
            float(desc["phi_l"]),
            float(desc["phi_r"]),
            desc.get("boundary", "dirichlet"),
        )
    raise ConfigError(f"unknown data kind {kind!r}", "data.kind")


def _merge(defaults: dict, given: dict, where: str) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if k not in defaults:
            raise ConfigError(f"unknown key {k!r}", f"{where}.{k}")
        if isinstance(defaults[k], dict) and isinstance(v, dict):
            out[k] = _merge(defaults[k], v, f"{where}.{k}")
        else:
            out[k] = v
    return out


def parse_config(text: str, env_workers: Optional[str] = None) -> ExperimentConfig:
    """Validate a JSON config and apply defaults.

    Raises ConfigError naming the offending field.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON ({e.msg} at line {e.lineno} column {e.colno})") from None
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), _path(e)))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _path(e))

    exp = raw["experiment"]
    N_list = [int(n) for n in raw["N_list"]]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ConfigError("must be strictly ascending", "N_list")
    try:
        potential = build_potential(raw["potential"])
    except (ValueError, TypeError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), "potential") from None

    data = None
    if "data" in raw:
        try:
            data = build_data(raw["data"])
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as e:
            raise ConfigError(str(e), "data") from None
    elif exp in NEEDS_DATA:
        raise ConfigError("required for this experiment", "data")

    T = float(raw.get("T", 0.0))
    if exp in DYNAMIC and not T > 0:
        raise ConfigError("must be > 0 for dynamic experiments", "T")

    derived: dict = {}
    if data is not None:
        lo, hi = data.gap_hull()
        derived["gap_hull"] = [lo, hi]
        dom = getattr(potential, "domain", None)
        if dom is not None and (lo < dom[0] - 1e-12 or hi > dom[1] + 1e-12):
            raise ConfigError(f"initial gaps [{lo}, {hi}] leave the potential domain {list(dom)}", "data")
        if potential.needs_x is False and exp != "simulate":
            d2 = [float(potential.d2W(u)) for u in (lo, hi, 0.5 * (lo + hi))]
            if min(d2) <= 0:
                raise ConfigError("W'' must be positive on the initial gap range", "data")

    dt_raw = raw.get("dt", "auto")
    dt_auto = dt_raw == "auto"
    if dt_auto:
        if data is not None:
            dt = auto_dt(potential, derived["gap_hull"])
        else:
            dt = 1e-3
        derived["dt_rule"] = "min(1e-3, 0.1/sqrt(max W'' over the initial gap range))"
    else:
        dt = float(dt_raw)
    derived["dt"] = dt

    snaps = raw.get("snapshots", 16)
    if isinstance(snaps, int):
        snaps = [T * k / snaps for k in range(snaps + 1)] if T > 0 else [0.0]
    else:
        snaps = sorted(float(s) for s in snaps)
        if any(s > T + 1e-12 for s in snaps):
            raise ConfigError("snapshot times must lie in [0, T]", "snapshots")
    derived["snapshots"] = snaps

    workers = int(raw.get("workers", 1))
    if env_workers:
        try:
            workers = max(1, int(env_workers))
        except ValueError:
            raise ConfigError(f"LATTICEWAVE_WORKERS={env_workers!r} is not an integer") from None
    derived["workers"] = workers

    params = _merge(PARAM_DEFAULTS[exp], raw.get("params", {}), "params")
    thresholds = _merge(THRESHOLD_DEFAULTS[exp], raw.get("thresholds", {}), "thresholds")
    for k, v in thresholds.items():
        if not math.isfinite(v):
            raise ConfigError("must be finite", f"thresholds.{k}")

    return ExperimentConfig(
        experiment=exp,
        potential=potential,
        data=data,
        N_list=N_list,
        T=T,
        dt=dt,
        dt_auto=dt_auto,
        output_dir=raw.get("output_dir", f"latticewave_out/{exp}"),
        snapshots=snaps,
        workers=workers,
        params=params,
        thresholds=thresholds,
        raw=raw,
        derived=derived,
    )


def load_config(path, env_workers: Optional[str] = None) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), env_workers)
