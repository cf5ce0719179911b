"""Config loading: arm geometry files and named parameter sets.

Arm files (YAML) hold the DH table (standard distal convention, meters and
radians, one record per joint), joint/velocity/acceleration limits, the reach
radius, a home configuration, and the collision-sphere set (one record per
sphere). Parameter-set files hold objective weights, horizon, and solver
settings. The named sets ``P1`` (tracking focus, w3 = 0) and ``P2`` (slosh
suppression, w3 = 10) ship with the package.

Lookup order for a name like ``P1`` or ``ur5e_like``: an existing filesystem
path wins; otherwise ``$STEADYARM_CONFIG_ROOT/<name>.yaml`` if the variable is
set; otherwise the packaged defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .constraints import Limits
from .cost import Weights
from .kinematics import ConfigurationError, DhTable, SphereSpec

ENV_CONFIG_ROOT = "STEADYARM_CONFIG_ROOT"


@dataclass(frozen=True)
class SolverSettings:
    max_iters: int = 30
    tol_stationarity: float = 1e-4
    tol_feasibility: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 0 or self.tol_stationarity <= 0 or self.tol_feasibility <= 0:
            raise ConfigurationError("invalid solver settings")


@dataclass(frozen=True)
class ArmConfig:
    name: str
    dh: DhTable
    limits: Limits
    spheres: list[SphereSpec]
    reach: float
    q_home: np.ndarray

    def __post_init__(self):
        if self.reach <= 0:
            raise ConfigurationError("reach must be positive")
        if len(self.q_home) != self.dh.n_q:
            raise ConfigurationError("q_home length must match DH table")


@dataclass(frozen=True)
class ParamSet:
    name: str
    weights: Weights
    dt: float = 0.05
    N: int = 8
    solver: SolverSettings = field(default_factory=SolverSettings)
    twist_window: int = 5

    def __post_init__(self):
        if self.dt <= 0 or self.N < 1 or self.twist_window < 2:
            raise ConfigurationError("invalid horizon or window")


def _resolve(name: str, default_package_file: str | None = None) -> Path:
    p = Path(name)
    if p.exists():
        return p
    root = os.environ.get(ENV_CONFIG_ROOT)
    if root:
        cand = Path(root) / f"{name}.yaml"
        if cand.exists():
            return cand
    fname = default_package_file or f"{name}.yaml"
    pkg_path = resources.files("steadyarm").joinpath("data").joinpath(fname)
    if pkg_path.is_file():
        return Path(str(pkg_path))
    raise ConfigurationError(f"no config named {name!r} (looked for a path, "
                             f"${ENV_CONFIG_ROOT}, and packaged defaults)")


def _load_yaml(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return data


def default_reach(dh: DhTable) -> float:
    """0.95 x the summed DH link lengths; used when a file omits `reach`."""
    return 0.95 * float(np.sum(np.hypot(dh.a, dh.d)))


def load_arm(name: str = "ur5e_like") -> ArmConfig:
    path = _resolve(name)
    data = _load_yaml(path)
    try:
        rows = data["dh"]
        dh = DhTable(
            a=[r["a"] for r in rows],
            d=[r["d"] for r in rows],
            alpha=[r["alpha"] for r in rows],
            theta_offset=[r.get("theta_offset", 0.0) for r in rows],
        )
        lim = data["limits"]
        limits = Limits(
            q_min=lim["q_min"], q_max=lim["q_max"],
            qd_min=lim["qd_min"], qd_max=lim["qd_max"],
            u_min=lim["u_min"], u_max=lim["u_max"],
        )
        spheres = [
            SphereSpec(sphere_id=str(s["id"]), link_index=int(s["link"]),
                       local_center=s["center"], radius=float(s["radius"]))
            for s in data.get("spheres", [])
        ]
        reach = float(data.get("reach", default_reach(dh)))
        q_home = np.asarray(data.get("home_q", np.zeros(dh.n_q)), dtype=float)
        return ArmConfig(name=str(data.get("name", path.stem)), dh=dh, limits=limits,
                         spheres=spheres, reach=reach, q_home=q_home)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def load_params(name: str = "P2") -> ParamSet:
    path = _resolve(name, default_package_file=f"params/{name}.yaml")
    data = _load_yaml(path)
    try:
        w = data["weights"]
        weights = Weights(w1p=w["w1p"], w1o=float(w["w1o"]), w2a=w["w2a"],
                          w2b=w["w2b"], w3=float(w["w3"]))
        hz = data.get("horizon", {})
        sv = data.get("solver", {})
        return ParamSet(
            name=str(data.get("name", path.stem)),
            weights=weights,
            dt=float(hz.get("dt", 0.05)),
            N=int(hz.get("N", 8)),
            solver=SolverSettings(
                max_iters=int(sv.get("max_iters", 30)),
                tol_stationarity=float(sv.get("tol_stationarity", 1e-4)),
                tol_feasibility=float(sv.get("tol_feasibility", 1e-6)),
            ),
            twist_window=int(data.get("prediction", {}).get("window", 5)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
