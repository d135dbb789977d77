"""Physical link-joint parameters and their dimensionless counterparts.

A link-joint is described by one JSON file whose keys mirror the physical
symbols (``E_star``, ``G_star``, ...).  An n-link robot is an ordered list of
such files.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class ParamsError(ValueError):
    """Raised for malformed or physically inadmissible parameter sets."""


@dataclass(frozen=True)
class PhysicalLinkJointParams:
    E_star: float  # Young's modulus [Pa]
    G_star: float  # shear modulus [Pa]
    rho_star: float  # density [kg/m^3]
    A_star: float  # cross-section area [m^2]
    I_star: float  # area moment of inertia [m^4]
    k_prime: float  # shear coefficient
    omega0_star: float  # scaling frequency, used as given
    L_star: float  # link length [m]
    R_star: float  # joint disk radius [m]
    J_star: float  # joint inertia [kg m^2]
    m_star: float  # tip mass [kg]
    c_star: float  # joint damping coefficient (signed)
    Kt: float = 1.0  # motor torque constant [N m / A]
    Lw_star: float = 1.0  # link thickness [m]

    _POSITIVE = ("E_star", "G_star", "rho_star", "A_star", "I_star", "L_star",
                 "omega0_star", "R_star", "J_star", "m_star", "Lw_star")

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParamsError(f"{f.name} must be a finite number, got {v!r}")
        for name in self._POSITIVE:
            if getattr(self, name) <= 0:
                raise ParamsError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        if not 0 < self.k_prime <= 1:
            raise ParamsError(f"k_prime must lie in (0, 1], got {self.k_prime!r}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


@dataclass(frozen=True)
class DimensionlessParams:
    """Dimensionless constants of one link-joint.

    ``b`` may be set to zero by hand (``dataclasses.replace``) to obtain the
    degenerate shear-free case used as an analytic oracle; everything else
    requires ``b > 0``.
    """

    A: float
    I: float
    R: float
    G: float
    rho: float
    J: float
    c: float
    m: float
    k_prime: float
    epsilon: float
    mu: float
    a: float
    b: float
    L_star: float = 1.0
    Lw: float = 1.0  # thickness scaled by L_star
    slender: bool = True  # the control design neglects mu

    @property
    def sqrt_eps(self) -> float:
        return math.sqrt(self.epsilon)

    @property
    def A_mat(self) -> np.ndarray:
        return np.array([[-self.sqrt_eps / self.m, 0.0], [1.0, 0.0]])

    @property
    def B_vec(self) -> np.ndarray:
        return np.array([1.0 / self.m, 0.0])

    @property
    def C_row(self) -> np.ndarray:
        return np.array([2.0 * self.sqrt_eps, 0.0])

    @property
    def D_vec(self) -> np.ndarray:
        return np.array([-(1.0 + self.R), 0.0])

    def with_b(self, b: float) -> "DimensionlessParams":
        """Copy with the shear coupling replaced (``a`` adjusted to keep b^2 eps = a)."""
        return dataclasses.replace(self, b=float(b), a=float(b) ** 2 * self.epsilon)

    def fingerprint(self) -> tuple:
        return (self.b, self.epsilon, self.R, self.m, self.J, self.c)


def nondimensionalize(p: PhysicalLinkJointParams) -> DimensionlessParams:
    L = p.L_star
    EI = p.E_star * p.I_star
    w2 = p.omega0_star ** 2
    A = p.A_star / L ** 2
    I = p.I_star / L ** 4
    R = p.R_star / L
    G = p.G_star * L ** 4 / EI
    rho = p.rho_star * L ** 6 * w2 / EI
    J = p.J_star * w2
    c = p.c_star * p.omega0_star
    m = p.m_star * L * w2 / EI
    epsilon = rho / (p.k_prime * G)
    a = A * rho
    b = math.sqrt(a / epsilon)
    return DimensionlessParams(
        A=A, I=I, R=R, G=G, rho=rho, J=J, c=c, m=m, k_prime=p.k_prime,
        epsilon=epsilon, mu=rho * I, a=a, b=b, L_star=L, Lw=p.Lw_star / L,
    )


_FIELDS = {f.name for f in dataclasses.fields(PhysicalLinkJointParams)}
_REQUIRED = {f.name for f in dataclasses.fields(PhysicalLinkJointParams)
             if f.default is dataclasses.MISSING}


def params_from_dict(d: dict) -> PhysicalLinkJointParams:
    if not isinstance(d, dict):
        raise ParamsError("parameter file must contain a JSON object")
    body = {k: v for k, v in d.items() if k not in ("name", "description")}
    unknown = sorted(set(body) - _FIELDS)
    if unknown:
        raise ParamsError(f"unknown keys: {', '.join(unknown)}")
    missing = sorted(_REQUIRED - set(body))
    if missing:
        raise ParamsError(f"missing keys: {', '.join(missing)}")
    return PhysicalLinkJointParams(**{k: float(v) if isinstance(v, int) else v
                                      for k, v in body.items()})


def bundled_config(name: str) -> Path:
    path = resources.files("flexbeam") / "configs" / f"{name}.json"
    return Path(str(path))


def load_params(path) -> PhysicalLinkJointParams:
    """Read a link-joint JSON file; a bare name resolves to a bundled config."""
    path = Path(path)
    if not path.exists() and path.suffix == "" and bundled_config(path.name).exists():
        path = bundled_config(path.name)
    text = path.read_text()
    if not text.strip():
        raise ParamsError(f"missing keys: {', '.join(sorted(_REQUIRED))}")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParamsError(f"cannot parse {path}: {exc}") from exc
    return params_from_dict(d)


def save_params(p: PhysicalLinkJointParams, path) -> None:
    Path(path).write_text(json.dumps(p.to_dict(), indent=2) + "\n")
