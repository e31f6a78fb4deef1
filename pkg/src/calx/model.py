"""Model definitions: parameter sets, stress laws, state records, and right-hand sides.

Two ODE models share a parameter record:

* the two-variable calcium model in (c, h): cytosolic calcium and the
  fraction of non-inactivated receptors,
* its three-variable mechanochemical extension in (c, theta, h), where
  theta is the cell/tissue dilatation and a stretch-activation source
  ``lam * theta`` feeds back into the calcium flux.

All records are immutable values and every function here is pure, so
everything is safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

import numpy as np
from numba import njit

__all__ = [
    "StressKind",
    "StressLaw",
    "DimensionalParams",
    "ModelParams",
    "VdpParams",
    "State2",
    "State3",
    "DEFAULT_PARAMS",
    "stress_eval",
    "stress_derivative",
    "nondimensionalize",
    "rhs_atri",
    "rhs_mech",
    "rhs_vdp",
    "viscoelastic_reduction",
    "params_from_json",
    "params_to_json",
]


class StressKind(Enum):
    """Functional form of the calcium-induced stress T(c)."""

    NONE = 0
    HILL1 = 1
    HILL2 = 2


@dataclass(frozen=True)
class StressLaw:
    """Calcium-induced stress T(c), nondecreasing with T(0) = 0.

    HILL1: T(c) = alpha*c / (1 + alpha*c)
    HILL2: T(c) = alpha*c^2 / (1 + alpha*c^2)
    NONE:  T(c) = 0

    Both Hill forms saturate at T_s = 1 for large c; ``alpha`` sets the
    rate of ascent (1/alpha is the half-saturation scale for HILL1).
    """

    kind: StressKind = StressKind.NONE
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind is not StressKind.NONE and not self.alpha > 0:
            raise ValueError(f"stress gain alpha must be > 0, got {self.alpha}")

    @property
    def saturation(self) -> float:
        """Limit of T(c) as c -> infinity."""
        return 0.0 if self.kind is StressKind.NONE else 1.0

    @staticmethod
    def none() -> "StressLaw":
        return StressLaw(StressKind.NONE)

    @staticmethod
    def hill1(alpha: float) -> "StressLaw":
        return StressLaw(StressKind.HILL1, alpha)

    @staticmethod
    def hill2(alpha: float) -> "StressLaw":
        return StressLaw(StressKind.HILL2, alpha)


def stress_eval(s: StressLaw, c):
    """Evaluate T(c) for scalar or array ``c >= 0``."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("stress law evaluated at negative calcium concentration")
    if s.kind is StressKind.HILL1:
        out = s.alpha * c / (1.0 + s.alpha * c)
    elif s.kind is StressKind.HILL2:
        out = s.alpha * c * c / (1.0 + s.alpha * c * c)
    else:
        out = np.zeros_like(c)
    return out if out.ndim else float(out)


def stress_derivative(s: StressLaw, c):
    """Evaluate T'(c); analytic for both Hill laws."""
    c = np.asarray(c, dtype=float)
    if s.kind is StressKind.HILL1:
        out = s.alpha / (1.0 + s.alpha * c) ** 2
    elif s.kind is StressKind.HILL2:
        out = 2.0 * s.alpha * c / (1.0 + s.alpha * c * c) ** 2
    else:
        out = np.zeros_like(c)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DimensionalParams:
    """Dimensional parameter set for the two-variable calcium model.

    Units: concentrations in uM, fluxes in uM/s, times in s.  ``beta`` is
    the leak flux into the cytosol; it is dropped by the nondimensional
    reduction used throughout (the nondimensional system is implemented
    exactly as printed, with no leak term) and is retained here only for
    documentation.
    """

    k1: float = 0.7        # flux-activation concentration scale (uM)
    k2: float = 0.7        # receptor-inactivation scale (uM)
    b: float = 0.111       # baseline channel-open fraction
    gamma: float = 2.0     # maximal pump rate (uM/s)
    k_f: float = 16.2      # maximal channel flux (uM/s)
    k_gamma: float = 0.1   # pump half-saturation (uM)
    k_mu: float = 0.7      # IP3 binding half-saturation (uM)
    tau_h: float = 2.0     # receptor inactivation timescale (s)
    beta: float = 0.0      # leak flux (uM/s), documentation only
    p: float = 0.3         # IP3 concentration (uM)

    def __post_init__(self):
        for name in ("k1", "k2", "gamma", "k_f", "k_gamma", "k_mu", "tau_h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.b < 1:
            raise ValueError(f"b must lie in (0, 1), got {self.b}")
        if self.beta < 0 or self.p < 0:
            raise ValueError("beta and p must be nonnegative")


@dataclass(frozen=True)
class ModelParams:
    """Nondimensional parameter set shared by both models.

    ``mu`` (IP3-receptor activation) and ``lam`` (stretch-activation gain)
    are the two bifurcation parameters.  ``lam = 0`` with a NONE stress law
    reproduces the pure two-variable model.  Defaults are the standard
    experimental values (K2 = 1, Gamma = 5.71429, K = 1/7, K1 = 46.285714).
    """

    mu: float = 0.3
    lam: float = 0.0
    K1: float = 46.285714
    K2: float = 1.0
    Gamma: float = 5.71429
    K: float = 1.0 / 7.0
    b: float = 0.111
    stress: StressLaw = field(default_factory=StressLaw.none)

    def __post_init__(self):
        for name in ("K1", "K2", "Gamma", "K"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.b < 1:
            raise ValueError(f"b must lie in (0, 1), got {self.b}")
        if self.mu < 0 or self.lam < 0:
            raise ValueError("mu and lam must be nonnegative")

    @property
    def eps(self) -> float:
        """Timescale ratio of the calcium dynamics, 1/K1."""
        return 1.0 / self.K1

    def with_(self, **kw) -> "ModelParams":
        """Copy with selected fields replaced."""
        return replace(self, **kw)

    def as_array(self) -> np.ndarray:
        """Pack into the flat float64 layout used by the compiled kernels."""
        return np.array(
            [self.mu, self.lam, self.K1, self.K2, self.Gamma, self.K, self.b,
             float(self.stress.kind.value), self.stress.alpha],
            dtype=np.float64,
        )


DEFAULT_PARAMS = ModelParams()


@dataclass(frozen=True)
class VdpParams:
    """Van der Pol reference oscillator dx/dt = (y + x - x^3/3)/eps, dy/dt = -eps*x."""

    epsilon: float = 0.025

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.epsilon] + [0.0] * 8, dtype=np.float64)


@dataclass(frozen=True)
class State2:
    """State of the two-variable model: calcium c >= 0 and receptor fraction h in [0, 1]."""

    c: float
    h: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"c must be nonnegative, got {self.c}")
        if not -1e-6 <= self.h <= 1 + 1e-6:
            raise ValueError(f"h must lie in [0, 1], got {self.h}")


@dataclass(frozen=True)
class State3:
    """State of the mechanochemical model; the dilatation theta is unconstrained in sign."""

    c: float
    theta: float
    h: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"c must be nonnegative, got {self.c}")
        if not -1e-6 <= self.h <= 1 + 1e-6:
            raise ValueError(f"h must lie in [0, 1], got {self.h}")


# --- compiled kernels shared with the integrator ---------------------------------

@njit(cache=True)
def _stress_kernel(kind, alpha, c):
    if kind == 1:
        return alpha * c / (1.0 + alpha * c)
    elif kind == 2:
        return alpha * c * c / (1.0 + alpha * c * c)
    return 0.0


@njit(cache=True)
def _rhs_atri_kernel(c, h, mu, K1, K2, Gam, K, b):
    dc = mu * h * K1 * (b + c) / (1.0 + c) - Gam * c / (K + c)
    dh = K2 * K2 / (K2 * K2 + c * c) - h
    return dc, dh


@njit(cache=True)
def _rhs_mech_kernel(c, th, h, mu, lam, K1, K2, Gam, K, b, kind, alpha):
    dc = mu * h * K1 * (b + c) / (1.0 + c) - Gam * c / (K + c) + lam * th
    dth = -th + _stress_kernel(kind, alpha, c)
    dh = K2 * K2 / (K2 * K2 + c * c) - h
    return dc, dth, dh


@njit(cache=True)
def _rhs_vdp_kernel(x, y, eps):
    return (y + x - x * x * x / 3.0) / eps, -eps * x


def rhs_atri(p: ModelParams, s: Union[State2, tuple]) -> tuple:
    """Right-hand side (dc/dt, dh/dt) of the two-variable model."""
    c, h = (s.c, s.h) if isinstance(s, State2) else s
    return _rhs_atri_kernel(c, h, p.mu, p.K1, p.K2, p.Gamma, p.K, p.b)


def rhs_mech(p: ModelParams, s: Union[State3, tuple]) -> tuple:
    """Right-hand side (dc/dt, dtheta/dt, dh/dt) of the mechanochemical model."""
    c, th, h = (s.c, s.theta, s.h) if isinstance(s, State3) else s
    return _rhs_mech_kernel(
        c, th, h, p.mu, p.lam, p.K1, p.K2, p.Gamma, p.K, p.b,
        p.stress.kind.value, p.stress.alpha,
    )


def rhs_vdp(p: VdpParams, s: tuple) -> tuple:
    """Right-hand side of the Van der Pol reference system."""
    return _rhs_vdp_kernel(s[0], s[1], p.epsilon)


def nondimensionalize(d: DimensionalParams, lam: float = 0.0,
                      stress: StressLaw | None = None) -> ModelParams:
    """Reduce a dimensional parameter set to the nondimensional one.

    Uses c = k1*cbar and t = tau_h*tbar, giving K1 = k_f*tau_h/k1,
    K2 = k2/k1, Gamma = gamma*tau_h/k1, K = k_gamma/k1 and
    mu = p/(k_mu + p).  The mechanical gain and stress law are not part of
    the dimensional record and are taken from the caller.
    """
    if stress is None:
        stress = StressLaw.none()
    return ModelParams(
        mu=d.p / (d.k_mu + d.p),
        lam=lam,
        K1=d.k_f * d.tau_h / d.k1,
        K2=d.k2 / d.k1,
        Gamma=d.gamma * d.tau_h / d.k1,
        K=d.k_gamma / d.k1,
        b=d.b,
        stress=stress,
    )


def viscoelastic_reduction(xi1: float, xi2: float, E: float, nu: float,
                           tau_scale: float = 1.0) -> tuple:
    """Rescaling factors of the 1D Kelvin-Voigt dilatation equation.

    Integrating the 1D stress balance and rescaling time and stress turns
    the dilatation dynamics into dtheta/dt = -theta + T(c); the constant of
    integration vanishes because traction, dilatation and its rate are all
    zero in the unstressed reference state.

    Returns
    -------
    (time_factor, stress_factor)
        time_factor = (1 + nu')/(xi1 + xi2) with nu' = nu/(1 - 2*nu);
        stress_factor = 1/(1 + nu').  ``E`` and ``tau_scale`` do not enter
        these leading-order factors (the elastic modulus is normalized into
        the time unit) and are accepted for interface completeness.
    """
    if not xi1 + xi2 > 0:
        raise ValueError("total viscosity xi1 + xi2 must be positive")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 1/2), got {nu}")
    nu_p = nu / (1.0 - 2.0 * nu)
    return (1.0 + nu_p) / (xi1 + xi2), 1.0 / (1.0 + nu_p)


# --- JSON parameter files ---------------------------------------------------------

_STRESS_KIND_NAMES = {
    "none": StressKind.NONE,
    "hill1": StressKind.HILL1,
    "hill2": StressKind.HILL2,
}


def params_from_json(text_or_dict) -> ModelParams:
    """Build ModelParams from a JSON document; missing keys keep the defaults.

    Recognized keys: "mu", "lambda", "K1", "K2", "Gamma", "K", "b" and
    "stress": {"kind": "none"|"hill1"|"hill2", "alpha": float}.
    """
    data = json.loads(text_or_dict) if isinstance(text_or_dict, str) else dict(text_or_dict)
    unknown = set(data) - {"mu", "lambda", "K1", "K2", "Gamma", "K", "b", "stress"}
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    kw = {}
    for key, attr in (("mu", "mu"), ("lambda", "lam"), ("K1", "K1"), ("K2", "K2"),
                      ("Gamma", "Gamma"), ("K", "K"), ("b", "b")):
        if key in data:
            kw[attr] = float(data[key])
    if "stress" in data:
        sd = data["stress"]
        kind = _STRESS_KIND_NAMES[str(sd.get("kind", "none")).lower()]
        kw["stress"] = StressLaw(kind, float(sd.get("alpha", 1.0)))
    return ModelParams(**kw)


def params_to_json(p: ModelParams) -> str:
    """Serialize ModelParams to the JSON layout accepted by params_from_json."""
    return json.dumps(
        {
            "mu": p.mu,
            "lambda": p.lam,
            "K1": p.K1,
            "K2": p.K2,
            "Gamma": p.Gamma,
            "K": p.K,
            "b": p.b,
            "stress": {"kind": p.stress.kind.name.lower(), "alpha": p.stress.alpha},
        },
        indent=2,
    )
