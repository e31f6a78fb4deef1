"""Steady states, linear stability, and the one-parameter bifurcation ladder.

Equilibria of both models satisfy a single scalar relation in c once the
other state variables are eliminated (h* = K2^2/(K2^2 + c*^2) and
theta* = T(c*)):

    mu*K1*h*(c)*(b + c)/(1 + c) - Gamma*c/(K + c) + lam*T(c) = 0

Roots are located by bracketing sign changes on a log-spaced grid over
[1e-8, 1e3] and refining with Brent's method, which is robust for every
stress law and avoids the cancellation-prone closed-form quartic.

Stability comes from the characteristic polynomial of the mechanochemical
Jacobian, which factorises as (1 + w) times the quadratic

    w^2 - w*(R1c - 1) - R1c - R1h*R3c - lam*T'(c) = 0,

so one eigenvalue is exactly -1 and the 2x2 block carries the trace,
determinant and discriminant used for classification.  With lam = 0 the
quadratic is the characteristic polynomial of the two-variable model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .model import ModelParams, rhs_atri, rhs_mech, stress_derivative, stress_eval

__all__ = [
    "StabilityClass",
    "Equilibrium",
    "EventKind",
    "LadderEvent",
    "BifurcationLadder",
    "Nullclines",
    "jacobian_block",
    "equilibrium_relation",
    "equilibria_atri",
    "equilibria_mech",
    "classify",
    "ladder_atri",
    "mu_on_branch",
    "nullclines_atri",
    "nullcline_max",
]

# Scan window and residual tolerance for root bracketing (see module docstring).
_C_LO, _C_HI, _N_SCAN = 1e-8, 1e3, 4000
RESIDUAL_TOL = 1e-9


class StabilityClass(Enum):
    STABLE_NODE = "stable_node"
    STABLE_SPIRAL = "stable_spiral"
    UNSTABLE_NODE = "unstable_node"
    UNSTABLE_SPIRAL = "unstable_spiral"
    SADDLE = "saddle"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class Equilibrium:
    """A classified steady state of either model.

    ``trace``, ``det`` and ``discr`` refer to the 2x2 block of the
    characteristic polynomial; for the three-variable model the eigenvalue
    list carries the extra exact -1.  ``residual`` is the max-norm of the
    model right-hand side at the reconstructed state.
    """

    c: float
    h: float
    theta: float
    trace: float
    det: float
    discr: float
    eigenvalues: tuple
    klass: StabilityClass
    residual: float
    model: str  # "atri" or "mech"


class EventKind(Enum):
    DISCR_ZERO = "discr"
    FOLD_DET_ZERO = "fold"
    HOPF_TR_ZERO = "hopf"


@dataclass(frozen=True)
class LadderEvent:
    mu: float
    kind: EventKind
    branch_c: float
    description: str


@dataclass(frozen=True)
class BifurcationLadder:
    """Ordered sign-change events of Tr, Det, Discr along the equilibrium branches."""

    mu_lo: float
    mu_hi: float
    events: tuple

    def of_kind(self, kind: EventKind) -> list:
        return [e for e in self.events if e.kind is kind]


@dataclass(frozen=True)
class Nullclines:
    """h-values of the flux (F=0) and gating (G=0) nullclines on a c-grid."""

    c: np.ndarray
    h_flux: np.ndarray
    h_gate: np.ndarray
    asymptote: float  # large-c limit Gamma/(mu*K1) of the flux nullcline


def equilibrium_relation(p: ModelParams, c):
    """Residual of the steady-state relation; its nonnegative roots are the c*."""
    c = np.asarray(c, dtype=float)
    hstar = p.K2 ** 2 / (p.K2 ** 2 + c * c)
    out = (p.mu * p.K1 * hstar * (p.b + c) / (1.0 + c)
           - p.Gamma * c / (p.K + c)
           + p.lam * stress_eval(p.stress, c))
    return out if out.ndim else float(out)


def jacobian_block(p: ModelParams, c: float) -> tuple:
    """(trace, det, discr) of the 2x2 stability block at an equilibrium c.

    Valid at steady states only: h and theta are eliminated with their
    equilibrium values before differentiating.
    """
    hstar = p.K2 ** 2 / (p.K2 ** 2 + c * c)
    r1c = p.mu * hstar * p.K1 * (1.0 - p.b) / (1.0 + c) ** 2 - p.Gamma * p.K / (p.K + c) ** 2
    r1h = p.mu * p.K1 * (p.b + c) / (1.0 + c)
    r3c = -2.0 * c * p.K2 ** 2 / (p.K2 ** 2 + c * c) ** 2
    lam_tp = p.lam * stress_derivative(p.stress, c)
    trace = r1c - 1.0
    det = -r1c - r1h * r3c - lam_tp
    return trace, det, trace * trace - 4.0 * det


def _classify_signs(trace: float, det: float, discr: float) -> StabilityClass:
    if det < 0:
        return StabilityClass.SADDLE
    spiral = discr < 0
    if trace < 0:
        return StabilityClass.STABLE_SPIRAL if spiral else StabilityClass.STABLE_NODE
    return StabilityClass.UNSTABLE_SPIRAL if spiral else StabilityClass.UNSTABLE_NODE


def classify(p: ModelParams, c: float, model: str = "atri",
             degenerate: bool = False) -> Equilibrium:
    """Classify the steady state at location c.

    Raises ValueError when the residual at c exceeds the equilibrium
    tolerance, i.e. c is not actually a root of the steady-state relation.
    """
    if model not in ("atri", "mech"):
        raise ValueError(f"unknown model {model!r}")
    hstar = p.K2 ** 2 / (p.K2 ** 2 + c * c)
    theta = float(stress_eval(p.stress, c)) if model == "mech" else 0.0
    if model == "atri":
        rhs = rhs_atri(p, (c, hstar))
    else:
        rhs = rhs_mech(p, (c, theta, hstar))
    residual = max(abs(v) for v in rhs)
    if residual > 100 * RESIDUAL_TOL:
        raise ValueError(f"location c={c} is not an equilibrium (residual {residual:.2e})")

    trace, det, discr = jacobian_block(p, c)
    half = 0.5 * trace
    if discr >= 0:
        root = 0.5 * math.sqrt(discr)
        eigs = (complex(half - root), complex(half + root))
    else:
        root = 0.5 * math.sqrt(-discr)
        eigs = (complex(half, -root), complex(half, root))
    if model == "mech":
        eigs = eigs + (complex(-1.0),)
    klass = StabilityClass.DEGENERATE if degenerate else _classify_signs(trace, det, discr)
    return Equilibrium(c=float(c), h=float(hstar), theta=theta, trace=trace, det=det,
                       discr=discr, eigenvalues=eigs, klass=klass, residual=residual,
                       model=model)


def _root_scan(p: ModelParams) -> list:
    """All nonnegative roots of the steady-state relation, with degeneracy flags."""
    grid = np.geomspace(_C_LO, _C_HI, _N_SCAN)
    vals = equilibrium_relation(p, grid)
    f = lambda c: equilibrium_relation(p, c)

    roots = []
    if p.mu == 0.0:
        roots.append((0.0, False))  # origin: all fluxes and T(0) vanish

    sgn = np.sign(vals)
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        roots.append((brentq(f, grid[i], grid[i + 1], xtol=1e-13, rtol=8.9e-16), False))

    # Tangent (double) roots: interior minima of |relation| that reach ~zero
    # without a sign change.  Reported twice, flagged degenerate.
    absv = np.abs(vals)
    for i in range(1, len(grid) - 1):
        if absv[i] < absv[i - 1] and absv[i] < absv[i + 1] and sgn[i - 1] == sgn[i + 1] != 0:
            if absv[i] < 1e-6:
                res = minimize_scalar(lambda c: abs(f(c)), bounds=(grid[i - 1], grid[i + 1]),
                                      method="bounded", options={"xatol": 1e-14})
                if abs(res.fun) < RESIDUAL_TOL:
                    roots.append((float(res.x), True))
                    roots.append((float(res.x), True))

    roots.sort(key=lambda r: r[0])
    deduped = []
    for c, flag in roots:
        if deduped and not flag and abs(c - deduped[-1][0]) < 1e-10 * (1.0 + c):
            continue
        deduped.append((c, flag))
    return deduped


def equilibria_atri(p: ModelParams) -> list:
    """All steady states of the two-variable model, classified. Requires lam = 0."""
    if p.lam != 0.0:
        raise ValueError("the two-variable model requires lam = 0")
    return [classify(p, c, "atri", degenerate=flag) for c, flag in _root_scan(p)]


def equilibria_mech(p: ModelParams) -> list:
    """All steady states of the mechanochemical model, classified."""
    return [classify(p, c, "mech", degenerate=flag) for c, flag in _root_scan(p)]


def mu_on_branch(p: ModelParams, c):
    """mu value putting c on the equilibrium branch of the two-variable model.

    Single-valued in c, which makes it the natural continuation variable
    across the multi-root window.
    """
    c = np.asarray(c, dtype=float)
    out = (p.Gamma * c * (1.0 + c) * (p.K2 ** 2 + c * c)
           / (p.K1 * p.K2 ** 2 * (p.K + c) * (p.b + c)))
    return out if out.ndim else float(out)


def ladder_atri(p: ModelParams, mu_lo: float, mu_hi: float, tol: float = 1e-5,
                c_window: tuple = (1e-6, 1e3), n_scan: int = 400_001) -> BifurcationLadder:
    """Locate every sign change of Tr, Det and Discr along the equilibrium branches.

    The branch set over [mu_lo, mu_hi] is swept through the single-valued
    c-parametrization mu(c); each bracketed crossing is refined with
    Brent's method well below ``tol`` in mu.
    """
    if not 0 <= mu_lo < mu_hi:
        raise ValueError("need 0 <= mu_lo < mu_hi")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if p.lam != 0.0:
        raise ValueError("the ladder is defined for the two-variable model (lam = 0)")

    cs = np.geomspace(c_window[0], c_window[1], n_scan)
    mus = mu_on_branch(p, cs)
    hstar = p.K2 ** 2 / (p.K2 ** 2 + cs * cs)
    r1c = mus * hstar * p.K1 * (1.0 - p.b) / (1.0 + cs) ** 2 - p.Gamma * p.K / (p.K + cs) ** 2
    r1h = mus * p.K1 * (p.b + cs) / (1.0 + cs)
    r3c = -2.0 * cs * p.K2 ** 2 / (p.K2 ** 2 + cs * cs) ** 2
    trace = r1c - 1.0
    det = -r1c - r1h * r3c
    discr = trace * trace - 4.0 * det

    def block_at(c: float) -> tuple:
        return jacobian_block(p.with_(mu=mu_on_branch(p, c), lam=0.0), c)

    events = []
    for kind, series, idx in ((EventKind.HOPF_TR_ZERO, trace, 0),
                              (EventKind.FOLD_DET_ZERO, det, 1),
                              (EventKind.DISCR_ZERO, discr, 2)):
        sgn = np.sign(series)
        for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
            c_root = brentq(lambda c: block_at(c)[idx], cs[i], cs[i + 1],
                            xtol=1e-14, rtol=8.9e-16)
            mu_root = mu_on_branch(p, c_root)
            if mu_lo <= mu_root <= mu_hi:
                dc = 1e-5 * (1.0 + c_root)
                lo = _classify_signs(*block_at(c_root - dc))
                hi = _classify_signs(*block_at(c_root + dc))
                desc = f"{lo.value} -> {hi.value}"
                events.append(LadderEvent(mu=mu_root, kind=kind, branch_c=c_root,
                                          description=desc))

    events.sort(key=lambda e: e.mu)
    return BifurcationLadder(mu_lo=mu_lo, mu_hi=mu_hi, events=tuple(events))


def nullclines_atri(p: ModelParams, c_grid) -> Nullclines:
    """Both nullclines of the two-variable model on the given c-grid.

    The flux nullcline is undefined at mu = 0 (no release flux to balance
    the pump), which is signalled explicitly.
    """
    c = np.asarray(c_grid, dtype=float)
    if np.any(c < 0):
        raise ValueError("c_grid must be nonnegative")
    if p.mu == 0:
        raise ValueError("flux nullcline undefined for mu = 0")
    h_flux = (p.Gamma / (p.mu * p.K1)) * c * (1.0 + c) / ((p.K + c) * (p.b + c))
    h_gate = p.K2 ** 2 / (p.K2 ** 2 + c * c)
    return Nullclines(c=c, h_flux=h_flux, h_gate=h_gate,
                      asymptote=p.Gamma / (p.mu * p.K1))


def nullcline_max(p: ModelParams) -> tuple:
    """Maximum (c_M, h_M) of the flux nullcline.

    c_M depends only on b and K; h_M scales as Gamma/(mu*K1).  Requires
    1 - b - K > 0, otherwise the nullcline has no interior positive maximum.
    """
    if not 1.0 - p.b - p.K > 0:
        raise ValueError("no positive nullcline maximum: need 1 - b - K > 0")
    if p.mu == 0:
        raise ValueError("flux nullcline undefined for mu = 0")
    b, K = p.b, p.K
    c_m = (b * K + math.sqrt((1.0 - b) * b * (K - K * K))) / (1.0 - b - K)
    h_m = (p.Gamma / (p.mu * p.K1)) * c_m * (1.0 + c_m) / ((K + c_m) * (b + c_m))
    return c_m, h_m
