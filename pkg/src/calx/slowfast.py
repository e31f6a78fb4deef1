"""Slow-fast decomposition: manifolds, transition layers, and composite cycles.

The calcium variable c is fast (timescale ratio eps = 1/K1 ~ 0.02), so a
relaxation oscillation decomposes into

* Phase I  - fast landing on the stable branch of the slow manifold along a
  frozen-slow-variable leaf,
* Phase II - slow crawl along the stable branch up to the break point (2D)
  or break curve (3D), where the manifold is tangent to the fast foliation,
* Phase III - a large-c transition layer, where the rescaling c_hat = eps*c
  linearises the dynamics and the layer solves in closed form.

The layer is the qualitatively distinctive piece: the c-nullcline saturates
instead of folding back (it is not a cubic), so the trajectory overshoots,
crosses the nullcline's asymptote, and only then returns.  The layer
formulas give the turning time, the peak level c_hat(t_turning)/eps, and
the return time t_back.  In the three-variable model turning requires
lam*theta_F > Gamma - mu*K1*h_F, which collapses to the parameter condition
K < 1 along the whole break curve.

``eps`` is an explicit input everywhere (default 1/K1): convergence studies
shrink it while holding Gamma/K1 and lam/K1 fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .equilibria import nullcline_max
from .model import ModelParams, stress_eval

__all__ = [
    "SlowManifold2",
    "SlowManifold3",
    "BreakCurve3",
    "FlowSegment",
    "Layer2",
    "Layer3",
    "GsptSegment",
    "GsptTrajectory",
    "fast_flow_2d",
    "slow_flow_2d",
    "transition_layer_2d",
    "break_curve_3d",
    "break_curve_h",
    "break_curve_theta",
    "turning_margin",
    "slow_flow_3d",
    "transition_layer_3d",
    "compose_relaxation_oscillation",
]


def _stable_quadratic_roots(a: float, b: float, c: float) -> tuple:
    """Real roots of a*x^2 + b*x + c, cancellation-safe; (nan, nan) if complex."""
    if a == 0.0:
        if b == 0.0:
            return math.nan, math.nan
        r = -c / b
        return r, math.nan
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return math.nan, math.nan
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b if b != 0 else 1.0))
    r1 = q / a if q != 0 else 0.0
    r2 = c / q if q != 0 else 0.0
    return (r1, r2) if r1 <= r2 else (r2, r1)


@dataclass(frozen=True)
class SlowManifold2:
    """Branches of the two-variable slow manifold F(c, h) = 0.

    The manifold is the root set of the quadratic
    (mu*h*K1 - Gamma)c^2 + (mu*h*K1*(b+K) - Gamma)c + mu*h*K1*b*K = 0;
    c_minus is the attracting branch (dF/dc < 0), c_plus the repelling one.
    For h below the nullcline asymptote only the attracting root is
    nonnegative and c_plus is nan.
    """

    p: ModelParams

    def _coeffs(self, h: float) -> tuple:
        m = self.p.mu * h * self.p.K1
        return (m - self.p.Gamma,
                m * (self.p.b + self.p.K) - self.p.Gamma,
                m * self.p.b * self.p.K)

    def roots(self, h: float) -> tuple:
        """(c_minus, c_plus); either may be nan where the branch is absent."""
        a, b, c = self._coeffs(h)
        r_lo, r_hi = _stable_quadratic_roots(a, b, c)
        pos = sorted(r for r in (r_lo, r_hi) if not math.isnan(r) and r >= 0.0)
        if not pos:
            return math.nan, math.nan
        if len(pos) == 1:
            return pos[0], math.nan
        return pos[0], pos[1]

    def c_minus(self, h: float) -> float:
        return self.roots(h)[0]

    def c_plus(self, h: float) -> float:
        return self.roots(h)[1]

    def c_minus_clamped(self, h: float) -> float:
        """Attracting root, held at the tangency value past the break point.

        Integrators probe slightly beyond the event; clamping keeps the
        constrained slow flow evaluable there.
        """
        a, b, c = self._coeffs(h)
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return -b / (2.0 * a)
        return self.roots(h)[0]

    def df_dc(self, c: float, h: float) -> float:
        """dF/dc of the fast equation (per K1 time unit)."""
        p = self.p
        return (p.mu * h * (1.0 - p.b) / (1.0 + c) ** 2
                - (p.Gamma / p.K1) * p.K / (p.K + c) ** 2)

    def break_point(self) -> tuple:
        return nullcline_max(self.p)


@dataclass(frozen=True)
class SlowManifold3:
    """Sheets of the three-variable slow manifold F1(c, theta, h) = 0.

    Root set of (mu*h*K1 - Gamma + lam*theta)c^2
    + (mu*h*K1*(b+K) - Gamma + lam*theta*(1+K))c + (mu*h*K1*b*K + lam*theta*K) = 0.
    The sheets join at the break curve, where the discriminant vanishes.
    """

    p: ModelParams

    def _coeffs(self, h: float, theta: float) -> tuple:
        p = self.p
        m = p.mu * h * p.K1
        lt = p.lam * theta
        return (m - p.Gamma + lt,
                m * (p.b + p.K) - p.Gamma + lt * (1.0 + p.K),
                m * p.b * p.K + lt * p.K)

    def discriminant(self, h: float, theta: float) -> float:
        a, b, c = self._coeffs(h, theta)
        return b * b - 4.0 * a * c

    def roots(self, h: float, theta: float) -> tuple:
        a, b, c = self._coeffs(h, theta)
        r_lo, r_hi = _stable_quadratic_roots(a, b, c)
        pos = sorted(r for r in (r_lo, r_hi) if not math.isnan(r) and r >= 0.0)
        if not pos:
            return math.nan, math.nan
        if len(pos) == 1:
            return pos[0], math.nan
        return pos[0], pos[1]

    def c_minus(self, h: float, theta: float) -> float:
        return self.roots(h, theta)[0]

    def c_plus(self, h: float, theta: float) -> float:
        return self.roots(h, theta)[1]

    def c_minus_clamped(self, h: float, theta: float) -> float:
        a, b, c = self._coeffs(h, theta)
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return -b / (2.0 * a)
        return self.roots(h, theta)[0]

    def df1_dc(self, c: float, h: float, theta: float) -> float:
        p = self.p
        return (p.mu * h * (1.0 - p.b) / (1.0 + c) ** 2
                - (p.Gamma / p.K1) * p.K / (p.K + c) ** 2)


def break_curve_h(p: ModelParams, c):
    """h on the break curve: dF1/dc = 0 solved for h."""
    c = np.asarray(c, dtype=float)
    out = (p.Gamma * p.K / (p.mu * p.K1) / (1.0 - p.b)
           * (1.0 + c) ** 2 / (p.K + c) ** 2)
    return out if out.ndim else float(out)


def break_curve_theta(p: ModelParams, c):
    """theta on the break curve: F1 = 0 at h = h_F(c) solved for theta."""
    c = np.asarray(c, dtype=float)
    out = (p.Gamma / p.lam) * (c / (p.K + c)
                               - (p.K / (1.0 - p.b)) * (1.0 + c) * (p.b + c)
                               / (p.K + c) ** 2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BreakCurve3:
    c: np.ndarray
    theta: np.ndarray
    h: np.ndarray


def break_curve_3d(p: ModelParams, c_grid) -> BreakCurve3:
    """Sampled break curve of the three-variable slow manifold; needs mu, lam > 0."""
    if not (p.mu > 0 and p.lam > 0):
        raise ValueError("break curve parametrization needs mu > 0 and lam > 0")
    c = np.asarray(c_grid, dtype=float)
    if np.any(c <= 0):
        raise ValueError("c_grid must be positive")
    return BreakCurve3(c=c, theta=break_curve_theta(p, c), h=break_curve_h(p, c))


def turning_margin(p: ModelParams, c):
    """lam*theta_F + mu*K1*h_F - Gamma along the break curve.

    Positive margin means layer trajectories leaving that break point turn
    back; it is positive for every c exactly when K < 1.
    """
    c = np.asarray(c, dtype=float)
    out = np.asarray(p.lam * break_curve_theta(p, c)
                     + p.mu * p.K1 * break_curve_h(p, c) - p.Gamma)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FlowSegment:
    """Numeric flow output on one phase segment."""

    t: np.ndarray
    c: np.ndarray
    h: np.ndarray
    theta: Optional[np.ndarray] = None
    reached_break: bool = False
    duration: float = 0.0


def fast_flow_2d(p: ModelParams, h_frozen: float, c0: float,
                 tau_span: float = 1e4, n_out: int = 400) -> FlowSegment:
    """Leading-order fast flow on one leaf: h frozen, c relaxes along
    dc/dtau = mu*h00*(b+c)/(1+c) - Gamma*c/(K1*(K+c))."""

    def rhs(_t, y):
        c = y[0]
        return [p.mu * h_frozen * (p.b + c) / (1.0 + c)
                - p.Gamma * c / (p.K1 * (p.K + c))]

    sm = SlowManifold2(p)
    target = sm.c_minus(h_frozen)

    events = []
    if not math.isnan(target):
        gap = 1e-9 * (1.0 + target)

        def at_branch(_t, y):
            return abs(y[0] - target) - gap

        at_branch.terminal = True
        events.append(at_branch)

    sol = solve_ivp(rhs, (0.0, tau_span), [c0], events=events or None,
                    rtol=1e-10, atol=1e-12, dense_output=True)
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n_out)
    cs = sol.sol(ts)[0]
    return FlowSegment(t=ts, c=cs, h=np.full_like(ts, h_frozen),
                       reached_break=False, duration=float(t_end))


def slow_flow_2d(p: ModelParams, h0: float, t_span: float = 100.0,
                 n_out: int = 400) -> FlowSegment:
    """Adiabatic slow flow on the stable branch, stopping at the break point.

    Integrates dh/dt = K2^2/(K2^2 + c_minus(h)^2) - h with a terminal event
    at h = h_M.  If the flow reaches a stable equilibrium first the event
    never fires and reached_break is False.
    """
    sm = SlowManifold2(p)
    c_m, h_m = nullcline_max(p)
    if not 0.0 < h0:
        raise ValueError("h0 must be positive")
    if h0 >= h_m:
        raise ValueError(f"h0={h0} is beyond the break value h_M={h_m}")
    if math.isnan(sm.c_minus(h0)):
        raise ValueError(f"no stable branch at h0={h0}")

    def rhs(_t, y):
        c = sm.c_minus_clamped(y[0])
        return [p.K2 ** 2 / (p.K2 ** 2 + c * c) - y[0]]

    def at_break(_t, y):
        return y[0] - h_m

    at_break.terminal = True
    at_break.direction = 1

    sol = solve_ivp(rhs, (0.0, t_span), [h0], events=at_break,
                    rtol=1e-11, atol=1e-13, dense_output=True)
    reached = len(sol.t_events[0]) > 0
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n_out)
    hs = sol.sol(ts)[0]
    if reached:
        hs[-1] = h_m  # land exactly on the tangency
    cs = np.array([sm.c_minus_clamped(h) for h in hs])
    return FlowSegment(t=ts, c=cs, h=hs, reached_break=reached, duration=float(t_end))


@dataclass(frozen=True)
class Layer2:
    """Analytic transition layer of the two-variable model.

    c_hat(t) = mu*h_M*(1 - e^-t) - (Gamma/K1)*t and h_hat(t) = h_M e^-t in
    the rescaled variable c_hat = eps*c.  The layer turns at
    t_turning = ln(mu*K1*h_M/Gamma) provided the log argument exceeds 1.
    """

    mu: float
    h_m: float
    gamma_over_k1: float
    eps: float
    turning: bool
    t_turning: float
    t_back: float
    c_peak: float

    def c_hat(self, t):
        t = np.asarray(t, dtype=float)
        out = self.mu * self.h_m * (1.0 - np.exp(-t)) - self.gamma_over_k1 * t
        return out if out.ndim else float(out)

    def h_hat(self, t):
        t = np.asarray(t, dtype=float)
        out = self.h_m * np.exp(-t)
        return out if out.ndim else float(out)


def transition_layer_2d(p: ModelParams, h_m: Optional[float] = None,
                        eps: Optional[float] = None) -> Layer2:
    """Closed-form layer record departing the 2D break point.

    ``h_m`` defaults to the nullcline maximum; mu*h_M is mu-independent
    there, which is why t_turning and t_back are constants of the model.
    """
    if h_m is None:
        _, h_m = nullcline_max(p)
    if eps is None:
        eps = p.eps
    g = p.Gamma / p.K1
    ratio = p.mu * p.K1 * h_m / p.Gamma
    if ratio <= 1.0:
        return Layer2(mu=p.mu, h_m=h_m, gamma_over_k1=g, eps=eps, turning=False,
                      t_turning=math.nan, t_back=math.nan, c_peak=math.nan)
    t_turn = math.log(ratio)
    layer = Layer2(mu=p.mu, h_m=h_m, gamma_over_k1=g, eps=eps, turning=True,
                   t_turning=t_turn, t_back=math.nan, c_peak=math.nan)
    hi = t_turn + 1.0
    while layer.c_hat(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("layer return time not bracketed")
    t_back = brentq(layer.c_hat, t_turn, hi, xtol=1e-14, rtol=8.9e-16)
    c_peak = layer.c_hat(t_turn) / eps
    return Layer2(mu=p.mu, h_m=h_m, gamma_over_k1=g, eps=eps, turning=True,
                  t_turning=t_turn, t_back=t_back, c_peak=c_peak)


@dataclass(frozen=True)
class Layer3:
    """Analytic transition layer of the mechanochemical model.

    With Lam = lam/K1 and T_s the stress saturation, the layer system
    d(c_hat)/dt = mu*h_hat - Gamma/K1 + Lam*theta_hat,
    d(theta_hat)/dt = -theta_hat + T_s, d(h_hat)/dt = -h_hat solves to

        h_hat(t)     = h_F e^-t,
        theta_hat(t) = T_s (1 - e^-t) + theta_F e^-t,
        c_hat(t)     = (mu*h_F + Lam*(theta_F - T_s)) (1 - e^-t)
                       + (Lam*T_s - Gamma/K1) t,

    so the transient amplitude carries Lam*(theta_F - T_s) and the secular
    drift is Lam*T_s - Gamma/K1.  Turning then happens at
    t_turning = ln[(mu*K1*h_F + lam*theta_F - lam*T_s)/(Gamma - lam*T_s)],
    which is positive exactly when lam*theta_F > Gamma - mu*K1*h_F (the same
    inequality that collapses to K < 1 on the break curve); otherwise the
    trajectory escapes.
    """

    mu: float
    h_f: float
    theta_f: float
    t_s: float
    lam_over_k1: float
    gamma_over_k1: float
    eps: float
    escaping: bool
    t_turning: float
    t_back: float
    c_peak: float

    def c_hat(self, t):
        t = np.asarray(t, dtype=float)
        p_coef = self.mu * self.h_f + self.lam_over_k1 * (self.theta_f - self.t_s)
        q_coef = self.lam_over_k1 * self.t_s - self.gamma_over_k1
        out = p_coef * (1.0 - np.exp(-t)) + q_coef * t
        return out if out.ndim else float(out)

    def h_hat(self, t):
        t = np.asarray(t, dtype=float)
        out = self.h_f * np.exp(-t)
        return out if out.ndim else float(out)

    def theta_hat(self, t):
        t = np.asarray(t, dtype=float)
        out = self.t_s * (1.0 - np.exp(-t)) + self.theta_f * np.exp(-t)
        return out if out.ndim else float(out)

    def crossing_residual(self, t) -> float:
        """mu*h_hat + Lam*theta_hat - Gamma/K1; zero where the layer crosses the manifold."""
        return (self.mu * self.h_hat(t) + self.lam_over_k1 * self.theta_hat(t)
                - self.gamma_over_k1)


def transition_layer_3d(p: ModelParams, break_point: tuple,
                        eps: Optional[float] = None) -> Layer3:
    """Closed-form layer record departing a 3D break-curve point (c_F, theta_F, h_F)."""
    _, theta_f, h_f = break_point
    if eps is None:
        eps = p.eps
    lam_k1 = p.lam / p.K1
    g = p.Gamma / p.K1
    t_s = p.stress.saturation
    p_coef = p.mu * h_f + lam_k1 * (theta_f - t_s)
    q_coef = lam_k1 * t_s - g
    turning = q_coef < 0.0 and p_coef > 0.0 and p_coef / (-q_coef) > 1.0
    if not turning:
        return Layer3(mu=p.mu, h_f=h_f, theta_f=theta_f, t_s=t_s, lam_over_k1=lam_k1,
                      gamma_over_k1=g, eps=eps, escaping=True, t_turning=math.nan,
                      t_back=math.nan, c_peak=math.nan)
    t_turn = math.log(p_coef / (-q_coef))
    layer = Layer3(mu=p.mu, h_f=h_f, theta_f=theta_f, t_s=t_s, lam_over_k1=lam_k1,
                   gamma_over_k1=g, eps=eps, escaping=False, t_turning=t_turn,
                   t_back=math.nan, c_peak=math.nan)
    hi = t_turn + 1.0
    while layer.c_hat(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("layer return time not bracketed")
    t_back = brentq(layer.c_hat, t_turn, hi, xtol=1e-14, rtol=8.9e-16)
    return Layer3(mu=p.mu, h_f=h_f, theta_f=theta_f, t_s=t_s, lam_over_k1=lam_k1,
                  gamma_over_k1=g, eps=eps, escaping=False, t_turning=t_turn,
                  t_back=t_back, c_peak=layer.c_hat(t_turn) / eps)


def slow_flow_3d(p: ModelParams, init: tuple, t_span: float = 100.0,
                 n_out: int = 400, on_sheet_tol: float = 1e-6) -> FlowSegment:
    """Constrained slow flow on the stable sheet, stopping at the break curve.

    ``init`` is (c0, theta0, h0) with c0 = c_minus(h0, theta0) up to
    ``on_sheet_tol`` (pass c0 = None to place it on the sheet).  Integrates
    the (theta, h) dynamics with c eliminated; terminates where the sheet
    discriminant vanishes, i.e. on the break curve.
    """
    sm = SlowManifold3(p)
    c0, theta0, h0 = init
    c_sheet = sm.c_minus(h0, theta0)
    if math.isnan(c_sheet):
        raise ValueError(f"no stable sheet at (theta, h) = ({theta0}, {h0})")
    if c0 is not None and abs(c0 - c_sheet) > on_sheet_tol * (1.0 + abs(c_sheet)):
        raise ValueError(f"init c={c0} is off the stable sheet (c_minus={c_sheet})")

    def rhs(_t, y):
        theta, h = y
        c = sm.c_minus_clamped(h, theta)
        return [-theta + float(stress_eval(p.stress, c)),
                p.K2 ** 2 / (p.K2 ** 2 + c * c) - h]

    def at_break(_t, y):
        return sm.discriminant(y[1], y[0])

    at_break.terminal = True
    at_break.direction = -1

    sol = solve_ivp(rhs, (0.0, t_span), [theta0, h0], events=at_break,
                    rtol=1e-11, atol=1e-13, dense_output=True)
    reached = len(sol.t_events[0]) > 0
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n_out)
    thetas, hs = sol.sol(ts)
    cs = np.array([sm.c_minus_clamped(h, th) for h, th in zip(hs, thetas)])
    return FlowSegment(t=ts, c=cs, h=hs, theta=thetas, reached_break=reached,
                       duration=float(t_end))


@dataclass(frozen=True)
class GsptSegment:
    phase: str        # "fast", "slow", "layer"
    provenance: str   # "numeric" or "analytic"
    t: np.ndarray     # global time within the assembled period
    c: np.ndarray
    theta: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class GsptTrajectory:
    """One assembled relaxation-oscillation period.

    The layer segment carries the uniform composite c = c_break + c_hat/eps
    so that consecutive segment endpoints join exactly; c_peak is reported
    in the bare layer scaling c_hat(t_turning)/eps.

    The period estimate is the leading-order value: slow duration plus the
    layer return time t_back.  The fast landing contributes only
    O(eps*log) time (and its numeric duration depends on the landing
    tolerance), so it is reported separately as t_fast and excluded.
    """

    model: str
    eps: float
    segments: tuple
    period_estimate: float
    t_turning: float
    t_back: float
    c_peak: float
    break_state: tuple
    t_fast: float = 0.0
    iterations: int = 1


def _layer_segment_2d(layer: Layer2, c_break: float, t0: float, n_out: int) -> GsptSegment:
    ts = np.linspace(0.0, layer.t_back, n_out)
    return GsptSegment(phase="layer", provenance="analytic", t=t0 + ts,
                       c=c_break + layer.c_hat(ts) / layer.eps,
                       theta=np.zeros(n_out), h=layer.h_hat(ts))


def compose_relaxation_oscillation(model: str, p: ModelParams,
                                   eps: Optional[float] = None,
                                   n_out: int = 400) -> GsptTrajectory:
    """Assemble one leading-order period: fast landing, slow crawl, analytic layer.

    Starts at the layer's return point on the stable branch.  For the
    three-variable model the break-curve departure point is found by
    iterating the loop map until the cycle closes.

    Raises ValueError when the parameters do not sustain a relaxation
    oscillation (the slow flow stalls before the break locus, or the layer
    escapes).
    """
    if eps is None:
        eps = p.eps
    if model == "atri":
        c_m, h_m = nullcline_max(p)
        layer = transition_layer_2d(p, h_m, eps)
        if not layer.turning:
            raise ValueError("layer does not turn: no relaxation oscillation")
        h_back = layer.h_hat(layer.t_back)
        fast = fast_flow_2d(p, h_back, c_m, n_out=n_out)
        t_fast = eps * fast.duration
        slow = slow_flow_2d(p, h_back, n_out=n_out)
        if not slow.reached_break:
            raise ValueError("slow flow stalls before the break point: no oscillation")

        seg_fast = GsptSegment(phase="fast", provenance="numeric",
                               t=eps * fast.t, c=fast.c,
                               theta=np.zeros_like(fast.c), h=fast.h)
        seg_slow = GsptSegment(phase="slow", provenance="numeric",
                               t=t_fast + slow.t, c=slow.c,
                               theta=np.zeros_like(slow.c), h=slow.h)
        seg_layer = _layer_segment_2d(layer, c_m, t_fast + slow.duration, n_out)
        period = slow.duration + layer.t_back
        return GsptTrajectory(model="atri", eps=eps,
                              segments=(seg_fast, seg_slow, seg_layer),
                              period_estimate=period, t_turning=layer.t_turning,
                              t_back=layer.t_back, c_peak=layer.c_peak,
                              break_state=(c_m, 0.0, h_m), t_fast=t_fast)

    if model != "mech":
        raise ValueError(f"unknown model {model!r}")

    # 3D: iterate the break-curve loop map until the assembled cycle closes.
    sm = SlowManifold3(p)
    try:
        c_f = nullcline_max(p)[0]  # 2D break point as the initial guess
    except ValueError:
        c_f = 1.0
    slow = fast = layer = None
    iterations = 0
    for iterations in range(1, 41):
        theta_f = float(break_curve_theta(p, c_f))
        h_f = float(break_curve_h(p, c_f))
        layer = transition_layer_3d(p, (c_f, theta_f, h_f), eps)
        if layer.escaping:
            raise ValueError("layer escapes to infinity: no relaxation oscillation")
        h_back = float(layer.h_hat(layer.t_back))
        theta_back = float(layer.theta_hat(layer.t_back))
        c_land = sm.c_minus(h_back, theta_back)
        if math.isnan(c_land):
            raise ValueError("layer return point has no stable sheet below it")

        fast = _fast_leaf_3d(p, theta_back, h_back, c_f, c_land, n_out)
        slow = slow_flow_3d(p, (None, theta_back, h_back), n_out=n_out)
        if not slow.reached_break:
            raise ValueError("slow flow stalls before the break curve: no oscillation")
        c_f_new = float(slow.c[-1])
        if abs(c_f_new - c_f) < 1e-10 * (1.0 + abs(c_f)):
            c_f = c_f_new
            break
        c_f = c_f_new

    theta_f = float(break_curve_theta(p, c_f))
    h_f = float(break_curve_h(p, c_f))
    layer = transition_layer_3d(p, (c_f, theta_f, h_f), eps)
    t_fast = eps * fast.duration
    ts_layer = np.linspace(0.0, layer.t_back, n_out)

    seg_fast = GsptSegment(phase="fast", provenance="numeric", t=eps * fast.t,
                           c=fast.c, theta=fast.theta, h=fast.h)
    seg_slow = GsptSegment(phase="slow", provenance="numeric", t=t_fast + slow.t,
                           c=slow.c, theta=slow.theta, h=slow.h)
    seg_layer = GsptSegment(phase="layer", provenance="analytic",
                            t=t_fast + slow.duration + ts_layer,
                            c=c_f + layer.c_hat(ts_layer) / eps,
                            theta=layer.theta_hat(ts_layer), h=layer.h_hat(ts_layer))
    period = slow.duration + layer.t_back
    return GsptTrajectory(model="mech", eps=eps,
                          segments=(seg_fast, seg_slow, seg_layer),
                          period_estimate=period, t_turning=layer.t_turning,
                          t_back=layer.t_back, c_peak=layer.c_peak,
                          break_state=(c_f, theta_f, h_f), t_fast=t_fast,
                          iterations=iterations)


def _fast_leaf_3d(p: ModelParams, theta_frozen: float, h_frozen: float,
                  c0: float, c_target: float, n_out: int) -> FlowSegment:
    """Fast landing on the 3D stable sheet with both slow variables frozen."""

    def rhs(_t, y):
        c = y[0]
        return [p.mu * h_frozen * (p.b + c) / (1.0 + c)
                - (p.Gamma / p.K1) * c / (p.K + c)
                + (p.lam / p.K1) * theta_frozen]

    gap = 1e-9 * (1.0 + abs(c_target))

    def at_sheet(_t, y):
        return abs(y[0] - c_target) - gap

    at_sheet.terminal = True

    sol = solve_ivp(rhs, (0.0, 1e4), [c0], events=at_sheet,
                    rtol=1e-10, atol=1e-12, dense_output=True)
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n_out)
    cs = sol.sol(ts)[0]
    return FlowSegment(t=ts, c=cs, h=np.full_like(ts, h_frozen),
                       theta=np.full_like(ts, theta_frozen),
                       reached_break=False, duration=float(t_end))
