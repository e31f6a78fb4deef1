"""Adaptive ODE integration, limit-cycle measurement, and parameter sweeps.

The stepper is a Dormand-Prince 5(4) embedded Runge-Kutta pair with
proportional step control: steps are accepted when the embedded error
estimate stays below abs_tol + rel_tol*|state| componentwise (RMS norm).
The core loop is numba-compiled; the calcium spikes make the systems
mildly stiff (timescale ratio ~1/46) and sweeps integrate hundreds of
trajectories, so the compiled loop is what keeps brute-force bifurcation
scans cheap.

Cycle measurement finds successive maxima of c through sign changes of
dc/dt along the accepted steps, sharpening each peak time with a quadratic
fit through the three surrounding samples.  A run counts as oscillating
when at least five post-transient peaks of stable height remain above the
amplitude floor; slowly decaying spirals (ringdown toward a weakly stable
focus) are rejected by the peak-height drift test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from numba import njit

from . import equilibria as _eq
from .model import ModelParams, VdpParams, _rhs_atri_kernel, _rhs_mech_kernel, _rhs_vdp_kernel

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "CycleSummary",
    "SweepPoint",
    "IntegrationError",
    "integrate",
    "measure_cycle",
    "sweep",
    "frequency_profile",
    "rhs_arrays",
]

_MODEL_IDS = {"atri": 0, "mech": 1, "vdp": 2}
_MODEL_DIM = {"atri": 2, "mech": 3, "vdp": 2}

AMPLITUDE_FLOOR = 1e-3     # minimum c_max - c_min for a genuine oscillation
PEAK_DRIFT_TOL = 0.05      # relative peak-height spread that still counts as steady
PERIOD_SPREAD_TOL = 0.01   # relative inter-peak spread for a converged period


class IntegrationError(RuntimeError):
    """Step size underflow: stiffness beyond the tolerance budget."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-7
    abs_tol: float = 1e-9
    max_step: float = 1.0
    t_end: float = 400.0
    transient_fraction: float = 0.5
    fixed_step: Optional[float] = None   # bypass error control (order checks)
    max_steps: int = 20_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.transient_fraction < 1:
            raise ValueError("transient_fraction must lie in (0, 1)")
        if not self.max_step > 0 or not self.t_end > 0:
            raise ValueError("max_step and t_end must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Accepted integration steps; times strictly increasing."""

    model: str
    t: np.ndarray
    y: np.ndarray         # shape (n, dim)
    dense: bool = True    # every accepted step retained

    @property
    def c(self) -> np.ndarray:
        return self.y[:, 0]

    def final_state(self) -> tuple:
        return tuple(float(v) for v in self.y[-1])


@dataclass(frozen=True)
class CycleSummary:
    oscillating: bool
    c_min: float
    c_max: float
    period: float
    frequency: float
    n_cycles_measured: int
    converged: bool
    final_state: tuple = ()
    t_end_used: float = 0.0
    flag: str = ""         # "" | "inconclusive" | "decaying" | "settled"


@dataclass(frozen=True)
class SweepPoint:
    param_value: float
    summary: CycleSummary
    equilibria: tuple


# Dormand-Prince coefficients appear inline in the kernel; the error row is
# the difference between the 5th- and 4th-order weights.
@njit(cache=True)
def _dp_core(model, p, y0, t0, t_end, rtol, atol, max_step, h_init, fixed, cap):
    n = 3 if model == 1 else 2
    size = 4096
    ts = np.empty(size)
    ys = np.empty((size, 3))
    a = y0[0]
    bq = y0[1]
    d = y0[2]
    t = t0
    ts[0] = t
    ys[0, 0] = a
    ys[0, 1] = bq
    ys[0, 2] = d
    k = 1
    h = h_init if fixed <= 0.0 else fixed
    if h > max_step:
        h = max_step
    nsteps = 0
    status = 0
    while t < t_end:
        nsteps += 1
        if nsteps > cap:
            status = 1
            break
        if t + h > t_end:
            h = t_end - t

        if model == 0:
            k1a, k1b = _rhs_atri_kernel(a, bq, p[0], p[2], p[3], p[4], p[5], p[6])
            k1d = 0.0
        elif model == 1:
            k1a, k1b, k1d = _rhs_mech_kernel(a, bq, d, p[0], p[1], p[2], p[3], p[4],
                                             p[5], p[6], int(p[7]), p[8])
        else:
            k1a, k1b = _rhs_vdp_kernel(a, bq, p[0])
            k1d = 0.0

        ya = a + h * 0.2 * k1a
        yb = bq + h * 0.2 * k1b
        yd = d + h * 0.2 * k1d
        if model == 0:
            k2a, k2b = _rhs_atri_kernel(ya, yb, p[0], p[2], p[3], p[4], p[5], p[6])
            k2d = 0.0
        elif model == 1:
            k2a, k2b, k2d = _rhs_mech_kernel(ya, yb, yd, p[0], p[1], p[2], p[3], p[4],
                                             p[5], p[6], int(p[7]), p[8])
        else:
            k2a, k2b = _rhs_vdp_kernel(ya, yb, p[0])
            k2d = 0.0

        ya = a + h * (3.0 / 40.0 * k1a + 9.0 / 40.0 * k2a)
        yb = bq + h * (3.0 / 40.0 * k1b + 9.0 / 40.0 * k2b)
        yd = d + h * (3.0 / 40.0 * k1d + 9.0 / 40.0 * k2d)
        if model == 0:
            k3a, k3b = _rhs_atri_kernel(ya, yb, p[0], p[2], p[3], p[4], p[5], p[6])
            k3d = 0.0
        elif model == 1:
            k3a, k3b, k3d = _rhs_mech_kernel(ya, yb, yd, p[0], p[1], p[2], p[3], p[4],
                                             p[5], p[6], int(p[7]), p[8])
        else:
            k3a, k3b = _rhs_vdp_kernel(ya, yb, p[0])
            k3d = 0.0

        ya = a + h * (44.0 / 45.0 * k1a - 56.0 / 15.0 * k2a + 32.0 / 9.0 * k3a)
        yb = bq + h * (44.0 / 45.0 * k1b - 56.0 / 15.0 * k2b + 32.0 / 9.0 * k3b)
        yd = d + h * (44.0 / 45.0 * k1d - 56.0 / 15.0 * k2d + 32.0 / 9.0 * k3d)
        if model == 0:
            k4a, k4b = _rhs_atri_kernel(ya, yb, p[0], p[2], p[3], p[4], p[5], p[6])
            k4d = 0.0
        elif model == 1:
            k4a, k4b, k4d = _rhs_mech_kernel(ya, yb, yd, p[0], p[1], p[2], p[3], p[4],
                                             p[5], p[6], int(p[7]), p[8])
        else:
            k4a, k4b = _rhs_vdp_kernel(ya, yb, p[0])
            k4d = 0.0

        ya = a + h * (19372.0 / 6561.0 * k1a - 25360.0 / 2187.0 * k2a
                      + 64448.0 / 6561.0 * k3a - 212.0 / 729.0 * k4a)
        yb = bq + h * (19372.0 / 6561.0 * k1b - 25360.0 / 2187.0 * k2b
                       + 64448.0 / 6561.0 * k3b - 212.0 / 729.0 * k4b)
        yd = d + h * (19372.0 / 6561.0 * k1d - 25360.0 / 2187.0 * k2d
                      + 64448.0 / 6561.0 * k3d - 212.0 / 729.0 * k4d)
        if model == 0:
            k5a, k5b = _rhs_atri_kernel(ya, yb, p[0], p[2], p[3], p[4], p[5], p[6])
            k5d = 0.0
        elif model == 1:
            k5a, k5b, k5d = _rhs_mech_kernel(ya, yb, yd, p[0], p[1], p[2], p[3], p[4],
                                             p[5], p[6], int(p[7]), p[8])
        else:
            k5a, k5b = _rhs_vdp_kernel(ya, yb, p[0])
            k5d = 0.0

        ya = a + h * (9017.0 / 3168.0 * k1a - 355.0 / 33.0 * k2a
                      + 46732.0 / 5247.0 * k3a + 49.0 / 176.0 * k4a
                      - 5103.0 / 18656.0 * k5a)
        yb = bq + h * (9017.0 / 3168.0 * k1b - 355.0 / 33.0 * k2b
                       + 46732.0 / 5247.0 * k3b + 49.0 / 176.0 * k4b
                       - 5103.0 / 18656.0 * k5b)
        yd = d + h * (9017.0 / 3168.0 * k1d - 355.0 / 33.0 * k2d
                      + 46732.0 / 5247.0 * k3d + 49.0 / 176.0 * k4d
                      - 5103.0 / 18656.0 * k5d)
        if model == 0:
            k6a, k6b = _rhs_atri_kernel(ya, yb, p[0], p[2], p[3], p[4], p[5], p[6])
            k6d = 0.0
        elif model == 1:
            k6a, k6b, k6d = _rhs_mech_kernel(ya, yb, yd, p[0], p[1], p[2], p[3], p[4],
                                             p[5], p[6], int(p[7]), p[8])
        else:
            k6a, k6b = _rhs_vdp_kernel(ya, yb, p[0])
            k6d = 0.0

        na = a + h * (35.0 / 384.0 * k1a + 500.0 / 1113.0 * k3a + 125.0 / 192.0 * k4a
                      - 2187.0 / 6784.0 * k5a + 11.0 / 84.0 * k6a)
        nb = bq + h * (35.0 / 384.0 * k1b + 500.0 / 1113.0 * k3b + 125.0 / 192.0 * k4b
                       - 2187.0 / 6784.0 * k5b + 11.0 / 84.0 * k6b)
        nd = d + h * (35.0 / 384.0 * k1d + 500.0 / 1113.0 * k3d + 125.0 / 192.0 * k4d
                      - 2187.0 / 6784.0 * k5d + 11.0 / 84.0 * k6d)
        if model == 0:
            k7a, k7b = _rhs_atri_kernel(na, nb, p[0], p[2], p[3], p[4], p[5], p[6])
            k7d = 0.0
        elif model == 1:
            k7a, k7b, k7d = _rhs_mech_kernel(na, nb, nd, p[0], p[1], p[2], p[3], p[4],
                                             p[5], p[6], int(p[7]), p[8])
        else:
            k7a, k7b = _rhs_vdp_kernel(na, nb, p[0])
            k7d = 0.0

        ea = h * (71.0 / 57600.0 * k1a - 71.0 / 16695.0 * k3a + 71.0 / 1920.0 * k4a
                  - 17253.0 / 339200.0 * k5a + 22.0 / 525.0 * k6a - 1.0 / 40.0 * k7a)
        eb = h * (71.0 / 57600.0 * k1b - 71.0 / 16695.0 * k3b + 71.0 / 1920.0 * k4b
                  - 17253.0 / 339200.0 * k5b + 22.0 / 525.0 * k6b - 1.0 / 40.0 * k7b)
        ed = h * (71.0 / 57600.0 * k1d - 71.0 / 16695.0 * k3d + 71.0 / 1920.0 * k4d
                  - 17253.0 / 339200.0 * k5d + 22.0 / 525.0 * k6d - 1.0 / 40.0 * k7d)

        sa = atol + rtol * max(abs(a), abs(na))
        sb = atol + rtol * max(abs(bq), abs(nb))
        err = (ea / sa) ** 2 + (eb / sb) ** 2
        if n == 3:
            sd = atol + rtol * max(abs(d), abs(nd))
            err += (ed / sd) ** 2
            err = math.sqrt(err / 3.0)
        else:
            err = math.sqrt(err / 2.0)

        accept = err <= 1.0 or fixed > 0.0
        if accept:
            t += h
            a, bq, d = na, nb, nd
            if k >= size:
                size *= 2
                nts = np.empty(size)
                nys = np.empty((size, 3))
                nts[:k] = ts[:k]
                nys[:k] = ys[:k]
                ts, ys = nts, nys
            ts[k] = t
            ys[k, 0] = a
            ys[k, 1] = bq
            ys[k, 2] = d
            k += 1

        if fixed <= 0.0:
            if err == 0.0:
                fac = 10.0
            else:
                fac = 0.9 * err ** -0.2
                if fac > 10.0:
                    fac = 10.0
                elif fac < 0.2:
                    fac = 0.2
            if not accept and fac > 1.0:
                fac = 1.0
            h *= fac
            if h > max_step:
                h = max_step
            if h < 1e-14 * max(1.0, abs(t)):
                status = -1
                break
    return ts[:k], ys[:k, :], status


def _params_array(model: str, p) -> np.ndarray:
    if model == "vdp":
        if not isinstance(p, VdpParams):
            p = VdpParams(float(p))
        return p.as_array()
    if not isinstance(p, ModelParams):
        raise TypeError(f"{model} model requires ModelParams, got {type(p).__name__}")
    return p.as_array()


def integrate(model: str, p, init: Sequence[float],
              cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate one trajectory, keeping every accepted step.

    ``model`` is "atri", "mech" or "vdp"; ``init`` must carry the matching
    dimension (2, 3, 2).  Raises IntegrationError on step-size underflow
    and RuntimeError if the step budget is exhausted.
    """
    if model not in _MODEL_IDS:
        raise ValueError(f"unknown model {model!r}")
    dim = _MODEL_DIM[model]
    init = tuple(float(v) for v in init)
    if len(init) != dim:
        raise ValueError(f"{model} model expects {dim} initial values, got {len(init)}")
    if not all(math.isfinite(v) for v in init):
        raise ValueError("initial state must be finite")

    y0 = np.zeros(3)
    y0[: len(init)] = init
    pvec = _params_array(model, p)
    ts, ys, status = _dp_core(
        _MODEL_IDS[model], pvec, y0, 0.0, cfg.t_end, cfg.rel_tol, cfg.abs_tol,
        cfg.max_step, min(1e-4, cfg.max_step),
        -1.0 if cfg.fixed_step is None else float(cfg.fixed_step), cfg.max_steps,
    )
    if status == -1:
        raise IntegrationError(
            f"step size underflow at t={ts[-1]:.6g} ({model}, rel_tol={cfg.rel_tol})")
    if status == 1:
        if ts[-1] < 0.01 * cfg.t_end:
            raise IntegrationError(
                f"stiffness beyond tolerance budget: {cfg.max_steps} steps spent "
                f"reaching only t={ts[-1]:.3g} of {cfg.t_end:.3g} ({model})")
        raise RuntimeError(f"step budget {cfg.max_steps} exhausted at t={ts[-1]:.6g}")
    return Trajectory(model=model, t=ts, y=ys[:, :dim])


def rhs_arrays(model: str, p, y: np.ndarray) -> np.ndarray:
    """Vectorized right-hand side along a trajectory's state array."""
    pv = _params_array(model, p)
    c = y[:, 0]
    if model == "atri":
        h = y[:, 1]
        dc = pv[0] * h * pv[2] * (pv[6] + c) / (1.0 + c) - pv[4] * c / (pv[5] + c)
        dh = pv[3] ** 2 / (pv[3] ** 2 + c * c) - h
        return np.column_stack([dc, dh])
    if model == "mech":
        th, h = y[:, 1], y[:, 2]
        kind, alpha = int(pv[7]), pv[8]
        if kind == 1:
            t_of_c = alpha * c / (1.0 + alpha * c)
        elif kind == 2:
            t_of_c = alpha * c * c / (1.0 + alpha * c * c)
        else:
            t_of_c = np.zeros_like(c)
        dc = (pv[0] * h * pv[2] * (pv[6] + c) / (1.0 + c)
              - pv[4] * c / (pv[5] + c) + pv[1] * th)
        dth = -th + t_of_c
        dh = pv[3] ** 2 / (pv[3] ** 2 + c * c) - h
        return np.column_stack([dc, dth, dh])
    x, yy = y[:, 0], y[:, 1]
    return np.column_stack([(yy + x - x ** 3 / 3.0) / pv[0], -pv[0] * x])


def _find_peaks(t: np.ndarray, c: np.ndarray, dcdt: np.ndarray) -> tuple:
    """Peak times and heights from + -> - sign changes of dc/dt.

    Each peak is sharpened with the vertex of the parabola through the
    three samples around the crossing.
    """
    times, heights = [], []
    sgn = np.sign(dcdt)
    idx = np.nonzero((sgn[:-1] > 0) & (sgn[1:] <= 0))[0]
    for i in idx:
        j0 = max(i - 1, 0)
        j2 = min(i + 2, len(t) - 1)
        if j2 - j0 < 2:
            times.append(t[i])
            heights.append(c[i])
            continue
        tt = t[j0:j2 + 1][:3]
        cc = c[j0:j2 + 1][:3]
        denom = (tt[0] - tt[1]) * (tt[0] - tt[2]) * (tt[1] - tt[2])
        if denom == 0:
            times.append(t[i])
            heights.append(c[i])
            continue
        a_coef = (tt[2] * (cc[1] - cc[0]) + tt[1] * (cc[0] - cc[2])
                  + tt[0] * (cc[2] - cc[1])) / denom
        b_coef = (tt[2] ** 2 * (cc[0] - cc[1]) + tt[1] ** 2 * (cc[2] - cc[0])
                  + tt[0] ** 2 * (cc[1] - cc[2])) / denom
        if a_coef >= 0:
            times.append(t[i])
            heights.append(c[i])
            continue
        tv = -b_coef / (2.0 * a_coef)
        cv = cc[0] + (tv - tt[0]) * (b_coef + a_coef * (tv + tt[0]))
        # fall back to the raw sample if the fit left the bracket
        if tt[0] <= tv <= tt[2]:
            times.append(tv)
            heights.append(cv)
        else:
            times.append(t[i])
            heights.append(c[i])
    return np.array(times), np.array(heights)


def _settled_at_equilibrium(model: str, p, final: tuple, tol: float = 1e-4) -> bool:
    if model == "vdp":
        return False
    try:
        eqs = (_eq.equilibria_atri(p) if model == "atri" else _eq.equilibria_mech(p))
    except ValueError:
        return False
    for e in eqs:
        ref = (e.c, e.h) if model == "atri" else (e.c, e.theta, e.h)
        if max(abs(a - b) for a, b in zip(final, ref)) < tol:
            return True
    return False


def measure_cycle(model: str, p, init: Sequence[float],
                  cfg: IntegratorConfig = IntegratorConfig()) -> CycleSummary:
    """Detect and measure a sustained limit cycle from one trajectory.

    The first transient_fraction of the run is discarded, and the first two
    peaks inside the window are dropped as a guard against transient
    leakage when enough peaks remain.  Runs with too few peaks that have
    not settled either are retried with t_end extended up to fourfold
    (periods diverge near the homoclinic end of the cycle branch); runs
    whose peak heights or periods wobble beyond tolerance are retried with
    tighter integration tolerances, since near onset the cycle attracts
    weakly and local error shows up as spurious cycle-to-cycle modulation.
    """
    # (t_end multiplier, tolerance divisor) escalation ladder
    attempts = [(1, 1.0), (2, 1.0), (2, 10.0), (2, 100.0), (4, 100.0)]
    last = None
    for extend, refine in attempts:
        run_cfg = replace(cfg, t_end=cfg.t_end * extend,
                          rel_tol=cfg.rel_tol / refine, abs_tol=cfg.abs_tol / refine)
        traj = integrate(model, p, init, run_cfg)
        mask = traj.t >= run_cfg.transient_fraction * run_cfg.t_end
        t = traj.t[mask]
        y = traj.y[mask]
        c = y[:, 0]
        dcdt = rhs_arrays(model, p, y)[:, 0]
        peak_t, peak_c = _find_peaks(t, c, dcdt)
        if len(peak_t) >= 7:
            peak_t, peak_c = peak_t[2:], peak_c[2:]
        c_min, c_max = float(c.min()), float(c.max())
        amp = c_max - c_min
        final = traj.final_state()

        if len(peak_t) >= 5 and amp > AMPLITUDE_FLOOR:
            drift = (peak_c.max() - peak_c.min()) / amp
            periods = np.diff(peak_t)
            period = float(periods.mean())
            spread = float((periods.max() - periods.min()) / period)
            if drift < PEAK_DRIFT_TOL and spread < PERIOD_SPREAD_TOL:
                return CycleSummary(
                    oscillating=True, c_min=c_min, c_max=c_max, period=period,
                    frequency=1.0 / period, n_cycles_measured=len(periods),
                    converged=True, final_state=final, t_end_used=run_cfg.t_end)
            if np.all(np.diff(peak_c) < 0):
                # monotone ringdown toward a weakly stable focus
                return CycleSummary(
                    oscillating=False, c_min=c_min, c_max=c_max, period=math.nan,
                    frequency=math.nan, n_cycles_measured=0,
                    converged=_settled_at_equilibrium(model, p, final),
                    final_state=final, t_end_used=run_cfg.t_end, flag="decaying")
            last = CycleSummary(
                oscillating=False, c_min=c_min, c_max=c_max, period=math.nan,
                frequency=math.nan, n_cycles_measured=0, converged=False,
                final_state=final, t_end_used=run_cfg.t_end, flag="inconclusive")
            continue

        if _settled_at_equilibrium(model, p, final):
            return CycleSummary(
                oscillating=False, c_min=c_min, c_max=c_max, period=math.nan,
                frequency=math.nan, n_cycles_measured=0, converged=True,
                final_state=final, t_end_used=run_cfg.t_end, flag="settled")

        quiet = amp <= AMPLITUDE_FLOOR
        last = CycleSummary(
            oscillating=False, c_min=c_min, c_max=c_max, period=math.nan,
            frequency=math.nan, n_cycles_measured=0, converged=quiet,
            final_state=final, t_end_used=run_cfg.t_end,
            flag="settled" if quiet else "inconclusive")
        if quiet:
            return last
    return last


def _default_init(model: str) -> tuple:
    return {"atri": (0.4, 0.5), "mech": (0.4, 0.0, 0.5), "vdp": (2.0, 0.0)}[model]


def sweep(model: str, p_template: ModelParams, param: str, grid,
          cfg: IntegratorConfig = IntegratorConfig(), continuation: bool = False,
          init: Optional[Sequence[float]] = None) -> list:
    """Measure cycles across a parameter grid, optionally carrying the state.

    In continuation (hysteresis) mode each point starts from the final
    state of the previous one, which tracks a stable cycle through
    bistable windows.  Integration failures are recorded per point and do
    not abort the sweep.  Equilibria at each grid value are attached.
    """
    if param not in ("mu", "lambda"):
        raise ValueError("param must be 'mu' or 'lambda'")
    grid = np.asarray(grid, dtype=float)
    if len(grid) > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
        raise ValueError("grid must be strictly monotone")
    if model == "vdp":
        raise ValueError("sweeps are defined for the calcium models")

    start = tuple(init) if init is not None else _default_init(model)
    state = start
    out = []
    for value in grid:
        p = p_template.with_(mu=float(value)) if param == "mu" \
            else p_template.with_(lam=float(value))
        run_init = state if continuation else start
        try:
            summary = measure_cycle(model, p, run_init, cfg)
            if continuation and summary.final_state:
                state = summary.final_state
        except (IntegrationError, RuntimeError) as exc:
            summary = CycleSummary(
                oscillating=False, c_min=math.nan, c_max=math.nan, period=math.nan,
                frequency=math.nan, n_cycles_measured=0, converged=False,
                final_state=(), t_end_used=cfg.t_end, flag=f"error: {exc}")
        eqs = tuple(_eq.equilibria_atri(p) if model == "atri" else _eq.equilibria_mech(p))
        out.append(SweepPoint(param_value=float(value), summary=summary, equilibria=eqs))
    return out


def frequency_profile(model: str, p_template: ModelParams, mu_grid,
                      cfg: IntegratorConfig = IntegratorConfig(),
                      continuation: bool = False,
                      init: Optional[Sequence[float]] = None) -> list:
    """(mu, frequency) for the oscillating points of a mu sweep."""
    points = sweep(model, p_template, "mu", mu_grid, cfg, continuation, init)
    return [(pt.param_value, pt.summary.frequency)
            for pt in points if pt.summary.oscillating]
