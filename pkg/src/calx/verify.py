"""Golden-number regression suite.

Every check pins a published landmark value or a structural property of
the models, with explicit tolerances.  Two sub-claims are marked
``expected_failure``: careful recomputation shows they cannot hold (see
README, "Known discrepancies"), so they are reported as XFAIL rather than
silently relaxed.  A check that unexpectedly passes while marked XFAIL is
flagged XPASS and treated as a failure, so the markers cannot rot.

The same checks back ``calx verify`` and the acceptance test module.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import curves as _curves
from . import equilibria as _eq
from . import simulate as _integ
from . import slowfast as _sf
from .model import ModelParams, StressKind, StressLaw

__all__ = ["CheckResult", "run_all", "warmup", "CRITERIA"]

_P = ModelParams()
_HILL1_10 = StressLaw.hill1(10.0)


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    detail: str = ""
    expected_failure: bool = False
    elapsed: float = 0.0

    @property
    def status(self) -> str:
        if self.passed:
            return "XPASS" if self.expected_failure else "PASS"
        return "XFAIL" if self.expected_failure else "FAIL"

    @property
    def ok(self) -> bool:
        """True when the suite should not count this result as a failure."""
        return self.passed != self.expected_failure


def _close(value: float, target: float, tol: float) -> bool:
    return abs(value - target) <= tol


# --- criterion 1: bifurcation ladder ----------------------------------------------

_LADDER_EXPECTED = (
    (0.27828, _eq.EventKind.DISCR_ZERO),
    (0.28814, _eq.EventKind.FOLD_DET_ZERO),
    (0.28900, _eq.EventKind.HOPF_TR_ZERO),
    (0.28924, _eq.EventKind.DISCR_ZERO),
    (0.28925, _eq.EventKind.FOLD_DET_ZERO),
    (0.28950, _eq.EventKind.DISCR_ZERO),
    (0.49500, _eq.EventKind.HOPF_TR_ZERO),
)


def check_ladder() -> list:
    ladder = _eq.ladder_atri(_P, 0.0, 0.6, tol=1e-5)
    results = []
    ok_count = len(ladder.events) == len(_LADDER_EXPECTED)
    results.append(CheckResult(1, "ladder event count", ok_count,
                               f"{len(ladder.events)} events (expected 7)"))
    for (mu_ref, kind), event in zip(_LADDER_EXPECTED, ladder.events):
        good = _close(event.mu, mu_ref, 1e-4) and event.kind is kind
        results.append(CheckResult(
            1, f"ladder {kind.value} at mu={mu_ref}", good,
            f"found mu={event.mu:.6f} ({event.kind.value}), |err|={abs(event.mu-mu_ref):.1e}"))
    return results


# --- criterion 2: nullcline maximum ------------------------------------------------

def check_nullcline_max() -> list:
    results = []
    c_m, h_m = _eq.nullcline_max(_P)
    results.append(CheckResult(2, "c_M = 0.169", _close(c_m, 0.169, 1e-3),
                               f"c_M = {c_m:.6f}"))
    results.append(CheckResult(2, "mu*h_M = 0.279", _close(_P.mu * h_m, 0.279, 2e-3),
                               f"mu*h_M = {_P.mu * h_m:.6f}"))

    # independent oracle: maximize the sampled flux nullcline per mu
    grid = np.geomspace(1e-3, 10.0, 200_001)
    numeric = []
    for mu in (0.1, 0.27, 0.5, 0.75, 1.0):
        nc = _eq.nullclines_atri(_P.with_(mu=mu), grid)
        numeric.append(grid[int(np.argmax(nc.h_flux))])
    spread = max(numeric) - min(numeric)
    agree = all(_close(v, c_m, 1e-3) for v in numeric)
    results.append(CheckResult(
        2, "c_M independent of mu (numeric maximizer)", agree and spread < 1e-3,
        f"numeric c_M over 5 mu values: [{min(numeric):.5f}, {max(numeric):.5f}]"))
    return results


# --- criterion 3: Hopf curve landmarks ---------------------------------------------

def check_hopf_landmarks() -> list:
    results = []
    mus = _curves.hopf_lambda_zero_mus(_HILL1_10)
    ok = (len(mus) == 2 and _close(mus[0], 0.28900, 1e-3)
          and _close(mus[1], 0.49500, 1e-3))
    results.append(CheckResult(3, "Hopf lam=0 intercepts {0.28900, 0.49500}", ok,
                               f"found {[round(m, 6) for m in mus]}"))
    ext = _curves.hopf_extremals(_HILL1_10)
    results.append(CheckResult(
        3, "lambda_max = 1.68632 at mu_max = 0.20735",
        _close(ext["lambda_max"], 1.68632, 1e-3) and _close(ext["mu_at_max"], 0.20735, 1e-3),
        f"lambda_max={ext['lambda_max']:.6f} at mu={ext['mu_at_max']:.6f}"))
    results.append(CheckResult(
        3, "mu_min = 0.20328 with lambda_min = 1.63989",
        _close(ext["mu_min"], 0.20328, 1e-3) and _close(ext["lambda_at_mu_min"], 1.63989, 1e-3),
        f"mu_min={ext['mu_min']:.6f}, lambda={ext['lambda_at_mu_min']:.6f}"))
    return results


# --- criterion 4: fold branch merge -------------------------------------------------

def check_fold_merge() -> list:
    lam, mu, c = _curves.fold_merge_lambda(_P.with_(stress=_HILL1_10))
    return [CheckResult(4, "fold branches merge at lambda = 0.83 +- 0.05",
                        _close(lam, 0.83, 0.05),
                        f"merge at lambda={lam:.4f} (mu={mu:.4f}, c={c:.4f})")]


# --- criterion 5: lambda_max(alpha) monotone ----------------------------------------

def check_lambda_max_alpha() -> list:
    rows = _curves.lambda_max_vs_alpha(StressKind.HILL1, (1.0, 2.0, 10.0, 100.0))
    lams = [r[1] for r in rows]
    mono = all(a > b for a, b in zip(lams, lams[1:]))
    return [
        CheckResult(5, "lambda_max strictly decreasing over alpha in {1,2,10,100}",
                    mono and all(math.isfinite(v) for v in lams),
                    f"lambda_max = {[round(v, 5) for v in lams]}"),
        CheckResult(5, "lambda_max(100) > 0 (positive limit behavior)",
                    lams[-1] > 0, f"lambda_max(100) = {lams[-1]:.5f}"),
    ]


# --- criterion 6: Hopf morphology ---------------------------------------------------

def check_morphology() -> list:
    results = []
    for kind, label in ((StressKind.HILL1, "Hill1"), (StressKind.HILL2, "Hill2")):
        simple = _curves.hopf_morphology(kind, 10.0)
        bowtie = _curves.hopf_morphology(kind, 1.0)
        try:
            alpha_c = _curves.cusp_alpha(kind)
            cusp = _curves.hopf_morphology(kind, alpha_c)
            cusp_ok = (1.5 <= alpha_c <= 3.0
                       and cusp.morphology is _curves.Morphology.CUSP)
            cusp_detail = f"cusp transition at alpha={alpha_c:.4f}"
        except ValueError as exc:
            cusp_ok, cusp_detail = False, str(exc)
        expected = kind is StressKind.HILL2
        results.append(CheckResult(
            6, f"{label}: Simple at alpha=10",
            simple.morphology is _curves.Morphology.SIMPLE,
            f"got {simple.morphology.value}", expected_failure=expected))
        results.append(CheckResult(
            6, f"{label}: cusp for some alpha in [1.5, 3]", cusp_ok, cusp_detail,
            expected_failure=expected))
        results.append(CheckResult(
            6, f"{label}: BowTie at alpha=1",
            bowtie.morphology is _curves.Morphology.BOWTIE,
            f"got {bowtie.morphology.value}"))
    return results


# --- criterion 7: hysteresis sweep --------------------------------------------------

def check_sweep_hysteresis() -> list:
    grid = np.round(np.arange(0.280, 0.5201, 0.001), 10)
    points = _integ.sweep("atri", _P, "mu", grid, continuation=True)
    osc = [pt.param_value for pt in points if pt.summary.oscillating]
    results = []
    if not osc:
        results.append(CheckResult(7, "oscillation onset mu = 0.2890", False,
                                   "no oscillating points found"))
        return results
    onset, fold = min(osc), max(osc)
    results.append(CheckResult(7, "oscillation onset mu = 0.2890 +- 2e-3",
                               _close(onset, 0.2890, 2e-3), f"onset at mu={onset:.4f}"))
    results.append(CheckResult(7, "stable-cycle fold mu = 0.5106 +- 5e-3",
                               _close(fold, 0.5106, 5e-3), f"last cycle at mu={fold:.4f}"))

    # literal published claim: at mu = 0.5 the (0.4, 0.5) run oscillates and
    # the (0, 0) run settles -- accurate integration contradicts the latter
    p5 = _P.with_(mu=0.5)
    s_a = _integ.measure_cycle("atri", p5, (0.4, 0.5))
    s_b = _integ.measure_cycle("atri", p5, (0.0, 0.0))
    results.append(CheckResult(
        7, "bistability via inits (0.4,0.5) vs (0,0) at mu=0.5",
        s_a.oscillating and not s_b.oscillating,
        f"(0.4,0.5): osc={s_a.oscillating}; (0,0): osc={s_b.oscillating}",
        expected_failure=True))

    # the coexistence itself is real: the equilibrium is linearly stable
    # while the cycle attracts the first initial condition
    eq = _eq.equilibria_atri(p5)
    stable_eq = any(e.klass in (_eq.StabilityClass.STABLE_SPIRAL,
                                _eq.StabilityClass.STABLE_NODE) for e in eq)
    results.append(CheckResult(
        7, "bistability at mu=0.5: stable equilibrium coexists with stable cycle",
        stable_eq and s_a.oscillating,
        f"equilibrium classes {[e.klass.value for e in eq]}, cycle amp "
        f"{s_a.c_max - s_a.c_min:.3f}"))
    return results


# --- criterion 8: mechanochemical suppression ---------------------------------------

def check_suppression() -> list:
    results = []
    for lam, want in ((0.0, True), (1.0, True), (3.0, False)):
        p = _P.with_(mu=0.2894, lam=lam, stress=_HILL1_10)
        s = _integ.measure_cycle("mech", p, (0.4, 0.0, 0.5))
        results.append(CheckResult(
            8, f"mu=0.2894, lambda={lam}: oscillating={want}",
            s.oscillating == want, f"oscillating={s.oscillating} flag={s.flag!r}"))
    return results


# --- criterion 9: 2D layer constants -------------------------------------------------

def check_layer_2d() -> list:
    layer = _sf.transition_layer_2d(_P)
    results = [CheckResult(
        9, "t_turning within 1e-2 of 0.82 (and of 0.8154)",
        _close(layer.t_turning, 0.82, 1e-2) and _close(layer.t_turning, 0.8154, 1e-2),
        f"t_turning={layer.t_turning:.6f}")]
    turns = [_sf.transition_layer_2d(_P.with_(mu=mu)) for mu in (0.3, 0.4, 0.5)]
    t_spread = max(l.t_turning for l in turns) - min(l.t_turning for l in turns)
    b_spread = max(l.t_back for l in turns) - min(l.t_back for l in turns)
    results.append(CheckResult(
        9, "t_turning and t_back mu-independent to 1e-9",
        t_spread < 1e-9 and b_spread < 1e-9,
        f"spreads: t_turning {t_spread:.1e}, t_back {b_spread:.1e}"))
    return results


# --- criterion 10: 3D turning condition ----------------------------------------------

def check_turning_condition() -> list:
    grid = np.geomspace(1e-3, 100.0, 20_001)
    p_good = _P.with_(mu=0.3, lam=1.0, stress=_HILL1_10)
    margin_good = _sf.turning_margin(p_good, grid)
    p_bad = p_good.with_(K=1.5)
    margin_bad = _sf.turning_margin(p_bad, grid)
    return [
        CheckResult(10, "turning margin > 0 along full break curve for K=1/7",
                    bool(np.all(margin_good > 0)),
                    f"min margin {margin_good.min():.3e}"),
        CheckResult(10, "turning margin < 0 along full break curve for K=1.5",
                    bool(np.all(margin_bad < 0)),
                    f"max margin {margin_bad.max():.3e}"),
    ]


# --- criterion 11: property suites ----------------------------------------------------

def _random_params(rng) -> ModelParams:
    kind = (StressKind.NONE, StressKind.HILL1, StressKind.HILL2)[rng.integers(0, 3)]
    alpha = float(np.exp(rng.uniform(np.log(0.5), np.log(50.0))))
    stress = StressLaw(kind, alpha) if kind is not StressKind.NONE else StressLaw.none()
    return _P.with_(mu=float(rng.uniform(0.0, 1.0)),
                    lam=float(rng.uniform(0.0, 3.0)), stress=stress)


def _full_jacobian(p: ModelParams, e) -> np.ndarray:
    from .model import stress_derivative
    c = e.c
    hstar = p.K2 ** 2 / (p.K2 ** 2 + c * c)
    r1c = (p.mu * hstar * p.K1 * (1.0 - p.b) / (1.0 + c) ** 2
           - p.Gamma * p.K / (p.K + c) ** 2)
    r1h = p.mu * p.K1 * (p.b + c) / (1.0 + c)
    r3c = -2.0 * c * p.K2 ** 2 / (p.K2 ** 2 + c * c) ** 2
    return np.array([
        [r1c, p.lam, r1h],
        [stress_derivative(p.stress, c), -1.0, 0.0],
        [r3c, 0.0, -1.0],
    ])


def check_properties() -> list:
    results = []
    rng = np.random.default_rng(20260809)
    worst_res = 0.0
    worst_eig = 0.0
    n_eq = 0
    for _ in range(1000):
        p = _random_params(rng)
        for e in _eq.equilibria_mech(p):
            n_eq += 1
            worst_res = max(worst_res, e.residual)
            eigs = np.linalg.eigvals(_full_jacobian(p, e))
            worst_eig = max(worst_eig, float(np.min(np.abs(eigs + 1.0))))
    results.append(CheckResult(
        11, "equilibrium residual < 1e-9 over 1000 random draws",
        worst_res < 1e-9, f"{n_eq} equilibria, worst residual {worst_res:.2e}"))
    results.append(CheckResult(
        11, "3D Jacobian eigenvalue -1 within 1e-10 (eigvals oracle)",
        worst_eig < 1e-10, f"worst |eig + 1| = {worst_eig:.2e}"))

    # mu = 0: only stable nodes or saddles (Tr < 0, Discr > 0)
    rng2 = np.random.default_rng(7)
    cs = np.exp(rng2.uniform(np.log(1e-3), np.log(50.0), 10_000))
    alphas = np.exp(rng2.uniform(np.log(0.5), np.log(50.0), 10_000))
    bad = 0
    for c, alpha in zip(cs, alphas):
        stress = StressLaw.hill1(float(alpha))
        t_of_c = alpha * c / (1.0 + alpha * c)
        lam = _P.Gamma * c / ((_P.K + c) * t_of_c)  # puts c on the mu=0 branch
        p = _P.with_(mu=0.0, lam=float(lam), stress=stress)
        tr, det, discr = _eq.jacobian_block(p, float(c))
        if not (tr < 0 and discr > 0):
            bad += 1
    results.append(CheckResult(
        11, "mu=0: Tr < 0 and Discr > 0 on 10^4 (lambda, c*) samples",
        bad == 0, f"{bad} violations"))

    # composite period converges to the full system as eps shrinks
    ghat = _P.Gamma / _P.K1
    errors = []
    for eps in (0.02, 0.01, 0.005):
        p = _P.with_(mu=0.3, K1=1.0 / eps, Gamma=ghat / eps)
        comp = _sf.compose_relaxation_oscillation("atri", p, eps=eps)
        cfg = _integ.IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11)
        full = _integ.measure_cycle("atri", p, (0.4, 0.5), cfg)
        errors.append(abs(comp.period_estimate - full.period) / full.period)
    decreasing = all(a > b for a, b in zip(errors, errors[1:]))
    results.append(CheckResult(
        11, "composite period error decreases over eps in {0.02, 0.01, 0.005}",
        decreasing, f"relative errors {[round(e, 4) for e in errors]}"))
    return results


# --- criterion 12: frequency profiles --------------------------------------------------

def check_frequency_profiles() -> list:
    results = []
    grid = np.linspace(0.30, 0.49, 20)
    prof = _integ.frequency_profile("atri", _P, grid)
    freqs = [f for _, f in prof]
    mono = len(prof) == len(grid) and all(a < b for a, b in zip(freqs, freqs[1:]))
    results.append(CheckResult(
        12, "atri frequency strictly increasing on [0.30, 0.49]", mono,
        f"{len(prof)}/{len(grid)} oscillating, f in "
        f"[{min(freqs):.4f}, {max(freqs):.4f}]" if freqs else "no oscillating points"))

    for lam in (0.1, 0.5, 1.0):
        p = _P.with_(lam=lam, stress=_HILL1_10)
        lo, hi = _hopf_window(lam)
        window = np.linspace(lo + 1e-4, hi - 1e-4, 25)
        prof = _integ.frequency_profile("mech", p, window)
        if len(prof) < 10:
            results.append(CheckResult(
                12, f"mech lambda={lam}: edge-steepening frequency profile", False,
                f"only {len(prof)} oscillating points in the window"))
            continue
        mus = np.array([m for m, _ in prof])
        fs = np.array([f for _, f in prof])
        slopes = np.abs(np.diff(fs) / np.diff(mus))
        n = len(slopes)
        edge = max(slopes[: max(2, n // 6)].max(), slopes[-max(2, n // 6):].max())
        interior = slopes[n // 3: 2 * n // 3].max()
        results.append(CheckResult(
            12, f"mech lambda={lam}: interior slope < 20% of edge slope",
            interior < 0.2 * edge,
            f"edge {edge:.2f}, interior {interior:.2f}, ratio {interior / edge:.3f}"))
    return results


def _hopf_window(lam: float) -> tuple:
    """mu interval cut by the Hopf curve at height lam (Hill1, alpha=10)."""
    from scipy.optimize import brentq
    ext = _curves.hopf_extremals(_HILL1_10)
    c_peak = ext["c_at_lambda_max"]
    f = lambda c: float(_curves.hopf_lambda(c, _HILL1_10)) - lam
    c1 = brentq(f, 0.15, c_peak, xtol=1e-12)
    c2 = brentq(f, c_peak, 2.0, xtol=1e-12)
    mus = sorted((float(_curves.hopf_mu_generic(c1)), float(_curves.hopf_mu_generic(c2))))
    return mus[0], mus[1]


# --- driver ------------------------------------------------------------------------------

CRITERIA = (
    (1, "bifurcation ladder", check_ladder, 5.0, True),
    (2, "nullcline maximum", check_nullcline_max, 1.0, True),
    (3, "Hopf curve landmarks", check_hopf_landmarks, 5.0, True),
    (4, "fold branch merge", check_fold_merge, 5.0, True),
    (5, "lambda_max vs alpha", check_lambda_max_alpha, 10.0, True),
    (6, "Hopf morphology", check_morphology, 30.0, True),
    (7, "hysteresis sweep", check_sweep_hysteresis, 120.0, False),
    (8, "mechanochemical suppression", check_suppression, 30.0, True),
    (9, "2D transition layer constants", check_layer_2d, 1.0, True),
    (10, "3D turning condition", check_turning_condition, 5.0, True),
    (11, "property suites", check_properties, 300.0, False),
    (12, "frequency profiles", check_frequency_profiles, 180.0, False),
)


def warmup():
    """Trigger kernel compilation outside any timed check."""
    _integ.integrate("atri", _P, (0.4, 0.5), _integ.IntegratorConfig(t_end=1.0))
    _integ.integrate("mech", _P.with_(lam=0.1, stress=_HILL1_10), (0.4, 0.0, 0.5),
                     _integ.IntegratorConfig(t_end=1.0))
    _integ.integrate("vdp", 0.25, (2.0, 0.0), _integ.IntegratorConfig(t_end=1.0))


def run_all(quick: bool = False) -> list:
    """Run the full suite (or the fast subset) and return all CheckResults."""
    warmup()
    out = []
    for number, name, fn, budget, in_quick in CRITERIA:
        if quick and not in_quick:
            continue
        t0 = time.perf_counter()
        results = fn()
        elapsed = time.perf_counter() - t0
        for r in results:
            r.elapsed = elapsed
        if elapsed > budget:
            out.append(CheckResult(number, f"{name}: runtime < {budget:.0f}s", False,
                                   f"took {elapsed:.1f}s", elapsed=elapsed))
        out.extend(results)
    return out
