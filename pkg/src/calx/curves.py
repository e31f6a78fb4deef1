"""Closed-form two-parameter bifurcation geometry in the (mu, lam) plane.

The stability conditions of the mechanochemical model are linear in mu and
lam once the steady-state relation is imposed, so the loci where the trace,
determinant or discriminant of the 2x2 stability block vanishes can be
parametrized by the equilibrium calcium level c:

* Hopf curve: Tr = 0 and the steady-state relation give mu(c) and lam(c)
  explicitly; mu(c) does not involve the stress law at all.
* Fold curve: Det = 0 and the steady-state relation form a 2x2 linear
  system solved per sample.
* Discriminant curve: Discr = 0 is quadratic in mu and linear in lam;
  lam is eliminated through the steady-state relation and the resulting
  quadratic in mu is solved for both roots.

Everything works for any stress law that provides T and T'.  The formulas
assume the receptor half-saturation equals the calcium scale (K2 = 1, the
value used everywhere in practice); the functions reject other K2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams, StressKind, StressLaw, stress_derivative, stress_eval

__all__ = [
    "CurveKind",
    "Morphology",
    "CurveSample",
    "BifurcationCurve",
    "MorphologyResult",
    "hopf_mu",
    "hopf_mu_generic",
    "hopf_lambda",
    "hopf_curve",
    "fold_curve",
    "discr_curve",
    "fold_merge_lambda",
    "hopf_lambda_zero_mus",
    "fold_lambda_zero_mus",
    "discr_lambda_zero_mus",
    "mu_min_point",
    "lambda_max_vs_alpha",
    "hopf_extremals",
    "hopf_morphology",
    "cusp_alpha",
    "curve_summary",
]

DEFAULT_C_GRID = np.geomspace(1e-4, 50.0, 2000)

# Samples whose (mu, lam) fall outside a generous physical window are the
# near-singular tails of the linear solves; they are discarded and counted.
_MU_CAP, _LAM_CAP = 10.0, 1e3


class CurveKind(Enum):
    HOPF = "hopf"
    FOLD = "fold"
    DISCRIMINANT = "discr"


class Morphology(Enum):
    SIMPLE = "simple"
    CUSP = "cusp"
    BOWTIE = "bowtie"


@dataclass(frozen=True)
class CurveSample:
    c: float
    mu: float
    lam: float


@dataclass(frozen=True)
class BifurcationCurve:
    """c-ordered samples of one locus, restricted to mu >= 0 and lam >= 0."""

    kind: CurveKind
    stress: StressLaw
    c: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    n_discarded: int = 0        # samples dropped for negative/out-of-range mu or lam
    n_flagged: int = 0          # singular linear systems, complex roots, T(c) = 0,
                                # or trace-zero samples that are not Hopf points

    @property
    def samples(self) -> list:
        return [CurveSample(*t) for t in zip(self.c, self.mu, self.lam)]


def _check_params(p: ModelParams):
    if p.K2 != 1.0:
        raise ValueError("parametric curves assume K2 = 1 (the value used throughout)")


# Module-level default constants so the scalar helpers below stay cheap.
_P0 = ModelParams()


def hopf_mu_generic(c, p: ModelParams = _P0):
    """mu(c) on the trace-zero locus; independent of the stress law."""
    c = np.asarray(c, dtype=float)
    out = ((1.0 + c * c) * (1.0 + c) ** 2
           * (1.0 + p.Gamma * p.K / (p.K + c) ** 2) / (p.K1 * (1.0 - p.b)))
    return out if out.ndim else float(out)


def hopf_mu(c, p: ModelParams = _P0):
    """Alias of hopf_mu_generic with the conventional name."""
    return hopf_mu_generic(c, p)


def hopf_lambda(c, stress: StressLaw, p: ModelParams = _P0):
    """lam(c) on the trace-zero locus for the given stress law."""
    c = np.asarray(c, dtype=float)
    t = stress_eval(stress, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (p.Gamma * c / (p.K + c)
               - ((p.b + c) * (1.0 + c) / (1.0 - p.b))
               * (1.0 + p.Gamma * p.K / (p.K + c) ** 2)) / t
    return out if out.ndim else float(out)


def _block_at_hopf_sample(p: ModelParams, c: float, mu: float, lam: float) -> tuple:
    """(trace, det) of the stability block at an implied-equilibrium sample."""
    hstar = 1.0 / (1.0 + c * c)
    r1c = mu * hstar * p.K1 * (1.0 - p.b) / (1.0 + c) ** 2 - p.Gamma * p.K / (p.K + c) ** 2
    r1h = mu * p.K1 * (p.b + c) / (1.0 + c)
    r3c = -2.0 * c / (1.0 + c * c) ** 2
    det = -r1c - r1h * r3c - lam * stress_derivative(p.stress, c)
    return r1c - 1.0, det


def hopf_curve(p: ModelParams, c_grid=None) -> BifurcationCurve:
    """The Hopf locus for p.stress; p.mu and p.lam are ignored.

    Samples where T(c) = 0 (so lam(c) is undefined) are skipped, and
    trace-zero samples whose determinant is nonpositive are excluded as
    well: they are neutral-saddle points, not Hopf points.
    """
    _check_params(p)
    c = np.asarray(DEFAULT_C_GRID if c_grid is None else c_grid, dtype=float)
    mu = hopf_mu_generic(c, p)
    t_vals = stress_eval(p.stress, c)
    lam = hopf_lambda(c, p.stress, p)

    flagged = ~np.isfinite(lam) | (t_vals == 0.0)
    keep = ~flagged & (mu >= 0) & (lam >= 0)
    # drop neutral-saddle points (Tr = 0 but Det <= 0)
    neutral = np.zeros_like(keep)
    for i in np.nonzero(keep)[0]:
        pp = p.with_(mu=float(mu[i]), lam=float(lam[i]))
        _, det = _block_at_hopf_sample(pp, float(c[i]), float(mu[i]), float(lam[i]))
        if det <= 0:
            neutral[i] = True
    keep &= ~neutral
    discarded = int(np.count_nonzero(~flagged & ~neutral & ~keep))
    return BifurcationCurve(kind=CurveKind.HOPF, stress=p.stress,
                            c=c[keep], mu=mu[keep], lam=lam[keep],
                            n_discarded=discarded,
                            n_flagged=int(np.count_nonzero(flagged | neutral)))


def _fold_system(p: ModelParams, c: float) -> tuple:
    """Rows of the linear system {steady state, Det = 0} in (mu, lam) at c."""
    b, K, K1, Gam = p.b, p.K, p.K1, p.Gamma
    a11 = K1 * (b + c) / ((1.0 + c * c) * (1.0 + c))
    a12 = float(stress_eval(p.stress, c))
    r1 = Gam * c / (K + c)
    a21 = K1 / ((1.0 + c) * (1.0 + c * c)) * ((1.0 - b) / (1.0 + c)
                                              - 2.0 * c * (b + c) / (1.0 + c * c))
    a22 = float(stress_derivative(p.stress, c))
    r2 = Gam * K / (K + c) ** 2
    return a11, a12, r1, a21, a22, r2


def fold_curve(p: ModelParams, c_grid=None) -> BifurcationCurve:
    """The fold (saddle-node) locus: Det = 0 together with the steady-state relation."""
    _check_params(p)
    c = np.asarray(DEFAULT_C_GRID if c_grid is None else c_grid, dtype=float)
    mu = np.full_like(c, np.nan)
    lam = np.full_like(c, np.nan)
    flagged = 0
    for i, ci in enumerate(c):
        a11, a12, r1, a21, a22, r2 = _fold_system(p, float(ci))
        det = a11 * a22 - a12 * a21
        scale = max(abs(a11 * a22), abs(a12 * a21), 1e-300)
        if abs(det) < 1e-12 * scale:
            flagged += 1
            continue
        mu[i] = (r1 * a22 - a12 * r2) / det
        lam[i] = (a11 * r2 - r1 * a21) / det
    ok = np.isfinite(mu)
    keep = ok & (mu >= 0) & (lam >= 0) & (mu <= _MU_CAP) & (lam <= _LAM_CAP)
    return BifurcationCurve(kind=CurveKind.FOLD, stress=p.stress,
                            c=c[keep], mu=mu[keep], lam=lam[keep],
                            n_discarded=int(np.count_nonzero(ok & ~keep)),
                            n_flagged=flagged)


def _discr_mu_roots(p: ModelParams, c: float) -> list:
    """Both mu-roots of Discr = 0 at c, with lam from the steady-state relation."""
    b, K, K1, Gam = p.b, p.K, p.K1, p.Gamma
    t = float(stress_eval(p.stress, c))
    tp = float(stress_derivative(p.stress, c))
    if t == 0.0:
        return []
    # R1c = mu*A - B, R1h*R3c = mu*C, lam*T' = E - mu*D after eliminating lam
    A = K1 * (1.0 - b) / ((1.0 + c * c) * (1.0 + c) ** 2)
    B = Gam * K / (K + c) ** 2
    C = -2.0 * c * K1 * (b + c) / ((1.0 + c) * (1.0 + c * c) ** 2)
    ratio = tp / t
    E = ratio * Gam * c / (K + c)
    D = ratio * K1 * (b + c) / ((1.0 + c * c) * (1.0 + c))
    qa = A * A
    qb = 2.0 * A * (1.0 - B) + 4.0 * C - 4.0 * D
    qc = (1.0 - B) ** 2 + 4.0 * E
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        return []
    root = math.sqrt(disc)
    out = []
    for mu in ((-qb + root) / (2.0 * qa), (-qb - root) / (2.0 * qa)):
        lam = (Gam * c / (K + c) - mu * K1 * (b + c) / ((1.0 + c * c) * (1.0 + c))) / t
        out.append((mu, lam))
    return out


def discr_curve(p: ModelParams, c_grid=None) -> BifurcationCurve:
    """The discriminant-zero locus (spiral/node boundary); both mu-roots per sample."""
    _check_params(p)
    c = np.asarray(DEFAULT_C_GRID if c_grid is None else c_grid, dtype=float)
    cs, mus, lams = [], [], []
    flagged = 0
    discarded = 0
    for ci in c:
        roots = _discr_mu_roots(p, float(ci))
        if not roots:
            flagged += 1
            continue
        for mu, lam in roots:
            if 0 <= mu <= _MU_CAP and 0 <= lam <= _LAM_CAP:
                cs.append(ci)
                mus.append(mu)
                lams.append(lam)
            else:
                discarded += 1
    return BifurcationCurve(kind=CurveKind.DISCRIMINANT, stress=p.stress,
                            c=np.array(cs), mu=np.array(mus), lam=np.array(lams),
                            n_discarded=discarded, n_flagged=flagged)


def fold_merge_lambda(p: ModelParams, c_grid=None) -> tuple:
    """(lam, mu, c) where the two fold branches meet: the maximum of lam on the fold curve."""
    curve = fold_curve(p, c_grid)
    if len(curve.c) < 3:
        raise ValueError("fold curve has too few physical samples to locate the merge")
    i = int(np.argmax(curve.lam))

    def lam_at(c: float) -> float:
        a11, a12, r1, a21, a22, r2 = _fold_system(p, c)
        det = a11 * a22 - a12 * a21
        return (a11 * r2 - r1 * a21) / det

    lo = curve.c[max(i - 1, 0)]
    hi = curve.c[min(i + 1, len(curve.c) - 1)]
    # golden-section refinement of the interior maximum
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, bb = lo, hi
    x1 = bb - invphi * (bb - a)
    x2 = a + invphi * (bb - a)
    f1, f2 = lam_at(x1), lam_at(x2)
    for _ in range(200):
        if bb - a < 1e-13 * (1.0 + abs(a)):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (bb - a)
            f2 = lam_at(x2)
        else:
            bb, x2, f2 = x2, x1, f1
            x1 = bb - invphi * (bb - a)
            f1 = lam_at(x1)
    c_star = 0.5 * (a + bb)
    a11, a12, r1, a21, a22, r2 = _fold_system(p, c_star)
    det = a11 * a22 - a12 * a21
    return ((a11 * r2 - r1 * a21) / det, (r1 * a22 - a12 * r2) / det, c_star)


def _zero_crossing_roots(fn: Callable, grid: np.ndarray) -> list:
    """Refined roots of fn at every sign change over the grid."""
    vals = np.array([fn(float(c)) for c in grid])
    ok = np.isfinite(vals)
    sgn = np.sign(vals)
    roots = []
    for i in range(len(grid) - 1):
        if ok[i] and ok[i + 1] and sgn[i] * sgn[i + 1] < 0:
            roots.append(brentq(fn, grid[i], grid[i + 1], xtol=1e-14, rtol=8.9e-16))
    return roots


def hopf_lambda_zero_mus(stress: StressLaw, p: ModelParams = _P0,
                         c_grid=None) -> list:
    """mu values at which the Hopf curve crosses lam = 0 (pure-model Hopf points)."""
    grid = np.asarray(DEFAULT_C_GRID if c_grid is None else c_grid, dtype=float)
    roots = _zero_crossing_roots(lambda c: hopf_lambda(c, stress, p), grid)
    return sorted(float(hopf_mu_generic(c0, p)) for c0 in roots)


def fold_lambda_zero_mus(p: ModelParams, c_grid=None,
                         mu_window: tuple = (0.0, 1.0)) -> list:
    """mu values at which the fold curve crosses lam = 0; restricted to a mu window.

    The window excludes the near-singular tails of the linear solve, where
    mu blows up by orders of magnitude.
    """

    def lam_at(c: float) -> float:
        a11, a12, r1, a21, a22, r2 = _fold_system(p, c)
        det = a11 * a22 - a12 * a21
        return (a11 * r2 - r1 * a21) / det

    def mu_at(c: float) -> float:
        a11, a12, r1, a21, a22, r2 = _fold_system(p, c)
        det = a11 * a22 - a12 * a21
        return (r1 * a22 - a12 * r2) / det

    grid = np.asarray(DEFAULT_C_GRID if c_grid is None else c_grid, dtype=float)
    out = []
    for c0 in _zero_crossing_roots(lam_at, grid):
        mu = mu_at(c0)
        if mu_window[0] <= mu <= mu_window[1]:
            out.append(float(mu))
    return sorted(out)


def discr_lambda_zero_mus(p: ModelParams, c_grid=None,
                          mu_window: tuple = (0.0, 1.0)) -> list:
    """mu values at which the discriminant curve crosses lam = 0."""
    grid = np.asarray(DEFAULT_C_GRID if c_grid is None else c_grid, dtype=float)
    out = []
    for branch in (0, 1):

        def lam_at(c: float) -> float:
            roots = _discr_mu_roots(p, c)
            return roots[branch][1] if len(roots) == 2 else math.nan

        def mu_at(c: float) -> float:
            roots = _discr_mu_roots(p, c)
            return roots[branch][0] if len(roots) == 2 else math.nan

        for c0 in _zero_crossing_roots(lam_at, grid):
            mu = mu_at(c0)
            if math.isfinite(mu) and mu_window[0] <= mu <= mu_window[1]:
                out.append(float(mu))
    return sorted(out)


def _dlam_dc(stress: StressLaw, c: float, p: ModelParams = _P0) -> float:
    """Centered finite difference of lam(c) with relative step 1e-6."""
    dc = 1e-6 * c
    return (hopf_lambda(c + dc, stress, p) - hopf_lambda(c - dc, stress, p)) / (2.0 * dc)


def _dmu_dc(c: float, p: ModelParams = _P0) -> float:
    dc = 1e-6 * c
    return (hopf_mu_generic(c + dc, p) - hopf_mu_generic(c - dc, p)) / (2.0 * dc)


def _lambda_extrema(stress: StressLaw, p: ModelParams = _P0,
                    c_grid=None) -> list:
    """All interior zeros of dlam/dc on the grid, refined to |dc| < 1e-10."""
    c = np.asarray(DEFAULT_C_GRID if c_grid is None else c_grid, dtype=float)
    d = np.array([_dlam_dc(stress, ci, p) for ci in c])
    ok = np.isfinite(d)
    zs = []
    for i in range(len(c) - 1):
        if ok[i] and ok[i + 1] and d[i] * d[i + 1] < 0:
            z = brentq(lambda x: _dlam_dc(stress, x, p), c[i], c[i + 1],
                       xtol=1e-10, rtol=8.9e-16)
            zs.append(z)
    return zs


def mu_min_point(p: ModelParams = _P0) -> tuple:
    """(c, mu_min) at the unique interior minimum of mu(c); stress-law independent."""
    c0 = brentq(lambda c: _dmu_dc(c, p), 0.05, 5.0, xtol=1e-12, rtol=8.9e-16)
    return c0, float(hopf_mu_generic(c0, p))


def hopf_extremals(stress: StressLaw, p: ModelParams = _P0) -> dict:
    """Landmark values of the Hopf curve.

    Returns lambda_max with its mu (oscillation ceiling in lam), and mu_min
    with its lam (oscillation floor in mu, where dmu/dc = 0).
    """
    zs = _lambda_extrema(stress, p)
    if not zs:
        raise ValueError("no interior extremum of lam(c) found on the default grid")
    lam_vals = [float(hopf_lambda(z, stress, p)) for z in zs]
    i = int(np.argmax(lam_vals))
    c_lam = zs[i]
    c_mu, mu_min = mu_min_point(p)
    return {
        "lambda_max": lam_vals[i],
        "mu_at_max": float(hopf_mu_generic(c_lam, p)),
        "c_at_lambda_max": c_lam,
        "mu_min": mu_min,
        "lambda_at_mu_min": float(hopf_lambda(c_mu, stress, p)),
        "c_at_mu_min": c_mu,
    }


def lambda_max_vs_alpha(kind: StressKind, alpha_grid, p: ModelParams = _P0) -> list:
    """(alpha, lambda_max, mu_at_max) for each alpha; flags alphas with no interior max."""
    out = []
    for alpha in np.asarray(alpha_grid, dtype=float):
        stress = StressLaw(kind, float(alpha))
        try:
            ext = hopf_extremals(stress, p)
        except ValueError:
            out.append((float(alpha), math.nan, math.nan))
            continue
        out.append((float(alpha), ext["lambda_max"], ext["mu_at_max"]))
    return out


@dataclass(frozen=True)
class MorphologyResult:
    morphology: Morphology
    c_mu: float                  # location of the mu(c) minimum
    c_lambda: float              # location of the dominant lam(c) maximum
    crossings: int               # transversal self-intersections of the curve
    resolved: bool = True
    notes: str = ""


def _branch_gap_crossings(stress: StressLaw, p: ModelParams, c_mu: float,
                          n: int = 1201) -> int:
    """Sign changes of lam(left branch) - lam(right branch) over matched mu.

    mu(c) falls to its minimum at c_mu and rises after it, so each
    mu-level above the minimum has exactly one preimage on each side; the
    curve self-intersects iff the lam-difference of the two preimages
    changes sign.
    """
    mu_min = float(hopf_mu_generic(c_mu, p))
    mu_cap = min(float(hopf_mu_generic(DEFAULT_C_GRID[0], p)),
                 float(hopf_mu_generic(DEFAULT_C_GRID[-1], p)))
    levels = mu_min + np.geomspace(1e-9, 0.95 * (mu_cap - mu_min), n)
    gaps = np.empty(n)
    for i, m in enumerate(levels):
        f = lambda c: hopf_mu_generic(c, p) - m
        c_left = brentq(f, DEFAULT_C_GRID[0], c_mu, xtol=1e-13)
        c_right = brentq(f, c_mu, DEFAULT_C_GRID[-1], xtol=1e-13)
        gaps[i] = hopf_lambda(c_left, stress, p) - hopf_lambda(c_right, stress, p)
    sgn = np.sign(gaps)
    return int(np.count_nonzero(sgn[:-1] * sgn[1:] < 0))


def hopf_morphology(kind: StressKind, alpha: float, p: ModelParams = _P0,
                    cusp_rtol: float = 1e-6) -> MorphologyResult:
    """Classify the Hopf curve as SIMPLE, CUSP or BOWTIE.

    A parametric cusp requires dmu/dc and dlam/dc to vanish at the same c;
    since mu(c) has a single interior minimum at c_mu, the test reduces to
    |dlam/dc(c_mu)| below ``cusp_rtol`` of the local lam-slope scale.
    Otherwise the curve is a bow-tie exactly when it self-intersects,
    detected by comparing the two lam branches over matched mu levels.
    """
    stress = StressLaw(kind, alpha)
    c_mu, _ = mu_min_point(p)
    zs = _lambda_extrema(stress, p)
    if not zs:
        return MorphologyResult(Morphology.SIMPLE, c_mu, math.nan, 0, resolved=False,
                                notes="no interior lam extremum resolved on the grid")
    lam_vals = [float(hopf_lambda(z, stress, p)) for z in zs]
    c_lam = zs[int(np.argmax(lam_vals))]

    slope_scale = max(
        abs(hopf_lambda(1.05 * c_mu, stress, p) - hopf_lambda(c_mu, stress, p)),
        abs(hopf_lambda(c_mu, stress, p) - hopf_lambda(0.95 * c_mu, stress, p)),
    ) / (0.05 * c_mu)
    if abs(_dlam_dc(stress, c_mu, p)) < cusp_rtol * max(slope_scale, 1e-300):
        return MorphologyResult(Morphology.CUSP, c_mu, c_lam, 0)

    crossings = _branch_gap_crossings(stress, p, c_mu)
    if crossings > 0:
        return MorphologyResult(Morphology.BOWTIE, c_mu, c_lam, crossings)
    return MorphologyResult(Morphology.SIMPLE, c_mu, c_lam, 0)


def cusp_alpha(kind: StressKind, alpha_lo: float = 0.5, alpha_hi: float = 100.0,
               p: ModelParams = _P0) -> float:
    """alpha at which the Hopf curve develops its cusp.

    At the transition the lam(c) maximum sits exactly on the mu(c)
    minimum, so dlam/dc at c_mu changes sign in alpha; bisected to
    machine-level precision in alpha.
    """
    c_mu, _ = mu_min_point(p)

    def g(alpha: float) -> float:
        return _dlam_dc(StressLaw(kind, alpha), c_mu, p)

    if g(alpha_lo) * g(alpha_hi) > 0:
        raise ValueError("cusp transition not bracketed by the given alpha range")
    return brentq(g, alpha_lo, alpha_hi, xtol=1e-12, rtol=8.9e-16)


def curve_summary(kind: StressKind, alpha: float, p: ModelParams = _P0) -> dict:
    """JSON-ready summary of the Hopf geometry for one stress law."""
    stress = StressLaw(kind, alpha)
    ext = hopf_extremals(stress, p)
    morph = hopf_morphology(kind, alpha, p)
    return {
        "lambda_max": ext["lambda_max"],
        "mu_at_max": ext["mu_at_max"],
        "mu_min": ext["mu_min"],
        "lambda_at_mu_min": ext["lambda_at_mu_min"],
        "morphology": morph.morphology.value,
    }
