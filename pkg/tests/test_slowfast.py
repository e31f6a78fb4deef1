"""Slow manifolds, transition layers, break curves, and composite cycles."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from calx.equilibria import equilibria_atri, nullcline_max
from calx.model import ModelParams, StressLaw, rhs_mech
from calx.simulate import IntegratorConfig, integrate, measure_cycle, rhs_arrays
from calx.slowfast import (
    SlowManifold2,
    SlowManifold3,
    break_curve_3d,
    break_curve_h,
    break_curve_theta,
    compose_relaxation_oscillation,
    fast_flow_2d,
    slow_flow_2d,
    slow_flow_3d,
    transition_layer_2d,
    transition_layer_3d,
    turning_margin,
)

P = ModelParams(mu=0.3)
HILL1_10 = StressLaw.hill1(10.0)
P3 = P.with_(lam=1.0, stress=HILL1_10)
EPS = P.eps


class TestSlowManifold2:
    def test_roots_satisfy_quadratic(self):
        sm = SlowManifold2(P)
        rng = np.random.default_rng(4)
        for _ in range(500):
            h = float(rng.uniform(0.05, 0.93))
            for c in sm.roots(h):
                if math.isnan(c):
                    continue
                m = P.mu * h * P.K1
                q = (m - P.Gamma) * c * c + (m * (P.b + P.K) - P.Gamma) * c + m * P.b * P.K
                assert abs(q) < 1e-10

    def test_branch_stability_signs(self):
        sm = SlowManifold2(P)
        for h in (0.5, 0.7, 0.9):
            c_lo, c_hi = sm.roots(h)
            assert sm.df_dc(c_lo, h) < 0
            if not math.isnan(c_hi):
                assert sm.df_dc(c_hi, h) > 0

    def test_single_root_below_asymptote(self):
        p = P.with_(mu=0.2)
        sm = SlowManifold2(p)
        asym = p.Gamma / (p.mu * p.K1)
        c_lo, c_hi = sm.roots(0.9 * asym)
        assert c_lo > 0
        assert math.isnan(c_hi)
        assert sm.df_dc(c_lo, 0.9 * asym) < 0

    def test_break_point_matches_nullcline_max(self):
        assert SlowManifold2(P).break_point() == nullcline_max(P)


class TestSlowManifold3:
    def test_roots_satisfy_quadratic_with_signs(self):
        sm = SlowManifold3(P3)
        rng = np.random.default_rng(9)
        checked = 0
        while checked < 500:
            h = float(rng.uniform(0.05, 0.95))
            th = float(rng.uniform(0.0, 1.0))
            c_lo, c_hi = sm.roots(h, th)
            if math.isnan(c_lo):
                continue
            a, b, cc = sm._coeffs(h, th)
            for root, sign in ((c_lo, -1), (c_hi, 1)):
                if math.isnan(root):
                    continue
                assert abs(a * root * root + b * root + cc) < 1e-10
                assert sign * sm.df1_dc(root, h, th) > 0
            checked += 1

    def test_reduces_to_2d_at_lambda_zero(self):
        p0 = P.with_(lam=0.0, stress=StressLaw.none())
        sm2, sm3 = SlowManifold2(p0), SlowManifold3(p0)
        for h in (0.3, 0.6, 0.9):
            for th in (0.0, 0.5, 2.0):
                assert sm3.roots(h, th) == sm2.roots(h)


class TestFastFlow2d:
    def test_stationary_on_manifold(self):
        sm = SlowManifold2(P)
        h = 0.6
        c_eq = sm.c_minus(h)
        seg = fast_flow_2d(P, h, c_eq, tau_span=50.0)
        assert abs(seg.c[-1] - c_eq) < 1e-10

    def test_c_increases_above_nullcline(self):
        # h above the nullcline value at c means dc/dtau > 0
        sm = SlowManifold2(P)
        h = 0.6
        c0 = sm.c_minus(h) * 1.2  # between the branches: below nullcline in h
        seg_down = fast_flow_2d(P, h, c0, tau_span=5.0)
        assert seg_down.c[-1] < c0
        seg_up = fast_flow_2d(P, h * 1.3, sm.c_minus(h * 1.3) * 0.5, tau_span=5.0)
        assert seg_up.c[-1] > seg_up.c[0]

    def test_converges_to_stable_root(self):
        p = P.with_(mu=0.2)
        sm = SlowManifold2(p)
        target = sm.c_minus(0.5)  # 0.5 is below the asymptote here
        seg = fast_flow_2d(p, 0.5, 0.01, tau_span=1e4)
        assert seg.c[-1] == pytest.approx(target, abs=1e-7)


class TestSlowFlow2d:
    def test_terminates_at_break_point(self):
        seg = slow_flow_2d(P, 0.4)
        c_m, h_m = nullcline_max(P)
        assert seg.reached_break
        assert seg.c[-1] == pytest.approx(c_m, abs=1e-3)
        assert seg.h[-1] == pytest.approx(h_m, abs=1e-9)

    def test_stationary_at_stable_equilibrium(self):
        p = P.with_(mu=0.27)
        eq = equilibria_atri(p)[0]
        seg = slow_flow_2d(p, eq.h, t_span=50.0)
        assert not seg.reached_break
        assert abs(seg.h[-1] - eq.h) < 1e-8
        assert abs(seg.c[-1] - eq.c) < 1e-6

    def test_full_system_shadows_slow_flow(self):
        # during the crawl the full system stays within O(eps) of the
        # attracting branch (window kept away from the break point)
        traj = integrate("atri", P, (0.4, 0.5),
                         IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12))
        m = traj.t > 200
        c, h = traj.y[m, 0], traj.y[m, 1]
        sm = SlowManifold2(P)
        c_m, h_m = sm.break_point()
        sel = (c < 0.7 * c_m) & (c > 0.055) & (h > 0.45) & (h < 0.95)
        assert sel.sum() > 500
        err = np.abs(c[sel] - np.array([sm.c_minus(v) for v in h[sel]]))
        assert err.max() < 5 * EPS

    def test_input_validation(self):
        _, h_m = nullcline_max(P)
        with pytest.raises(ValueError):
            slow_flow_2d(P, h_m + 0.01)
        with pytest.raises(ValueError):
            slow_flow_2d(P, -0.1)


class TestTransitionLayer2d:
    def test_turning_time_value(self):
        layer = transition_layer_2d(P)
        # ln(mu*K1*h_M/Gamma) with the exact nullcline maximum
        assert layer.t_turning == pytest.approx(0.8165, abs=1e-3)
        assert layer.t_turning == pytest.approx(math.log(2.2625), abs=2e-3)

    def test_constants_mu_independent(self):
        layers = [transition_layer_2d(P.with_(mu=mu)) for mu in (0.3, 0.35, 0.4, 0.5)]
        t_turn = [l.t_turning for l in layers]
        t_back = [l.t_back for l in layers]
        assert max(t_turn) - min(t_turn) < 1e-9
        assert max(t_back) - min(t_back) < 1e-9

    def test_matches_numeric_layer_integration(self):
        # same linear ODEs integrated numerically: trajectories agree to 1e-8
        # and the numeric turning time matches the formula to 1e-8
        layer = transition_layer_2d(P)
        g = P.Gamma / P.K1

        def rhs(_t, y):
            return [P.mu * y[1] - g, -y[1]]

        sol = solve_ivp(rhs, (0.0, 4.0), [0.0, layer.h_m], rtol=1e-12, atol=1e-14,
                        dense_output=True)
        ts = np.linspace(0.0, 4.0, 200)
        c_num, h_num = sol.sol(ts)
        assert np.max(np.abs(c_num - layer.c_hat(ts))) < 1e-8
        assert np.max(np.abs(h_num - layer.h_hat(ts))) < 1e-8
        t_star = brentq(lambda t: P.mu * sol.sol(t)[1] - g, 0.1, 3.0, xtol=1e-12)
        assert t_star == pytest.approx(layer.t_turning, abs=1e-8)

    def test_t_back_is_return_root(self):
        layer = transition_layer_2d(P)
        assert layer.c_hat(layer.t_back) == pytest.approx(0.0, abs=1e-12)
        assert layer.t_back > layer.t_turning
        assert layer.c_peak == pytest.approx(layer.c_hat(layer.t_turning) / EPS, rel=1e-12)

    def test_no_turning_flagged(self):
        # an artificially low departure level never reaches the asymptote
        layer = transition_layer_2d(P, h_m=0.1)
        assert not layer.turning
        assert math.isnan(layer.t_turning)


class TestBreakCurve3d:
    def test_defining_conditions(self):
        grid = np.geomspace(0.02, 5.0, 200)
        bc = break_curve_3d(P3, grid)
        for c, th, h in zip(bc.c, bc.theta, bc.h):
            dc, _, _ = rhs_mech(P3, (c, th, h))
            f1 = dc / P3.K1
            assert abs(f1) < 1e-9
            sm = SlowManifold3(P3)
            assert abs(sm.df1_dc(c, h, th)) < 1e-9

    def test_on_manifold_surface(self):
        sm = SlowManifold3(P3)
        bc = break_curve_3d(P3, np.geomspace(0.05, 2.0, 50))
        for c, th, h in zip(bc.c, bc.theta, bc.h):
            a_, b_, c_ = sm._coeffs(h, th)
            assert abs(a_ * c * c + b_ * c + c_) < 1e-9
            # tangency: the two sheet roots coincide here
            assert abs(sm.discriminant(h, th)) < 1e-9

    def test_lambda_scaling(self):
        # theta_F * lam is lam-independent; h_F matches the 2D break value at c_M
        c = 0.3
        vals = [lam * break_curve_theta(P.with_(lam=lam, stress=HILL1_10), c)
                for lam in (0.5, 1.0, 2.0)]
        assert max(vals) - min(vals) < 1e-12
        c_m, h_m = nullcline_max(P)
        assert break_curve_h(P3, c_m) == pytest.approx(h_m, rel=1e-12)

    def test_requires_positive_mu_lam(self):
        with pytest.raises(ValueError):
            break_curve_3d(P.with_(mu=0.0, lam=1.0, stress=HILL1_10), np.array([0.1]))
        with pytest.raises(ValueError):
            break_curve_3d(P, np.array([0.1]))


class TestTurningCondition:
    def test_margin_closed_form(self):
        # the margin collapses to Gamma*K*(1-K)/(K+c)^2, hence sign(1-K)
        grid = np.geomspace(1e-3, 100.0, 500)
        margin = turning_margin(P3, grid)
        closed = P3.Gamma * P3.K * (1.0 - P3.K) / (P3.K + grid) ** 2
        assert np.allclose(margin, closed, rtol=1e-9, atol=1e-12)

    def test_sign_flips_with_k(self):
        grid = np.geomspace(1e-3, 100.0, 500)
        assert np.all(turning_margin(P3, grid) > 0)   # K = 1/7
        assert np.all(turning_margin(P3.with_(K=1.5), grid) < 0)
        assert np.allclose(turning_margin(P3.with_(K=1.0), grid), 0.0, atol=1e-12)


class TestSlowFlow3d:
    def test_terminates_on_break_curve(self):
        seg = slow_flow_3d(P3, (None, 0.8, 0.35))
        assert seg.reached_break
        c_end = seg.c[-1]
        assert abs(seg.h[-1] - break_curve_h(P3, c_end)) < 1e-3
        assert abs(seg.theta[-1] - break_curve_theta(P3, c_end)) < 1e-3

    def test_lambda_zero_projects_to_2d(self):
        p0 = P.with_(lam=0.0, stress=StressLaw.none())
        seg3 = slow_flow_3d(p0, (None, 0.0, 0.4), n_out=300)
        seg2 = slow_flow_2d(p0, 0.4, n_out=300)
        assert seg3.reached_break and seg2.reached_break
        assert seg3.duration == pytest.approx(seg2.duration, rel=1e-6)
        common = np.linspace(0.0, min(seg3.duration, seg2.duration), 100)
        h3 = np.interp(common, seg3.t, seg3.h)
        h2 = np.interp(common, seg2.t, seg2.h)
        assert np.max(np.abs(h3 - h2)) < 1e-6

    def test_off_sheet_init_rejected(self):
        with pytest.raises(ValueError):
            slow_flow_3d(P3, (5.0, 0.8, 0.35))

    def test_full_system_shadows_sheet(self):
        traj = integrate("mech", P3, (0.4, 0.0, 0.5),
                         IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12))
        m = traj.t > 200
        y = traj.y[m]
        c, th, h = y[:, 0], y[:, 1], y[:, 2]
        dcdt = rhs_arrays("mech", P3, y)[:, 0]
        sm = SlowManifold3(P3)
        comp = compose_relaxation_oscillation("mech", P3)
        c_f = comp.break_state[0]
        disc = np.array([sm.discriminant(hv, tv) for hv, tv in zip(h, th)])
        sel = (np.abs(dcdt) < 0.5) & (c < 0.95 * c_f) & (disc > 0)
        assert sel.sum() > 100
        cmins = np.array([sm.c_minus(hv, tv) for hv, tv in zip(h[sel], th[sel])])
        ok = ~np.isnan(cmins)
        assert np.max(np.abs(c[sel][ok] - cmins[ok])) < 5 * EPS


class TestTransitionLayer3d:
    def test_lambda_zero_reduces_to_2d(self):
        p0 = P.with_(lam=0.0, stress=StressLaw.none())
        c_m, h_m = nullcline_max(p0)
        layer3 = transition_layer_3d(p0, (c_m, 0.0, h_m))
        layer2 = transition_layer_2d(p0)
        ts = np.linspace(0.0, 3.0, 50)
        assert layer3.t_turning == pytest.approx(layer2.t_turning, rel=1e-12)
        assert layer3.t_back == pytest.approx(layer2.t_back, rel=1e-12)
        assert np.allclose(layer3.c_hat(ts), layer2.c_hat(ts), atol=1e-15)
        assert np.allclose(layer3.h_hat(ts), layer2.h_hat(ts), atol=1e-15)

    def test_turning_depends_on_lambda(self):
        # matched break-curve points (same c); lam*theta_F is fixed, so the
        # lam*T_s term is what moves t_turning
        c = 0.25
        values = []
        for lam in (0.5, 1.0, 1.5):
            p = P.with_(lam=lam, stress=HILL1_10)
            bp = (c, float(break_curve_theta(p, c)), float(break_curve_h(p, c)))
            values.append(transition_layer_3d(p, bp).t_turning)
        assert values[0] != values[1] != values[2]
        assert max(values) - min(values) > 1e-3

    def test_crossing_plane_at_turn(self):
        c = 0.25
        bp = (c, float(break_curve_theta(P3, c)), float(break_curve_h(P3, c)))
        layer = transition_layer_3d(P3, bp)
        assert abs(layer.crossing_residual(layer.t_turning)) < 1e-10

    def test_matches_numeric_layer_integration(self):
        # the closed forms solve the reduced linear system: compare all three
        # components and the turning time against an independent integration
        c = 0.25
        theta_f = float(break_curve_theta(P3, c))
        h_f = float(break_curve_h(P3, c))
        layer = transition_layer_3d(P3, (c, theta_f, h_f))
        lam_k1 = P3.lam / P3.K1
        g = P3.Gamma / P3.K1

        def rhs(_t, y):
            return [P3.mu * y[2] - g + lam_k1 * y[1], -y[1] + 1.0, -y[2]]

        sol = solve_ivp(rhs, (0.0, 4.0), [0.0, theta_f, h_f], rtol=1e-12,
                        atol=1e-14, dense_output=True)
        ts = np.linspace(0.0, 4.0, 200)
        c_num, th_num, h_num = sol.sol(ts)
        assert np.max(np.abs(c_num - layer.c_hat(ts))) < 1e-8
        assert np.max(np.abs(th_num - layer.theta_hat(ts))) < 1e-8
        assert np.max(np.abs(h_num - layer.h_hat(ts))) < 1e-8
        t_star = brentq(lambda t: P3.mu * sol.sol(t)[2] - g + lam_k1 * sol.sol(t)[1],
                        0.1, 3.0, xtol=1e-12)
        assert t_star == pytest.approx(layer.t_turning, abs=1e-8)

    @pytest.mark.xfail(reason="the published layer formula places lam*theta_F in the "
                              "secular term, which contradicts the published "
                              "theta_hat solution and the layer ODE itself; the "
                              "consistent solution is implemented; see ledger",
                       strict=True)
    def test_published_turning_formula(self):
        c = 0.25
        theta_f = float(break_curve_theta(P3, c))
        h_f = float(break_curve_h(P3, c))
        layer = transition_layer_3d(P3, (c, theta_f, h_f))
        published = math.log((P3.mu * P3.K1 * h_f - P3.lam * 1.0)
                             / (P3.Gamma - P3.lam * 1.0 - P3.lam * theta_f))
        assert layer.t_turning == pytest.approx(published, abs=1e-9)

    def test_escape_for_large_k(self):
        p = P3.with_(K=1.5)
        c = 0.25
        bp = (c, float(break_curve_theta(p, c)), float(break_curve_h(p, c)))
        layer = transition_layer_3d(p, bp)
        assert layer.escaping
        assert math.isnan(layer.t_turning)

    def test_peak_and_return(self):
        c = 0.25
        bp = (c, float(break_curve_theta(P3, c)), float(break_curve_h(P3, c)))
        layer = transition_layer_3d(P3, bp)
        assert layer.c_hat(layer.t_back) == pytest.approx(0.0, abs=1e-12)
        assert layer.c_peak > 0
        # theta relaxes from theta_F toward the saturation level
        assert layer.theta_hat(0.0) == pytest.approx(bp[1], rel=1e-12)
        assert layer.theta_hat(50.0) == pytest.approx(1.0, abs=1e-12)


class TestComposite:
    def test_atri_segments_join(self):
        comp = compose_relaxation_oscillation("atri", P)
        segs = comp.segments
        assert [s.phase for s in segs] == ["fast", "slow", "layer"]
        for a, b in zip(segs[:-1], segs[1:]):
            gap = max(abs(a.c[-1] - b.c[0]), abs(a.h[-1] - b.h[0]))
            assert gap < 1e-3
        # the cycle closes: layer exit equals fast-segment entry
        assert abs(segs[-1].c[-1] - segs[0].c[0]) < 1e-3
        assert abs(segs[-1].h[-1] - segs[0].h[0]) < 1e-3

    def test_atri_peak_vs_full_system(self):
        comp = compose_relaxation_oscillation("atri", P)
        full = measure_cycle("atri", P, (0.4, 0.5),
                             IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11))
        c_peak_comp = max(seg.c.max() for seg in comp.segments)
        # leading-order peak overestimates at physical eps; within a factor 2
        assert 1.0 < c_peak_comp / full.c_max < 2.0

    @pytest.mark.xfail(reason="stated 15% peak agreement at eps=1/K1 is unattainable: "
                              "the leading-order layer overshoots by ~68% there (error "
                              "does fall with eps); see ledger", strict=True)
    def test_stated_peak_tolerance(self):
        comp = compose_relaxation_oscillation("atri", P)
        full = measure_cycle("atri", P, (0.4, 0.5),
                             IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11))
        c_peak_comp = max(seg.c.max() for seg in comp.segments)
        assert abs(c_peak_comp - full.c_max) / full.c_max < 0.15

    def test_period_converges_with_eps(self):
        ghat = P.Gamma / P.K1
        errors = []
        for eps in (0.02, 0.01, 0.005):
            p = P.with_(K1=1.0 / eps, Gamma=ghat / eps)
            comp = compose_relaxation_oscillation("atri", p, eps=eps)
            full = measure_cycle("atri", p, (0.4, 0.5),
                                 IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11))
            errors.append(abs(comp.period_estimate - full.period) / full.period)
        assert errors[0] > errors[1] > errors[2]

    def test_mech_layer_entry_on_break_curve(self):
        comp = compose_relaxation_oscillation("mech", P3)
        c_f, theta_f, h_f = comp.break_state
        assert theta_f == pytest.approx(float(break_curve_theta(P3, c_f)), rel=1e-9)
        assert h_f == pytest.approx(float(break_curve_h(P3, c_f)), rel=1e-9)
        layer_seg = comp.segments[-1]
        assert layer_seg.phase == "layer"
        assert layer_seg.c[0] == pytest.approx(c_f, rel=1e-9)
        assert layer_seg.theta[0] == pytest.approx(theta_f, rel=1e-9)

    def test_mech_segments_join_and_close(self):
        comp = compose_relaxation_oscillation("mech", P3)
        segs = comp.segments
        for a, b in zip(segs[:-1], segs[1:]):
            gap = max(abs(a.c[-1] - b.c[0]), abs(a.h[-1] - b.h[0]),
                      abs(a.theta[-1] - b.theta[0]))
            assert gap < 1e-3
        assert abs(segs[-1].c[-1] - segs[0].c[0]) < 1e-3

    def test_no_oscillation_raises(self):
        with pytest.raises(ValueError):
            compose_relaxation_oscillation("mech", P3.with_(K=1.5))

    def test_provenance_labels(self):
        comp = compose_relaxation_oscillation("atri", P)
        assert [s.provenance for s in comp.segments] == ["numeric", "numeric", "analytic"]
