"""Parameter records, stress laws, right-hand sides, reductions, JSON I/O."""

import json
from fractions import Fraction

import numpy as np
import pytest

from calx.model import (
    DimensionalParams,
    ModelParams,
    State2,
    State3,
    StressKind,
    StressLaw,
    nondimensionalize,
    params_from_json,
    params_to_json,
    rhs_atri,
    rhs_mech,
    rhs_vdp,
    stress_derivative,
    stress_eval,
    viscoelastic_reduction,
)


class TestStressLaw:
    def test_hill1_zero(self):
        assert stress_eval(StressLaw.hill1(10.0), 0.0) == 0.0

    def test_hill1_half_saturation(self):
        # T = alpha*c/(1+alpha*c) is 1/2 exactly at c = 1/alpha
        assert stress_eval(StressLaw.hill1(10.0), 0.1) == pytest.approx(0.5, abs=1e-15)

    def test_hill2_value(self):
        # alpha*c^2/(1+alpha*c^2) at alpha=10, c=1 -> 10/11
        expected = Fraction(10, 11)
        assert stress_eval(StressLaw.hill2(10.0), 1.0) == pytest.approx(float(expected), abs=1e-15)

    def test_none_is_zero(self):
        c = np.linspace(0, 100, 50)
        assert np.all(stress_eval(StressLaw.none(), c) == 0.0)
        assert np.all(stress_derivative(StressLaw.none(), c) == 0.0)

    @pytest.mark.parametrize("kind", [StressKind.HILL1, StressKind.HILL2])
    @pytest.mark.parametrize("alpha", [1.0, 2.0, 10.0, 100.0])
    def test_monotone_nondecreasing(self, kind, alpha):
        law = StressLaw(kind, alpha)
        c = np.linspace(0.0, 50.0, 1000)
        t = stress_eval(law, c)
        assert np.all(np.diff(t) >= 0)
        assert t[0] == 0.0
        assert t[-1] <= law.saturation

    @pytest.mark.parametrize("kind", [StressKind.HILL1, StressKind.HILL2])
    def test_saturates(self, kind):
        law = StressLaw(kind, 5.0)
        assert stress_eval(law, 1e8) == pytest.approx(1.0, abs=1e-6)

    def test_derivative_matches_finite_difference(self):
        law = StressLaw.hill2(3.0)
        c = np.linspace(0.05, 5.0, 40)
        fd = (stress_eval(law, c + 1e-7) - stress_eval(law, c - 1e-7)) / 2e-7
        assert np.allclose(stress_derivative(law, c), fd, rtol=1e-6)

    def test_negative_c_rejected(self):
        with pytest.raises(ValueError):
            stress_eval(StressLaw.hill1(1.0), -0.5)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError):
            StressLaw.hill1(0.0)


class TestNondimensionalize:
    def test_paper_defaults_to_six_figures(self):
        p = nondimensionalize(DimensionalParams())
        assert p.K1 == pytest.approx(46.285714, rel=1e-6)
        assert p.K2 == pytest.approx(1.0, rel=1e-12)
        assert p.Gamma == pytest.approx(5.71429, rel=1e-6)
        assert p.K == pytest.approx(1.0 / 7.0, rel=1e-12)

    def test_formulas(self):
        d = DimensionalParams(k1=0.5, k2=0.8, gamma=3.0, k_f=10.0, k_gamma=0.2,
                              tau_h=4.0, p=1.4, k_mu=0.7)
        p = nondimensionalize(d)
        assert p.K1 == pytest.approx(10.0 * 4.0 / 0.5)
        assert p.K2 == pytest.approx(0.8 / 0.5)
        assert p.Gamma == pytest.approx(3.0 * 4.0 / 0.5)
        assert p.K == pytest.approx(0.2 / 0.5)
        assert p.mu == pytest.approx(1.4 / (0.7 + 1.4))

    def test_zero_ip3_gives_zero_mu(self):
        assert nondimensionalize(DimensionalParams(p=0.0)).mu == 0.0

    def test_half_saturation_mu(self):
        assert nondimensionalize(DimensionalParams(p=0.7, k_mu=0.7)).mu == pytest.approx(0.5)

    def test_caller_supplies_mechanics(self):
        p = nondimensionalize(DimensionalParams(), lam=1.5, stress=StressLaw.hill1(10.0))
        assert p.lam == 1.5
        assert p.stress.kind is StressKind.HILL1

    def test_invalid_dimensional_params_rejected(self):
        with pytest.raises(ValueError):
            DimensionalParams(k1=0.0)
        with pytest.raises(ValueError):
            DimensionalParams(tau_h=-1.0)
        with pytest.raises(ValueError):
            DimensionalParams(b=2.0)


class TestRhs:
    def test_atri_hand_value_at_origin_h1(self):
        # independent evaluation with exact rational arithmetic:
        # dc/dt at (0, 1) = mu*K1*b, dh/dt = K2^2/K2^2 - 1 = 0
        p = ModelParams(mu=0.3)
        dc, dh = rhs_atri(p, State2(0.0, 1.0))
        expected = Fraction(3, 10) * Fraction(46285714, 1000000) * Fraction(111, 1000)
        assert dc == pytest.approx(float(expected), rel=1e-12)
        assert dh == 0.0

    def test_atri_rest_state(self):
        # both flux terms vanish at c=0, h=0; the gate relaxes at unit rate
        p = ModelParams(mu=0.77)
        assert rhs_atri(p, State2(0.0, 0.0)) == (0.0, 1.0)

    def test_mech_hand_value(self):
        # all three components by independent rational arithmetic at
        # (c, theta, h) = (1, 1/2, 1/2), mu=0.3, lam=1, Hill1 alpha=10
        p = ModelParams(mu=0.3, lam=1.0, stress=StressLaw.hill1(10.0))
        dc, dth, dh = rhs_mech(p, State3(1.0, 0.5, 0.5))
        mu, K1 = Fraction(3, 10), Fraction(46285714, 1000000)
        gam, K, b = Fraction(571429, 100000), Fraction(1, 7), Fraction(111, 1000)
        dc_exp = mu * Fraction(1, 2) * K1 * (b + 1) / 2 - gam / (K + 1) + Fraction(1, 2)
        dth_exp = -Fraction(1, 2) + Fraction(10, 11)
        dh_exp = Fraction(1, 2) - Fraction(1, 2)
        assert dc == pytest.approx(float(dc_exp), rel=1e-12)
        assert dth == pytest.approx(float(dth_exp), rel=1e-12)
        assert dh == pytest.approx(float(dh_exp), abs=1e-15)

    def test_mech_origin(self):
        p = ModelParams(mu=0.3, lam=2.0, stress=StressLaw.hill1(10.0))
        assert rhs_mech(p, State3(0.0, 0.0, 0.0)) == (0.0, 0.0, 1.0)

    def test_lambda_zero_reduces_to_atri(self):
        # (c, h) components agree to machine precision on 10^4 random states
        rng = np.random.default_rng(42)
        p = ModelParams(mu=0.35, lam=0.0, stress=StressLaw.hill1(10.0))
        for _ in range(10_000):
            c = float(rng.uniform(0.0, 20.0))
            h = float(rng.uniform(0.0, 1.0))
            th = float(rng.uniform(-2.0, 2.0))
            dc2, dh2 = rhs_atri(p, (c, h))
            dc3, dth3, dh3 = rhs_mech(p, (c, th, h))
            assert dc3 == dc2
            assert dh3 == dh2
            assert dth3 == -th + stress_eval(p.stress, c)

    def test_rhs_finite_everywhere(self):
        rng = np.random.default_rng(3)
        p = ModelParams(mu=0.9, lam=3.0, stress=StressLaw.hill2(50.0))
        for _ in range(2000):
            c = float(np.exp(rng.uniform(np.log(1e-8), np.log(1e6))))
            h = float(rng.uniform(0.0, 1.0))
            vals = rhs_mech(p, (c, rng.uniform(-5, 5), h))
            assert all(np.isfinite(v) for v in vals)

    def test_vdp(self):
        from calx.model import VdpParams
        dx, dy = rhs_vdp(VdpParams(0.025), (2.0, 0.0))
        assert dx == pytest.approx((0.0 + 2.0 - 8.0 / 3.0) / 0.025)
        assert dy == pytest.approx(-0.025 * 2.0)


class TestViscoelasticReduction:
    def test_zero_poisson(self):
        t_fac, s_fac = viscoelastic_reduction(1.0, 1.0, 1.0, 0.0)
        assert t_fac == pytest.approx(0.5)
        assert s_fac == pytest.approx(1.0)

    def test_quarter_poisson(self):
        # nu' = 0.25/0.5 = 1/2 -> time factor 1.5/2, stress factor 2/3
        t_fac, s_fac = viscoelastic_reduction(1.5, 0.5, 1.0, 0.25)
        assert t_fac == pytest.approx(0.75)
        assert s_fac == pytest.approx(2.0 / 3.0)

    def test_singular_poisson_rejected(self):
        with pytest.raises(ValueError):
            viscoelastic_reduction(1.0, 1.0, 1.0, 0.5)

    def test_nonpositive_viscosity_rejected(self):
        with pytest.raises(ValueError):
            viscoelastic_reduction(0.0, 0.0, 1.0, 0.3)


class TestStates:
    def test_h_range_enforced(self):
        with pytest.raises(ValueError):
            State2(0.1, 1.5)
        with pytest.raises(ValueError):
            State3(0.1, 0.0, -0.5)

    def test_negative_c_rejected(self):
        with pytest.raises(ValueError):
            State2(-0.1, 0.5)

    def test_theta_unconstrained(self):
        assert State3(0.1, -3.0, 0.5).theta == -3.0


class TestParamValidation:
    def test_b_range(self):
        with pytest.raises(ValueError):
            ModelParams(b=2.0)

    def test_negative_mu(self):
        with pytest.raises(ValueError):
            ModelParams(mu=-0.1)

    def test_eps_property(self):
        assert ModelParams().eps == pytest.approx(1.0 / 46.285714)


class TestJson:
    def test_defaults_on_missing_keys(self):
        p = params_from_json("{}")
        assert p == ModelParams()

    def test_partial_override(self):
        p = params_from_json(json.dumps(
            {"mu": 0.25, "lambda": 1.5, "stress": {"kind": "hill2", "alpha": 3.0}}))
        assert p.mu == 0.25
        assert p.lam == 1.5
        assert p.stress == StressLaw.hill2(3.0)
        assert p.K1 == ModelParams().K1

    def test_roundtrip(self):
        p = ModelParams(mu=0.4, lam=0.7, stress=StressLaw.hill1(10.0))
        assert params_from_json(params_to_json(p)) == p

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            params_from_json('{"nope": 1}')

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            params_from_json('{"b": 2.0}')
