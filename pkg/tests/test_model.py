import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import fsolve

from conftest import FIG3, FIG5, FIG6, FIG6_POLICY, TABLE1_RANGES
from wnv_impulse import (ConfigError, ControlPolicy, Parameters, Region, State, classify_region,
                         dulac_divergence, equilibria, jacobian_eigenvalues, nullcline_markers,
                         vector_field)


def table1_params(mu_m_lo=0.036):
    ranges = dict(TABLE1_RANGES, mu_m=(mu_m_lo, TABLE1_RANGES["mu_m"][1]))
    return st.builds(Parameters, **{k: st.floats(lo, hi) for k, (lo, hi) in ranges.items()})


class TestParameters:
    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigError, match="K_m"):
            Parameters(0.5, 0.0, 0.03, 0.01, 0.09, 0.8, 400)

    def test_beta_bounded_by_one(self):
        with pytest.raises(ConfigError, match="beta_bm"):
            Parameters(0.5, 1000, 0.03, 0.01, 0.09, 1.2, 400)
        Parameters(0.5, 1000, 0.03, 0.01, 0.09, 1.0, 400)

    def test_table1_ranges_not_enforced(self):
        # mu_b = 0.01 lies outside the documented 1e-4..1e-3 range but is used by every figure
        assert FIG3.mu_b == 0.01

    def test_kv_round_trip(self):
        kv = {**FIG6.to_kv(), **FIG6_POLICY.to_kv()}
        assert set(kv) == {"mu_m", "K_m", "delta_m", "mu_b", "c", "beta_bm", "N_b", "p", "q", "H_b"}
        assert Parameters.from_kv(kv) == FIG6
        assert ControlPolicy.from_kv(kv) == FIG6_POLICY
        assert ControlPolicy.from_kv(FIG6.to_kv()) is None


class TestControlPolicy:
    @pytest.mark.parametrize("p, q", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.3)])
    def test_fractions_open_interval(self, p, q):
        with pytest.raises(ConfigError):
            ControlPolicy(p, q, 100)

    def test_threshold_below_total_birds(self):
        with pytest.raises(ConfigError, match="H_b"):
            ControlPolicy(0.2, 0.2, 400).check_against(FIG3)
        ControlPolicy(0.2, 0.2, 399).check_against(FIG3)


class TestVectorField:
    def test_origin(self):
        assert vector_field(State(0, 0), FIG3) == (0.0, 0.0)

    def test_hand_arithmetic(self):
        params = Parameters(0.06, 1000, 0.04, 0.01, 0.09, 0.8, 400)
        dM, dI = vector_field(State(100, 50), params)
        assert dM == pytest.approx(1.4, rel=1e-14)
        assert dI == pytest.approx(5.8, rel=1e-14)

    def test_endemic_point_is_stationary(self):
        e = equilibria(FIG3).endemic
        dM, dI = vector_field(e, FIG3)
        scale = FIG3.mu_m * FIG3.K_m
        assert abs(dM) <= 1e-9 * scale and abs(dI) <= 1e-9 * scale


class TestDulac:
    def test_fig3_value(self):
        assert dulac_divergence(FIG3) == pytest.approx(-0.537 / 1000 - 0.072 / 400 - 0.01, rel=1e-14)
        assert dulac_divergence(FIG3) == pytest.approx(-0.010717, abs=1e-12)

    def test_mu_m_vanishing_limit(self):
        p = Parameters(1e-300, 1000, 0.035, 0.01, 0.09, 0.8, 400)
        assert dulac_divergence(p) == pytest.approx(-0.072 / 400 - 0.01, rel=1e-15)

    @given(table1_params())
    def test_always_negative(self, params):
        assert dulac_divergence(params) < 0


class TestEquilibria:
    def test_no_endemic_when_death_exceeds_birth(self):
        eq = equilibria(Parameters(0.03, 1000, 0.05, 0.01, 0.09, 0.8, 400))
        assert not eq.endemic_exists and eq.disease_free == State(0, 0)

    def test_boundary_case_reports_no_endemic(self):
        assert not equilibria(Parameters(0.05, 1000, 0.05, 0.01, 0.09, 0.8, 400)).endemic_exists

    def test_fig3_closed_form(self):
        e = equilibria(FIG3).endemic
        assert e.M == pytest.approx(934.823, abs=5e-4)
        assert e.I_b == pytest.approx(377.56, abs=5e-3)

    def test_closed_form_matches_root_finding(self):
        params = Parameters(0.06, 1000, 0.04, 0.01, 0.09, 0.8, 400)
        e = equilibria(params).endemic
        assert e.M == pytest.approx(1000 / 3, rel=1e-12)
        assert e.I_b == pytest.approx(342.857142857, rel=1e-10)
        root = fsolve(lambda z: vector_field(State(*np.abs(z)), params), [500.0, 200.0], xtol=1e-14)
        assert root == pytest.approx([e.M, e.I_b], rel=1e-10)

    @given(table1_params())
    def test_zeroes_field(self, params):
        eq = equilibria(params)
        assert vector_field(eq.disease_free, params) == (0.0, 0.0)
        if eq.endemic is not None:
            dM, dI = vector_field(eq.endemic, params)
            scale = params.mu_m * params.K_m
            assert abs(dM) <= 1e-9 * scale and abs(dI) <= 1e-9 * scale


class TestJacobian:
    def test_origin_saddle(self):
        lam = jacobian_eigenvalues(FIG3, State(0, 0))
        assert lam == pytest.approx((0.537 - 0.035, -0.01))
        assert lam[0] > 0 > lam[1]

    def test_endemic_node(self):
        lam = jacobian_eigenvalues(FIG3, equilibria(FIG3).endemic)
        assert lam[0] < 0 and lam[1] < 0

    def test_degenerate_boundary(self):
        p = Parameters(0.05, 1000, 0.05, 0.01, 0.09, 0.8, 400)
        assert jacobian_eigenvalues(p, State(0, 0)) == (0.0, -0.01)

    def test_matches_finite_differences(self):
        s = State(300.0, 120.0)
        h = 1e-4
        f = lambda M, I: np.array(vector_field(State(M, I), FIG3))  # noqa: E731
        dM = (f(s.M + h, s.I_b) - f(s.M - h, s.I_b)) / (2 * h)
        dI = (f(s.M, s.I_b + h) - f(s.M, s.I_b - h)) / (2 * h)
        J = np.column_stack([dM, dI])
        assert J[0, 1] == pytest.approx(0.0, abs=1e-9)
        assert sorted(np.linalg.eigvals(J)) == pytest.approx(sorted(jacobian_eigenvalues(FIG3, s)), rel=1e-7)

    @given(table1_params())
    def test_saddle_and_node(self, params):
        eq = equilibria(params)
        lam0 = jacobian_eigenvalues(params, eq.disease_free)
        if params.mu_m > params.delta_m:
            assert lam0[0] > 0 > lam0[1]
            lam = jacobian_eigenvalues(params, eq.endemic)
            assert lam[0] < 0 and lam[1] < 0


class TestNullclineMarkers:
    def test_fig6_markers(self):
        r = nullcline_markers(FIG6, FIG6_POLICY)
        assert r.N_mq == pytest.approx(29.10, abs=5e-3)
        assert r.N_mh == pytest.approx(92.59, abs=5e-3)
        assert 0.85 * r.N_mh == pytest.approx(78.70, abs=5e-3)
        assert r.case_b

    def test_fig5_case_a(self):
        r = nullcline_markers(FIG5, ControlPolicy(0.8, 0.25, 250))
        assert r.M_star == pytest.approx(166.67, abs=5e-3)
        assert 0.2 * r.M_star == pytest.approx(33.33, abs=5e-3)
        assert r.N_mq == pytest.approx(49.02, abs=5e-3)
        assert r.case_a

    def test_q_to_one_kills_case_a(self):
        r = nullcline_markers(FIG3, ControlPolicy(0.99, 1 - 1e-12, 250))
        assert r.N_mq < 1e-9
        assert not r.case_a

    def test_rejects_threshold_at_total(self):
        with pytest.raises(ConfigError):
            nullcline_markers(FIG3, ControlPolicy(0.2, 0.2, 400))

    @settings(max_examples=1000)
    @given(table1_params(mu_m_lo=0.08), st.floats(0.01, 0.99), st.floats(0.01, 0.99),
           st.floats(0.01, 0.999))
    def test_ordering_and_reachability(self, params, p, q, h_frac):
        policy = ControlPolicy(p, q, h_frac * params.N_b)
        r = nullcline_markers(params, policy)
        assert 0 < r.N_mq < r.N_mh
        # the guard is reachable exactly when the I_b-nullcline meets it left of M*
        assert r.threshold_reachable == (r.N_mh < r.M_star)
        assert r.case_a == ((1 - p) * r.M_star < r.N_mq)
        assert r.case_b == ((1 - p) * r.N_mh > r.N_mq)


class TestClassifyRegion:
    def test_endemic_is_boundary(self):
        assert classify_region(equilibria(FIG3).endemic, FIG3) is Region.BOUNDARY

    def test_left_of_vertical_isocline(self):
        s = State(100, 300)
        dM, dI = vector_field(s, FIG3)
        assert dM > 0
        assert classify_region(s, FIG3) is (Region.OMEGA2 if dI > 0 else Region.OMEGA1)

    def test_near_endemic_upper_right(self):
        e = equilibria(FIG3).endemic
        assert classify_region(State(e.M + 1, e.I_b + 1), FIG3) is Region.OMEGA4

    @given(st.floats(0, 2000), st.floats(0, 400))
    def test_consistent_with_field(self, M, I):
        s = State(M, I)
        dM, dI = vector_field(s, FIG3)
        region = classify_region(s, FIG3)
        if region is Region.BOUNDARY:
            assert abs(dM) <= 1e-12 * FIG3.mu_m * FIG3.K_m or abs(dI) <= 1e-12 * 0.072 * FIG3.K_m
        else:
            expected = {(True, False): Region.OMEGA1, (True, True): Region.OMEGA2,
                        (False, True): Region.OMEGA3, (False, False): Region.OMEGA4}[(dM > 0, dI > 0)]
            assert region is expected
