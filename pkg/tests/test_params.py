"""Parameter, rate, and feedback-logic tests.

Oracle tags: [TRIVIAL] asserted directly, [PAPER] checked against published
closed forms, [DERIVED] frozen from an independent computation.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqdemon.params import (
    ConfigTag,
    DetectorParams,
    InvalidParameterError,
    LevelConfiguration,
    RateOverride,
    SystemParams,
    eigenbasis,
    feedback_levels,
    fermi,
    gamma_tilde,
    hamiltonian,
    local_validity_ratio,
    rates,
)

finite = st.floats(allow_nan=False, allow_infinity=False,
                   min_value=-50.0, max_value=50.0)


class TestValidation:
    def test_defaults_valid(self):
        p = SystemParams()
        assert p.bias == 3.0  # [TRIVIAL] mu_R - mu_L

    @pytest.mark.parametrize("kwargs", [
        {"T": 0.0}, {"T": -1.0}, {"Gamma": -0.1}, {"Gamma_phi": -1e-9},
        {"g": math.nan}, {"mu_L": math.inf},
    ])
    def test_bad_system_params(self, kwargs):
        with pytest.raises(InvalidParameterError):
            SystemParams(**kwargs)

    @pytest.mark.parametrize("kwargs", [
        {"gamma_1": 0.0, "lambda_1": 1.0},
        {"gamma_1": 1.0, "lambda_1": -1.0},
        {"gamma_1": math.nan, "lambda_1": 1.0},
    ])
    def test_bad_detector_params(self, kwargs):
        with pytest.raises(InvalidParameterError):
            DetectorParams(**kwargs)

    def test_sigma(self):
        # [PAPER] sigma = gamma_1 / (8 lambda_1)
        assert DetectorParams(10.0, 1.0).sigma == pytest.approx(1.25)

    def test_replace_preserves_validation(self):
        p = SystemParams()
        with pytest.raises(InvalidParameterError):
            p.replace(T=-1.0)


class TestFermi:
    @given(eps=finite, mu=finite, T=st.floats(min_value=0.05, max_value=10.0))
    def test_matches_reference_expression(self, eps, mu, T):
        # [DERIVED] stable branch equals the naive formula where it is safe
        p = SystemParams(T=T, mu_L=mu)
        x = (eps - mu) / T
        if abs(x) < 500:
            ref = 1.0 / (1.0 + math.exp(x))
            assert fermi(eps, "L", p) == pytest.approx(ref, rel=1e-12)

    def test_extreme_arguments_stable(self):
        p = SystemParams(T=1.0)
        assert fermi(600.0, "L", p) == pytest.approx(0.0, abs=1e-200)
        assert fermi(-600.0, "L", p) == pytest.approx(1.0)

    @given(eps=finite)
    def test_in_out_rates_sum_to_Gamma(self, eps):
        # [TRIVIAL] gamma + kappa = Gamma
        p = SystemParams()
        g, k = rates(eps, "R", p)
        assert g + k == pytest.approx(p.Gamma)
        assert g >= 0 and k >= 0

    def test_override_zeroes_pair(self):
        p = SystemParams()
        ov = RateOverride.of(("L", "eps_u"))
        assert rates(p.eps_u, "L", p, ov) == (0.0, 0.0)
        assert rates(p.eps_u, "R", p, ov) != (0.0, 0.0)
        assert rates(p.eps_d, "L", p, ov) != (0.0, 0.0)

    def test_energy_conserving_override(self):
        # [PAPER] all in/out rates at eps_u and eps_d vanish for both baths
        p = SystemParams()
        ov = RateOverride.energy_conserving()
        for bath in ("L", "R"):
            for eps in (p.eps_u, p.eps_d):
                assert rates(eps, bath, p, ov) == (0.0, 0.0)
            assert rates(p.eps_0, bath, p, ov) != (0.0, 0.0)

    def test_bad_override_entry(self):
        with pytest.raises(InvalidParameterError):
            RateOverride.of(("L", "eps_0"))


class TestFeedback:
    @pytest.mark.parametrize("D1,D2,expected", [
        (0.0, 1.0, ConfigTag.C1),    # believed empty
        (-5.0, 1.0, ConfigTag.C1),
        (-1.0, -1.0, ConfigTag.C2),  # believed occupied left
        (1.0, -1.0, ConfigTag.C3),   # believed occupied right
        (0.0, -1.0, ConfigTag.C2),   # theta(0) = 0 tie-break
        (1.0, 0.0, ConfigTag.C3),
        (0.0, 0.0, ConfigTag.C2),
    ])
    def test_outcome_map(self, D1, D2, expected):
        # [PAPER] region functions of the three configurations
        assert feedback_levels(D1, D2) is expected

    def test_levels_per_configuration(self):
        p = SystemParams(eps_0=0.0, eps_u=5.0, eps_d=-5.0)
        assert LevelConfiguration.for_tag(ConfigTag.C1, p).levels == (0.0, 5.0)
        assert LevelConfiguration.for_tag(ConfigTag.C2, p).levels == (-5.0, -5.0)
        assert LevelConfiguration.for_tag(ConfigTag.C3, p).levels == (5.0, 0.0)


class TestEigenbasis:
    @given(eps_L=finite, eps_R=finite,
           g=st.floats(min_value=-5.0, max_value=5.0,
                       allow_nan=False, allow_infinity=False))
    @settings(max_examples=200)
    def test_eigen_equation_and_orthonormality(self, eps_L, eps_R, g):
        # [DERIVED] against numpy.linalg.eigh on the occupied block
        eb = eigenbasis(eps_L, eps_R, g)
        h = hamiltonian(eps_L, eps_R, g)[1:, 1:].real
        for energy, vec in ((eb.E1, (eb.a, eb.b)), (eb.E2, (eb.c, eb.d))):
            v = np.array(vec)
            # near-degenerate cases lose ~half the mantissa to cancellation
            assert np.linalg.norm(h @ v - energy * v) < 1e-6 * (
                1 + np.abs(h).max())
            assert np.dot(v, v) == pytest.approx(1.0, abs=1e-8)
        assert eb.a * eb.c + eb.b * eb.d == pytest.approx(0.0, abs=1e-8)
        assert eb.E0 == 0.0

    def test_energies_closed_form(self):
        # [PAPER] E_{1/2} = eps_bar +/- sqrt(Delta^2 + g^2)
        eb = eigenbasis(5.0, 0.0, 0.1)
        assert eb.E1 == pytest.approx(2.5 + math.sqrt(2.5**2 + 0.01))
        assert eb.E2 == pytest.approx(2.5 - math.sqrt(2.5**2 + 0.01))

    def test_validity_warning(self):
        with pytest.warns(UserWarning):
            local_validity_ratio(SystemParams(g=1.0, eps_u=5.0))

    def test_gamma_tilde(self):
        # [PAPER] dephasing rate lambda_1 + Gamma_phi
        p = SystemParams(Gamma_phi=0.3)
        assert gamma_tilde(p, DetectorParams(1.0, 2.0)) == pytest.approx(2.3)
