import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpgrating.errors import ConfigError
from qpgrating.geometry import GratingProfile, eval_profile, profile_error

PROFILE_M5 = [0, 0.2, 0.1, -0.2, -0.1, 0.1, -0.2, -0.1, -0.2, 0.2, -0.4]
PROFILE_M3 = [0, 0, 0.2, 0.1, 0, 0, 0.3]


def direct_sum(coeffs, x, period=2 * math.pi):
    value = coeffs[0]
    w = 2 * math.pi / period
    for k in range(1, (len(coeffs) - 1) // 2 + 1):
        value += coeffs[2 * k - 1] * math.cos(k * w * x) + coeffs[2 * k] * math.sin(k * w * x)
    return value


def test_three_harmonic_profile_at_origin():
    assert eval_profile(GratingProfile(PROFILE_M3), 0.0) == pytest.approx(0.1, abs=1e-15)


def test_zero_profile():
    p = GratingProfile(np.zeros(9))
    assert np.all(eval_profile(p, np.linspace(-3, 9, 50)) == 0.0)


def test_five_harmonic_profile_at_pi_matches_direct_summation():
    # cos terms alternate sign at pi: -0.2 - 0.2 - 0.1 - 0.1 - 0.2
    expected = direct_sum(PROFILE_M5, math.pi)
    assert expected == pytest.approx(-0.8, abs=1e-14)
    assert eval_profile(GratingProfile(PROFILE_M5), math.pi) == pytest.approx(expected, abs=1e-14)


def test_general_period_uses_scaled_harmonics():
    p = GratingProfile([0.1, 0.3, -0.2], period=3.0)
    for x in (0.0, 0.4, 1.7, 2.9):
        assert eval_profile(p, x) == pytest.approx(direct_sum(p.coeffs, x, 3.0), abs=1e-14)


def test_coefficient_vector_must_have_odd_length():
    with pytest.raises(ConfigError):
        GratingProfile([0.0, 1.0])


def test_profile_is_immutable():
    p = GratingProfile(PROFILE_M3)
    with pytest.raises(ValueError):
        p.coeffs[0] = 1.0


def test_derivative_against_central_difference():
    p = GratingProfile(PROFILE_M5)
    x = np.linspace(0, 2 * np.pi, 17)
    h = 1e-6
    fd = (eval_profile(p, x + h) - eval_profile(p, x - h)) / (2 * h)
    np.testing.assert_allclose(p.derivative(x), fd, atol=1e-8)


def test_profile_error_identical():
    p = GratingProfile(PROFILE_M5)
    assert profile_error(p, p, 64) == (0.0, 0.0)


def test_profile_error_constant_offset():
    _, linf = profile_error(GratingProfile.flat(0.0), GratingProfile.flat(0.5), 32)
    assert linf == pytest.approx(0.5)


def test_profile_error_single_harmonic_perturbation():
    truth = GratingProfile(PROFILE_M3)
    bumped = np.array(PROFILE_M3, dtype=float)
    bumped[2] += 0.01
    _, linf = profile_error(truth, GratingProfile(bumped), 400)
    assert linf == pytest.approx(0.01, abs=1e-12)


def test_profile_error_rejects_period_mismatch():
    with pytest.raises(ConfigError):
        profile_error(GratingProfile([0.0]), GratingProfile([0.0], period=3.0))


def test_profile_error_needs_two_points():
    with pytest.raises(ConfigError):
        profile_error(GratingProfile([0.0]), GratingProfile([0.0]), 1)


def test_record_roundtrip():
    p = GratingProfile(PROFILE_M5, period=5.0)
    q = GratingProfile.from_record(p.to_record())
    assert q.period == p.period and np.array_equal(q.coeffs, p.coeffs)


coeff_vectors = st.integers(0, 6).flatmap(
    lambda m: st.lists(st.floats(-1, 1), min_size=2 * m + 1, max_size=2 * m + 1))


@settings(max_examples=60, deadline=None)
@given(coeffs=coeff_vectors, x=st.floats(-50, 50), period=st.floats(0.5, 10))
def test_periodicity(coeffs, x, period):
    p = GratingProfile(coeffs, period)
    a, b = eval_profile(p, x), eval_profile(p, x + period)
    assert abs(b - a) <= 1e-12 * (1 + abs(a)) * max(1.0, abs(x) / period)


@settings(max_examples=60, deadline=None)
@given(pair=st.integers(0, 5).flatmap(
    lambda m: st.tuples(*[st.lists(st.floats(-1, 1), min_size=2 * m + 1, max_size=2 * m + 1)] * 2)),
    x=st.floats(-10, 10))
def test_linearity_in_coefficients(pair, x):
    a, b = (np.array(c) for c in pair)
    lhs = eval_profile(GratingProfile(a + b), x)
    rhs = eval_profile(GratingProfile(a), x) + eval_profile(GratingProfile(b), x)
    assert lhs == pytest.approx(rhs, abs=1e-13)
