"""Ellipticity floor profiles: cumulative integral, inverse, level sets."""

import math

import numpy as np
import pytest

from degparab import (CoefficientPath, accumulate_path, check_domination,
                      constant_matrix_path, constant_profile, cumulative_delta,
                      cumulative_delta_grid, empirical_bound, eval_delta,
                      expr_matrix_path, fit_beta_exponent, inverse_cumulative,
                      levelset_measure, levelset_measure_scan,
                      min_eigenvalue_profile, oscillatory_profile,
                      parse_coefficients, parse_profile, piecewise_profile,
                      power_profile, scalar_path)

# frozen from a 1e7-point midpoint rule for int_0^t (1 + sin(1/s)) ds
OSC_BETA_01 = 0.09105411361661561
OSC_BETA_05 = 0.5316680986775717


def test_eval_delta_power_at_zero():
    assert eval_delta(power_profile(1.0), 0.0) == 0.0


def test_eval_delta_constant():
    assert eval_delta(constant_profile(1.0), 0.37) == 1.0


def test_eval_delta_oscillatory_closed_value():
    # 1 + sin(pi/2) = 2
    assert abs(eval_delta(oscillatory_profile(), 2.0 / math.pi) - 2.0) < 1e-14


def test_eval_delta_rejects_negative_time():
    with pytest.raises(ValueError):
        eval_delta(constant_profile(1.0), -0.1)


def test_cumulative_power_alpha_one():
    # beta(t) = t^2 / 2
    assert abs(cumulative_delta(power_profile(1.0), 1.0) - 0.5) < 1e-13


def test_cumulative_zero_profile():
    assert cumulative_delta(constant_profile(0.0), 3.0) == 0.0


def test_cumulative_oscillatory_matches_midpoint_oracle():
    prof = oscillatory_profile()
    v1 = cumulative_delta(prof, 0.1)
    v5 = cumulative_delta(prof, 0.5)
    assert abs(v1 - OSC_BETA_01) < 1e-6
    assert abs(v5 - OSC_BETA_05) < 1e-6
    # bracket t/4 <= beta(t) <= 2t
    assert 0.1 / 4.0 <= v1 <= 2.0 * 0.1


def test_cumulative_monotone():
    prof = oscillatory_profile()
    ts = np.linspace(0.0, 1.0, 97)
    vals = cumulative_delta_grid(prof, ts)
    assert np.all(np.diff(vals) >= -1e-14)


def test_cumulative_grid_matches_pointwise():
    prof = parse_profile('expr("t * t + 0.3")')
    ts = np.array([0.0, 0.2, 0.7, 1.3])
    grid_vals = cumulative_delta_grid(prof, ts)
    # the grid helper is a midpoint scan, not adaptive quadrature
    for t, v in zip(ts, grid_vals):
        assert abs(v - cumulative_delta(prof, float(t))) < 1e-7


def test_inverse_identity_profile():
    assert abs(inverse_cumulative(constant_profile(1.0), 0.3, 2.0) - 0.3) < 1e-12


def test_inverse_power_profile_analytic():
    # beta(t) = t^2/2, so phi(0.5) = 1
    assert abs(inverse_cumulative(power_profile(1.0), 0.5, 2.0) - 1.0) < 1e-9


def test_inverse_plateau_generalized():
    # delta = 0 on [0,1], 1 after: phi(0.25) = 1.25
    prof = piecewise_profile([(0.0, "0"), (1.0, "1")])
    assert abs(inverse_cumulative(prof, 0.25, 3.0) - 1.25) < 1e-9


def test_inverse_at_zero_is_zero():
    assert inverse_cumulative(power_profile(2.0), 0.0, 1.0) == 0.0


def test_inverse_out_of_range_reports_reachable_value():
    with pytest.raises(ValueError) as info:
        inverse_cumulative(constant_profile(1.0), 5.0, 2.0)
    assert "2.0" in str(info.value)  # beta(t_max) = 2.0 mentioned


def test_inverse_consistency_property():
    profiles = [constant_profile(1.0), power_profile(1.0),
                oscillatory_profile(), piecewise_profile([(0.0, "0"), (0.5, "2")])]
    for prof in profiles:
        top = cumulative_delta(prof, 1.0)
        for frac in (0.1, 0.5, 0.9):
            h = frac * top
            t = inverse_cumulative(prof, h, 1.0)
            assert cumulative_delta(prof, t) >= h - 1e-9
        for t in (0.2, 0.8):
            h = cumulative_delta(prof, t)
            assert inverse_cumulative(prof, h, 1.0) <= t + 1e-9


def test_inverse_exact_when_strictly_positive():
    prof = parse_profile('expr("t + 0.1")')
    for h in (0.05, 0.2, 0.4):
        t = inverse_cumulative(prof, h, 1.0)
        assert abs(cumulative_delta(prof, t) - h) < 1e-9


def test_levelset_constant():
    # beta(t) = t: the set is [0.1, 0.4), measure 0.3
    assert abs(levelset_measure(constant_profile(1.0), 0.1, 1.0) - 0.3) < 1e-12


def test_levelset_power_analytic():
    # beta = t^2/2: measure = sqrt(8h) - sqrt(2h) = sqrt(2h)
    h = 0.01
    m = levelset_measure(power_profile(1.0), h, 1.0)
    assert abs(m - (math.sqrt(8 * h) - math.sqrt(2 * h))) < 1e-9


def test_levelset_empty_above_range():
    prof = power_profile(1.0)
    assert levelset_measure(prof, cumulative_delta(prof, 1.0) * 1.5, 1.0) == 0.0


def test_levelset_matches_scan():
    prof = oscillatory_profile()
    width = 1.0 / 1_000_000
    for h in (0.01, 0.05, 0.1):
        direct = levelset_measure(prof, h, 1.0)
        scanned = levelset_measure_scan(prof, h, 1.0)
        assert abs(direct - scanned) <= 2.0 * width


def test_fit_beta_power_profiles():
    for alpha in (0.0, 1.0, 2.0):
        prof = power_profile(alpha)
        top = cumulative_delta(prof, 1.0) / 4.0
        h_grid = np.logspace(math.log10(top) - 2.5, math.log10(top), 9)
        fit = fit_beta_exponent(prof, 1.0, h_grid)
        expected = alpha + 1.0
        assert abs(fit.beta_hat - expected) / expected < 0.02
        assert fit.n0_hat > 0.0


def test_fit_beta_oscillatory():
    prof = oscillatory_profile()
    top = cumulative_delta(prof, 1.0) / 4.0
    h_grid = np.logspace(math.log10(top) - 2.5, math.log10(top), 9)
    fit = fit_beta_exponent(prof, 1.0, h_grid)
    assert abs(fit.beta_hat - 1.0) < 0.10


def test_fit_rejects_vanishing_measures():
    prof = power_profile(1.0)
    top = cumulative_delta(prof, 1.0)
    with pytest.raises(ValueError, match="vanish"):
        fit_beta_exponent(prof, 1.0, np.array([2.0, 20.0, 200.0, 2000.0]) * top)


def test_fit_needs_enough_points():
    prof = constant_profile(1.0)
    with pytest.raises(ValueError):
        fit_beta_exponent(prof, 1.0, np.array([0.01, 0.02, 0.04]))


def test_domination_equal_is_one():
    prof = power_profile(1.0)
    path = scalar_path(prof, 1)
    times = np.linspace(0.1, 1.0, 7)
    assert abs(check_domination(path, prof, times) - 1.0) < 1e-12


def test_domination_doubled_is_two():
    prof = constant_profile(1.0)
    path = constant_matrix_path(np.eye(2) * 2.0)
    times = np.linspace(0.1, 1.0, 5)
    assert abs(check_domination(path, prof, times) - 2.0) < 1e-12


def test_domination_flags_infinity_over_vanishing_floor():
    path = constant_matrix_path(np.eye(1))
    prof = constant_profile(0.0)
    assert math.isinf(check_domination(path, prof, [0.5]))


def test_min_eigenvalue_identity():
    prof = min_eigenvalue_profile(constant_matrix_path(np.eye(2)))
    assert eval_delta(prof, 0.3) == 1.0


def test_min_eigenvalue_diagonal():
    prof = min_eigenvalue_profile(constant_matrix_path(np.diag([1.0, 2.0])))
    assert abs(eval_delta(prof, 0.3) - 1.0) < 1e-14


def test_min_eigenvalue_coupled():
    # eigenvalues of [[2,1],[1,2]] are 1 and 3
    mat = np.array([[2.0, 1.0], [1.0, 2.0]])
    prof = min_eigenvalue_profile(constant_matrix_path(mat))
    assert abs(eval_delta(prof, 0.7) - 1.0) < 1e-14


def test_parse_profile_grammar():
    assert eval_delta(parse_profile("constant(2.5)"), 0.1) == 2.5
    assert abs(eval_delta(parse_profile("power(2)"), 0.5) - 0.25) < 1e-15
    assert parse_profile("oscillatory()").spec == "oscillatory()"
    assert eval_delta(parse_profile('expr("2*t + 1")'), 1.0) == 3.0
    pw = parse_profile('piecewise([(0.0, "0"), (1.0, "1")])')
    assert eval_delta(pw, 0.5) == 0.0
    assert eval_delta(pw, 1.5) == 1.0


def test_parse_profile_rejects_garbage():
    for bad in ("gauss(1)", "power()", "expr(t)", "constant(-1)", ""):
        with pytest.raises(ValueError):
            parse_profile(bad)


def test_shifted_profile():
    prof = power_profile(1.0).shifted(0.5)
    assert eval_delta(prof, 0.0) == 0.5
    assert abs(cumulative_delta(prof, 1.0) - 1.0) < 1e-10


def test_parse_coefficients_scalar_and_matrix():
    path = parse_coefficients("scalar(power(1))", 2)
    assert np.allclose(path.a(0.5), 0.5 * np.eye(2))
    path2 = parse_coefficients('matrix([["1", "t"], ["t", "2"]])', 2)
    assert np.allclose(path2.a(0.3), [[1.0, 0.3], [0.3, 2.0]])


def test_parse_coefficients_rejects_asymmetric():
    with pytest.raises(ValueError):
        parse_coefficients('matrix([["1", "t"], ["0", "2"]])', 2)


def test_accumulate_path_identity():
    path = constant_matrix_path(np.eye(2))
    assert np.allclose(accumulate_path(path, 0.5), 0.5 * np.eye(2), atol=1e-13)


def test_accumulate_path_oscillatory_matches_cumulative():
    prof = oscillatory_profile()
    path = scalar_path(prof, 1)
    B = accumulate_path(path, 0.1)
    assert abs(B[0, 0] - cumulative_delta(prof, 0.1)) < 1e-12


def test_expr_matrix_path_time_dependent():
    path = expr_matrix_path([["1 + t", "0"], ["0", "1"]])
    assert np.allclose(path.a(1.0), np.diag([2.0, 1.0]))
    B = accumulate_path(path, 1.0)
    assert np.allclose(B, np.diag([1.5, 1.0]), atol=1e-12)


def test_empirical_bound_oscillatory():
    # sup of 1 + sin(1/t) is 2, attained arbitrarily close to 0
    assert empirical_bound(oscillatory_profile(), 1.0) > 1.9


def test_coefficient_path_rejects_bad_dim():
    with pytest.raises(ValueError):
        CoefficientPath(dim=4, a=lambda t: np.eye(4), cumulative=None,
                        bound_M=1.0, spec="", breakpoints=())
