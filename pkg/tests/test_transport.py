"""Coefficient tables and the constraint validator."""

import math

import numpy as np
import pytest

from ucgm.transport import (EDM_DATA_STD, edm_sigma, family_names, get_family,
                            validate_family)

ALL_FAMILIES = ("linear", "relinear", "trigflow", "edm", "triglinear",
                "random")


def test_registry_lists_all_six_families():
    assert set(family_names()) == set(ALL_FAMILIES)
    for name in ALL_FAMILIES:
        assert get_family(name).name == name


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        get_family("cosine")


def test_linear_row_at_t_030():
    c = get_family("linear").coefficients(0.3)
    assert math.isclose(float(c.alpha), 0.3, abs_tol=1e-15)
    assert math.isclose(float(c.gamma), 0.7, abs_tol=1e-15)
    assert float(c.alpha_hat) == 1.0
    assert float(c.gamma_hat) == -1.0
    assert math.isclose(float(c.denominator), -1.0, abs_tol=1e-15)


def test_trigflow_row_at_t_half():
    c = get_family("trigflow").coefficients(0.5)
    r = math.sqrt(2.0) / 2.0
    assert math.isclose(float(c.alpha), r, rel_tol=1e-15)
    assert math.isclose(float(c.gamma), r, rel_tol=1e-15)
    assert math.isclose(float(c.alpha_hat), r, rel_tol=1e-15)
    assert math.isclose(float(c.gamma_hat), -r, rel_tol=1e-15)
    # -sin^2 - cos^2 = -1 for every t, not just 0.5
    assert math.isclose(float(c.denominator), -1.0, abs_tol=1e-15)


def test_relinear_swaps_the_linear_roles():
    c = get_family("relinear").coefficients(0.2)
    assert math.isclose(float(c.alpha), 0.8, abs_tol=1e-15)
    assert math.isclose(float(c.gamma), 0.2, abs_tol=1e-15)
    assert float(c.alpha_hat) == -1.0
    assert float(c.gamma_hat) == 1.0
    assert math.isclose(float(c.denominator), 1.0, abs_tol=1e-15)


def test_edm_sigma_endpoint_values():
    assert math.isclose(float(edm_sigma(0.0)), math.exp(-6.36), rel_tol=1e-14)
    assert math.isclose(float(edm_sigma(1.0)), math.exp(4.36), rel_tol=1e-14)
    # exponent 4(2.68 t - 1.59) crosses zero at t = 1.59/2.68
    assert math.isclose(float(edm_sigma(1.59 / 2.68)), 1.0, rel_tol=1e-14)
    assert EDM_DATA_STD == 0.5


def test_edm_denominator_is_exactly_two():
    fam = get_family("edm")
    t = np.linspace(0.0, 1.0, 1024)
    denom = fam.coefficients(t).denominator
    assert np.max(np.abs(denom - 2.0)) <= 1e-12


def test_constant_denominators_on_grid():
    t = np.linspace(0.0, 1.0, 1024)
    for name, value in (("linear", -1.0), ("relinear", 1.0),
                        ("trigflow", -1.0)):
        denom = get_family(name).coefficients(t).denominator
        assert np.max(np.abs(denom - value)) <= 1e-12, name


def test_triglinear_denominator_is_not_constant():
    # alpha*gamma_hat - alpha_hat*gamma = -(sin + cos)(pi t/2 args), which
    # sweeps [-sqrt(2), -1]; a constant-denominator assumption would be wrong.
    t = np.linspace(0.0, 1.0, 513)
    denom = get_family("triglinear").coefficients(t).denominator
    assert denom.max() <= -1.0 + 1e-12
    assert denom.min() >= -math.sqrt(2.0) - 1e-12
    assert denom.max() - denom.min() > 0.3


def test_random_family_coupling_stays_bounded_away_from_zero():
    t = np.linspace(0.0, 1.0, 2048)
    denom = get_family("random").coefficients(t).denominator
    assert np.min(np.abs(denom)) >= 1.0 - 1e-12


def test_coefficients_accept_arrays_and_reject_bad_time():
    fam = get_family("linear")
    c = fam.coefficients(np.array([0.0, 0.5, 1.0]))
    assert c.alpha.shape == (3,)
    assert c.alpha.dtype == np.float64
    with pytest.raises(ValueError):
        fam.coefficients(1.5)
    with pytest.raises(ValueError):
        fam.coefficients(-0.01)
    with pytest.raises(ValueError):
        fam.coefficients(np.nan)


def test_validator_passes_linear_and_trigflow():
    for name in ("linear", "trigflow"):
        report = validate_family(get_family(name))
        assert report.passed, [c.name for c in report.checks if not c.passed]


def test_validator_flags_relinear_boundary_orientation():
    report = validate_family(get_family("relinear"))
    failed = {c.name for c in report.checks if not c.passed}
    # alpha(0)=1, gamma(0)=0: boundary and monotonicity checks must fail,
    # while the coupling determinant stays nonzero.
    assert {"alpha(0)", "alpha(1)", "gamma(0)", "gamma(1)"} <= failed
    assert "coupling-nonzero" not in failed


def test_validator_reports_edm_boundary_gaps_honestly():
    report = validate_family(get_family("edm"))
    by_name = {c.name: c for c in report.checks}
    assert not by_name["alpha(0)"].passed
    assert not by_name["gamma(0)"].passed
    assert not by_name["gamma(1)"].passed
    # alpha(0) = sigma0/sqrt(sigma0^2+0.25) ~ 3.5e-3, far beyond any
    # reasonable boundary tolerance; the report must say so, not hide it.
    fam = get_family("edm")
    a0 = float(fam.coefficients(0.0).alpha)
    g0 = float(fam.coefficients(0.0).gamma)
    g1 = float(fam.coefficients(1.0).gamma)
    assert math.isclose(a0, 3.4587e-3, rel_tol=1e-3)
    assert math.isclose(g0, 2.0, rel_tol=1e-4)
    assert math.isclose(g1, 1.2778e-2, rel_tol=1e-3)
    assert by_name["coupling-nonzero"].passed


def test_validator_random_family_coupling_check_passes():
    report = validate_family(get_family("random"))
    by_name = {c.name: c for c in report.checks}
    assert by_name["coupling-nonzero"].passed


def test_report_lines_are_printable():
    report = validate_family(get_family("linear"))
    lines = report.lines()
    assert len(lines) >= len(report.checks)
    assert any("pass" in ln for ln in lines)


def test_monotone_coefficients_on_grid():
    t = np.linspace(0.0, 1.0, 4096)
    for name in ("linear", "trigflow", "edm"):
        fam = get_family(name)
        c = fam.coefficients(t)
        assert np.all(np.diff(c.alpha) >= -1e-12), name
        assert np.all(np.diff(c.gamma) <= 1e-12), name
