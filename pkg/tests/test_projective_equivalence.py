
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_lab import finsler_core as fc
from finsler_lab import projective_equivalence as pe
from finsler_lab.finsler_core import OneForm, TangentSample
from finsler_lab.geodesic_flow import integrate_spray

from conftest import crofton_polar


def test_residual_of_euclidean_plus_form_is_its_curl():
    # hand derivation: residual_i = (d_i beta_j - d_j beta_i) xi^j
    c = 0.15
    Fb = fc.one_form_sum(fc.euclidean(), OneForm(f"-{c}*x2*x2", f"{c}*x1"))
    for s in fc.sample_tangents(Fb, 30, 4, box=(-0.5, 0.5)):
        d_beta = c + 2 * c * s.x[1]
        expected = d_beta * np.array([s.xi[1], -s.xi[0]])
        np.testing.assert_allclose(pe.rapcsak_residual(Fb, fc.euclidean(), s), expected, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_exact_forms_are_invisible_to_the_rapcsak_test(a, b, c):
    # beta = d(a x1^2 + b x1 x2 + c sin(x2))
    beta = OneForm(f"{2 * a}*x1 + {b}*x2", f"{b}*x1 + {c}*cos(x2)")
    F = fc.euclidean()
    Fb = fc.one_form_sum(F, beta)
    for s in fc.sample_tangents(F, 5, 0, box=(-0.4, 0.4)):
        assert np.abs(pe.rapcsak_residual(Fb, F, s)).max() < 1e-12


def test_closed_one_form_report():
    F = fc.euclidean()
    closed = pe.closed_one_form_test(F, OneForm("0.5*x2", "0.5*x1"), 100, 0)
    assert closed.closed and closed.residual_max < 1e-12 and closed.agreement == 1.0
    rot = pe.closed_one_form_test(F, OneForm("-0.1*x2", "0.1*x1"), 100, 0)
    assert not rot.closed
    assert rot.prediction_error < 1e-13
    assert rot.residual_min > 0.2 - 1e-12  # |residual| = 0.2 |xi| with unit xi


def test_closed_form_on_the_sphere_chart():
    F = fc.sphere_round()
    Fb = fc.one_form_sum(F, OneForm("0.1*x2", "0.1*x1", "N"))
    for s in fc.sample_tangents(F, 30, 1):
        assert np.abs(pe.rapcsak_residual(Fb, F, s)).max() < 1e-12


def test_spray_source_variants_agree():
    F = fc.randers("0.1*x2", 0.2)
    E = fc.euclidean()
    s = TangentSample("E", np.array([0.2, 0.3]), np.array([0.6, -0.8]))
    sc = fc.spray_coefficients(E, s)
    a = pe.rapcsak_residual(F, E, s)
    np.testing.assert_array_equal(a, pe.rapcsak_residual(F, sc, s))
    np.testing.assert_array_equal(a, pe.rapcsak_residual(F, sc.G, s))


def test_chart_mismatch_is_rejected():
    s = TangentSample("N", np.array([0.2, 0.3]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        pe.rapcsak_residual(fc.euclidean(), fc.sphere_round(), s)


def test_proportionality_integral_values():
    E = fc.euclidean()
    F2 = fc.one_form_sum(E, OneForm(1.0, 0.0), lam=2.0)
    for s in fc.sample_tangents(E, 10, 0):
        assert pe.proportionality_integral(F2, E, s) == pytest.approx(2.0, rel=1e-14)
    # the round metric against itself
    R = fc.sphere_round()
    s = fc.sample_tangents(R, 1, 0)[0]
    assert pe.proportionality_integral(R, R, s) == pytest.approx(1.0, rel=1e-15)


def test_integral_is_constant_along_round_geodesics_for_a_trivial_pair():
    R = fc.sphere_round()
    Fb = fc.one_form_sum(R, OneForm("0.05*x1", "0.05*x2", "N"), lam=1.5)
    s = fc.sample_tangents(R, 1, 3)[0]
    assert pe.conservation_check(R, Fb, s, 6.0) < 1e-9


def test_conservation_warns_for_non_equivalent_pair():
    E = fc.euclidean()
    Fb = fc.one_form_sum(E, OneForm("-0.1*x2", "0.1*x1"))
    s = TangentSample("E", np.zeros(2), np.array([1.0, 0.0]))
    with pytest.warns(UserWarning, match="Rapcsak"):
        pe.conservation_check(E, Fb, s, 1.0, both=False)


def test_transport_coefficient_formula():
    # c = 2 [J11 xi2^2 - (J12 + J21) xi1 xi2 + J22 xi1^2] / |xi|^2
    J = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert pe.transport_coefficient(J, np.array([1.0, 0.0])) == pytest.approx(8.0)
    assert pe.transport_coefficient(J, np.array([0.0, 1.0])) == pytest.approx(2.0)
    assert pe.transport_coefficient(J, np.array([1.0, 1.0])) == pytest.approx((1 - 5 + 4))


@pytest.mark.parametrize("F", [fc.sphere_round(), fc.randers("0.2*sin(x2)", "0.1*x1")],
                         ids=["round", "randers"])
def test_transport_identity_along_geodesics(F):
    s = fc.sample_tangents(F, 1, 2, box=(-0.3, 0.3))[0]
    trace = integrate_spray(F, s, 5.0 / F.value(s), tol=1e-10, dt_out=0.02)
    rep = pe.trace_transport_residual(F, trace)
    assert rep.residual < 1e-5
    assert rep.pointwise < 1e-9
    assert rep.n_points > 50


def test_transport_needs_enough_points():
    F = fc.euclidean()
    trace = integrate_spray(F, TangentSample("E", np.zeros(2), np.array([1.0, 0.0])), 0.02, dt_out=0.01)
    with pytest.raises(pe.TraceTooShortError):
        pe.trace_transport_residual(F, trace)


def test_coordinate_invariance_of_the_integral():
    F_hat = fc.randers("0.2*x2", "0.1*sin(x1)")
    F_check = fc.euclidean()
    rng = np.random.default_rng(0)
    for s in fc.sample_tangents(F_check, 10, 1, box=(-0.5, 0.5)):
        A = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        assert pe.coordinate_invariance_check(F_hat, F_check, s, A) < 1e-12
    with pytest.raises(ValueError):
        pe.coordinate_invariance_check(F_hat, F_check, s, np.ones((2, 2)))


def test_reconstruction_recovers_lambda_and_beta():
    E = fc.euclidean()
    F_hat = fc.one_form_sum(E, OneForm("0.3*x2", "0.3*x1 + 0.1"), lam=2.0)
    rec = pe.reconstruct_one_form(F_hat, E, 20, seed=1)
    assert rec.lam == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(rec.beta[:, 0], 0.3 * rec.points[:, 1], atol=1e-12)
    np.testing.assert_allclose(rec.beta[:, 1], 0.3 * rec.points[:, 0] + 0.1, atol=1e-12)
    assert rec.closedness_defect < 1e-12
    assert rec.to_dict()["lambda"] == rec.lam


def test_reconstruction_reports_a_non_closed_form():
    E = fc.euclidean()
    F_hat = fc.one_form_sum(E, OneForm("-0.1*x2", "0.1*x1"))
    rec = pe.reconstruct_one_form(F_hat, E, 10)
    assert rec.closedness_defect == pytest.approx(0.2, abs=1e-12)


def test_reconstruction_refuses_a_non_trivial_pair():
    with pytest.raises(pe.NonTrivialPairError):
        pe.reconstruct_one_form(fc.sphere_round(), crofton_polar(1.0), 40, seed=0)


def test_reconstruction_refuses_nonlinear_difference():
    # I varies slightly; with a loose tol_I the fiberwise linearity check must catch it
    F_hat = fc.expression_metric("(1 + 0.001*x1) * sqrt(xi1^2 + xi2^2) + 0.3*xi1")
    with pytest.raises(ValueError, match="linear"):
        pe.reconstruct_one_form(F_hat, fc.euclidean(), 10, tol_I=1.0)


def test_equivalence_report_verdicts():
    E = fc.euclidean()
    good = pe.equivalence_report(fc.one_form_sum(E, OneForm("x2", "x1"), lam=3.0), E, 30)
    assert good.verdicts == {"equivalent": True, "trivially_related": True, "beta_closed": True,
                             "I_constant": True}
    bad = pe.equivalence_report(fc.one_form_sum(E, OneForm("-0.1*x2", "0.1*x1")), E, 30)
    assert not bad.verdicts["equivalent"]
    d = good.to_dict()
    assert d["I_mean"] == pytest.approx(3.0) and d["drift"] is None


def test_closed_form_test_rejects_non_convex_sum():
    with pytest.raises(fc.NotFinslerError):
        pe.closed_one_form_test(fc.euclidean(), OneForm("2*x2", "2*x1"), 50, 0)
