import csv
import math

import numpy as np
import pytest

from finsler_lab import finsler_core as fc, jets
from finsler_lab.finsler_core import SphereAtlas, TangentSample
from finsler_lab.geodesic_flow import (
    IntegrationError, OrientationError, integrate_spray, speed_drift, unparametrized_deviation,
)


def _unit_round_sample(X, V):
    chart, x, xi = SphereAtlas.project(np.asarray(X, float), np.asarray(V, float) / np.linalg.norm(V))
    return TangentSample(chart, x, xi)


def test_round_sphere_follows_exact_great_circle_through_chart_switches():
    F = fc.sphere_round()
    X0 = np.array([0.6, 0.0, -0.8])
    V0 = np.array([0.0, 1.0, 0.0])
    trace = integrate_spray(F, _unit_round_sample(X0, V0), T=10.0, tol=1e-11, dt_out=0.05)
    assert len(trace.switches) >= 2
    P = trace.positions()
    exact = np.cos(trace.t)[:, None] * X0 + np.sin(trace.t)[:, None] * V0
    assert np.abs(P - exact).max() < 1e-8
    assert speed_drift(trace, F) < 1e-7


def test_chart_switch_lands_inside_the_new_chart():
    F = fc.sphere_round()
    trace = integrate_spray(F, _unit_round_sample([0.0, 0.6, -0.8], [1.0, 0.0, 0.0]), 7.0)
    for seg in trace.segments():
        r = np.linalg.norm(trace.x[list(seg)], axis=1)
        assert r.max() <= 1.5 + 1e-9
    assert trace.switches
    for t_ev, old, new in trace.switches:
        k = int(np.argmin(np.abs(trace.t - t_ev)))
        assert trace.t[k] == t_ev and trace.charts[k] == old and new != old
        assert abs(np.linalg.norm(trace.x[k]) - 1.5) < 1e-9
        # the inverted point sits at radius 1/1.5 in the new chart
        _, y, _ = fc.SPHERE.transition(old, trace.x[k], trace.xi[k])
        assert abs(np.linalg.norm(y) - 1 / 1.5) < 1e-9


def test_poincare_ray_from_origin():
    # unit-speed ray: |x(t)| = tanh(t / 2)
    F = fc.poincare()
    d = np.array([0.6, 0.8])
    s = TangentSample("D", np.zeros(2), 0.5 * d)  # F = 2 |xi| = 1
    trace = integrate_spray(F, s, 4.0, tol=1e-11)
    r = np.linalg.norm(trace.x, axis=1)
    np.testing.assert_allclose(r, np.tanh(trace.t / 2), atol=1e-8)
    # and it stays on the diameter through d
    assert np.abs(trace.x[:, 0] * d[1] - trace.x[:, 1] * d[0]).max() < 1e-12


def test_euclidean_lines_and_randers_constant_form_lines():
    for F in (fc.euclidean(), fc.randers(0.3, -0.2)):
        s = TangentSample("E", np.array([0.1, -0.3]), np.array([0.5, 0.2]))
        trace = integrate_spray(F, s, 3.0, dt_out=0.1)
        np.testing.assert_allclose(trace.x, s.x + trace.t[:, None] * s.xi, atol=1e-12)


def test_leaving_the_disk_raises():
    flat = fc.MetricModel("flat_disk", fc.DISK, {"D": lambda p: jets.sqrt(p[2] * p[2] + p[3] * p[3])})
    with pytest.raises(IntegrationError):
        integrate_spray(flat, TangentSample("D", np.zeros(2), np.array([1.0, 0.0])), 2.0)


def test_invalid_arguments():
    F = fc.euclidean()
    s = TangentSample("E", np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        integrate_spray(F, s, -1.0)
    with pytest.raises(ValueError):
        integrate_spray(F, s, 1.0, tol=0.0)


def test_output_grid_and_csv(tmp_path):
    F = fc.euclidean()
    trace = integrate_spray(F, TangentSample("E", np.zeros(2), np.array([1.0, 0.0])), 1.05, dt_out=0.1)
    assert np.all(np.diff(trace.t) > 0)
    assert trace.t[-1] == pytest.approx(1.05)
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "chart", "x1", "x2", "xi1", "xi2"]
    assert len(rows) == len(trace) + 1
    assert float(rows[-1][2]) == trace.x[-1, 0]


def test_deviation_is_parametrization_free():
    # the same arc of a great circle traversed at two speeds
    F = fc.sphere_round()
    s = _unit_round_sample([1.0, 0.0, 0.0], [0.0, 0.6, 0.8])
    a = integrate_spray(F, s, 3.0, dt_out=0.01)
    b = integrate_spray(F, s.scaled(2.0), 1.5, dt_out=0.005)
    assert unparametrized_deviation(a, b) < 1e-4
    assert unparametrized_deviation(b, a) < 1e-4


def test_deviation_detects_a_different_curve_and_opposite_orientation():
    F = fc.euclidean()
    a = integrate_spray(F, TangentSample("E", np.array([0.0, 0.0]), np.array([1.0, 0.0])), 1.0)
    b = integrate_spray(F, TangentSample("E", np.array([0.0, 0.1]), np.array([1.0, 0.0])), 1.0)
    assert unparametrized_deviation(a, b) == pytest.approx(0.1, abs=1e-12)
    rev = integrate_spray(F, TangentSample("E", np.array([1.0, 0.0]), np.array([-1.0, 0.0])), 1.0)
    with pytest.raises(OrientationError):
        unparametrized_deviation(a, rev)
    assert unparametrized_deviation(a, rev, check_orientation=False) < 1e-12


def test_deviation_rejects_mixed_manifolds():
    a = integrate_spray(fc.euclidean(), TangentSample("E", np.zeros(2), np.array([1.0, 0.0])), 0.5)
    b = integrate_spray(fc.poincare(), TangentSample("D", np.zeros(2), np.array([1.0, 0.0])), 0.5)
    with pytest.raises(ValueError):
        unparametrized_deviation(a, b)


def test_randers_speed_is_conserved():
    F = fc.randers("0.2*sin(x2)", "0.1*cos(x1)")
    trace = integrate_spray(F, TangentSample("E", np.zeros(2), np.array([0.3, 0.9])), 5.0)
    assert speed_drift(trace, F) < 1e-7
    assert math.isfinite(trace.nfev) and trace.steps > 0
