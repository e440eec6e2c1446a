import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_lab import crofton_sphere as cs
from finsler_lab import finsler_core as fc
from finsler_lab import jets
from finsler_lab.finsler_core import SphereAtlas, TangentSample
from finsler_lab.projective_equivalence import proportionality_integral, rapcsak_residual

from conftest import crofton_constant, crofton_polar

# an even, positive, non-zonal density exercising the per-node jet path
GENERIC = "1 + 0.3*x1^2 + 0.2*x2*x3"


def _random_tangents(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        X = rng.normal(size=3)
        X /= np.linalg.norm(X)
        V = np.cross(X, rng.normal(size=3))
        out.append((X, V))
    return out


def test_constant_density_gives_a_multiple_of_the_round_metric():
    R = fc.sphere_round()
    F1, F3 = crofton_constant(1.0), crofton_constant(3.0)
    for s in fc.sample_tangents(R, 50, 0):
        assert F1.value(s) == pytest.approx(R.value(s), rel=1e-12)
        assert F3.value(s) == pytest.approx(3 * R.value(s), rel=1e-12)


@pytest.mark.parametrize("density", [cs.polar_cap_density(1.0), cs.polar_cap_density(4.0),
                                     cs.expression_density(GENERIC)], ids=["cap1", "cap4", "generic"])
def test_fixed_rule_matches_adaptive_reference(density):
    for X, V in _random_tangents(12, 1):
        s = TangentSample(*SphereAtlas.project(X, V))
        Xc = SphereAtlas.embed(s.chart, *s.x)
        Vc = SphereAtlas.embed_tangent(s.chart, *s.x, *s.xi)
        fixed = cs.crofton_extrinsic(density, Xc, Vc, 512)
        ref = cs.crofton_reference(density, X, V, frame_angle=0.0)
        assert fixed == pytest.approx(ref, rel=1e-10, abs=1e-12)
        # the reference does not depend on the tangent frame
        assert cs.crofton_reference(density, X, V, frame_angle=1.3) == pytest.approx(ref, rel=1e-11)


def test_zonal_shortcut_agrees_with_per_node_jets():
    d = cs.polar_cap_density(2.0)
    for X, V in _random_tangents(6, 2):
        s = TangentSample(*SphereAtlas.project(X, V))

        def field(zonal):
            def F(p):
                Xj = SphereAtlas.embed(s.chart, p[0], p[1])
                Vj = SphereAtlas.embed_tangent(s.chart, *p)
                return cs.crofton_extrinsic(d, Xj, Vj, 256, zonal=zonal)
            return F

        a = jets.eval_jet2(field(True), s.point)
        b = jets.eval_jet2(field(False), s.point)
        assert a.value == pytest.approx(b.value, rel=1e-13)
        np.testing.assert_allclose(a.gradient, b.gradient, atol=1e-11)
        np.testing.assert_allclose(a.hessian, b.hessian, atol=1e-10)


def test_jets_match_finite_differences():
    F = crofton_polar(1.0)
    for s in fc.sample_tangents(F, 5, 3):
        assert jets.fd_crosscheck(F.field(s.chart), s.point, 1e-4) < 1e-5


def test_direction_pairing_is_the_quarter_turn_of_the_normal_pairing():
    d = cs.polar_cap_density(1.0)
    for X, V in _random_tangents(8, 4):
        direct = cs.crofton_reference(d, X, V, pairing="direction")
        assert direct == pytest.approx(cs.crofton_reference(d, X, np.cross(X, V)), rel=1e-12)


def test_only_the_normal_pairing_is_projectively_flat():
    R = fc.sphere_round()
    good = crofton_polar(1.0)
    bad = cs.crofton_metric(cs.polar_cap_density(1.0), 512, pairing="direction")
    samples = fc.sample_tangents(R, 40, 5)
    assert max(np.abs(rapcsak_residual(good, R, s)).max() for s in samples) < 1e-9
    assert max(np.abs(rapcsak_residual(bad, R, s)).max() for s in samples) > 1e-3
    with pytest.raises(ValueError):
        cs.crofton_metric(cs.constant_density(1.0), 64, pairing="sideways")


def test_generic_density_is_projectively_flat():
    R = fc.sphere_round()
    F = cs.crofton_metric(cs.expression_density(GENERIC))
    worst = max(np.abs(rapcsak_residual(F, R, s)).max() for s in fc.sample_tangents(R, 20, 6))
    assert worst < 1e-8


def test_density_validation():
    with pytest.raises(ValueError, match="even"):
        cs.crofton_metric(cs.expression_density("1 + 0.5*x1"))
    with pytest.raises(ValueError, match="positive"):
        cs.crofton_metric(cs.expression_density("x3^2 - 0.5"))
    with pytest.raises(ValueError):
        cs.constant_density(0.0)
    with pytest.raises(ValueError):
        cs.polar_cap_density(-1.0)


def test_polar_cap_profile_derivatives():
    d = cs.polar_cap_density(1.5)
    z = np.array([0.75, 0.8, 0.9, 0.99, -0.85])
    h = 1e-6
    f0, f1, f2 = d.profile(z)
    p0, _, _ = d.profile(z + h)
    m0, _, _ = d.profile(z - h)
    np.testing.assert_allclose(f1, (p0 - m0) / (2 * h), rtol=1e-7)
    _, p1, _ = d.profile(z + h)
    _, m1, _ = d.profile(z - h)
    np.testing.assert_allclose(f2, (p1 - m1) / (2 * h), rtol=1e-6)
    # equal to 1 on the band
    np.testing.assert_array_equal(d.profile(np.array([0.0, 0.5, 0.7]))[0], 1.0)


def test_coincidence_on_the_caps_and_difference_on_the_band():
    R = fc.sphere_round()
    F = crofton_polar(1.0)
    rep = cs.coincidence_check(R, F, 100, seed=0)
    assert rep.max_difference < 1e-12 and rep.cross_product_violations == 0
    # on the equator the bump is seen by vectors crossing the equator
    X = np.array([1.0, 0.0, 0.0])
    s = TangentSample(*SphereAtlas.project(X, np.array([0.0, 0.0, 1.0])))
    assert F.value(s) - R.value(s) > 1e-3
    with pytest.raises(ValueError):
        cs.coincidence_check(R, F, points=[(X, np.array([0.0, 1.0, 0.0]))])


def test_nontriviality_certificate():
    cert = cs.nontriviality_certificate(crofton_polar(1.0), 60, 0)
    assert cert.certified and cert.spread >= 1e-3
    assert cert.I_on_V < 1e-9
    flat = cs.nontriviality_certificate(crofton_constant(1.0), 30, 0)
    assert not flat.certified and flat.spread < 1e-9


def test_equivalence_to_round_for_constant_density():
    rep = cs.equivalence_to_round(crofton_constant(2.0), n_samples=10, seed=0)
    assert rep.residual_max < 1e-12
    # identical curves; what remains is the sagitta of the reference polyline, (0.005)^2 / 8
    assert rep.deviation_max == pytest.approx(0.005 ** 2 / 8, rel=1e-3)


def test_node_calibration_is_frozen_in_the_config():
    F = crofton_polar(1.0)
    n = F.config["nodes"]
    assert n in (32, 64, 128, 256, 512, 1024)
    G = cs.crofton_metric(cs.polar_cap_density(1.0), n)
    s = fc.sample_tangents(F, 1, 0)[0]
    assert G.value(s) == F.value(s)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0, 2 * math.pi), st.floats(-1, 1), st.floats(0, 2 * math.pi))
def test_homogeneous_and_reversible(c, phi, z, t):
    F = crofton_polar(1.0)
    r = math.sqrt(1 - z * z)
    X = np.array([r * math.cos(t), r * math.sin(t), z])
    chart, x = SphereAtlas.project(X)
    s = TangentSample(chart, x, np.array([math.cos(phi), math.sin(phi)]))
    v = F.value(s)
    assert F.value(s.scaled(c)) == pytest.approx(c * v, rel=1e-13)
    assert F.value(s.scaled(-1.0)) == pytest.approx(v, rel=1e-13)
    assert proportionality_integral(fc.sphere_round(), F, s) > 0
