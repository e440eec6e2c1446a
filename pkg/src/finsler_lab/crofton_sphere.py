"""Crofton-type metrics on the round sphere.

For an even positive density ``lam`` on the unit sphere the metric

    F(x, v) = 1/4 * integral over unit eta in T_x S^2 of lam(n) |<v, n>|,   n = x cross eta

has the great circles as geodesics: it weighs every great circle through x
(normal ``n``) by how fast ``v`` crosses it.  Pairing ``v`` with ``eta``
instead of ``n`` (``pairing="direction"``) gives the same metric rotated a
quarter turn in each tangent plane, ``F(x, x cross v)``; it agrees with the
round metric for constant density but is not projectively flat in general,
and is kept only as a diagnostic.

Internally the integral is computed as the direction-paired form at
``x cross v``.  The integrand has kinks where ``<v, eta> = 0``; writing ``eta = cos(phi) u + sin(phi) w`` with ``u = v/|v|``
and ``w = x cross u`` pins them at ``phi = +-pi/2`` for every ``(x, v)``, so
each of the two arcs is integrated with a fixed Gauss-Legendre rule and the
result is differentiable under the integral sign (the arc endpoints do not
move).  This is what makes jets of the metric exact up to quadrature error.

Naming used below: ``U`` is the closed band ``|x3| <= 1/sqrt 2`` and ``V``
the open polar caps ``|x3| > 1/sqrt 2``.  Every great circle through a point
of ``V`` has its normal in ``U``, so two densities that agree on ``U`` give
metrics that agree on tangent vectors based in ``V``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from . import jets
from .expressions import Expression
from .finsler_core import (
    SPHERE, TOL_QUADRATURE, MetricModel, SphereAtlas, TangentSample, sample_tangents,
    sphere_round,
)

#: base-point threshold for the set U = {|x3| <= 1/sqrt 2}
U_BOUND = 1.0 / math.sqrt(2.0)
QUAD_START = 32
QUAD_TOL = 1e-9
QUAD_MAX = 1024


@dataclass(frozen=True, eq=False)
class DensityField:
    """A positive function on the unit sphere, jet-compatible in ``(x1, x2, x3)``.

    ``profile``, when given, marks a zonal density ``lam = f(x3)`` and returns
    ``(f, f', f'')`` on arrays; the quadrature then skips per-node jets.
    """

    func: Callable
    name: str = "density"
    config: dict = field(default_factory=dict)
    profile: Callable | None = None

    def __call__(self, X1, X2, X3):
        return self.func(X1, X2, X3)

    def values(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float)
        return np.asarray(self.func(P[..., 0], P[..., 1], P[..., 2]), dtype=float) * np.ones(P.shape[:-1])


def constant_density(c: float = 1.0) -> DensityField:
    c = float(c)
    if c <= 0:
        raise ValueError("density must be positive")
    return DensityField(lambda X1, X2, X3: c + 0.0 * X3, f"constant({c:g})",
                        config={"kind": "constant", "value": c},
                        profile=lambda z: (c + 0.0 * z, 0.0 * z, 0.0 * z))


def expression_density(expr: str) -> DensityField:
    e = Expression(expr, ("x1", "x2", "x3"))
    return DensityField(lambda X1, X2, X3: e(X1, X2, X3) + 0.0 * X3, f"expression({expr})",
                        config={"kind": "expression", "expr": expr})


def polar_cap_density(a: float = 1.0) -> DensityField:
    """Even density equal to 1 on ``|x3| <= 1/sqrt 2`` and larger beyond it.

    ``1 + a*exp(-1/(x3^2 - 1/2))`` where ``x3^2 > 1/2``; smooth, and flat to all
    orders across the boundary of U.
    """
    a = float(a)
    if a < 0:
        raise ValueError("bump amplitude must be non-negative")

    def lam(X1, X2, X3):
        s = X3 * X3 - 0.5
        inside = np.real(jets.value_of(s)) > 0.0
        safe = jets.where(inside, s, 1.0)
        bump = jets.where(inside, jets.exp(-1.0 / safe), 0.0)
        return 1.0 + a * bump

    def profile(z):
        s = z * z - 0.5
        inside = np.real(s) > 0.0
        safe = np.where(inside, s, 1.0)
        e = np.where(inside, np.exp(-1.0 / safe), 0.0)
        # d/ds exp(-1/s) = e/s^2, d2/ds2 = e (1 - 2s)/s^4; ds/dz = 2z
        e1 = e / safe ** 2
        e2 = e * (1.0 - 2.0 * safe) / safe ** 4
        return 1.0 + a * e, a * e1 * 2.0 * z, a * (e2 * 4.0 * z * z + 2.0 * e1)

    return DensityField(lam, f"polar_cap(a={a:g})", config={"kind": "polar_cap", "a": a},
                        profile=profile)


def check_density(density: DensityField, n: int = 200, seed: int = 0) -> None:
    """Validate positivity and evenness at random points (tolerance 1e-12)."""
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(n, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    plus, minus = density.values(P), density.values(-P)
    if not np.all(np.isfinite(plus)) or np.any(plus <= 0):
        raise ValueError(f"density {density.name} is not positive")
    if np.max(np.abs(plus - minus)) > 1e-12 * np.max(np.abs(plus)):
        raise ValueError(f"density {density.name} is not even: lam(-x) != lam(x)")


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


@lru_cache(maxsize=None)
def _arc_rule(n: int):
    """Nodes, weights, cos and sin for both arcs [-pi/2, pi/2] and [pi/2, 3pi/2]."""
    t, w = np.polynomial.legendre.leggauss(n)
    phi = 0.5 * np.pi * t
    phi = np.concatenate([phi, phi + np.pi])
    return phi, np.concatenate([w, w]) * 0.5 * np.pi, np.cos(phi), np.sin(phi)


PAIRINGS = ("normal", "direction")


def crofton_extrinsic(density: DensityField, X, V, n_nodes: int, zonal: bool = True,
                      pairing: str = "normal"):
    """Quadrature of the Crofton integral at sphere point X, tangent V (3-tuples, jets ok)."""
    if pairing == "normal":
        V = _cross(X, V)
    elif pairing != "direction":
        raise ValueError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    phi, w, cphi, sphi = _arc_rule(n_nodes)
    nv = jets.sqrt(V[0] * V[0] + V[1] * V[1] + V[2] * V[2])
    u = tuple(c / nv for c in V)
    wv = _cross(X, u)
    if zonal and density.profile is not None:
        return 0.25 * nv * _zonal_integral(density.profile, wv[2], u[2], cphi, sphi, w)
    # normals x cross eta(phi) = cos(phi) w - sin(phi) u
    normal = tuple(cphi * wv[k] - sphi * u[k] for k in range(3))
    lam = density(*normal)
    integrand = lam * np.abs(cphi)
    if isinstance(integrand, jets.Jet):
        total = integrand.weighted_sum(w)
    else:
        total = np.sum(np.asarray(integrand) * w, axis=-1)
    return 0.25 * nv * total


def _zonal_integral(profile, w3, u3, cphi, sphi, weights):
    # the normal's height is cos(phi) w3 - sin(phi) u3, linear in (w3, u3)
    W = weights * np.abs(cphi)
    z = cphi * jets.value_of(w3) - sphi * jets.value_of(u3)
    f0, f1, f2 = profile(z)
    total = W @ f0
    if not isinstance(w3, jets.Jet):
        return total
    grad = np.array([W @ (f1 * cphi), -(W @ (f1 * sphi))])
    a, b = W @ (f2 * cphi * cphi), -(W @ (f2 * cphi * sphi))
    hess = np.array([[a, b], [b, W @ (f2 * sphi * sphi)]])
    return jets.compose(total, grad, hess, [w3, u3])


def _chart_field(density, chart, n_nodes, pairing="normal"):
    def F(p):
        X = SphereAtlas.embed(chart, p[0], p[1])
        V = SphereAtlas.embed_tangent(chart, p[0], p[1], p[2], p[3])
        return crofton_extrinsic(density, X, V, n_nodes, pairing=pairing)

    return F


def calibrate_nodes(density: DensityField, n_probe: int = 24, seed: int = 7,
                    tol: float = QUAD_TOL, pairing: str = "normal") -> int:
    """Smallest node count per arc (doubling from 32) at which all jet entries settle.

    The node count is then frozen for the metric so that F stays a smooth
    function of ``(x, xi)``.
    """
    probes = sample_tangents(sphere_round(), n_probe, seed)
    # also probe near the boundary of U, where a bump density switches on
    for z in (U_BOUND + 0.02, U_BOUND + 0.1, 0.9):
        X = np.array([math.sqrt(1 - z * z), 0.0, z])
        probes.append(TangentSample(*SphereAtlas.project(X, [0.0, 1.0, 0.0])))
        probes.append(TangentSample(*SphereAtlas.project(X, [-z, 0.3, math.sqrt(1 - z * z)])))

    def evaluate(n):
        out = []
        for s in probes:
            f = _chart_field(density, s.chart, n, pairing)
            out.append(jets.eval_jet2(f, s.point))
        return out

    n = QUAD_START
    prev = evaluate(n)
    while n < QUAD_MAX:
        cur = evaluate(2 * n)
        change = max(max(abs(a.value - b.value), np.abs(a.gradient - b.gradient).max(),
                         np.abs(a.hessian - b.hessian).max()) / max(1.0, abs(b.value))
                     for a, b in zip(prev, cur))
        if change < tol:
            return n
        n, prev = 2 * n, cur
    raise RuntimeError(f"Crofton quadrature did not converge for {density.name} "
                       f"(last change {change:.2e} at {n} nodes per arc)")


def crofton_metric(density: DensityField, n_nodes: int | None = None,
                   pairing: str = "normal") -> MetricModel:
    """The Crofton metric of ``density`` in the two stereographic charts."""
    check_density(density)
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    n = calibrate_nodes(density, pairing=pairing) if n_nodes is None else int(n_nodes)
    fields = {c: _chart_field(density, c, n, pairing) for c in SPHERE.charts}
    cfg = {"kind": "crofton", "density": dict(density.config), "nodes": n}
    tag = ""
    if pairing != "normal":
        cfg["pairing"] = pairing
        tag = f",{pairing}"
    return MetricModel(f"crofton[{density.name}{tag}]", SPHERE, fields, reversible=True,
                       tolerance=TOL_QUADRATURE, config=cfg)


def crofton_reference(density: DensityField, X, V, frame_angle: float = 0.0,
                      epsabs: float = 1e-13, pairing: str = "normal") -> float:
    """Independent evaluation with an explicit tangent frame and adaptive quadrature.

    The frame comes from the coordinate axis least aligned with X
    (Gram-Schmidt), rotated by ``frame_angle``; the two kink angles are passed
    to the integrator as break points.
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if pairing == "normal":
        V = np.cross(X, V)
    axis = np.zeros(3)
    axis[np.argmin(np.abs(X))] = 1.0
    e1 = axis - (axis @ X) * X
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(X, e1)
    c, s = math.cos(frame_angle), math.sin(frame_angle)
    e1, e2 = c * e1 + s * e2, -s * e1 + c * e2
    a, b = V @ e1, V @ e2
    theta0 = math.atan2(b, a)

    def integrand(theta):
        eta = math.cos(theta) * e1 + math.sin(theta) * e2
        n = np.cross(X, eta)
        return float(density.values(n)) * abs(a * math.cos(theta) + b * math.sin(theta))

    start = theta0 - 0.5 * math.pi
    total = 0.0
    for lo in (start, start + math.pi):
        val, _ = integrate.quad(integrand, lo, lo + math.pi, epsabs=epsabs, epsrel=1e-13, limit=200)
        total += val
    return 0.25 * total


# -- checks from the sphere construction -----------------------------------------------


def sample_in_V(n: int, seed: int = 0, margin: float = 0.01) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random (X, unit V) with ``|X3| > 1/sqrt 2 + margin``."""
    rng = np.random.default_rng(seed)
    zmin = U_BOUND + margin
    out = []
    while len(out) < n:
        z = rng.uniform(zmin, 1.0) * rng.choice([-1.0, 1.0])
        t = rng.uniform(0, 2 * np.pi)
        r = math.sqrt(max(0.0, 1 - z * z))
        X = np.array([r * math.cos(t), r * math.sin(t), z])
        V = np.cross(X, rng.normal(size=3))
        V /= np.linalg.norm(V)
        out.append((X, V))
    return out


@dataclass
class CoincidenceReport:
    max_difference: float
    n_samples: int
    cross_product_violations: int


def coincidence_check(F_hat: MetricModel, F_check: MetricModel, n_samples: int = 200,
                      seed: int = 0, margin: float = 0.01, points=None) -> CoincidenceReport:
    """``max |F_check - F_hat|`` over tangent vectors based in V.

    Also confirms pointwise that ``x cross eta`` lies in U for sampled unit
    ``eta`` tangent at x, which is why the two metrics agree there.
    """
    points = sample_in_V(n_samples, seed, margin) if points is None else points
    rng = np.random.default_rng(seed + 1)
    worst, violations = 0.0, 0
    for X, V in points:
        X = np.asarray(X, dtype=float)
        if abs(X[2]) <= U_BOUND + margin:
            raise ValueError(f"base point {X} is not in V (margin {margin})")
        s = TangentSample(*SphereAtlas.project(X, V))
        worst = max(worst, abs(F_check.value(s) - F_hat.value(s)))
        for t in rng.uniform(0, 2 * np.pi, size=8):
            eta = math.cos(t) * np.asarray(V) + math.sin(t) * np.cross(X, V)
            eta /= np.linalg.norm(eta)
            if abs(np.cross(X, eta)[2]) > U_BOUND:
                violations += 1
    return CoincidenceReport(float(worst), len(points), violations)


def equatorial_rays(k: int = 3) -> list[TangentSample]:
    """``k`` unit-speed initial rays on the equator, pointing up at different slopes."""
    out = []
    for j in range(k):
        lon = 2 * np.pi * j / k + 0.3
        tilt = 0.4 + 0.8 * j / max(k - 1, 1)
        X = np.array([math.cos(lon), math.sin(lon), 0.0])
        east = np.array([-math.sin(lon), math.cos(lon), 0.0])
        V = math.cos(tilt) * east + math.sin(tilt) * np.array([0.0, 0.0, 1.0])
        chart, x, xi = SphereAtlas.project(X, V)
        out.append(TangentSample("N", x, xi) if chart == "N" else TangentSample(chart, x, xi))
    return out


@dataclass
class RoundEquivalenceReport:
    residual_max: float
    deviation_max: float
    n_samples: int
    deviations: list


def equivalence_to_round(F_check: MetricModel, n_samples: int = 100, seed: int = 0,
                         length: float = 1.0, tol: float = 1e-10) -> RoundEquivalenceReport:
    """Rapcsak residual of ``F_check`` against the round spray, plus great-circle deviation."""
    from .geodesic_flow import integrate_spray, unparametrized_deviation
    from .projective_equivalence import rapcsak_residual

    F_hat = sphere_round()
    res = max(float(np.linalg.norm(rapcsak_residual(F_check, F_hat, s)))
              for s in sample_tangents(F_hat, n_samples, seed))
    devs = []
    for s in equatorial_rays(3):
        speed = F_check.value(s)
        trace = integrate_spray(F_check, s, length / speed, tol, dt_out=0.005 / speed)
        ref = integrate_spray(F_hat, s, 1.2 * length / F_hat.value(s), tol,
                              dt_out=0.005 / F_hat.value(s))
        devs.append(unparametrized_deviation(trace, ref))
    return RoundEquivalenceReport(res, max(devs), n_samples, devs)


@dataclass
class NontrivialityCertificate:
    I_min: float
    I_max: float
    spread: float
    certified: bool
    n_samples: int
    I_on_V: float


def nontriviality_sweep(n_samples: int = 60, seed: int = 0):
    """Samples covering U-adjacent latitudes and V (chart points with unit directions)."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_samples):
        z = math.sin(rng.uniform(-0.5 * np.pi, 0.5 * np.pi)) if k % 3 else rng.uniform(-U_BOUND, U_BOUND)
        t = rng.uniform(0, 2 * np.pi)
        r = math.sqrt(1 - z * z)
        X = np.array([r * math.cos(t), r * math.sin(t), z])
        V = np.cross(X, rng.normal(size=3))
        out.append(TangentSample(*SphereAtlas.project(X, V / np.linalg.norm(V))))
    return out


def nontriviality_certificate(F_check: MetricModel, n_samples: int = 60, seed: int = 0,
                              tol_I: float = 1e-6) -> NontrivialityCertificate:
    """Spread of ``I = tr h(round) / tr h(F_check)`` over a sweep of the sphere."""
    from .projective_equivalence import proportionality_integral

    F_hat = sphere_round()
    samples = nontriviality_sweep(n_samples, seed)
    vals = np.array([proportionality_integral(F_hat, F_check, s) for s in samples])
    on_V = [v for v, s in zip(vals, samples) if abs(_height(s)) > U_BOUND + 0.01]
    dev_V = float(max(abs(v - 1.0) for v in on_V)) if on_V else float("nan")
    spread = float(vals.max() - vals.min())
    return NontrivialityCertificate(float(vals.min()), float(vals.max()), spread,
                                    spread > 10 * tol_I, len(samples), dev_V)


def _height(s: TangentSample) -> float:
    return float(SphereAtlas.embed(s.chart, *s.x)[2])
