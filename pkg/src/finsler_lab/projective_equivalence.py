"""Projective equivalence of Finsler metrics on surfaces.

Two metrics are projectively equivalent when they share their oriented,
unparametrized geodesics.  The first-order test used here is the Rapcsak
system ``Fc_{x^i} - Fc_{xi^i x^j} xi^j + 2 G^j Fc_{xi^i xi^j} = 0`` with
``G`` the spray of the other metric.  For an equivalent pair the ratio of
fiber-Hessian traces ``I = tr h_hat / tr h_check`` is a first integral of
both geodesic flows.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .finsler_core import (MetricModel, OneForm, SprayCoefficients, TangentSample, fundamental_tensor,
                           linear_pullback, one_form_sum, sample_tangents, spray_coefficients,
                           spray_derivative)
from .geodesic_flow import GeodesicTrace, integrate_spray
from .jets import eval_jet2

TRACE_THRESHOLD = 1e-12
TOL_RESIDUAL = 1e-9
TOL_I = 1e-6
TOL_LINEAR = 1e-8


class NonTrivialPairError(ValueError):
    """The proportionality integral is not constant over the samples."""


class TraceTooShortError(ValueError):
    pass


def _spray_of(source, s: TangentSample) -> np.ndarray:
    if isinstance(source, SprayCoefficients):
        return np.asarray(source.G)
    if isinstance(source, MetricModel):
        if s.chart not in source.charts:
            raise ValueError(f"chart mismatch: {source.name} has no chart {s.chart!r}")
        return spray_coefficients(source, s).G
    return np.asarray(source, dtype=float)


def rapcsak_residual(F_check: MetricModel, spray_source, s: TangentSample) -> np.ndarray:
    """Left-hand side of the Rapcsak system for ``F_check`` and a foreign spray.

    ``spray_source`` is a metric (its spray is computed at ``s``), a
    :class:`SprayCoefficients` or a bare 2-vector ``G``.
    """
    if s.chart not in F_check.charts:
        raise ValueError(f"chart mismatch: {F_check.name} has no chart {s.chart!r}")
    G = _spray_of(spray_source, s)
    rec = F_check.jet(s)
    return rec.grad_x - rec.hess_xix @ s.xi + 2.0 * rec.hess_xixi @ G


def proportionality_integral(F_hat: MetricModel, F_check: MetricModel, s: TangentSample) -> float:
    """``I = tr h_hat / tr h_check`` at ``s``."""
    th = _trace_h(F_hat, s)
    tc = _trace_h(F_check, s)
    # tr h is (-1)-homogeneous; normalise the threshold by |xi|
    if abs(tc) * float(np.linalg.norm(s.xi)) < TRACE_THRESHOLD:
        raise ValueError(f"tr h of {F_check.name} vanishes at {s}")
    return th / tc


def _trace_h(F: MetricModel, s: TangentSample) -> float:
    h = F.jet(s).hess_xixi
    return float(h[0, 0] + h[1, 1])


# -- closed one-forms --------------------------------------------------------------


@dataclass
class ClosedFormReport:
    metric: str
    n_samples: int
    residual_max: float
    residual_min: float
    d_beta_max: float
    prediction_error: float
    agreement: float
    closed: bool

    def to_dict(self):
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items()}


def closed_one_form_test(F: MetricModel, beta: OneForm, n_samples: int = 100, seed: int = 0,
                         tol: float = TOL_RESIDUAL) -> ClosedFormReport:
    """Compare the Rapcsak residual of ``F + beta`` against ``d beta``.

    The residual is predicted independently as ``d beta * (xi2, -xi1)``.
    ``agreement`` is the fraction of samples where "residual vanishes" and
    "d beta vanishes" coincide at level ``tol``.
    """
    Fb = one_form_sum(F, beta)
    res_norms, dbs, pred_err = [], [], 0.0
    agree = 0
    for s in sample_tangents(F, n_samples, seed):
        fundamental_tensor(Fb, s)  # raises NotFinslerError if F + beta is not convex
        r = rapcsak_residual(Fb, F, s)
        db = beta.exterior_derivative(s.x) if s.chart == (beta.chart or F.charts[0]) else None
        if db is None:
            continue
        pred = db * np.array([s.xi[1], -s.xi[0]])
        pred_err = max(pred_err, float(np.abs(r - pred).max()))
        rn = float(np.linalg.norm(r))
        res_norms.append(rn)
        dbs.append(abs(db))
        agree += (rn <= tol) == (abs(db) <= tol)
    n = len(res_norms)
    if n == 0:
        raise ValueError("no samples in the chart carrying beta")
    return ClosedFormReport(F.name, n, max(res_norms), min(res_norms), max(dbs), pred_err,
                            agree / n, max(dbs) <= tol)


# -- conservation of I -------------------------------------------------------------


def _I_along(F_hat, F_check, trace: GeodesicTrace) -> np.ndarray:
    return np.array([proportionality_integral(F_hat, F_check, s) for s in trace.samples()])


def conservation_check(F_hat: MetricModel, F_check: MetricModel, init: TangentSample, T: float,
                       tol: float = 1e-10, dt_out: float = 0.05, both: bool = True) -> float:
    """Relative drift of ``I`` along the geodesic of ``F_hat`` (and of ``F_check``) from ``init``."""
    r = float(np.linalg.norm(rapcsak_residual(F_check, F_hat, init)))
    if r > 1e-6:
        warnings.warn(f"pair fails the Rapcsak test at the initial sample (residual {r:.2e})",
                      stacklevel=2)
    drifts = []
    for F in ((F_hat, F_check) if both else (F_hat,)):
        trace = integrate_spray(F, init, T / F.value(init), tol, dt_out=dt_out)
        vals = _I_along(F_hat, F_check, trace)
        drifts.append(float(np.max(np.abs(vals - vals[0])) / abs(vals[0])))
    return max(drifts)


# -- transport of tr h -------------------------------------------------------------


def transport_coefficient(G_jac: np.ndarray, xi) -> float:
    """``c = 2 [G^1_1 xi2^2 - (G^1_2 + G^2_1) xi1 xi2 + G^2_2 xi1^2] / |xi|^2``."""
    a, b = xi
    J = G_jac
    return 2.0 * (J[0, 0] * b * b - (J[0, 1] + J[1, 0]) * a * b + J[1, 1] * a * a) / (a * a + b * b)


@dataclass
class TransportReport:
    residual: float
    pointwise: float
    n_points: int

    def to_dict(self):
        return dict(self.__dict__)


_FD5 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def trace_transport_residual(F: MetricModel, trace: GeodesicTrace, pointwise: bool = True) -> TransportReport:
    """Check ``S(tr h) = c tr h`` along a geodesic of ``F``.

    ``residual``: max ``|d/dt tr h - c tr h| / max |tr h|``, with ``d/dt`` from
    5-point central differences on uniformly spaced runs inside one chart.
    ``pointwise``: max over samples and ``i`` of ``|S(h_ii) - 2 G^l_i h_il|``
    relative to ``|G^.| |h|``, with ``S`` applied by a complex step.
    """
    if len(trace) < 5:
        raise TraceTooShortError("need at least 5 samples for differencing")
    tr = np.empty(len(trace))
    c = np.empty(len(trace))
    pw = 0.0
    for k, s in enumerate(trace.samples()):
        sc = spray_coefficients(F, s, jacobian=True)
        h = F.jet(s).hess_xixi
        tr[k] = h[0, 0] + h[1, 1]
        c[k] = transport_coefficient(sc.jacobian, s.xi)
        if pointwise:
            Sh = spray_derivative(F, s, lambda rec: np.diag(rec.hess_xixi), G=sc.G)
            pred = 2.0 * np.einsum("li,il->i", sc.jacobian, h)
            scale = np.abs(sc.jacobian).max() * np.abs(h).max() + np.abs(h).max() * np.linalg.norm(s.xi)
            pw = max(pw, float(np.abs(Sh - pred).max() / scale))
    worst = 0.0
    n_used = 0
    for seg in trace.segments():
        idx = np.fromiter(seg, int)
        t = trace.t[idx]
        for m in range(2, len(idx) - 2):
            w = t[m - 2:m + 3]
            dt = np.diff(w)
            if np.abs(dt - dt[0]).max() > 1e-9 * dt[0]:
                continue
            d = _FD5 @ tr[idx[m - 2:m + 3]] / dt[0]
            worst = max(worst, abs(d - c[idx[m]] * tr[idx[m]]))
            n_used += 1
    if n_used == 0:
        raise TraceTooShortError("no uniformly spaced 5-point windows in the trace")
    return TransportReport(float(worst / np.abs(tr).max()), pw, n_used)


# -- coordinate invariance ---------------------------------------------------------


def coordinate_invariance_check(F_hat: MetricModel, F_check: MetricModel, s: TangentSample, A) -> float:
    """``|I(As) - I(s)|`` where ``I(As)`` uses both metrics pulled back by ``x -> Ax``."""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or abs(np.linalg.det(A)) < 1e-14:
        raise ValueError("A must be an invertible 2x2 matrix")
    I0 = proportionality_integral(F_hat, F_check, s)
    Ph = linear_pullback(F_hat, A, s.chart)
    Pc = linear_pullback(F_check, A, s.chart)
    s_bar = TangentSample("E", A @ s.x, A @ s.xi)
    return abs(proportionality_integral(Ph, Pc, s_bar) - I0)


# -- reconstruction ----------------------------------------------------------------


@dataclass
class OneFormReconstruction:
    lam: float
    points: np.ndarray          # sample base points, (n, 2)
    beta: np.ndarray            # beta_i(x) at those points, (n, 2)
    closedness_defect: float
    chart: str
    I_spread: float

    def to_dict(self):
        return {"lambda": self.lam, "closedness_defect": self.closedness_defect,
                "chart": self.chart, "I_spread": self.I_spread,
                "points": self.points.tolist(), "beta": self.beta.tolist()}


def reconstruct_one_form(F_hat: MetricModel, F_check: MetricModel, n_samples: int = 50,
                         tol_I: float = TOL_I, seed: int = 0, box=None) -> OneFormReconstruction:
    """Write ``F_hat = lam F_check + beta`` when ``I`` is constant.

    Raises :class:`NonTrivialPairError` if ``I`` varies by more than ``tol_I``,
    and ``ValueError`` if ``F_hat - lam F_check`` is not linear on the fibers.
    """
    samples = sample_tangents(F_check, n_samples, seed, box=box)
    chart = samples[0].chart
    samples = [s for s in samples if s.chart == chart]
    I = np.array([proportionality_integral(F_hat, F_check, s) for s in samples])
    spread = float(I.max() - I.min())
    if spread > tol_I:
        raise NonTrivialPairError(f"non-trivial pair: I ranges over [{I.min():.6g}, {I.max():.6g}]")
    lam = float(I.mean())
    fh, fc = F_hat.field(chart), F_check.field(chart)
    pts, coeffs, defect = [], [], 0.0
    for s in samples:
        hh, hc = F_hat.jet(s).hess_xixi, F_check.jet(s).hess_xixi
        if np.abs(hh - lam * hc).max() > TOL_LINEAR * max(1.0, np.abs(hh).max()):
            raise ValueError(f"F_hat - lam F_check is not fiberwise linear at {s}")
        grads = []
        b = []
        for e in ((1.0, 0.0), (0.0, 1.0)):
            def beta_e(p, e=e):
                q = [p[0], p[1], e[0], e[1]]
                return fh(q) - lam * fc(q)
            rec = eval_jet2(beta_e, np.array([s.x[0], s.x[1], 1.0, 0.0]))
            b.append(rec.value)
            grads.append(rec.grad_x)
        defect = max(defect, abs(float(grads[1][0] - grads[0][1])))
        pts.append(s.x)
        coeffs.append(b)
    return OneFormReconstruction(lam, np.array(pts), np.array(coeffs), defect, chart, spread)


# -- combined report ---------------------------------------------------------------


@dataclass
class EquivalenceReport:
    residual_max: float
    I_min: float
    I_max: float
    I_mean: float
    drift: float | None
    verdicts: dict
    sample_count: int
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"residual_max": self.residual_max, "I_min": self.I_min, "I_max": self.I_max,
                "I_mean": self.I_mean, "drift": self.drift, "verdicts": dict(self.verdicts),
                "sample_count": self.sample_count, "seed": self.seed, **self.extra}


def equivalence_report(F_hat: MetricModel, F_check: MetricModel, n_samples: int = 100, seed: int = 0,
                       n_geodesics: int = 0, T: float = 10.0, tol: float = 1e-10,
                       tol_residual: float | None = None, tol_I: float = TOL_I) -> EquivalenceReport:
    """Rapcsak residual, ``I`` statistics and (optionally) drift of ``I`` along geodesics."""
    if tol_residual is None:
        tol_residual = max(F_hat.tolerance, F_check.tolerance) * 10
    samples = sample_tangents(F_check, n_samples, seed)
    res = max(float(np.linalg.norm(rapcsak_residual(F_check, F_hat, s))) for s in samples)
    I = np.array([proportionality_integral(F_hat, F_check, s) for s in samples])
    drift = 0.0
    for s in samples[:n_geodesics]:
        drift = max(drift, conservation_check(F_hat, F_check, s, T, tol))
    equivalent = res <= tol_residual
    constant = float(I.max() - I.min()) <= tol_I
    closed = None
    trivially = False
    if equivalent and constant:
        try:
            rec = reconstruct_one_form(F_hat, F_check, min(n_samples, 30), tol_I, seed)
            closed = rec.closedness_defect <= 1e-9
            trivially = bool(closed)
        except ValueError:
            closed = False
    verdicts = {"equivalent": bool(equivalent), "trivially_related": bool(trivially and equivalent),
                "beta_closed": closed, "I_constant": bool(constant)}
    return EquivalenceReport(res, float(I.min()), float(I.max()), float(I.mean()),
                             drift if n_geodesics else None, verdicts, n_samples, seed)
