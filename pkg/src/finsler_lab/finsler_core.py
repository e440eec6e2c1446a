"""Chart-based Finsler metrics and their fiber tensors.

A :class:`MetricModel` assigns to every chart of an :class:`Atlas` a scalar
field ``F(x1, x2, xi1, xi2)`` written with the operators of
:mod:`finsler_lab.jets`.  Everything else in the package (fundamental
tensor, fiber Hessian, spray coefficients) is derived from one second-order
jet of ``F`` at a :class:`TangentSample`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .expressions import Expression
from .jets import Jet2Record, ScalarField4, eval_jet2

#: relative tolerance for the identities of smooth closed-form metrics
TOL_EXACT = 1e-9
#: relative tolerance for quadrature-defined metrics
TOL_QUADRATURE = 1e-7
#: leading-minor threshold (normalised by tr g) for positive definiteness
PD_TOL = 1e-10
#: complex-step size used for third derivatives
CS_STEP = 1e-30


class NotFinslerError(ValueError):
    """Raised when a metric fails strong convexity (or admissibility) at a sample."""


class DegeneracyError(ValueError):
    """Raised when the fiber Hessian violates its rank-one structure."""


@dataclass(frozen=True, eq=False)
class TangentSample:
    chart: str
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x)
        xi = np.asarray(self.xi)
        if x.shape != (2,) or xi.shape != (2,):
            raise ValueError("x and xi must be 2-vectors")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)
        jets.check_slit(self.point)

    @property
    def point(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])

    def scaled(self, c: float) -> "TangentSample":
        return TangentSample(self.chart, self.x, c * self.xi)

    def __repr__(self):
        return f"TangentSample({self.chart!r}, x={self.x.tolist()}, xi={self.xi.tolist()})"


# -- atlases -------------------------------------------------------------------


class Atlas:
    """Chart domains and transition maps shared by several metrics."""

    kind = "abstract"
    charts: tuple[str, ...] = ()
    switch_radius = math.inf

    def contains(self, chart: str, x) -> bool:
        return chart in self.charts

    def transition(self, chart: str, x, xi):
        raise ValueError(f"{self.kind} atlas has a single chart")

    def other(self, chart: str) -> str:
        raise ValueError(f"{self.kind} atlas has a single chart")


class PlaneAtlas(Atlas):
    kind = "plane"
    charts = ("E",)


class DiskAtlas(Atlas):
    kind = "disk"
    charts = ("D",)

    def contains(self, chart, x):
        return chart == "D" and float(np.hypot(*np.real(x)[:2])) < 1.0


class SphereAtlas(Atlas):
    """Two stereographic charts: ``N`` projects from the north pole, ``S`` from the south.

    Chart ``N`` maps the southern hemisphere into the unit disk and vice versa;
    the transition in both directions is the inversion ``x -> x/|x|^2``.
    """

    kind = "sphere"
    charts = ("N", "S")
    switch_radius = 1.5
    _sign = {"N": 1.0, "S": -1.0}

    def other(self, chart):
        return "S" if chart == "N" else "N"

    def transition(self, chart, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        r2 = x @ x
        if r2 == 0.0:
            raise ValueError("chart origin is the pole of the other chart")
        y = x / r2
        eta = xi / r2 - 2.0 * x * (x @ xi) / r2 ** 2
        return self.other(chart), y, eta

    @classmethod
    def embed(cls, chart, x1, x2):
        """Inverse stereographic projection; works on jets."""
        r2 = x1 * x1 + x2 * x2
        q = 1.0 + r2
        return (2.0 * x1 / q, 2.0 * x2 / q, cls._sign[chart] * (r2 - 1.0) / q)

    @classmethod
    def embed_tangent(cls, chart, x1, x2, xi1, xi2):
        r2 = x1 * x1 + x2 * x2
        q = 1.0 + r2
        q2 = q * q
        xdot = x1 * xi1 + x2 * xi2
        return ((2.0 * xi1 * q - 4.0 * x1 * xdot) / q2,
                (2.0 * xi2 * q - 4.0 * x2 * xdot) / q2,
                cls._sign[chart] * 4.0 * xdot / q2)

    @classmethod
    def project(cls, X, V=None):
        """Chart coordinates of a sphere point (and tangent), choosing the chart with |x| <= 1."""
        X = np.asarray(X, dtype=float)
        chart = "N" if X[2] <= 0 else "S"
        s = cls._sign[chart]
        den = 1.0 - s * X[2]
        x = X[:2] / den
        if V is None:
            return chart, x
        V = np.asarray(V, dtype=float)
        xi = V[:2] / den + X[:2] * s * V[2] / den ** 2
        return chart, x, xi


PLANE = PlaneAtlas()
DISK = DiskAtlas()
SPHERE = SphereAtlas()


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricModel:
    """A Finsler metric given chart-wise by jet-compatible scalar fields."""

    name: str
    atlas: Atlas
    fields: dict
    reversible: bool = True
    tolerance: float = TOL_EXACT
    config: dict = field(default_factory=dict)
    admissible: Callable | None = None

    def __post_init__(self):
        missing = set(self.atlas.charts) - set(self.fields)
        if missing:
            raise ValueError(f"metric {self.name!r} lacks fields for charts {sorted(missing)}")

    @property
    def charts(self):
        return self.atlas.charts

    def field(self, chart: str) -> ScalarField4:
        try:
            return self.fields[chart]
        except KeyError:
            raise ValueError(f"metric {self.name!r} has no chart {chart!r}") from None

    def value(self, s: TangentSample) -> float:
        return float(np.real(jets.value_of(self.field(s.chart)(list(s.point)))))

    def jet(self, s: TangentSample) -> Jet2Record:
        self.check(s)
        return eval_jet2(self.field(s.chart), s.point)

    def check(self, s: TangentSample) -> None:
        if not self.atlas.contains(s.chart, s.x):
            raise ValueError(f"{s!r} lies outside the domain of chart {s.chart!r}")
        if self.admissible is not None:
            self.admissible(s)

    def __repr__(self):
        return f"MetricModel({self.name!r}, atlas={self.atlas.kind})"


def _coefficient(c, variables=("x1", "x2")):
    """Turn a number, expression string or callable into a function of (x1, x2)."""
    if callable(c):
        return c
    if isinstance(c, str):
        return Expression(c, variables)
    value = float(c)
    return lambda *args: value


def _norm(a, b):
    return jets.sqrt(a * a + b * b)


def euclidean() -> MetricModel:
    return MetricModel("euclidean", PLANE, {"E": lambda p: _norm(p[2], p[3])},
                       config={"kind": "euclidean"})


def scaled(c: float = 2.0) -> MetricModel:
    c = float(c)
    if c <= 0:
        raise ValueError("scale must be positive")
    return MetricModel(f"scaled({c:g})", PLANE, {"E": lambda p: c * _norm(p[2], p[3])},
                       config={"kind": "scaled", "c": c})


def expression_metric(expr: str) -> MetricModel:
    """Plane metric given by an expression in x1, x2, xi1, xi2 (not checked for homogeneity)."""
    e = Expression(expr, ("x1", "x2", "xi1", "xi2"))
    return MetricModel(f"expression({expr})", PLANE, {"E": lambda p: e(*p)},
                       reversible=False, config={"kind": "expression", "F": expr})


def randers(beta1=0.2, beta2=0.0) -> MetricModel:
    """``|xi| + beta1(x) xi1 + beta2(x) xi2``; requires ``|beta(x)| < 1`` where evaluated."""
    b1, b2 = _coefficient(beta1), _coefficient(beta2)

    def F(p):
        return _norm(p[2], p[3]) + b1(p[0], p[1]) * p[2] + b2(p[0], p[1]) * p[3]

    def admissible(s):
        nb = math.hypot(float(np.real(jets.value_of(b1(*s.x)))),
                        float(np.real(jets.value_of(b2(*s.x)))))
        if nb >= 1.0:
            raise NotFinslerError(f"Randers form has |beta| = {nb:.3g} >= 1 at x = {s.x}")

    cfg = {"kind": "randers", "beta": [_cfg_value(beta1), _cfg_value(beta2)]}
    return MetricModel("randers", PLANE, {"E": F}, reversible=False, config=cfg,
                       admissible=admissible)


def sphere_round() -> MetricModel:
    """Unit round sphere in stereographic charts, ``2|xi|/(1+|x|^2)``."""

    def F(p):
        return 2.0 * _norm(p[2], p[3]) / (1.0 + p[0] * p[0] + p[1] * p[1])

    return MetricModel("sphere_round", SPHERE, {"N": F, "S": F},
                       config={"kind": "sphere_round"})


def poincare() -> MetricModel:
    def F(p):
        return 2.0 * _norm(p[2], p[3]) / (1.0 - p[0] * p[0] - p[1] * p[1])

    return MetricModel("poincare", DISK, {"D": F}, config={"kind": "poincare"})


@dataclass(frozen=True, eq=False)
class OneForm:
    """Coefficients ``beta1(x), beta2(x)`` of a 1-form in one chart."""

    beta1: object
    beta2: object
    chart: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "_b1", _coefficient(self.beta1))
        object.__setattr__(self, "_b2", _coefficient(self.beta2))

    def coefficients(self, x1, x2):
        return self._b1(x1, x2), self._b2(x1, x2)

    def pairing(self, p):
        b1, b2 = self.coefficients(p[0], p[1])
        return b1 * p[2] + b2 * p[3]

    def exterior_derivative(self, x) -> float:
        """``d1 beta2 - d2 beta1`` at chart point ``x`` (via jets)."""
        rec1 = eval_jet2(lambda p: self.coefficients(p[0], p[1])[0], [x[0], x[1], 1.0, 0.0])
        rec2 = eval_jet2(lambda p: self.coefficients(p[0], p[1])[1], [x[0], x[1], 1.0, 0.0])
        return float(rec2.gradient[0] - rec1.gradient[1])

    def config(self):
        return [_cfg_value(self.beta1), _cfg_value(self.beta2)]


def _cfg_value(c):
    if isinstance(c, (int, float, str)):
        return c
    if isinstance(c, Expression):
        return c.source
    return repr(c)


def one_form_sum(base: MetricModel, beta: OneForm, lam: float = 1.0) -> MetricModel:
    """``lam * base + beta``.

    ``beta`` is given in the chart ``beta.chart`` (default: the first chart of the
    base atlas) and carried to the other chart of a sphere atlas through the
    transition map.
    """
    lam = float(lam)
    home = beta.chart or base.charts[0]
    fields = {}
    for chart in base.charts:
        bf = base.field(chart)
        if chart == home:
            fields[chart] = (lambda bf: lambda p: lam * bf(p) + beta.pairing(p))(bf)
        else:
            fields[chart] = (lambda bf: lambda p: lam * bf(p) + beta.pairing(_inversion(p)))(bf)
    cfg = {"kind": "one_form_sum", "base": base.config, "lam": lam, "beta": beta.config(),
           "chart": home}

    def admissible(s):
        if base.admissible is not None:
            base.admissible(s)

    name = f"{'' if lam == 1.0 else f'{lam:g}*'}{base.name}+beta"
    return MetricModel(name, base.atlas, fields, reversible=False, tolerance=base.tolerance,
                       config=cfg, admissible=admissible)


def _inversion(p):
    """Push a chart point/vector through x -> x/|x|^2 (jet-compatible)."""
    x1, x2, v1, v2 = p
    r2 = x1 * x1 + x2 * x2
    xv = x1 * v1 + x2 * v2
    r4 = r2 * r2
    return [x1 / r2, x2 / r2, v1 / r2 - 2.0 * x1 * xv / r4, v2 / r2 - 2.0 * x2 * xv / r4]


def linear_pullback(F: MetricModel, A, chart: str | None = None) -> MetricModel:
    """Express ``F`` in the coordinates ``xbar = A x`` of one chart."""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or abs(np.linalg.det(A)) < 1e-14:
        raise ValueError("chart change must be an invertible 2x2 matrix")
    Ainv = np.linalg.inv(A)
    chart = chart or F.charts[0]
    f = F.field(chart)

    def pulled(p):
        y1 = Ainv[0, 0] * p[0] + Ainv[0, 1] * p[1]
        y2 = Ainv[1, 0] * p[0] + Ainv[1, 1] * p[1]
        v1 = Ainv[0, 0] * p[2] + Ainv[0, 1] * p[3]
        v2 = Ainv[1, 0] * p[2] + Ainv[1, 1] * p[3]
        return f([y1, y2, v1, v2])

    return MetricModel(f"{F.name}@A", PLANE, {"E": pulled}, reversible=F.reversible,
                       tolerance=F.tolerance, config={"kind": "pullback"})


# -- tensors -------------------------------------------------------------------


@dataclass(frozen=True)
class FiberHessian:
    h: np.ndarray
    trace: float


@dataclass(frozen=True)
class SprayCoefficients:
    G: np.ndarray
    jacobian: np.ndarray | None = None


def rank_one_template(xi) -> np.ndarray:
    """The matrix ``[[xi2^2, -xi1 xi2], [-xi1 xi2, xi1^2]] / |xi|^2``."""
    a, b = xi
    return np.array([[b * b, -a * b], [-a * b, a * a]]) / (a * a + b * b)


def _tensors(rec: Jet2Record, xi):
    F = rec.value
    dxi = rec.grad_xi
    h = rec.hess_xixi
    g = F * h + np.outer(dxi, dxi)
    return F, dxi, h, g


def _check_pd(g, where) -> None:
    tr = np.real(g[0, 0] + g[1, 1])
    if not (tr > 0 and np.real(g[0, 0]) / tr > PD_TOL and np.real(g[1, 1]) / tr > PD_TOL
            and np.real(np.linalg.det(g)) / tr ** 2 > PD_TOL):
        raise NotFinslerError(f"fundamental tensor not positive definite at {where}: {np.real(g)}")


def fundamental_tensor(F: MetricModel, s: TangentSample) -> np.ndarray:
    """``g_ij = 1/2 d^2(F^2)/dxi^i dxi^j``."""
    rec = F.jet(s)
    _, _, _, g = _tensors(rec, s.xi)
    _check_pd(g, s)
    return g


def fiber_hessian(F: MetricModel, s: TangentSample, check: bool = True) -> FiberHessian:
    """``h_ij = F_{xi^i xi^j}`` with its structural identities verified."""
    rec = F.jet(s)
    Fv, dxi, h, g = _tensors(rec, s.xi)
    tr = float(h[0, 0] + h[1, 1])
    if check:
        tol = F.tolerance
        scale = float(np.abs(h).max())
        # tr h * |xi| is scale free
        if scale == 0.0 or abs(tr) * float(np.linalg.norm(s.xi)) < 1e-12:
            raise DegeneracyError(f"fiber Hessian vanishes at {s}")
        if np.abs(h @ s.xi).max() > tol * scale * np.linalg.norm(s.xi):
            raise DegeneracyError(f"h.xi != 0 at {s}: {h @ s.xi}")
        if np.abs(h - tr * rank_one_template(s.xi)).max() > tol * scale:
            raise DegeneracyError(f"fiber Hessian is not of rank-one form at {s}")
        # g is assembled as F h + dF dF; compare with the Hessian of F^2/2 directly
        g_direct = _half_square_hessian(F, s)
        if np.abs(g - g_direct).max() > tol * np.abs(g_direct).max():
            raise DegeneracyError(f"g != F h + dF dF at {s}")
    return FiberHessian(h, tr)


def _half_square_hessian(F: MetricModel, s: TangentSample) -> np.ndarray:
    f = F.field(s.chart)
    rec = eval_jet2(lambda p: 0.5 * f(p) * f(p), s.point)
    return rec.hess_xixi


def _spray_from_jet(rec: Jet2Record, xi) -> np.ndarray:
    Fv, dxi, h, g = _tensors(rec, xi)
    L_x = Fv * rec.grad_x
    # L_{xi^i x^k} = F_{xi^i} F_{x^k} + F F_{xi^i x^k}
    L_xix = np.outer(dxi, rec.grad_x) + Fv * rec.hess_xix
    rhs = L_xix @ xi - L_x
    return np.linalg.solve(2.0 * g, rhs)


def spray_coefficients(F: MetricModel, s: TangentSample, jacobian: bool = False) -> SprayCoefficients:
    """Coefficients ``G^i`` of the spray ``S = xi^i d/dx^i - 2 G^i d/dxi^i``.

    With ``jacobian=True`` also returns ``G^i_j = dG^i/dxi^j``, obtained by a
    complex step through the whole jet pipeline (exact to roundoff).
    """
    rec = F.jet(s)
    _, _, _, g = _tensors(rec, s.xi)
    _check_pd(g, s)
    G = np.real(_spray_from_jet(rec, s.xi))
    J = None
    if jacobian:
        J = np.empty((2, 2))
        f = F.field(s.chart)
        for j in range(2):
            p = s.point.astype(complex)
            p[2 + j] += 1j * CS_STEP
            Gc = _spray_from_jet(eval_jet2(f, p), p[2:])
            J[:, j] = np.imag(Gc) / CS_STEP
    return SprayCoefficients(G, J)


def spray_derivative(F: MetricModel, s: TangentSample, quantity: Callable, G=None):
    """Derivative of ``quantity(jet_record)`` along the spray ``S`` of ``F`` at ``s``.

    ``quantity`` maps a :class:`Jet2Record` of ``F`` (or of another metric when
    evaluated by the caller) to an array; the complex step is taken in the
    direction ``(xi, -2G)``.
    """
    if G is None:
        G = spray_coefficients(F, s).G
    direction = np.concatenate([s.xi, -2.0 * G])
    p = s.point.astype(complex) + 1j * CS_STEP * direction
    return np.imag(quantity(eval_jet2(F.field(s.chart), p))) / CS_STEP


# -- sampling and audits -----------------------------------------------------------


DEFAULT_BOX = {"plane": (-1.0, 1.0), "disk": (-0.6, 0.6), "sphere": (-1.0, 1.0)}


def sample_tangents(F: MetricModel, n: int, seed: int = 0, box=None) -> list[TangentSample]:
    """Random admissible samples with unit chart-length directions.

    Sphere atlases are sampled uniformly on the sphere (chart with ``|x| <= 1``)
    unless a chart box is given; otherwise the base point is uniform in the box.
    """
    rng = np.random.default_rng(seed)
    out = []
    kind = F.atlas.kind
    for _ in range(n):
        phi = rng.uniform(0.0, 2.0 * np.pi)
        xi = np.array([np.cos(phi), np.sin(phi)])
        if kind == "sphere" and box is None:
            X = rng.normal(size=3)
            X /= np.linalg.norm(X)
            chart, x = SphereAtlas.project(X)
        else:
            lo, hi = box if box is not None else DEFAULT_BOX.get(kind, (-1.0, 1.0))
            x = rng.uniform(lo, hi, size=2)
            chart = F.charts[0]
        out.append(TangentSample(chart, x, xi))
    return out


@dataclass
class AuditReport:
    metric: str
    n_samples: int
    violations: dict
    tolerance: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self):
        return {"metric": self.metric, "n_samples": self.n_samples,
                "violations": {k: float(v) for k, v in self.violations.items()},
                "tolerance": self.tolerance, "failures": list(self.failures),
                "passed": self.passed}


def homogeneity_audit(F: MetricModel, n_samples: int = 100, seed: int = 0,
                      tol: float | None = None) -> AuditReport:
    """Maximal relative violations of the homogeneity degrees of F, g, h and G."""
    tol = F.tolerance if tol is None else tol
    rng = np.random.default_rng(seed + 1)
    worst = dict.fromkeys(("F", "g", "h", "G"), 0.0)
    for s in sample_tangents(F, n_samples, seed):
        c = rng.uniform(0.1, 10.0)
        sc = s.scaled(c)
        r1, rc = F.jet(s), F.jet(sc)
        F1, _, h1, g1 = _tensors(r1, s.xi)
        Fc, _, hc, gc = _tensors(rc, sc.xi)
        worst["F"] = max(worst["F"], abs(Fc - c * F1) / abs(c * F1))
        worst["g"] = max(worst["g"], np.abs(gc - g1).max() / np.abs(g1).max())
        worst["h"] = max(worst["h"], np.abs(c * hc - h1).max() / max(np.abs(h1).max(), 1e-300))
        try:
            G1, Gc = _spray_from_jet(r1, s.xi), _spray_from_jet(rc, sc.xi)
            den = c * c * (np.abs(G1).max() + float(s.xi @ s.xi))
            worst["G"] = max(worst["G"], float(np.abs(Gc - c * c * G1).max() / den))
        except np.linalg.LinAlgError:
            worst["G"] = math.inf
    failures = [k for k, v in worst.items() if not v <= tol]
    return AuditReport(F.name, n_samples, worst, tol, failures)


def structure_audit(F: MetricModel, samples: Sequence[TangentSample]) -> dict:
    """Maximal violations of the fiber identities over ``samples``.

    Keys: ``homogeneity`` (F(cxi) = cF), ``euler`` (xi.dF = F), ``degeneracy``
    (h.xi = 0), ``rank_one`` (h = tr h * template), ``g_split`` (g = F h + dF dF),
    ``det`` (det h / (tr h)^2).  All are relative.
    """
    worst = dict.fromkeys(("homogeneity", "euler", "degeneracy", "rank_one", "g_split", "det"), 0.0)
    for k, s in enumerate(samples):
        rec = F.jet(s)
        Fv, dxi, h, g = _tensors(rec, s.xi)
        c = 0.5 + (k % 7)
        worst["homogeneity"] = max(worst["homogeneity"], abs(F.value(s.scaled(c)) - c * Fv) / (c * Fv))
        worst["euler"] = max(worst["euler"], abs(dxi @ s.xi - Fv) / abs(Fv))
        scale = np.abs(h).max()
        nxi = np.linalg.norm(s.xi)
        tr = h[0, 0] + h[1, 1]
        worst["degeneracy"] = max(worst["degeneracy"], np.abs(h @ s.xi).max() / (scale * nxi))
        worst["rank_one"] = max(worst["rank_one"],
                                np.abs(h - tr * rank_one_template(s.xi)).max() / scale)
        g_direct = _half_square_hessian(F, s)
        worst["g_split"] = max(worst["g_split"], np.abs(g - g_direct).max() / np.abs(g_direct).max())
        worst["det"] = max(worst["det"], abs(np.linalg.det(h)) / tr ** 2)
    return {k: float(v) for k, v in worst.items()}
