"""Growth rates: Cayley balls, topological entropy, hyperbolic area.

Group elements are words over the integers: ``k`` stands for the k-th
generator and ``-k`` for its inverse (generators are numbered from 1).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

Word = tuple


# -- groups ------------------------------------------------------------------------


def free_reduce(w: Sequence[int]) -> Word:
    out: list[int] = []
    for a in w:
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def inverse(w: Sequence[int]) -> Word:
    return tuple(-a for a in reversed(w))


def _rotations(r: Word):
    return [r[k:] + r[:k] for k in range(len(r))]


class DehnReducer:
    """Dehn's algorithm for a symmetrized set of relators.

    Any subword that is more than half of a cyclic rotation of a relator (or
    of its inverse) is replaced by the inverse of the remaining part, followed
    by free reduction, until nothing applies.  For presentations satisfying
    C'(1/6) a word is trivial exactly when this reaches the empty word.
    """

    def __init__(self, relators: Sequence[Word]):
        rules: dict[Word, Word] = {}
        for r in relators:
            r = free_reduce(r)
            for rot in _rotations(r) + _rotations(inverse(r)):
                n = len(rot)
                for L in range(n // 2 + 1, n + 1):
                    lhs, rest = rot[:L], rot[L:]
                    rhs = inverse(rest)
                    if lhs not in rules or len(rhs) < len(rules[lhs]):
                        rules[lhs] = rhs
        self.rules = rules
        self.lengths = sorted({len(k) for k in rules}, reverse=True)

    def reduce(self, w: Sequence[int]) -> Word:
        w = free_reduce(w)
        changed = True
        while changed:
            changed = False
            for L in self.lengths:
                for i in range(len(w) - L + 1):
                    rhs = self.rules.get(w[i:i + L])
                    if rhs is not None:
                        w = free_reduce(w[:i] + rhs + w[i + L:])
                        changed = True
                        break
                if changed:
                    break
        return w


@dataclass(frozen=True, eq=False)
class GroupPresentation:
    """Finitely presented group with a word-equality procedure.

    ``representation`` (optional) maps a generator index to a matrix of a
    faithful linear representation.  It is only used to bucket candidate
    elements during enumeration; equality inside a bucket is always decided
    by the reducer.
    """

    name: str
    n_generators: int
    relators: tuple = ()
    representation: dict | None = None

    def __post_init__(self):
        for r in self.relators:
            if any(a == 0 or abs(a) > self.n_generators for a in r):
                raise ValueError(f"relator {r} uses unknown generators")
        object.__setattr__(self, "_dehn", DehnReducer(self.relators) if self.relators else None)

    @property
    def generators(self) -> list[int]:
        """Symmetric generating set ``S = S^{-1}``."""
        return [g for k in range(1, self.n_generators + 1) for g in (k, -k)]

    def reduce(self, w) -> Word:
        return self._dehn.reduce(w) if self._dehn else free_reduce(w)

    def is_identity(self, w) -> bool:
        return len(self.reduce(w)) == 0

    def equal(self, u, v) -> bool:
        return self.is_identity(tuple(u) + inverse(v))

    def matrix(self, w) -> np.ndarray:
        M = np.eye(2, dtype=complex)
        for a in w:
            M = M @ self.representation[a]
        return M

    def config(self):
        return {"name": self.name, "generators": self.n_generators,
                "relators": [list(r) for r in self.relators]}


def free_group(rank: int = 2) -> GroupPresentation:
    return GroupPresentation(f"free({rank})", rank)


def trivial_group(rank: int = 2) -> GroupPresentation:
    return GroupPresentation(f"trivial({rank})", rank, tuple((k,) for k in range(1, rank + 1)))


def _su11_rotation(a):
    return np.array([[complex(math.cos(a / 2), math.sin(a / 2)), 0],
                     [0, complex(math.cos(a / 2), -math.sin(a / 2))]])


def _su11_translation(t):
    c, s = math.cosh(t / 2), math.sinh(t / 2)
    return np.array([[c, s], [s, c]], dtype=complex)


def _octagon_pairing(j: int, k: int) -> np.ndarray:
    """Isometry of the disk taking side j of the regular octagon with angles pi/4 onto side k."""
    r_in = math.acosh(1.0 + math.sqrt(2.0))   # inradius: cosh r = cot(pi/8)
    th = math.pi / 4
    return _su11_rotation(k * th - math.pi) @ _su11_translation(-2.0 * r_in) @ _su11_rotation(-j * th)


def surface_group(genus: int = 2) -> GroupPresentation:
    """``<a1, b1, ..., ag, bg | [a1, b1] ... [ag, bg]>`` (a_i = 2i-1, b_i = 2i).

    For genus 2 a faithful representation by side pairings of the regular
    octagon in the Poincare disk is attached (checked: the relator maps to
    ``+-I``).
    """
    if genus < 1:
        raise ValueError("genus must be positive")
    rel = []
    for i in range(genus):
        a, b = 2 * i + 1, 2 * i + 2
        rel += [a, b, -a, -b]
    rep = None
    if genus == 2:
        inv = np.linalg.inv
        g = {1: inv(_octagon_pairing(0, 2)), 2: _octagon_pairing(1, 3),
             3: inv(_octagon_pairing(4, 6)), 4: _octagon_pairing(5, 7)}
        rep = {**g, **{-k: inv(m) for k, m in g.items()}}
    return GroupPresentation(f"surface({genus})", 2 * genus, (tuple(rel),), rep)


@dataclass
class BallSizes:
    group: str
    sizes: list
    rate: float
    complete: bool
    n_max: int

    def to_dict(self):
        return dict(self.__dict__)


def _matrix_keys(M: np.ndarray, res: float = 1e-3):
    """Bucket keys of a projective matrix; two keys when a coordinate is near a cell boundary."""
    v = M.ravel()
    # PSL: fix the sign by the first entry of non-negligible size
    k = int(np.argmax(np.abs(v) > 1e-6))
    if (v[k].real if abs(v[k].real) > 1e-9 else v[k].imag) < 0:
        v = -v
    coords = np.concatenate([v.real, v.imag]) / res
    base = np.floor(coords)
    frac = coords - base
    options = []
    for b, f in zip(base, frac):
        opts = [b]
        if f < 1e-4:
            opts.append(b - 1)
        elif f > 1 - 1e-4:
            opts.append(b + 1)
        options.append(opts)
    return [tuple(int(x) for x in combo) for combo in itertools.product(*options)], tuple(int(b) for b in base)


def group_ball_sizes(G: GroupPresentation, n_max: int, max_elements: int = 500_000,
                     use_representation: bool = True) -> BallSizes:
    """``#B_n`` for ``n = 0..n_max`` by breadth-first enumeration.

    Without a representation the reduced word is the deduplication key (exact
    for free groups and for presentations where Dehn reduction yields normal
    forms).  Stops early, reporting the partial list, once the ball holds
    ``max_elements`` elements.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    use_rep = use_representation and G.representation is not None
    buckets: dict = {}
    seen: set = set()

    def add(w) -> bool:
        if not use_rep:
            if w in seen:
                return False
            seen.add(w)
            return True
        keys, home = _matrix_keys(G.matrix(w))
        for key in keys:
            for other in buckets.get(key, ()):
                if G.equal(w, other):
                    return False
        buckets.setdefault(home, []).append(w)
        return True

    identity = ()
    add(identity)
    sphere = [identity]
    sizes = [1]
    total = 1
    complete = True
    for n in range(1, n_max + 1):
        new = []
        for w in sphere:
            for s in G.generators:
                if w and w[-1] == -s:
                    continue
                cand = G.reduce(w + (s,))
                if len(cand) < n and not use_rep:
                    continue  # shorter words were enumerated already
                if add(cand):
                    new.append(cand)
                    total += 1
            if total > max_elements:
                break
        if total > max_elements:
            complete = False
            break
        sizes.append(total)
        sphere = new
    return BallSizes(G.name, sizes, growth_rate(sizes), complete, n_max)


def growth_rate(sizes: Sequence[int]) -> float:
    """Least-squares slope of ``log #B_n`` against ``n`` over the upper half of ``n``."""
    n = np.arange(len(sizes))
    if len(sizes) < 2:
        return 0.0
    lo = len(sizes) // 2
    if len(sizes) - lo < 2:
        lo = len(sizes) - 2
    return float(np.polyfit(n[lo:], np.log(np.asarray(sizes[lo:], float)), 1)[0])


# -- flows and separated sets ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FlowSampler:
    """A flow on a compact space with a sampler and a symmetric distance.

    ``flow(states, t)`` acts on arrays of shape ``(n, dim)``.  The distance
    is ``metric(embed(a), embed(b))``, where ``embed`` maps states to features
    (identity by default) and ``metric`` broadcasts over leading axes and
    reduces the last one; orbits are cached as features.  ``speed_bound``
    bounds ``d(S^t x, S^{t+h} x) / h``.
    """

    name: str
    dim: int
    sample: Callable
    flow: Callable
    metric: Callable
    speed_bound: float
    embed: Callable | None = None
    config: dict = field(default_factory=dict)

    def features(self, states):
        return self.embed(states) if self.embed is not None else np.asarray(states, dtype=float)

    def distance(self, a, b):
        return self.metric(self.features(np.asarray(a, float)), self.features(np.asarray(b, float)))

    def candidates(self, n: int, seed: int = 0) -> np.ndarray:
        return np.asarray(self.sample(np.random.default_rng(seed), n), dtype=float)


def _circ(u):
    """Distance to the nearest integer."""
    return np.abs(u - np.round(u))


def _euclid(a, b):
    return np.sqrt(((a - b) ** 2).sum(axis=-1))


def stratified_unit_cube(rng, n: int, dim: int) -> np.ndarray:
    """One uniform point in each cell of a ``k^dim`` grid (``k^dim <= n``), in seeded random order."""
    k = max(1, int(math.floor(n ** (1.0 / dim) + 1e-9)))
    cells = np.stack(np.meshgrid(*[np.arange(k)] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    pts = (cells + rng.uniform(0.0, 1.0, cells.shape)) / k
    return pts[rng.permutation(len(pts))]


def rotation_flow(omega: float = 1.0) -> FlowSampler:
    """Rigid rotation of the unit disk (an isometric flow)."""
    omega = float(omega)

    def sample(rng, n):
        r = np.sqrt(rng.uniform(0.0, 1.0, n))
        a = rng.uniform(0.0, 2.0 * math.pi, n)
        return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)

    def flow(states, t):
        c, s = math.cos(omega * t), math.sin(omega * t)
        return states @ np.array([[c, s], [-s, c]])

    return FlowSampler("rotation", 2, sample, flow, _euclid, abs(omega),
                       config={"kind": "rotation", "omega": omega})


def _torus_metric(a, b):
    return np.sqrt((_circ(a - b) ** 2).sum(axis=-1))


def flat_torus_flow() -> FlowSampler:
    """Unit-speed geodesic flow of the flat torus R^2/Z^2.

    State ``(p1, p2, theta)`` with the direction angle measured in turns; the
    distance is the flat (periodic Euclidean) distance on all three coordinates.
    """

    def sample(rng, n):
        return stratified_unit_cube(rng, n, 3)

    def flow(states, t):
        th = 2.0 * math.pi * states[:, 2]
        p = states[:, :2] + t * np.stack([np.cos(th), np.sin(th)], axis=1)
        return np.concatenate([p % 1.0, states[:, 2:]], axis=1)

    return FlowSampler("flat_torus", 3, sample, flow, _torus_metric, 1.0, config={"kind": "flat_torus"})


def _e(u):
    return np.stack([np.cos(2 * math.pi * u), np.sin(2 * math.pi * u)], axis=-1) / (2 * math.pi)


def _suspension_embed(st):
    x, s = st[..., 0], st[..., 1]
    return np.concatenate([_e(s), (1 - s)[..., None] * _e(x) + s[..., None] * _e(2 * x)], axis=-1)


def doubling_suspension() -> FlowSampler:
    """Suspension of ``x -> 2x mod 1`` with roof 1; state ``(x, s)``, ``(x, 1) ~ (2x, 0)``.

    The distance is Euclidean in the continuous model
    ``(x, s) -> (e(s), (1 - s) e(x) + s e(2x))`` with ``e(u) = (cos 2 pi u, sin 2 pi u) / 2 pi``.
    Candidates lie on the section ``s = 0``.
    """

    def sample(rng, n):
        x = stratified_unit_cube(rng, n, 1)[:, 0]
        return np.stack([x, np.zeros_like(x)], axis=1)

    def flow(states, t):
        tot = states[:, 1] + t
        k = np.floor(tot)
        x = (states[:, 0] * np.exp2(k)) % 1.0
        return np.stack([x, tot - k], axis=1)

    return FlowSampler("doubling_suspension", 2, sample, flow, _euclid, 1.0 + 1.0 / math.pi,
                       embed=_suspension_embed, config={"kind": "doubling_suspension"})


def scaled_distance(flow: FlowSampler, c: float) -> FlowSampler:
    """Same flow with distance multiplied by ``c``."""
    return FlowSampler(f"{flow.name}*{c:g}", flow.dim, flow.sample, flow.flow,
                       lambda a, b: c * flow.metric(a, b), c * flow.speed_bound, flow.embed,
                       {**flow.config, "distance_scale": c})


FLOWS = {"rotation": rotation_flow, "flat_torus": flat_torus_flow,
         "doubling_suspension": doubling_suspension}


def _time_grid(T: float, dt: float) -> np.ndarray:
    n = int(math.ceil(T / dt - 1e-12))
    return np.linspace(0.0, T, n + 1)


def _check_dt(flow, eps, dt):
    limit = eps / (4.0 * flow.speed_bound)
    if dt is None:
        return limit
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt = {dt} too coarse: need dt <= eps/(4 speed) = {limit:.4g}")
    return dt


def _orbit_features(flow: FlowSampler, candidates: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Features of all candidate orbits, shape ``(n, len(taus), k)``."""
    return np.stack([flow.features(flow.flow(candidates, t)) for t in taus], axis=1)


def _greedy(X: np.ndarray, metric, m: int, eps: float, seed_set: Sequence[int]) -> list[int]:
    """Greedy eps-separated set for d^t on the first ``m`` grid times, seeded by ``seed_set``.

    A pair is separated once its distance exceeds eps at some grid time; the
    end time, the start and a coarse grid are tried first on all chosen points,
    the full grid only on the pairs still unresolved.
    """
    n = X.shape[0]
    stride = max(1, m // 24)
    coarse = [m - 1, 0] + [k for k in range(stride, m - 1, stride)]
    chosen = np.empty(n, dtype=int)
    k = 0
    is_chosen = np.zeros(n, dtype=bool)
    for c in seed_set:
        chosen[k] = c
        is_chosen[c] = True
        k += 1
    for c in range(n):
        if is_chosen[c]:
            continue
        near = chosen[:k]
        for tau in coarse:
            if not len(near):
                break
            near = near[metric(X[c, tau], X[near, tau]) <= eps]
        if len(near) and np.any(metric(X[c, None, :m], X[near, :m]).max(axis=1) <= eps):
            continue
        chosen[k] = c
        is_chosen[c] = True
        k += 1
    return chosen[:k].tolist()


def separated_set_count(flow: FlowSampler, candidates, eps: float, T: float, dt: float | None = None) -> int:
    """Size of a greedy maximal eps-separated subset of ``candidates`` under discretized d^T."""
    candidates = np.asarray(candidates, dtype=float)
    if len(candidates) == 0:
        raise ValueError("empty candidate list")
    if eps <= 0 or T < 0:
        raise ValueError("eps must be positive and T non-negative")
    dt = _check_dt(flow, eps, dt)
    taus = _time_grid(T, dt) if T > 0 else np.zeros(1)
    X = _orbit_features(flow, candidates, taus)
    return len(_greedy(X, flow.metric, len(taus), eps, []))


@dataclass
class EntropyEstimate:
    flow: str
    eps: list
    T: list
    counts: np.ndarray          # monotone envelope, shape (len(eps), len(T))
    raw_counts: np.ndarray      # greedy counts before taking the envelope
    slopes: list
    fit_residuals: list
    saturated: list
    entropy: float
    eps_used: float
    n_candidates: int
    dt: float
    seed: int

    def to_dict(self):
        return {"flow": self.flow, "eps": list(self.eps), "T": list(self.T),
                "counts": self.counts.tolist(), "raw_counts": self.raw_counts.tolist(),
                "slopes": list(self.slopes), "fit_residuals": list(self.fit_residuals),
                "saturated": list(self.saturated), "entropy": self.entropy,
                "eps_used": self.eps_used, "n_candidates": self.n_candidates,
                "dt": self.dt, "seed": self.seed}

    def rows(self):
        for i, e in enumerate(self.eps):
            for j, t in enumerate(self.T):
                yield {"eps": e, "T": t, "count": int(self.counts[i, j]),
                       "raw_count": int(self.raw_counts[i, j])}


class EntropyBudgetError(RuntimeError):
    """Every epsilon saturated the candidate budget."""


def entropy_estimate(flow: FlowSampler, eps_list: Sequence[float], T_list: Sequence[float],
                     n_candidates: int = 1000, seed: int = 0, dt: float | None = None,
                     saturation: float = 0.5) -> EntropyEstimate:
    """Entropy from the growth of greedy eps-separated sets.

    Sets are built for decreasing eps and increasing T, each seeded with the
    larger of the sets already found at (larger eps, same T) and (same eps,
    smaller T); both are still separated, so counts are monotone in both
    directions.  ``saturated[i]`` flags eps whose count exceeds
    ``saturation * n_candidates``; the estimate is the slope at the smallest
    unsaturated eps.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    T_list = sorted(float(t) for t in T_list)
    if not eps_list or not T_list:
        raise ValueError("empty eps or T schedule")
    dt = _check_dt(flow, eps_list[-1], dt)
    taus = _time_grid(T_list[-1], dt)
    m_of = [int(np.searchsorted(taus, T + 1e-12 * max(T, 1.0), side="right")) for T in T_list]
    cands = flow.candidates(n_candidates, seed)
    n_candidates = len(cands)
    X = _orbit_features(flow, cands, taus)
    raw = np.zeros((len(eps_list), len(T_list)), dtype=int)
    prev_eps_sets: list = [[] for _ in T_list]
    for i, eps in enumerate(eps_list):
        prev: list[int] = []
        for j, m in enumerate(m_of):
            seed_set = max(prev, prev_eps_sets[j], key=len)
            cur = _greedy(X, flow.metric, m, eps, seed_set)
            raw[i, j] = len(cur)
            prev_eps_sets[j] = cur
            prev = cur
    counts = np.maximum.accumulate(np.maximum.accumulate(raw, axis=1), axis=0)
    assert np.all(np.diff(counts, axis=1) >= 0) and np.all(np.diff(counts, axis=0) >= 0)
    t = np.asarray(T_list)
    lo = len(t) // 2 if len(t) >= 4 else 0
    slopes, resid, sat = [], [], []
    for i in range(len(eps_list)):
        y = np.log(counts[i, lo:].astype(float))
        if len(t[lo:]) >= 2:
            coef = np.polyfit(t[lo:], y, 1)
            slopes.append(float(coef[0]))
            resid.append(float(np.sqrt(np.mean((np.polyval(coef, t[lo:]) - y) ** 2))))
        else:
            slopes.append(0.0)
            resid.append(0.0)
        sat.append(bool(counts[i].max() > saturation * n_candidates))
    usable = [i for i in range(len(eps_list)) if not sat[i]]
    if not usable:
        raise EntropyBudgetError(f"all eps saturated with {n_candidates} candidates; raise the budget")
    k = usable[-1]
    return EntropyEstimate(flow.name, eps_list, T_list, counts, raw, slopes, resid, sat,
                           slopes[k], eps_list[k], n_candidates, float(dt), seed)


# -- reversibility and symmetrization ----------------------------------------------


def _fiber_values(F, chart, x, phis):
    c, s = np.cos(phis), np.sin(phis)
    f = F.field(chart)
    try:
        v = np.real(np.asarray(_value(f([np.full_like(c, x[0]), np.full_like(c, x[1]), c, s]))))
        if v.shape == c.shape:
            return v
    except (TypeError, ValueError):
        pass
    return np.array([float(np.real(_value(f([x[0], x[1], ci, si])))) for ci, si in zip(c, s)])


def _value(u):
    return getattr(u, "v", u)


def reversibility_number(F, n_samples: int = 20, seed: int = 0, n_angles: int = 360) -> float:
    """``max F(x, -xi) / F(x, xi)`` over sampled base points and a uniform angle grid, refined locally."""
    from .finsler_core import sample_tangents
    if n_angles % 2:
        n_angles += 1
    phis = np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False)
    best = 0.0
    for s in sample_tangents(F, n_samples, seed):
        vals = _fiber_values(F, s.chart, s.x, phis)
        ratio = np.roll(vals, -n_angles // 2) / vals     # index k pairs phi_k with phi_k + pi
        k = int(np.argmax(ratio))
        best = max(best, float(ratio[k]))
        h = 2.0 * math.pi / n_angles

        def neg_ratio(p, s=s):
            v = _fiber_values(F, s.chart, s.x, np.array([p, p + math.pi]))
            return -v[1] / v[0]

        res = optimize.minimize_scalar(neg_ratio, bounds=(phis[k] - h, phis[k] + h), method="bounded",
                                       options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


class QuasiMetricError(ValueError):
    pass


@dataclass
class SymmetrizedDistance:
    d: Callable
    lam: float

    def __call__(self, a, b):
        return 0.5 * (self.d(a, b) + self.d(b, a))


def symmetrize_distance(d: Callable, samples: Sequence | None = None, tol: float = 1e-12) -> SymmetrizedDistance:
    """``rho(a, b) = (d(a, b) + d(b, a)) / 2``.

    With ``samples`` the asymmetric triangle inequality of ``d`` is checked on
    all ordered triples, the reversibility ``lam = max d(b, a) / d(a, b)`` is
    measured, and ``rho`` is checked to be symmetric with
    ``rho <= (1 + lam) / 2 * d``.
    """
    if samples is None:
        return SymmetrizedDistance(d, math.nan)
    pts = list(samples)
    n = len(pts)
    D = np.array([[float(d(pts[i], pts[j])) for j in range(n)] for i in range(n)])
    if np.any(D < -tol):
        raise QuasiMetricError("negative distance")
    for i, j, k in itertools.product(range(n), repeat=3):
        if D[i, k] > D[i, j] + D[j, k] + tol * (1 + D[i, k]):
            raise QuasiMetricError(f"triangle inequality fails on samples {i}, {j}, {k}")
    off = ~np.eye(n, dtype=bool)
    pos = off & (D > 0)
    lam = float((D.T[pos] / D[pos]).max()) if pos.any() else 1.0
    rho = SymmetrizedDistance(d, lam)
    R = 0.5 * (D + D.T)
    if np.abs(R - R.T).max() > tol or np.any(R > 0.5 * (1 + lam) * D + tol * (1 + D)):
        raise QuasiMetricError("symmetrization bound violated")
    return rho


# -- hyperbolic area growth --------------------------------------------------------


def hyperbolic_area(r):
    """Area of a metric ball of radius ``r`` in the curvature -1 plane."""
    return 2.0 * math.pi * (np.cosh(r) - 1.0)


def poincare_ball_area(r: float, epsrel: float = 1e-11) -> float:
    """Area of the ball ``d(0, z) < r`` by integrating ``4 / (1 - |z|^2)^2`` over the Euclidean disk."""
    R = math.tanh(r / 2.0)
    val, err = integrate.quad(lambda rho: 4.0 * rho / (1.0 - rho * rho) ** 2, 0.0, R,
                              epsabs=0.0, epsrel=epsrel, limit=200)
    if not np.isfinite(val) or err > 1e3 * epsrel * abs(val):
        raise ArithmeticError(f"area quadrature did not converge at r={r}")
    return 2.0 * math.pi * val


@dataclass
class HyperbolicGrowth:
    radii: list
    closed_form: list
    numeric: list
    rel_error: float
    exponent: float

    def to_dict(self):
        return dict(self.__dict__)


def hyperbolic_ball_growth(r_list: Sequence[float]) -> HyperbolicGrowth:
    """Ball areas two ways and the fitted exponent of ``log A(r)`` on the upper half of the radii."""
    r = np.asarray(sorted(float(v) for v in r_list))
    if len(r) == 0 or r[0] < 0.5 or r[-1] > 12:
        raise ValueError("radii must lie in [0.5, 12]")
    closed = hyperbolic_area(r)
    numeric = np.array([poincare_ball_area(v) for v in r])
    rel = float(np.max(np.abs(numeric - closed) / closed))
    lo = len(r) // 2 if len(r) >= 4 else 0
    expo = float(np.polyfit(r[lo:], np.log(numeric[lo:]), 1)[0]) if len(r) - lo >= 2 else math.nan
    return HyperbolicGrowth(r.tolist(), closed.tolist(), numeric.tolist(), rel, expo)


def annulus_radii(area: Callable, k: float, delta: float = 0.5, r_max: float = 20.0,
                  step: float = 0.25) -> list[float]:
    """Radii ``r`` on a grid with ``area(r + delta) - area(r) >= exp(k r / 2)``."""
    rs = np.arange(0.0, r_max + 1e-12, step)
    return [float(v) for v in rs if area(v + delta) - area(v) >= math.exp(0.5 * k * v)]


def annulus_summation_bound(area: Callable, k: float, r0: float, R: float, delta: float = 0.5) -> float:
    """Upper bound for ``area(R)`` if every annulus beyond ``r0`` were smaller than ``exp(k r / 2)``.

    Exponential ball growth ``area(R) >= mu0 exp(k R)`` eventually exceeds it,
    which is why good annuli must recur.
    """
    n = int(math.ceil((R - r0) / delta))
    return float(area(r0) + sum(math.exp(0.5 * k * (r0 + j * delta)) for j in range(n)))
