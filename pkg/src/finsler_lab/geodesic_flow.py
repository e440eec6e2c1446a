"""Integration of geodesic sprays and comparison of geodesics as point sets."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .finsler_core import MetricModel, SphereAtlas, TangentSample, spray_coefficients


class IntegrationError(RuntimeError):
    pass


class OrientationError(ValueError):
    """Two traces cover the same curve with opposite orientations."""


@dataclass
class GeodesicTrace:
    """Time-stamped chart states ``(x, xi)`` along a geodesic."""

    t: np.ndarray
    charts: list
    x: np.ndarray
    xi: np.ndarray
    atlas: str
    steps: int = 0
    nfev: int = 0
    switches: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def sample(self, k: int) -> TangentSample:
        return TangentSample(self.charts[k], self.x[k], self.xi[k])

    def samples(self):
        return [self.sample(k) for k in range(len(self))]

    def segments(self):
        """Index ranges over which the chart does not change."""
        bounds = [0] + [k for k in range(1, len(self)) if self.charts[k] != self.charts[k - 1]]
        bounds.append(len(self))
        return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def positions(self) -> np.ndarray:
        """Points in a chart-independent frame (the embedding for sphere atlases)."""
        if self.atlas != "sphere":
            return self.x.copy()
        return np.array([SphereAtlas.embed(c, *x) for c, x in zip(self.charts, self.x)])

    def tangents(self) -> np.ndarray:
        if self.atlas != "sphere":
            return self.xi.copy()
        return np.array([SphereAtlas.embed_tangent(c, *x, *v)
                         for c, x, v in zip(self.charts, self.x, self.xi)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "chart", "x1", "x2", "xi1", "xi2"])
            for k in range(len(self)):
                w.writerow([repr(float(self.t[k])), self.charts[k], *map(repr, map(float, self.x[k])),
                            *map(repr, map(float, self.xi[k]))])


def integrate_spray(F: MetricModel, init: TangentSample, T: float, tol: float = 1e-10,
                    dt_out: float = 0.01) -> GeodesicTrace:
    """Flow of the spray of ``F`` from ``init`` for time ``T``.

    Dormand-Prince 5(4) with ``rtol = atol = tol``; output on a uniform grid of
    spacing ``dt_out`` (dense output) plus the end point.  On a sphere atlas the
    chart is switched when ``|x|`` reaches 1.5; after the switch the point sits
    at ``|x| = 1/1.5``, well inside the new chart.
    """
    if T <= 0 or tol <= 0 or dt_out <= 0:
        raise ValueError("T, tol and dt_out must be positive")
    atlas = F.atlas
    chart = init.chart
    F.check(init)
    y = np.concatenate([init.x, init.xi]).astype(float)
    t0 = 0.0
    ts, charts, states = [], [], []
    switches = []
    steps = nfev = 0

    def rhs_for(ch):
        def rhs(t, yy):
            if not np.all(np.isfinite(yy)):
                raise IntegrationError(f"state became non-finite at t={t}")
            if not atlas.contains(ch, yy[:2]):
                # a trial stage stepped past the domain edge before the event fired
                raise IntegrationError(f"geodesic left the chart domain near t={t:.6g}")
            s = TangentSample(ch, yy[:2], yy[2:])
            G = spray_coefficients(F, s).G
            return np.array([yy[2], yy[3], -2.0 * G[0], -2.0 * G[1]])
        return rhs

    events = []
    if atlas.kind == "sphere":
        def leave(t, yy):
            return yy[0] ** 2 + yy[1] ** 2 - atlas.switch_radius ** 2
        leave.terminal, leave.direction = True, 1.0
        events.append(leave)
    elif atlas.kind == "disk":
        def leave(t, yy):
            return yy[0] ** 2 + yy[1] ** 2 - (1.0 - 1e-9)
        leave.terminal, leave.direction = True, 1.0
        events.append(leave)

    n_out = int(np.floor(T / dt_out + 1e-9))
    grid = np.arange(n_out + 1) * dt_out
    if T - grid[-1] > 1e-12 * T:
        grid = np.append(grid, T)
    while True:
        sol = solve_ivp(rhs_for(chart), (t0, T), y, method="RK45", rtol=tol, atol=tol,
                        dense_output=True, events=events or None)
        if sol.status == -1:
            raise IntegrationError(sol.message)
        steps += len(sol.t) - 1
        nfev += sol.nfev
        t_end = sol.t[-1]
        mask = (grid >= t0 - 1e-15) & (grid <= t_end + 1e-15)
        if ts and mask.any() and grid[mask][0] <= ts[-1]:
            mask &= grid > ts[-1]
        pts = grid[mask]
        if len(pts):
            Y = sol.sol(pts)
            ts.extend(pts)
            charts.extend([chart] * len(pts))
            states.extend(Y.T)
        if sol.status == 1:
            # terminal event: record the crossing and change chart
            y_ev = sol.y_events[0][0]
            t_ev = sol.t_events[0][0]
            if atlas.kind != "sphere":
                raise IntegrationError(f"geodesic left the chart domain at t={t_ev:.6g}")
            if not ts or t_ev > ts[-1]:
                ts.append(t_ev)
                charts.append(chart)
                states.append(y_ev)
            new_chart, x_new, xi_new = atlas.transition(chart, y_ev[:2], y_ev[2:])
            switches.append((float(t_ev), chart, new_chart))
            chart, y, t0 = new_chart, np.concatenate([x_new, xi_new]), t_ev
            continue
        break
    states = np.array(states)
    if not np.all(np.isfinite(states)):
        raise IntegrationError("non-finite state in trace")
    return GeodesicTrace(np.array(ts), charts, states[:, :2], states[:, 2:], atlas.kind,
                         steps, nfev, switches)


def speed_drift(trace: GeodesicTrace, F: MetricModel) -> float:
    """``max |F(x, xi) - F(x0, xi0)| / F(x0, xi0)`` along the trace."""
    vals = np.array([F.value(s) for s in trace.samples()])
    return float(np.max(np.abs(vals - vals[0])) / abs(vals[0]))


def _point_to_polyline(P, Q):
    """Distances from points P (n, d) to the polyline Q (m, d) and nearest segment indices."""
    A, B = Q[:-1], Q[1:]
    D = B - A
    L2 = np.einsum("ij,ij->i", D, D)
    L2 = np.where(L2 > 0, L2, 1.0)
    rel = P[:, None, :] - A[None, :, :]
    s = np.clip(np.einsum("nmd,md->nm", rel, D) / L2, 0.0, 1.0)
    proj = A[None] + s[..., None] * D[None]
    dist = np.linalg.norm(P[:, None, :] - proj, axis=-1)
    k = np.argmin(dist, axis=1)
    return dist[np.arange(len(P)), k], k


def unparametrized_deviation(a: GeodesicTrace, b: GeodesicTrace, check_orientation: bool = True) -> float:
    """One-sided Hausdorff distance from the points of ``a`` to the polyline of ``b``.

    Sphere traces are compared in the embedding (chordal distance); plane and
    disk traces in their common chart.  With ``check_orientation`` the tangent
    of ``a`` must have positive inner product with the nearest segment of ``b``
    everywhere, otherwise :class:`OrientationError` is raised.
    """
    if len(a) == 0 or len(b) < 2:
        raise ValueError("traces must be nonempty (and b needs two points)")
    if a.atlas != b.atlas:
        raise ValueError(f"traces live on different manifolds ({a.atlas} vs {b.atlas})")
    if a.atlas != "sphere" and set(a.charts) != set(b.charts):
        raise ValueError("traces are in disjoint chart regions")
    P, Q = a.positions(), b.positions()
    dist, k = _point_to_polyline(P, Q)
    if check_orientation:
        seg = Q[k + 1] - Q[k]
        dots = np.einsum("ij,ij->i", a.tangents(), seg)
        if np.any(dots < 0):
            raise OrientationError("traces traverse the curve in opposite directions")
    return float(dist.max())
