"""Domains, exact and regularized distance, and barrier assembly.

Shipped domain families: Interval, Ball (d in {1,2}), DiniGraph (a 2D
chart window above the curve y = |t| omega(|t|)), and LShape (a square
with a re-entrant corner, supported only as a negative diagnostic).  The
regularized distance is analytic for Interval/Ball (the exact distance
with its ridge smoothed by a quartic blend) and a two-pass mollification
of the exact distance for DiniGraph.  Its defining comparability and
derivative bounds are measured on grids, never assumed.  Barriers are
d^s(1 -+ c1 zeta(d)) profiles over the regularized distance; their
collar width and operator sign margins are established by probing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .measure import OperatorSpec
from .modulus import Modulus
from .operator import EvaluationPlan, ProfiledFunction, apply
from .zeta import ZetaProfile, f_inverse

__all__ = [
    "Domain",
    "Interval",
    "Ball",
    "DiniGraph",
    "LShape",
    "exact_distance",
    "RegularizedDistance",
    "regularized_distance",
    "intermediate_integral",
    "verify_almost_harmonic",
    "Barrier",
    "build_barrier",
    "domain_from_json",
]


class Domain:
    """Base interface: membership, exact distance, rays, extent."""

    d: int

    def contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ray_crossings(self, x: np.ndarray, theta: np.ndarray) -> list:
        """Radii r > 0 where x + r theta or x - r theta meets the boundary."""
        raise NotImplementedError

    @property
    def diam(self) -> float:
        raise NotImplementedError

    @property
    def bounding_box(self) -> tuple:
        raise NotImplementedError


def _as_points(pts, d):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, d)
    return pts


@dataclass(frozen=True)
class Interval(Domain):
    a: float = -1.0
    b: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.b <= self.a:
            raise ValueError("need a < b")

    def contains(self, pts):
        x = _as_points(pts, 1)[:, 0]
        return (x > self.a) & (x < self.b)

    def distance(self, pts):
        x = _as_points(pts, 1)[:, 0]
        return np.maximum(np.minimum(x - self.a, self.b - x), 0.0)

    def ray_crossings(self, x, theta):
        x0 = float(np.atleast_1d(x)[0])
        th = float(np.atleast_1d(theta)[0])
        if th == 0.0:
            return []
        out = []
        for e in (self.a, self.b):
            for sign in (1.0, -1.0):
                r = (e - x0) / (sign * th)
                if r > 0:
                    out.append(r)
        return out

    @property
    def diam(self):
        return self.b - self.a

    @property
    def bounding_box(self):
        return (np.array([self.a]), np.array([self.b]))


@dataclass(frozen=True)
class Ball(Domain):
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    radius: float = 1.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if len(c) not in (1, 2):
            raise ValueError("Ball supports d in {1, 2}")

    @property
    def d(self):
        return len(self.center)

    def contains(self, pts):
        pts = _as_points(pts, self.d)
        return np.linalg.norm(pts - self.center[None, :], axis=1) < self.radius

    def distance(self, pts):
        pts = _as_points(pts, self.d)
        rho = np.linalg.norm(pts - self.center[None, :], axis=1)
        return np.maximum(self.radius - rho, 0.0)

    def ray_crossings(self, x, theta):
        x = np.atleast_1d(np.asarray(x, float)) - self.center
        th = np.atleast_1d(np.asarray(theta, float))
        out = []
        bq = float(x @ th)
        c = float(x @ x) - self.radius ** 2
        for sign in (1.0, -1.0):
            disc = bq ** 2 - c
            if disc >= 0:
                sq = np.sqrt(disc)
                for r in (-sign * bq - sq, -sign * bq + sq):
                    if r > 0:
                        out.append(r)
        return out

    @property
    def diam(self):
        return 2.0 * self.radius

    @property
    def bounding_box(self):
        return (self.center - self.radius, self.center + self.radius)


class DiniGraph(Domain):
    """Chart window above the curve y = |t| omega(|t|), |t| < window.

    The domain is {(y1, y2): |y1| < window, phi(y1) < y2 < window} with
    phi(t) = |t| omega(|t|), so the boundary graph is C^1 with gradient
    modulus omega.  The distance is computed against a dense parametric
    sampling of the graph (KD-tree candidates plus local ternary
    refinement) and against the flat window sides.
    """

    d = 2

    def __init__(self, omega: Modulus, window: float = 1.0,
                 n_samples: int = 40_000):
        self.omega = omega
        self.window = float(window)
        tpos = np.geomspace(1e-12, self.window, n_samples // 2)
        ts = np.concatenate([-tpos[::-1], [0.0], tpos])
        self._ts = ts
        self._curve = np.stack([ts, self.phi(ts)], axis=1)
        self._tree = cKDTree(self._curve)

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        return np.abs(t) * self.omega(np.abs(t))

    def contains(self, pts):
        pts = _as_points(pts, 2)
        y1, y2 = pts[:, 0], pts[:, 1]
        return (np.abs(y1) < self.window) & (y2 < self.window) \
            & (y2 > self.phi(y1))

    def graph_distance(self, pts, refine_iters: int = 60):
        """Distance to the boundary graph, refined on the curve parameter."""
        pts = _as_points(pts, 2)
        _, idx = self._tree.query(pts)
        lo = self._ts[np.maximum(idx - 1, 0)]
        hi = self._ts[np.minimum(idx + 1, len(self._ts) - 1)]
        for _ in range(refine_iters):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1 = (pts[:, 0] - m1) ** 2 + (pts[:, 1] - self.phi(m1)) ** 2
            f2 = (pts[:, 0] - m2) ** 2 + (pts[:, 1] - self.phi(m2)) ** 2
            take1 = f1 < f2
            hi = np.where(take1, m2, hi)
            lo = np.where(take1, lo, m1)
        t = 0.5 * (lo + hi)
        return np.hypot(pts[:, 0] - t, pts[:, 1] - self.phi(t))

    def distance(self, pts):
        pts = _as_points(pts, 2)
        inside = self.contains(pts)
        out = np.zeros(len(pts))
        if np.any(inside):
            p = pts[inside]
            side = np.minimum(self.window - np.abs(p[:, 0]),
                              self.window - p[:, 1])
            out[inside] = np.minimum(self.graph_distance(p), side)
        return out

    def ray_crossings(self, x, theta):
        x = np.atleast_1d(np.asarray(x, float))
        th = np.atleast_1d(np.asarray(theta, float))
        out = []
        span = 4.0 * self.window
        rr = np.geomspace(1e-12, span, 400)
        for sign in (1.0, -1.0):
            pts = x[None, :] + sign * rr[:, None] * th[None, :]
            ins = self.contains(pts)
            start = self.contains(x[None, :])[0]
            flips = np.nonzero(np.diff(np.concatenate([[start], ins])))[0]
            for j in flips:
                a = rr[j - 1] if j > 0 else 0.0
                b = rr[j]
                for _ in range(60):
                    m = 0.5 * (a + b)
                    if self.contains((x + sign * m * th)[None, :])[0] == start:
                        a = m
                    else:
                        b = m
                out.append(0.5 * (a + b))
                start = not start
        return out

    @property
    def diam(self):
        return float(np.hypot(2.0 * self.window, 2.0 * self.window))

    @property
    def bounding_box(self):
        w = self.window
        return (np.array([-w, -w]), np.array([w, w]))


@dataclass(frozen=True)
class LShape(Domain):
    """Square (-1,1)^2 minus the closed quadrant {x >= 0, y <= 0}; the
    re-entrant corner at the origin puts it outside the C^1-Dini class."""

    size: float = 1.0
    d: int = 2

    def contains(self, pts):
        pts = _as_points(pts, 2)
        x, y = pts[:, 0], pts[:, 1]
        in_sq = (np.abs(x) < self.size) & (np.abs(y) < self.size)
        in_q = (x >= 0) & (y <= 0)
        return in_sq & ~in_q

    def distance(self, pts):
        pts = _as_points(pts, 2)
        x, y = pts[:, 0], pts[:, 1]
        d_sq = np.minimum(self.size - np.abs(x), self.size - np.abs(y))
        d_q = np.hypot(np.minimum(x, 0.0), np.maximum(y, 0.0))
        return np.where(self.contains(pts), np.minimum(d_sq, d_q), 0.0)

    def ray_crossings(self, x, theta):
        x = np.atleast_1d(np.asarray(x, float))
        th = np.atleast_1d(np.asarray(theta, float))
        out = []
        rr = np.geomspace(1e-12, 4.0 * self.size, 400)
        for sign in (1.0, -1.0):
            pts = x[None, :] + sign * rr[:, None] * th[None, :]
            ins = self.contains(pts)
            start = self.contains(x[None, :])[0]
            flips = np.nonzero(np.diff(np.concatenate([[start], ins])))[0]
            for j in flips:
                a = rr[j - 1] if j > 0 else 0.0
                b = rr[j]
                for _ in range(60):
                    m = 0.5 * (a + b)
                    if self.contains((x + sign * m * th)[None, :])[0] == start:
                        a = m
                    else:
                        b = m
                out.append(0.5 * (a + b))
                start = not start
        return out

    @property
    def diam(self):
        return float(2.0 * np.sqrt(2.0) * self.size)

    @property
    def bounding_box(self):
        s = self.size
        return (np.array([-s, -s]), np.array([s, s]))


def exact_distance(D: Domain, x) -> float:
    """Euclidean distance from x to the complement (0 outside D)."""
    return float(D.distance(np.atleast_1d(np.asarray(x, float)).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# regularized distance
# ---------------------------------------------------------------------------

def _quartic_blend(rho, a):
    """Even C^2 function >= |rho|, equal to |rho| for |rho| >= a."""
    rho = np.asarray(rho, dtype=float)
    ab = np.abs(rho)
    out = np.where(ab >= a, ab,
                   3.0 * a / 8.0 + 3.0 * rho ** 2 / (4.0 * a)
                   - rho ** 4 / (8.0 * a ** 3))
    return out


class RegularizedDistance:
    """Smoothed distance with measured comparability constants.

    For Interval/Ball the smoothing only modifies the ridge set (the
    midpoint/center) and leaves the distance untouched near the boundary.
    For DiniGraph the exact distance is mollified twice, with the bump
    width set to half the previous pass value, evaluated on demand.
    """

    def __init__(self, D: Domain, kind: str, fn: Callable):
        self.domain = D
        self.kind = kind
        self._fn = fn
        self.C1 = np.nan
        self.C2 = np.nan
        self.C3 = np.nan
        self.c1_norm = np.nan

    def value(self, pts) -> np.ndarray:
        pts = _as_points(pts, self.domain.d)
        return self._fn(pts)

    def __call__(self, pts):
        return self.value(pts)

    def grad(self, pts, h_rel: float = 1e-5) -> np.ndarray:
        pts = _as_points(pts, self.domain.d)
        d0 = np.maximum(self.value(pts), 1e-12)
        out = np.empty_like(pts)
        for k in range(pts.shape[1]):
            h = h_rel * np.maximum(d0, 1e-6)
            e = np.zeros(pts.shape[1])
            e[k] = 1.0
            out[:, k] = (self.value(pts + h[:, None] * e[None, :])
                         - self.value(pts - h[:, None] * e[None, :])) / (2 * h)
        return out

    def hess_norm(self, pts, h_rel: float = 1e-3) -> np.ndarray:
        """Frobenius norm of the finite-difference Hessian."""
        pts = _as_points(pts, self.domain.d)
        d0 = np.maximum(self.value(pts), 1e-9)
        dd = pts.shape[1]
        out = np.zeros(len(pts))
        h = h_rel * d0
        for i in range(dd):
            ei = np.zeros(dd)
            ei[i] = 1.0
            for j in range(i, dd):
                ej = np.zeros(dd)
                ej[j] = 1.0
                if i == j:
                    v = (self.value(pts + h[:, None] * ei) - 2 * self.value(pts)
                         + self.value(pts - h[:, None] * ei)) / h ** 2
                else:
                    v = (self.value(pts + h[:, None] * (ei + ej))
                         - self.value(pts + h[:, None] * (ei - ej))
                         - self.value(pts - h[:, None] * (ei - ej))
                         + self.value(pts - h[:, None] * (ei + ej))) \
                        / (4 * h ** 2)
                out += (2.0 if i != j else 1.0) * v ** 2
        return np.sqrt(out)

    def verify(self, omega: Modulus | None = None, n: int = 400,
               c1_cap: float = 4.0, rng_seed: int = 7) -> dict:
        """Measure C1 (comparability), C2 (gradient modulus), C3 (Hessian
        bound) on sampled interior points; store them on the instance."""
        D = self.domain
        rng = np.random.default_rng(rng_seed)
        lo, hi = D.bounding_box
        pts = []
        while len(pts) < n:
            cand = lo + (hi - lo) * rng.random((4 * n, D.d))
            cand = cand[D.contains(cand)]
            dd = D.distance(cand)
            cand = cand[dd > 1e-6 * D.diam]
            pts.extend(cand[: n - len(pts)])
        pts = np.asarray(pts)
        dex = D.distance(pts)
        dreg = self.value(pts)
        ratio = dreg / dex
        C1 = float(max(ratio.max(), (1.0 / ratio).max()))
        if C1 > c1_cap:
            raise ValueError(f"measured C1 = {C1} exceeds the cap {c1_cap}")

        g = self.grad(pts)
        gnorm = np.linalg.norm(g, axis=1)
        self.c1_norm = float(dreg.max() + gnorm.max())
        C2 = 0.0
        if omega is not None:
            idx = rng.integers(0, len(pts), size=(2 * n, 2))
            idx = idx[idx[:, 0] != idx[:, 1]]
            p, q = pts[idx[:, 0]], pts[idx[:, 1]]
            sep = np.linalg.norm(p - q, axis=1)
            dg = np.linalg.norm(self.grad(p) - self.grad(q), axis=1)
            C2 = float(np.max(dg / np.maximum(omega(sep), 1e-300)))

        C3 = 0.0
        if omega is not None:
            hn = self.hess_norm(pts)
            C3 = float(np.max(hn * dex / np.maximum(omega(dex), 1e-300)))
        self.C1, self.C2, self.C3 = C1, C2, C3
        return {"C1": C1, "C2": C2, "C3": C3, "n_points": len(pts),
                "c1_norm": self.c1_norm}


def regularized_distance(D: Domain, omega: Modulus | None = None,
                         verify: bool = True, n_verify: int = 400,
                         c1_cap: float = 4.0) -> RegularizedDistance:
    if isinstance(D, Interval):
        half = 0.5 * (D.b - D.a)
        a = half / 4.0

        def fn(pts):
            x = pts[:, 0]
            d1, d2 = x - D.a, D.b - x
            val = 0.5 * (d1 + d2) - 0.5 * _quartic_blend(d1 - d2, a)
            return np.where((d1 > 0) & (d2 > 0), val, 0.0)

        rd = RegularizedDistance(D, "interval", fn)
    elif isinstance(D, Ball):
        a = D.radius / 4.0

        def fn(pts):
            rho = np.linalg.norm(pts - D.center[None, :], axis=1)
            val = D.radius - _quartic_blend(rho, a)
            return np.maximum(val, 0.0)

        rd = RegularizedDistance(D, "ball", fn)
    elif isinstance(D, DiniGraph):
        gx, gw = np.polynomial.legendre.leggauss(8)

        # normalized C^infinity bump weights on the tensor Gauss stencil
        def bump(z):
            return np.exp(-1.0 / np.maximum(1.0 - z ** 2, 1e-12))

        XX, YY = np.meshgrid(gx, gx)
        WW = np.outer(gw, gw) * bump(XX) * bump(YY)
        WW = WW / WW.sum()
        offs = np.stack([XX.ravel(), YY.ravel()], axis=1)
        wts = WW.ravel()

        def mollify(pts, widths):
            shifted = pts[:, None, :] + widths[:, None, None] * offs[None, :, :]
            flat = shifted.reshape(-1, 2)
            dv = D.distance(flat).reshape(len(pts), -1)
            return dv @ wts

        def fn(pts):
            out = np.zeros(len(pts))
            inside = D.contains(pts)
            if np.any(inside):
                p = pts[inside]
                d0 = D.distance(p)
                d1 = mollify(p, 0.5 * d0)
                out[inside] = mollify(p, 0.5 * np.maximum(d1, 0.25 * d0))
            return out

        rd = RegularizedDistance(D, "dini_graph", fn)
    else:
        raise ValueError(f"no regularized distance for {type(D).__name__}")
    if verify:
        rd.verify(omega=omega, n=n_verify, c1_cap=c1_cap)
    return rd


# ---------------------------------------------------------------------------
# intermediate estimate (distance powers vs their linearization)
# ---------------------------------------------------------------------------

def default_rho1(omega: Modulus, s: float) -> float:
    """Largest rho with omega(f_inverse(rho)) <= min(1/e^2, s/2)."""
    cap = min(np.exp(-2.0), s / 2.0)
    grid = np.geomspace(1e-12, 1.0, 800)
    vals = np.array([omega(f_inverse(omega, float(g))) if
                     np.isfinite(g) else np.inf for g in grid])
    ok = np.nonzero(vals <= cap)[0]
    if len(ok) == 0:
        raise ValueError("no radius satisfies the rho1 condition")
    return float(grid[ok[-1]])


def intermediate_integral(D: Domain, s: float, x, theta,
                          a: float | None = None,
                          rho1: float | None = None,
                          rd: RegularizedDistance | None = None,
                          omega: Modulus | None = None) -> dict:
    """lhs = int_{a d(x)}^{rho1} |d(x+r theta)^s - (d(x)+grad d . r theta)_+^s|
    r^(-1-2s) dr against the linearized-distance bound rhs."""
    if omega is None:
        omega = getattr(D, "omega", None)
    if omega is None:
        raise ValueError("need the domain modulus omega")
    if rd is None:
        rd = regularized_distance(D, omega=None, verify=True)
    x = np.atleast_1d(np.asarray(x, float))
    theta = np.atleast_1d(np.asarray(theta, float))
    theta = theta / np.linalg.norm(theta)
    dx = float(D.distance(x.reshape(1, -1))[0])
    if rho1 is None:
        rho1 = default_rho1(omega, s)
    if a is None:
        a = 1.0 / (rd.c1_norm * (1.0 + 2.0 * rd.C1) + 4.0)
    if not 0 < a < 0.25:
        raise ValueError("a must be in (0, 1/4)")
    if not dx < rho1 / 2.0:
        raise ValueError(f"point too deep: d(x) = {dx} >= rho1/2 = {rho1 / 2}")

    dreg = float(rd.value(x.reshape(1, -1))[0])
    grad = rd.grad(x.reshape(1, -1))[0]
    gdir = float(grad @ theta)

    r_lo, r_hi = a * dx, rho1
    edges = np.geomspace(r_lo, r_hi, 32 * max(
        int(np.ceil(np.log10(r_hi / r_lo))), 1) + 1)
    # split cells where the linearization changes sign
    if gdir != 0.0:
        r0 = -dreg / gdir
        if r_lo < r0 < r_hi:
            edges = np.unique(np.concatenate([edges, [r0]]))
    gx, gw = np.polynomial.legendre.leggauss(8)
    gx, gw = 0.5 * (gx + 1.0), 0.5 * gw
    va, vb = np.log(edges[:-1]), np.log(edges[1:])
    nodes = va[:, None] + (vb - va)[:, None] * gx[None, :]
    r = np.exp(nodes).ravel()
    pts = x[None, :] + r[:, None] * theta[None, :]
    dval = rd.value(pts)
    lin = np.maximum(dreg + gdir * r, 0.0)
    f = np.abs(dval ** s - lin ** s) * r ** (-2.0 * s)
    f = f.reshape(nodes.shape)
    lhs = float((((vb - va)[:, None] * f * gw[None, :]).sum()))

    wfd = float(omega(f_inverse(omega, dx)))
    if abs(1.0 - 2.0 * s) < 1e-8:
        prof = np.log(1.0 / wfd)
    else:
        prof = (wfd ** (2.0 * s - 1.0) - 1.0) / (1.0 - 2.0 * s)
    rhs = wfd / dx ** s * prof
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "a": a,
            "rho1": rho1, "d": dx}


def verify_almost_harmonic(spec: OperatorSpec, rd: RegularizedDistance,
                           points, omega: Modulus, with_pub: bool = True,
                           cap: float = 1e4,
                           plan: EvaluationPlan | None = None) -> dict:
    """Per-point |A_s d^s| against C (1 + omega(d)/d^s [+ gamma term]);
    the single fitted C must stay below the cap."""
    s = spec.s
    D = rd.domain
    pts = _as_points(points, D.d)

    u = ProfiledFunction(
        fn=lambda p: np.maximum(rd.value(p), 0.0) ** s,
        growth=0.0,
        kink_radii=lambda x, th: D.ray_crossings(x, th),
    )
    rows = []
    for x in pts:
        dx = float(D.distance(x.reshape(1, -1))[0])
        if plan is None:
            pt_plan = EvaluationPlan(s, r_min=min(1e-3, 0.25 * dx))
        else:
            pt_plan = EvaluationPlan(
                s, r_min=min(plan.r_min, 0.25 * dx), r_cut=plan.r_cut,
                ratio=plan.ratio, gauss_n=plan.gauss_n)
        val, err = apply(spec, u, x, pt_plan)
        bound = 1.0 + float(omega(dx)) / dx ** s
        if not with_pub:
            wfd = float(omega(f_inverse(omega, dx)))
            if abs(1.0 - 2.0 * s) < 1e-8:
                prof = np.log(1.0 / max(wfd, 1e-300))
            else:
                prof = (wfd ** (2.0 * s - 1.0) - 1.0) / (1.0 - 2.0 * s)
            bound += wfd / dx ** s * prof
        rows.append((dx, abs(val), bound, err))
    rows = np.asarray(rows)
    C = float(np.max(rows[:, 1] / rows[:, 2]))
    return {"points": pts, "d": rows[:, 0], "abs_value": rows[:, 1],
            "bound_unit": rows[:, 2], "quad_error": rows[:, 3],
            "fitted_C": C, "ok": bool(C <= cap)}


# ---------------------------------------------------------------------------
# barriers
# ---------------------------------------------------------------------------

@dataclass
class Barrier:
    kind: str                       # "plus" or "minus"
    rd: RegularizedDistance
    zeta: ZetaProfile
    c1: float
    scale: float
    eps0: float
    Cl: float
    Cu: float
    spec: OperatorSpec
    probe_stats: dict = field(default_factory=dict)

    def raw_value(self, pts) -> np.ndarray:
        dd = self.rd.value(pts)
        zz = self.zeta.value(np.maximum(dd, 0.0))
        if self.kind == "plus":
            return dd ** self.spec.s * (1.0 - self.c1 * zz)
        return dd ** self.spec.s * (1.0 + self.c1 * zz)

    def value(self, pts) -> np.ndarray:
        return self.scale * self.raw_value(pts)

    def profiled(self) -> ProfiledFunction:
        D = self.rd.domain
        return ProfiledFunction(
            fn=lambda p: self.value(p), growth=0.0,
            kink_radii=lambda x, th: D.ray_crossings(x, th))

    def operator_value(self, x) -> tuple[float, float]:
        x = np.atleast_1d(np.asarray(x, float))
        dx = float(self.rd.domain.distance(x.reshape(1, -1))[0])
        plan = EvaluationPlan(self.spec.s, r_min=min(1e-3, 0.25 * dx))
        return apply(self.spec, self.profiled(), x, plan)


def _collar_points(D: Domain, depths, n_dirs: int = 4, rng_seed: int = 3):
    """Interior probe points at the requested boundary depths."""
    depths = np.atleast_1d(np.asarray(depths, float))
    pts = []
    if isinstance(D, Interval):
        for d in depths:
            pts.append([D.a + d])
            pts.append([D.b - d])
    elif isinstance(D, Ball):
        angles = 2 * np.pi * (np.arange(n_dirs) + 0.37) / n_dirs
        for d in depths:
            r = D.radius - d
            if D.d == 1:
                pts.append(D.center + r)
                pts.append(D.center - r)
            else:
                for aa in angles:
                    pts.append(D.center + r * np.array([np.cos(aa), np.sin(aa)]))
    else:
        raise ValueError("collar probes implemented for Interval and Ball")
    return np.asarray(pts, dtype=float).reshape(-1, D.d)


def build_barrier(kind: str, D: Domain, spec: OperatorSpec,
                  zeta: ZetaProfile, rd: RegularizedDistance | None = None,
                  n_search: int = 28, n_dense: int = 40,
                  d_floor: float = 1e-8) -> Barrier:
    """Assemble b_+ = d^s (1 - c1 zeta(d)) or b_- = d^s (1 + zeta(d)),
    probe for the largest collar with the correct operator sign, and scale
    so the scaled operator value clears 1 in modulus on the collar."""
    if kind not in ("plus", "minus"):
        raise ValueError("kind must be 'plus' or 'minus'")
    if rd is None:
        rd = regularized_distance(D, omega=None, verify=True)
    zdiam = float(zeta.value(np.array([D.diam]))[0])
    c1 = 1.0 / (2.0 * zdiam) if kind == "plus" else 1.0
    bar = Barrier(kind=kind, rd=rd, zeta=zeta, c1=c1, scale=1.0,
                  eps0=np.nan, Cl=np.nan, Cu=np.nan, spec=spec)

    # sign scan over descending collar depths
    depths = np.geomspace(d_floor * D.diam, 0.2 * D.diam, n_search)
    probes = _collar_points(D, depths)
    vals = np.array([bar.operator_value(x)[0] for x in probes])
    per_depth = vals.reshape(len(depths), -1) if len(probes) % len(depths) == 0 \
        else vals.reshape(len(depths), -1)
    sign_ok = (per_depth > 0).all(axis=1) if kind == "plus" \
        else (per_depth < 0).all(axis=1)
    if not sign_ok[0]:
        raise ValueError("operator sign check fails at the innermost depth")
    run_end = int(np.argmin(sign_ok)) if not sign_ok.all() else len(depths)
    eps0 = float(depths[run_end - 1])
    bar.eps0 = eps0

    # dense pass inside the collar fixes the normalization
    dd = np.geomspace(d_floor * D.diam, eps0, n_dense)
    dense = _collar_points(D, dd)
    dvals = np.array([bar.operator_value(x)[0] for x in dense])
    m = float(dvals.min()) if kind == "plus" else float(-dvals.max())
    if m <= 0:
        raise ValueError("operator sign lost on the dense collar pass")
    bar.scale = 1.0 / (0.9 * m)

    # comparability of the scaled barrier against d^s
    dex = D.distance(dense)
    ratio = bar.value(dense) / dex ** spec.s
    bar.Cl, bar.Cu = float(ratio.min()), float(ratio.max())
    bar.probe_stats = {
        "depths": depths, "sign_ok": sign_ok, "dense_depths": dd,
        "dense_values_scaled": dvals * bar.scale,
    }
    return bar


def domain_from_json(obj: dict) -> Domain:
    """Build a domain from its JSON description."""
    kind = obj.get("type")
    if kind == "interval":
        return Interval(float(obj.get("a", -1.0)), float(obj.get("b", 1.0)))
    if kind == "ball":
        return Ball(np.asarray(obj.get("c", [0.0, 0.0]), dtype=float),
                    float(obj.get("r", 1.0)))
    if kind == "dini_graph":
        from .modulus import modulus_from_json
        return DiniGraph(modulus_from_json(obj["modulus"]),
                         float(obj.get("window", 1.0)))
    if kind == "lshape":
        return LShape(float(obj.get("size", 1.0)))
    raise ValueError(f"unknown domain type {kind!r}")
