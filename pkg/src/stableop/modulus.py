"""Moduli of continuity, Dini-type integral conditions, and the upgrade
pipeline producing a concave modulus with controlled derivatives.

A modulus is stored on a log-spaced grid together with an optional exact
closed form.  The Dini condition integrates omega(t)/t near zero; the
2s-Dini condition strengthens the integrand for s <= 1/2.  The upgrade
pipeline replaces an arbitrary modulus by a dominating one that is concave,
increasing, has omega(t)/t^iota decreasing near zero, and satisfies the
second-order differential inequality needed by the barrier profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "Modulus",
    "DiniReport",
    "TGRID",
    "dini_integral",
    "dini_2s_integral",
    "upgrade_modulus",
    "check_modulus_properties",
    "dini2s_monotone_in_s",
    "modulus_from_json",
]

# shared evaluation grid: 64 points per decade over [1e-10, 10]
TGRID = np.geomspace(1e-10, 10.0, 64 * 11 + 1)

_LOG_BRANCH_TOL = 1e-8  # |1-2s| below this switches to the log branch


def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w  # on [0,1]


_GX8, _GW8 = _gauss(8)
_GX16, _GW16 = _gauss(16)


@dataclass(frozen=True)
class Modulus:
    """Nondecreasing continuous modulus with omega(0+) = 0.

    kind is one of "power", "log_power", "table", "composite".  fn, when
    present, is an exact vectorized evaluation t -> omega(t); fn_u evaluates
    in the variable u = ln(1/t) and exists so deep-tail quadrature can reach
    scales that underflow in t.  Table-only moduli extrapolate below the
    grid by the power law fitted to the lowest grid decade and above the
    grid linearly.
    """

    kind: str
    t: np.ndarray
    w: np.ndarray
    params: dict = field(default_factory=dict)
    fn: Callable | None = None
    fn_u: Callable | None = None
    upgraded: bool = False
    iota: float | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if t.ndim != 1 or t.shape != w.shape:
            raise ValueError("grid shape mismatch")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.diff(w) < -1e-12 * max(1.0, w.max())):
            raise ValueError("modulus values must be nondecreasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    # -- constructors ----------------------------------------------------

    @staticmethod
    def power(alpha: float) -> "Modulus":
        if not 0 < alpha <= 1:
            raise ValueError("power exponent must be in (0,1]")
        fn = lambda t: np.power(np.maximum(np.asarray(t, float), 0.0), alpha)
        fn_u = lambda u: np.exp(-alpha * np.asarray(u, float))
        return Modulus("power", TGRID, fn(TGRID), {"alpha": alpha}, fn, fn_u)

    @staticmethod
    def log_power(p: float) -> "Modulus":
        if p <= 0:
            raise ValueError("log power must be positive")

        def fn(t):
            t = np.asarray(t, dtype=float)
            out = np.ones_like(t)
            m = (t > 0) & (t < 1)
            out[m] = (1.0 + np.log(1.0 / t[m])) ** (-p)
            out[t <= 0] = 0.0
            return out

        def fn_u(u):
            u = np.asarray(u, dtype=float)
            return (1.0 + np.maximum(u, 0.0)) ** (-p)

        return Modulus("log_power", TGRID, fn(TGRID), {"p": p}, fn, fn_u)

    @staticmethod
    def table(t, w) -> "Modulus":
        return Modulus("table", np.asarray(t, float), np.asarray(w, float))

    @staticmethod
    def from_callable(fn, name="composite", fn_u=None, grid=None) -> "Modulus":
        grid = TGRID if grid is None else np.asarray(grid, float)
        return Modulus(name, grid, np.asarray(fn(grid), float), {}, fn, fn_u)

    # -- evaluation ------------------------------------------------------

    @property
    def _interp(self):
        key = "_interp_cache"
        cached = self.__dict__.get(key)
        if cached is None:
            cached = PchipInterpolator(np.log(self.t), self.w, extrapolate=False)
            self.__dict__[key] = cached
        return cached

    @property
    def _low_exponent(self) -> float:
        # power-law exponent fitted over the lowest grid decade
        i = np.searchsorted(self.t, self.t[0] * 10.0)
        i = max(i, 1)
        w0, wi = self.w[0], self.w[i]
        if w0 <= 0 or wi <= 0:
            return 1.0
        q = np.log(wi / w0) / np.log(self.t[i] / self.t[0])
        return float(max(q, 0.0))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if self.fn is not None:
            out = np.asarray(self.fn(t), dtype=float)
        else:
            out = np.empty_like(t)
            lo = t < self.t[0]
            hi = t > self.t[-1]
            mid = ~(lo | hi) & (t > 0)
            out[mid] = self._interp(np.log(t[mid]))
            q = self._low_exponent
            out[lo] = self.w[0] * (np.maximum(t[lo], 0.0) / self.t[0]) ** q \
                if q > 0 else self.w[0]
            slope = (self.w[-1] - self.w[-2]) / (self.t[-1] - self.t[-2])
            out[hi] = self.w[-1] + max(slope, 0.0) * (t[hi] - self.t[-1])
            out[t <= 0] = 0.0
        return float(out[0]) if scalar else out

    def eval_u(self, u):
        """omega at t = exp(-u); robust for very large u."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.fn_u is not None:
            return np.asarray(self.fn_u(u), dtype=float)
        # table path: fall back to t where representable, power tail below
        out = np.empty_like(u)
        u_edge = -np.log(self.t[0])
        deep = u > u_edge
        out[~deep] = self(np.exp(-u[~deep]))
        q = self._low_exponent
        out[deep] = self.w[0] * np.exp(-q * (u[deep] - u_edge))
        return out

    def deriv(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "power":
            a = self.params["alpha"]
            return a * np.power(t, a - 1.0)
        if self.kind == "log_power":
            p = self.params["p"]
            out = np.zeros_like(t)
            m = (t > 0) & (t < 1)
            out[m] = p * (1.0 + np.log(1.0 / t[m])) ** (-p - 1.0) / t[m]
            return out
        d = self._interp.derivative()(np.log(np.clip(t, self.t[0], self.t[-1])))
        return d / t


@dataclass(frozen=True)
class DiniReport:
    """Outcome of a Dini-type integral: value above the cutoff, estimated
    tail below it, and the convergence verdict."""

    value_above_eps: float
    tail_estimate: float
    finite: bool
    eps: float

    @property
    def value(self) -> float:
        return self.value_above_eps + self.tail_estimate if self.finite else np.inf


def _shell_sums(g_u: Callable, u_start: float, n_shells: int) -> np.ndarray:
    """Integrals of g over consecutive windows of width ln 2 in u."""
    edges = u_start + np.log(2.0) * np.arange(n_shells + 1)
    a = edges[:-1]
    nodes = a[:, None] + np.log(2.0) * _GX8[None, :]
    vals = g_u(nodes.ravel()).reshape(nodes.shape)
    return np.log(2.0) * (vals @ _GW8)


def _classify_tail(shells: np.ndarray):
    """(finite, tail_beyond_last_shell) from the decay of shell sums.

    Geometric decay is summed in closed form.  Slowly decaying shells are
    fitted with a power law S_k ~ c k^(-q); the sum converges iff q > 1,
    which separates the harmonic-type divergent cases from convergent ones
    where a bare ratio threshold cannot.
    """
    S = shells[shells > 0]
    if len(S) < 6:
        return True, 0.0
    # drop the underflow fringe; if the shells have collapsed by 16 orders
    # of magnitude the remainder is numerically zero
    S = S[S > S.max() * 1e-280]
    if S[-1] <= S.max() * 1e-16:
        return True, 0.0
    ratios = S[1:] / S[:-1]
    last = ratios[-4:]
    if np.all(last < 0.95):
        rho = float(np.median(last))
        rho = min(rho, 0.95)
        return True, float(S[-1] * rho / (1.0 - rho))
    # slow decay: power-law fit over the last half of the shells
    k = np.arange(1, len(S) + 1, dtype=float)
    half = len(S) // 2
    A = np.vstack([np.ones(len(S) - half), np.log(k[half:])]).T
    coef, *_ = np.linalg.lstsq(A, np.log(S[half:]), rcond=None)
    q = -coef[1]
    if q <= 1.1:
        return False, np.inf
    K = len(S)
    return True, float(S[-1] * K / (q - 1.0))


def _dini_report(g_u: Callable, eps: float, n_deep: int = 2000) -> DiniReport:
    if not 0 < eps < 1:
        raise ValueError("cutoff must be in (0,1)")
    u_eps = np.log(1.0 / eps)
    # integral over (eps, 1): composite Gauss on ~8 cells per doubling
    n_cells = max(16, int(np.ceil(8 * u_eps / np.log(2.0))))
    edges = np.linspace(0.0, u_eps, n_cells + 1)
    a, b = edges[:-1], edges[1:]
    nodes = a[:, None] + (b - a)[:, None] * _GX16[None, :]
    vals = g_u(nodes.ravel()).reshape(nodes.shape)
    value = float(np.sum((b - a)[:, None] * vals * _GW16[None, :]))

    # verdict from shells below eps; a short early window catches clean
    # divergence, the long sum resolves slow convergence
    shells = _shell_sums(g_u, u_eps, n_deep)
    ratios = shells[1:] / np.where(shells[:-1] > 0, shells[:-1], np.inf)
    early = ratios[8:36]
    hard_divergent = False
    run = 0
    for r in early:
        run = run + 1 if r > 0.95 else 0
        if run >= 3:
            hard_divergent = True
            break
    finite, rest = _classify_tail(shells)
    if hard_divergent and not finite:
        return DiniReport(value, np.inf, False, eps)
    if not finite:
        return DiniReport(value, np.inf, False, eps)
    tail = float(np.sum(shells)) + rest
    return DiniReport(value, tail, True, eps)


def dini_integral(omega: Modulus, eps: float = 1e-6) -> DiniReport:
    """Integral of omega(t)/t over (eps,1) plus tail verdict below eps."""
    return _dini_report(omega.eval_u, eps)


def dini_2s_integral(omega: Modulus, s: float, eps: float = 1e-6) -> DiniReport:
    """The strengthened integral with integrand
    (omega/t) (omega^(2s-1) - omega(1)^(2s-1)) / (1-2s), log branch at s=1/2."""
    if not 0 < s < 1:
        raise ValueError("s must be in (0,1)")
    w1 = float(omega(1.0))
    if w1 <= 0:
        raise ValueError("omega(1) must be positive")

    if abs(1.0 - 2.0 * s) < _LOG_BRANCH_TOL:
        def g_u(u):
            w = np.clip(omega.eval_u(u), 1e-300, None)
            return w * np.log(np.maximum(w1 / w, 1.0))
    else:
        def g_u(u):
            w = np.clip(omega.eval_u(u), 1e-300, None)
            return w * (w ** (2 * s - 1.0) - w1 ** (2 * s - 1.0)) / (1.0 - 2.0 * s)

    return _dini_report(g_u, eps)


# ---------------------------------------------------------------------------
# upgrade pipeline
# ---------------------------------------------------------------------------

_T0 = 0.25  # threshold below which the concave envelope is active


def upgrade_modulus(omega_bar: Modulus, iota: float, mode: str = "dini",
                    s0: float | None = None,
                    t_floor: float | None = None) -> Modulus:
    """Dominating concave modulus with decreasing omega/t^iota near zero.

    Stages: (1) exact concave envelope as an infimum of affine functions
    over a fixed scale grid; (2) forward average over [t,2t]; (3) an
    integral correction making t -> value/t^iota decreasing; (4) double
    dyadic averaging giving two controlled derivatives; (5) addition of
    t^(iota/2).  Every stage preserves domination, monotonicity and
    concavity exactly, so downstream property checks are limited only by
    quadrature accuracy.

    t_floor sets the smallest scale the internal envelope and integration
    grids resolve (default: the shared grid floor); pass a smaller value
    when the result must stay accurate far below the shared grid.
    """
    if not 0 < iota < 1.0 / 3.0:
        raise ValueError("iota must be in (0, 1/3)")
    if mode not in ("dini", "dini2s"):
        raise ValueError("mode must be 'dini' or 'dini2s'")
    if mode == "dini2s" and s0 is None:
        raise ValueError("mode dini2s requires s0")

    t0 = _T0
    grid = TGRID
    floor = float(t_floor) if t_floor is not None else float(grid[0])
    if not 0 < floor < t0:
        raise ValueError("t_floor must be in (0, 0.25)")
    sel = (grid >= t0)
    M = 1.1 * float(np.max(omega_bar(grid[sel]) / grid[sel]))

    # fixed scale grid for the envelope: using the same candidate set for
    # every t keeps the result an exact infimum of affine maps, i.e. an
    # exactly concave increasing piecewise-linear function
    d_lo = floor * 1e-4
    deltas = np.geomspace(d_lo, t0, 128 * int(np.ceil(np.log10(t0 / d_lo))))
    icpt = omega_bar(deltas)            # increasing intercepts
    slope = M * t0 / deltas             # decreasing slopes
    # lower envelope via the monotone hull of the lines y = icpt + slope*t
    keep_i = [0]
    brk = []  # breakpoint where line keep_i[k] hands over to keep_i[k+1]
    for j in range(1, len(deltas)):
        if slope[j] >= slope[keep_i[-1]] - 1e-300:
            continue
        while keep_i:
            i = keep_i[-1]
            x = (icpt[j] - icpt[i]) / (slope[i] - slope[j])
            if brk and x <= brk[-1]:
                keep_i.pop()
                brk.pop()
            else:
                keep_i.append(j)
                brk.append(x)
                break
        if not keep_i:
            keep_i = [j]
    keep = np.asarray(keep_i)
    brk = np.asarray(brk)
    env_a, env_b = icpt[keep], slope[keep]
    # antiderivative of the envelope at its breakpoints
    xs = np.concatenate([[0.0], brk])
    seg_int = np.empty(len(xs))
    seg_int[0] = 0.0
    if len(xs) > 1:
        x0, x1 = xs[:-1], xs[1:]
        pieces = env_a[:-1] * (x1 - x0) + 0.5 * env_b[:-1] * (x1 ** 2 - x0 ** 2)
        seg_int[1:] = np.cumsum(pieces)

    def omega1(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(brk, t)
        return env_a[idx] + env_b[idx] * t

    def _omega1_antideriv(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(brk, t)
        x0 = xs[idx]
        return seg_int[idx] + env_a[idx] * (t - x0) \
            + 0.5 * env_b[idx] * (t ** 2 - x0 ** 2)

    def omega2(t):
        # exact average of omega1 over [t, 2t]
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return (_omega1_antideriv(2.0 * t) - _omega1_antideriv(t)) / t

    # correction term: j(t) = (1-iota) t^iota int_t^inf min(w2(r), w2(1)) r^(-1-iota) dr
    w2_1 = float(omega2(np.array([1.0]))[0])
    sub1 = np.geomspace(floor, 1.0, 64 * int(np.ceil(np.log10(1.0 / floor))) + 1)
    sub1[-1] = 1.0
    # cumulative integral of w2(r) r^(-1-iota) from each node up to 1
    a_, b_ = sub1[:-1], sub1[1:]
    nodes = a_[:, None] + (b_ - a_)[:, None] * _GX8[None, :]
    integ = omega2(nodes.ravel()).reshape(nodes.shape) \
        * nodes ** (-1.0 - iota)
    cell = (b_ - a_)[:, None] * integ * _GW8[None, :]
    cum_from_right = np.concatenate([np.cumsum(cell.sum(axis=1)[::-1])[::-1], [0.0]])

    def jfun(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        above = t >= 1.0
        out[above] = (1.0 - iota) * w2_1 / iota
        tl = t[~above]
        if tl.size:
            idx = np.searchsorted(sub1, tl, side="right") - 1
            idx = np.clip(idx, 0, len(sub1) - 2)
            base = cum_from_right[idx + 1]
            # partial cell from tl up to the next node
            hi = sub1[idx + 1]
            pn = tl[:, None] + (hi - tl)[:, None] * _GX8[None, :]
            pv = omega2(pn.ravel()).reshape(pn.shape) * pn ** (-1.0 - iota)
            part = (hi - tl)[:, None] * pv * _GW8[None, :]
            integral = base + part.sum(axis=1)
            out[~above] = (1.0 - iota) * tl ** iota * (integral + w2_1 / iota)
        return out

    def omega3(t):
        return omega2(t) + jfun(t)

    # double dyadic average with factor 1/(1-3 iota)
    c4 = 1.0 / (1.0 - 3.0 * iota)
    gl, gwl = _GX8 * 0.5 + 0.5, _GW8 * 0.5  # Gauss on [1/2, 1]
    LR = (gl[:, None] * gl[None, :]).ravel()
    WLR = (gwl[:, None] * gwl[None, :]).ravel()

    def omega4(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        args = t[:, None] * LR[None, :]
        vals = omega3(args.ravel()).reshape(args.shape)
        return 4.0 * c4 * (vals @ WLR)

    vals = omega4(grid) + grid ** (iota / 2.0)

    def fn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        p = t > 0
        if np.any(p):
            out[p] = omega4(t[p]) + t[p] ** (iota / 2.0)
        return out

    fg = np.geomspace(floor, floor * 10.0, 9)
    fvals4 = omega4(fg)
    q_low = _fit_low_exponent(fg, fvals4)
    w_edge_4 = float(fvals4[0])
    u_edge = -np.log(floor)

    def fn_u(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(u)
        deep = u > u_edge
        out[~deep] = fn(np.exp(-u[~deep]))
        # below the resolved floor the added power term dominates the
        # averaged part; extrapolate each piece by its own power law
        out[deep] = w_edge_4 * np.exp(-q_low * (u[deep] - u_edge)) \
            + np.exp(-(iota / 2.0) * u[deep])
        return out

    return Modulus("composite", grid, vals,
                   {"iota": iota, "mode": mode, "s0": s0, "M": M, "t0": t0},
                   fn, fn_u, upgraded=True, iota=iota)


def _fit_low_exponent(t, w):
    i = np.searchsorted(t, t[0] * 10.0)
    i = max(i, 1)
    if w[0] <= 0 or w[i] <= 0:
        return 1.0
    return float(max(np.log(w[i] / w[0]) / np.log(t[i] / t[0]), 0.0))


def check_modulus_properties(omega: Modulus, iota: float,
                             grid: np.ndarray | None = None) -> dict:
    """Report on monotonicity, concavity, omega/t^iota decrease on (0,t0),
    and the inequality t^2 w'' >= -w - 3 t w'.  Margins are scaled by the
    local value; positive margins mean the property holds."""
    t = TGRID if grid is None else np.asarray(grid, float)
    w = omega(t)
    if len(t) < 3:
        raise ValueError("grid too coarse")
    per_decade = len(t) / max(np.log10(t[-1] / t[0]), 1e-300)
    if per_decade < 16:
        raise ValueError("grid too coarse: need >= 16 points per decade")
    report = {}

    dw = np.diff(w)
    i = int(np.argmin(dw))
    report["monotone"] = {"ok": bool(dw[i] >= -1e-12 * max(w.max(), 1e-300)),
                          "worst_margin": float(dw[i]), "at": float(t[i])}

    # concavity as a chord test: value at t_i must sit on or above the chord
    lam = (t[2:] - t[1:-1]) / (t[2:] - t[:-2])
    chord = lam * w[:-2] + (1.0 - lam) * w[2:]
    margin = (w[1:-1] - chord) / np.maximum(w[1:-1], 1e-300)
    i = int(np.argmin(margin))
    report["concave"] = {"ok": bool(margin[i] >= -1e-8),
                         "worst_margin": float(margin[i]), "at": float(t[1 + i])}

    # omega(t)/t^iota nonincreasing on (0, t0)
    m = t <= _T0
    g = w[m] / t[m] ** iota
    dg = np.diff(g) / np.maximum(g[:-1], 1e-300)
    if len(dg):
        i = int(np.argmax(dg))
        report["power_quotient_decreasing"] = {
            "ok": bool(dg[i] <= 1e-8), "worst_margin": float(-dg[i]),
            "at": float(t[m][i])}
    else:
        report["power_quotient_decreasing"] = {"ok": True, "worst_margin": 0.0,
                                               "at": float("nan")}

    # t^2 w'' + 3 t w' + w >= 0, in log coordinates W'' + 2 W' + W >= 0
    tt = t[(t >= t[0] * 1e1) & (t <= _T0)]
    h = 1e-3
    L = np.log(tt)
    W = lambda l: omega(np.exp(l))
    W0 = W(L)
    Wp = (8 * (W(L + h) - W(L - h)) - (W(L + 2 * h) - W(L - 2 * h))) / (12 * h)
    Wpp = (-(W(L + 2 * h) + W(L - 2 * h)) + 16 * (W(L + h) + W(L - h))
           - 30 * W0) / (12 * h * h)
    q = (Wpp + 2 * Wp + W0) / np.maximum(W0, 1e-300)
    i = int(np.argmin(q))
    report["second_order_bound"] = {"ok": bool(q[i] >= -1e-8),
                                    "worst_margin": float(q[i]),
                                    "at": float(tt[i])}
    report["ok"] = all(v["ok"] for k, v in report.items() if isinstance(v, dict))
    return report


def dini2s_monotone_in_s(omega: Modulus, s0: float, s: float):
    """If the 2s-Dini integral converges at s0 it converges for s >= s0;
    returns the two verdicts for cross-validation."""
    if s < s0:
        raise ValueError("s must be >= s0")
    r0 = dini_2s_integral(omega, s0)
    r1 = dini_2s_integral(omega, s)
    consistent = (not r0.finite) or r1.finite
    return {"finite_s0": r0.finite, "finite_s": r1.finite, "consistent": consistent}


def modulus_from_json(obj: dict) -> Modulus:
    """Build a modulus from its JSON description."""
    kind = obj.get("type")
    if kind == "power":
        return Modulus.power(float(obj.get("alpha", 0.3)))
    if kind == "log_power":
        return Modulus.log_power(float(obj.get("p", 2.0)))
    if kind == "cap":
        fn = lambda t: np.minimum(np.asarray(t, dtype=float), 1.0)
        fn_u = lambda u: np.minimum(np.exp(-np.asarray(u, dtype=float)), 1.0)
        return Modulus.from_callable(fn, name="cap", fn_u=fn_u)
    if kind == "table":
        return Modulus.table(obj["t"], obj["w"])
    raise ValueError(f"unknown modulus type {kind!r}")
