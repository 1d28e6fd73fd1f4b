"""Barrier profile zeta: integral part on (0,1], power-law extension beyond.

The profile is zeta(t) = C int_0^t (r^iota + omega(r))/r dr built over an
upgraded modulus omega, optionally augmented (when the Levy measure has no
bounded density) by a second integral term driven by gamma, the upgraded
modulus of t -> omega(f^{-1}(t)) with f(t) = t omega(t).  Beyond t=1 the
profile continues as a shifted power a (t - 1 + b^(2/(2-s)))^(s/2) + const
with coefficients chosen so value, first and second derivative match at the
splice.  The profile must satisfy the structural assumptions Z0-Z4 plus a
coupling inequality below a threshold t0; these are checked numerically,
never assumed.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .modulus import (Modulus, TGRID, _GX8, _GW8, _shell_sums, _classify_tail,
                      upgrade_modulus, _LOG_BRANCH_TOL)

__all__ = [
    "ZetaProfile",
    "f_inverse",
    "build_zeta_pub",
    "build_zeta_nopub",
    "check_zeta",
    "touching_function_params",
    "touching_gap",
]


def _f_inverse_raw(omega: Modulus, y, lo=1e-280, hi=1e3, iters=120):
    """Bisection solve of t*omega(t) = y in log space; vectorized."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    la = np.full_like(y, np.log(lo))
    lb = np.full_like(y, np.log(hi))
    for _ in range(iters):
        lm = 0.5 * (la + lb)
        t = np.exp(lm)
        g = t * omega(t)
        high = g > y
        lb[high] = lm[high]
        la[~high] = lm[~high]
    return np.exp(0.5 * (la + lb))


def f_inverse(omega: Modulus, y: float) -> float:
    """Inverse of f(t) = t omega(t) for y within the grid range of f."""
    f_lo = omega.t[0] * omega(omega.t[0])
    f_hi = omega.t[-1] * omega(omega.t[-1])
    if not f_lo <= y <= f_hi:
        raise ValueError(f"y={y} outside the range [{f_lo}, {f_hi}] of f on the grid")
    return float(_f_inverse_raw(omega, y)[0])


def _deep_tail(omega_like, u_start: float) -> float:
    """int_0^{exp(-u_start)} g(r)/r dr for g given in u-coordinates."""
    shells = _shell_sums(omega_like, u_start, 1200)
    finite, rest = _classify_tail(shells)
    if not finite:
        raise ValueError("profile integrand not integrable at zero")
    return float(np.sum(shells)) + rest


def _cumulative(grid: np.ndarray, g_of_r, tail0: float) -> np.ndarray:
    """Cumulative integral int_0^{t_i} g(r)/r dr over the log grid."""
    a, b = grid[:-1], grid[1:]
    nodes = a[:, None] + (b - a)[:, None] * _GX8[None, :]
    vals = g_of_r(nodes.ravel()).reshape(nodes.shape) / nodes
    cells = (b - a)[:, None] * vals * _GW8[None, :]
    return tail0 + np.concatenate([[0.0], np.cumsum(cells.sum(axis=1))])


class ZetaProfile:
    """Callable profile with cached derivatives and validity threshold t0."""

    def __init__(self, s, iota, C, omega, variant, W, zeta2_fn=None,
                 gamma=None, t1=None, a_s=None, gamma_cap=None, grid=None):
        self.s = float(s)
        self.iota = float(iota)
        self.C = float(C)
        self.omega = omega
        self.variant = variant
        self.gamma = gamma
        self.t1 = t1
        self.a_s = a_s
        self._gamma_cap = gamma_cap
        self._grid = TGRID if grid is None else np.asarray(grid, float)
        self._W = W  # cumulative int_0^t omega(r)/r dr at grid nodes
        self._zeta2_fn = zeta2_fn  # (value_fn, deriv_fn) pair or None

        vals = C * (self._grid ** iota / iota + W)
        if zeta2_fn is not None:
            vals = vals + zeta2_fn[0](self._grid)
        self._core_vals = vals
        self._core = PchipInterpolator(np.log(self._grid), vals)

        z1 = float(self._core(0.0))
        zp1 = self._core_deriv(np.array([1.0]))[0]
        zpp1 = self._core_deriv2(np.array([1.0]))[0]
        if zpp1 >= 0:
            raise ValueError("second derivative at the splice must be negative")
        # match value, first and second derivative at t=1:
        # ext(t) = a (t - 1 + shift)^(s/2) + offset
        shift = (2.0 - s) / 2.0 * zp1 / (-zpp1)
        self._shift = float(shift)
        self.b = float(shift ** ((2.0 - s) / 2.0))
        self.a = float(2.0 * self.b * zp1 / s)
        self._offset = float(z1 - self.a * shift ** (s / 2.0))
        self.zeta1, self.zeta1_prime, self.zeta1_second = float(z1), float(zp1), float(zpp1)
        self.t0 = self._compute_t0()

    # -- evaluation ------------------------------------------------------

    def _ext(self, t):
        return self.a * (t - 1.0 + self._shift) ** (self.s / 2.0) + self._offset

    def _ext_d(self, t, order=1):
        p = self.s / 2.0
        base = t - 1.0 + self._shift
        c = self.a
        for k in range(order):
            c *= (p - k)
        return c * base ** (p - order)

    def value(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        g0 = self._grid[0]
        lo = t < g0
        hi = t > 1.0
        mid = ~(lo | hi)
        out[mid] = self._core(np.log(np.maximum(t[mid], g0)))
        if np.any(hi):
            out[hi] = self._ext(t[hi])
        if np.any(lo):
            # below the grid floor: power law fitted to the lowest decade
            v0 = self._core_vals[0]
            i = max(int(np.searchsorted(self._grid, g0 * 10.0)), 1)
            q = np.log(self._core_vals[i] / v0) / np.log(self._grid[i] / g0)
            out[lo] = v0 * (np.maximum(t[lo], 0.0) / g0) ** q
            out[t <= 0] = 0.0
        return out

    def _core_deriv(self, t):
        C, iota = self.C, self.iota
        d = C * (t ** iota + self.omega(t)) / t
        if self._zeta2_fn is not None:
            d = d + self._zeta2_fn[1](t)
        return d

    def _core_deriv2(self, t):
        C, iota = self.C, self.iota
        om = self.omega
        d2 = -C * (1.0 - iota) * t ** (iota - 2.0) \
            - C * (om(t) - t * om.deriv(t)) / t ** 2
        if self._zeta2_fn is not None:
            h = 1e-4
            z2p = self._zeta2_fn[1]
            d2 = d2 + (z2p(t * np.exp(h)) - z2p(t * np.exp(-h))) / (2 * h * t)
        return d2

    def deriv(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        hi = t > 1.0
        out[~hi] = self._core_deriv(np.maximum(t[~hi], 1e-300))
        out[hi] = self._ext_d(t[hi], 1)
        return out

    def deriv2(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        hi = t > 1.0
        out[~hi] = self._core_deriv2(np.maximum(t[~hi], 1e-300))
        out[hi] = self._ext_d(t[hi], 2)
        return out

    def deriv3(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        hi = t > 1.0
        h = 1e-3
        tl = t[~hi]
        out[~hi] = (self._core_deriv2(tl * np.exp(h))
                    - self._core_deriv2(tl * np.exp(-h))) / (2 * h * tl)
        out[hi] = self._ext_d(t[hi], 3)
        return out

    __call__ = value

    # -- coupling and threshold ------------------------------------------

    def coupling_margin(self, t):
        """t zeta'(t) - C (t^s + omega(t) [+ gamma-driven term])."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        need = self.C * (t ** self.s + self.omega(t))
        if self.variant == "without_pub":
            g = np.minimum(self.gamma(t), self._gamma_cap)
            need = need + self.C * _profile_term(g, self.s)
        return t * self.deriv(t) - need

    def _compute_t0(self):
        g = self._grid[(self._grid >= self._grid[0] * 10) & (self._grid <= 0.9)]
        # Z3: zeta/t^iota nonincreasing, checked by discrete slope
        q = self.value(g) / g ** self.iota
        ok_z3 = np.diff(q) <= 1e-10 * q[:-1]
        ok_cpl = self.coupling_margin(g) >= -1e-10 * self.value(g)
        ok = ok_z3 & ok_cpl[:-1]
        if self.variant == "without_pub" and self.t1 is not None:
            ok = ok & (g[:-1] <= self.t1)
        bad = np.nonzero(~ok)[0]
        t0 = g[bad[0]] if len(bad) else g[-1]
        if len(bad) and bad[0] == 0 and self.t1 is not None:
            # conditions fail already at the grid floor: fall back to the
            # gamma threshold, below which they hold asymptotically
            t0 = min(self.t1, g[0])
        return float(min(t0, 0.9))


def _profile_term(x, s):
    """(x^(2s) - x)/(1 - 2s), with the log limit at s = 1/2."""
    x = np.asarray(x, dtype=float)
    if abs(1.0 - 2.0 * s) < _LOG_BRANCH_TOL:
        return x * np.log(1.0 / np.maximum(x, 1e-300))
    return (x ** (2.0 * s) - x) / (1.0 - 2.0 * s)


def _require_upgraded(omega: Modulus):
    if not omega.upgraded:
        raise ValueError("profile construction needs an upgraded modulus")


def build_zeta_pub(omega: Modulus, iota: float, C: float, s: float) -> ZetaProfile:
    """Profile for operators whose Levy measure has a bounded density."""
    _require_upgraded(omega)
    if not 0 < iota < min(s, 1.0 / 3.0):
        raise ValueError("iota must be in (0, min(s, 1/3))")
    tail0 = _deep_tail(omega.eval_u, -np.log(TGRID[0]))
    W = _cumulative(TGRID, omega, tail0)
    return ZetaProfile(s, iota, C, omega, "with_pub", W)


def a_s_threshold(s: float, iota: float) -> float:
    """Largest argument where x -> (x^(2s)-x)/(1-2s) is still monotone
    enough for the construction; branch depends on the side of 1/2."""
    if abs(1.0 - 2.0 * s) < _LOG_BRANCH_TOL:
        return 1.0 / np.e
    e = 1.0 / (1.0 - 2.0 * s)
    if s > 0.5:
        return float(min((1.0 - iota) ** e, (2.0 * s) ** e))
    return float(min(((1.0 - 2.0 * s * iota) / (1.0 - iota)) ** e,
                     (2.0 * s) ** e))


def build_zeta_nopub(omega: Modulus, s: float, iota: float, C: float) -> ZetaProfile:
    """Profile for operators without a density bound; needs the 2s-Dini
    class.  Adds the gamma-driven integral term to the pub profile."""
    _require_upgraded(omega)
    if not 0 < iota < min(s, 1.0 / 3.0):
        raise ValueError("iota must be in (0, min(s, 1/3))")

    def h_fn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        p = t > 0
        if np.any(p):
            out[p] = omega(_f_inverse_raw(omega, t[p]))
        return out

    a_s = a_s_threshold(s, iota)
    cap_target = min(a_s, 1.0 / np.e)

    # gamma decays very slowly, so the scale where it drops below the cap
    # can sit far beneath the shared grid; deepen the resolved floor of the
    # upgrade until the threshold search succeeds.  h itself is smooth and
    # slowly varying in log t, so a per-floor tabulation replaces the
    # expensive inverse solve inside the upgrade pipeline.
    t1 = None
    for floor in (TGRID[0], 1e-34, 1e-50):
        d_lo = floor * 1e-4
        hgrid = np.geomspace(d_lo, 1e2, 64 * int(np.ceil(np.log10(1e2 / d_lo))))
        h = Modulus.table(hgrid, h_fn(hgrid))
        gamma = upgrade_modulus(h, iota, mode="dini", t_floor=floor)
        search = np.geomspace(floor * 10.0, 10.0, 4096)
        below = np.nonzero(gamma(search) <= cap_target)[0]
        if len(below):
            t1 = float(search[below[-1]])
            break
    if t1 is None:
        raise ValueError("no resolvable scale satisfies the gamma threshold")
    cap = float(gamma(np.array([t1]))[0])

    # evaluation grid reaching below t1 so the profile resolves the region
    # where the gamma term is active
    g_lo = min(TGRID[0], t1 * 1e-3)
    n_dec = int(np.ceil(np.log10(10.0 / g_lo)))
    egrid = np.geomspace(g_lo, 10.0, 64 * n_dec + 1)

    def g2(r):
        g = np.minimum(gamma(r), cap)
        return C * _profile_term(g, s)

    tail0_1 = _deep_tail(omega.eval_u, -np.log(g_lo))
    W = _cumulative(egrid, omega, tail0_1)

    def g2_u(u):
        g = np.minimum(gamma.eval_u(u), cap)
        return C * _profile_term(g, s)

    tail0_2 = _deep_tail(g2_u, -np.log(g_lo))
    W2 = _cumulative(egrid, g2, tail0_2)
    z2interp = PchipInterpolator(np.log(egrid), W2)

    def z2val(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        lo = t < g_lo
        out[~lo] = z2interp(np.log(np.minimum(np.maximum(t[~lo], g_lo), 1e30)))
        out[lo] = W2[0] * (np.maximum(t[lo], 0.0) / g_lo) ** (s * iota)
        # beyond the grid the integrand is constant/r; extend logarithmically
        hi = t > egrid[-1]
        if np.any(hi):
            out[hi] = W2[-1] + g2(np.array([egrid[-1]]))[0] * np.log(t[hi] / egrid[-1])
        return out

    def z2deriv(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return g2(t) / t

    return ZetaProfile(s, iota, C, omega, "without_pub", W,
                       zeta2_fn=(z2val, z2deriv), gamma=gamma, t1=t1,
                       a_s=a_s, gamma_cap=cap, grid=egrid)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_zeta(zeta: ZetaProfile, s: float | None = None,
               grid: np.ndarray | None = None) -> dict:
    """Property report: Z0 positivity/monotone/concave, Z1 third-derivative
    bound with fitted c1, Z2 monotone t zeta', Z3 on (0, t0], Z4 growth with
    fitted c2, splice smoothness, extension margin, and coupling."""
    s = zeta.s if s is None else s
    g = np.geomspace(1e-8, 2.0, 1200) if grid is None else np.asarray(grid, float)
    rep = {}
    v = zeta.value(g)
    rep["Z0_positive"] = {"ok": bool(np.all(v[g > 0] > 0)),
                          "worst_margin": float(v.min())}
    dv = np.diff(v)
    rep["Z0_increasing"] = {"ok": bool(np.all(dv > -1e-12 * v[:-1])),
                            "worst_margin": float(dv.min())}
    lam = (g[2:] - g[1:-1]) / (g[2:] - g[:-2])
    chord = lam * v[:-2] + (1.0 - lam) * v[2:]
    cm = (v[1:-1] - chord) / v[1:-1]
    rep["Z0_concave"] = {"ok": bool(cm.min() >= -1e-8),
                         "worst_margin": float(cm.min()),
                         "at": float(g[1 + int(np.argmin(cm))])}

    mask = (np.abs(g - 1.0) > 0.02)
    gg = g[mask]
    z1_ratio = -gg ** 2 * zeta.deriv3(gg) / zeta.deriv(gg)
    c1 = float(np.max(z1_ratio))
    rep["Z1"] = {"ok": bool(np.isfinite(c1)), "c1": c1,
                 "at": float(gg[int(np.argmax(z1_ratio))])}

    tz = g * zeta.deriv(g)
    dtz = np.diff(tz)
    rep["Z2"] = {"ok": bool(np.all(dtz >= -1e-9 * np.abs(tz[:-1]))),
                 "worst_margin": float(dtz.min())}

    g3 = g[(g <= zeta.t0)]
    q = zeta.value(g3) / g3 ** zeta.iota
    dq = np.diff(q)
    rep["Z3"] = {"ok": bool(np.all(dq <= 1e-9 * q[:-1])),
                 "worst_margin": float(-dq.max()) if len(dq) else 0.0}

    gt = np.geomspace(1e-4, 1e3, 400)
    c2 = float(np.max(zeta.value(gt) / (1.0 + gt) ** (s / 2.0)))
    rep["Z4"] = {"ok": bool(np.isfinite(c2)), "c2": c2}

    # splice smoothness: one-sided limits at t=1
    eps = 1e-7
    pairs = []
    for f in (zeta.value, zeta.deriv, zeta.deriv2):
        l, r = float(f(np.array([1.0 - eps]))[0]), float(f(np.array([1.0 + eps]))[0])
        pairs.append((l, r))
    worst = max(abs(l - r) / max(abs(l), abs(r), 1e-300) for l, r in pairs)
    rep["splice"] = {"ok": bool(worst < 1e-4), "worst_rel_jump": worst,
                     "limits": pairs}

    ge = g[g > 1.0]
    if len(ge):
        ext_margin = (ge - 1.0 + zeta._shift) - (1.0 - s / 2.0) * ge
        rep["extension_margin"] = {"ok": bool(ext_margin.min() >= -1e-10),
                                   "worst_margin": float(ext_margin.min())}
    cp = zeta.coupling_margin(g[g <= zeta.t0])
    rep["coupling"] = {"ok": bool(np.all(cp >= -1e-9 * zeta.value(g[g <= zeta.t0]))),
                       "worst_margin": float(cp.min()) if len(cp) else 0.0}
    rep["ok"] = all(d["ok"] for d in rep.values() if isinstance(d, dict))
    return rep


def touching_function_params(zeta: ZetaProfile, s: float, t: float):
    """Parameters (a, kappa) of the power barrier kappa (r-a)_+^s touching
    r_+^s zeta(tr)/zeta(t) at r=1 from below."""
    if not 0 < t < zeta.t0:
        raise ValueError(f"t must be in (0, t0={zeta.t0})")
    z = float(zeta.value(np.array([t]))[0])
    zp = float(zeta.deriv(np.array([t]))[0])
    a = t * zp / (s * z + t * zp)
    kappa = (1.0 + t * zp / (s * z)) ** s
    return a, kappa


def touching_gap(zeta: ZetaProfile, s: float, t: float, r_grid):
    """Gap f_t - g on the given r grid plus the quadratic lower-bound ratio
    just right of the touching point."""
    r = np.asarray(r_grid, dtype=float)
    a, kappa = touching_function_params(zeta, s, t)
    z = float(zeta.value(np.array([t]))[0])
    f = np.where(r > 0, np.maximum(r, 0.0) ** s * zeta.value(t * np.maximum(r, 0.0)) / z, 0.0)
    gfun = kappa * np.maximum(r - a, 0.0) ** s
    gap = f - gfun
    zp = float(zeta.deriv(np.array([t]))[0])
    scale = (t * zp / z)
    near = (r > 1.0) & (r <= 1.1)
    ratio = gap[near] / (scale * (1.0 - r[near]) ** 2) if np.any(near) else np.array([])
    return {"r": r, "gap": gap, "a": a, "kappa": kappa,
            "claimB_ratio_inf": float(ratio.min()) if len(ratio) else np.nan,
            "constraint_residual": float(abs(kappa * (1.0 - a) ** s - 1.0))}
