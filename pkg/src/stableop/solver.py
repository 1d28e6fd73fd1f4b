"""Dirichlet solver by collocation and its boundary diagnostics.

The scheme puts a uniform grid on the bounding box, classifies nodes by
exact distance (a node with d < h/2 is exterior and carries the zero
extension), and collocates the operator with a translation-invariant
stencil: the graded radial quadrature of the kernel is scattered onto
integer grid offsets through multilinear interpolation weights, so each
matrix row is a principal-value quadrature of the operator applied to
the piecewise-multilinear nodal extension.  The resulting rows have the
M-matrix sign pattern (positive diagonal, nonpositive off-diagonal) and
annihilate constants, which is what the comparison-based diagnostics
(decay rate, Hopf margin, sup bound, s to 1 limit) rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import Domain
from .measure import OperatorSpec, limit_matrix

__all__ = [
    "GridFunction",
    "Discretization",
    "SolveResult",
    "discretize",
    "solve_dirichlet",
    "linfty_check",
    "boundary_rate_fit",
    "hopf_margin",
    "s1_limit_compare",
    "upper_barrier_comparison",
]


@dataclass
class GridFunction:
    """Nodal values on a uniform grid with implicit zero extension."""

    domain: Domain
    h: float
    axes: tuple
    values: np.ndarray          # full grid, flattened C-order
    interior: np.ndarray        # boolean mask, flattened

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def __call__(self, pts) -> np.ndarray:
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator(
            self.axes, self.values.reshape(self.shape),
            bounds_error=False, fill_value=0.0)
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, len(self.axes))
        return interp(pts)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class Discretization:
    spec: OperatorSpec
    domain: Domain
    h: float
    axes: tuple
    interior: np.ndarray         # flat boolean mask
    matrix: np.ndarray           # dense, interior x interior
    stencil_offsets: np.ndarray  # (K, d) integer offsets
    stencil_weights: np.ndarray
    diag_weight: float
    mmatrix_ok: bool
    constant_defect: float       # stencil sum minus the analytic tail row

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class SolveResult:
    u: GridFunction
    disc: Discretization
    residual: float
    f_values: np.ndarray
    positivity_ok: bool
    n_interior: int
    diagnostics: dict = field(default_factory=dict)


def _grid_axes(D: Domain, h: float):
    lo, hi = D.bounding_box
    axes = []
    for k in range(D.d):
        n = int(np.round((hi[k] - lo[k]) / h))
        axes.append(lo[k] + h * np.arange(n + 1))
    return tuple(axes)


def _build_stencil(spec: OperatorSpec, h: float, box_diag: float,
                   angular_n: int = 64, ratio: float = 1.05,
                   gauss_n: int = 4, r_big_factor: float = 4.0):
    """Aggregate the radial quadrature into integer grid offsets.

    Returns (offsets, weights, diag) where diag collects the 2u(x)
    contribution including the analytic far tail, and each offset weight
    is the negative interpolation mass it receives.
    """
    s = spec.s
    d = spec.measure.d
    dirs, dir_wts = spec.measure.quadrature_pairs(angular_n)
    r_big = r_big_factor * box_diag

    gx, gw = np.polynomial.legendre.leggauss(gauss_n)
    gx, gw = 0.5 * (gx + 1.0), 0.5 * gw
    n_cells = max(int(np.ceil(np.log(r_big / h) / np.log(ratio))), 1)
    edges = np.log(h) + (np.log(r_big) - np.log(h)) \
        * np.linspace(0.0, 1.0, n_cells + 1)
    va, vb = edges[:-1], edges[1:]
    nodes_v = (va[:, None] + (vb - va)[:, None] * gx[None, :]).ravel()
    wts_v = ((vb - va)[:, None] * gw[None, :]).ravel()
    r = np.exp(nodes_v)
    base_w = (1.0 - s) * wts_v * r ** (-2.0 * s)

    diag = 0.0
    dropped = 0.0          # u == 1 mass carried by offsets beyond the box
    all_off = []
    all_wt = []
    for theta, w in zip(dirs, dir_wts):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        w = float(w)
        wq = w * base_w
        diag += 2.0 * float(wq.sum())
        # quadratic core on (0, h): delta(r) ~ delta(h) (r/h)^2
        core = (1.0 - s) * w * h ** (-2.0 * s) / (2.0 - 2.0 * s)
        diag += 2.0 * core
        # analytic far tail of the 2u(x) term
        far = (1.0 - s) * w * 2.0 * r_big ** (-2.0 * s) / (2.0 * s)
        diag += far

        near = r <= box_diag
        dropped += 2.0 * float(wq[~near].sum()) + far
        rr = np.concatenate([r[near], [h]])
        ww = np.concatenate([wq[near], [core]])
        y = rr[:, None] * theta[None, :] / h
        base = np.floor(y).astype(np.int64)
        frac = y - base
        for corner in range(1 << d):
            bits = np.array([(corner >> k) & 1 for k in range(d)])
            cw = np.prod(np.where(bits[None, :] == 1, frac, 1.0 - frac),
                         axis=1)
            off = base + bits[None, :]
            for sign in (1, -1):
                all_off.append(sign * off)
                all_wt.append(-ww * cw)
    offs = np.concatenate(all_off, axis=0)
    wts = np.concatenate(all_wt)
    # merge duplicate integer offsets
    span = int(np.abs(offs).max()) + 1
    key = offs[:, 0] + span
    for k in range(1, d):
        key = key * (2 * span + 1) + (offs[:, k] + span)
    uk, inv = np.unique(key, return_inverse=True)
    merged = np.bincount(inv, weights=wts)
    uoff = np.empty((len(uk), d), dtype=np.int64)
    rem = uk.copy()
    for k in range(d - 1, -1, -1):
        if k == 0:
            uoff[:, 0] = rem - span
        else:
            uoff[:, k] = rem % (2 * span + 1) - span
            rem = rem // (2 * span + 1)
    keep = merged != 0.0
    uoff, merged = uoff[keep], merged[keep]
    # the center may have picked up interpolation mass; fold it into diag
    center = np.all(uoff == 0, axis=1)
    diag += float(merged[center].sum()) if center.any() else 0.0
    return uoff[~center], merged[~center], float(diag), float(dropped)


def discretize(spec: OperatorSpec, D: Domain, h: float,
               angular_n: int = 64) -> Discretization:
    if spec.measure.d != D.d:
        raise ValueError("measure dimension does not match the domain")
    axes = _grid_axes(D, h)
    shape = tuple(len(a) for a in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    dist = D.distance(pts)
    interior = dist >= h / 2.0
    n_int = int(interior.sum())
    min_req = 64 if D.d == 1 else 32 ** 2
    if n_int < min_req:
        raise ValueError(f"grid too coarse: {n_int} interior nodes")
    cap = 4096 if D.d == 1 else 96 ** 2
    if n_int > cap:
        raise ValueError(f"grid beyond the dense-solve cap: {n_int} nodes")

    lo, hi = D.bounding_box
    box_diag = float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))
    offs, wts, diag, dropped = _build_stencil(spec, h, box_diag,
                                              angular_n=angular_n)

    mmatrix_ok = diag > 0 and bool((wts <= 1e-12 * diag).all())
    # a constant over all space is annihilated: the stencil row sum must
    # equal the mass that offsets beyond the box carry on the diagonal
    constant_defect = float(abs(diag + wts.sum() - dropped) / diag)

    # interior lookup table over the full grid
    idx_of = -np.ones(len(pts), dtype=np.int64)
    idx_of[interior] = np.arange(n_int)
    multi = np.stack(np.unravel_index(np.nonzero(interior)[0], shape), axis=1)

    A = np.zeros((n_int, n_int))
    A[np.arange(n_int), np.arange(n_int)] = diag
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(D.d)],
                       dtype=np.int64)
    for o, w in zip(offs, wts):
        tgt = multi + o[None, :]
        ok = np.all((tgt >= 0) & (tgt < np.array(shape)[None, :]), axis=1)
        if not ok.any():
            continue
        flat = (tgt[ok] * strides[None, :]).sum(axis=1)
        col = idx_of[flat]
        good = col >= 0
        rows = np.nonzero(ok)[0][good]
        A[rows, col[good]] += w
    return Discretization(spec=spec, domain=D, h=h, axes=axes,
                          interior=interior, matrix=A,
                          stencil_offsets=offs, stencil_weights=wts,
                          diag_weight=diag, mmatrix_ok=mmatrix_ok,
                          constant_defect=constant_defect)


def apply_discrete(disc: Discretization, values_full: np.ndarray) -> np.ndarray:
    """Apply the full stencil (no Dirichlet restriction) to grid values."""
    shape = disc.shape
    v = values_full.reshape(shape)
    out = disc.diag_weight * v.copy()
    for o, w in zip(disc.stencil_offsets, disc.stencil_weights):
        shifted = np.zeros_like(v)
        src = tuple(slice(max(-ok, 0), v.shape[k] - max(ok, 0))
                    for k, ok in enumerate(o))
        dst = tuple(slice(max(ok, 0), v.shape[k] - max(-ok, 0))
                    for k, ok in enumerate(o))
        shifted[dst] = v[src]
        out += w * shifted
    return out.ravel()


def solve_dirichlet(spec: OperatorSpec, D: Domain, f, h: float,
                    angular_n: int = 64,
                    disc: Discretization | None = None) -> SolveResult:
    if disc is None:
        disc = discretize(spec, D, h, angular_n=angular_n)
    pts = disc.points
    if callable(f):
        fv = np.asarray(f(pts[disc.interior]), dtype=float)
    else:
        fv = float(f) * np.ones(int(disc.interior.sum()))
    if not disc.mmatrix_ok:
        raise ValueError("stencil violates the M-matrix sign pattern")
    sol = np.linalg.solve(disc.matrix, fv)
    residual = float(np.max(np.abs(disc.matrix @ sol - fv)))
    values = np.zeros(len(pts))
    values[disc.interior] = sol
    u = GridFunction(domain=D, h=disc.h, axes=disc.axes,
                     values=values, interior=disc.interior)
    pos_ok = True
    if np.all(fv >= 0):
        pos_ok = bool(sol.min() >= -1e-10 * max(abs(sol).max(), 1.0))
    return SolveResult(u=u, disc=disc, residual=residual, f_values=fv,
                       positivity_ok=pos_ok, n_interior=len(sol))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def linfty_check(result: SolveResult, D: Domain, spec: OperatorSpec,
                 C_cap: float | None = None) -> dict:
    """sup bound ||u|| <= C diam^{2s} ||f|| plus the explicit paraboloid
    super-solution check u <= lambda (R^2 - |x-c|^2)_+ nodewise."""
    s = spec.s
    fmax = float(np.max(np.abs(result.f_values)))
    umax = result.u.max_abs()
    ratio = umax / (D.diam ** (2.0 * s) * fmax) if fmax > 0 else 0.0

    lo, hi = D.bounding_box
    c = 0.5 * (np.asarray(lo) + np.asarray(hi))
    R = D.diam

    def psi(p):
        return np.maximum(R ** 2 - ((p - c[None, :]) ** 2).sum(axis=1), 0.0)

    pts = result.u.points
    psi_vals = psi(pts)
    # discrete operator applied to the paraboloid, exact off-grid values
    apsi = np.full(len(pts), np.inf)
    ii = np.nonzero(result.disc.interior)[0]
    disc = result.disc
    xin = pts[ii]
    vals = disc.diag_weight * psi(xin)
    for o, w in zip(disc.stencil_offsets, disc.stencil_weights):
        vals += w * psi(xin + disc.h * o[None, :].astype(float))
    apsi[ii] = vals
    m = float(vals.min())
    psi_ok = False
    lam = np.inf
    worst = np.inf
    if m > 0 and fmax > 0:
        lam = fmax / m
        slack = lam * psi_vals - np.abs(result.u.values)
        worst = float(slack.min())
        psi_ok = bool(worst >= -1e-10 * max(umax, 1.0))
    report = {"ratio": ratio, "umax": umax, "fmax": fmax,
              "psi_scale": lam, "psi_min_operator": m,
              "psi_ok": psi_ok, "psi_worst_slack": worst}
    if C_cap is not None:
        report["ok"] = bool(ratio <= C_cap)
    return report


def boundary_rate_fit(u: GridFunction, D: Domain,
                      d_min: float | None = None,
                      d_max: float | None = None,
                      z=None, half_angle: float = np.pi / 4,
                      direction=None) -> dict:
    """Least-squares slope of log|u| against log depth.

    With z given, restricts to the non-tangential cone at the boundary
    point z along `direction` (inward) and uses |x - z| as the depth.
    """
    if d_min is None:
        d_min = 4.0 * u.h
    if d_max is None:
        d_max = D.diam / 4.0
    pts = u.points
    vals = u.values
    if z is None:
        dd = D.distance(pts)
        sel = (dd >= d_min) & (dd <= d_max) & (np.abs(vals) > 0)
    else:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        direction = np.atleast_1d(np.asarray(direction, dtype=float))
        direction = direction / np.linalg.norm(direction)
        rel = pts - z[None, :]
        dd = np.linalg.norm(rel, axis=1)
        with np.errstate(invalid="ignore"):
            cosang = (rel @ direction) / np.maximum(dd, 1e-300)
        sel = (dd >= d_min) & (dd <= d_max) & (np.abs(vals) > 0) \
            & (cosang >= np.cos(half_angle))
    dd, vv = dd[sel], np.abs(vals[sel])
    if len(np.unique(np.round(np.log(dd), 6))) < 8:
        raise ValueError("fewer than 8 usable depths in the fit window")
    slope, logc = np.polyfit(np.log(dd), np.log(vv), 1)
    return {"slope": float(slope), "C": float(np.exp(logc)),
            "n_points": int(sel.sum()), "d_min": d_min, "d_max": d_max}


def hopf_margin(u: GridFunction, D: Domain, z, s: float, direction=None,
                half_angle: float = np.pi / 4,
                d_max: float | None = None) -> dict:
    """inf over cone nodes of u / |x - z|^s; positive for f >= 0 unless
    the solution vanishes identically."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if u.max_abs() == 0.0:
        return {"zero_solution": True, "margin": None}
    if direction is None:
        lo, hi = D.bounding_box
        c = 0.5 * (np.asarray(lo) + np.asarray(hi))
        direction = c - z
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    direction = direction / np.linalg.norm(direction)
    if d_max is None:
        d_max = D.diam / 4.0
    pts = u.points
    rel = pts - z[None, :]
    dd = np.linalg.norm(rel, axis=1)
    with np.errstate(invalid="ignore"):
        cosang = (rel @ direction) / np.maximum(dd, 1e-300)
    sel = (dd >= 2.0 * u.h) & (dd <= d_max) \
        & (cosang >= np.cos(half_angle)) & u.interior
    if not sel.any():
        raise ValueError("empty cone sample")
    q = u.values[sel] / dd[sel] ** s
    k = int(np.argmin(q))
    return {"zero_solution": False, "margin": float(q[k]),
            "location": pts[sel][k], "n_points": int(sel.sum())}


def s1_limit_compare(measure, f, D: Domain, s_list, h: float,
                     angular_n: int = 64) -> dict:
    """Solve for each s and compare with the second-order limit problem
    -A : D^2 u = f, A = limit_matrix(mu), on the same grid."""
    A = limit_matrix(measure)
    if D.d == 1:
        a11 = float(A[0, 0])
        axes = _grid_axes(D, h)
        x = axes[0]
        pts = x.reshape(-1, 1)
        interior = D.distance(pts) >= h / 2.0
        n = int(interior.sum())
        main = 2.0 * a11 / h ** 2 * np.ones(n)
        off = -a11 / h ** 2 * np.ones(n - 1)
        M = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
        fv = (float(f) * np.ones(n)) if not callable(f) \
            else np.asarray(f(pts[interior]), dtype=float)
        ulim = np.zeros(len(x))
        ulim[interior] = np.linalg.solve(M, fv)
        u_limit = GridFunction(domain=D, h=h, axes=axes,
                               values=ulim, interior=interior)
    else:
        raise ValueError("the limit comparison ships for d = 1")
    errors = {}
    slopes = {}
    for s in s_list:
        spec = OperatorSpec(s=float(s), measure=measure)
        res = solve_dirichlet(spec, D, f, h, angular_n=angular_n)
        errors[float(s)] = float(np.max(np.abs(res.u.values - u_limit.values)))
        slopes[float(s)] = boundary_rate_fit(res.u, D)["slope"]
    svals = sorted(errors)
    monotone = all(errors[svals[i + 1]] <= errors[svals[i]]
                   for i in range(len(svals) - 1))
    slopes_up = all(slopes[svals[i + 1]] >= slopes[svals[i]]
                    for i in range(len(svals) - 1))
    return {"errors": errors, "slopes": slopes, "u_limit": u_limit,
            "errors_monotone": monotone, "slopes_increasing": slopes_up}


def upper_barrier_comparison(result: SolveResult, D: Domain,
                             spec: OperatorSpec, barrier) -> dict:
    """u <= (||f|| + ||u|| / (Cl eps0^s)) b_scaled nodewise, where the
    scaled barrier has operator value >= 1 on its collar."""
    fmax = float(np.max(np.abs(result.f_values)))
    umax = result.u.max_abs()
    Cpsi = fmax + umax / (barrier.Cl * barrier.eps0 ** spec.s)
    pts = result.u.points
    bv = Cpsi * barrier.value(pts)
    slack = bv - result.u.values
    worst = float(slack.min())
    ok = bool(worst >= -1e-10 * max(umax, 1.0))
    neg_slack = bv + result.u.values
    ok_neg = bool(neg_slack.min() >= -1e-10 * max(umax, 1.0))
    return {"C_psi": Cpsi, "worst_slack": worst, "ok": ok,
            "ok_sign_flipped": ok_neg}
