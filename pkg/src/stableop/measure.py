"""Spherical measures and the data defining a 2s-stable operator.

A finite measure mu on the unit sphere, together with an order s in (0,1),
determines a Levy measure with radial weight (1-s) r^(-1-2s) and hence a
translation-invariant integro-differential operator.  This module holds the
measure representations plus the derived quantities: total mass, the
directional nondegeneracy constant, the second-order limit matrix, and the
check whether the Levy measure admits a bounded density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gamma, ndtri
from scipy.stats import qmc

__all__ = [
    "SphericalMeasure",
    "OperatorSpec",
    "total_mass",
    "nondegeneracy_constant",
    "limit_matrix",
    "pub_bound_check",
    "measure_from_json",
]


def _unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero direction vector")
    return v / n


def sphere_surface_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (two points for d=1)."""
    if d == 1:
        return 2.0
    return 2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0)


@dataclass(frozen=True)
class SphericalMeasure:
    """Finite measure on S^(d-1).

    variant is one of "uniform", "atoms", "density".  For d=1 the sphere is
    the two-point set {-1, +1} and a uniform measure of mass m puts m/2 on
    each point.  Density measures carry their own angular quadrature rule
    (unit-vector nodes, positive weights, nonnegative values), so that
    integrals against the measure reduce to weighted sums over the nodes.
    """

    d: int
    variant: str
    mass: float = 0.0
    directions: np.ndarray | None = None
    weights: np.ndarray | None = None
    values: np.ndarray | None = None
    angular_n: int = 64

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.variant not in ("uniform", "atoms", "density"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "uniform":
            if self.mass <= 0:
                raise ValueError("uniform measure needs positive mass")
        else:
            dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
            w = np.asarray(self.weights, dtype=float)
            if dirs.shape[0] != w.shape[0]:
                raise ValueError("directions and weights length mismatch")
            norms = np.linalg.norm(dirs, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise ValueError("directions must be unit vectors")
            if np.any(w < 0):
                raise ValueError("weights must be nonnegative")
            object.__setattr__(self, "directions", dirs)
            object.__setattr__(self, "weights", w)
            if self.variant == "density":
                vals = np.asarray(self.values, dtype=float)
                if vals.shape[0] != w.shape[0]:
                    raise ValueError("values and nodes length mismatch")
                if np.any(vals < 0):
                    raise ValueError("density values must be nonnegative")
                object.__setattr__(self, "values", vals)

    # ---- constructors -------------------------------------------------

    @staticmethod
    def uniform(d: int, mass: float, angular_n: int = 64) -> "SphericalMeasure":
        return SphericalMeasure(d=d, variant="uniform", mass=mass, angular_n=angular_n)

    @staticmethod
    def atoms(d: int, pairs) -> "SphericalMeasure":
        dirs = np.array([_unit(np.atleast_1d(np.asarray(p[0], dtype=float)))
                         for p in pairs])
        w = np.array([float(p[1]) for p in pairs])
        return SphericalMeasure(d=d, variant="atoms", directions=dirs, weights=w)

    @staticmethod
    def axes(d: int, weight: float = 0.5) -> "SphericalMeasure":
        """Atoms of equal weight on +-e_i for every coordinate axis."""
        pairs = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            pairs.append((e.copy(), weight))
            pairs.append((-e, weight))
        return SphericalMeasure.atoms(d, pairs)

    @staticmethod
    def density(d: int, nodes, weights, values) -> "SphericalMeasure":
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        return SphericalMeasure(
            d=d, variant="density", directions=nodes,
            weights=np.asarray(weights, dtype=float),
            values=np.asarray(values, dtype=float),
        )

    # ---- quadrature view ----------------------------------------------

    def quadrature_pairs(self, angular_n: int | None = None):
        """Return (directions, weights) so that int g dmu = sum_j w_j g(theta_j).

        Uniform measures in d=2 discretize with a trapezoid rule on the
        circle (spectrally accurate for smooth integrands); d=1 is exact.
        """
        if self.variant == "atoms":
            return self.directions, self.weights
        if self.variant == "density":
            return self.directions, self.weights * self.values
        n = angular_n or self.angular_n
        if self.d == 1:
            return np.array([[1.0], [-1.0]]), np.array([self.mass / 2] * 2)
        if self.d == 2:
            ang = 2 * np.pi * (np.arange(n) + 0.5) / n
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            return dirs, np.full(n, self.mass / n)
        raise NotImplementedError("uniform quadrature implemented for d <= 2")


def total_mass(mu: SphericalMeasure) -> float:
    """mu(S^(d-1)); exact for uniform/atomic, quadrature mass for density."""
    if mu.variant == "uniform":
        return float(mu.mass)
    if mu.variant == "atoms":
        return float(np.sum(mu.weights))
    return float(np.sum(mu.weights * mu.values))


def _candidate_directions(d: int, n: int) -> np.ndarray:
    """Deterministic, nested, roughly equidistributed unit vectors."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        # golden-angle sequence: nested across resolutions
        k = np.arange(n)
        ang = 2 * np.pi * ((k * 0.6180339887498949) % 1.0)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # Sobol points through the normal inverse transform, then normalized;
    # fully deterministic (scrambling off)
    eng = qmc.Sobol(d=d, scramble=False)
    pts = eng.random(n + 1)[1:]  # drop the all-zeros point
    z = ndtri(np.clip(pts, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _directional_moment(mu: SphericalMeasure, s: float, w: np.ndarray) -> float:
    if mu.variant == "uniform":
        if mu.d == 1:
            return float(mu.mass)
        if mu.d == 2:
            # (1/2pi) int |cos|^(2s) = Gamma(s+1/2) / (sqrt(pi) Gamma(s+1)),
            # independent of the direction w, hence exactly rotation invariant
            return float(mu.mass * gamma(s + 0.5) / (np.sqrt(np.pi) * gamma(s + 1.0)))
    dirs, wt = mu.quadrature_pairs(angular_n=max(mu.angular_n, 256))
    return float(np.sum(wt * np.abs(dirs @ w) ** (2 * s)))


def nondegeneracy_constant(mu: SphericalMeasure, s: float,
                           search_resolution: int = 256) -> float:
    """Approximate inf over unit w of int |w.theta|^(2s) mu(dtheta).

    The infimum is taken over a deterministic golden-angle / low-discrepancy
    direction set of the requested resolution, then polished with a local
    Nelder-Mead pass; the result is an upper bound on the true infimum.
    """
    if not 0 < s < 1:
        raise ValueError("s must be in (0,1)")
    if search_resolution < 2:
        raise ValueError("search_resolution must be >= 2")
    cands = _candidate_directions(mu.d, search_resolution)
    # include atom directions and their orthogonals as natural candidates
    if mu.variant in ("atoms", "density") and mu.d == 2:
        extra = mu.directions @ np.array([[0.0, -1.0], [1.0, 0.0]])
        cands = np.vstack([cands, mu.directions, extra])
    vals = np.array([_directional_moment(mu, s, w) for w in cands])
    best = float(vals.min())
    if mu.d == 1:
        return best
    w0 = cands[int(vals.argmin())]

    def objective(v):
        n = np.linalg.norm(v)
        if n < 1e-12:
            return np.inf
        return _directional_moment(mu, s, v / n)

    res = minimize(objective, w0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
    return float(min(best, res.fun))


def limit_matrix(mu: SphericalMeasure) -> np.ndarray:
    """The matrix (1/2) int theta theta^T mu(dtheta) of the s->1 limit."""
    if mu.variant == "uniform" and mu.d >= 2:
        # exact by symmetry: trace mass/2, multiple of identity
        return np.eye(mu.d) * (mu.mass / (2 * mu.d))
    dirs, wt = mu.quadrature_pairs()
    return 0.5 * (dirs * wt[:, None]).T @ dirs


def pub_bound_check(mu: SphericalMeasure, s: float, lam: float):
    """Check whether the Levy measure has a density <= (1-s) lam |y|^(-d-2s).

    In d=1 every spherical measure produces an absolutely continuous Levy
    measure on the line, so the check reduces to the total weight per side.
    In d>=2 atomic measures are singular and fail outright; uniform/density
    measures compare the angular density against lam times the surface
    normalization at every node.
    """
    if mu.d == 1:
        # density on the line: (1-s)(w_+ + w_-)|y|^(-1-2s) on each side
        dirs, wt = mu.quadrature_pairs()
        side = np.sum(wt)  # symmetrized weight
        ratio = side / lam if lam > 0 else np.inf
        return ratio <= 1.0, ratio
    if mu.variant == "atoms":
        return False, np.inf
    area = sphere_surface_area(mu.d)
    if mu.variant == "uniform":
        dens = mu.mass / area
    else:
        dens = float(np.max(mu.values))
    ratio = dens / (lam * area) if lam > 0 else np.inf
    return ratio <= 1.0, ratio


@dataclass(frozen=True)
class OperatorSpec:
    """The pair (mu, s) defining the operator, with claimed bounds."""

    s: float
    measure: SphericalMeasure
    pub_flag: bool = False
    lambda_floor: float = 0.0

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must be in (0,1)")
        if self.lambda_floor < 0:
            raise ValueError("lambda_floor must be nonnegative")
        if self.pub_flag and self.measure.d >= 2 and self.measure.variant == "atoms":
            raise ValueError("atomic measures in d>=2 are singular: pub_flag invalid")
        if self.lambda_floor > 0:
            lam = nondegeneracy_constant(self.measure, self.s, 128)
            if lam < self.lambda_floor - 1e-8:
                raise ValueError(
                    f"claimed lambda floor {self.lambda_floor} exceeds "
                    f"measured nondegeneracy constant {lam}")

    @property
    def mass(self) -> float:
        return total_mass(self.measure)


def measure_from_json(obj: dict) -> SphericalMeasure:
    """Build a measure from its JSON description."""
    variant = obj.get("variant")
    d = int(obj.get("d", 1))
    if variant == "uniform":
        return SphericalMeasure.uniform(d, float(obj.get("mass", 1.0)),
                                        int(obj.get("angular_n", 64)))
    if variant == "axes":
        return SphericalMeasure.axes(d, float(obj.get("weight", 0.5)))
    if variant == "atoms":
        return SphericalMeasure.atoms(
            d, [(a["dir"], a["w"]) for a in obj["atoms"]])
    raise ValueError(f"unknown measure variant {variant!r}")
