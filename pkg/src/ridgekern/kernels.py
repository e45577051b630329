"""Base kernels, ridge atoms, lifted kernels, Gram matrices and eps-nets.

A base kernel ``K(s, t)`` is a bounded (``|K| <= 1``) positive definite
kernel on the real line. A ridge atom is ``psi_z(x) = K(<a, x> + b, t)`` and
the lifted kernel averages products of atoms against a parameter measure::

    K_rho(x, y) = int psi_z(x) psi_z(y) d rho(z)
"""
import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import _backend
from ._pykernels import _eval
from .errors import DomainError, EigensolverError
from .measures import Estimate, ParamMeasure, quadrature_rule, sample_params

FAMILIES = ("gaussian", "laplace", "cosine", "polynomial_slice")
_CODES = {name: i for i, name in enumerate(FAMILIES)}

# node chunk for lifted Gram accumulation
_GRAM_CHUNK = 8192


@dataclass(frozen=True)
class BaseKernel:
    """A named one-dimensional kernel with ``|K(s, t)| <= 1`` on its domain.

    Parameters by family: ``gaussian`` (``sigma``), ``laplace`` (``scale``),
    ``cosine`` (``freq``), ``polynomial_slice`` (``degree``, ``scale``,
    ``bound``). The polynomial slice is normalized by ``(1 + B^2/r^2)^m`` and
    is only defined for ``|s|, |t| <= B``.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = dict(self.params)
        if self.family == "gaussian":
            _require(p, {"sigma"}, positive=("sigma",))
        elif self.family == "laplace":
            _require(p, {"scale"}, positive=("scale",))
        elif self.family == "cosine":
            _require(p, {"freq"})
            if p["freq"] < 0:
                raise ValueError("cosine freq must be >= 0")
        elif self.family == "polynomial_slice":
            _require(p, {"degree", "scale", "bound"}, positive=("scale", "bound"))
            if p["degree"] != int(p["degree"]) or p["degree"] < 0:
                raise ValueError("polynomial degree must be a nonnegative integer")
            p["degree"] = int(p["degree"])
        else:
            raise ValueError(f"unknown base kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "params", p)

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    @classmethod
    def gaussian(cls, sigma=1.0):
        return cls("gaussian", {"sigma": float(sigma)})

    @classmethod
    def laplace(cls, scale=1.0):
        return cls("laplace", {"scale": float(scale)})

    @classmethod
    def cosine(cls, freq=1.0):
        return cls("cosine", {"freq": float(freq)})

    @classmethod
    def polynomial_slice(cls, degree=2, scale=1.0, bound=2.0):
        return cls("polynomial_slice", {"degree": degree, "scale": float(scale), "bound": float(bound)})

    @cached_property
    def packed(self):
        """``(family_code, params[4])`` as consumed by the kernel loops."""
        p = self.params
        vec = np.zeros(4)
        if self.family == "gaussian":
            vec[0] = 1.0 / (2.0 * p["sigma"] ** 2)
        elif self.family == "laplace":
            vec[0] = 1.0 / p["scale"]
        elif self.family == "cosine":
            vec[0] = p["freq"]
        else:
            r2 = p["scale"] ** 2
            vec[:] = (p["degree"], 1.0 / r2, p["bound"], 1.0 / (1.0 + p["bound"] ** 2 / r2))
        vec.setflags(write=False)
        return _CODES[self.family], vec

    @property
    def domain_bound(self):
        return self.params["bound"] if self.family == "polynomial_slice" else math.inf

    @property
    def lipschitz(self):
        """Lipschitz constant of ``s -> K(s, t)``, uniform in ``t`` (on the domain)."""
        p = self.params
        if self.family == "gaussian":
            return 1.0 / (p["sigma"] * math.sqrt(math.e))
        if self.family == "laplace":
            return 1.0 / p["scale"]
        if self.family == "cosine":
            return p["freq"]
        m, r, B = p["degree"], p["scale"], p["bound"]
        return m * B / (r * r + B * B) if m else 0.0

    @property
    def is_polynomial_slice(self):
        return self.family == "polynomial_slice"

    def __call__(self, s, t):
        """Vectorized evaluation; raises :class:`DomainError` off the domain."""
        s = np.asarray(s, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        code, p = self.packed
        S, T = np.broadcast_arrays(s, t)
        out, bad = _eval(code, p, S, T)
        if bad:
            raise DomainError(f"{self.family} kernel evaluated outside |s|,|t| <= {self.domain_bound}")
        return out

    def to_record(self):
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_record(cls, rec):
        rec = dict(rec)
        family = rec.pop("family", None)
        params = rec.pop("params", {})
        if rec:
            raise ValueError(f"unknown kernel fields {sorted(rec)}")
        if not isinstance(params, dict):
            raise ValueError("kernel params must be a mapping")
        return cls(family, {k: float(v) for k, v in params.items()})


def _require(p, names, positive=()):
    if set(p) != names:
        raise ValueError(f"expected parameters {sorted(names)}, got {sorted(p)}")
    for k in names:
        v = p[k] = float(p[k])
        if not math.isfinite(v):
            raise ValueError(f"parameter {k} must be finite")
    for k in positive:
        if not p[k] > 0:
            raise ValueError(f"parameter {k} must be > 0")


def eval_base_kernel(desc, s, t):
    """Scalar ``K(s, t)``."""
    s, t = float(s), float(t)
    if not (math.isfinite(s) and math.isfinite(t)):
        raise ValueError("kernel arguments must be finite")
    return float(desc(s, t))


# --------------------------------------------------------------------------
# ridge atoms and feature matrices


def _points(X, d=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {X.shape}")
    if d is not None and X.shape[1] != d:
        raise ValueError(f"dimension mismatch: points have d={X.shape[1]}, parameters d={d}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    return X


def ridge_features(desc, params, X):
    """``Phi[j, i] = K(<a_i, x_j> + b_i, t_i)`` for a batch of parameters."""
    X = _points(X, params.d)
    code, p = desc.packed
    Phi, bad = _backend.ridge_features(code, p, params.A, params.b, params.t, X)
    if bad:
        raise DomainError(f"{bad} ridge evaluations outside |s|,|t| <= {desc.domain_bound}")
    if not np.all(np.isfinite(Phi)):
        raise ValueError("non-finite kernel value")
    return Phi


def ridge_apply(desc, params, X, weights):
    """``y[j] = sum_i w_i K(<a_i, x_j> + b_i, t_i)`` without forming ``Phi``."""
    X = _points(X, params.d)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape != (len(params),):
        raise ValueError("need one weight per parameter")
    code, p = desc.packed
    y, bad = _backend.ridge_apply(code, p, params.A, params.b, params.t, X, w)
    if bad:
        raise DomainError(f"{bad} ridge evaluations outside |s|,|t| <= {desc.domain_bound}")
    return y


def eval_ridge_atom(desc, z, x):
    """``psi_z(x) = K(<a, x> + b, t)``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != z.d:
        raise ValueError(f"dimension mismatch: x has {x.shape[0]} entries, a has {z.d}")
    return eval_base_kernel(desc, float(z.a @ x) + z.b, z.t)


# --------------------------------------------------------------------------
# lifted kernel


def lifted_kernel_mc_estimate(desc, rho, x, y, n_samples, seed):
    """Monte Carlo ``K_rho(x, y)`` with its standard error."""
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    z = sample_params(rho, n_samples, seed)
    Phi = ridge_features(desc, z, np.vstack([np.ravel(x), np.ravel(y)]))
    prod = Phi[0] * Phi[1]
    value = rho.total_mass * float(np.mean(prod))
    se = rho.total_mass * float(np.std(prod, ddof=1)) / math.sqrt(n_samples) if n_samples > 1 else math.inf
    if not math.isfinite(value):
        raise ValueError("non-finite lifted kernel estimate")
    return Estimate(value, se)


def eval_lifted_kernel_mc(desc, rho, x, y, n_samples, seed):
    """``|rho|`` times the sample mean of ``psi_z(x) psi_z(y)`` over ``z ~ rho/|rho|``."""
    return lifted_kernel_mc_estimate(desc, rho, x, y, n_samples, seed).value


def eval_lifted_kernel_quadrature(desc, rho, x, y, nodes_per_axis):
    """Deterministic ``K_rho(x, y)`` on the midpoint rule of ``rho`` (exact for atomic ``rho``)."""
    nodes, w = quadrature_rule(rho, nodes_per_axis)
    Phi = ridge_features(desc, nodes, np.vstack([np.ravel(x), np.ravel(y)]))
    return float(np.sum(w * Phi[0] * Phi[1]))


def lifted_kernel_quadrature_estimate(desc, rho, x, y, nodes_per_axis):
    """Quadrature value with the refinement error ``|Q(n) - Q(n // 2)|``."""
    n = int(nodes_per_axis)
    value = eval_lifted_kernel_quadrature(desc, rho, x, y, n)
    if rho.family == "atomic":
        return Estimate(value, 0.0)
    coarse = eval_lifted_kernel_quadrature(desc, rho, x, y, max(2, n // 2))
    return Estimate(value, abs(value - coarse))


class LiftedKernel:
    """Callable ``K_rho(x, y)`` backed by a cached quadrature rule (or atoms)."""

    def __init__(self, desc, rho, nodes_per_axis=16):
        self.desc = desc
        self.rho = rho
        self.nodes, self.weights = quadrature_rule(rho, nodes_per_axis)

    def __call__(self, x, y):
        Phi = ridge_features(self.desc, self.nodes, np.vstack([np.ravel(x), np.ravel(y)]))
        return float(np.sum(self.weights * Phi[0] * Phi[1]))

    def gram(self, X):
        return weighted_feature_gram(self.desc, self.nodes, self.weights, X)


def weighted_feature_gram(desc, params, weights, X):
    """``G = Phi diag(w) Phi^T`` accumulated over parameter chunks."""
    X = _points(X, params.d)
    G = np.zeros((X.shape[0], X.shape[0]))
    for lo in range(0, len(params), _GRAM_CHUNK):
        Phi = ridge_features(desc, params[lo:lo + _GRAM_CHUNK], X)
        G += (Phi * weights[lo:lo + _GRAM_CHUNK]) @ Phi.T
    return GramMatrix.from_array(X, G)


# --------------------------------------------------------------------------
# Gram matrices and PSD diagnostics


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """A symmetric kernel matrix on ``points``; exact mirror symmetry."""

    points: np.ndarray
    entries: np.ndarray

    @classmethod
    def from_array(cls, points, G):
        """Copy the upper triangle of ``G`` onto the lower one."""
        G = np.array(G, dtype=np.float64)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError("Gram matrix must be square")
        iu = np.triu_indices(G.shape[0], 1)
        G.T[iu] = G[iu]
        return cls(np.asarray(points), G)

    @property
    def n(self):
        return self.entries.shape[0]

    @cached_property
    def eigenvalues(self):
        if not np.all(np.isfinite(self.entries)):
            raise EigensolverError("Gram matrix has non-finite entries")
        try:
            return np.linalg.eigvalsh(self.entries)
        except np.linalg.LinAlgError as exc:
            raise EigensolverError(f"symmetric eigensolver failed: {exc}") from exc

    @property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])

    def to_csv(self, path):
        """Row-major CSV; the header row holds the point indices."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(range(self.n))
            for row in self.entries:
                w.writerow(repr(float(v)) for v in row)


def assemble_gram(kernel_eval, points):
    """Evaluate ``kernel_eval(x_i, x_j)`` for ``i <= j`` and mirror."""
    pts = [np.asarray(p, dtype=np.float64).reshape(-1) for p in points]
    if len({p.shape for p in pts}) > 1:
        raise ValueError("all points must have equal dimension")
    n = len(pts)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            v = float(kernel_eval(pts[i], pts[j]))
            if not math.isfinite(v):
                raise ValueError(f"non-finite kernel value at ({i}, {j})")
            G[i, j] = G[j, i] = v
    return GramMatrix(np.array(pts), G)


class PSDResult(NamedTuple):
    psd: bool
    min_eigenvalue: float
    tol: float


def default_psd_tol(g):
    """``1e-8 * n * max diagonal``: eigensolver round-off grows with ``n``."""
    diag = np.abs(np.diag(g.entries))
    return 1e-8 * g.n * float(diag.max()) if g.n else 0.0


def psd_check(g, tol=None):
    """``psd = (lambda_min >= -tol)``; eigensolver failure raises :class:`EigensolverError`."""
    if tol is None:
        tol = default_psd_tol(g)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    lam = g.min_eigenvalue
    return PSDResult(lam >= -tol, lam, tol)


# --------------------------------------------------------------------------
# covering


@dataclass(frozen=True, eq=False)
class EpsNet:
    epsilon: float
    centers: np.ndarray
    covered_radius: float
    nearest_distance: np.ndarray = field(repr=False, default=None)

    @property
    def size(self):
        return int(self.centers.shape[0])


def greedy_eps_net(cloud, epsilon):
    """Farthest-point greedy net: centers are added at the point farthest from
    the current centers until every point is within ``epsilon``.

    The center count upper-bounds the covering number of the cloud and is at
    most the packing number at scale ``epsilon``.
    """
    P = _points(cloud)
    if P.shape[0] == 0:
        raise ValueError("cloud must be nonempty")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    centers, dist = _backend.farthest_point_net(P, float(epsilon))
    return EpsNet(float(epsilon), centers, float(dist.max()), dist)


def volumetric_covering_bound(d, D, epsilon, s_const=2.0):
    """``(s_const * D / epsilon) ** d``; raises OverflowError past float range."""
    if not (d >= 1 and D > 0 and epsilon > 0 and s_const > 0):
        raise ValueError("all arguments must be positive")
    return math.pow(s_const * D / epsilon, int(d))


# --------------------------------------------------------------------------
# RKHS norms for atomic measures


def default_grid(d, per_axis=25, n_random=2000, seed=0, radius=1.0):
    """Tensor grid on ``[-r, r]^d`` for ``d <= 2``, random points otherwise."""
    if d <= 2:
        ax = np.linspace(-radius, radius, per_axis)
        return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return np.random.default_rng(seed).uniform(-radius, radius, size=(n_random, d))


def rkhs_norm_atomic(desc, atoms, target_coeffs, grid=None, rcond=1e-10, full_output=False):
    """RKHS norm of ``f = sum_j c_j w_j psi_{z_j}`` for the atomic measure
    ``sum_j w_j delta_{z_j}``.

    The norm is the least weighted norm ``(sum_j c~_j^2 w_j)^(1/2)`` over all
    coefficient vectors reproducing ``f`` on ``grid``, found as the
    minimum-norm solution of the grid system.

    Parameters
    ----------
    atoms : ParamMeasure (atomic) or sequence of ``(RidgeParam, weight)``
    target_coeffs : (m,) array_like
    grid : (g, d) array_like, optional
        Evaluation points; defaults to :func:`default_grid`.
    full_output : bool
        Also return ``{"rank", "grid_residual", "coeffs"}``.
    """
    if not isinstance(atoms, ParamMeasure):
        pairs = list(atoms)
        atoms = ParamMeasure.atomic([p for p, _ in pairs], [w for _, w in pairs])
    if atoms.family != "atomic":
        raise ValueError("rkhs_norm_atomic needs an atomic measure")
    params, w = atoms.atoms, np.asarray(atoms.weights)
    c = np.asarray(target_coeffs, dtype=np.float64).reshape(-1)
    if c.shape[0] != len(params):
        raise ValueError("need one coefficient per atom")
    X = default_grid(params.d) if grid is None else _points(grid, params.d)
    distinct = np.unique(params.coords(), axis=0).shape[0]
    if X.shape[0] < distinct:
        raise ValueError(f"grid of {X.shape[0]} points cannot distinguish {distinct} atoms")
    Phi = ridge_features(desc, params, X)
    sw = np.sqrt(w)
    B = Phi * sw
    f = Phi @ (c * w)
    u, _, rank, _ = np.linalg.lstsq(B, f, rcond=rcond)
    norm = float(np.linalg.norm(u))
    if not full_output:
        return norm
    resid = float(np.max(np.abs(B @ u - f))) if X.shape[0] else 0.0
    return norm, {"rank": int(rank), "grid_residual": resid, "coeffs": u / sw}
