"""Kernel synthesis from ridge atoms.

Conic kernels ``sum_j w_j psi_j(x) psi_j(x')`` with ``w_j >= 0`` are PSD by
construction. :func:`conic_from_measure` approximates a lifted kernel by
sampling atoms; :func:`nnls_fit` fits nonnegative weights to a target Gram
matrix over a fixed atom dictionary.
"""
import csv
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .kernels import GramMatrix, _points, default_grid, ridge_features, weighted_feature_gram
from .measures import sample_params


class NNLSConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class ConicKernel:
    desc: object
    params: object
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(self.params):
            raise ValueError("need one weight per atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("conic weights must be finite and nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self):
        return len(self.params)

    def __call__(self, x, y):
        Phi = ridge_features(self.desc, self.params, np.vstack([np.ravel(x), np.ravel(y)]))
        return float(np.sum(self.weights * Phi[0] * Phi[1]))

    def gram(self, X):
        return weighted_feature_gram(self.desc, self.params, self.weights, X)


def conic_from_measure(desc, rho, m, seed):
    """Finite conic approximation of ``K_rho`` with ``m`` atoms.

    Atomic measures with at most ``m`` atoms are returned exactly. Otherwise
    ``m`` i.i.d. atoms are drawn from ``rho / |rho|`` with equal weights
    ``|rho| / m``.
    """
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    if rho.family == "atomic" and len(rho.atoms) <= m:
        return ConicKernel(desc, rho.atoms, np.array(rho.weights))
    z = sample_params(rho, m, seed)
    return ConicKernel(desc, z, np.full(m, rho.total_mass / m))


def sup_grid_error(gram_a, gram_b):
    a = gram_a.entries if isinstance(gram_a, GramMatrix) else np.asarray(gram_a)
    b = gram_b.entries if isinstance(gram_b, GramMatrix) else np.asarray(gram_b)
    return float(np.max(np.abs(a - b)))


# --------------------------------------------------------------------------
# NNLS over rank-one atoms


class NNLSResult(NamedTuple):
    weights: np.ndarray
    frobenius_error: float
    sup_error: float
    iterations: int
    converged: bool
    projected_gradient: float


def _projected_gradient_norm(w, g):
    return float(np.linalg.norm(w - np.maximum(w - g, 0.0)))


def _face_solve(Q, q, w, tol, objective):
    """Solve the unconstrained problem on candidate supports of ``w``.

    Supports are ``w > r * max(w)`` for a few relative thresholds ``r``.
    Returns the best candidate that is nonnegative and stationary (KKT), or
    None.
    """
    top = float(w.max()) if w.size else 0.0
    if top <= 0:
        return None
    best, best_f = None, math.inf
    for r in (0.0, 1e-8, 1e-6, 1e-4, 1e-2):
        free = w > r * top
        sol, *_ = np.linalg.lstsq(Q[np.ix_(free, free)], q[free], rcond=None)
        if np.any(sol < 0):
            continue
        cand = np.zeros_like(w)
        cand[free] = sol
        if _projected_gradient_norm(cand, Q @ cand - q) > tol:
            continue
        f = objective(cand)
        if f < best_f:
            best, best_f = cand, f
    return best


def nnls_fit(target_gram, dictionary, desc, points, tol=1e-8, max_iter=10_000,
             polish_every=50, memory=10, warn=True):
    """Fit ``min_{w >= 0} || sum_j w_j v_j v_j^T - T ||_F``.

    ``v_j`` is atom ``j`` evaluated on ``points``. The quadratic in ``w`` has
    Hessian ``(V^T V) * (V^T V)`` (elementwise) and linear term
    ``q_j = v_j^T T v_j``, so the solve never forms the ``n^2``-row design.

    The solver is a spectral projected gradient method (Barzilai-Borwein
    steps, nonmonotone line search over the last ``memory`` objective
    values). Every ``polish_every`` iterations the current support is
    tried as the active face: if the unconstrained solve on that face is
    nonnegative and stationary it is accepted. Stopping rule: projected
    gradient norm ``<= tol * max(|q|, 1)``.

    A warning (:class:`NNLSConvergenceWarning`) reports an exhausted
    iteration budget together with the final residual; ``warn=False``
    leaves that to the caller via ``converged``.
    """
    T = target_gram.entries if isinstance(target_gram, GramMatrix) else np.asarray(target_gram, float)
    X = _points(points, dictionary.d)
    if len(dictionary) == 0:
        raise ValueError("dictionary must be nonempty")
    if T.shape != (X.shape[0], X.shape[0]):
        raise ValueError("target Gram does not match the number of points")
    V = ridge_features(desc, dictionary, X)
    VtV = V.T @ V
    Q = VtV * VtV
    q = np.einsum("ij,ij->j", V, T @ V)
    half_tt = 0.5 * float(np.sum(T * T))
    stop = tol * max(float(np.linalg.norm(q)), 1.0)

    def objective(w):
        return 0.5 * float(w @ (Q @ w)) - float(q @ w) + half_tt

    w = np.zeros(len(dictionary))
    g = -q
    f = objective(w)
    history = [f]
    lip = float(np.max(np.sum(np.abs(Q), axis=1))) or 1.0
    step = 1.0 / lip
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pg = _projected_gradient_norm(w, g)
        if pg <= stop or it % polish_every == 0:
            cand = _face_solve(Q, q, w, stop, objective)
            if cand is not None and objective(cand) <= f:
                w, g = cand, Q @ cand - q
                converged = True
                break
            if pg <= stop:
                converged = True
                break
        d = np.maximum(w - step * g, 0.0) - w
        gd = float(g @ d)
        f_ref = max(history[-memory:])
        lam = 1.0
        while True:
            w_new = w + lam * d
            f_new = objective(w_new)
            if f_new <= f_ref + 1e-4 * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        g_new = Q @ w_new - q
        s, y = w_new - w, g_new - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1.0 / lip
        step = min(max(step, 1e-12 / lip), 1e12 / lip)
        w, g, f = w_new, g_new, f_new
        history.append(f)
    else:
        cand = _face_solve(Q, q, w, stop, objective)
        if cand is not None:
            w, g, converged = cand, Q @ cand - q, True

    R = (V * w) @ V.T - T
    fro = float(np.linalg.norm(R))
    sup = float(np.max(np.abs(R)))
    pg = _projected_gradient_norm(w, g)
    if warn and not converged:
        warnings.warn(f"NNLS did not reach tolerance in {max_iter} iterations "
                      f"(projected gradient {pg:.3e}, Frobenius residual {fro:.3e})",
                      NNLSConvergenceWarning, stacklevel=2)
    return NNLSResult(w, fro, sup, it, converged, pg)


# --------------------------------------------------------------------------
# gap reports


@dataclass
class SynthesisReport:
    target: str
    n_atoms: int
    sup_error: float
    frobenius_error: float
    iterations: int
    converged: bool
    seconds: float
    grid: dict
    weights_summary: dict


# CSV columns; wall time is reported only in JSON so the CSV is reproducible
REPORT_COLUMNS = ("n_atoms", "sup_error", "frobenius_error", "iterations", "converged")


def brownian_gram(points):
    """``min(s, t)`` on 1-D points in ``[0, inf)``."""
    s = np.asarray(points, dtype=np.float64).reshape(-1)
    if np.any(s < 0):
        raise ValueError("Brownian kernel needs nonnegative points")
    return GramMatrix.from_array(s[:, None], np.minimum(s[:, None], s[None, :]))


def synthesis_gap_report(target_gram, sizes, desc, rho, seed, points, target_id="target",
                         tol=1e-8, max_iter=10_000):
    """Run :func:`nnls_fit` on nested dictionaries drawn from ``rho``.

    The dictionary for each size is a prefix of one sample of
    ``max(sizes)`` atoms, so larger dictionaries are supersets of smaller
    ones and the achieved residual is monotone up to solver tolerance.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        return []
    X = _points(points, rho.d)
    pool = sample_params(rho, max(sizes), seed)
    grid = {"n_points": int(X.shape[0]), "d": int(X.shape[1]),
            "lo": float(X.min()), "hi": float(X.max())}
    reports = []
    for n in sizes:
        t0 = time.perf_counter()
        res = nnls_fit(target_gram, pool[:n], desc, X, tol=tol, max_iter=max_iter, warn=False)
        w = res.weights
        reports.append(SynthesisReport(
            target_id, n, res.sup_error, res.frobenius_error, res.iterations, res.converged,
            time.perf_counter() - t0, grid,
            {"min": float(w.min()), "max": float(w.max()), "sum": float(w.sum()),
             "nnz": int(np.count_nonzero(w))}))
    return reports


def write_reports_csv(reports, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(REPORT_COLUMNS)
        for r in reports:
            out.writerow([r.n_atoms, repr(r.sup_error), repr(r.frobenius_error), r.iterations,
                          int(r.converged)])


def reports_to_json(reports):
    return json.dumps([asdict(r) for r in reports], indent=2)


__all__ = [
    "ConicKernel", "NNLSConvergenceWarning", "NNLSResult", "SynthesisReport",
    "brownian_gram", "conic_from_measure", "default_grid", "nnls_fit", "sup_grid_error",
    "synthesis_gap_report", "write_reports_csv", "reports_to_json",
]
