"""Random-kernel networks ``F_N(x) = sum_i alpha_i k(omega_i, <a_i, x> + b_i, t_i)``.

Neuron parameters ``z_i ~ rho`` and kernel states ``omega_i`` come from two
independent child seeds (purposes ``"z"`` and ``"omega"``). Output weights
are either the unbiased Monte Carlo choice ``alpha_i = c(z_i) / N`` or a
ridge-regression fit.
"""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import ModelFormatError
from .kernels import BaseKernel, _points, ridge_apply, ridge_features
from .measures import Estimate, derive_child_seed, quadrature_rule, sample_params
from .params import ParamBatch
from .random_kernels import RandomKernel

MODEL_FORMAT = "ridgekern-network"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class NetworkModel:
    kernel: RandomKernel
    params: ParamBatch
    states: np.ndarray
    alpha: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.params) == self.states.shape[0] == self.alpha.shape[0]):
            raise ValueError("params, states and alpha must have one entry per neuron")

    @property
    def n_neurons(self):
        return len(self.params)

    @property
    def d(self):
        return self.params.d


def build_network(kernel, rho, n, seed):
    """Sample ``n`` neurons; ``alpha`` starts at zero."""
    n = int(n)
    if n < 1:
        raise ValueError("N must be >= 1")
    if isinstance(kernel, BaseKernel):
        kernel = RandomKernel.deterministic(kernel)
    params = sample_params(rho, n, derive_child_seed(seed, "z", 0))
    states = kernel.draw_states(n, derive_child_seed(seed, "omega", 0))
    prov = {"master_seed": int(seed), "rho": rho.name or rho.family, "coefficient": None,
            "lambda": None}
    return NetworkModel(kernel, params, states, np.zeros(n), prov)


def neuron_activation(model, i, x):
    """``phi_i(x)``."""
    if not 0 <= i < model.n_neurons:
        raise IndexError(f"neuron index {i} out of range for N={model.n_neurons}")
    return float(model.kernel.features(model.params[i:i + 1], model.states[i:i + 1],
                                       _points(x, model.d))[0, 0])


def assemble_features(model, points):
    """Feature matrix ``Phi[j, i] = phi_i(x_j)`` of shape ``(M, N)``."""
    return model.kernel.features(model.params, model.states, _points(points, model.d))


def set_unbiased_weights(model, c, total_mass=1.0):
    """``alpha_i = c(z_i) / N``.

    For a parameter measure that is not a probability measure pass its
    ``total_mass``; the weights are scaled by it so the network still
    estimates ``f_c`` without bias.
    """
    vals = c(model.params) * float(total_mass)
    if not np.all(np.isfinite(vals)):
        raise ValueError("coefficient function is not finite at every sampled parameter")
    prov = dict(model.provenance, coefficient=c.to_record(), **{"lambda": None})
    return replace(model, alpha=vals / model.n_neurons, provenance=prov)


def _solve_ridge(Phi, y, lam):
    """Return ``(alpha, info)`` for ``min |y - Phi alpha|^2 + lam |alpha|^2``."""
    M, N = Phi.shape
    if lam > 0:
        A = Phi.T @ Phi
        A[np.diag_indices_from(A)] += lam
        ev = np.linalg.eigvalsh(A)
        cf = scipy.linalg.cho_factor(A, lower=False, check_finite=False)
        alpha = scipy.linalg.cho_solve(cf, Phi.T @ y, check_finite=False)
        return alpha, {"method": "cholesky", "condition": float(ev[-1] / ev[0]), "min_norm": False}
    Q, R, piv = scipy.linalg.qr(Phi, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > max(M, N) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)))
    if rank == N and M >= N:
        alpha = np.empty(N)
        alpha[piv] = scipy.linalg.solve_triangular(R, Q.T @ y, check_finite=False)
        return alpha, {"method": "qr", "condition": float(diag[0] / diag[-1]), "min_norm": False}
    # rank deficient: minimum-norm least squares
    alpha, *_ = np.linalg.lstsq(Phi, y, rcond=None)
    return alpha, {"method": "lstsq_min_norm", "condition": math.inf, "min_norm": True,
                   "rank": rank}


def train_ridge(model, X, y, lam):
    """Fit ``alpha = argmin |y - Phi alpha|^2 + lam |alpha|^2``.

    ``lam > 0`` uses a Cholesky factorization of ``Phi^T Phi + lam I``;
    ``lam = 0`` uses pivoted QR when ``Phi`` has full column rank and the
    minimum-norm least-squares solution otherwise (flagged in provenance).
    """
    lam = float(lam)
    if lam < 0 or not math.isfinite(lam):
        raise ValueError("lambda must be finite and >= 0")
    X = _points(X, model.d)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] < 1 or y.shape[0] != X.shape[0]:
        raise ValueError("need M >= 1 points and one target per point")
    Phi = assemble_features(model, X)
    alpha, info = _solve_ridge(Phi, y, lam)
    prov = dict(model.provenance, coefficient="trained", **{"lambda": lam}, solver=info)
    return replace(model, alpha=alpha, provenance=prov)


def predict(model, x):
    """``F_N(x)``; a float for one point, an array for a batch."""
    single = np.ndim(x) == 1
    X = _points(x, model.d)
    out = np.empty(X.shape[0])
    for lo in range(0, X.shape[0], 2048):
        out[lo:lo + 2048] = assemble_features(model, X[lo:lo + 2048]) @ model.alpha
    return float(out[0]) if single else out


def _mean_parts(kernel):
    if isinstance(kernel, RandomKernel):
        return kernel.mean_kernel, kernel.mean_scale
    return kernel, 1.0


def evaluate_f_c_estimate(kernel, rho, c, x, method="quadrature", nodes_per_axis=32,
                          n_samples=1_000_000, seed=0):
    """Reference ``f_c(x) = int c(z) K(<a, x> + b, t) d rho(z)`` with error.

    ``kernel`` is the mean kernel (a :class:`BaseKernel`) or a
    :class:`RandomKernel`, whose declared mean is used. ``method`` is
    ``"quadrature"`` (error = refinement difference against half the nodes)
    or ``"mc"`` (error = standard error).
    """
    K, scale = _mean_parts(kernel)
    X = _points(x, rho.d)
    if method == "quadrature":
        value = _f_c_quadrature(K, scale, rho, c, X, nodes_per_axis)
        if rho.family == "atomic":
            return Estimate(value, np.zeros_like(value))
        coarse = _f_c_quadrature(K, scale, rho, c, X, max(2, nodes_per_axis // 2))
        return Estimate(value, np.abs(value - coarse))
    if method == "mc":
        z = sample_params(rho, int(n_samples), seed)
        cz = c(z) * (scale * rho.total_mass)
        vals, errs = np.empty(X.shape[0]), np.empty(X.shape[0])
        for j in range(X.shape[0]):
            y = ridge_features(K, z, X[j:j + 1])[0] * cz
            vals[j] = y.mean()
            errs[j] = y.std(ddof=1) / math.sqrt(len(y))
        return Estimate(vals, errs)
    raise ValueError(f"unknown method {method!r}")


def _f_c_quadrature(K, scale, rho, c, X, nodes_per_axis):
    nodes, w = quadrature_rule(rho, nodes_per_axis)
    wc = w * c(nodes) * scale
    keep = wc != 0
    if not np.any(keep):
        return np.zeros(X.shape[0])
    return ridge_apply(K, nodes[keep], X, wc[keep])


def evaluate_f_c(kernel, rho, c, x, method="quadrature", nodes_per_axis=32,
                 n_samples=1_000_000, seed=0):
    """``f_c`` values only (see :func:`evaluate_f_c_estimate`); quadrature skips the error pass."""
    single = np.ndim(x) == 1
    if method == "quadrature":
        K, scale = _mean_parts(kernel)
        out = _f_c_quadrature(K, scale, rho, c, _points(x, rho.d), nodes_per_axis)
    else:
        out = evaluate_f_c_estimate(kernel, rho, c, x, method, nodes_per_axis, n_samples, seed).value
    return float(out[0]) if single else out


# --------------------------------------------------------------------------
# persistence


def model_to_record(model):
    neurons = [{"a": model.params.A[i].tolist(), "b": float(model.params.b[i]),
                "t": float(model.params.t[i]), "state": float(model.states[i])}
               for i in range(model.n_neurons)]
    return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "d": model.d,
            "kernel": model.kernel.to_record(), "neurons": neurons,
            "alpha": model.alpha.tolist(), "provenance": model.provenance}


def _field(rec, name, kind):
    if name not in rec:
        raise ModelFormatError("missing field", name)
    if not isinstance(rec[name], kind):
        raise ModelFormatError(f"expected {getattr(kind, '__name__', kind)}", name)
    return rec[name]


def model_from_record(rec):
    if not isinstance(rec, dict):
        raise ModelFormatError("top level must be an object")
    if rec.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"expected {MODEL_FORMAT!r}", "format")
    version = _field(rec, "version", int)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported version {version} (supported: {MODEL_VERSION})",
                               "version")
    d = _field(rec, "d", int)
    try:
        kernel = RandomKernel.from_record(_field(rec, "kernel", dict))
    except (ValueError, TypeError) as exc:
        raise ModelFormatError(str(exc), "kernel") from None
    neurons = _field(rec, "neurons", list)
    alpha = _field(rec, "alpha", list)
    prov = _field(rec, "provenance", dict)
    if len(alpha) != len(neurons) or not neurons:
        raise ModelFormatError("length differs from neurons or is zero", "alpha")
    try:
        A = np.array([n["a"] for n in neurons], dtype=np.float64).reshape(len(neurons), d)
        b = [n["b"] for n in neurons]
        t = [n["t"] for n in neurons]
        states = np.array([n["state"] for n in neurons], dtype=np.float64)
        params = ParamBatch(A, b, t)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed neuron entry ({exc})", "neurons") from None
    try:
        alpha = np.array(alpha, dtype=np.float64)
    except (TypeError, ValueError):
        raise ModelFormatError("entries must be numbers", "alpha") from None
    return NetworkModel(kernel, params, states, alpha, prov)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_record(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Read a model document; malformed input raises :class:`ModelFormatError`."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return model_from_record(rec)
