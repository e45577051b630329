"""Random kernels ``k(omega, s, t)`` whose mean is a positive definite kernel.

Individual realizations may be indefinite; only the mean
``K(s, t) = E_omega k(omega, s, t)`` is required to be positive definite.
Every family here satisfies ``|k| <= 1`` pathwise, enforced at construction.

Families
--------
sign_mixture
    ``k = w1 K1(s, t) + eps w2 K2(s, t)`` with a Rademacher sign ``eps``;
    mean ``w1 K1``. A draw with ``eps = -1`` is typically indefinite.
random_phase_cosine
    ``k = cos(omega (s - t))`` with ``omega ~ N(0, 1/sigma^2)``; mean is the
    Gaussian kernel of bandwidth ``sigma``. Each path is p.d., but the slope
    ``|omega|`` is unbounded, so no uniform Lipschitz constant exists.
bounded_noise
    ``k = A K(s, t) (1 + zeta u(s) u(t))`` with ``zeta ~ U[-eta, eta]`` and
    the fixed profile ``u = cos``; mean ``A K``. The amplitude ``A`` must
    satisfy ``A (1 + eta) <= 1``.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .kernels import BaseKernel, GramMatrix, ridge_features, _points
from .measures import as_rng

RANDOM_FAMILIES = ("sign_mixture", "random_phase_cosine", "bounded_noise")


@dataclass(frozen=True)
class RandomKernel:
    """Descriptor of a random kernel family; see the module docstring.

    Use the :meth:`sign_mixture`, :meth:`random_phase_cosine`,
    :meth:`bounded_noise` and :meth:`deterministic` constructors.
    """

    family: str
    k1: BaseKernel
    k2: BaseKernel = None
    w1: float = 1.0
    w2: float = 0.0
    sigma: float = 1.0
    eta: float = 0.0
    amplitude: float = 1.0

    @classmethod
    def sign_mixture(cls, k1=None, k2=None, w1=0.5, w2=0.5):
        k1 = BaseKernel.gaussian(1.0) if k1 is None else k1
        k2 = BaseKernel.laplace(1.0) if k2 is None else k2
        w1, w2 = float(w1), float(w2)
        if w1 < 0 or w2 < 0 or w1 + w2 > 1 + 1e-15:
            raise ValueError("sign_mixture needs w1, w2 >= 0 and w1 + w2 <= 1")
        return cls("sign_mixture", k1, k2, w1=w1, w2=w2)

    @classmethod
    def random_phase_cosine(cls, sigma=1.0):
        if not sigma > 0:
            raise ValueError("sigma must be > 0")
        return cls("random_phase_cosine", BaseKernel.gaussian(sigma), sigma=float(sigma))

    @classmethod
    def bounded_noise(cls, base, eta=0.0, amplitude=None):
        eta = float(eta)
        if eta < 0:
            raise ValueError("eta must be >= 0")
        amplitude = 1.0 / (1.0 + eta) if amplitude is None else float(amplitude)
        if amplitude <= 0 or amplitude * (1.0 + eta) > 1 + 1e-15:
            raise ValueError("bounded_noise needs amplitude * (1 + eta) <= 1 so that |k| <= 1")
        return cls("bounded_noise", base, eta=eta, amplitude=amplitude)

    @classmethod
    def deterministic(cls, base):
        """``k = K`` for every state: noise-free kernel as a random family."""
        return cls.bounded_noise(base, 0.0, 1.0)

    # ---- declared properties

    @property
    def mean_kernel(self):
        """Base kernel ``K`` such that the mean is ``mean_scale * K``."""
        return self.k1

    @property
    def mean_scale(self):
        if self.family == "sign_mixture":
            return self.w1
        if self.family == "bounded_noise":
            return self.amplitude
        return 1.0

    def mean(self, s, t):
        return self.mean_scale * self.k1(s, t)

    @property
    def lipschitz(self):
        """Pathwise Lipschitz constant in ``s``, uniform in ``t`` and the state."""
        if self.family == "sign_mixture":
            return self.w1 * self.k1.lipschitz + self.w2 * self.k2.lipschitz
        if self.family == "random_phase_cosine":
            return math.inf
        # d/ds [A K (1 + zeta u(s) u(t))] with |u|, |u'| <= 1
        return self.amplitude * (self.k1.lipschitz * (1.0 + self.eta) + self.eta)

    @property
    def domain_bound(self):
        b = self.k1.domain_bound
        if self.k2 is not None:
            b = min(b, self.k2.domain_bound)
        return b

    @property
    def pathwise_pd(self):
        """True when every realization is known to be p.d."""
        return self.family == "random_phase_cosine" or (
            self.family == "bounded_noise" and self.eta == 0.0) or (
            self.family == "sign_mixture" and self.w2 == 0.0)

    # ---- states and evaluation

    def draw_states(self, n, seed):
        """``n`` i.i.d. kernel states as a float array."""
        rng = as_rng(seed)
        if self.family == "sign_mixture":
            return 2.0 * rng.integers(0, 2, size=n).astype(np.float64) - 1.0
        if self.family == "random_phase_cosine":
            return rng.normal(0.0, 1.0 / self.sigma, size=n)
        return rng.uniform(-self.eta, self.eta, size=n)

    def __call__(self, state, s, t):
        """Vectorized ``k(state, s, t)``."""
        state = np.asarray(state, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if self.family == "sign_mixture":
            return self.w1 * self.k1(s, t) + state * (self.w2 * self.k2(s, t))
        if self.family == "random_phase_cosine":
            return np.cos(state * (s - t))
        base = self.k1(s, t)
        return self.amplitude * base * (1.0 + state * (np.cos(s) * np.cos(t)))

    def features(self, params, states, X):
        """``Phi[j, i] = k(state_i, <a_i, x_j> + b_i, t_i)``."""
        states = np.asarray(states, dtype=np.float64)
        if states.shape != (len(params),):
            raise ValueError("need one state per parameter")
        if self.family == "sign_mixture":
            Phi = self.w1 * ridge_features(self.k1, params, X)
            if self.w2:
                Phi += ridge_features(self.k2, params, X) * (self.w2 * states)
            return Phi
        X = _points(X, params.d)
        if self.family == "random_phase_cosine":
            S = X @ params.A.T + params.b
            return np.cos(states * (S - params.t))
        Phi = ridge_features(self.k1, params, X)
        if self.eta == 0.0:
            return self.amplitude * Phi if self.amplitude != 1.0 else Phi
        S = X @ params.A.T + params.b
        return self.amplitude * Phi * (1.0 + states * np.cos(S) * np.cos(params.t))

    # ---- serialization

    def to_record(self):
        rec = {"family": self.family}
        if self.family == "sign_mixture":
            rec.update(k1=self.k1.to_record(), k2=self.k2.to_record(), w1=self.w1, w2=self.w2)
        elif self.family == "random_phase_cosine":
            rec["sigma"] = self.sigma
        else:
            rec.update(base=self.k1.to_record(), eta=self.eta, amplitude=self.amplitude)
        return rec

    @classmethod
    def from_record(cls, rec):
        """Accept a random-kernel record or a plain base-kernel record (noise free)."""
        rec = dict(rec)
        family = rec.pop("family", None)
        try:
            if family in ("gaussian", "laplace", "cosine", "polynomial_slice"):
                return cls.deterministic(BaseKernel.from_record({"family": family, **rec}))
            if family == "sign_mixture":
                out = cls.sign_mixture(BaseKernel.from_record(rec.pop("k1")),
                                       BaseKernel.from_record(rec.pop("k2")),
                                       rec.pop("w1", 0.5), rec.pop("w2", 0.5))
            elif family == "random_phase_cosine":
                out = cls.random_phase_cosine(rec.pop("sigma", 1.0))
            elif family == "bounded_noise":
                out = cls.bounded_noise(BaseKernel.from_record(rec.pop("base")),
                                        rec.pop("eta", 0.0), rec.pop("amplitude", None))
            else:
                raise ValueError(f"unknown random kernel family {family!r}")
        except KeyError as exc:
            raise ValueError(f"random kernel record missing field {exc}") from None
        if rec:
            raise ValueError(f"unknown random kernel fields {sorted(rec)}")
        return out


def draw_kernel_state(desc, seed):
    """One kernel state (a float: sign, frequency or noise level)."""
    return float(desc.draw_states(1, seed)[0])


def eval_random_kernel(desc, state, s, t):
    s, t = float(s), float(t)
    if not (math.isfinite(s) and math.isfinite(t)):
        raise ValueError("kernel arguments must be finite")
    return float(desc(state, s, t))


class MeanCheck(NamedTuple):
    max_deviation: float
    stderr: np.ndarray
    deviation: np.ndarray


def mean_kernel_check(desc, n_draws, grid, seed):
    """Compare the sample mean of ``k`` against the declared mean on ``(s, t)`` pairs.

    Parameters
    ----------
    grid : (P, 2) array_like of ``(s, t)`` pairs
    """
    grid = np.asarray(grid, dtype=np.float64).reshape(-1, 2)
    states = desc.draw_states(int(n_draws), seed)
    vals = desc(states[:, None], grid[None, :, 0], grid[None, :, 1])
    dev = np.abs(vals.mean(axis=0) - desc.mean(grid[:, 0], grid[:, 1]))
    se = vals.std(axis=0, ddof=1) / math.sqrt(n_draws) if n_draws > 1 else np.full(len(grid), np.inf)
    return MeanCheck(float(dev.max()), se, dev)


def spread_points(n, seed, spacing=1.5, jitter=0.25):
    """``n`` sorted points on a jittered lattice, at least ``spacing * (1 - 2 jitter)`` apart."""
    rng = as_rng(seed)
    base = spacing * (np.arange(n) - (n - 1) / 2.0)
    return base + spacing * rng.uniform(-jitter, jitter, size=n)


def pathwise_gram(desc, state, points):
    s = np.asarray(points, dtype=np.float64).reshape(-1)
    return GramMatrix.from_array(s[:, None], desc(state, s[:, None], s[None, :]))


def pathwise_min_eigenvalues(desc, points, states):
    s = np.asarray(points, dtype=np.float64).reshape(-1)
    return np.array([pathwise_gram(desc, st, s).min_eigenvalue for st in states])


def pathwise_indefiniteness_probe(desc, n_points, n_draws, tol=1e-6, seed=0, points=None):
    """Fraction of drawn states whose Gram on fixed spread points has ``lambda_min < -tol``."""
    if n_points < 3:
        raise ValueError("n_points must be >= 3")
    rng = as_rng(seed)
    pts = spread_points(n_points, rng) if points is None else np.asarray(points, dtype=np.float64)
    states = desc.draw_states(int(n_draws), rng)
    lam = pathwise_min_eigenvalues(desc, pts, states)
    return float(np.mean(lam < -tol))


def empirical_mean_gram(desc, points, n_draws, seed):
    """Gram matrix of the sample-mean kernel over ``n_draws`` states."""
    s = np.asarray(points, dtype=np.float64).reshape(-1)
    states = desc.draw_states(int(n_draws), seed)
    G = np.zeros((s.shape[0], s.shape[0]))
    for st in states:
        G += desc(st, s[:, None], s[None, :])
    return GramMatrix.from_array(s[:, None], G / len(states))
