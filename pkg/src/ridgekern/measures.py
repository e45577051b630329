"""Parameter measures, coefficient functions and seed derivation.

A parameter measure ``rho`` lives on ``Z = R^d x R x R``; all shipped
families have compact support. Coefficient functions are concrete
representatives of classes in ``L^2(rho)``; indicator forms include their
boundary.
"""
import hashlib
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .params import ParamBatch, RidgeParam

_MASK64 = (1 << 64) - 1

# sub-cell samples per axis when measuring how much of a quadrature cell
# lies inside the a-ball
_COVERAGE_SUBSAMPLES = 8

# refuse to materialize quadrature rules larger than this many nodes
MAX_QUADRATURE_NODES = 20_000_000


class Estimate(NamedTuple):
    """A numerical estimate with its error: a standard error for Monte Carlo
    results, a discretization estimate for quadrature, zero when exact."""

    value: float
    error: float


# --------------------------------------------------------------------------
# seeds


def derive_child_seed(master, purpose, index=0):
    """Derive a 64-bit child seed from ``(master, purpose, index)``.

    Pure and collision resistant: the triple is hashed with BLAKE2b, so
    distinct labels yield distinct seeds with overwhelming probability and
    the result never depends on call order.
    """
    master = int(master)
    if not 0 <= master <= _MASK64:
        raise ValueError(f"master seed must be an unsigned 64-bit integer, got {master}")
    msg = f"{master}\x1f{purpose}\x1f{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SeedTree:
    """A master seed plus the labels of the child streams drawn from it."""

    master: int
    labels: tuple = ()

    def child(self, purpose, index=0):
        return derive_child_seed(self.master, purpose, index)

    def rng(self, purpose, index=0):
        return np.random.default_rng(self.child(purpose, index))


def as_rng(seed):
    """Accept a child seed (int) or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(int(seed))


# --------------------------------------------------------------------------
# parameter measures


@dataclass(frozen=True, eq=False)
class ParamMeasure:
    """A finite Borel measure on ``Z`` with compact support.

    Build instances with :meth:`atomic`, :meth:`product_ball` or
    :meth:`truncated_gaussian` rather than directly.
    """

    family: str
    d: int
    total_mass: float = 1.0
    atoms: ParamBatch = None
    weights: np.ndarray = None
    radii: tuple = (1.0, 1.0, 1.0)
    stds: tuple = None
    name: str = field(default="", compare=False)

    @classmethod
    def atomic(cls, atoms, weights, name=""):
        if isinstance(atoms, RidgeParam):
            atoms = [atoms]
        if not isinstance(atoms, ParamBatch):
            atoms = ParamBatch.from_params(atoms)
        w = np.array(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(atoms) or len(atoms) == 0:
            raise ValueError("need one positive weight per atom and at least one atom")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("atomic weights must be finite and > 0")
        w.setflags(write=False)
        return cls("atomic", atoms.d, float(w.sum()), atoms=atoms, weights=w, name=name)

    @classmethod
    def product_ball(cls, d, a_radius=1.0, b_radius=1.0, t_radius=1.0, name=""):
        """Uniform probability on ``{|a| <= ra, |b| <= rb, |t| <= rt}``."""
        radii = tuple(float(r) for r in (a_radius, b_radius, t_radius))
        if int(d) < 1 or any(not (r > 0 and math.isfinite(r)) for r in radii):
            raise ValueError("d must be >= 1 and radii finite and > 0")
        return cls("uniform_product_ball", int(d), 1.0, radii=radii, name=name)

    @classmethod
    def truncated_gaussian(cls, d, stds=(1.0, 1.0, 1.0), box=(1.0, 1.0, 1.0), name=""):
        """Independent centred normals on each coordinate, conditioned to the
        box ``|a_k| <= box[0]``, ``|b| <= box[1]``, ``|t| <= box[2]``."""
        stds = tuple(float(s) for s in stds)
        radii = tuple(float(r) for r in box)
        if int(d) < 1 or any(s <= 0 for s in stds) or any(r <= 0 for r in radii):
            raise ValueError("d must be >= 1, stds and box half-widths > 0")
        return cls("truncated_gaussian", int(d), 1.0, radii=radii, stds=stds, name=name)

    # ---- geometry

    def in_support(self, params, atol=0.0):
        """Boolean mask of which parameters lie in the support."""
        if isinstance(params, RidgeParam):
            params = ParamBatch.from_params([params])
        if params.d != self.d:
            raise ValueError(f"dimension mismatch: measure d={self.d}, params d={params.d}")
        ra, rb, rt = self.radii
        if self.family == "atomic":
            P, Q = params.coords(), self.atoms.coords()
            dist = np.abs(P[:, None, :] - Q[None, :, :]).max(axis=2)
            return np.any(dist <= atol, axis=1)
        if self.family == "uniform_product_ball":
            a_ok = np.linalg.norm(params.A, axis=1) <= ra + atol
        else:
            a_ok = np.all(np.abs(params.A) <= ra + atol, axis=1)
        return a_ok & (np.abs(params.b) <= rb + atol) & (np.abs(params.t) <= rt + atol)

    def within_unit_product_ball(self):
        """True when the support lies in ``{|a| <= 1, |b| <= 1, |t| <= 1}``."""
        ra, rb, rt = self.radii
        if self.family == "atomic":
            return bool(np.all(ParamMeasure.product_ball(self.d).in_support(self.atoms, 1e-12)))
        if self.family == "uniform_product_ball":
            return ra <= 1 and rb <= 1 and rt <= 1
        return ra * math.sqrt(self.d) <= 1 and rb <= 1 and rt <= 1

    def max_abs_affine(self, x_radius):
        """Upper bound on ``|<a, x> + b|`` over the support for ``|x| <= x_radius``."""
        ra, rb, _ = self.radii
        if self.family == "atomic":
            return float(np.max(np.linalg.norm(self.atoms.A, axis=1) * x_radius
                                + np.abs(self.atoms.b)))
        a_norm = ra if self.family == "uniform_product_ball" else ra * math.sqrt(self.d)
        return a_norm * x_radius + rb

    def max_abs_t(self):
        if self.family == "atomic":
            return float(np.max(np.abs(self.atoms.t)))
        return self.radii[2]

    # ---- serialization

    def to_record(self):
        rec = {"family": self.family, "d": self.d}
        if self.name:
            rec["name"] = self.name
        if self.family == "atomic":
            rec["atoms"] = self.atoms.to_record()
            rec["weights"] = self.weights.tolist()
        elif self.family == "uniform_product_ball":
            rec["radii"] = list(self.radii)
        else:
            rec["stds"] = list(self.stds)
            rec["box"] = list(self.radii)
        return rec

    @classmethod
    def from_record(cls, rec):
        rec = dict(rec)
        family = rec.pop("family", None)
        name = rec.pop("name", "")
        try:
            d = int(rec.pop("d"))
            if family == "atomic":
                out = cls.atomic(ParamBatch.from_record(rec.pop("atoms"), d), rec.pop("weights"),
                                 name=name)
            elif family == "uniform_product_ball":
                out = cls.product_ball(d, *rec.pop("radii", (1.0, 1.0, 1.0)), name=name)
            elif family == "truncated_gaussian":
                out = cls.truncated_gaussian(d, rec.pop("stds", (1.0, 1.0, 1.0)),
                                             rec.pop("box", (1.0, 1.0, 1.0)), name=name)
            else:
                raise ValueError(f"unknown measure family {family!r}")
        except KeyError as exc:
            raise ValueError(f"measure record missing field {exc}") from None
        if rec:
            raise ValueError(f"unknown measure fields {sorted(rec)}")
        return out


def _rejection(rng, sampler, accept, n):
    out, have = [sampler(0)], 0
    while have < n:
        cand = sampler(max(2 * (n - have), 16))
        cand = cand[accept(cand)]
        out.append(cand)
        have += cand.shape[0]
    return np.concatenate(out)[:n]


def sample_params(rho, n, seed):
    """Draw ``n`` i.i.d. parameters from the normalized measure ``rho / |rho|``.

    Deterministic given ``seed`` (a child seed or a Generator).
    """
    n = int(n)
    if n < 0:
        raise ValueError("n must be >= 0")
    if not (rho.total_mass > 0 and math.isfinite(rho.total_mass)):
        raise ValueError("measure cannot be normalized")
    rng = as_rng(seed)
    d = rho.d
    ra, rb, rt = rho.radii
    if rho.family == "atomic":
        idx = rng.choice(len(rho.atoms), size=n, p=rho.weights / rho.total_mass)
        return rho.atoms[idx]
    if rho.family == "uniform_product_ball":
        A = _rejection(rng, lambda k: rng.uniform(-ra, ra, size=(k, d)),
                       lambda c: np.einsum("ij,ij->i", c, c) <= ra * ra, n)
        b = rng.uniform(-rb, rb, size=n)
        t = rng.uniform(-rt, rt, size=n)
        return ParamBatch(A.reshape(n, d), b, t)
    sa, sb, st = rho.stds

    def trunc(std, half, shape):
        flat = _rejection(rng, lambda k: rng.normal(0.0, std, size=k),
                          lambda c: np.abs(c) <= half, int(np.prod(shape)))
        return flat.reshape(shape)

    return ParamBatch(trunc(sa, ra, (n, d)), trunc(sb, rb, (n,)), trunc(st, rt, (n,)))


def _midpoints(half, n):
    h = 2.0 * half / n
    return -half + h * (np.arange(n) + 0.5)


def _ball_cell_coverage(radius, d, n):
    """Fraction of each midpoint cell of ``[-r, r]^d`` inside the r-ball, and
    a node per cell that lies in the ball."""
    h = 2.0 * radius / n
    mids = _midpoints(radius, n)
    ss = _COVERAGE_SUBSAMPLES
    offs = (np.arange(ss) + 0.5) / ss * h - h / 2
    centers = np.stack(np.meshgrid(*([mids] * d), indexing="ij"), axis=-1).reshape(-1, d)
    sub = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), axis=-1).reshape(-1, d)
    cov = np.empty(centers.shape[0])
    nodes = centers.copy()
    r2 = radius * radius
    for lo in range(0, centers.shape[0], 4096):
        pts = centers[lo:lo + 4096, None, :] + sub[None, :, :]
        inside = np.einsum("ijk,ijk->ij", pts, pts) <= r2
        cnt = inside.sum(axis=1)
        cov[lo:lo + 4096] = cnt / sub.shape[0]
        # boundary cells: place the node at the centroid of the inside part
        part = (cnt > 0) & (cnt < sub.shape[0])
        if np.any(part):
            m = inside[part][:, :, None]
            nodes[lo:lo + 4096][part] = (pts[part] * m).sum(axis=1) / cnt[part][:, None]
    return nodes, cov


def quadrature_rule(rho, nodes_per_axis):
    """Tensor-product midpoint rule for integrals against ``rho``.

    Returns ``(nodes, weights)`` with weights summing to ``rho.total_mass``.
    Atomic measures give their atoms exactly. For the product ball, cells of
    the ``a``-cube are weighted by the fraction of their volume inside the
    ball (estimated on a sub-grid). Truncated Gaussians weight midpoints by
    the density.
    """
    n = int(nodes_per_axis)
    if rho.family == "atomic":
        return rho.atoms, np.array(rho.weights)
    if n < 2:
        raise ValueError("nodes_per_axis must be >= 2")
    d = rho.d
    count = n ** (d + 2)
    if count > MAX_QUADRATURE_NODES:
        raise ValueError(f"quadrature rule would need {count} nodes (limit {MAX_QUADRATURE_NODES}); "
                         "lower nodes_per_axis or use Monte Carlo")
    ra, rb, rt = rho.radii
    bs, ts = _midpoints(rb, n), _midpoints(rt, n)
    if rho.family == "uniform_product_ball":
        a_nodes, a_w = _ball_cell_coverage(ra, d, n)
        keep = a_w > 0
        a_nodes, a_w = a_nodes[keep], a_w[keep]
        b_w = np.ones(n)
        t_w = np.ones(n)
    elif rho.family == "truncated_gaussian":
        sa, sb, st = rho.stds
        am = _midpoints(ra, n)
        a_nodes = np.stack(np.meshgrid(*([am] * d), indexing="ij"), axis=-1).reshape(-1, d)
        a_w = np.exp(-0.5 * np.sum((a_nodes / sa) ** 2, axis=1))
        b_w = np.exp(-0.5 * (bs / sb) ** 2)
        t_w = np.exp(-0.5 * (ts / st) ** 2)
    else:
        raise ValueError(f"no quadrature rule for measure family {rho.family!r}")
    na = a_nodes.shape[0]
    A = np.repeat(a_nodes, n * n, axis=0)
    b = np.tile(np.repeat(bs, n), na)
    t = np.tile(ts, na * n)
    w = (a_w[:, None, None] * b_w[None, :, None] * t_w[None, None, :]).reshape(-1)
    w *= rho.total_mass / w.sum()
    return ParamBatch(A, b, t), w


# --------------------------------------------------------------------------
# coefficient functions


def _coord_index(name, d):
    if name == "b":
        return d
    if name == "t":
        return d + 1
    if name.startswith("a") and name[1:].isdigit() and int(name[1:]) < d:
        return int(name[1:])
    raise ValueError(f"unknown parameter coordinate {name!r} for d={d}")


def _box_overlap(x, lo, hi, w):
    """Fraction of ``[x - w/2, x + w/2]`` inside ``[lo, hi]``."""
    left = np.maximum(lo, x - w / 2)
    right = np.minimum(hi, x + w / 2)
    return np.clip(right - left, 0.0, w) / w


@dataclass(frozen=True, eq=False)
class CoefficientFn:
    """A measurable representative ``c: Z -> R`` of a class in ``L^2(rho)``.

    Forms
    -----
    ``constant``
        ``{"value": v}``.
    ``polynomial_in_z``
        ``{"terms": [[coef, {"a0": 1, "t": 2}], ...]}``.
    ``indicator_box``
        ``{"bounds": {"t": [0.0, None]}, "value": 1.0, "ramp": 0.0}``. With
        ``ramp > 0`` the box indicator is convolved with a uniform kernel of
        that width on each constrained coordinate, which makes it Lipschitz.
    ``lipschitz_bump``
        ``{"center": [...d+2 values], "peak": h, "width": w}``, a cone
        ``h * max(0, 1 - |z - center| / w)``.
    """

    form: str
    params: dict
    sup_bound: float = math.inf

    @classmethod
    def constant(cls, value):
        return cls("constant", {"value": float(value)}, abs(float(value)))

    @classmethod
    def polynomial(cls, terms, sup_bound=None):
        terms = [[float(c), {str(k): int(p) for k, p in powers.items()}] for c, powers in terms]
        if any(p < 0 for _, pw in terms for p in pw.values()):
            raise ValueError("polynomial powers must be nonnegative")
        # valid on the unit box, which contains every shipped default support
        bound = sum(abs(c) for c, _ in terms) if sup_bound is None else float(sup_bound)
        return cls("polynomial_in_z", {"terms": terms}, bound)

    @classmethod
    def indicator_box(cls, bounds, value=1.0, ramp=0.0):
        clean = {}
        for k, (lo, hi) in bounds.items():
            lo = -math.inf if lo is None else float(lo)
            hi = math.inf if hi is None else float(hi)
            if not lo <= hi:
                raise ValueError(f"empty interval for {k}")
            clean[str(k)] = (lo, hi)
        if ramp < 0:
            raise ValueError("ramp must be >= 0")
        return cls("indicator_box", {"bounds": clean, "value": float(value), "ramp": float(ramp)},
                   abs(float(value)))

    @classmethod
    def lipschitz_bump(cls, center, peak, width):
        if width <= 0:
            raise ValueError("width must be > 0")
        return cls("lipschitz_bump",
                   {"center": [float(c) for c in center], "peak": float(peak),
                    "width": float(width)}, abs(float(peak)))

    @property
    def is_continuous(self):
        return self.form != "indicator_box" or self.params["ramp"] > 0

    def __call__(self, z):
        """Evaluate on a :class:`RidgeParam` (returns float) or a batch."""
        single = isinstance(z, RidgeParam)
        batch = ParamBatch.from_params([z]) if single else z
        vals = self._eval(batch)
        return float(vals[0]) if single else vals

    def _eval(self, batch):
        n, d = len(batch), batch.d
        p = self.params
        if self.form == "constant":
            return np.full(n, p["value"])
        Z = batch.coords()
        if self.form == "polynomial_in_z":
            out = np.zeros(n)
            for coef, powers in p["terms"]:
                term = np.full(n, coef)
                for name, power in powers.items():
                    term *= Z[:, _coord_index(name, d)] ** power
                out += term
            return out
        if self.form == "indicator_box":
            out = np.full(n, p["value"])
            for name, (lo, hi) in p["bounds"].items():
                col = Z[:, _coord_index(name, d)]
                if p["ramp"] > 0:
                    out = out * _box_overlap(col, lo, hi, p["ramp"])
                else:
                    out = out * ((col >= lo) & (col <= hi))
            return out
        if self.form == "lipschitz_bump":
            center = np.asarray(p["center"])
            if center.shape[0] != d + 2:
                raise ValueError(f"bump center needs {d + 2} coordinates, got {center.shape[0]}")
            r = np.linalg.norm(Z - center, axis=1)
            return p["peak"] * np.maximum(0.0, 1.0 - r / p["width"])
        raise ValueError(f"unknown coefficient form {self.form!r}")

    def to_record(self):
        rec = {"form": self.form}
        if self.form == "indicator_box":
            rec["bounds"] = {k: [None if math.isinf(lo) else lo, None if math.isinf(hi) else hi]
                             for k, (lo, hi) in self.params["bounds"].items()}
            rec["value"] = self.params["value"]
            rec["ramp"] = self.params["ramp"]
        else:
            rec.update(self.params)
        if self.form == "polynomial_in_z":
            rec["sup_bound"] = self.sup_bound
        return rec

    @classmethod
    def from_record(cls, rec):
        rec = dict(rec)
        form = rec.pop("form", None)
        try:
            if form == "constant":
                out = cls.constant(rec.pop("value"))
            elif form == "polynomial_in_z":
                out = cls.polynomial(rec.pop("terms"), rec.pop("sup_bound", None))
            elif form == "indicator_box":
                out = cls.indicator_box(rec.pop("bounds"), rec.pop("value", 1.0),
                                        rec.pop("ramp", 0.0))
            elif form == "lipschitz_bump":
                out = cls.lipschitz_bump(rec.pop("center"), rec.pop("peak"), rec.pop("width"))
            else:
                raise ValueError(f"unknown coefficient form {form!r}")
        except KeyError as exc:
            raise ValueError(f"coefficient record missing field {exc}") from None
        if rec:
            raise ValueError(f"unknown coefficient fields {sorted(rec)}")
        return out


def eval_coefficient(c, z, rho=None):
    """Evaluate ``c`` at ``z``; with ``rho`` given, reject points off its support."""
    if rho is not None and c.form in ("indicator_box", "lipschitz_bump"):
        batch = ParamBatch.from_params([z]) if isinstance(z, RidgeParam) else z
        if not np.all(rho.in_support(batch, atol=1e-12)):
            raise DomainError("coefficient evaluated outside the measure's support")
    return c(z)


def l2_norm_of_coefficient(c, rho, n_samples=100_000, seed=0):
    """``(int |c|^2 d rho)^(1/2)`` as an :class:`Estimate`.

    Exact for atomic measures; otherwise Monte Carlo with a delta-method
    standard error.
    """
    if rho.family == "atomic":
        v = c(rho.atoms)
        return Estimate(math.sqrt(float(np.sum(rho.weights * v * v))), 0.0)
    z = sample_params(rho, n_samples, seed)
    sq = c(z) ** 2
    m2 = float(np.mean(sq)) * rho.total_mass
    se_m2 = float(np.std(sq, ddof=1)) * rho.total_mass / math.sqrt(n_samples) if n_samples > 1 else math.inf
    value = math.sqrt(m2)
    return Estimate(value, se_m2 / (2 * value) if value > 0 else math.sqrt(se_m2))


def l2_distance_quadrature(c1, c2, rho, nodes_per_axis):
    """``|c1 - c2|_{L^2(rho)}`` on the midpoint rule of ``rho``."""
    nodes, w = quadrature_rule(rho, nodes_per_axis)
    diff = c1(nodes) - c2(nodes)
    return math.sqrt(float(np.sum(w * diff * diff)))
