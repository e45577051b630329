"""Statistical experiments on random-kernel networks and ridge synthesis.

Every experiment takes an :class:`~ridgekern.config.ExperimentConfig` and
returns an :class:`ExperimentReport` holding CSV-ready tables, scalar
metrics and pass/fail verdicts. Trials are keyed by
``derive_child_seed(master, "<experiment>/<tag>", index)`` and results are
collected in index order, so the tables do not depend on ``jobs``.
"""
import csv
import itertools
import json
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import _backend
from .config import check_uniform_hypotheses
from .errors import ConfigError, HypothesisError
from .kernels import LiftedKernel, greedy_eps_net, volumetric_covering_bound
from .measures import (CoefficientFn, ParamMeasure, derive_child_seed, l2_norm_of_coefficient,
                       sample_params)
from .networks import (build_network, evaluate_f_c_estimate, predict,
                       set_unbiased_weights, train_ridge)
from .random_kernels import RandomKernel, empirical_mean_gram, pathwise_min_eigenvalues, spread_points
from .synthesis import (REPORT_COLUMNS, brownian_gram, conic_from_measure, nnls_fit,
                        sup_grid_error, synthesis_gap_report)


@dataclass
class Criterion:
    """One verdict. ``passed`` is None when the check does not apply."""

    passed: object
    value: object = None
    threshold: object = None
    detail: str = ""

    def to_record(self):
        return {"passed": self.passed, "value": _jsonable(self.value),
                "threshold": _jsonable(self.threshold), "detail": self.detail}


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)


@dataclass
class ExperimentReport:
    experiment: str
    tables: dict
    metrics: dict
    criteria: dict
    params: dict = field(default_factory=dict)
    data: object = None
    seconds: float = 0.0

    @property
    def passed(self):
        return all(c.passed is not False for c in self.criteria.values())

    def summary(self):
        return {"experiment": self.experiment, "params": self.params,
                "metrics": _jsonable(self.metrics),
                "criteria": {k: c.to_record() for k, c in self.criteria.items()},
                "passed": self.passed, "wall_time_seconds": self.seconds,
                "backend": _backend.BACKEND}


@dataclass
class RateTable:
    """Mean squared error per ``N`` with the fitted log-log line."""

    rows: list            # (N, mean_mse, se_mse, trials)
    slope: float
    intercept: float
    C: float


@dataclass
class UniformBoundReport:
    """Per-replicate sup errors against the high-probability bound."""

    rows: list            # (N, replicate, sup_error, bound)
    epsilon: dict         # N -> epsilon used
    net_size: dict        # N -> greedy net size
    delta: float
    coverage: dict        # N -> fraction with sup_error <= bound


# --------------------------------------------------------------------------
# helpers


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def parallel_map(fn, items, jobs=1):
    """``list(map(fn, items))``, optionally on ``jobs`` threads, in input order."""
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
        return list(pool.map(fn, items))


def tensor_grid(d, per_axis, lo=-1.0, hi=1.0):
    ax = np.linspace(lo, hi, per_axis)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)


def domain_cloud(d, per_axis, seed, n_random=4096):
    """Points of ``X = [-1, 1]^d``: tensor grid for ``d <= 2``, uniform sample otherwise."""
    if d <= 2:
        return tensor_grid(d, per_axis)
    rng = np.random.default_rng(derive_child_seed(seed, "cloud", 0))
    return rng.uniform(-1.0, 1.0, size=(n_random, d))


def _check_domain(kernel, rho, X):
    """The polynomial slice only exists on ``|s|, |t| <= B``; reject early."""
    bound = kernel.domain_bound
    if math.isfinite(bound):
        radius = float(np.max(np.linalg.norm(X, axis=1)))
        if rho.max_abs_affine(radius) > bound or rho.max_abs_t() > bound:
            raise HypothesisError(f"kernel domain |s|, |t| <= {bound} does not contain the "
                                  "ridge arguments on this domain")


def _stderr(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def uniform_bound_value(C, L, N, net_size, delta, epsilon):
    """``C sqrt((2 log(2 M) + 2 log(1/delta)) / N) + 2 C L epsilon``."""
    return C * math.sqrt((2.0 * math.log(2.0 * net_size) + 2.0 * math.log(1.0 / delta)) / N) \
        + 2.0 * C * L * epsilon


def near_optimal_epsilon(L, d, N):
    """``(1/L) sqrt(d / (N log N))``; ``N`` must be at least 2."""
    if N < 2:
        raise ValueError("near-optimal epsilon needs N >= 2")
    return math.sqrt(d / (N * math.log(N))) / L


def write_table(table, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(table.columns)
        for row in table.rows:
            out.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def write_report(report, out_dir):
    """Write ``<table>.csv`` for every table plus ``summary.json`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, table in report.tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        write_table(table, path)
        paths.append(path)
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.summary(), fh, indent=2)
        fh.write("\n")
    paths.append(path)
    return paths


def _coefficient_l2_bound(c, rho, seed):
    """Upper value for ``|c|_{L^2(rho)}``: exact when possible, else estimate + 3 SE."""
    if c.form == "constant":
        return abs(c.params["value"]) * math.sqrt(rho.total_mass), "exact"
    est = l2_norm_of_coefficient(c, rho, seed=derive_child_seed(seed, "c-norm", 0))
    if rho.family == "atomic":
        return est.value, "exact"
    return est.value + 3.0 * est.error, "monte carlo + 3 SE"


# --------------------------------------------------------------------------
# Monte Carlo L2 rate


def mc_rate_experiment(cfg, jobs=1):
    """Mean squared ``L^2(mu)`` error of unbiased-weight networks against ``N``.

    ``mu`` is uniform on the tensor grid of ``[-1, 1]^d`` (``d <= 2``) or on
    ``n_mu_samples`` uniform points. The reference ``f_c`` comes from the
    quadrature oracle. Checks: the fitted log-log slope lies in
    ``slope_band``; ``mean MSE <= C^2/N (1 + 4 rel. SE)`` at every ``N``;
    the empirical tail ``P(|F_N - f| > e)`` stays under ``C^2/(N e^2)`` up to
    binomial slack.
    """
    p, seed = cfg.params, cfg.seed
    kernel, rho, c = cfg.kernel, cfg.rho, cfg.coefficient
    if p["trials"] < 1:
        raise ConfigError("must be >= 1", "params.trials")
    X = domain_cloud(cfg.d, p["grid_per_axis"], seed, p["n_mu_samples"])
    _check_domain(kernel.mean_kernel, rho, X)
    ref = evaluate_f_c_estimate(kernel, rho, c, X, nodes_per_axis=p["reference_nodes"])
    f = ref.value
    C, c_source = (p["C"], "configured") if p["C"] is not None else \
        _coefficient_l2_bound(c, rho, seed)

    def trial(job):
        N, i = job
        model = build_network(kernel, rho, N, derive_child_seed(seed, f"mc-rate/N={N}", i))
        model = set_unbiased_weights(model, c, rho.total_mass)
        return float(np.mean((predict(model, X) - f) ** 2))

    jobs_list = [(N, i) for N in p["N_sweep"] for i in range(p["trials"])]
    mses = parallel_map(trial, jobs_list, jobs)
    per_n = {N: np.array(mses[k * p["trials"]:(k + 1) * p["trials"]])
             for k, N in enumerate(p["N_sweep"])}

    rows, rate_rows, tail_rows = [], [], []
    bound_ok, tail_ok = [], []
    for N, m in per_n.items():
        mean, se = float(m.mean()), _stderr(m)
        bound = C * C / N
        rel = se / mean if mean > 0 else 0.0
        bound_ok.append(mean <= bound * (1.0 + 4.0 * rel))
        rate_rows.append((N, p["trials"], mean, se, bound))
        rows.append((N, mean, se, p["trials"]))
        for e in p["eps_tail"]:
            prob = float(np.mean(np.sqrt(m) > e))
            cheb = min(1.0, C * C / (N * e * e))
            slack = 3.0 * math.sqrt(max(cheb * (1.0 - cheb), 0.25 / p["trials"]) / p["trials"])
            tail_ok.append(prob <= cheb + slack)
            tail_rows.append((N, e, prob, cheb))

    Ns = np.array(p["N_sweep"], dtype=np.float64)
    means = np.array([r[1] for r in rows])
    if len(Ns) >= 2 and np.all(means > 0):
        slope, intercept = (float(v) for v in np.polyfit(np.log(Ns), np.log(means), 1))
        lo, hi = p["slope_band"]
        slope_crit = Criterion(bool(lo <= slope <= hi), slope, [lo, hi])
    else:
        slope = intercept = math.nan
        slope_crit = Criterion(None, None, p["slope_band"],
                               "needs two or more N values with positive mean error")

    trial_rows = [(N, i, mse) for (N, i), mse in zip(jobs_list, mses)]
    tables = {
        "rate": Table(("N", "trials", "mean_mse", "se_mse", "bound"), rate_rows),
        "trials": Table(("N", "trial", "mse"), trial_rows),
        "tail": Table(("N", "eps_tail", "empirical_probability", "chebyshev_bound"), tail_rows),
    }
    criteria = {
        "slope_in_band": slope_crit,
        "mse_below_bound": Criterion(all(bound_ok), [r[2] for r in rate_rows],
                                     [r[4] for r in rate_rows], "C^2/N with 4 relative SE slack"),
        "chebyshev_tail": Criterion(all(tail_ok), None, None, "binomial 3 sigma slack"),
    }
    metrics = {"slope": slope, "intercept": intercept, "C": C, "C_source": c_source,
               "reference_error_max": float(np.max(ref.error)), "n_mu_points": int(X.shape[0])}
    return ExperimentReport("mc-rate", tables, metrics, criteria, cfg.resolved(),
                            RateTable(rows, slope, intercept, C))


# --------------------------------------------------------------------------
# uniform bound


def uniform_bound_experiment(cfg, jobs=1):
    """Coverage of the sup-norm bound ``C sqrt((2 log 2M + 2 log 1/delta)/N) + 2 C L eps``.

    ``X`` is the tensor grid of ``[-1, 1]^d`` (or a uniform point cloud for
    ``d > 2``) and ``M`` the size of a greedy ``eps``-net of that cloud, so
    the bound is rigorous for the sup over the cloud. ``epsilon = "auto"``
    uses ``eps* = (1/L) sqrt(d / (N log N))``. Also reports the bound with
    the volumetric count ``(s D / eps)^d`` and the bound minimized over a
    logarithmic ``eps`` scan.
    """
    p, seed = cfg.params, cfg.seed
    kernel, rho, c = cfg.kernel, cfg.rho, cfg.coefficient
    check_uniform_hypotheses(kernel, rho, c)
    X = domain_cloud(cfg.d, p["grid_per_axis"], seed)
    _check_domain(kernel.mean_kernel, rho, X)
    D = float(np.max(np.linalg.norm(X, axis=1)))
    C, L, delta = c.sup_bound, kernel.lipschitz, p["delta"]
    ref = evaluate_f_c_estimate(kernel, rho, c, X, nodes_per_axis=p["reference_nodes"])
    f = ref.value

    def volumetric(eps):
        try:
            return max(1.0, volumetric_covering_bound(cfg.d, D, eps, p["s_const"]))
        except OverflowError:
            return math.inf

    eps_scan = np.logspace(math.log10(D) - 3.0, math.log10(2.0 * D), p["n_eps_search"])
    scan_sizes = [greedy_eps_net(X, float(e)).size for e in eps_scan]

    eps_used, net_size, summary_rows, scan_rows = {}, {}, [], []
    eps_crit, mono_ok = [], []
    for N in p["N_sweep"]:
        eps_star = near_optimal_epsilon(L, cfg.d, N) if N >= 2 else 1.0 / max(L, 1e-300)
        eps = eps_star if p["epsilon"] == "auto" else p["epsilon"]
        M = greedy_eps_net(X, eps).size
        eps_used[N], net_size[N] = eps, M
        star_bound = uniform_bound_value(C, L, N, greedy_eps_net(X, eps_star).size, delta, eps_star)
        scan_b = [uniform_bound_value(C, L, N, m, delta, float(e))
                  for e, m in zip(eps_scan, scan_sizes)]
        vol_b = [uniform_bound_value(C, L, N, volumetric(float(e)), delta, float(e))
                 for e in eps_scan]
        best = min(scan_b)
        eps_crit.append(star_bound <= p["ratio_to_best"] * best)
        scan_rows.extend((N, float(e), m, b, volumetric(float(e)), vb)
                         for e, m, b, vb in zip(eps_scan, scan_sizes, scan_b, vol_b))
        vol_star = uniform_bound_value(C, L, N, volumetric(eps_star), delta, eps_star)
        summary_rows.append([N, eps, M, uniform_bound_value(C, L, N, M, delta, eps), None,
                             eps_star, star_bound, best, vol_star, min(vol_b)])
        # fixed eps and delta: the bound must fall as N grows
        seq = [uniform_bound_value(C, L, n, M, delta, eps) for n in (N // 4, N // 2, N, 2 * N, 4 * N)
               if n >= 1]
        mono_ok.append(all(b2 < b1 for b1, b2 in zip(seq, seq[1:])))
    sweep_bounds = [r[3] for r in summary_rows]
    mono_ok.append(all(b2 < b1 for b1, b2 in zip(sweep_bounds, sweep_bounds[1:])))

    def replicate(job):
        N, r = job
        model = build_network(kernel, rho, N, derive_child_seed(seed, f"uniform-bound/N={N}", r))
        model = set_unbiased_weights(model, c, rho.total_mass)
        return float(np.max(np.abs(predict(model, X) - f)))

    jobs_list = [(N, r) for N in p["N_sweep"] for r in range(p["replicates"])]
    errs = parallel_map(replicate, jobs_list, jobs)
    rows, coverage = [], {}
    for row in summary_rows:
        N, bound = row[0], row[3]
        e = [err for (n, _), err in zip(jobs_list, errs) if n == N]
        coverage[N] = float(np.mean(np.array(e) <= bound))
        row[4] = coverage[N]
    for (N, r), err in zip(jobs_list, errs):
        rows.append((N, r, err, summary_rows[p["N_sweep"].index(N)][3]))

    tables = {
        "replicates": Table(("N", "replicate", "sup_error", "bound", "covered"),
                            [(N, r, e, b, e <= b) for N, r, e, b in rows]),
        "bounds": Table(("N", "epsilon", "net_size", "bound", "coverage", "epsilon_star",
                         "bound_at_epsilon_star", "best_bound_scan", "volumetric_bound_at_epsilon_star",
                         "best_volumetric_bound_scan"), [tuple(r) for r in summary_rows]),
        "epsilon_scan": Table(("N", "epsilon", "net_size", "bound", "volumetric_size",
                               "volumetric_bound"), scan_rows),
    }
    thr = p["coverage_threshold"]
    criteria = {
        "coverage": Criterion(all(v >= thr for v in coverage.values()), coverage, thr),
        "bound_decreasing_in_N": Criterion(all(mono_ok)),
        "epsilon_star_near_best": Criterion(all(eps_crit), [r[6] / r[7] for r in summary_rows],
                                            p["ratio_to_best"], "bound(eps*) / min over eps scan"),
    }
    metrics = {"C": C, "L_k": L, "D": D, "delta": delta, "cloud_size": int(X.shape[0]),
               "reference_error_max": float(np.max(ref.error)),
               "max_sup_error": float(max(errs))}
    return ExperimentReport("uniform-bound", tables, metrics, criteria, cfg.resolved(),
                            UniformBoundReport(rows, eps_used, net_size, delta, coverage))


# --------------------------------------------------------------------------
# dichotomy


def monomial_design(X, degree):
    """Columns ``prod_k x_k^{p_k}`` for every total degree ``<= degree``."""
    X = np.asarray(X, dtype=np.float64)
    cols = [np.ones(X.shape[0])]
    for deg in range(1, degree + 1):
        for idx in itertools.combinations_with_replacement(range(X.shape[1]), deg):
            cols.append(np.prod(X[:, idx], axis=1))
    return np.column_stack(cols)


def polynomial_fit_residual(X, values, degree):
    """Relative least-squares residual of the best total-degree polynomial fit."""
    P = monomial_design(X, degree)
    coef, *_ = np.linalg.lstsq(P, values, rcond=None)
    scale = float(np.linalg.norm(values))
    r = float(np.linalg.norm(values - P @ coef))
    return r / scale if scale > 0 else r


def minimax_polynomial_error(X, y, degree):
    """``min_p max_j |p(x_j) - y_j|`` over total-degree polynomials, as a linear program."""
    P = monomial_design(X, degree)
    n, k = P.shape
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    ones = np.ones((n, 1))
    A = np.block([[P, -ones], [-P, -ones]])
    b = np.concatenate([y, -y])
    res = scipy.optimize.linprog(cost, A_ub=A, b_ub=b, bounds=[(None, None)] * k + [(0, None)],
                                 method="highs")
    if res.status != 0:
        raise RuntimeError(f"minimax linear program failed: {res.message}")
    return float(res.x[-1])


def least_squares_polynomial_error(X, y, degree):
    """``(sup, rms)`` error of the least-squares polynomial fit."""
    P = monomial_design(X, degree)
    coef, *_ = np.linalg.lstsq(P, y, rcond=None)
    r = P @ coef - y
    return float(np.max(np.abs(r))), float(np.sqrt(np.mean(r * r)))


def target_function(name, X):
    X = np.asarray(X, dtype=np.float64)
    if name == "sin_pi_x1":
        return np.sin(np.pi * X[:, 0])
    if name == "sin_pi_x1_cos_pi_x2":
        if X.shape[1] < 2:
            raise ValueError("target sin_pi_x1_cos_pi_x2 needs d >= 2")
        return np.sin(np.pi * X[:, 0]) * np.cos(np.pi * X[:, 1])
    raise ValueError(f"unknown target {name!r}")


def dichotomy_experiment(cfg, jobs=1):
    """Polynomial versus non-polynomial slices.

    Branch 1: networks on a degree-``m`` polynomial slice with arbitrary
    output weights are degree-``m`` polynomials (fit residual at rounding
    level), so their uniform error to ``sin(pi x1)`` cannot beat the minimax
    degree-``m`` error on the grid. Branch 2: ridge-trained networks on a
    Gaussian slice approach ``sin(pi x1) cos(pi x2)`` as ``N`` grows.
    """
    p, seed, d = cfg.params, cfg.seed, cfg.d
    poly, smooth = p["poly_kernel"], p["smooth_kernel"]
    if not poly.is_polynomial_slice:
        raise ConfigError("must be a polynomial_slice kernel", "params.poly_kernel")
    if smooth.is_polynomial_slice:
        raise ConfigError("must be a non-polynomial kernel", "params.smooth_kernel")
    degree = poly.params["degree"]
    rho = ParamMeasure.product_ball(d, name="unit_product_ball")
    Xfit = domain_cloud(d, p["fit_per_axis"], seed)
    _check_domain(poly, rho, Xfit)
    poly_rk = RandomKernel.deterministic(poly)
    y1 = target_function("sin_pi_x1", Xfit)
    minimax = minimax_polynomial_error(Xfit, y1, degree)
    ls_sup, ls_rms = least_squares_polynomial_error(Xfit, y1, degree)

    def branch1(j):
        s = derive_child_seed(seed, "dichotomy/branch1", j)
        model = build_network(poly_rk, rho, p["branch1_N"], s)
        alpha = np.random.default_rng(derive_child_seed(s, "alpha", 0)).standard_normal(
            p["branch1_N"])
        F = predict(type(model)(model.kernel, model.params, model.states, alpha), Xfit)
        resid = polynomial_fit_residual(Xfit, F, degree)
        fit = train_ridge(model, Xfit, y1, p["branch1_lambda"])
        r = predict(fit, Xfit) - y1
        return resid, float(np.max(np.abs(r))), float(np.sqrt(np.mean(r * r)))

    b1 = parallel_map(branch1, range(p["branch1_models"]), jobs)

    smooth_rk = RandomKernel.deterministic(smooth)
    Xtr = domain_cloud(d, p["train_per_axis"], derive_child_seed(seed, "train", 0))
    Xev = domain_cloud(d, p["eval_per_axis"], derive_child_seed(seed, "eval", 0))
    ytr = target_function("sin_pi_x1_cos_pi_x2", Xtr)
    yev = target_function("sin_pi_x1_cos_pi_x2", Xev)

    def branch2(job):
        N, s = job
        model = build_network(smooth_rk, rho, N, derive_child_seed(seed, f"dichotomy/N={N}", s))
        model = train_ridge(model, Xtr, ytr, p["lambda"])
        return float(np.max(np.abs(predict(model, Xev) - yev)))

    jobs2 = [(N, s) for N in p["branch2_N_sweep"] for s in range(p["branch2_seeds"])]
    b2 = parallel_map(branch2, jobs2, jobs)
    medians = [statistics.median(e for (n, _), e in zip(jobs2, b2) if n == N)
               for N in p["branch2_N_sweep"]]

    tol = 1e-9
    tables = {
        "branch1": Table(("model", "poly_fit_relative_residual", "sin_sup_error", "sin_rms_error"),
                         [(j, *r) for j, r in enumerate(b1)]),
        "branch1_floor": Table(("degree", "minimax_sup_floor", "least_squares_sup_error",
                                "least_squares_rms_floor"), [(degree, minimax, ls_sup, ls_rms)]),
        "branch2": Table(("N", "seed", "sup_error"), [(N, s, e) for (N, s), e in zip(jobs2, b2)]),
        "branch2_median": Table(("N", "median_sup_error"), list(zip(p["branch2_N_sweep"], medians))),
    }
    max_resid = max(r[0] for r in b1)
    criteria = {
        "polynomial_containment": Criterion(max_resid <= p["poly_tol"], max_resid, p["poly_tol"]),
        "sup_error_above_minimax_floor": Criterion(
            all(r[1] >= minimax * (1 - tol) for r in b1), min(r[1] for r in b1), minimax),
        "rms_error_above_least_squares_floor": Criterion(
            all(r[2] >= ls_rms * (1 - tol) for r in b1), min(r[2] for r in b1), ls_rms),
        "non_polynomial_error_decreasing": Criterion(
            all(b < a for a, b in zip(medians, medians[1:])), medians),
    }
    metrics = {"degree": degree, "minimax_floor": minimax, "least_squares_sup": ls_sup,
               "least_squares_rms": ls_rms, "branch2_medians": medians}
    return ExperimentReport("dichotomy", tables, metrics, criteria, cfg.resolved())


# --------------------------------------------------------------------------
# coefficient smoothing


def _l2_difference(c1, c2, rho, seed, n_samples=1_000_000):
    """Monte Carlo ``|c1 - c2|_{L^2(rho)}`` with a delta-method standard error."""
    z = sample_params(rho, n_samples, seed)
    sq = (c1(z) - c2(z)) ** 2 * rho.total_mass
    m = float(sq.mean())
    se = float(sq.std(ddof=1)) / math.sqrt(n_samples)
    v = math.sqrt(m)
    return v, (se / (2.0 * v) if v > 0 else math.sqrt(se))


def coefficient_smoothing_experiment(cfg, jobs=1):
    """Replace a discontinuous box coefficient by ramped versions of width ``w``.

    For each width, ``sup_x |f_{c_w} - f_c|`` on the grid is checked against
    ``|c_w - c|_{L^2(rho)}`` (plus quadrature and Monte Carlo slack). The
    largest width with ``|c_w - c| <= eta / 3`` is then fed to unbiased
    networks of size ``N``; each replicate's sup error to the original
    ``f_c`` is compared with ``eta``.
    """
    p, seed = cfg.params, cfg.seed
    kernel, rho, c = cfg.kernel, cfg.rho, cfg.coefficient
    check_uniform_hypotheses(kernel, rho)
    if c.form != "indicator_box":
        raise ConfigError("smoothing needs an indicator_box coefficient", "coefficient.form")
    base = CoefficientFn.indicator_box(c.params["bounds"], c.params["value"], 0.0)
    X = domain_cloud(cfg.d, p["grid_per_axis"], seed)
    _check_domain(kernel.mean_kernel, rho, X)
    nodes = p["reference_nodes"]
    f = evaluate_f_c_estimate(kernel, rho, base, X, nodes_per_axis=nodes)

    widths = sorted(p["widths"], reverse=True)
    smooth_rows, within, l2s = [], [], []
    for k, w in enumerate(widths):
        cw = CoefficientFn.indicator_box(c.params["bounds"], c.params["value"], w)
        fw = evaluate_f_c_estimate(kernel, rho, cw, X, nodes_per_axis=nodes)
        l2, l2_se = _l2_difference(cw, base, rho, derive_child_seed(seed, "smoothing/l2", k))
        sup = float(np.max(np.abs(fw.value - f.value)))
        qerr = float(np.max(fw.error + f.error))
        ok = sup <= l2 + 3.0 * l2_se + 3.0 * qerr
        within.append(ok)
        l2s.append(l2)
        smooth_rows.append((w, l2, l2_se, sup, qerr, ok))

    # plan: widest ramp whose L2 distance is within eta / 3, then N from the config
    eta, delta, N = p["eta"], p["delta"], p["N"]
    chosen = next((r for r in smooth_rows if r[1] + 3.0 * r[2] <= eta / 3.0), smooth_rows[-1])
    w_star = chosen[0]
    c_star = CoefficientFn.indicator_box(c.params["bounds"], c.params["value"], w_star)
    L = kernel.lipschitz
    eps = near_optimal_epsilon(L, cfg.d, N) if N >= 2 else 1.0
    M = greedy_eps_net(X, eps).size
    planned = chosen[1] + 3.0 * chosen[2] + uniform_bound_value(c_star.sup_bound, L, N, M, delta, eps)

    def replicate(r):
        model = build_network(kernel, rho, N, derive_child_seed(seed, f"smoothing/N={N}", r))
        model = set_unbiased_weights(model, c_star, rho.total_mass)
        return float(np.max(np.abs(predict(model, X) - f.value)))

    errs = parallel_map(replicate, range(p["replicates"]), jobs)
    frac = float(np.mean(np.array(errs) <= eta))
    tables = {
        "smoothing": Table(("width", "l2_distance", "l2_se", "sup_difference", "quadrature_error",
                            "within_bound"), smooth_rows),
        "end_to_end": Table(("replicate", "width", "N", "sup_error", "within_eta"),
                            [(r, w_star, N, e, e <= eta) for r, e in enumerate(errs)]),
    }
    criteria = {
        "l2_distance_decreasing": Criterion(all(b < a for a, b in zip(l2s, l2s[1:])), l2s),
        "sup_difference_within_l2": Criterion(all(within)),
        "plan_feasible": Criterion(planned <= eta, planned, eta,
                                   "L2 distance + uniform bound at the chosen width"),
        "end_to_end_within_eta": Criterion(frac >= 1.0 - delta, frac, 1.0 - delta),
    }
    metrics = {"chosen_width": w_star, "epsilon": eps, "net_size": M, "planned_bound": planned,
               "max_sup_error": float(max(errs))}
    return ExperimentReport("smoothing", tables, metrics, criteria, cfg.resolved())


# --------------------------------------------------------------------------
# pathwise indefinite versus mean p.d.


def psd_contrast_experiment(cfg, jobs=1):
    """Fraction of indefinite pathwise Grams next to ``lambda_min`` of the mean Gram."""
    p, seed, kernel = cfg.params, cfg.seed, cfg.kernel
    pts = spread_points(p["n_points"], derive_child_seed(seed, "psd-contrast/points", 0),
                        spacing=p["spacing"])
    states = kernel.draw_states(p["n_draws"], derive_child_seed(seed, "psd-contrast/pathwise", 0))
    lam = pathwise_min_eigenvalues(kernel, pts, states)
    frac = float(np.mean(lam < -p["tol"]))
    mean_gram = empirical_mean_gram(kernel, pts, p["mean_draws"],
                                    derive_child_seed(seed, "psd-contrast/mean", 0))
    lam_mean = mean_gram.min_eigenvalue
    tables = {
        "psd_contrast": Table(("pathwise_indefinite_fraction", "mean_gram_min_eigenvalue"),
                              [(frac, lam_mean)]),
        "pathwise": Table(("draw", "state", "min_eigenvalue"),
                          [(i, float(s), float(v)) for i, (s, v) in enumerate(zip(states, lam))]),
    }
    if kernel.pathwise_pd:
        frac_crit = Criterion(frac == 0.0, frac, 0.0, "every path is p.d.")
    else:
        frac_crit = Criterion(frac >= p["min_fraction"], frac, p["min_fraction"])
    criteria = {
        "pathwise_indefinite_fraction": frac_crit,
        "mean_gram_psd": Criterion(lam_mean >= -p["mean_tol"], lam_mean, -p["mean_tol"]),
    }
    metrics = {"indefinite_fraction": frac, "mean_gram_min_eigenvalue": lam_mean,
               "pathwise_min_eigenvalue": float(lam.min())}
    return ExperimentReport("psd-contrast", tables, metrics, criteria, cfg.resolved())


# --------------------------------------------------------------------------
# synthesis


def synthesis_experiment(cfg, jobs=1):
    """Conic approximation of ``K_rho`` and the NNLS gap on a Brownian target.

    Conic kernels with ``m`` sampled atoms are compared entrywise with the
    quadrature ``K_rho`` on a grid; medians over seeds must not grow by more
    than ``slack`` per step and must end below ``final_tol``. For
    ``m <= refit_max_m`` the same atoms are refit by NNLS, whose Frobenius
    residual can only improve on equal weights. The Brownian ``min(s, t)``
    target is fit with nested dictionaries; its residual floor is recorded.
    """
    p, seed = cfg.params, cfg.seed
    K, rho = cfg.kernel.mean_kernel, cfg.rho
    X = domain_cloud(cfg.d, p["grid_per_axis"], seed, 441)
    _check_domain(K, rho, X)
    ref = LiftedKernel(K, rho, p["reference_nodes"]).gram(X)

    def conic(job):
        m, s = job
        ck = conic_from_measure(K, rho, m, derive_child_seed(seed, f"synth/m={m}", s))
        G = ck.gram(X)
        row = [m, s, sup_grid_error(G, ref), float(np.linalg.norm(G.entries - ref.entries)),
               None, None, None]
        if m <= p["refit_max_m"]:
            res = nnls_fit(ref, ck.params, K, X, tol=p["nnls_tol"],
                           max_iter=p["nnls_max_iter"], warn=False)
            row[4:] = res.sup_error, res.frobenius_error, res.converged
        return row

    jobs_list = [(m, s) for m in p["m_sweep"] for s in range(p["seeds"])]
    rows = parallel_map(conic, jobs_list, jobs)
    medians = [statistics.median(r[2] for r in rows if r[0] == m) for m in p["m_sweep"]]
    refit_ok = all(r[5] <= r[3] * (1 + 1e-9) + 1e-12 for r in rows if r[5] is not None)

    rho1 = ParamMeasure.product_ball(1, *rho.radii) if rho.family == "uniform_product_ball" \
        else ParamMeasure.product_ball(1)
    pts = np.linspace(1.0 / p["nnls_points"], 1.0, p["nnls_points"])
    _check_domain(K, rho1, pts[:, None])
    reports = synthesis_gap_report(brownian_gram(pts), p["nnls_sizes"], K, rho1,
                                   derive_child_seed(seed, "synth/brownian", 0), pts[:, None],
                                   "brownian", tol=p["nnls_tol"], max_iter=p["nnls_max_iter"])
    fro = [r.frobenius_error for r in reports]
    mono_tol = 1e-6 * max(fro[0], 1.0) if fro else 0.0

    tables = {
        "conic": Table(("m", "seed", "sup_error", "frobenius_error", "nnls_sup_error",
                        "nnls_frobenius_error", "nnls_converged"), rows),
        "conic_median": Table(("m", "median_sup_error"), list(zip(p["m_sweep"], medians))),
        "nnls_gap": Table(REPORT_COLUMNS, [(r.n_atoms, r.sup_error, r.frobenius_error,
                                            r.iterations, r.converged) for r in reports]),
    }
    criteria = {
        "conic_error_decreasing": Criterion(
            all(b <= a * (1.0 + p["slack"]) for a, b in zip(medians, medians[1:])), medians,
            p["slack"], "per-step slack on the median"),
        "conic_final_error": Criterion(medians[-1] < p["final_tol"], medians[-1], p["final_tol"]),
        "nnls_refit_not_worse": Criterion(refit_ok, None, None, "Frobenius residual"),
        "nnls_monotone_in_dictionary": Criterion(
            all(b <= a + mono_tol for a, b in zip(fro, fro[1:])), fro, mono_tol),
    }
    metrics = {"conic_medians": medians, "brownian_floor": fro[-1] if fro else None,
               "brownian_seconds": [r.seconds for r in reports]}
    return ExperimentReport("synth", tables, metrics, criteria, cfg.resolved())


# --------------------------------------------------------------------------
# training


def read_points_csv(path, d=None):
    """Rows of numbers; a non-numeric first row is taken as a header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if k == 0:
                    continue
                raise ValueError(f"{path}: line {k + 1} is not numeric") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have different lengths")
    A = np.array(rows)
    if d is not None and A.shape[1] != d:
        raise ValueError(f"{path}: expected {d} columns, found {A.shape[1]}")
    return A


def train_experiment(cfg, jobs=1):
    """Ridge-train one network on a CSV data set or a built-in target on a grid."""
    p, seed = cfg.params, cfg.seed
    kernel, rho = cfg.kernel, cfg.rho
    if p["data"] is not None:
        path = p["data"] if os.path.isabs(p["data"]) else os.path.join(cfg.base_dir, p["data"])
        try:
            A = read_points_csv(path, cfg.d + 1)
        except OSError as exc:
            raise ConfigError(f"cannot read data: {exc.strerror}", "params.data") from None
        except ValueError as exc:
            raise ConfigError(str(exc), "params.data") from None
        X, y = A[:, :-1], A[:, -1]
    else:
        X = domain_cloud(cfg.d, p["train_per_axis"], seed)
        y = target_function(p["target"], X)
    model = build_network(kernel, rho, p["N"], seed)
    model = train_ridge(model, X, y, p["lambda"])
    r = predict(model, X) - y
    info = model.provenance["solver"]
    tables = {"training": Table(("n_points", "N", "lambda", "method", "condition", "train_rmse",
                                 "train_sup_error"),
                                [(X.shape[0], p["N"], p["lambda"], info["method"],
                                  float(info["condition"]), float(np.sqrt(np.mean(r * r))),
                                  float(np.max(np.abs(r))))])}
    criteria = {"finite_weights": Criterion(bool(np.all(np.isfinite(model.alpha))))}
    metrics = {"train_rmse": float(np.sqrt(np.mean(r * r))), "solver": info}
    return ExperimentReport("train", tables, metrics, criteria, cfg.resolved(), data=model)


RUNNERS = {
    "mc-rate": mc_rate_experiment,
    "uniform-bound": uniform_bound_experiment,
    "dichotomy": dichotomy_experiment,
    "smoothing": coefficient_smoothing_experiment,
    "psd-contrast": psd_contrast_experiment,
    "synth": synthesis_experiment,
    "train": train_experiment,
}


def run_experiment(cfg, jobs=1):
    """Dispatch on ``cfg.experiment`` and time the run."""
    t0 = time.perf_counter()
    report = RUNNERS[cfg.experiment](cfg, jobs=jobs)
    report.seconds = time.perf_counter() - t0
    return report
