"""Experiment configuration documents.

A config is one JSON object::

    {"schema_version": 1, "experiment": "mc-rate", "seed": 0, "d": 2,
     "kernel": {...}, "rho": {...}, "coefficient": {...},
     "params": {"trials": 200, ...}}

Only ``schema_version`` and ``experiment`` are required. Component records
use the ``to_record`` layouts of :class:`RandomKernel`, :class:`ParamMeasure`
and :class:`CoefficientFn`. Unknown keys anywhere are errors, so a typo in a
tolerance never falls back silently to a default.
"""
import copy
import json
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError, HypothesisError
from .kernels import BaseKernel
from .measures import CoefficientFn, ParamMeasure
from .random_kernels import RandomKernel

SCHEMA_VERSION = 1
MAX_SEED = 2 ** 64 - 1


# ---- field validators; each returns the cleaned value or raises ConfigError


def _int(lo=None):
    def check(v, name):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError("expected an integer", name)
        if lo is not None and v < lo:
            raise ConfigError(f"must be >= {lo}", name)
        return v
    return check


def _float(lo=None, hi=None, lo_open=False, hi_open=False):
    def check(v, name):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError("expected a finite number", name)
        v = float(v)
        if lo is not None and (v < lo or (lo_open and v == lo)):
            raise ConfigError(f"must be {'>' if lo_open else '>='} {lo}", name)
        if hi is not None and (v > hi or (hi_open and v == hi)):
            raise ConfigError(f"must be {'<' if hi_open else '<='} {hi}", name)
        return v
    return check


def _increasing_ints(lo=1):
    def check(v, name):
        if not isinstance(v, list):
            raise ConfigError("expected a list of integers", name)
        out = [_int(lo)(x, f"{name}[{i}]") for i, x in enumerate(v)]
        if any(b <= a for a, b in zip(out, out[1:])):
            raise ConfigError("must be strictly increasing", name)
        return out
    return check


def _floats(lo=None, lo_open=False, nonempty=True):
    def check(v, name):
        if not isinstance(v, list) or (nonempty and not v):
            raise ConfigError("expected a nonempty list of numbers", name)
        return [_float(lo, lo_open=lo_open)(x, f"{name}[{i}]") for i, x in enumerate(v)]
    return check


def _band(v, name):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError("expected [low, high]", name)
    lo, hi = (_float()(x, f"{name}[{i}]") for i, x in enumerate(v))
    if lo >= hi:
        raise ConfigError("low must be < high", name)
    return [lo, hi]


def _epsilon(v, name):
    if v == "auto":
        return v
    return _float(0.0, lo_open=True)(v, name)


def _optional_float(lo=None, lo_open=False):
    def check(v, name):
        return None if v is None else _float(lo, lo_open=lo_open)(v, name)
    return check


def _choice(options):
    def check(v, name):
        if v not in options:
            raise ConfigError(f"expected one of {list(options)}", name)
        return v
    return check


def _optional_str(v, name):
    if v is not None and not isinstance(v, str):
        raise ConfigError("expected a string or null", name)
    return v


def _base_kernel(v, name):
    if not isinstance(v, dict):
        raise ConfigError("expected a kernel record", name)
    try:
        return BaseKernel.from_record(v)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), name) from None


TARGET_FUNCTIONS = ("sin_pi_x1", "sin_pi_x1_cos_pi_x2")

# experiment -> (top-level components used, params schema {name: (default, validator)})
SCHEMAS = {
    "mc-rate": (("kernel", "rho", "coefficient"), {
        "N_sweep": ([16, 64, 256, 1024], _increasing_ints()),
        "trials": (200, _int(1)),
        "grid_per_axis": (41, _int(2)),
        "n_mu_samples": (4096, _int(1)),
        "reference_nodes": (32, _int(2)),
        "eps_tail": ([0.05, 0.1, 0.2], _floats(0.0, lo_open=True)),
        "slope_band": ([-1.3, -0.7], _band),
        "C": (None, _optional_float(0.0, lo_open=True)),
    }),
    "uniform-bound": (("kernel", "rho", "coefficient"), {
        "N_sweep": ([1024], _increasing_ints()),
        "replicates": (100, _int(1)),
        "delta": (0.1, _float(0.0, 1.0, lo_open=True, hi_open=True)),
        "epsilon": ("auto", _epsilon),
        "grid_per_axis": (41, _int(2)),
        "reference_nodes": (32, _int(2)),
        "s_const": (2.0, _float(0.0, lo_open=True)),
        "n_eps_search": (50, _int(2)),
        "coverage_threshold": (0.85, _float(0.0, 1.0)),
        "ratio_to_best": (2.0, _float(1.0)),
    }),
    "dichotomy": ((), {
        "poly_kernel": ({"family": "polynomial_slice",
                         "params": {"degree": 2, "scale": 1.0, "bound": 3.0}}, _base_kernel),
        "smooth_kernel": ({"family": "gaussian", "params": {"sigma": 1.0}}, _base_kernel),
        "branch1_N": (50, _int(1)),
        "branch1_models": (10, _int(1)),
        "branch1_lambda": (1e-8, _float(0.0)),
        "fit_per_axis": (21, _int(2)),
        "branch2_N_sweep": ([32, 128, 512], _increasing_ints()),
        "branch2_seeds": (10, _int(1)),
        "lambda": (1e-6, _float(0.0)),
        "train_per_axis": (31, _int(2)),
        "eval_per_axis": (41, _int(2)),
        "poly_tol": (1e-8, _float(0.0, lo_open=True)),
    }),
    "smoothing": (("kernel", "rho", "coefficient"), {
        "widths": ([0.8, 0.4, 0.2, 0.1], _floats(0.0, lo_open=True)),
        "reference_nodes": (32, _int(2)),
        "grid_per_axis": (21, _int(2)),
        "eta": (0.2, _float(0.0, lo_open=True)),
        "delta": (0.1, _float(0.0, 1.0, lo_open=True, hi_open=True)),
        "N": (4096, _int(1)),
        "replicates": (10, _int(1)),
        "s_const": (2.0, _float(0.0, lo_open=True)),
    }),
    "psd-contrast": (("kernel",), {
        "n_points": (20, _int(3)),
        "n_draws": (200, _int(1)),
        "mean_draws": (2000, _int(1)),
        "tol": (1e-6, _float(0.0)),
        "spacing": (1.5, _float(0.0, lo_open=True)),
        "min_fraction": (0.4, _float(0.0, 1.0)),
        "mean_tol": (1e-6, _float(0.0)),
    }),
    "synth": (("kernel", "rho"), {
        "m_sweep": ([16, 64, 256, 1024], _increasing_ints()),
        "seeds": (5, _int(1)),
        "grid_per_axis": (21, _int(2)),
        "reference_nodes": (16, _int(2)),
        "slack": (0.1, _float(0.0)),
        "final_tol": (0.05, _float(0.0, lo_open=True)),
        "refit_max_m": (256, _int(0)),
        "nnls_sizes": ([10, 30, 100, 300, 1000], _increasing_ints()),
        "nnls_points": (40, _int(2)),
        "nnls_tol": (1e-8, _float(0.0, lo_open=True)),
        "nnls_max_iter": (10_000, _int(1)),
    }),
    "train": (("kernel", "rho"), {
        "N": (256, _int(1)),
        "lambda": (1e-6, _float(0.0)),
        "data": (None, _optional_str),
        "target": ("sin_pi_x1_cos_pi_x2", _choice(TARGET_FUNCTIONS)),
        "train_per_axis": (31, _int(2)),
    }),
}

EXPERIMENTS = tuple(SCHEMAS)

DEFAULT_KERNELS = {
    "mc-rate": RandomKernel.deterministic(BaseKernel.gaussian(1.0)),
    "uniform-bound": RandomKernel.sign_mixture(),
    "smoothing": RandomKernel.sign_mixture(),
    "psd-contrast": RandomKernel.sign_mixture(),
    "synth": RandomKernel.deterministic(BaseKernel.gaussian(1.0)),
    "train": RandomKernel.deterministic(BaseKernel.gaussian(1.0)),
}

DEFAULT_COEFFICIENTS = {
    "mc-rate": CoefficientFn.constant(1.0),
    "uniform-bound": CoefficientFn.constant(1.0),
    "smoothing": CoefficientFn.indicator_box({"t": (0.0, None)}),
}

TOP_LEVEL = ("schema_version", "experiment", "seed", "d", "kernel", "rho", "coefficient",
             "params", "out")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated config with components resolved to objects."""

    experiment: str
    seed: int
    d: int
    kernel: RandomKernel = None
    rho: ParamMeasure = None
    coefficient: CoefficientFn = None
    params: dict = field(default_factory=dict)
    out: str = None
    base_dir: str = "."

    def with_seed(self, seed):
        return ExperimentConfig(self.experiment, _seed(seed, "seed"), self.d, self.kernel,
                                self.rho, self.coefficient, dict(self.params), self.out,
                                self.base_dir)

    def resolved(self):
        """JSON-ready echo of every resolved component and parameter."""
        rec = {"schema_version": SCHEMA_VERSION, "experiment": self.experiment,
               "seed": self.seed, "d": self.d}
        for key in ("kernel", "rho", "coefficient"):
            obj = getattr(self, key)
            if obj is not None:
                rec[key] = obj.to_record()
        params = {}
        for k, v in self.params.items():
            params[k] = v.to_record() if isinstance(v, BaseKernel) else v
        rec["params"] = params
        return rec


def _seed(v, name):
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= MAX_SEED:
        raise ConfigError("expected an integer in [0, 2**64 - 1]", name)
    return v


def _component(doc, key, parse):
    try:
        return parse(doc[key])
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc), key) from None


def _random_kernel(rec):
    if not isinstance(rec, dict):
        raise ValueError("expected a kernel record")
    return RandomKernel.from_record(rec)


def _measure(rec):
    if not isinstance(rec, dict):
        raise ValueError("expected a measure record")
    return ParamMeasure.from_record(rec)


def _coefficient(rec):
    if not isinstance(rec, dict):
        raise ValueError("expected a coefficient record")
    return CoefficientFn.from_record(rec)


def check_uniform_hypotheses(kernel, rho, coefficient=None):
    """Reject setups outside the uniform-approximation guarantee.

    The guarantee needs a finite pathwise Lipschitz constant, parameters
    supported in the unit product ball and a bounded continuous coefficient.
    """
    if not math.isfinite(kernel.lipschitz):
        raise HypothesisError(f"unbounded Lipschitz constant for kernel family {kernel.family!r}",
                              "kernel")
    if not rho.within_unit_product_ball():
        raise HypothesisError("measure support is not inside the unit product ball "
                              "|a| <= 1, |b| <= 1, |t| <= 1", "rho")
    if coefficient is not None:
        if not coefficient.is_continuous:
            raise HypothesisError("coefficient must be continuous", "coefficient")
        if not math.isfinite(coefficient.sup_bound):
            raise HypothesisError("coefficient needs a finite sup bound", "coefficient")


def parse_config(doc, base_dir="."):
    """Validate a config document and resolve its components.

    Raises
    ------
    ConfigError
        With ``field`` set to the offending key path.
    HypothesisError
        When a uniform-bound or smoothing setup breaks a required hypothesis.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError("unknown key", unknown[0])
    if "schema_version" not in doc:
        raise ConfigError("missing required key", "schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version (supported: {SCHEMA_VERSION})",
                          "schema_version")
    experiment = doc.get("experiment")
    if experiment not in SCHEMAS:
        raise ConfigError(f"expected one of {list(EXPERIMENTS)}", "experiment")
    components, schema = SCHEMAS[experiment]
    for key in ("kernel", "rho", "coefficient"):
        if key in doc and key not in components:
            raise ConfigError(f"not used by experiment {experiment!r}", key)

    seed = _seed(doc.get("seed", 0), "seed")
    d = _int(1)(doc.get("d", 2), "d")

    kernel = rho = coef = None
    if "kernel" in components:
        kernel = _component(doc, "kernel", _random_kernel) if "kernel" in doc \
            else DEFAULT_KERNELS[experiment]
    if "rho" in components:
        if "rho" in doc:
            rho = _component(doc, "rho", _measure)
            if "d" in doc and rho.d != d:
                raise ConfigError(f"measure dimension {rho.d} differs from d={d}", "rho.d")
            d = rho.d
        else:
            rho = ParamMeasure.product_ball(d, name="unit_product_ball")
    if "coefficient" in components:
        coef = _component(doc, "coefficient", _coefficient) if "coefficient" in doc \
            else DEFAULT_COEFFICIENTS[experiment]

    raw = doc.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("expected an object", "params")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError("unknown parameter", f"params.{unknown[0]}")
    params = {}
    for name, (default, check) in schema.items():
        value = raw[name] if name in raw else copy.deepcopy(default)
        params[name] = check(value, f"params.{name}")

    if experiment == "uniform-bound":
        check_uniform_hypotheses(kernel, rho, coef)
    elif experiment == "smoothing":
        check_uniform_hypotheses(kernel, rho)
        if coef.form != "indicator_box":
            raise ConfigError("smoothing needs an indicator_box coefficient", "coefficient.form")

    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("expected a path string", "out")
    return ExperimentConfig(experiment, seed, d, kernel, rho, coef, params, out, base_dir)


def load_config(path):
    """Read and validate a config file; IO and JSON errors become :class:`ConfigError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", "config") from None
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def default_config(experiment, **overrides):
    """Config for ``experiment`` with every default, optionally overriding params."""
    doc = {"schema_version": SCHEMA_VERSION, "experiment": experiment}
    if overrides:
        doc["params"] = overrides
    return parse_config(doc)
