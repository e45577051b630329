"""Ridge parameters ``z = (a, b, t)`` and batches of them."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class RidgeParam:
    """A single point ``(a, b, t)`` of the parameter space ``R^d x R x R``."""

    a: np.ndarray
    b: float
    t: float

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "t", float(self.t))
        if not (np.all(np.isfinite(a)) and np.isfinite(self.b) and np.isfinite(self.t)):
            raise ValueError("ridge parameter entries must be finite")

    def __eq__(self, other):
        if not isinstance(other, RidgeParam):
            return NotImplemented
        return np.array_equal(self.a, other.a) and self.b == other.b and self.t == other.t

    def __hash__(self):
        return hash((self.a.tobytes(), self.b, self.t))

    @property
    def d(self):
        return self.a.shape[0]

    def to_record(self):
        return {"a": self.a.tolist(), "b": self.b, "t": self.t}

    @classmethod
    def from_record(cls, rec):
        return cls(rec["a"], rec["b"], rec["t"])


class ParamBatch:
    """Structure-of-arrays container for ``n`` ridge parameters.

    Attributes
    ----------
    A : (n, d) ndarray
    b, t : (n,) ndarray
    """

    __slots__ = ("A", "b", "t")

    def __init__(self, A, b, t):
        A = np.ascontiguousarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError(f"A must be 2-D, got shape {A.shape}")
        b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
        t = np.ascontiguousarray(t, dtype=np.float64).reshape(-1)
        if not (A.shape[0] == b.shape[0] == t.shape[0]):
            raise ValueError("A, b and t must have the same number of rows")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(t))):
            raise ValueError("ridge parameter entries must be finite")
        self.A, self.b, self.t = A, b, t

    @classmethod
    def from_params(cls, params, d=None):
        params = list(params)
        if not params:
            if d is None:
                raise ValueError("need d to build an empty batch")
            return cls(np.empty((0, d)), [], [])
        dims = {p.d for p in params}
        if len(dims) != 1:
            raise ValueError(f"mixed ambient dimensions {sorted(dims)}")
        return cls(np.stack([p.a for p in params]), [p.b for p in params],
                   [p.t for p in params])

    @property
    def d(self):
        return self.A.shape[1]

    def __len__(self):
        return self.A.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return RidgeParam(self.A[idx], self.b[idx], self.t[idx])
        return ParamBatch(self.A[idx], self.b[idx], self.t[idx])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def coords(self):
        """Return the ``(n, d + 2)`` matrix of stacked ``(a, b, t)`` rows."""
        return np.column_stack([self.A, self.b, self.t])

    def concat(self, other):
        return ParamBatch(np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]),
                          np.concatenate([self.t, other.t]))

    def __eq__(self, other):
        if not isinstance(other, ParamBatch):
            return NotImplemented
        return (np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b)
                and np.array_equal(self.t, other.t))

    def __repr__(self):
        return f"ParamBatch(n={len(self)}, d={self.d})"

    def to_record(self):
        return {"A": self.A.tolist(), "b": self.b.tolist(), "t": self.t.tolist()}

    @classmethod
    def from_record(cls, rec, d=None):
        A = np.asarray(rec["A"], dtype=np.float64)
        if A.size == 0:
            A = A.reshape(0, d if d is not None else 0)
        return cls(A, rec["b"], rec["t"])
