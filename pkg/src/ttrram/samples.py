"""Sets of sampled entries of a tensor."""

import numpy as np


class SampleSet:
    """Known entries ``values[s] = A[indices[s]]`` of a tensor of given shape.

    Indices are 0-based and stored as an ``(m, d)`` int64 array. Instances are
    treated as immutable; :meth:`with_values` shares the index array.

    Parameters
    ----------
    indices : array_like, shape (m, d)
    values : array_like, shape (m,)
    shape : sequence of int
    validate : bool
        Check bounds and uniqueness of the indices.
    """

    __slots__ = ("indices", "values", "shape")

    def __init__(self, indices, values, shape, validate=True):
        shape = tuple(int(n) for n in shape)
        indices = np.ascontiguousarray(indices, dtype=np.int64).reshape(-1, len(shape))
        values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
        if validate:
            if indices.shape[0] != values.shape[0]:
                raise ValueError("indices and values differ in length")
            if np.any(indices < 0) or np.any(indices >= np.asarray(shape)):
                raise IndexError("sample index out of range")
            flat = np.ravel_multi_index(indices.T, shape)
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate sample indices")
        indices.setflags(write=False)
        values.setflags(write=False)
        self.indices = indices
        self.values = values
        self.shape = shape

    def __len__(self):
        return self.indices.shape[0]

    @property
    def ratio(self):
        """Fraction of all entries that are sampled."""
        return len(self) / float(np.prod(self.shape))

    def norm(self):
        return float(np.linalg.norm(self.values))

    def with_values(self, values):
        return SampleSet(self.indices, values, self.shape, validate=False)

    def dense(self):
        """Dense tensor equal to the samples on the set and zero elsewhere."""
        out = np.zeros(self.shape)
        out[tuple(self.indices.T)] = self.values
        return out

    @classmethod
    def from_dense(cls, a, indices):
        a = np.asarray(a, dtype=np.float64)
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, a.ndim)
        return cls(indices, a[tuple(indices.T)], a.shape)

    @classmethod
    def full_grid(cls, a):
        """Every entry of the dense tensor ``a``."""
        a = np.asarray(a, dtype=np.float64)
        idx = np.stack(np.unravel_index(np.arange(a.size), a.shape), axis=1)
        return cls(idx, a.reshape(-1), a.shape, validate=False)

    def __repr__(self):
        return f"SampleSet(shape={self.shape}, size={len(self)}, ratio={self.ratio:.4g})"
