"""Sparse cubical tensors and the polynomial maps they induce.

A :class:`SparseTensor` of order ``d`` and dimension ``n`` stores its
nonzeros in coordinate form.  Its main job is the contraction

    T(x)_{i1} = sum_{i2..id} t[i1, i2, ..., id] * x[i2] * ... * x[id]

evaluated in a single pass over the stored entries.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from itertools import permutations

import numpy as np

__all__ = [
    "SparseTensor",
    "apply",
    "apply_mode",
    "duality_map",
    "conjugate",
    "p_norm",
    "rayleigh",
    "rayleigh_gradient",
    "read_tensor",
    "write_tensor",
]


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("TENSPECT_THREADS", "1")))
    except ValueError:
        return 1


class SparseTensor:
    """Order-``d`` tensor with every mode of size ``n``, in COO storage.

    Parameters
    ----------
    order : int
        Number of modes ``d >= 2``.
    dim : int
        Size of every mode ``n >= 1``.
    indices : array_like of int, shape (nnz, order)
        Zero-based index tuples.
    values : array_like of float, shape (nnz,)
        Entry values.  Exact zeros are dropped.
    symmetric : bool
        If True, each stored tuple is the sorted representative of its
        index multiset and stands for every permutation of itself.
    merge : {"sum", "error"}
        What to do with repeated index tuples.

    Notes
    -----
    Instances are treated as immutable; the index and value arrays are
    marked read-only.
    """

    def __init__(self, order, dim, indices, values, symmetric=False, merge="sum"):
        order = int(order)
        dim = int(dim)
        if order < 2:
            raise ValueError(f"tensor order must be >= 2, got {order}")
        if dim < 1:
            raise ValueError(f"tensor dimension must be >= 1, got {dim}")

        idx = np.asarray(indices, dtype=np.int64).reshape(-1, order)
        val = np.asarray(values, dtype=np.float64).reshape(-1)
        if idx.shape[0] != val.shape[0]:
            raise ValueError("indices and values have different lengths")
        if idx.size and (idx.min() < 0 or idx.max() >= dim):
            raise ValueError(f"index out of range [0, {dim})")
        if symmetric and idx.shape[0] and np.any(np.diff(idx, axis=1) < 0):
            raise ValueError("symmetric storage requires sorted index tuples")

        idx, val = _canonicalize(idx, val, dim, merge)
        keep = val != 0.0
        idx, val = idx[keep], val[keep]
        idx.setflags(write=False)
        val.setflags(write=False)

        self.order = order
        self.dim = dim
        self.indices = idx
        self.values = val
        self.symmetric = bool(symmetric)
        self._rows, self._rest, self._weights = self._expand_mode1()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_entries(cls, order, dim, entries, symmetric=False, one_based=False):
        """Build from an iterable of ``(index_tuple, value)`` pairs."""
        entries = list(entries)
        shift = 1 if one_based else 0
        idx = np.array([[i - shift for i in t] for t, _ in entries], dtype=np.int64)
        val = np.array([v for _, v in entries], dtype=np.float64)
        return cls(order, dim, idx.reshape(-1, order), val, symmetric=symmetric)

    @classmethod
    def from_dense(cls, array, symmetric=False):
        """Build from a dense ``n x ... x n`` array.

        With ``symmetric=True`` only sorted tuples are read; the caller is
        responsible for the array actually being symmetric.
        """
        a = np.asarray(array, dtype=np.float64)
        if a.ndim < 2 or len(set(a.shape)) != 1:
            raise ValueError("dense tensor must be cubical with at least 2 modes")
        idx = np.argwhere(a != 0)
        if symmetric:
            idx = idx[np.all(np.diff(idx, axis=1) >= 0, axis=1)]
        return cls(a.ndim, a.shape[0], idx, a[tuple(idx.T)], symmetric=symmetric)

    def _expand_mode1(self):
        """Flatten storage into (row, remaining indices, weight) triples.

        For symmetric storage every distinct index of a representative takes
        the leading slot once, weighted by the number of distinct orderings
        of the remaining ``d - 1`` indices.
        """
        if not self.symmetric:
            return self.indices[:, 0], self.indices[:, 1:], self.values.copy()

        rows, rest, weights = [], [], []
        d = self.order
        for tup, v in zip(self.indices.tolist(), self.values.tolist()):
            counts = Counter(tup)
            for a in counts:
                remaining = list(tup)
                remaining.remove(a)
                c = Counter(remaining)
                mult = math.factorial(d - 1)
                for m in c.values():
                    mult //= math.factorial(m)
                rows.append(a)
                rest.append(remaining)
                weights.append(v * mult)
        rows = np.array(rows, dtype=np.int64)
        rest = np.array(rest, dtype=np.int64).reshape(-1, d - 1)
        return rows, rest, np.array(weights, dtype=np.float64)

    # -- basic properties -----------------------------------------------------

    @property
    def nnz(self) -> int:
        """Number of stored entries."""
        return int(self.values.shape[0])

    @property
    def shape(self) -> tuple:
        return (self.dim,) * self.order

    def __repr__(self):
        kind = "symmetric " if self.symmetric else ""
        return f"SparseTensor({kind}order={self.order}, dim={self.dim}, nnz={self.nnz})"

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    def full_entries(self):
        """Return ``(indices, values)`` with symmetric storage expanded."""
        if not self.symmetric:
            return self.indices, self.values
        idx, val = [], []
        for tup, v in zip(self.indices.tolist(), self.values.tolist()):
            for perm in set(permutations(tup)):
                idx.append(perm)
                val.append(v)
        idx = np.array(idx, dtype=np.int64).reshape(-1, self.order)
        return idx, np.array(val, dtype=np.float64)

    def to_dense(self) -> np.ndarray:
        """Dense copy; only sensible for small tensors."""
        out = np.zeros(self.shape)
        idx, val = self.full_entries()
        out[tuple(idx.T)] = val
        return out

    def abs(self) -> "SparseTensor":
        """Entrywise absolute value, same storage layout."""
        return SparseTensor(
            self.order, self.dim, self.indices, np.abs(self.values), symmetric=self.symmetric
        )

    # -- contractions ---------------------------------------------------------

    def _check_vector(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"vector of length {self.dim} expected, got shape {x.shape}")
        return x

    def apply(self, x, threads=None):
        """Contract every mode except the first against ``x``.

        ``threads`` splits the entries into fixed chunks whose partial sums
        are added in chunk order, so results depend only on the thread count.
        Defaults to ``$TENSPECT_THREADS`` (1 if unset).
        """
        x = self._check_vector(x)
        threads = _thread_cap() if threads is None else max(1, int(threads))
        nnz = self._rows.shape[0]
        if threads == 1 or nnz < 4096 * threads:
            return self._apply_chunk(x, 0, nnz)
        bounds = np.linspace(0, nnz, threads + 1).astype(np.int64)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(lambda k: self._apply_chunk(x, bounds[k], bounds[k + 1]), range(threads))
            )
        out = parts[0]
        for part in parts[1:]:
            out = out + part
        return out

    def _apply_chunk(self, x, lo, hi):
        prod = self._weights[lo:hi] * np.prod(x[self._rest[lo:hi]], axis=1)
        return np.bincount(self._rows[lo:hi], weights=prod, minlength=self.dim)

    def apply_mode(self, x, k):
        """Contract every mode except mode ``k`` (1-based) against ``x``."""
        x = self._check_vector(x)
        if not 1 <= k <= self.order:
            raise ValueError(f"mode must be in [1, {self.order}], got {k}")
        if self.symmetric or k == 1:
            return self.apply(x)
        others = [m for m in range(self.order) if m != k - 1]
        prod = self.values * np.prod(x[self.indices[:, others]], axis=1)
        return np.bincount(self.indices[:, k - 1], weights=prod, minlength=self.dim)

    def support_apply(self, mask):
        """Boolean abstraction of :meth:`apply` for a nonnegative tensor.

        Entry ``i`` of the result is True iff some positive entry with leading
        index ``i`` has all its other indices inside ``mask``.  No floating
        point is involved, so underflow cannot fake a zero.
        """
        mask = np.asarray(mask, dtype=bool)
        hit = np.all(mask[self._rest], axis=1) & (self._weights > 0)
        out = np.zeros(self.dim, dtype=bool)
        out[self._rows[hit]] = True
        return out


def _canonicalize(idx, val, dim, merge):
    if idx.shape[0] == 0:
        return idx.copy(), val.copy()
    keys = np.ravel_multi_index(tuple(idx.T), (dim,) * idx.shape[1])
    order = np.argsort(keys, kind="stable")
    keys, idx, val = keys[order], idx[order], val[order]
    uniq, start = np.unique(keys, return_index=True)
    if uniq.shape[0] != keys.shape[0]:
        if merge == "error":
            raise ValueError("duplicate index tuples")
        val = np.add.reduceat(val, start)
        idx = idx[start]
    return np.ascontiguousarray(idx), np.ascontiguousarray(val)


# -- free functions -----------------------------------------------------------


def apply(t: SparseTensor, x) -> np.ndarray:
    """``T(x)``; see :meth:`SparseTensor.apply`."""
    return t.apply(x)


def apply_mode(t: SparseTensor, x, k: int) -> np.ndarray:
    """``T_k(x)``; see :meth:`SparseTensor.apply_mode`."""
    return t.apply_mode(x, k)


def conjugate(p: float) -> float:
    """Hoelder conjugate exponent ``p / (p - 1)``."""
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    return p / (p - 1.0)


def duality_map(x, p: float) -> np.ndarray:
    """Componentwise ``sign(x) * |x|**(p - 1)``; the identity for ``p == 2``."""
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    x = np.asarray(x, dtype=np.float64)
    if p == 2:
        return x.copy()
    return np.sign(x) * np.abs(x) ** (p - 1.0)


def p_norm(x, p: float) -> float:
    """The l^p norm, scaled by the largest entry to avoid overflow."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(np.asarray(x, dtype=np.float64))
    m = a.max(initial=0.0)
    if m == 0.0:
        return 0.0
    if p == 2:
        return float(m * np.sqrt(np.sum((a / m) ** 2)))
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def rayleigh(t: SparseTensor, x, p: float) -> float:
    """Rayleigh quotient ``x^T T(x) / ||x||_p^d``."""
    x = np.asarray(x, dtype=np.float64)
    nrm = p_norm(x, p)
    if nrm == 0.0:
        raise ValueError("Rayleigh quotient undefined at the zero vector")
    u = x / nrm
    return float(u @ t.apply(u))


def rayleigh_gradient(t: SparseTensor, x, p: float) -> np.ndarray:
    """Gradient of :func:`rayleigh` in ``x``; requires a symmetric tensor.

    Symmetry is checked structurally for symmetric storage and by comparing
    mode contractions otherwise.
    """
    x = np.asarray(x, dtype=np.float64)
    nrm = p_norm(x, p)
    if nrm == 0.0:
        raise ValueError("gradient undefined at the zero vector")
    if not t.symmetric and not _is_symmetric(t):
        raise ValueError("rayleigh_gradient requires a symmetric tensor")
    d = t.order
    tx = t.apply(x)
    return (d / nrm**d) * (tx - (x @ tx / nrm**p) * duality_map(x, p))


def _is_symmetric(t: SparseTensor) -> bool:
    lookup = {tuple(i): v for i, v in zip(t.indices.tolist(), t.values.tolist())}
    for tup, v in lookup.items():
        for perm in set(permutations(tup)):
            if lookup.get(perm) != v:
                return False
    return True


# -- text format --------------------------------------------------------------


def write_tensor(t: SparseTensor, path) -> None:
    """Write ``d n nnz sym`` followed by one 1-based entry per line."""
    with open(path, "w") as fh:
        fh.write(f"{t.order} {t.dim} {t.nnz} {int(t.symmetric)}\n")
        for tup, v in zip(t.indices.tolist(), t.values.tolist()):
            fh.write(" ".join(str(i + 1) for i in tup) + f" {v!r}\n")


def read_tensor(path) -> SparseTensor:
    """Read the text format written by :func:`write_tensor`."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty tensor file")
    try:
        d, n, nnz, sym = (int(tok) for tok in lines[0])
    except ValueError as exc:
        raise ValueError(f"{path}: bad header {' '.join(lines[0])!r}") from exc
    if sym not in (0, 1):
        raise ValueError(f"{path}: symmetry flag must be 0 or 1")
    body = lines[1:]
    if len(body) != nnz:
        raise ValueError(f"{path}: header declares {nnz} entries, found {len(body)}")
    idx = np.empty((nnz, d), dtype=np.int64)
    val = np.empty(nnz)
    for r, toks in enumerate(body):
        if len(toks) != d + 1:
            raise ValueError(f"{path}:{r + 2}: expected {d + 1} fields, got {len(toks)}")
        try:
            idx[r] = [int(s) for s in toks[:d]]
            val[r] = float(toks[d])
        except ValueError as exc:
            raise ValueError(f"{path}:{r + 2}: {exc}") from exc
    if nnz and (idx.min() < 1 or idx.max() > n):
        raise ValueError(f"{path}: index out of range [1, {n}]")
    return SparseTensor(d, n, idx - 1, val, symmetric=bool(sym), merge="error")
