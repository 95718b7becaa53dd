"""Test tensors and graph loaders.

Synthetic problems (the 3x3x3 reducible example, tensors A/B/C, the
Kofidis-Regalia tensor) and three-cycle tensors built from graphs read in
Matrix Market or plain edge-list form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import SparseTensor

__all__ = [
    "MotifGraph",
    "DatasetStats",
    "three_cycle_tensor",
    "load_edge_list",
    "dataset_stats",
    "tensor_A",
    "tensor_B",
    "tensor_C",
    "kofidis_regalia_tensor",
    "example_reducible_tensor",
    "example_h_eigenvector",
    "KOFIDIS_REGALIA_START",
    "erdos_renyi_graph",
    "GENERATORS",
]


@dataclass(frozen=True)
class MotifGraph:
    """Simple graph on nodes ``0..n-1`` (no self-loops).

    Undirected graphs keep both orientations of every edge in ``edges``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)
    directed: bool = False

    def __post_init__(self):
        edges = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                continue
            edges.add((u, v))
            if not self.directed:
                edges.add((v, u))
        object.__setattr__(self, "edges", frozenset(edges))

    def relabel(self, perm) -> "MotifGraph":
        """Graph with node ``u`` renamed to ``perm[u]``."""
        perm = list(perm)
        return MotifGraph(self.n, frozenset((perm[u], perm[v]) for u, v in self.edges), self.directed)


@dataclass(frozen=True)
class DatasetStats:
    n: int
    nnz_adjacency: int
    nnz_tensor: int


def three_cycle_tensor(g: MotifGraph) -> SparseTensor:
    """Binary order-3 tensor marking node triples that close a 3-cycle.

    ``t[i, j, k] = 1`` for every ordering of distinct ``i, j, k`` whose three
    pairs are all adjacent, ignoring edge orientation.  For directed graphs
    that covers every triangle motif; for undirected ones it is the usual
    triangle indicator.  Triangles are found by intersecting neighbourhoods
    along each edge, never by scanning all triples.
    """
    nbrs = [set() for _ in range(g.n)]
    for u, v in g.edges:
        nbrs[u].add(v)
        nbrs[v].add(u)

    tris = []
    for u in range(g.n):
        for v in nbrs[u]:
            if v <= u:
                continue
            for w in nbrs[u] & nbrs[v]:
                if w > v:
                    tris.append((u, v, w))

    if not tris:
        return SparseTensor(3, g.n, np.empty((0, 3), dtype=np.int64), np.empty(0))
    tri = np.array(tris, dtype=np.int64)
    a, b, c = tri.T
    idx = np.concatenate(
        [np.stack(p, axis=1) for p in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a))]
    )
    return SparseTensor(3, g.n, idx, np.ones(idx.shape[0]))


def load_edge_list(path, directed: bool = False) -> MotifGraph:
    """Read a graph from a Matrix Market file or a plain ``u v`` edge list.

    Matrix Market input keeps its 1-based node numbering and is treated as
    undirected when the header says ``symmetric`` or ``directed`` is False.
    Plain lists may contain ``#`` or ``%`` comments and optional third
    columns; their node labels are compacted to ``0..n-1`` in order of first
    appearance.  Self-loops and explicit zero weights are dropped.
    """
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("%%MatrixMarket"):
        return _load_matrix_market(path, directed)
    return _load_plain(path, directed)


def _load_matrix_market(path, directed):
    from scipy.io import mminfo, mmread

    rows, cols, _, fmt, field_, symmetry = mminfo(str(path))
    if fmt != "coordinate":
        raise ValueError(f"{path}: only coordinate Matrix Market files are supported")
    if rows != cols:
        raise ValueError(f"{path}: adjacency matrix must be square, got {rows}x{cols}")
    m = mmread(str(path)).tocoo()
    keep = m.data != 0 if field_ != "pattern" else np.ones(m.nnz, dtype=bool)
    undirected = symmetry != "general" or not directed
    edges = frozenset(zip(m.row[keep].tolist(), m.col[keep].tolist()))
    return MotifGraph(rows, edges, directed=not undirected)


def _load_plain(path, directed):
    label = {}
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line or line.startswith("%"):
                continue
            toks = line.split()
            if len(toks) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(toks[0]), int(toks[1])
                w = float(toks[2]) if len(toks) > 2 else 1.0
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if u < 0 or v < 0:
                raise ValueError(f"{path}:{lineno}: negative node label")
            if w == 0:
                continue
            for node in (u, v):
                label.setdefault(node, len(label))
            edges.append((label[u], label[v]))
    return MotifGraph(len(label), frozenset(edges), directed=directed)


def dataset_stats(g: MotifGraph, t: SparseTensor | None = None) -> DatasetStats:
    """Node count, stored adjacency nonzeros and three-cycle tensor nonzeros."""
    if t is None:
        t = three_cycle_tensor(g)
    return DatasetStats(g.n, len(g.edges), t.nnz)


def erdos_renyi_graph(n: int, mean_degree: float, seed=None, directed=False) -> MotifGraph:
    """G(n, p) random graph with ``p = mean_degree / (n - 1)``."""
    rng = np.random.default_rng(seed)
    prob = mean_degree / (n - 1)
    if directed:
        mask = rng.random((n, n)) < prob
        np.fill_diagonal(mask, False)
    else:
        mask = np.triu(rng.random((n, n)) < prob, k=1)
    u, v = np.nonzero(mask)
    return MotifGraph(n, frozenset(zip(u.tolist(), v.tolist())), directed=directed)


# -- synthetic tensors ----------------------------------------------------------


def _check_n(n):
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")


def tensor_A(n: int) -> SparseTensor:
    """Irreducible, not primitive and not weakly positive.

    ``a[1, j, j] = 1`` for ``j >= 2`` and ``a[i, 1, 1] = 1`` for ``i >= 2``
    (1-based).
    """
    _check_n(n)
    entries = {(0, j, j): 1.0 for j in range(1, n)}
    entries.update({(i, 0, 0): 1.0 for i in range(1, n)})
    return SparseTensor(3, n, list(entries), list(entries.values()))


def tensor_B(n: int) -> SparseTensor:
    """``b[i, j, j] = i + j`` for ``i != j`` (1-based values)."""
    _check_n(n)
    idx = [(i, j, j) for i in range(n) for j in range(n) if i != j]
    val = [i + j + 2.0 for i, j, _ in idx]
    return SparseTensor(3, n, idx, val)


def tensor_C(n: int) -> SparseTensor:
    """Primitive but not weakly positive."""
    _check_n(n)
    entries = {(0, n - 1, n - 1): 1.0}
    entries.update({(i, 0, 0): 1.0 for i in range(1, n)})
    entries.update({(n - 1, j, j): 1.0 for j in range(n - 1)})
    return SparseTensor(3, n, list(entries), list(entries.values()))


_KOFIDIS_REGALIA = {
    (1, 1, 1, 1): 0.2883,
    (1, 1, 1, 2): -0.0031,
    (1, 1, 1, 3): 0.1973,
    (1, 1, 2, 2): -0.2485,
    (1, 1, 2, 3): -0.2939,
    (1, 1, 3, 3): 0.3847,
    (1, 2, 2, 2): 0.2972,
    (1, 2, 2, 3): 0.1862,
    (1, 2, 3, 3): 0.0919,
    (1, 3, 3, 3): -0.3619,
    (2, 2, 2, 2): 0.1241,
    (2, 2, 2, 3): -0.3420,
    (2, 2, 3, 3): 0.2127,
    (2, 3, 3, 3): 0.2727,
    (3, 3, 3, 3): -0.3054,
}

#: Starting vector used with the Kofidis-Regalia tensor in the literature.
KOFIDIS_REGALIA_START = np.array([-0.2695, 0.1972, 0.3270])


def kofidis_regalia_tensor(absolute: bool = True) -> SparseTensor:
    """Symmetric 3x3x3x3 Kofidis-Regalia tensor, optionally entrywise ``|.|``."""
    idx = [tuple(i - 1 for i in k) for k in _KOFIDIS_REGALIA]
    val = np.array(list(_KOFIDIS_REGALIA.values()))
    if absolute:
        val = np.abs(val)
    return SparseTensor(4, 3, idx, val, symmetric=True)


def example_reducible_tensor() -> SparseTensor:
    """The 3x3x3 nonnegative tensor that is not weakly irreducible.

    Frontal slices ``T[:, :, k]`` (1-based)::

        k=1: t131 = t231 = 1
        k=2: t122 = 1
        k=3: t123 = t333 = 1

    ``T(1) = [3, 1, 1]``; its nonnegative H-eigenvectors are ``[0, 0, 1]``
    and ``[(3 + 5**.5) / 2, (1 + 5**.5) / 2, 1]``, both with eigenvalue 1.
    """
    entries = [(1, 3, 1), (2, 3, 1), (1, 2, 2), (1, 2, 3), (3, 3, 3)]
    return SparseTensor.from_entries(3, 3, [(e, 1.0) for e in entries], one_based=True)


def example_h_eigenvector() -> np.ndarray:
    """Positive H-eigenvector of :func:`example_reducible_tensor`, unnormalized."""
    s5 = np.sqrt(5.0)
    return np.array([(3 + s5) / 2, (1 + s5) / 2, 1.0])


GENERATORS = {
    "example310": lambda n=None: example_reducible_tensor(),
    "tensorA": lambda n=10: tensor_A(n),
    "tensorB": lambda n=10: tensor_B(n),
    "tensorC": lambda n=10: tensor_C(n),
    "kofidis-abs": lambda n=None: kofidis_regalia_tensor(absolute=True),
}
