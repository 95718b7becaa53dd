"""Shifted higher-order power methods for Perron l^p-eigenpairs.

Two shifted fixed-point maps are provided for a nonnegative tensor ``T``:

* ``alg1``:  ``y = Phi_q(T(x)) + sigma * sign(T(x)) * x``
* ``alg2``:  ``y = Phi_q(T(x) + sigma * sign(T(x)) * Phi_p(x))``

each followed by l^p normalization.  With ``sigma = 0`` both are the plain
power method; at ``p = 2`` they coincide with SS-HOPM and at ``p = d`` the
second one is the LZI iteration.  For ``p > d`` both converge to the unique
eigenvector in the cone ``C_+(T)`` from any positive start.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .tensor import SparseTensor, conjugate, duality_map, p_norm, rayleigh

__all__ = [
    "SolveConfig",
    "IterationTrace",
    "ConePattern",
    "EmptyConeError",
    "step",
    "step_alg1",
    "step_alg2",
    "solve",
    "residual",
    "cone_pattern",
    "hilbert_distance",
    "is_weakly_irreducible",
    "tensor_graph",
    "random_start",
]

log = logging.getLogger(__name__)

VARIANTS = ("alg1", "alg2")
STOP_RULES = ("stepdiff", "residual", "none")


class EmptyConeError(ValueError):
    """The stabilized support of ``T^k(1)`` is empty."""


@dataclass
class SolveConfig:
    """Parameters of a shifted power iteration.

    ``tol`` applies to ``||x_{k+1} - x_k||_p`` when ``stop_on == "stepdiff"``
    and to the sup-norm eigen-residual when ``stop_on == "residual"``;
    ``"none"`` always runs ``max_iter`` steps.
    """

    p: float = 3.0
    sigma: float = 0.0
    variant: str = "alg1"
    tol: float = 1e-10
    max_iter: int = 10000
    seed: int | None = 0
    x0: np.ndarray | None = None
    stop_on: str = "stepdiff"
    keep_iterates: bool = True

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.stop_on not in STOP_RULES:
            raise ValueError(f"stop_on must be one of {STOP_RULES}, got {self.stop_on!r}")
        if self.x0 is not None:
            self.x0 = np.asarray(self.x0, dtype=np.float64)
            if np.any(self.x0 <= 0):
                raise ValueError("explicit start vector must be entrywise positive")

    @property
    def q(self) -> float:
        return conjugate(self.p)


@dataclass
class IterationTrace:
    """Per-iterate record of a (possibly restarted) power iteration.

    Index ``k = 0`` is the normalized start vector.  ``step_diffs[0]`` is NaN.
    """

    lambdas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    step_diffs: list = field(default_factory=list)
    restart_flags: list = field(default_factory=list)
    map_applications: list = field(default_factory=list)
    wall_ns: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    seed: int | None = None
    converged: bool = False
    events: list = field(default_factory=list)

    def record(self, x, lam, res, diff, n_maps, t_ns, restart=False, keep=True):
        self.lambdas.append(float(lam))
        self.residuals.append(float(res))
        self.step_diffs.append(float(diff))
        self.restart_flags.append(bool(restart))
        self.map_applications.append(int(n_maps))
        self.wall_ns.append(int(t_ns))
        if keep:
            self.iterates.append(np.array(x, copy=True))

    def __len__(self):
        return len(self.lambdas)

    @property
    def iterations(self) -> int:
        return len(self.lambdas) - 1

    @property
    def total_map_applications(self) -> int:
        return self.map_applications[-1] if self.map_applications else 0

    @property
    def wall_time(self) -> float:
        """Seconds from the start of the run to the last record."""
        return self.wall_ns[-1] * 1e-9 if self.wall_ns else 0.0

    def maps_to_residual(self, target: float):
        """Map applications until the residual first drops below ``target``.

        Returns ``None`` if it never does.
        """
        for r, m in zip(self.residuals, self.map_applications):
            if r < target:
                return m
        return None

    def time_to_residual(self, target: float):
        for r, t in zip(self.residuals, self.wall_ns):
            if r < target:
                return t * 1e-9
        return None


@dataclass(frozen=True)
class ConePattern:
    """Stabilized positive support of ``T^k(1)``.

    ``support[i]`` is True where vectors of ``C_+(T)`` are positive; ``k0``
    is the first ``k >= 1`` from which the pattern no longer changes.
    """

    support: np.ndarray
    k0: int

    @property
    def empty(self) -> bool:
        return not bool(self.support.any())


# -- building blocks ----------------------------------------------------------


def residual(t: SparseTensor, x, lam: float, p: float) -> float:
    """``||T(x) - lam * Phi_p(x)||_inf``."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.max(np.abs(t.apply(x) - lam * duality_map(x, p)), initial=0.0))


def cone_pattern(t: SparseTensor) -> ConePattern:
    """Iterate the zero pattern of ``T^k(1)`` until it stops shrinking."""
    if not t.is_nonnegative():
        raise ValueError("cone pattern is only defined for nonnegative tensors")
    prev = np.ones(t.dim, dtype=bool)
    cur = t.support_apply(prev)
    k = 1
    while True:
        nxt = t.support_apply(cur)
        if np.array_equal(nxt, cur):
            return ConePattern(cur, k)
        cur = nxt
        k += 1


def hilbert_distance(x, y) -> float:
    """Hilbert projective distance ``log(max(x/y) / min(x/y))``.

    Both vectors must be nonnegative with the same positive support.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("vectors must have the same length")
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("Hilbert distance needs nonnegative vectors")
    sx, sy = x > 0, y > 0
    if not np.array_equal(sx, sy):
        raise ValueError("vectors have different supports")
    if not sx.any():
        raise ValueError("vectors have empty support")
    r = np.log(x[sx]) - np.log(y[sx])
    return float(r.max() - r.min())


def tensor_graph(t: SparseTensor) -> nx.DiGraph:
    """Directed graph with ``u -> v`` iff some positive entry has ``u`` in the
    leading mode and ``v`` in any other mode.  Self-loops are omitted."""
    idx, val = t.full_entries()
    idx = idx[val > 0]
    g = nx.DiGraph()
    g.add_nodes_from(range(t.dim))
    for m in range(1, t.order):
        pairs = np.unique(idx[:, [0, m]], axis=0)
        g.add_edges_from((u, v) for u, v in pairs.tolist() if u != v)
    return g


def is_weakly_irreducible(t: SparseTensor, return_graph=False):
    """Whether the tensor graph of a nonnegative tensor is strongly connected."""
    g = tensor_graph(t)
    ok = t.dim == 1 or nx.is_strongly_connected(g)
    return (ok, g) if return_graph else ok


def random_start(n: int, p: float, seed=None, support=None) -> np.ndarray:
    """Uniform(0, 1) entries, normalized to unit l^p norm."""
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    while np.any(x == 0):  # pragma: no cover - probability ~ 0
        x[x == 0] = rng.random(int(np.sum(x == 0)))
    return x / p_norm(x, p)


def _phi_q(w, q):
    """``Phi_q(w)`` up to a positive factor.

    Inputs with extreme magnitude are divided by ``||w||_inf`` first; the
    direction is unchanged because ``Phi_q`` is positively homogeneous.
    """
    s = np.max(np.abs(w), initial=0.0)
    if s > _BIG or 0.0 < s < 1.0 / _BIG:
        w = w / s
    return duality_map(w, q)


_BIG = 1e100


def _normalize(y, p):
    nrm = p_norm(y, p)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise FloatingPointError("power step produced a zero or non-finite vector")
    return y / nrm


def step(t: SparseTensor, x, p: float, sigma: float = 0.0, variant: str = "alg1",
         z=None, mask=None):
    """One normalized shifted power step.

    ``z = T(x)`` and ``mask = sign(z)`` may be passed in when already known.
    The mask is computed structurally from the support of ``x`` so a
    floating-point underflow in ``z`` never switches the shift off.
    """
    x = np.asarray(x, dtype=np.float64)
    q = conjugate(p)
    if z is None:
        z = t.apply(x)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if sigma == 0.0:
        return _normalize(_phi_q(z, q), p)
    if mask is None:
        mask = t.support_apply(x > 0)
    if variant == "alg1":
        # the shift is not homogeneous with Phi_q(z), so no rescaling here
        y = duality_map(z, q) + sigma * mask * x
    else:
        y = _phi_q(z + sigma * mask * duality_map(x, p), q)
    return _normalize(y, p)


def step_alg1(t: SparseTensor, x, cfg: SolveConfig) -> np.ndarray:
    """``x -> H_sigma(x) / ||H_sigma(x)||_p`` with ``H_sigma = Phi_q(T(x)) + sigma x``."""
    return step(t, x, cfg.p, cfg.sigma, "alg1")


def step_alg2(t: SparseTensor, x, cfg: SolveConfig) -> np.ndarray:
    """``x -> K_sigma(x) / ||K_sigma(x)||_p`` with ``K_sigma = Phi_q(T(x) + sigma Phi_p(x))``."""
    return step(t, x, cfg.p, cfg.sigma, "alg2")


# -- driver ---------------------------------------------------------------------


class _Evaluator:
    """Caches ``T(x)`` so the residual of ``x_k`` and the step from ``x_k``
    share one contraction."""

    def __init__(self, t, cfg):
        self.t = t
        self.cfg = cfg
        self.map_applications = 0

    def observe(self, x):
        """Return ``(z, lam, res)`` for a unit-norm ``x``."""
        z = self.t.apply(x)
        lam = float(x @ z) / p_norm(x, self.cfg.p) ** self.t.order
        res = float(np.max(np.abs(z - lam * duality_map(x, self.cfg.p)), initial=0.0))
        return z, lam, res

    def step(self, x, z):
        self.map_applications += 1
        return step(self.t, x, self.cfg.p, self.cfg.sigma, self.cfg.variant, z=z)


def _stopped(cfg, res, diff):
    if cfg.stop_on == "none":
        return False
    return (diff if cfg.stop_on == "stepdiff" else res) < cfg.tol


def check_problem(t: SparseTensor, cfg: SolveConfig) -> ConePattern:
    """Validate a tensor/config pair and return the cone pattern."""
    if not t.is_nonnegative():
        raise ValueError("shifted power methods require a nonnegative tensor")
    if cfg.x0 is not None and cfg.x0.shape != (t.dim,):
        raise ValueError(f"start vector must have length {t.dim}")
    cone = cone_pattern(t)
    if cone.empty:
        raise EmptyConeError("cone C_+(T) is {0}; no Perron eigenvector to compute")
    if cfg.p <= t.order:
        msg = (f"p={cfg.p} <= d={t.order}: convergence to the Perron eigenvector "
               "is not guaranteed")
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return cone


def initial_vector(t: SparseTensor, cfg: SolveConfig) -> np.ndarray:
    if cfg.x0 is not None:
        return cfg.x0 / p_norm(cfg.x0, cfg.p)
    return random_start(t.dim, cfg.p, cfg.seed)


def solve(t: SparseTensor, cfg: SolveConfig | None = None):
    """Run the configured shifted power method.

    Returns
    -------
    lam : float
        Rayleigh quotient of the final iterate.
    u : ndarray
        Final iterate, unit l^p norm.
    trace : IterationTrace
        ``trace.converged`` is False when ``max_iter`` was hit.
    """
    cfg = cfg or SolveConfig()
    check_problem(t, cfg)
    ev = _Evaluator(t, cfg)
    trace = IterationTrace(seed=cfg.seed if cfg.x0 is None else None)
    t0 = time.perf_counter_ns()

    x = initial_vector(t, cfg)
    z, lam, res = ev.observe(x)
    trace.record(x, lam, res, np.nan, 0, time.perf_counter_ns() - t0, keep=cfg.keep_iterates)

    for _ in range(cfg.max_iter):
        x_new = ev.step(x, z)
        diff = p_norm(x_new - x, cfg.p)
        x = x_new
        z, lam, res = ev.observe(x)
        trace.record(x, lam, res, diff, ev.map_applications,
                     time.perf_counter_ns() - t0, keep=cfg.keep_iterates)
        if _stopped(cfg, res, diff):
            trace.converged = True
            break
    else:
        log.info("no convergence after %d iterations (residual %.3e)", cfg.max_iter, res)

    return lam, x, trace
