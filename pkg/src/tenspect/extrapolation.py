"""Shanks-type extrapolation of vector sequences.

:func:`wynn_epsilon` is the scalar epsilon algorithm.  :class:`Stea2` runs the
second simplified topological epsilon algorithm: a triangular vector
recursion

    z[2j+2, i] = z[2j, i+1]
                 + (e[2j+2, i] - e[2j, i+1]) / (e[2j, i+2] - e[2j, i+1])
                   * (z[2j, i+2] - z[2j, i+1])

started from ``z[0, k] = x_k`` and driven by the scalar table ``e`` of
``y^T x_k``.  ``z[2h, 0]`` is the topological Shanks transform of order ``h``.
:func:`restarted_solve` couples it with a shifted power method by
restarting from each extrapolated vector.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .spectral import (
    IterationTrace,
    SolveConfig,
    _Evaluator,
    _stopped,
    check_problem,
    initial_vector,
)
from .tensor import SparseTensor, p_norm

__all__ = [
    "BREAKDOWN_RTOL",
    "ScalarEpsilonTable",
    "Stea2",
    "Stea2Result",
    "RestartConfig",
    "wynn_epsilon",
    "stea2_extrapolate",
    "shanks_direct",
    "restarted_solve",
]

log = logging.getLogger(__name__)

#: Relative size below which a difference counts as zero.
BREAKDOWN_RTOL = 1e-14


def _tiny(diff, a, b):
    return abs(diff) <= BREAKDOWN_RTOL * max(abs(a), abs(b))


class ScalarEpsilonTable:
    """Wynn epsilon table, grown one input at a time.

    ``column(j)[i]`` is ``eps_j^{(i)}``; column 0 holds the inputs.  Odd
    cells whose defining difference vanishes are stored as ``inf`` and
    the next even cell then takes ``1/inf = 0`` as its correction, so a
    locally stationary sequence reproduces its value.  A vanishing
    difference in an even-column update is a genuine breakdown; the cell
    becomes NaN and every cell that depends on it stays NaN.
    """

    def __init__(self, scalars=()):
        self._cols: list[list[float]] = []
        self.breakdowns: list[tuple[int, int]] = []
        for s in scalars:
            self.append(s)

    def __len__(self):
        return len(self._cols[0]) if self._cols else 0

    def append(self, s: float) -> None:
        """Add ``s`` and fill the new ascending diagonal."""
        k = len(self)
        if not self._cols:
            self._cols.append([])
        self._cols[0].append(float(s))
        for j in range(1, k + 1):
            i = k - j
            if len(self._cols) <= j:
                self._cols.append([])
            self._cols[j].append(self._cell(j, i))

    def _cell(self, j, i):
        prev = self._cols[j - 1]
        a, b = prev[i], prev[i + 1]
        back = self._cols[j - 2][i + 1] if j >= 2 else 0.0
        if np.isnan(a) or np.isnan(b) or np.isnan(back):
            return np.nan
        if j % 2 == 1:
            diff = b - a
            if diff == 0 or _tiny(diff, a, b):
                return np.inf
            return back + 1.0 / diff
        # even column: neighbours are odd cells
        if np.isinf(a) or np.isinf(b):
            return back
        diff = b - a
        if diff == 0 or _tiny(diff, a, b):
            self.breakdowns.append((j, i))
            return np.nan
        return back + 1.0 / diff

    def column(self, j: int) -> np.ndarray:
        return np.array(self._cols[j]) if j < len(self._cols) else np.empty(0)

    def get(self, j: int, i: int) -> float:
        return self._cols[j][i]

    def deepest_even(self):
        """``(j, value)`` of the last finite entry of the deepest even column."""
        for j in range(len(self._cols) - 1, -1, -1):
            if j % 2 == 0:
                col = self._cols[j]
                if col and np.isfinite(col[-1]):
                    return j, col[-1]
        return None, np.nan


def wynn_epsilon(scalars) -> ScalarEpsilonTable:
    """Scalar epsilon algorithm on ``scalars``; even columns are Shanks transforms."""
    scalars = list(scalars)
    if len(scalars) < 3:
        raise ValueError("need at least 3 terms for one even column")
    return ScalarEpsilonTable(scalars)


@dataclass
class Stea2Result:
    value: np.ndarray
    depth: int
    breakdown: bool
    peak_vectors: int


class Stea2:
    """Streaming STEA2 for a fixed order ``h`` and functional ``y``.

    Feed ``x_0, ..., x_{2h}`` through :meth:`push`.  Only the current ascending
    diagonal of the vector triangle is kept, at most ``h + 1`` vectors plus
    the one being formed, which :attr:`peak_vectors` reports.
    """

    def __init__(self, h: int, y):
        if h < 1:
            raise ValueError(f"h must be >= 1, got {h}")
        self.h = int(h)
        self.y = np.asarray(y, dtype=np.float64)
        if not np.any(self.y):
            raise ValueError("functional y must be nonzero")
        self.table = ScalarEpsilonTable()
        self._diag: list[np.ndarray] = []
        self.k = -1
        self.max_col = self.h
        self.breakdown = False
        self.peak_vectors = 0

    def push(self, x) -> None:
        """Add the next term; ``x`` is copied."""
        if self.k >= 2 * self.h:
            raise ValueError(f"STEA2 with h={self.h} takes exactly {2 * self.h + 1} terms")
        x = np.array(x, dtype=np.float64)
        self.k += 1
        k = self.k
        self.table.append(float(self.y @ x))

        diag = self._diag
        new = x
        self.peak_vectors = max(self.peak_vectors, len(diag) + 1)
        # slot m of diag holds z[2m, k-1-2m]; after the update, z[2m, k-2m]
        top = min(self.max_col, k // 2)
        for m in range(1, top + 1):
            i = k - 2 * m
            lo, hi = diag[m - 1], new  # z[2m-2, i+1], z[2m-2, i+2]
            ratio = self._ratio(m, i)
            if ratio is None:
                self.breakdown = True
                self.max_col = top = m - 1
                log.debug("STEA2 breakdown at column %d, index %d", 2 * m, i)
                break
            diag[m - 1] = new
            new = lo + ratio * (hi - lo)
        if top < len(diag):
            diag[top] = new
        else:
            diag.append(new)
        self.peak_vectors = max(self.peak_vectors, len(diag))

    def _ratio(self, m, i):
        e = self.table.get
        num = e(2 * m, i) - e(2 * m - 2, i + 1)
        den = e(2 * m - 2, i + 2) - e(2 * m - 2, i + 1)
        a, b = e(2 * m - 2, i + 2), e(2 * m - 2, i + 1)
        if not (np.isfinite(num) and np.isfinite(den)):
            return None
        if num == 0.0:
            return 0.0
        if den == 0.0 or _tiny(den, a, b):
            return None
        return num / den

    def result(self) -> Stea2Result:
        """Deepest completed column entry after all ``2h + 1`` terms."""
        if self.k != 2 * self.h:
            raise ValueError(f"{self.k + 1} of {2 * self.h + 1} terms pushed")
        depth = min(self.max_col, len(self._diag) - 1)
        return Stea2Result(self._diag[depth].copy(), depth, self.breakdown, self.peak_vectors)


def stea2_extrapolate(xs, y, h: int, full: bool = False):
    """Topological Shanks transform ``z[2h, 0]`` of ``x_0, ..., x_{2h}``.

    On breakdown the last entry of the deepest completed column is returned
    instead; ``full=True`` returns the :class:`Stea2Result` with the flag.
    """
    xs = list(xs)
    if len(xs) != 2 * h + 1:
        raise ValueError(f"need exactly {2 * h + 1} terms for h={h}, got {len(xs)}")
    acc = Stea2(h, y)
    for x in xs:
        acc.push(x)
    res = acc.result()
    return res if full else res.value


def shanks_direct(xs, y, h: int) -> np.ndarray:
    """Same transform through the explicit ``(h+1) x (h+1)`` coefficient system.

    Kept as an independent reference: first row of ones, then rows of
    ``b_i = y^T (x_{i+1} - x_i)``; the result combines ``x_h, ..., x_{2h}``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    b = np.diff(xs @ np.asarray(y, dtype=np.float64))
    a_mat = np.ones((h + 1, h + 1))
    for r in range(h):
        a_mat[r + 1] = b[r : r + h + 1]
    rhs = np.zeros(h + 1)
    rhs[0] = 1.0
    coef = np.linalg.solve(a_mat, rhs)
    return coef @ xs[h : 2 * h + 1]


# -- restarted method -------------------------------------------------------------

Y_POLICIES = ("first_x0_then_last_extrapolate", "fixed")
CONE_POLICIES = ("repair", "fallback")


@dataclass
class RestartConfig:
    """Restart schedule: ``cycles`` rounds of ``2h`` power steps each.

    ``y_policy="fixed"`` uses ``y`` for every cycle; the default uses the
    start vector first and then the latest extrapolated vector.
    ``stop_early`` ends the run as soon as the solve configuration's stopping
    rule is met.

    ``cone_policy`` decides what happens when the extrapolated vector has
    entries on the cone support at or below ``clamp_rtol * ||z||_inf``:
    ``"repair"`` replaces just those entries by the last power iterate's,
    ``"fallback"`` discards the whole extrapolated vector for the cycle.
    """

    h: int = 6
    cycles: int = 6
    y_policy: str = "first_x0_then_last_extrapolate"
    y: np.ndarray | None = None
    stop_early: bool = True
    clamp_rtol: float = 1e-13
    cone_policy: str = "repair"

    def __post_init__(self):
        if self.h < 1:
            raise ValueError(f"h must be >= 1, got {self.h}")
        if self.cycles < 1:
            raise ValueError(f"cycles must be >= 1, got {self.cycles}")
        if self.y_policy not in Y_POLICIES:
            raise ValueError(f"y_policy must be one of {Y_POLICIES}")
        if self.cone_policy not in CONE_POLICIES:
            raise ValueError(f"cone_policy must be one of {CONE_POLICIES}")
        if self.y_policy == "fixed" and self.y is None:
            raise ValueError("y_policy='fixed' needs y")

    @property
    def two_h(self) -> int:
        return 2 * self.h


def _project(z, last, support, p, rtol, policy):
    """Map an extrapolated vector back onto the unit sphere of the cone.

    Entries off the support are zeroed.  Entries on the support that are not
    safely positive are either taken from ``last`` (``"repair"``) or make the
    whole vector unusable (``"fallback"``, returns None).  Returns
    ``(vector, n_repaired)``.
    """
    if not np.all(np.isfinite(z)):
        return None, 0
    scale = np.max(np.abs(z), initial=0.0)
    if scale == 0.0:
        return None, 0
    bad = support & (z <= rtol * scale)
    n_bad = int(bad.sum())
    if n_bad and policy == "fallback":
        return None, n_bad
    out = np.where(support, z, 0.0)
    out[bad] = last[bad]
    nrm = p_norm(out, p)
    if nrm == 0.0:
        return None, n_bad
    return out / nrm, n_bad


def restarted_solve(t: SparseTensor, cfg: SolveConfig | None = None,
                    rcfg: RestartConfig | None = None):
    """Shifted power method with restarted STEA2 acceleration.

    Each cycle takes ``2h`` steps of the configured map from the current
    start, extrapolates, projects the result back to the cone and restarts
    from it.  Restart iterates are flagged in the trace; breakdown and
    fallback events are listed in ``trace.events``.

    Returns ``(lam, u, trace)`` like :func:`~tenspect.spectral.solve`.
    """
    cfg = cfg or SolveConfig()
    rcfg = rcfg or RestartConfig()
    cone = check_problem(t, cfg)
    ev = _Evaluator(t, cfg)
    trace = IterationTrace(seed=cfg.seed if cfg.x0 is None else None)
    keep = cfg.keep_iterates
    t0 = time.perf_counter_ns()

    x = initial_vector(t, cfg)
    z, lam, res = ev.observe(x)
    trace.record(x, lam, res, np.nan, 0, time.perf_counter_ns() - t0, keep=keep)
    y = rcfg.y if rcfg.y_policy == "fixed" else x.copy()

    for cycle in range(rcfg.cycles):
        acc = Stea2(rcfg.h, y)
        acc.push(x)
        done = False
        for _ in range(rcfg.two_h):
            x_new = ev.step(x, z)
            diff = p_norm(x_new - x, cfg.p)
            x = x_new
            z, lam, res = ev.observe(x)
            acc.push(x)
            trace.record(x, lam, res, diff, ev.map_applications,
                         time.perf_counter_ns() - t0, keep=keep)
            if rcfg.stop_early and _stopped(cfg, res, diff):
                done = True
                break
        if done:
            trace.converged = True
            break

        out = acc.result()
        if out.breakdown:
            trace.events.append({"cycle": cycle, "k": len(trace) - 1, "event": "breakdown",
                                 "depth": out.depth})
        x_ext, n_bad = _project(out.value, x, cone.support, cfg.p,
                                rcfg.clamp_rtol, rcfg.cone_policy)
        if x_ext is not None and n_bad:
            trace.events.append({"cycle": cycle, "k": len(trace) - 1, "event": "repair",
                                 "entries": n_bad})
        if x_ext is None:
            trace.events.append({"cycle": cycle, "k": len(trace) - 1, "event": "fallback"})
            log.info("cycle %d: extrapolated vector left the cone, keeping last iterate", cycle)
            continue
        diff = p_norm(x_ext - x, cfg.p)
        x = x_ext
        z, lam, res = ev.observe(x)
        trace.record(x, lam, res, diff, ev.map_applications,
                     time.perf_counter_ns() - t0, restart=True, keep=keep)
        if rcfg.y_policy != "fixed":
            y = x.copy()
        if rcfg.stop_early and cfg.stop_on == "residual" and res < cfg.tol:
            trace.converged = True
            break

    return lam, x, trace
