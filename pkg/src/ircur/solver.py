"""Iterated robust CUR solver for low-rank + sparse matrix recovery.

Given an observed matrix D assumed to be the sum of a rank-r matrix L and
a sparse outlier matrix S, the solver alternates two phases on a handful
of sampled rows (I) and columns (J):

  Phase I   threshold the residual D - L_k on the sampled slabs to update
            the sparse estimate, with a geometrically decaying cutoff
            zeta_k = gamma^(k-1) * zeta0;
  Phase II  rebuild the low-rank estimate as a CUR decomposition of
            D - S_{k+1}, rank-truncating only the small |I| x |J| core.

The full n x n estimates are never materialized: the low-rank iterate
exists only as (C, core pseudoinverse, R) and the sparse iterate only on
the sampled row/column slabs.  Iteration stops when the relative residual
on the sampled slabs drops to ``eps``.

Two index policies are provided: ``fixed`` keeps I, J for the whole run
(fastest, minimal data access); ``resampled`` redraws them every iteration
(more robust to an unlucky draw, slightly more work since the slab norms
must be recomputed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import matcore
from .matcore import (
    Matrix,
    PinvFactor,
    frob_norm,
    inf_norm,
    submatrix,
    tracked,
    truncated_svd,
)
from .sampling import IndexSet, RngSeed, sample_count, sample_indices

MODES = ("fixed", "resampled")

Observer = Callable[[int, float, "CurFactors", "SparseEstimate", float], None]


@dataclass
class SolverConfig:
    """All tunables of the solver.

    zeta0 = None means "use max |D|" at solve time: the ideal initial
    threshold is the max magnitude of the low-rank part, which is
    unobservable; max |D| dominates it and over-thresholding at step 0 is
    safe because the cutoff decays.  gamma is the decay rate of the
    threshold schedule; values in [0.6, 0.9] are recommended (larger is
    slower but more robust).  c_rows / c_cols scale the sampled index
    counts ceil(c * r * ln(n)).
    """

    rank: int
    eps: float = 1e-5
    zeta0: float | None = None
    gamma: float = 0.65
    c_rows: float = 4.0
    c_cols: float = 4.0
    mode: str = "fixed"
    max_iter: int = 200
    seed: RngSeed = field(default_factory=lambda: RngSeed(0))

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.zeta0 is not None and not self.zeta0 > 0:
            raise ValueError(f"zeta0 must be > 0 (or None), got {self.zeta0}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.c_rows <= 0 or self.c_cols <= 0:
            raise ValueError("sampling constants must be > 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class CurFactors:
    """Low-rank estimate held as C * core_pinv * R without materializing it.

    C holds the sampled columns (n1 x |J|), R the sampled rows (|I| x n2),
    and core_pinv the factored pseudoinverse of the rank-truncated
    |I| x |J| core.
    """

    C: Matrix
    core_pinv: PinvFactor
    R: Matrix
    rows: IndexSet
    cols: IndexSet

    def __post_init__(self) -> None:
        if self.C.shape != (self.rows.bound, self.cols.size):
            raise ValueError("C shape inconsistent with index sets")
        if self.R.shape != (self.rows.size, self.cols.bound):
            raise ValueError("R shape inconsistent with index sets")
        if (self.core_pinv.rows, self.core_pinv.cols) != (self.rows.size, self.cols.size):
            raise ValueError("core factor shape inconsistent with index sets")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows.bound, self.cols.bound)


@dataclass
class SparseEstimate:
    """Sparse estimate stored only on the sampled slabs.

    row_values = S on rows I (|I| x n2); col_values = S on columns J
    (n1 x |J|).  The (I, J) intersection block of the two views agrees
    exactly.
    """

    row_values: Matrix
    col_values: Matrix
    rows: IndexSet
    cols: IndexSet


@dataclass
class SolverTrace:
    """Per-iteration history of a solver run.

    errors[i] and thresholds[i] belong to iteration i+1, so
    thresholds[i] == gamma**i * zeta0 and errors[-1] is the final
    stopping statistic.  ``allocated`` records the transient allocation
    (8-byte scalar units) per iteration as seen by the matcore meter;
    sampled_rows/sampled_cols record |I| and |J| per iteration.
    """

    errors: list[float] = field(default_factory=list)
    thresholds: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    seconds: list[float] = field(default_factory=list)
    allocated: list[int] = field(default_factory=list)
    sampled_rows: list[int] = field(default_factory=list)
    sampled_cols: list[int] = field(default_factory=list)


def hard_threshold(X: Matrix, zeta: float) -> Matrix:
    """Entrywise hard thresholding: keep x iff |x| > zeta (strict), else 0."""
    if zeta < 0:
        raise ValueError(f"zeta must be >= 0, got {zeta}")
    mag = tracked(np.abs(X))
    keep = tracked(mag > zeta)
    return tracked(np.where(keep, X, 0.0))


def _threshold_inplace(X: Matrix, zeta: float) -> Matrix:
    # Same result as hard_threshold but mutates X; avoids the |X| temporary.
    low = tracked(X <= zeta)
    high = tracked(X >= -zeta)
    low &= high
    X[low] = 0.0
    return X


def threshold_at(config: SolverConfig, k: int) -> float:
    """Threshold applied at iteration k+1: gamma**k * zeta0."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if config.zeta0 is None:
        raise ValueError("config.zeta0 is unresolved (None)")
    return config.gamma**k * config.zeta0


def _eval_rows_into(cur: CurFactors, rows: IndexSet, out: Matrix | None) -> Matrix:
    c_rows = submatrix(cur.C, rows, None)
    t = cur.core_pinv.apply_right(c_rows)
    if out is None:
        return tracked(t @ cur.R)
    np.matmul(t, cur.R, out=out)
    return out


def _eval_cols_into(cur: CurFactors, cols: IndexSet, out: Matrix | None) -> Matrix:
    r_cols = submatrix(cur.R, None, cols)
    t = cur.core_pinv.apply_left(r_cols)
    if out is None:
        return tracked(cur.C @ t)
    np.matmul(cur.C, t, out=out)
    return out


def cur_eval_rows(cur: CurFactors, rows: IndexSet) -> Matrix:
    """Rows of the low-rank estimate: (C restricted to rows) * U+ * R.

    Never allocates an n x n intermediate.
    """
    return _eval_rows_into(cur, rows, None)


def cur_eval_cols(cur: CurFactors, cols: IndexSet) -> Matrix:
    """Columns of the low-rank estimate: C * U+ * (R restricted to cols)."""
    return _eval_cols_into(cur, cols, None)


def materialize(cur: CurFactors) -> Matrix:
    """Dense C * U+ * R.  Test-scale only; allocates the full matrix."""
    return cur_eval_cols(cur, IndexSet.full(cur.cols.bound))


def _sync_intersection(l_rows: Matrix, l_cols: Matrix, rows: IndexSet, cols: IndexSet) -> None:
    # The row and column evaluations parenthesize C * U+ * R differently, so
    # their (I, J) blocks can differ in the last ulp.  Copy the row view into
    # the column view so downstream intersection blocks agree bitwise.
    block = tracked(l_rows[:, cols.indices])
    l_cols[rows.indices, :] = block


def _sub_into(a: Matrix, b: Matrix, out: Matrix | None) -> Matrix:
    if out is None:
        return tracked(a - b)
    return np.subtract(a, b, out=out)


def phase1(D: Matrix, cur: CurFactors, zeta: float) -> SparseEstimate:
    """Sparse update: threshold D - L_k on the sampled slabs."""
    d_rows = submatrix(D, cur.rows, None)
    d_cols = submatrix(D, None, cur.cols)
    l_rows = cur_eval_rows(cur, cur.rows)
    l_cols = cur_eval_cols(cur, cur.cols)
    _sync_intersection(l_rows, l_cols, cur.rows, cur.cols)
    row_values = hard_threshold(tracked(d_rows - l_rows), zeta)
    col_values = hard_threshold(tracked(d_cols - l_cols), zeta)
    return SparseEstimate(row_values, col_values, cur.rows, cur.cols)


def phase2(D: Matrix, sparse: SparseEstimate, r: int) -> CurFactors:
    """Low-rank update: CUR factors of D - S_{k+1} with a rank-r core.

    The core H_r([D - S]_{I,J}) and its pseudoinverse share one SVD.
    """
    c_new = submatrix(D, None, sparse.cols)
    c_new -= sparse.col_values
    r_new = submatrix(D, sparse.rows, None)
    r_new -= sparse.row_values
    core = submatrix(r_new, None, sparse.cols)
    fac = truncated_svd(core, r)
    return CurFactors(
        C=c_new,
        core_pinv=PinvFactor.from_svd(fac),
        R=r_new,
        rows=sparse.rows,
        cols=sparse.cols,
    )


def residual_error(D: Matrix, cur: CurFactors, sparse: SparseEstimate) -> float:
    """Relative residual of D - L - S measured on the sampled slabs.

    e = (||[D-L-S]_{I,:}||_F + ||[D-L-S]_{:,J}||_F)
        / (||D_{I,:}||_F + ||D_{:,J}||_F),  0 if the denominator is 0.
    """
    d_rows = submatrix(D, cur.rows, None)
    d_cols = submatrix(D, None, cur.cols)
    den = frob_norm(d_rows) + frob_norm(d_cols)
    if den == 0.0:
        return 0.0
    l_rows = cur_eval_rows(cur, cur.rows)
    l_cols = cur_eval_cols(cur, cur.cols)
    _sync_intersection(l_rows, l_cols, cur.rows, cur.cols)
    res_rows = tracked(d_rows - l_rows)
    res_rows -= sparse.row_values
    res_cols = tracked(d_cols - l_cols)
    res_cols -= sparse.col_values
    return (frob_norm(res_rows) + frob_norm(res_cols)) / den


def _zero_state(
    n1: int, n2: int, rows: IndexSet, cols: IndexSet, rank: int
) -> tuple[CurFactors, SparseEstimate]:
    # Iteration-0 state: L_0 = 0 and S_0 = 0, held in factor/slab form.
    fac = truncated_svd(tracked(np.zeros((rows.size, cols.size))), rank)
    cur = CurFactors(
        C=tracked(np.zeros((n1, cols.size))),
        core_pinv=PinvFactor.from_svd(fac),
        R=tracked(np.zeros((rows.size, n2))),
        rows=rows,
        cols=cols,
    )
    sparse = SparseEstimate(
        row_values=tracked(np.zeros((rows.size, n2))),
        col_values=tracked(np.zeros((n1, cols.size))),
        rows=rows,
        cols=cols,
    )
    return cur, sparse


def solve(
    D: Matrix,
    config: SolverConfig,
    observer: Observer | None = None,
) -> tuple[CurFactors, SparseEstimate, SolverTrace]:
    """Run the alternating threshold/CUR iteration on D.

    Returns the CUR factors of the low-rank estimate, the sparse estimate
    on the sampled slabs, and the iteration trace.  Halts when the sampled
    relative residual reaches ``config.eps`` or after ``config.max_iter``
    iterations (``trace.converged`` is False in the latter case).

    ``observer``, if given, is called after every iteration as
    ``observer(k, zeta_k, cur, sparse, e_k)`` with k starting at 1.
    """
    D = matcore.require_finite(D)
    if D.size == 0:
        raise ValueError("D must be nonempty")
    n1, n2 = D.shape
    cfg = config

    gen = cfg.seed.generator()
    m_rows = sample_count(n1, cfg.rank, cfg.c_rows)
    m_cols = sample_count(n2, cfg.rank, cfg.c_cols)
    rows = sample_indices(n1, m_rows, gen)
    cols = sample_indices(n2, m_cols, gen)

    d_rows = submatrix(D, rows, None)
    d_cols = submatrix(D, None, cols)
    den = frob_norm(d_rows) + frob_norm(d_cols)

    trace = SolverTrace()
    if den == 0.0:
        # Sampled slabs are identically zero: e_0 = 0, nothing to iterate.
        cur, sparse = _zero_state(n1, n2, rows, cols, cfg.rank)
        trace.errors.append(0.0)
        trace.converged = True
        return cur, sparse, trace
    if cfg.zeta0 is None:
        # den > 0 guarantees max |D| > 0, so this is a valid threshold.
        cfg = replace(cfg, zeta0=inf_norm(D))

    # L_0 = 0: its sampled slabs are zero without any factor evaluation.
    # With fixed indices the slab shapes never change, so the evaluation and
    # residual buffers are allocated once and rewritten in place each
    # iteration (only arrays that escape into the returned factors are
    # freshly allocated).  Resampled mode reallocates per iteration.
    fixed = cfg.mode == "fixed"
    l_rows = tracked(np.zeros((rows.size, n2)))
    l_cols = tracked(np.zeros((n1, cols.size)))
    ws_res_rows = tracked(np.empty((rows.size, n2))) if fixed else None
    ws_res_cols = tracked(np.empty((n1, cols.size))) if fixed else None
    cur: CurFactors | None = None

    for k in range(cfg.max_iter):
        t0 = time.perf_counter()
        alloc0 = matcore.ALLOCATIONS.count

        if not fixed and k > 0:
            rows = sample_indices(n1, m_rows, gen)
            cols = sample_indices(n2, m_cols, gen)
            d_rows = submatrix(D, rows, None)
            d_cols = submatrix(D, None, cols)
            den = frob_norm(d_rows) + frob_norm(d_cols)
            l_rows = cur_eval_rows(cur, rows)
            l_cols = cur_eval_cols(cur, cols)
            _sync_intersection(l_rows, l_cols, rows, cols)

        zeta = cfg.gamma**k * cfg.zeta0

        # Phase I: sparse slab update.
        s_rows = _threshold_inplace(tracked(d_rows - l_rows), zeta)
        s_cols = _threshold_inplace(tracked(d_cols - l_cols), zeta)
        sparse = SparseEstimate(s_rows, s_cols, rows, cols)

        # Phase II: CUR update with rank-truncated core.
        c_new = tracked(d_cols - s_cols)
        r_new = tracked(d_rows - s_rows)
        core = submatrix(r_new, None, cols)
        fac = truncated_svd(core, cfg.rank)
        cur = CurFactors(
            C=c_new, core_pinv=PinvFactor.from_svd(fac), R=r_new, rows=rows, cols=cols
        )

        # Stopping statistic on the slabs that produced this iterate, written
        # into the now-dead evaluation buffers.  With fixed indices the
        # evaluations are reused by the next Phase I; with resampled indices
        # the D slabs double as residual scratch since they are re-extracted
        # at the top of the next iteration.
        l_rows = _eval_rows_into(cur, rows, l_rows)
        l_cols = _eval_cols_into(cur, cols, l_cols)
        _sync_intersection(l_rows, l_cols, rows, cols)
        res_rows = _sub_into(d_rows, l_rows, ws_res_rows if fixed else d_rows)
        res_rows -= s_rows
        res_cols = _sub_into(d_cols, l_cols, ws_res_cols if fixed else d_cols)
        res_cols -= s_cols
        e = (frob_norm(res_rows) + frob_norm(res_cols)) / den

        trace.errors.append(e)
        trace.thresholds.append(zeta)
        trace.seconds.append(time.perf_counter() - t0)
        trace.allocated.append(matcore.ALLOCATIONS.count - alloc0)
        trace.sampled_rows.append(rows.size)
        trace.sampled_cols.append(cols.size)
        trace.iterations = k + 1

        if observer is not None:
            observer(k + 1, zeta, cur, sparse, e)
        if e <= cfg.eps:
            trace.converged = True
            break

    return cur, sparse, trace
