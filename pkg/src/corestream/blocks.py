"""Dense feature blocks and the SVD row-compression primitive.

A block of streamed feature vectors is summarized by keeping its top
singular directions, each scaled by its singular value, plus a scalar
recording the squared energy that was cut off.  For every orthonormal
query matrix the summary's projected energy then brackets the
original's:

    dist_sq(summary, Y) <= dist_sq(original, Y) <= dist_sq(summary, Y) + c

Summaries of disjoint row sets concatenate additively, which is what
makes them mergeable further up a summary tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Gram deviation beyond this rejects a query matrix as non-orthonormal.
ORTHO_TOL = 1e-10

# Projected energies below this are treated as zero when measuring
# relative deviation.
ENERGY_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class DataBlock:
    """A dense rows x dim matrix of feature vectors.

    The stored array is a private, read-only copy, so a block can be
    shared across threads and snapshots without defensive copying.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"expected a 2-d matrix, got ndim={v.ndim}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"matrix must be at least 1x1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class CoresetBlock:
    """A compressed stand-in for a larger set of rows.

    ``block`` holds the surviving rows, ``c`` is the nonnegative squared
    energy discarded by compression and ``source_rows`` counts how many
    original stream rows the block stands for.
    """

    block: DataBlock
    c: float
    source_rows: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.c) or self.c < 0.0:
            raise ValueError(f"additive constant must be finite and >= 0, got {self.c}")
        if self.source_rows < self.block.rows:
            raise ValueError(
                f"source_rows={self.source_rows} smaller than stored rows={self.block.rows}"
            )


@dataclass(frozen=True)
class ReductionParams:
    """Row budget and verification settings for compression.

    n is the row budget of one summary block.  k is the dimension of the
    candidate subspaces used when verifying a summary empirically, and
    epsilon_target the relative deviation the caller wants to stay
    under.  Neither k nor epsilon_target affects the reduction itself.
    """

    n: int
    k: int = 1
    epsilon_target: float = 0.1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"row budget n must be >= 1, got {self.n}")
        if self.k < 1:
            raise ValueError(f"subspace dimension k must be >= 1, got {self.k}")
        if not 0.0 < self.epsilon_target <= 0.1:
            raise ValueError(
                f"epsilon_target must be in (0, 0.1], got {self.epsilon_target}"
            )


def _check_orthonormal(y: np.ndarray) -> None:
    gram = y.T @ y
    dev = float(np.max(np.abs(gram - np.eye(y.shape[1]))))
    if dev > ORTHO_TOL:
        raise ValueError(f"query matrix is not orthonormal, gram deviation {dev:.3e}")


def dist_sq(block: DataBlock, y: np.ndarray) -> float:
    """Total squared projection of the block's rows onto the columns of y.

    y must be a dim x m matrix with orthonormal columns.  When y spans
    the orthogonal complement of a candidate subspace, this value is the
    summed squared distance of the rows to that subspace.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ValueError(f"query matrix must be 2-d, got ndim={y.ndim}")
    if y.shape[0] != block.dim:
        raise ValueError(
            f"query matrix has {y.shape[0]} rows, block dimension is {block.dim}"
        )
    _check_orthonormal(y)
    proj = block.values @ y
    return float(np.sum(proj * proj))


def _orthonormal_from_rng(rng: np.random.Generator, dim: int, cols: int) -> np.ndarray:
    gauss = rng.standard_normal((dim, cols))
    q, r = np.linalg.qr(gauss)
    # Fixing the sign of each reflector makes the draw independent of
    # how the underlying factorization breaks ties.
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def random_orthonormal(dim: int, cols: int, seed: int) -> np.ndarray:
    """Deterministic random matrix with orthonormal columns."""
    if not 1 <= cols <= dim:
        raise ValueError(f"need 1 <= cols <= dim, got cols={cols} dim={dim}")
    return _orthonormal_from_rng(np.random.default_rng(seed), dim, cols)


def svd_truncate(values: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    """Core reduction: top singular rows plus the discarded tail energy.

    Returns (rows, tail) where row i equals sigma_i * v_i with the sign
    of each direction fixed so its largest-magnitude entry is positive,
    and tail is the sum of squared singular values beyond the first n.
    """
    _, s, vt = np.linalg.svd(values, full_matrices=False)
    kept = vt[: min(n, s.shape[0])].copy()
    peak = np.argmax(np.abs(kept), axis=1)
    signs = np.sign(kept[np.arange(kept.shape[0]), peak])
    signs[signs == 0.0] = 1.0
    rows = (s[: kept.shape[0]] * signs)[:, None] * kept
    tail = float(np.sum(s[n:] ** 2))
    return rows, tail


def reduce_block(block: DataBlock, params: ReductionParams) -> CoresetBlock:
    """Compress a block to at most params.n rows.

    The output preserves every projected energy up to the additive
    constant it reports: for any orthonormal y,
    0 <= dist_sq(block, y) - dist_sq(out.block, y) <= out.c.
    A block whose rank does not exceed n is preserved exactly (c = 0 up
    to roundoff).
    """
    if params.k >= block.dim:
        raise ValueError(
            f"subspace dimension k={params.k} must be below block dimension {block.dim}"
        )
    rows, tail = svd_truncate(block.values, params.n)
    return CoresetBlock(block=DataBlock(rows), c=tail, source_rows=block.rows)


def concat_blocks(a: CoresetBlock, b: CoresetBlock) -> CoresetBlock:
    """Stack two summaries; projected energies and constants both add."""
    if a.block.dim != b.block.dim:
        raise ValueError(
            f"dimension mismatch: {a.block.dim} vs {b.block.dim}"
        )
    stacked = np.vstack([a.block.values, b.block.values])
    return CoresetBlock(
        block=DataBlock(stacked),
        c=a.c + b.c,
        source_rows=a.source_rows + b.source_rows,
    )


def measure_epsilon(
    original: DataBlock,
    summary: CoresetBlock,
    k: int,
    trials: int = 100,
    seed: int = 0,
) -> float:
    """Worst observed relative deviation of a summary over random probes.

    Probe t projects both matrices onto random_orthonormal(d, d - k,
    seed + t), so callers can regenerate the exact probe sequence.
    Probes where the original's energy falls below ENERGY_FLOOR are
    skipped.  Returns 0.0 if every probe was skipped.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    d = original.dim
    if summary.block.dim != d:
        raise ValueError(
            f"dimension mismatch: original {d}, summary {summary.block.dim}"
        )
    if not 1 <= k < d:
        raise ValueError(f"need 1 <= k < dim={d}, got k={k}")
    worst = 0.0
    for t in range(trials):
        y = random_orthonormal(d, d - k, seed + t)
        denom = dist_sq(original, y)
        if denom < ENERGY_FLOOR:
            continue
        got = dist_sq(summary.block, y) + summary.c
        worst = max(worst, abs(denom - got) / denom)
    return worst
