"""Block-structured vectors, mixed l2/lp norms, and block approximations.

A length-N signal is partitioned into n contiguous blocks of equal length d
(N = n*d); block i occupies entries [i*d, (i+1)*d). The mixed l2/lp
quasi-norm takes the Euclidean norm within each block and couples blocks
through an lp sum with 0 < p <= 1.

Everything here is a pure function on immutable inputs and is safe to call
from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BlockPattern",
    "BlockVector",
    "BlockIndexSet",
    "block_norms",
    "mixed_norm",
    "block_l20",
    "best_k_block_approx",
    "snr_db",
    "weighted_objective",
]


def check_p(p: float) -> None:
    """Reject exponents outside the supported range (0, 1]."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p!r}")


@dataclass(frozen=True)
class BlockPattern:
    """Partition of an N-vector into n contiguous blocks of length d."""

    n: int
    d: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"number of blocks must be a positive integer, got {self.n!r}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"block length must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "d", int(self.d))

    @property
    def N(self) -> int:
        """Ambient dimension n*d."""
        return self.n * self.d

    def block_slice(self, i: int) -> slice:
        """Scalar index range of block i."""
        if not 0 <= i < self.n:
            raise IndexError(f"block index {i} out of range [0, {self.n})")
        return slice(i * self.d, (i + 1) * self.d)


@dataclass(frozen=True, eq=False)
class BlockVector:
    """A real vector carrying its block pattern.

    The stored array is a read-only float64 copy; all entries must be finite.
    """

    pattern: BlockPattern
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if v.shape != (self.pattern.N,):
            raise ValueError(
                f"values must have {self.pattern.N} entries, got {v.shape[0]}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def block(self, i: int) -> np.ndarray:
        """Read-only view of block i."""
        return self.values[self.pattern.block_slice(i)]

    @classmethod
    def zeros(cls, pattern: BlockPattern) -> "BlockVector":
        return cls(pattern, np.zeros(pattern.N))


@dataclass(frozen=True)
class BlockIndexSet:
    """A set of block indices, stored as a strictly increasing tuple."""

    pattern: BlockPattern
    indices: tuple

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("block indices must be distinct")
        for i in idx:
            if not 0 <= i < self.pattern.n:
                raise IndexError(f"block index {i} out of range [0, {self.pattern.n})")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, i: int) -> bool:
        return i in set(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def complement(self) -> "BlockIndexSet":
        members = set(self.indices)
        return BlockIndexSet(
            self.pattern, tuple(i for i in range(self.pattern.n) if i not in members)
        )

    def scalar_indices(self) -> np.ndarray:
        """Flat entry indices covered by the member blocks, ascending."""
        if not self.indices:
            return np.empty(0, dtype=np.intp)
        d = self.pattern.d
        base = np.asarray(self.indices, dtype=np.intp) * d
        return (base[:, None] + np.arange(d, dtype=np.intp)[None, :]).reshape(-1)


def block_norms(x: BlockVector) -> np.ndarray:
    """Per-block Euclidean norms as a length-n vector."""
    pat = x.pattern
    return np.linalg.norm(x.values.reshape(pat.n, pat.d), axis=1)


def mixed_norm(x: BlockVector, p: float) -> float:
    """Mixed l2/lp quasi-norm: (sum_i ||x[i]||_2^p)^(1/p), 0 < p <= 1."""
    check_p(p)
    norms = block_norms(x)
    return float(np.sum(norms**p) ** (1.0 / p))


def block_l20(x: BlockVector, tol: float = 0.0) -> int:
    """Number of blocks whose Euclidean norm exceeds ``tol``.

    With tol=0 this is the block sparsity count; a positive tolerance is the
    practical choice after floating-point solves.
    """
    if tol < 0:
        raise ValueError(f"tol must be nonnegative, got {tol!r}")
    return int(np.count_nonzero(block_norms(x) > tol))


def best_k_block_approx(x: BlockVector, k: int) -> tuple:
    """Best approximation of ``x`` with at most k nonzero blocks.

    Keeps the k blocks of largest Euclidean norm (ties broken toward the
    lowest block index) and zeroes the rest. Returns the approximation and
    the kept index set. Minimizes ||x - g||_{2,1} over block k-sparse g.
    """
    pat = x.pattern
    if not 0 <= k <= pat.n:
        raise ValueError(f"k must lie in [0, {pat.n}], got {k!r}")
    norms = block_norms(x)
    order = np.argsort(-norms, kind="stable")
    kept = BlockIndexSet(pat, tuple(int(i) for i in order[:k]))
    out = np.zeros(pat.N)
    sel = kept.scalar_indices()
    out[sel] = x.values[sel]
    return BlockVector(pat, out), kept


def snr_db(x_true: BlockVector, x_rec: BlockVector) -> float:
    """Recovery quality in decibels: 20*log10(||x_true|| / ||x_true - x_rec||).

    Returns ``math.inf`` when the reconstruction error is exactly zero
    (serialized downstream as the literal string "inf").
    """
    if x_true.pattern != x_rec.pattern:
        raise ValueError("x_true and x_rec must share a block pattern")
    ref = float(np.linalg.norm(x_true.values))
    if ref == 0.0:
        raise ValueError("x_true must be nonzero")
    err = float(np.linalg.norm(x_true.values - x_rec.values))
    if err == 0.0:
        return math.inf
    return float(20.0 * math.log10(ref / err))


def weighted_objective(x: BlockVector, w: np.ndarray, p: float) -> float:
    """Weighted block objective sum_i w_i * ||x[i]||_2^p with w_i in [0, 1]."""
    check_p(p)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape != (x.pattern.n,):
        raise ValueError(f"expected {x.pattern.n} weights, got {w.shape[0]}")
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError("weights must lie in [0, 1]")
    norms = block_norms(x)
    return float(np.sum(w * norms**p))
