"""Brute-force reference decoders for desk-scale validation.

Exhaustive search over block supports; intractable beyond small instances and
guarded accordingly. Support enumeration is in lexicographic order so ties
resolve to the lexicographically smallest support.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from blocklp.blocks import BlockIndexSet, BlockPattern, BlockVector, check_p

__all__ = ["OracleResult", "brute_force_decode", "oracle_weighted_objective_argmin"]

ENUMERATION_GUARD = 100_000
EXACT_FIT_RTOL = 1e-8


@dataclass(frozen=True)
class OracleResult:
    support: BlockIndexSet
    x_best: BlockVector
    residual: float


def _check_instance(A, y, pattern, k, n_supports):
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    m = A.shape[0]
    if A.shape[1] != pattern.N:
        raise ValueError(f"matrix has {A.shape[1]} columns, pattern needs {pattern.N}")
    if y.shape[0] != m:
        raise ValueError("measurement length must match the matrix row count")
    if not 0 <= k <= pattern.n:
        raise ValueError(f"k must lie in [0, {pattern.n}], got {k!r}")
    if n_supports > ENUMERATION_GUARD:
        raise ValueError(
            f"{n_supports} supports exceed the enumeration guard of {ENUMERATION_GUARD}"
        )
    if k * pattern.d > m:
        raise ValueError(
            f"restricted systems would be underdetermined: k*d = {k * pattern.d} > m = {m}"
        )
    return A, y


def _restricted_fit(A, y, pattern, support):
    """Least squares on the given block support; returns (x_full, residual)."""
    cols = BlockIndexSet(pattern, support).scalar_indices()
    x_full = np.zeros(pattern.N)
    if cols.size == 0:
        return x_full, float(np.linalg.norm(y))
    z, *_ = np.linalg.lstsq(A[:, cols], y, rcond=None)
    x_full[cols] = z
    return x_full, float(np.linalg.norm(y - A[:, cols] @ z))


def brute_force_decode(A, y, pattern: BlockPattern, k: int) -> OracleResult:
    """Exhaustive block k-sparse decoder.

    Solves least squares on every block support of size k and returns the
    support with smallest residual. The returned residual is a lower bound on
    the residual of any block k-sparse reconstruction.
    """
    A, y = _check_instance(A, y, pattern, k, math.comb(pattern.n, k))
    best_res = math.inf
    best = None
    for support in itertools.combinations(range(pattern.n), k):
        x_full, res = _restricted_fit(A, y, pattern, support)
        if res < best_res:
            best_res = res
            best = (support, x_full)
    support, x_full = best
    return OracleResult(
        support=BlockIndexSet(pattern, support),
        x_best=BlockVector(pattern, x_full),
        residual=best_res,
    )


def oracle_weighted_objective_argmin(
    A, y, pattern: BlockPattern, k: int, w, p: float
) -> BlockVector:
    """Weighted-objective argmin over exact-fit supports of size at most k.

    Among all supports whose restricted least-squares fit reproduces y to
    within 1e-8 * ||y||, returns the reconstruction minimizing
    sum_i w_i * ||x[i]||^p (ties to the first support in size-then-lex
    order). Raises when no support fits exactly, e.g. on noisy data.
    """
    total = sum(math.comb(pattern.n, j) for j in range(k + 1))
    A, y = _check_instance(A, y, pattern, k, total)
    check_p(p)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape != (pattern.n,):
        raise ValueError(f"expected {pattern.n} weights, got {w.shape[0]}")
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError("weights must lie in [0, 1]")

    fit_tol = EXACT_FIT_RTOL * float(np.linalg.norm(y))
    best_obj = math.inf
    best_x = None
    for j in range(k + 1):
        for support in itertools.combinations(range(pattern.n), j):
            x_full, res = _restricted_fit(A, y, pattern, support)
            if res > fit_tol:
                continue
            d = pattern.d
            norms = np.linalg.norm(x_full.reshape(pattern.n, d), axis=1)
            obj = float(np.sum(w * norms**p))
            if obj < best_obj:
                best_obj = obj
                best_x = x_full
    if best_x is None:
        raise ValueError(
            f"no block support of size <= {k} reproduces y within {fit_tol:g}"
        )
    return BlockVector(pattern, best_x)
