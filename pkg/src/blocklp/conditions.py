"""Recovery conditions for weighted block-sparse l2/lp minimization.

Closed-form pieces: the weight factor gamma, the isometry-constant threshold
delta that makes the sufficient recovery condition hold, the explicit error
constants (C1, C2), support-estimate ratios (rho, alpha), and the symmetric
set distance behind the family of admissible support estimates.

Sampling pieces: a Monte-Carlo lower-bound estimator for the block p-restricted
isometry constant (the exact constant is a nonconvex program for p < 1), and a
randomized falsifier for the weighted block p-null space property. Both are
one-sided by design: the estimator certifies only lower bounds, and the
falsifier certifies only violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from blocklp.blocks import BlockIndexSet, BlockPattern, BlockVector, check_p

__all__ = [
    "ConditionParams",
    "RicEstimate",
    "NspReport",
    "TrivialNullSpaceError",
    "gamma_factor",
    "delta_threshold",
    "rip_sufficient_check",
    "recovery_constants",
    "set_distance",
    "derive_rho_alpha",
    "ric_estimate",
    "nsp_falsify",
]

# Relative singular-value cutoff used when extracting a null-space basis.
NULL_RANK_RTOL = 1e-10


class TrivialNullSpaceError(ValueError):
    """Raised when a matrix has full column rank: only h = 0 satisfies Ah = 0."""


@dataclass(frozen=True)
class ConditionParams:
    """Parameters of the sufficient recovery condition.

    a      -- block-count multiplier (integer > 1, a >= (1 - alpha) * rho)
    rho    -- size of the support estimate relative to the true block support
    alpha  -- fraction of the support estimate that is correct
    omega  -- weight applied on the estimated support, in [0, 1]
    p      -- mixed-norm exponent in (0, 1]
    """

    a: int
    rho: float
    alpha: float
    omega: float
    p: float

    def __post_init__(self) -> None:
        if int(self.a) != self.a or self.a <= 1:
            raise ValueError(f"a must be an integer > 1, got {self.a!r}")
        object.__setattr__(self, "a", int(self.a))
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must lie in [0, 1], got {self.omega!r}")
        check_p(self.p)
        if self.a < (1.0 - self.alpha) * self.rho:
            raise ValueError(
                f"need a >= (1 - alpha) * rho, got a={self.a}, "
                f"(1 - alpha) * rho = {(1.0 - self.alpha) * self.rho}"
            )
        # The gamma formula raises this base to a fractional power.
        if 1.0 + self.rho - 2.0 * self.alpha * self.rho < 0.0:
            raise ValueError(
                "need 1 + rho - 2 * alpha * rho >= 0 for the weight factor to be real"
            )


def gamma_factor(params: ConditionParams) -> float:
    """Weight factor gamma = omega + (1 - omega) * (1 + rho - 2*alpha*rho)^(1 - p/2).

    Equals 1 when omega = 1 (no prior used) and when alpha = 0.5 (the prior
    is half right, so weighting cannot help or hurt).
    """
    base = 1.0 + params.rho - 2.0 * params.alpha * params.rho
    return params.omega + (1.0 - params.omega) * base ** (1.0 - params.p / 2.0)


def delta_threshold(params: ConditionParams) -> float:
    """Isometry-constant threshold delta = (a^(1-p/2) - gamma) / (a^(1-p/2) + gamma).

    If both relevant block isometry constants fall strictly below this value,
    the sufficient recovery condition holds (see ``rip_sufficient_check``).
    Positive exactly when a^(1-p/2) > gamma.
    """
    g = gamma_factor(params)
    apow = float(params.a) ** (1.0 - params.p / 2.0)
    return (apow - g) / (apow + g)


def _check_delta(value: float, name: str) -> None:
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{name} must lie in [0, 1), got {value!r}")


def rip_sufficient_check(
    delta_ak: float, delta_a1k: float, params: ConditionParams
) -> bool:
    """Whether delta_ak + (a^(1-p/2)/gamma) * delta_a1k < a^(1-p/2)/gamma - 1.

    ``delta_ak`` and ``delta_a1k`` are block isometry constants of orders a*k
    and (a+1)*k. Equivalent, when both inputs are equal, to that common value
    lying strictly below ``delta_threshold``.
    """
    _check_delta(delta_ak, "delta_ak")
    _check_delta(delta_a1k, "delta_a1k")
    ratio = float(params.a) ** (1.0 - params.p / 2.0) / gamma_factor(params)
    return bool(delta_ak + ratio * delta_a1k < ratio - 1.0)


def recovery_constants(
    delta_ak: float,
    delta_a1k: float,
    params: ConditionParams,
    k: int,
    m: int,
) -> tuple:
    """Explicit constants (C1, C2) of the reconstruction error bound.

    C1 scales the compressibility term (which the caller divides by
    k^(1/p - 1/2)); C2 scales the noise level and depends on the number of
    measurements m. Both blow up as the common denominator
    (1 - delta_a1k) - a^(p/2 - 1) * (1 + delta_ak) * gamma approaches zero,
    and are only defined while it is positive.
    """
    _check_delta(delta_ak, "delta_ak")
    _check_delta(delta_a1k, "delta_a1k")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k!r}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m!r}")
    p = params.p
    a = float(params.a)
    g = gamma_factor(params)
    denom = (1.0 - delta_a1k) - a ** (p / 2.0 - 1.0) * (1.0 + delta_ak) * g
    if denom <= 0.0:
        raise ValueError(
            f"error-bound denominator is non-positive ({denom}); "
            "the sufficient condition fails for these isometry constants"
        )
    c1 = (
        2.0 ** (2.0 / p - 1.0)
        * a ** (0.5 - 1.0 / p)
        * ((1.0 + delta_ak) ** (1.0 / p) + (1.0 - delta_a1k) ** (1.0 / p))
        / denom ** (1.0 / p)
    )
    c2 = (
        2.0 ** (1.0 / p)
        * float(m) ** (1.0 / p - 0.5)
        * (1.0 + a ** (0.5 - 1.0 / p) * g ** (1.0 / p))
        / denom ** (1.0 / p)
    )
    return float(c1), float(c2)


def set_distance(V: BlockIndexSet, U: BlockIndexSet) -> int:
    """Size of the symmetric difference |(V & ~U) | (~V & U)|.

    This is the estimate error of U with respect to V; U lies within error
    budget s of V exactly when the result is <= s. It is a metric on block
    index sets.
    """
    if V.pattern != U.pattern:
        raise ValueError("index sets must share a block pattern")
    return len(set(V.indices) ^ set(U.indices))


def derive_rho_alpha(T0: BlockIndexSet, Ttil: BlockIndexSet, k: int) -> tuple:
    """Support-estimate ratios (rho, alpha) of ``Ttil`` against reference ``T0``.

    rho = |Ttil| / k and alpha = |Ttil & T0| / |Ttil|, with alpha defined as 0
    for an empty estimate.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k!r}")
    if T0.pattern != Ttil.pattern:
        raise ValueError("index sets must share a block pattern")
    size = len(Ttil)
    rho = size / k
    if size == 0:
        return 0.0, 0.0
    overlap = len(set(T0.indices) & set(Ttil.indices))
    return float(rho), float(overlap / size)


@dataclass(frozen=True)
class RicEstimate:
    """Sampled lower bound on a block isometry constant of order k.

    ``lower_bound`` is certified by ``witness`` (a unit-norm block k-sparse
    vector achieving the recorded deviation); the true constant can only be
    larger.
    """

    k: int
    p: float
    lower_bound: float
    samples: int
    seed: int
    witness: np.ndarray


def _as_matrix(A: np.ndarray, pattern: BlockPattern) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {A.shape}")
    if A.shape[1] != pattern.N:
        raise ValueError(
            f"matrix has {A.shape[1]} columns but the pattern needs {pattern.N}"
        )
    return A


def ric_estimate(
    A: np.ndarray,
    pattern: BlockPattern,
    k: int,
    p: float,
    samples: int,
    seed: int,
) -> RicEstimate:
    """Estimate the block isometry constant of order k from below.

    Evaluates the deviation max(||Ax||_p^p - 1, 1 - ||Ax||_p^p) on unit-norm
    block k-sparse test vectors: every canonical coordinate direction (when
    the number of supports, n choose k, is at most 10^4) followed by
    ``samples`` random draws (uniform support, Gaussian direction on the
    block-sparse unit sphere). The running maximum is monotone in ``samples``
    for a fixed seed, and the reported value is a lower bound on the true
    constant, never an exact value.
    """
    A = _as_matrix(A, pattern)
    n, d = pattern.n, pattern.d
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k!r}")
    check_p(p)
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed!r}")

    best = -1.0
    witness = None

    if math.comb(n, k) <= 10_000:
        # Canonical pass: coordinate vectors are block 1-sparse, hence block
        # k-sparse; their image norms come straight from the columns.
        col_pp = np.sum(np.abs(A) ** p, axis=0)
        devs = np.abs(col_pp - 1.0)
        j = int(np.argmax(devs))
        best = float(devs[j])
        witness = np.zeros(pattern.N)
        witness[j] = 1.0

    rng = np.random.default_rng(int(seed))
    for _ in range(samples):
        support = np.sort(rng.choice(n, size=k, replace=False))
        direction = rng.standard_normal(k * d)
        nrm = np.linalg.norm(direction)
        if nrm == 0.0:  # pragma: no cover - probability zero
            continue
        direction /= nrm
        cols = (support[:, None] * d + np.arange(d)[None, :]).reshape(-1)
        image = A[:, cols] @ direction
        dev = abs(float(np.sum(np.abs(image) ** p)) - 1.0)
        if dev > best:
            best = dev
            witness = np.zeros(pattern.N)
            witness[cols] = direction

    return RicEstimate(
        k=k,
        p=float(p),
        lower_bound=float(best),
        samples=int(samples),
        seed=int(seed),
        witness=witness,
    )


@dataclass(frozen=True)
class NspReport:
    """Outcome of a randomized null-space property check.

    ``violated=True`` comes with a reproducible witness. ``violated=False``
    is NOT a certificate: it only says that no violation was found among the
    sampled null-space vectors.
    """

    k: int
    s: int
    omega: float
    p: float
    C: float
    violated: bool
    witness: Optional[BlockVector]
    samples: int
    seed: int

    def summary(self) -> str:
        if self.violated:
            return (
                f"violated=true after {self.samples} sample(s): the witness h "
                f"satisfies omega*|h_T|^p + (1-omega)*|h_S|^p > C*|h_Tc|^p "
                f"with k={self.k}, s={self.s}, omega={self.omega}, p={self.p}, "
                f"C={self.C}"
            )
        return (
            f"violated=false over {self.samples} sample(s); this is evidence, "
            "not a certificate: the property may still fail on unsampled "
            "null-space directions"
        )


def nsp_inequality_sides(
    h: BlockVector, k: int, s: int, omega: float, p: float
) -> tuple:
    """Left and right raw sides of the null-space inequality for one vector.

    Uses the worst-case sets: T = the k blocks of largest norm, S = the s
    blocks of largest norm (ties toward lower indices). Returns
    (omega*|h_T|^p + (1-omega)*|h_S|^p, |h_Tc|^p); the property compares the
    first against C times the second.
    """
    from blocklp.blocks import block_norms

    norms = block_norms(h)
    order = np.argsort(-norms, kind="stable")
    pw = norms**p
    top_k = pw[order[:k]].sum()
    top_s = pw[order[:s]].sum()
    rest = pw[order[k:]].sum()
    lhs = omega * float(top_k) + (1.0 - omega) * float(top_s)
    return lhs, float(rest)


def null_space_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the null space of A, shape (N, null_dim).

    Rank is cut at ``NULL_RANK_RTOL`` times the largest singular value.
    """
    A = np.asarray(A, dtype=np.float64)
    _, sv, vt = np.linalg.svd(A, full_matrices=True)
    if sv.size == 0 or sv[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(sv > NULL_RANK_RTOL * sv[0]))
    return vt[rank:].T.copy()


def nsp_falsify(
    A: np.ndarray,
    pattern: BlockPattern,
    k: int,
    s: int,
    omega: float,
    p: float,
    C: float = 1.0,
    samples: int = 1000,
    seed: int = 0,
    null_tol: float = 1e-8,
) -> NspReport:
    """Search the null space of A for a violation of the block property.

    Draws random unit vectors from an orthonormal null-space basis and tests
    each against the worst admissible index sets (top-k and top-s blocks by
    norm); that reduction is exact per sampled vector. Stops at the first
    violation and returns it with a witness; otherwise reports a
    non-certificate negative. Raises ``TrivialNullSpaceError`` when A has
    full column rank, in which case the property holds vacuously.
    """
    A = _as_matrix(A, pattern)
    n = pattern.n
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k!r}")
    if not 0 <= s <= n:
        raise ValueError(f"s must lie in [0, {n}], got {s!r}")
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must lie in [0, 1], got {omega!r}")
    check_p(p)
    if C <= 0.0:
        raise ValueError(f"C must be positive, got {C!r}")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed!r}")

    basis = null_space_basis(A)
    null_dim = basis.shape[1]
    if null_dim == 0:
        raise TrivialNullSpaceError(
            "matrix has a trivial null space (full column rank); "
            "the null-space property cannot be falsified"
        )

    rng = np.random.default_rng(int(seed))
    for i in range(samples):
        coeffs = rng.standard_normal(null_dim)
        h = basis @ coeffs
        nrm = np.linalg.norm(h)
        if nrm == 0.0:  # pragma: no cover - probability zero
            continue
        h /= nrm
        if np.linalg.norm(A @ h) > null_tol:
            # Defensive: a basis this inaccurate cannot certify anything.
            continue
        hv = BlockVector(pattern, h)
        lhs, rest = nsp_inequality_sides(hv, k, s, omega, p)
        if lhs > C * rest:
            return NspReport(
                k=k,
                s=s,
                omega=float(omega),
                p=float(p),
                C=float(C),
                violated=True,
                witness=hv,
                samples=i + 1,
                seed=int(seed),
            )

    return NspReport(
        k=k,
        s=s,
        omega=float(omega),
        p=float(p),
        C=float(C),
        violated=False,
        witness=None,
        samples=int(samples),
        seed=int(seed),
    )
