"""Experiment generation and orchestration with reproducible CSV output.

Every replication r of a scenario derives its seed as ``base_seed + r`` and
spawns four independent substreams (matrix, signal, support estimate, noise)
through ``numpy.random.SeedSequence``; generators are ``default_rng``
(PCG64). Reproducibility is promised within one implementation and platform,
not across PRNG implementations: the full pipeline is a pure function of
(config, base_seed).

CSV rows are emitted in sorted (scenario, rep) order so the byte content does
not depend on the worker count. Wall-clock timings break byte-level
reproducibility by nature, so the ``wall_ms`` column is written as 0.000
unless timing output is explicitly requested; measured values are always
available on the in-memory records.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from blocklp.blocks import (
    BlockIndexSet,
    BlockPattern,
    BlockVector,
    best_k_block_approx,
    snr_db,
)
from blocklp.solver import RecoveryResult, SolverConfig, SolverError, irls_recover

__all__ = [
    "ScenarioConfig",
    "ExperimentRecord",
    "CSV_COLUMNS",
    "gen_gaussian_matrix",
    "gen_block_sparse_signal",
    "gen_power_decay_signal",
    "gen_support_estimate",
    "run_scenario",
    "run_sweep",
    "load_config",
    "write_records",
]

CSV_COLUMNS = (
    "scenario,rep,seed,n,d,k,m,p,sigma,omega,rho,alpha,theta,lambda,"
    "snr_db,iterations,converged,wall_ms"
)

# Config-file keys, in canonical order; "lambda" maps to the ``lam`` field.
_CONFIG_KEYS = (
    "n",
    "d",
    "k",
    "m",
    "p",
    "sigma",
    "omega",
    "rho",
    "alpha",
    "theta",
    "lambda",
    "reps",
    "base_seed",
)
_INT_KEYS = {"n", "d", "k", "m", "reps", "base_seed"}


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment cell; ``reps`` replications are run per cell.

    ``theta`` absent means an exactly block-sparse signal; present, the
    signal's sorted block norms decay like rank^(-theta). ``lam`` absent
    means the sigma-keyed default: 1e-6 for sigma = 0, 1e-2 otherwise.
    """

    n: int
    d: int
    k: int
    m: int
    p: float
    sigma: float = 0.0
    omega: float = 1.0
    rho: float = 1.0
    alpha: float = 1.0
    theta: Optional[float] = None
    lam: Optional[float] = None
    reps: int = 20
    base_seed: int = 0
    name: str = "scenario"

    def __post_init__(self) -> None:
        for field_name in ("n", "d", "k", "m", "reps"):
            value = getattr(self, field_name)
            if int(value) != value or value < 1:
                raise ValueError(f"{field_name} must be a positive integer, got {value!r}")
        if self.k > self.n:
            raise ValueError(f"k = {self.k} exceeds the number of blocks n = {self.n}")
        if self.m > self.n * self.d:
            raise ValueError(f"m = {self.m} exceeds the ambient dimension {self.n * self.d}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p!r}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma!r}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must lie in [0, 1], got {self.omega!r}")
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if self.theta is not None and self.theta <= 1.0:
            raise ValueError(f"theta must exceed 1, got {self.theta!r}")
        if self.lam is not None and self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be nonnegative, got {self.base_seed!r}")
        size = _round_half_up(self.rho * self.k)
        hits = _round_half_up(self.alpha * self.rho * self.k)
        if size > self.n:
            raise ValueError(f"support estimate of size {size} exceeds n = {self.n}")
        if hits > min(self.k, size):
            raise ValueError(
                f"requested overlap {hits} exceeds min(k, estimate size) = "
                f"{min(self.k, size)}"
            )
        if "," in self.name or "\n" in self.name:
            raise ValueError("scenario names must not contain commas or newlines")

    @property
    def lam_resolved(self) -> float:
        if self.lam is not None:
            return self.lam
        return 1e-6 if self.sigma == 0 else 1e-2


@dataclass(frozen=True)
class ExperimentRecord:
    """One CSV row: a single replication of a single scenario."""

    scenario: str
    rep: int
    seed: int
    n: int
    d: int
    k: int
    m: int
    p: float
    sigma: float
    omega: float
    rho: float
    alpha: float
    theta: Optional[float]
    lam: float
    snr_db: float
    iterations: int
    converged: bool
    wall_ms: float


def gen_gaussian_matrix(m: int, N: int, seed: int) -> np.ndarray:
    """m x N matrix of i.i.d. standard normal entries from a seeded PCG64."""
    if m < 1 or N < 1:
        raise ValueError(f"matrix dimensions must be positive, got {m} x {N}")
    return np.random.default_rng(int(seed)).standard_normal((m, N))


def gen_block_sparse_signal(pattern: BlockPattern, k: int, seed: int) -> tuple:
    """Exactly block k-sparse signal with standard normal entries.

    k blocks are chosen uniformly without replacement; any block that lands
    exactly at zero norm (a measure-zero event) is redrawn so the planted
    sparsity is exact. Returns the signal and its block support.
    """
    if not 0 <= k <= pattern.n:
        raise ValueError(f"k must lie in [0, {pattern.n}], got {k!r}")
    values = np.zeros(pattern.N)
    if k == 0:
        return BlockVector(pattern, values), BlockIndexSet(pattern, ())
    rng = np.random.default_rng(int(seed))
    support = np.sort(rng.choice(pattern.n, size=k, replace=False))
    sel = BlockIndexSet(pattern, tuple(int(i) for i in support))
    cols = sel.scalar_indices()
    values[cols] = rng.standard_normal(k * pattern.d)
    while True:
        norms = np.linalg.norm(values.reshape(pattern.n, pattern.d), axis=1)
        dead = [i for i in sel.indices if norms[i] == 0.0]
        if not dead:  # pragma: no branch - redraw is probability zero
            break
        for i in dead:  # pragma: no cover
            values[i * pattern.d : (i + 1) * pattern.d] = rng.standard_normal(pattern.d)
    return BlockVector(pattern, values), sel


def gen_power_decay_signal(pattern: BlockPattern, theta: float, seed: int) -> BlockVector:
    """Signal whose sorted block norms are exactly (1, 2^-theta, ..., n^-theta).

    Decay ranks are assigned to block positions by a seeded uniform
    permutation and block directions are drawn uniformly on the d-sphere, so
    rank and position are independent.
    """
    if theta <= 1.0:
        raise ValueError(f"theta must exceed 1, got {theta!r}")
    rng = np.random.default_rng(int(seed))
    perm = rng.permutation(pattern.n)
    values = np.zeros(pattern.N)
    for rank, pos in enumerate(perm, start=1):
        direction = rng.standard_normal(pattern.d)
        nrm = np.linalg.norm(direction)
        while nrm == 0.0:  # pragma: no cover - probability zero
            direction = rng.standard_normal(pattern.d)
            nrm = np.linalg.norm(direction)
        values[pos * pattern.d : (pos + 1) * pattern.d] = (
            float(rank) ** (-theta) / nrm
        ) * direction
    return BlockVector(pattern, values)


def gen_support_estimate(
    T0: BlockIndexSet, rho: float, alpha: float, n: int, seed: int
) -> BlockIndexSet:
    """Random support estimate with |T| = round(rho*k) and round(alpha*rho*k) hits.

    Correct indices are drawn uniformly from ``T0`` and the rest uniformly
    from its complement. Infeasible (rho, alpha) combinations are rejected.
    """
    if n != T0.pattern.n:
        raise ValueError(f"n = {n} does not match the pattern ({T0.pattern.n} blocks)")
    if rho < 0 or not 0.0 <= alpha <= 1.0:
        raise ValueError(f"need rho >= 0 and alpha in [0, 1], got {rho!r}, {alpha!r}")
    k = len(T0)
    size = _round_half_up(rho * k)
    hits = _round_half_up(alpha * rho * k)
    if hits > k:
        raise ValueError(f"cannot place {hits} correct indices inside |T0| = {k}")
    if size - hits > n - k:
        raise ValueError(
            f"cannot place {size - hits} wrong indices outside |T0| (room for {n - k})"
        )
    rng = np.random.default_rng(int(seed))
    inside = rng.choice(np.asarray(T0.indices, dtype=int), size=hits, replace=False)
    pool = np.asarray(T0.complement().indices, dtype=int)
    outside = rng.choice(pool, size=size - hits, replace=False)
    return BlockIndexSet(T0.pattern, tuple(int(i) for i in inside) + tuple(int(i) for i in outside))


def _spawn_seeds(seed: int, count: int) -> list:
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def _run_replication(cfg: ScenarioConfig, rep: int) -> ExperimentRecord:
    seed_rep = cfg.base_seed + rep
    seed_mat, seed_sig, seed_est, seed_noise = _spawn_seeds(seed_rep, 4)
    pattern = BlockPattern(cfg.n, cfg.d)

    A = gen_gaussian_matrix(cfg.m, pattern.N, seed_mat)
    if cfg.theta is None:
        x_true, T0 = gen_block_sparse_signal(pattern, cfg.k, seed_sig)
    else:
        x_true = gen_power_decay_signal(pattern, cfg.theta, seed_sig)
        _, T0 = best_k_block_approx(x_true, cfg.k)
    estimate = gen_support_estimate(T0, cfg.rho, cfg.alpha, cfg.n, seed_est)

    weights = np.ones(cfg.n)
    weights[list(estimate.indices)] = cfg.omega

    y = A @ x_true.values
    if cfg.sigma > 0:
        y = y + cfg.sigma * np.random.default_rng(seed_noise).standard_normal(cfg.m)

    solver_cfg = SolverConfig(p=cfg.p, lam=cfg.lam_resolved)
    start = time.perf_counter()
    try:
        result = irls_recover(A, y, pattern, weights, solver_cfg)
    except SolverError:
        # No usable iterate; score the empty reconstruction (0 dB) and move on.
        result = RecoveryResult(
            x_hat=BlockVector.zeros(pattern),
            iterations=0,
            converged=False,
            final_gamma=float("nan"),
            final_step_norm=float("nan"),
        )
    wall_ms = (time.perf_counter() - start) * 1e3

    return ExperimentRecord(
        scenario=cfg.name,
        rep=rep,
        seed=seed_rep,
        n=cfg.n,
        d=cfg.d,
        k=cfg.k,
        m=cfg.m,
        p=cfg.p,
        sigma=cfg.sigma,
        omega=cfg.omega,
        rho=cfg.rho,
        alpha=cfg.alpha,
        theta=cfg.theta,
        lam=cfg.lam_resolved,
        snr_db=snr_db(x_true, result.x_hat),
        iterations=result.iterations,
        converged=result.converged,
        wall_ms=wall_ms,
    )


def run_scenario(cfg: ScenarioConfig) -> list:
    """Run all replications of one scenario, in replication order."""
    return [_run_replication(cfg, rep) for rep in range(cfg.reps)]


def _fmt(value: float) -> str:
    return repr(float(value))


def _record_line(record: ExperimentRecord, timing: bool) -> str:
    snr = "inf" if math.isinf(record.snr_db) else _fmt(record.snr_db)
    theta = "" if record.theta is None else _fmt(record.theta)
    wall = f"{record.wall_ms:.3f}" if timing else "0.000"
    parts = (
        record.scenario,
        str(record.rep),
        str(record.seed),
        str(record.n),
        str(record.d),
        str(record.k),
        str(record.m),
        _fmt(record.p),
        _fmt(record.sigma),
        _fmt(record.omega),
        _fmt(record.rho),
        _fmt(record.alpha),
        theta,
        _fmt(record.lam),
        snr,
        str(record.iterations),
        "true" if record.converged else "false",
        wall,
    )
    return ",".join(parts)


def write_records(records, out: str, timing: bool = False) -> None:
    """Write records as CSV, sorted by (scenario, rep); cleans up on failure."""
    ordered = sorted(records, key=lambda r: (r.scenario, r.rep))
    part = f"{out}.part"
    try:
        with open(part, "w", encoding="utf-8") as handle:
            handle.write(CSV_COLUMNS + "\n")
            for record in ordered:
                handle.write(_record_line(record, timing) + "\n")
        os.replace(part, out)
    except BaseException:
        if os.path.exists(part):
            os.unlink(part)
        raise


def run_sweep(cfgs, threads: int, out: str, timing: bool = False) -> list:
    """Run scenarios (possibly concurrently) and write the combined CSV.

    BLAS pools are pinned to one thread for the duration of the sweep so the
    per-cell arithmetic is identical no matter how many workers run; combined
    with the deterministic sort this makes the output file byte-identical
    across worker counts.
    """
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads!r}")
    with threadpool_limits(limits=1):
        if threads == 1 or len(cfgs) <= 1:
            results = [run_scenario(cfg) for cfg in cfgs]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run_scenario, cfgs))
    records = [record for batch in results for record in batch]
    write_records(records, out, timing=timing)
    return records


def _parse_scalar(token: str, key: str):
    token = token.strip()
    if key in _INT_KEYS:
        return int(token)
    return float(token)


def _parse_values(raw: str, key: str) -> list:
    values = [_parse_scalar(tok, key) for tok in raw.split(",") if tok.strip() != ""]
    if not values:
        raise ValueError(f"key {key!r} has no values")
    return values


def load_config(path: str, default_seed: int = 0) -> list:
    """Parse a scenario config file into a list of ``ScenarioConfig``.

    Format: INI-like sections, one scenario family per section, ``key=value``
    lines with keys named exactly after the scenario fields ("lambda" for the
    ridge level). A comma-separated value lists a sweep; all sweeps in a
    section expand as a Cartesian product in canonical key order, and the
    expanded scenarios are named ``section#idx``. ``base_seed`` defaults to
    ``default_seed`` when a section does not set it.
    """
    sections = []
    current = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith(("#", ";")):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = (line[1:-1].strip(), {})
                if not current[0]:
                    raise ValueError(f"{path}:{lineno}: empty section name")
                sections.append(current)
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            if current is None:
                raise ValueError(f"{path}:{lineno}: key=value before any [section]")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(
                    f"{path}:{lineno}: unknown key {key!r} (expected one of {_CONFIG_KEYS})"
                )
            if key in current[1]:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            current[1][key] = _parse_values(raw, key)

    cfgs = []
    for name, keymap in sections:
        keys = [key for key in _CONFIG_KEYS if key in keymap]
        combos = list(product(*(keymap[key] for key in keys)))
        width = max(3, len(str(len(combos) - 1)))
        for idx, combo in enumerate(combos):
            kwargs = dict(zip(keys, combo))
            kwargs["lam"] = kwargs.pop("lambda", None)
            kwargs.setdefault("base_seed", default_seed)
            label = name if len(combos) == 1 else f"{name}#{idx:0{width}d}"
            cfgs.append(ScenarioConfig(name=label, **kwargs))
    return cfgs
