"""The path/shift monotonicity tester, its exact-rejection oracle, and the
domain-reduction wrapper.

One trial draws a walk length tau = 2^p and runs four sub-tests, each at
lengths tau-1 and tau:

  * up_path              x uniform, y ~ up-walk(x, l)
  * down_path            y uniform, x ~ down-walk(y, l)
  * up_path_down_shift   x uniform, y ~ up-walk(x, l), s ~ down-shift(x, tau-1),
                         test (x-s, y-s)
  * down_path_up_shift   y uniform, x ~ down-walk(y, l), s ~ up-shift(y, tau-1),
                         test (x+s, y+s)

A pair (u, v) with u <= v is violated when f(u)=1 > f(v)=0; the tester is
one-sided because every rejection carries such a witness.

The multi-trial driver is vectorized in fixed-size batches whose randomness
is keyed by (seed, batch index), so reports are bit-identical regardless of
how many worker threads process the batches.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import walks
from .errors import BudgetError, ConfigError, DomainError
from .grid import (
    FunctionOracle,
    GridShape,
    Point,
    restrict_to_subgrid,
    sample_subgrid,
)
from .rng import substream
from .stats import wilson_interval

STEPS = ("up_path", "down_path", "up_path_down_shift", "down_path_up_shift")

DEFAULT_BATCH = 8192


def default_tau_schedule(d: int) -> Tuple[int, ...]:
    p_max = math.ceil(math.log2(d)) if d > 1 else 0
    return tuple(2**p for p in range(p_max + 1))


def worker_count() -> int:
    env = os.environ.get("HGM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as e:
            raise ConfigError(f"HGM_THREADS must be an integer, got {env!r}") from e
    return 1


@dataclass(frozen=True)
class TesterConfig:
    shape: GridShape
    trials: int
    seed: int = 0
    tau_schedule: Optional[Tuple[int, ...]] = None
    epsilon: Optional[float] = None
    batch_size: int = DEFAULT_BATCH
    max_witnesses: int = 8

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.tau_schedule is not None:
            for t in self.tau_schedule:
                if t < 1 or t & (t - 1):
                    raise ConfigError(f"tau schedule entry {t} is not a power of two")

    @property
    def schedule(self) -> Tuple[int, ...]:
        if self.tau_schedule is not None:
            return self.tau_schedule
        return default_tau_schedule(self.shape.d)


@dataclass
class TrialOutcome:
    tau: int
    rejected: bool
    rejecting_step: Optional[str] = None
    rejecting_length: Optional[int] = None
    witness: Optional[Tuple[Point, Point]] = None
    queries: int = 0


@dataclass
class TesterReport:
    trials: int
    rejections: int
    reject_rate: float
    wilson_ci_95: Tuple[float, float]
    per_tau: Dict[int, Tuple[int, int]]  # tau -> (trials, rejections)
    per_step: Dict[str, int]  # first-rejecting-step attribution
    total_queries: int
    witnesses: List[Tuple[int, str, int, Point, Point]]  # (trial, step, length, u, v)
    seed: int


def _violates(fu: int, fv: int) -> bool:
    return fu > fv


def run_single_trial(f: FunctionOracle, cfg: TesterConfig, rng) -> TrialOutcome:
    """Scalar reference implementation of one trial (16 queries, always)."""
    shape = cfg.shape
    schedule = cfg.schedule
    tau = int(schedule[int(rng.integers(0, len(schedule)))])
    pairs: List[Tuple[str, int, Point, Point]] = []
    for step in STEPS:
        for ell in (tau - 1, tau):
            if step == "up_path":
                x = tuple(int(v) for v in rng.integers(1, shape.n + 1, shape.d))
                y = walks.sample_upwalk(shape, x, ell, rng)
                pairs.append((step, ell, x, y))
            elif step == "down_path":
                y = tuple(int(v) for v in rng.integers(1, shape.n + 1, shape.d))
                x = walks.sample_downwalk(shape, y, ell, rng)
                pairs.append((step, ell, x, y))
            elif step == "up_path_down_shift":
                x = tuple(int(v) for v in rng.integers(1, shape.n + 1, shape.d))
                y = walks.sample_upwalk(shape, x, ell, rng)
                s = walks.sample_downshift(shape, x, tau - 1, rng)
                u = walks.apply_shift(shape, x, s, -1)
                v = walks.apply_shift(shape, y, s, -1)
                pairs.append((step, ell, u, v))
            else:
                y = tuple(int(v) for v in rng.integers(1, shape.n + 1, shape.d))
                x = walks.sample_downwalk(shape, y, ell, rng)
                s = walks.sample_upshift(shape, y, tau - 1, rng)
                u = walks.apply_shift(shape, x, s, +1)
                v = walks.apply_shift(shape, y, s, +1)
                pairs.append((step, ell, u, v))
    outcome = TrialOutcome(tau=tau, rejected=False, queries=0)
    for step, ell, u, v in pairs:
        if u is None or v is None:  # defensive; cannot occur for coupled shifts
            continue
        fu, fv = f(u), f(v)
        outcome.queries += 2
        if not outcome.rejected and _violates(fu, fv):
            outcome.rejected = True
            outcome.rejecting_step = step
            outcome.rejecting_length = ell
            outcome.witness = (u, v)
    return outcome


# ---------------------------------------------------------------------------
# Vectorized multi-trial driver
# ---------------------------------------------------------------------------


def _run_batch(f: FunctionOracle, cfg: TesterConfig, batch_index: int, count: int):
    """One deterministic batch: returns per-batch aggregates.

    All randomness comes from (seed, "batch", batch_index), so the result is
    independent of which thread runs it.
    """
    shape = cfg.shape
    rng = substream(cfg.seed, "batch", batch_index)
    schedule = np.asarray(cfg.schedule, dtype=np.int64)
    taus = schedule[rng.integers(0, len(schedule), size=count)]
    N = count
    d = shape.d

    def uniform_pts():
        return rng.integers(1, shape.n + 1, size=(N, d))

    # Pair list in trial order: (step, length-kind) with length tau-1 then tau.
    pair_specs: List[Tuple[str, int]] = [(s, k) for s in STEPS for k in (0, 1)]
    lows = np.empty((len(pair_specs), N, d), dtype=np.int64)
    highs = np.empty((len(pair_specs), N, d), dtype=np.int64)
    for pi, (step, kind) in enumerate(pair_specs):
        ell = taus - 1 + kind
        if step == "up_path":
            X = uniform_pts()
            Y = walks.sample_walk_batch(shape, X, ell, "up", rng)
        elif step == "down_path":
            Y = uniform_pts()
            X = walks.sample_walk_batch(shape, Y, ell, "down", rng)
        elif step == "up_path_down_shift":
            X0 = uniform_pts()
            Y0 = walks.sample_walk_batch(shape, X0, ell, "up", rng)
            S = X0 - walks.sample_walk_batch(shape, X0, taus - 1, "down", rng)
            X, Y = X0 - S, Y0 - S
        else:
            Y0 = uniform_pts()
            X0 = walks.sample_walk_batch(shape, Y0, ell, "down", rng)
            S = walks.sample_walk_batch(shape, Y0, taus - 1, "up", rng) - Y0
            X, Y = X0 + S, Y0 + S
        lows[pi], highs[pi] = X, Y
    worker = f.spawn_worker()
    flows = worker.eval_many(lows.reshape(-1, d)).reshape(len(pair_specs), N)
    fhighs = worker.eval_many(highs.reshape(-1, d)).reshape(len(pair_specs), N)
    viol = flows > fhighs  # (pairs, N)
    rejected = viol.any(axis=0)
    first = np.argmax(viol, axis=0)  # index of first rejecting pair
    per_tau: Dict[int, Tuple[int, int]] = {}
    for t in cfg.schedule:
        mask = taus == t
        per_tau[int(t)] = (int(mask.sum()), int((mask & rejected).sum()))
    per_step = {s: 0 for s in STEPS}
    for pi, (step, _) in enumerate(pair_specs):
        per_step[step] += int((rejected & (first == pi)).sum())
    witnesses = []
    for row in np.nonzero(rejected)[0][: cfg.max_witnesses]:
        pi = int(first[row])
        step, kind = pair_specs[pi]
        witnesses.append(
            (
                batch_index * cfg.batch_size + int(row),
                step,
                int(taus[row]) - 1 + kind,
                tuple(int(c) for c in lows[pi, row]),
                tuple(int(c) for c in highs[pi, row]),
            )
        )
    return {
        "trials": N,
        "rejections": int(rejected.sum()),
        "per_tau": per_tau,
        "per_step": per_step,
        "queries": worker.query_count,
        "witnesses": witnesses,
    }


def run_tester(f: FunctionOracle, cfg: TesterConfig) -> TesterReport:
    """Aggregate cfg.trials independent trials; deterministic given (seed, cfg)."""
    if f.shape != cfg.shape:
        raise ConfigError("oracle shape does not match config shape")
    sizes = []
    left = cfg.trials
    while left > 0:
        take = min(cfg.batch_size, left)
        sizes.append(take)
        left -= take
    threads = worker_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(lambda b: _run_batch(f, cfg, b, sizes[b]), range(len(sizes)))
            )
    else:
        results = [_run_batch(f, cfg, b, sizes[b]) for b in range(len(sizes))]
    rejections = sum(r["rejections"] for r in results)
    queries = sum(r["queries"] for r in results)
    f.query_count += queries
    per_tau = {int(t): [0, 0] for t in cfg.schedule}
    per_step = {s: 0 for s in STEPS}
    witnesses: List = []
    for r in results:  # batch order, deterministic
        for t, (tt, tr) in r["per_tau"].items():
            per_tau[t][0] += tt
            per_tau[t][1] += tr
        for s, c in r["per_step"].items():
            per_step[s] += c
        if len(witnesses) < cfg.max_witnesses:
            witnesses.extend(r["witnesses"][: cfg.max_witnesses - len(witnesses)])
    rate = rejections / cfg.trials
    return TesterReport(
        trials=cfg.trials,
        rejections=rejections,
        reject_rate=rate,
        wilson_ci_95=wilson_interval(rejections, cfg.trials),
        per_tau={t: tuple(v) for t, v in per_tau.items()},
        per_step=per_step,
        total_queries=queries,
        witnesses=witnesses,
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# Exact per-trial rejection probability (small domains)
# ---------------------------------------------------------------------------


def _subtest_probs(f: FunctionOracle, tau: int, budget: int) -> List[float]:
    """Rejection probability of each of the eight sub-tests at walk length
    tau-1 and tau. All sub-tests draw fresh randomness, so the trial's
    rejection probability is 1 - prod(1 - p_i)."""
    shape = f.shape
    N = shape.num_points
    probs = []
    fvals = {x: f.peek(x) for x in shape.points()}
    for step in STEPS:
        for ell in (tau - 1, tau):
            acc = []
            for anchor in shape.points():
                if step == "up_path":
                    pmf = walks.exact_pmf(
                        shape, anchor, walks.WalkSpec("up", ell, shape), budget=budget
                    )
                    p = sum(
                        pr for y, pr in pmf.table.items() if fvals[anchor] > fvals[y]
                    )
                elif step == "down_path":
                    pmf = walks.exact_pmf(
                        shape, anchor, walks.WalkSpec("down", ell, shape), budget=budget
                    )
                    p = sum(
                        pr for x, pr in pmf.table.items() if fvals[x] > fvals[anchor]
                    )
                elif step == "up_path_down_shift":
                    pmf = walks.exact_pmf(
                        shape, anchor, walks.WalkSpec("up", ell, shape), budget=budget
                    )
                    spmf = walks.exact_shift_pmf(shape, anchor, tau - 1, "down", budget)
                    p = 0.0
                    for y, py in pmf.table.items():
                        for s, ps in spmf.items():
                            u = tuple(a - b for a, b in zip(anchor, s))
                            v = tuple(a - b for a, b in zip(y, s))
                            if fvals[u] > fvals[v]:
                                p += py * ps
                else:
                    pmf = walks.exact_pmf(
                        shape, anchor, walks.WalkSpec("down", ell, shape), budget=budget
                    )
                    spmf = walks.exact_shift_pmf(shape, anchor, tau - 1, "up", budget)
                    p = 0.0
                    for x, px in pmf.table.items():
                        for s, ps in spmf.items():
                            u = tuple(a + b for a, b in zip(x, s))
                            v = tuple(a + b for a, b in zip(anchor, s))
                            if fvals[u] > fvals[v]:
                                p += px * ps
                acc.append(p)
            probs.append(math.fsum(acc) / N)
    return probs


def exact_reject_prob(
    f: FunctionOracle, cfg: TesterConfig, budget: int = walks.DEFAULT_PMF_BUDGET
) -> float:
    """Exact per-trial rejection probability by integrating the trial over its
    full randomness. Feasible for tiny domains only."""
    if f.shape.num_points > 64:
        raise BudgetError("exact trial integration supports at most 64 points")
    schedule = cfg.schedule
    if max(schedule) > 4:
        raise BudgetError("exact trial integration supports walk lengths up to 4")
    per_tau = []
    for tau in schedule:
        probs = _subtest_probs(f, tau, budget)
        survive = 1.0
        for p in probs:
            survive *= 1.0 - p
        per_tau.append(1.0 - survive)
    return math.fsum(per_tau) / len(schedule)


# ---------------------------------------------------------------------------
# Full tester: fallback + domain reduction
# ---------------------------------------------------------------------------


@dataclass
class FullTesterResult:
    accepted: bool
    witness: Optional[Tuple[Point, Point]]
    fallback: bool
    k: Optional[int] = None
    k_formula: Optional[float] = None
    outer_reps: int = 0
    inner_trials: int = 0
    total_queries: int = 0


def line_tester_fallback(f: FunctionOracle, eps: float, rng) -> FullTesterResult:
    """Fallback pair tester for the eps < 1/sqrt(d) regime (own construction,
    not from the walk analysis): repeatedly pick a uniform point and resample
    one uniformly chosen coordinate through the dyadic-interval kernel,
    upward; reject on any violated pair. One-sided by construction."""
    shape = f.shape
    if not 0 < eps < 1:
        raise ConfigError("eps must be in (0,1)")
    num_pairs = math.ceil(8 * shape.d * max(1, shape.log_n) / eps)
    worker = f.spawn_worker()
    for _ in range(num_pairs):
        x = tuple(int(v) for v in rng.integers(1, shape.n + 1, shape.d))
        i = int(rng.integers(0, shape.d))
        c = walks._sample_coordinate(shape.n, x[i], rng)
        if c <= x[i]:
            continue  # lazy draw; no pair to test
        y = x[:i] + (c,) + x[i + 1 :]
        if worker(x) > worker(y):
            f.query_count += worker.query_count
            return FullTesterResult(False, (x, y), True, total_queries=worker.query_count)
    f.query_count += worker.query_count
    return FullTesterResult(True, None, True, total_queries=worker.query_count)


def choose_subgrid_size(shape: GridShape, eps: float) -> Tuple[int, float]:
    """Side length for domain reduction: the eighth-power formula, capped at n
    and rounded to a power of two. Returns (k, raw formula value)."""
    formula = (shape.d / eps) ** 8
    if formula >= shape.n:
        return shape.n, formula
    k = 2 ** max(1, math.floor(math.log2(formula)))
    return min(k, shape.n), formula


def run_full_tester(
    f: FunctionOracle,
    eps: float,
    seed: int = 0,
    outer_reps: Optional[int] = None,
    inner_trials: Optional[int] = None,
    k: Optional[int] = None,
    batch_size: int = DEFAULT_BATCH,
) -> FullTesterResult:
    """Distance-targeted tester: subgrid sampling plus the path tester.

    For eps below 1/sqrt(d) the walk analysis offers no advantage and we
    defer to the fallback pair tester. Otherwise: ceil(8/eps) rounds, each
    restricting f to k sorted uniform samples per axis and running the trial
    driver on the restriction. A witness in the restriction maps back through
    the sample tables to a violation of f itself.
    """
    shape = f.shape
    if not 0 < eps < 1:
        raise ConfigError("eps must be in (0,1)")
    if eps < shape.d**-0.5:
        return line_tester_fallback(f, eps, substream(seed, "fallback"))
    k_formula = (shape.d / eps) ** 8
    if k is None:
        k, k_formula = choose_subgrid_size(shape, eps)
    if k < 2 or k & (k - 1):
        raise ConfigError(f"subgrid size {k} must be a power of two >= 2")
    if k > shape.n:
        raise ConfigError(f"subgrid size {k} exceeds side length {shape.n}")
    if outer_reps is None:
        outer_reps = math.ceil(8 / eps)
    if inner_trials is None:
        inner_trials = math.ceil(32 * eps**-2 * math.sqrt(shape.d))
    total_queries = 0
    for rep in range(outer_reps):
        T = sample_subgrid(shape, k, substream(seed, "subgrid", rep))
        fT = restrict_to_subgrid(f, T)
        cfg = TesterConfig(
            shape=GridShape(k, shape.d),
            trials=inner_trials,
            seed=int(substream(seed, "inner", rep).integers(0, 2**63)),
            batch_size=batch_size,
        )
        report = run_tester(fT, cfg)
        total_queries += report.total_queries
        if report.rejections:
            _, _, _, zu, zv = report.witnesses[0]
            u = tuple(T[i][zu[i] - 1] for i in range(shape.d))
            v = tuple(T[i][zv[i] - 1] for i in range(shape.d))
            return FullTesterResult(
                False, (u, v), False, k, k_formula, rep + 1, inner_trials, total_queries
            )
    return FullTesterResult(
        True, None, False, k, k_formula, outer_reps, inner_trials, total_queries
    )
