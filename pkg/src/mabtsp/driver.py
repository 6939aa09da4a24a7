"""End-to-end trial loop: bandit calls, local search, rewards, rotation.

One run executes up to ``max_trials`` trials.  A trial selects candidate
edges through the per-city bandits, builds a randomized greedy initial
tour on them, descends with the sequential k-opt search, then updates the
bandit M values with the reward of the obtained local optimum against the
best tour seen so far.  When a trial fails to improve the best tour, one
double-bridge kick of the trial's local optimum is retried before the
trial is scored.  The policy rotates after ``t_type`` stagnant trials.

Runs terminate at ``max_trials``, when ``max_time`` seconds have elapsed,
or as soon as the best length reaches a provided target (best-known
solution), whichever comes first.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bandit as bd
from . import lksearch as lk
from .candidates import CandidateSet, build_candidate_sets
from .onetree import alpha_values, held_karp_ascent
from .tsplib import Instance


@dataclass(frozen=True)
class SolverParams:
    """Run parameters; defaults follow the reference configuration."""

    c_max: int = 7
    n_arm: int = 5
    epsilon: float = bd.DEFAULT_EPSILON
    lam: float = bd.DEFAULT_LAMBDA
    t_type: int | None = None
    max_trials: int | None = None
    max_time: float | None = None
    seed: int = 0
    max_depth: int = 5
    alpha_greedy_largest: bool = False
    bandtypes: tuple[int, ...] = bd.ALL_BANDTYPES
    bandit_enabled: bool = True
    ascent_steps: int | None = None

    def resolved_max_trials(self, n: int) -> int:
        if self.max_trials is not None:
            return self.max_trials
        return default_max_trials(n)

    def resolved_t_type(self, max_trials: int) -> int:
        if self.t_type is not None:
            return self.t_type
        return max(max_trials // 20, 1)


def default_max_trials(n: int) -> int:
    """Trial budget by instance size: n, then 10000, then 3000."""
    if n > 30000:
        return 3000
    if n >= 10000:
        return 10000
    return n


@dataclass
class TrialRecord:
    trial: int
    length: int
    bandtype: int
    prev_best: int | None
    reward: int
    improved: bool
    selected_edges: int


@dataclass
class RunResult:
    """Outcome of one seeded run."""

    best_tour: lk.Tour
    best_length: int
    trials_used: int
    wall_time: float
    reached_bks: bool | None = None
    trace: list[TrialRecord] | None = None
    m_trace: list[tuple] | None = None
    bandit_state: bd.BanditState | None = None


@dataclass
class Preprocessed:
    """Seed-independent per-instance state shared across runs."""

    candidate_set: CandidateSet
    pi2: np.ndarray
    lower_bound: int


def preprocess(inst: Instance, params: SolverParams) -> Preprocessed:
    """Penalty ascent, alpha values and candidate sets for an instance."""
    pi2, lb = held_karp_ascent(inst, params.ascent_steps)
    at = alpha_values(inst, pi2, k_nearest=params.c_max)
    cs = build_candidate_sets(at, params.c_max)
    return Preprocessed(candidate_set=cs, pi2=pi2, lower_bound=lb)


def solve(
    inst: Instance,
    params: SolverParams | None = None,
    bks: int | None = None,
    collect_trace: bool = False,
    collect_m_trace: bool = False,
    pre: Preprocessed | None = None,
) -> RunResult:
    """One full run of the trial loop; deterministic for a fixed seed."""
    params = params or SolverParams()
    if pre is None:
        pre = preprocess(inst, params)
    cs = pre.candidate_set
    n = inst.dimension
    max_trials = params.resolved_max_trials(n)
    if max_trials < 1:
        raise ValueError("max_trials must be >= 1")
    t_type = params.resolved_t_type(max_trials)
    rng = np.random.default_rng(params.seed)
    bs = bd.init_bandits(
        cs,
        epsilon=params.epsilon,
        lam=params.lam,
        n_arm=params.n_arm,
        t_type=t_type,
        bandtypes=params.bandtypes,
        alpha_greedy_largest=params.alpha_greedy_largest,
    )

    best_tour: lk.Tour | None = None
    best_len: int | None = None
    trace: list[TrialRecord] | None = [] if collect_trace else None
    m_trace: list[tuple] | None = [] if collect_m_trace else None
    start = time.perf_counter()
    trials_used = 0
    for trial in range(1, max_trials + 1):
        if params.bandit_enabled:
            bandtype = bs.bandtype
            sel = bd.call_bandit(bs, cs, rng)
        else:
            bandtype = -1
            sel = bd.full_selection(cs)
        tour = lk.choose_initial_tour(inst, sel, rng)
        tour = lk.lin_kernighan(inst, tour, sel, params.max_depth)
        if best_len is not None and tour.length >= best_len and n >= 8:
            # stagnant trial: perturb the incumbent instead (stands in for
            # the out-of-scope non-sequential moves)
            kicked = lk.lin_kernighan(
                inst, lk.double_bridge(best_tour, rng), sel, params.max_depth
            )
            if kicked.length < tour.length:
                tour = kicked
        trials_used = trial

        # reward against the best length before this trial's best-update;
        # the first trial has no finite best yet and contributes nothing
        prev_best = best_len
        r = bd.reward(tour.length, prev_best) if prev_best is not None else 0
        if params.bandit_enabled:
            bd.update_m(bs, sel, r)
            if m_trace is not None:
                for city, arms in enumerate(sel.arms):
                    for a in arms:
                        m_trace.append((trial, city, a, bs.m[city][a]))

        improved = prev_best is None or tour.length < prev_best
        if improved:
            best_tour = tour
            best_len = tour.length
        elif tour.length == prev_best:
            # drift across equal-length tours; helps plateau escapes
            best_tour = tour
        if params.bandit_enabled:
            bd.record_trial(bs, improved)
        if trace is not None:
            trace.append(
                TrialRecord(
                    trial=trial,
                    length=tour.length,
                    bandtype=bandtype,
                    prev_best=prev_best,
                    reward=r,
                    improved=improved,
                    selected_edges=sel.edge_count(),
                )
            )
        if bks is not None and best_len is not None and best_len <= bks:
            break
        if params.max_time is not None and time.perf_counter() - start > params.max_time:
            break

    wall = time.perf_counter() - start
    return RunResult(
        best_tour=best_tour,
        best_length=int(best_len),
        trials_used=trials_used,
        wall_time=wall,
        reached_bks=None if bks is None else best_len <= bks,
        trace=trace,
        m_trace=m_trace,
        bandit_state=bs,
    )


@dataclass
class BatchResult:
    """Aggregate of several seeded runs on one instance."""

    runs: list[RunResult]
    success: int
    best: int
    average: float
    mean_trials: float
    mean_time: float
    seeds: list[int]

    @property
    def n_runs(self) -> int:
        return len(self.runs)


def _run_one(args):
    inst, params, bks, pre, collect_trace = args
    return solve(inst, params, bks=bks, pre=pre, collect_trace=collect_trace)


def run_batch(
    inst: Instance,
    params: SolverParams | None = None,
    runs: int = 10,
    bks: int | None = None,
    workers: int = 1,
    collect_trace: bool = False,
    pre: Preprocessed | None = None,
) -> BatchResult:
    """Repeat solve() with seeds derived from the base seed and aggregate.

    Run i uses seed ``params.seed + i``.  Candidate construction is shared
    (it is seed independent).  Aggregation is order independent, so runs
    may execute in parallel worker processes.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    params = params or SolverParams()
    if pre is None:
        pre = preprocess(inst, params)
    seeds = [params.seed + i for i in range(runs)]
    jobs = [
        (inst, replace(params, seed=s), bks, pre, collect_trace) for s in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    lengths = [r.best_length for r in results]
    return BatchResult(
        runs=results,
        success=sum(1 for r in results if r.reached_bks),
        best=min(lengths),
        average=sum(lengths) / len(lengths),
        mean_trials=sum(r.trials_used for r in results) / len(results),
        mean_time=sum(r.wall_time for r in results) / len(results),
        seeds=seeds,
    )
