"""Per-city multi-armed bandits over the enlarged candidate sets.

Each city owns one bandit; each arm is one entry of the city's candidate
set and carries a learned M value (zero-initialized).  A call selects
``n_arm`` arms per city under the active policy:

- bandtype 0: epsilon-greedy (per-slot coin: explore uniformly at random
  or exploit the best remaining M, without replacement);
- bandtype 1: M-greedy (largest M values);
- bandtype 2: alpha-greedy (by alpha; smallest by default, see
  ``alpha_greedy_largest``).

After a trial the selected arms are updated with
``M = (1 - lam) * M + lam * r`` where the reward r is the best tour length
so far minus the trial's tour length.  The active policy rotates after
``t_type`` trials without improvement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .candidates import CandidateSet


class ParameterError(ValueError):
    """Bandit parameter outside its valid range."""


DEFAULT_EPSILON = 0.15
DEFAULT_LAMBDA = 0.16
DEFAULT_N_ARM = 5

ALL_BANDTYPES = (0, 1, 2)


@dataclass
class BanditState:
    """Arm values plus the global policy state for one solver run."""

    m: list[list[float]]
    epsilon: float
    lam: float
    n_arm: int
    t_type: int
    bandtypes: tuple[int, ...] = ALL_BANDTYPES
    alpha_greedy_largest: bool = False
    bt_index: int = 0
    no_improve: int = 0
    # instrumentation: per-policy call counts and exploration slot counts
    policy_calls: list[int] = field(default_factory=lambda: [0, 0, 0])
    explore_slots: int = 0
    total_slots: int = 0

    @property
    def bandtype(self) -> int:
        return self.bandtypes[self.bt_index]


def init_bandits(
    cs: CandidateSet,
    epsilon: float = DEFAULT_EPSILON,
    lam: float = DEFAULT_LAMBDA,
    n_arm: int = DEFAULT_N_ARM,
    t_type: int = 1,
    bandtypes: tuple[int, ...] = ALL_BANDTYPES,
    alpha_greedy_largest: bool = False,
) -> BanditState:
    """Fresh bandit state: all M values 0, bandtype 0, counter 0."""
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon must be in (0,1), got {epsilon}")
    if not 0 < lam < 1:
        raise ParameterError(f"lambda must be in (0,1), got {lam}")
    if not 1 <= n_arm <= cs.c_max:
        raise ParameterError(f"n_arm must be in [1, c_max={cs.c_max}], got {n_arm}")
    if t_type < 1:
        raise ParameterError(f"t_type must be >= 1, got {t_type}")
    if not bandtypes or any(b not in ALL_BANDTYPES for b in bandtypes):
        raise ParameterError(f"bandtypes must be a nonempty subset of {ALL_BANDTYPES}")
    m = [[0.0] * cs.width for _ in range(cs.n)]
    return BanditState(
        m=m,
        epsilon=epsilon,
        lam=lam,
        n_arm=n_arm,
        t_type=t_type,
        bandtypes=tuple(bandtypes),
        alpha_greedy_largest=alpha_greedy_largest,
    )


@dataclass
class SelectedCandidates:
    """Per-city selected arm indices; the union over cities is E_cand."""

    arms: list[list[int]]
    cs: CandidateSet

    def targets(self, city: int) -> list[int]:
        row = self.cs.targets[city]
        return [int(row[a]) for a in self.arms[city]]

    def edge_count(self) -> int:
        return sum(len(a) for a in self.arms)


def select_m_greedy(bs: BanditState, cs: CandidateSet, city: int) -> list[int]:
    """Arms with the largest M values; ties keep candidate-set order."""
    mrow = bs.m[city]
    ranked = sorted(range(len(mrow)), key=lambda a: (-mrow[a], a))
    return ranked[: min(bs.n_arm, len(mrow))]


def select_alpha_greedy(
    bs: BanditState, cs: CandidateSet, city: int
) -> list[int]:
    """Prefix of the alpha-sorted set (or the suffix with the largest
    alpha values when ``alpha_greedy_largest`` is set)."""
    width = cs.width
    take = min(bs.n_arm, width)
    if bs.alpha_greedy_largest:
        return list(range(width - take, width))
    return list(range(take))


def select_epsilon_greedy(
    bs: BanditState, cs: CandidateSet, city: int, rng: np.random.Generator
) -> list[int]:
    """Per-slot coin flip between uniform exploration and best-M
    exploitation, without replacement within the city."""
    mrow = bs.m[city]
    width = len(mrow)
    take = min(bs.n_arm, width)
    ranked = sorted(range(width), key=lambda a: (-mrow[a], a))
    chosen: list[int] = []
    in_chosen = [False] * width
    rank_pos = 0
    for _ in range(take):
        bs.total_slots += 1
        if rng.random() < bs.epsilon:
            bs.explore_slots += 1
            remaining = [a for a in range(width) if not in_chosen[a]]
            pick = remaining[int(rng.integers(len(remaining)))]
        else:
            while in_chosen[ranked[rank_pos]]:
                rank_pos += 1
            pick = ranked[rank_pos]
        chosen.append(pick)
        in_chosen[pick] = True
    return chosen


def call_bandit(
    bs: BanditState, cs: CandidateSet, rng: np.random.Generator
) -> SelectedCandidates:
    """Select n_arm arms per city under the active policy."""
    bt = bs.bandtype
    bs.policy_calls[bt] += 1
    if bt == 0:
        arms = [select_epsilon_greedy(bs, cs, i, rng) for i in range(cs.n)]
    elif bt == 1:
        arms = [select_m_greedy(bs, cs, i) for i in range(cs.n)]
    else:
        arms = [select_alpha_greedy(bs, cs, i) for i in range(cs.n)]
    return SelectedCandidates(arms=arms, cs=cs)


def full_selection(cs: CandidateSet) -> SelectedCandidates:
    """Every candidate entry of every city (bandit bypassed)."""
    width = cs.width
    return SelectedCandidates(
        arms=[list(range(width)) for _ in range(cs.n)], cs=cs
    )


def reward(len_r: int, len_rstar: int) -> int:
    """Best-so-far length minus the trial's length; positive on improvement."""
    return len_rstar - len_r


def update_m(bs: BanditState, sel: SelectedCandidates, r: float) -> None:
    """Blend the reward into every selected arm; others keep their value."""
    lam = bs.lam
    keep = 1.0 - lam
    inc = lam * r
    m = bs.m
    for city, arms in enumerate(sel.arms):
        row = m[city]
        for a in arms:
            row[a] = keep * row[a] + inc


def record_trial(bs: BanditState, improved: bool) -> None:
    """Track stagnation; rotate the policy after t_type stagnant trials."""
    if improved:
        bs.no_improve = 0
        return
    bs.no_improve += 1
    if bs.no_improve >= bs.t_type:
        bs.no_improve = 0
        bs.bt_index = (bs.bt_index + 1) % len(bs.bandtypes)
