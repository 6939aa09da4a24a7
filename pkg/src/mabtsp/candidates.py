"""Enlarged per-city candidate sets ordered by edge quality.

Each city gets the ``c_max`` neighbors with the smallest alpha values
(ties broken by distance, then target index).  The sets are built once at
initialization and never rebuilt; which subset of a set participates in a
given trial is the bandit module's concern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .onetree import AlphaTable


class InsufficientAlphaCoverage(ValueError):
    """The alpha table covers fewer neighbors per city than c_max."""


@dataclass
class CandidateSet:
    """Per-city candidate entries (target, alpha2, dist), alpha-sorted.

    Every city has exactly ``width = min(c_max, n - 1)`` entries.
    """

    targets: np.ndarray
    alpha2: np.ndarray
    dist: np.ndarray
    c_max: int

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    @property
    def width(self) -> int:
        return self.targets.shape[1]


def build_candidate_sets(alpha: AlphaTable, c_max: int) -> CandidateSet:
    """Take the c_max best entries per city from an alpha table."""
    if c_max < 1:
        raise ValueError("c_max must be >= 1")
    n = alpha.neighbors.shape[0]
    width = min(c_max, n - 1)
    if alpha.k < width:
        raise InsufficientAlphaCoverage(
            f"alpha table covers {alpha.k} neighbors per city, need {width}"
        )
    return CandidateSet(
        targets=alpha.neighbors[:, :width].copy(),
        alpha2=alpha.alpha2[:, :width].copy(),
        dist=alpha.dist[:, :width].copy(),
        c_max=c_max,
    )


def is_candidate(cs: CandidateSet, i: int, j: int) -> bool:
    """True iff j is in i's candidate set (directional)."""
    if i == j:
        return False
    return bool(np.any(cs.targets[i] == j))


def dump_candidates(cs: CandidateSet) -> str:
    """Debug text: one 'city: target(alpha) ...' line per city, 1-based."""
    lines = []
    for i in range(cs.n):
        parts = [
            f"{int(t) + 1}({a2 / 2:g})" for t, a2 in zip(cs.targets[i], cs.alpha2[i])
        ]
        lines.append(f"{i + 1}: " + " ".join(parts))
    return "\n".join(lines) + "\n"
