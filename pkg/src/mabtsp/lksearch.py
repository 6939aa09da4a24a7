"""Tour representation and candidate-restricted sequential k-opt search.

The search removes and adds edges alternately along an ejection chain
anchored at a start city.  Every intermediate state is kept as a real tour
(each extension is one segment reversal), so sequential feasibility holds
by construction and the chain can close whenever the accumulated gain is
positive.  New edges, including the closing edge, must belong to the
selected candidate edges (in at least one direction).  Chains are
first-improvement: the first extension that beats the chain's starting
length commits immediately.

Backtracking is limited to the first two chain levels; deeper levels try a
single candidate.  Cities carry don't-look bits and are re-queued whenever
one of their incident tour edges changes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .bandit import SelectedCandidates
from .tsplib import Instance


class InfeasibleMove(ValueError):
    """Move application would not produce a single Hamiltonian cycle."""


class Tour:
    """Cyclic tour over an instance with O(1) succ/pred/position queries.

    ``length`` is the exact integer tour length and is maintained exactly
    by every operation in this module.
    """

    __slots__ = ("inst", "order", "pos", "length", "n")

    def __init__(self, inst: Instance, order, length: int | None = None):
        self.inst = inst
        self.order = [int(v) for v in order]
        self.n = len(self.order)
        pos = [0] * self.n
        for k, v in enumerate(self.order):
            pos[v] = k
        self.pos = pos
        self.length = inst.tour_length(self.order) if length is None else length

    def succ(self, v: int) -> int:
        k = self.pos[v] + 1
        return self.order[k if k < self.n else 0]

    def pred(self, v: int) -> int:
        return self.order[self.pos[v] - 1]

    def copy(self) -> "Tour":
        return Tour(self.inst, self.order, self.length)

    def edges(self):
        for k, v in enumerate(self.order):
            yield v, self.order[(k + 1) % self.n]

    def check(self) -> None:
        """Assert the permutation, position index and length invariants."""
        n = self.n
        if sorted(self.order) != list(range(n)):
            raise AssertionError("order is not a permutation")
        for k, v in enumerate(self.order):
            if self.pos[v] != k:
                raise AssertionError("pos is not the inverse of order")
        if self.inst.tour_length(self.order) != self.length:
            raise AssertionError("stored length differs from recomputation")


@dataclass
class KOptMove:
    """k removed tour edges and k added edges closing the tour again."""

    removed: list[tuple[int, int]]
    added: list[tuple[int, int]]
    gain: int = 0


def _norm(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def apply_move(tour: Tour, move: KOptMove) -> Tour:
    """Apply a k-opt move, validating feasibility and gain accounting.

    Raises :class:`InfeasibleMove` when a removed edge is not in the tour,
    when the declared gain disagrees with the distances, or when the added
    edges do not reconnect a single Hamiltonian cycle.
    """
    if not move.removed and not move.added:
        if move.gain != 0:
            raise InfeasibleMove("empty move must have zero gain")
        return tour.copy()

    inst = tour.inst
    n = tour.n
    removed = {_norm(a, b) for a, b in move.removed}
    added = {_norm(a, b) for a, b in move.added}
    if len(removed) != len(move.removed) or len(added) != len(move.added):
        raise InfeasibleMove("duplicate edges in move")
    tour_edges = {_norm(a, b) for a, b in tour.edges()}
    for e in removed:
        if e not in tour_edges:
            raise InfeasibleMove(f"removed edge {e} is not a tour edge")
    for e in added:
        if e[0] == e[1]:
            raise InfeasibleMove("self-loop added")
        if e in tour_edges and e not in removed:
            raise InfeasibleMove(f"added edge {e} already in tour")

    gain = sum(inst.distance(a, b) for a, b in removed) - sum(
        inst.distance(a, b) for a, b in added
    )
    if gain != move.gain:
        raise InfeasibleMove(f"declared gain {move.gain} != computed {gain}")

    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in tour.edges():
        if _norm(a, b) not in removed:
            adj[a].append(b)
            adj[b].append(a)
    for a, b in added:
        adj[a].append(b)
        adj[b].append(a)
    for v in range(n):
        if len(adj[v]) != 2:
            raise InfeasibleMove(f"city {v} has degree {len(adj[v])} after move")

    order = [0]
    prev, cur = -1, 0
    for _ in range(n - 1):
        nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
        order.append(nxt)
        prev, cur = cur, nxt
    if len(set(order)) != n or order[0] not in adj[order[-1]]:
        raise InfeasibleMove("added edges split the tour into subcycles")

    return Tour(inst, order, tour.length - gain)


def double_bridge(tour: Tour, rng: np.random.Generator) -> Tour:
    """Classic 4-segment reconnection kick; exact length update."""
    n = tour.n
    if n < 8:
        raise ValueError("double bridge needs n >= 8")
    p1, p2, p3 = sorted(
        int(v) for v in rng.choice(np.arange(1, n), 3, replace=False)
    )
    o = tour.order
    d = tour.inst.distance
    removed = (
        d(o[p1 - 1], o[p1])
        + d(o[p2 - 1], o[p2])
        + d(o[p3 - 1], o[p3])
        + d(o[n - 1], o[0])
    )
    added = (
        d(o[p1 - 1], o[p3])
        + d(o[n - 1], o[p2])
        + d(o[p3 - 1], o[p1])
        + d(o[p2 - 1], o[0])
    )
    new_order = o[:p1] + o[p3:] + o[p2:p3] + o[p1:p2]
    return Tour(tour.inst, new_order, tour.length - removed + added)


# -- initial tour ---------------------------------------------------------------

def choose_initial_tour(
    inst: Instance, sel: SelectedCandidates, rng: np.random.Generator
) -> Tour:
    """Randomized greedy construction over the selected candidate edges.

    Starts at a random city and repeatedly moves to a uniformly chosen
    unvisited selected neighbor, falling back to the nearest unvisited city
    when every selected neighbor has been visited.
    """
    n = inst.dimension
    visited = np.zeros(n, dtype=bool)
    start = int(rng.integers(n))
    order = [start]
    visited[start] = True
    cur = start
    big = np.int64(2**62)
    for _ in range(n - 1):
        options = [t for t in sel.targets(cur) if not visited[t]]
        if options:
            nxt = options[int(rng.integers(len(options)))]
        else:
            row = inst.distance_row(cur) + visited * big
            nxt = int(np.argmin(row))
        order.append(nxt)
        visited[nxt] = True
        cur = nxt
    return Tour(inst, order)


# -- sequential k-opt -----------------------------------------------------------

def _neighbor_lists(n: int, sel: SelectedCandidates) -> list[list[int]]:
    """Per-city neighbor targets in selection order, symmetrized.

    An edge is usable when either endpoint selected it, so each city's list
    is its own selection followed by cities that selected it.
    """
    nbr = [sel.targets(i) for i in range(n)]
    nbr_sets = [set(x) for x in nbr]
    for i in range(n):
        for t in nbr[i]:
            if i not in nbr_sets[t]:
                nbr[t].append(i)
                nbr_sets[t].add(i)
    return nbr


def lin_kernighan(
    inst: Instance,
    tour: Tour,
    sel: SelectedCandidates,
    max_depth: int = 5,
    collect_moves: list[KOptMove] | None = None,
) -> Tour:
    """Descend to a local optimum of the candidate-restricted k-opt moves.

    Returns a new tour; the input is not modified.  Chosen added edges come
    from the selected candidates; the closing edge back to the chain anchor
    is forced, so it is exempt from the restriction.  When ``collect_moves``
    is given, every accepted move is appended to it.
    """
    if max_depth < 2:
        raise ValueError("max_depth must be >= 2")
    n = tour.n
    if inst.has_matrix():
        dist = inst.dense_rows()
    else:
        dist = _RowCache(inst)
    order = list(tour.order)
    pos = list(tour.pos)
    length = tour.length

    nbr = _neighbor_lists(n, sel)

    def reverse_range(i: int, j: int, seglen: int) -> None:
        # reverse the cyclic forward position range i..j (seglen elements)
        for k in range(seglen // 2):
            p1 = i + k
            if p1 >= n:
                p1 -= n
            p2 = j - k
            if p2 < 0:
                p2 += n
            a, b = order[p1], order[p2]
            order[p1] = b
            order[p2] = a
            pos[b] = p1
            pos[a] = p2

    def flip(a: int, b: int) -> tuple[int, int, int]:
        # reverse the forward segment a..b; picks the shorter side, which
        # yields the same cyclic tour
        i, j = pos[a], pos[b]
        seglen = j - i + 1 if j >= i else n - i + j + 1
        if 2 * seglen > n:
            i, j = (j + 1) % n, (i - 1) % n
            seglen = n - seglen
        reverse_range(i, j, seglen)
        return (i, j, seglen)

    def chain(t1: int, u: int, level: int, start_len: int, removed: set, added: set,
              touched: list) -> bool:
        nonlocal length
        dt1 = dist[t1]
        du = dist[u]
        dt1u = dt1[u]
        base_open = start_len - length + dt1u
        forward = pos[u] - pos[t1] == 1 or pos[t1] - pos[u] == n - 1
        deepen_budget = n if level <= 2 else 1
        pu = pos[u]
        u_succ = order[pu + 1 if pu + 1 < n else 0]
        u_pred = order[pu - 1]
        for v in nbr[u]:
            if v == t1 or v == u or v == u_succ or v == u_pred:
                # added edges must not already be tour edges
                continue
            duv = du[v]
            uv = (u, v) if u < v else (v, u)
            if uv in removed:
                continue
            w = order[pos[v] - 1] if forward else order[
                pos[v] + 1 if pos[v] + 1 < n else 0
            ]
            if w == u:
                continue
            vw = (v, w) if v < w else (w, v)
            if vw in added:
                continue
            dvw = dist[v][w]
            dt1w = dt1[w]
            delta = dt1u + dvw - duv - dt1w
            t1w = (t1, w) if t1 < w else (w, t1)
            # closing the chain here: the closing edge (t1, w) is forced,
            # only the total gain decides
            if length - delta < start_len and t1w not in removed:
                if forward:
                    flip(u, w)
                else:
                    flip(w, u)
                length -= delta
                removed.add(vw)
                added.add(uv)
                added.add(t1w)
                touched.extend((t1, u, v, w))
                return True
            # deepening needs a positive cumulative gain with (u, v) added
            if base_open - duv <= 0:
                continue
            if level <= max_depth - 2 and deepen_budget > 0:
                deepen_budget -= 1
                token = flip(u, w) if forward else flip(w, u)
                length -= delta
                removed.add(vw)
                added.add(uv)
                if chain(t1, w, level + 1, start_len, removed, added, touched):
                    touched.extend((t1, u, v, w))
                    return True
                removed.discard(vw)
                added.discard(uv)
                reverse_range(*token)
                length += delta
        return False

    def improve_city(t1: int, touched: list) -> bool:
        for u in (order[pos[t1] + 1 if pos[t1] + 1 < n else 0], order[pos[t1] - 1]):
            start_len = length
            removed = {(t1, u) if t1 < u else (u, t1)}
            added: set = set()
            if chain(t1, u, 1, start_len, removed, added, touched):
                if collect_moves is not None:
                    collect_moves.append(
                        KOptMove(
                            removed=sorted(removed),
                            added=sorted(added),
                            gain=start_len - length,
                        )
                    )
                return True
        return False

    active = deque(range(n))
    in_queue = bytearray([1]) * n
    while active:
        t1 = active.popleft()
        in_queue[t1] = 0
        touched: list[int] = []
        if improve_city(t1, touched):
            touched.append(t1)
            for c in touched:
                if not in_queue[c]:
                    in_queue[c] = 1
                    active.append(c)

    return Tour(inst, order, length)


class _RowCache:
    """Scalar distance access backed by cached instance rows (large n)."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.rows: dict[int, np.ndarray] = {}

    def __getitem__(self, i: int):
        row = self.rows.get(i)
        if row is None:
            row = self.inst.distance_row(i)
            self.rows[i] = row
        return row
