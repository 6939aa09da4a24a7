"""Minimum 1-trees, vertex-penalty ascent and edge quality values.

A 1-tree for a special node s is a spanning tree on the remaining nodes
plus the two cheapest edges incident to s; its length lower-bounds the
optimal tour.  Vertex penalties pi shift each edge weight to
d(i,j) + pi[i] + pi[j], which changes the 1-tree but not the optimal tour,
and an ascent over pi tightens the bound w(pi) = L_pi(T) - 2*sum(pi).

To keep every comparison exact, penalties are stored in half units as
integers (``pi2`` is 2*pi) and all penalized arithmetic happens in doubled
units: ``d2(i,j) = 2*d(i,j) + pi2[i] + pi2[j]``.  Lengths named ``*2`` are
in those doubled units.

The quality (alpha) of an edge is the extra length forced on the minimum
1-tree when the edge is required to be part of it.  It is zero exactly for
1-tree edges and is computed here by the topological shortcut: penalized
weight minus the heaviest tree edge on the path between the endpoints
(for edges at the special node: minus the larger of its two 1-tree edges).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tsplib import Instance, WeightKind, MATRIX_LIMIT

_HUGE = np.int64(2**62)

# Neighbor count of the sparse pregraph used for large instances.
PREGRAPH_K = 16


@dataclass
class OneTree:
    """Minimum 1-tree under penalties, in doubled units.

    ``parent`` encodes the spanning tree on the non-special nodes
    (``parent[root] == parent[special] == -1``); ``extra_edges`` are the two
    edges at the special node; ``order`` is a root-first traversal order of
    the spanning tree.
    """

    special: int
    parent: np.ndarray
    extra_edges: tuple[tuple[int, int], tuple[int, int]]
    length2: int
    degrees: np.ndarray
    order: np.ndarray

    @property
    def length(self) -> float:
        """Penalized length in original distance units."""
        return self.length2 / 2.0

    def edges(self):
        """All n edges as (i, j) pairs: n-2 tree edges plus 2 at special."""
        for j in self.order[1:]:
            yield (int(j), int(self.parent[j]))
        yield self.extra_edges[0]
        yield self.extra_edges[1]


@dataclass
class AlphaTable:
    """Per-city nearest neighbors by alpha, sorted ascending.

    Rows are sorted by (alpha2, distance, target index).  ``alpha2`` is in
    doubled units; ``dist`` is the raw integer distance.
    """

    neighbors: np.ndarray
    alpha2: np.ndarray
    dist: np.ndarray
    k: int
    special: int


def zero_penalties(n: int) -> np.ndarray:
    return np.zeros(n, dtype=np.int64)


def _penalized_matrix(inst: Instance, pi2: np.ndarray) -> np.ndarray:
    d = inst.distance_matrix()
    return 2 * d + pi2[:, None] + pi2[None, :]


def _choose_special(d2: np.ndarray) -> int:
    # Node maximizing its second-nearest penalized edge weight; ties break
    # to the lowest index via argmax.
    m = d2.copy()
    np.fill_diagonal(m, _HUGE)
    second = np.partition(m, 1, axis=1)[:, 1]
    return int(np.argmax(second))


def _prim_dense(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Prim on a dense weight matrix; returns (parent, insertion order)."""
    m = w.shape[0]
    parent = np.full(m, -1, dtype=np.int64)
    order = np.empty(m, dtype=np.int64)
    in_tree = np.zeros(m, dtype=bool)
    best = w[0].copy()
    best_from = np.zeros(m, dtype=np.int64)
    in_tree[0] = True
    best[0] = _HUGE
    order[0] = 0
    for t in range(1, m):
        j = int(np.argmin(best))
        order[t] = j
        parent[j] = best_from[j]
        in_tree[j] = True
        best[j] = _HUGE
        row = w[j]
        upd = (row < best) & ~in_tree
        best[upd] = row[upd]
        best_from[upd] = j
    return parent, order


def minimum_one_tree(
    inst: Instance, pi2: np.ndarray | None = None, special: int | None = None
) -> OneTree:
    """Minimum 1-tree for the penalized instance.

    The special node defaults to the one maximizing its second-nearest
    penalized edge weight.  The result is minimal among all 1-trees with
    that special node.
    """
    n = inst.dimension
    if pi2 is None:
        pi2 = zero_penalties(n)
    if n <= MATRIX_LIMIT:
        return _one_tree_dense(inst, pi2, special)
    return _one_tree_sparse(inst, pi2, special)


def _one_tree_dense(inst, pi2, special=None) -> OneTree:
    n = inst.dimension
    d2 = _penalized_matrix(inst, pi2)
    if special is None:
        special = _choose_special(d2)
    rest = np.concatenate([np.arange(special), np.arange(special + 1, n)])
    sub = d2[np.ix_(rest, rest)]
    parent_local, order_local = _prim_dense(sub)
    parent = np.full(n, -1, dtype=np.int64)
    nonroot = order_local[1:]
    parent[rest[nonroot]] = rest[parent_local[nonroot]]
    order = rest[order_local]

    srow = d2[special].copy()
    srow[special] = _HUGE
    # two cheapest penalized edges at special; ties break by target index
    j1, j2 = np.lexsort((np.arange(n), srow))[:2]

    degrees = np.zeros(n, dtype=np.int64)
    child = rest[nonroot]
    np.add.at(degrees, child, 1)
    np.add.at(degrees, parent[child], 1)
    degrees[special] += 2
    degrees[j1] += 1
    degrees[j2] += 1

    length2 = int(d2[child, parent[child]].sum()) + int(srow[j1]) + int(srow[j2])
    return OneTree(
        special=int(special),
        parent=parent,
        extra_edges=((int(special), int(j1)), (int(special), int(j2))),
        length2=length2,
        degrees=degrees,
        order=order,
    )


def _knn_targets(inst: Instance, k: int) -> np.ndarray:
    """k nearest targets per city by raw distance (coordinate kinds only)."""
    from scipy.spatial import cKDTree

    tree = cKDTree(inst.coords)
    _, idx = tree.query(inst.coords, k=k + 1)
    out = np.empty((inst.dimension, k), dtype=np.int64)
    for i in range(inst.dimension):
        row = [j for j in idx[i] if j != i][:k]
        out[i] = row
    return out


def _one_tree_sparse(inst, pi2, special=None) -> OneTree:
    """Prim over a k-nearest-neighbor pregraph for large instances.

    Falls back to a dense on-the-fly scan when the pregraph is not
    connected or the instance has no coordinates.
    """
    import heapq

    n = inst.dimension
    if inst.weight_kind not in (WeightKind.EUC_2D, WeightKind.CEIL_2D):
        return _one_tree_dense_rows(inst, pi2, special)
    knn = _knn_targets(inst, PREGRAPH_K)
    adj: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in knn[i]:
            adj[i].append(int(j))
            adj[int(j)].append(i)

    def d2(i, j):
        return 2 * int(inst.distance(i, j)) + int(pi2[i]) + int(pi2[j])

    if special is None:
        # approximate rule on the pregraph: second-nearest penalized weight
        second = np.empty(n, dtype=np.int64)
        for i in range(n):
            ws = sorted(d2(i, j) for j in set(adj[i]))
            second[i] = ws[1] if len(ws) > 1 else ws[0]
        special = int(np.argmax(second))

    rest = [v for v in range(n) if v != special]
    root = rest[0]
    parent = np.full(n, -1, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    seen[special] = True
    seen[root] = True
    order = [root]
    heap = [(d2(root, j), root, j) for j in set(adj[root]) if j != special]
    heapq.heapify(heap)
    while heap and len(order) < n - 1:
        w, p, j = heapq.heappop(heap)
        if seen[j]:
            continue
        seen[j] = True
        parent[j] = p
        order.append(j)
        for t in set(adj[j]):
            if not seen[t]:
                heapq.heappush(heap, (d2(j, t), j, t))
    if len(order) < n - 1:
        return _one_tree_dense_rows(inst, pi2, special)

    srow = 2 * inst.distance_row(special) + pi2[special] + pi2
    srow[special] = _HUGE
    j1, j2 = np.lexsort((np.arange(n), srow))[:2]

    degrees = np.zeros(n, dtype=np.int64)
    length2 = int(srow[j1]) + int(srow[j2])
    for j in order[1:]:
        degrees[j] += 1
        degrees[parent[j]] += 1
        length2 += d2(j, int(parent[j]))
    degrees[special] += 2
    degrees[j1] += 1
    degrees[j2] += 1
    return OneTree(
        special=int(special),
        parent=parent,
        extra_edges=((int(special), int(j1)), (int(special), int(j2))),
        length2=length2,
        degrees=degrees,
        order=np.asarray(order, dtype=np.int64),
    )


def _one_tree_dense_rows(inst, pi2, special=None) -> OneTree:
    """O(n) memory Prim using on-demand distance rows (correctness fallback)."""
    n = inst.dimension

    def penalized_row(i):
        return 2 * inst.distance_row(i) + pi2[i] + pi2

    if special is None:
        second = np.empty(n, dtype=np.int64)
        for i in range(n):
            row = penalized_row(i)
            row[i] = _HUGE
            second[i] = np.partition(row, 1)[1]
        special = int(np.argmax(second))

    rest = np.concatenate([np.arange(special), np.arange(special + 1, n)])
    root = int(rest[0])
    parent = np.full(n, -1, dtype=np.int64)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[special] = True
    in_tree[root] = True
    best = penalized_row(root)
    best[in_tree] = _HUGE
    best_from = np.full(n, root, dtype=np.int64)
    order = [root]
    length2 = 0
    for _ in range(n - 2):
        j = int(np.argmin(best))
        length2 += int(best[j])
        parent[j] = best_from[j]
        in_tree[j] = True
        order.append(j)
        best[j] = _HUGE
        row = penalized_row(j)
        row[in_tree] = _HUGE
        upd = row < best
        best[upd] = row[upd]
        best_from[upd] = j

    srow = 2 * inst.distance_row(special) + pi2[special] + pi2
    srow[special] = _HUGE
    j1, j2 = np.lexsort((np.arange(n), srow))[:2]
    degrees = np.zeros(n, dtype=np.int64)
    for j in order[1:]:
        degrees[j] += 1
        degrees[parent[j]] += 1
    degrees[special] += 2
    degrees[j1] += 1
    degrees[j2] += 1
    length2 += int(srow[j1]) + int(srow[j2])
    return OneTree(
        special=int(special),
        parent=parent,
        extra_edges=((int(special), int(j1)), (int(special), int(j2))),
        length2=length2,
        degrees=degrees,
        order=np.asarray(order, dtype=np.int64),
    )


def one_tree_bound2(tree: OneTree, pi2: np.ndarray) -> int:
    """w(pi) in doubled units: L2(T) - 2*sum(pi2)."""
    return int(tree.length2) - 2 * int(pi2.sum())


def held_karp_ascent(
    inst: Instance, max_steps: int | None = None
) -> tuple[np.ndarray, int]:
    """Subgradient ascent on vertex penalties.

    Returns the best visited penalties and the bound they certify, rounded
    up to an integer (valid because tour lengths are integers).  Step
    direction is degree(i) - 2; the step length starts at L(T)/(2n) and
    follows a period doubling/halving schedule keyed on bound improvements.
    """
    n = inst.dimension
    if max_steps is None:
        max_steps = min(n, 1000)
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")

    pi2 = zero_penalties(n)
    tree = minimum_one_tree(inst, pi2)
    best_w2 = one_tree_bound2(tree, pi2)
    best_pi2 = pi2.copy()
    g = tree.degrees - 2
    if not np.any(g):
        return best_pi2, -((-best_w2) // 2)

    step2 = tree.length2 / (2.0 * n)
    period = max(n // 8, 4)
    steps = 0
    while steps < max_steps and step2 >= 1.0:
        improved_last = False
        for p in range(period):
            delta = np.sign(g) * np.floor(step2 * np.abs(g) + 0.5)
            pi2 = pi2 + delta.astype(np.int64)
            tree = minimum_one_tree(inst, pi2)
            w2 = one_tree_bound2(tree, pi2)
            steps += 1
            if w2 > best_w2:
                best_w2 = w2
                best_pi2 = pi2.copy()
                improved_last = p == period - 1
            g = tree.degrees - 2
            if not np.any(g) or steps >= max_steps:
                break
        if not np.any(g):
            break
        if improved_last:
            step2 *= 2.0
            period *= 2
        else:
            period = max(period // 2, 1)
            step2 /= 2.0
    return best_pi2, -((-best_w2) // 2)


def alpha_values(inst: Instance, pi2: np.ndarray, k_nearest: int) -> AlphaTable:
    """Exact alpha values of the k smallest-alpha neighbors per city.

    Uses the topological shortcut on the minimum 1-tree; equals the
    definitional constrained-1-tree recomputation edge by edge.
    """
    if k_nearest < 1:
        raise ValueError("k_nearest must be >= 1")
    n = inst.dimension
    if n <= MATRIX_LIMIT:
        return _alpha_dense(inst, pi2, k_nearest)
    return _alpha_sparse(inst, pi2, k_nearest)


def _alpha_dense(inst, pi2, k_nearest) -> AlphaTable:
    n = inst.dimension
    tree = minimum_one_tree(inst, pi2)
    d = inst.distance_matrix()
    d2 = 2 * d + pi2[:, None] + pi2[None, :]
    s = tree.special

    # beta[i, j] = heaviest tree edge on the spanning-tree path i..j,
    # filled over the Prim insertion order (each new node is a leaf, so its
    # path to any earlier node passes through its parent).
    beta = np.zeros((n, n), dtype=np.int64)
    inserted = np.empty(n - 1, dtype=np.int64)
    inserted[0] = tree.order[0]
    for t, j in enumerate(tree.order[1:], start=1):
        p = tree.parent[j]
        w = d2[j, p]
        prev = inserted[:t]
        bj = np.maximum(beta[p, prev], w)
        beta[j, prev] = bj
        beta[prev, j] = bj
        inserted[t] = j

    alpha2 = d2 - beta
    (s_, j1), (_, j2) = tree.extra_edges
    e2w = max(d2[s, j1], d2[s, j2])
    alpha2[s, :] = d2[s, :] - e2w
    alpha2[:, s] = alpha2[s, :]
    alpha2[s, j1] = alpha2[j1, s] = 0
    alpha2[s, j2] = alpha2[j2, s] = 0
    np.fill_diagonal(alpha2, _HUGE)
    return _select_k(alpha2, d, k_nearest, tree.special)


def _select_k(alpha2, d, k_nearest, special) -> AlphaTable:
    n = alpha2.shape[0]
    k = min(k_nearest, n - 1)
    neighbors = np.empty((n, k), dtype=np.int64)
    a_out = np.empty((n, k), dtype=np.int64)
    d_out = np.empty((n, k), dtype=np.int64)
    idx = np.arange(n)
    for i in range(n):
        row = alpha2[i]
        kth = np.partition(row, k - 1)[k - 1]
        cand = idx[row <= kth]
        sel = np.lexsort((cand, d[i, cand], row[cand]))[:k]
        chosen = cand[sel]
        neighbors[i] = chosen
        a_out[i] = row[chosen]
        d_out[i] = d[i, chosen]
    return AlphaTable(neighbors=neighbors, alpha2=a_out, dist=d_out, k=k, special=special)


def _alpha_sparse(inst, pi2, k_nearest) -> AlphaTable:
    """Alpha table for large instances from a nearest-neighbor pool.

    The pool per city is its raw-distance nearest neighbors; alpha within
    the pool is exact (path maxima via binary lifting on the spanning tree).
    """
    n = inst.dimension
    tree = minimum_one_tree(inst, pi2)
    s = tree.special
    pool_k = max(3 * k_nearest, PREGRAPH_K)
    pool = _knn_targets(inst, pool_k)

    # binary lifting tables on the spanning tree (special excluded)
    depth = np.zeros(n, dtype=np.int64)
    logn = max(1, int(np.ceil(np.log2(max(n, 2)))))
    up = np.full((logn, n), -1, dtype=np.int64)
    upmax = np.zeros((logn, n), dtype=np.int64)

    def d2(i, j):
        return 2 * int(inst.distance(i, j)) + int(pi2[i]) + int(pi2[j])

    for j in tree.order[1:]:
        p = int(tree.parent[j])
        depth[j] = depth[p] + 1
        up[0, j] = p
        upmax[0, j] = d2(j, p)
    for lvl in range(1, logn):
        prev = up[lvl - 1]
        pj = np.where(prev >= 0, prev, 0)
        anc = up[lvl - 1, pj]
        valid = (prev >= 0) & (anc >= 0)
        up[lvl, valid] = anc[valid]
        upmax[lvl, valid] = np.maximum(
            upmax[lvl - 1, valid], upmax[lvl - 1, pj[valid]]
        )

    def path_max(a, b):
        m = 0
        da, db = int(depth[a]), int(depth[b])
        if da < db:
            a, b = b, a
            da, db = db, da
        diff = da - db
        lvl = 0
        while diff:
            if diff & 1:
                m = max(m, int(upmax[lvl, a]))
                a = int(up[lvl, a])
            diff >>= 1
            lvl += 1
        if a == b:
            return m
        for lvl in range(logn - 1, -1, -1):
            if up[lvl, a] != up[lvl, b]:
                m = max(m, int(upmax[lvl, a]), int(upmax[lvl, b]))
                a, b = int(up[lvl, a]), int(up[lvl, b])
        return max(m, int(upmax[0, a]), int(upmax[0, b]))

    (s_, j1), (_, j2) = tree.extra_edges
    e2w = max(d2(s, j1), d2(s, j2))
    k = min(k_nearest, n - 1)
    neighbors = np.empty((n, k), dtype=np.int64)
    a_out = np.empty((n, k), dtype=np.int64)
    d_out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        targets = [int(t) for t in pool[i]]
        if s not in targets and i != s:
            targets.append(s)
        if i == s:
            targets = sorted(set(targets) - {s})
        entries = []
        for j in targets:
            w2 = d2(i, j)
            if i == s or j == s:
                o = s ^ i ^ j
                a2 = 0 if o in (j1, j2) else w2 - e2w
            else:
                a2 = w2 - path_max(i, j)
                if a2 < 0:
                    a2 = 0
            entries.append((a2, int(inst.distance(i, j)), j))
        entries.sort()
        take = entries[:k]
        if len(take) < k:
            raise ValueError("neighbor pool smaller than k_nearest")
        neighbors[i] = [e[2] for e in take]
        a_out[i] = [e[0] for e in take]
        d_out[i] = [e[1] for e in take]
    return AlphaTable(neighbors=neighbors, alpha2=a_out, dist=d_out, k=k, special=s)


def dump_one_tree(tree: OneTree, inst: Instance) -> str:
    """Edge list text dump: one 'i j weight' line per 1-tree edge (1-based)."""
    lines = []
    for i, j in tree.edges():
        lines.append(f"{i + 1} {j + 1} {inst.distance(i, j)}")
    return "\n".join(lines) + "\n"
