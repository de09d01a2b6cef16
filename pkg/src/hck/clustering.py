"""HDBSCAN over 3D points, written out step by step.

core distance -> mutual reachability -> minimum spanning tree -> single-linkage
hierarchy -> condensed tree -> excess-of-mass selection -> labels.

The core distance counts the point itself, so ``min_samples = 1`` gives 0 and
fewer than ``min_samples`` points leaves every point as noise. Edge weights
are snapped to a 1e-12 grid so numerically equal distances tie exactly, and
all edges of equal weight are merged in one step; the resulting hierarchy
depends only on the graph, not on point order or MST tie-breaks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .geometry.cloud import HUMAN, LabeledPointCloud
from .instances import InstancePrediction

DENSE_LIMIT = 5_000
SNAP = 1e12
MIN_DIST = 1e-12
NOISE = -1


@dataclass(frozen=True)
class HdbscanParams:
    min_samples: int = 1200
    min_cluster_size: int = 1500

    def __post_init__(self):
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")


@dataclass
class ClusterResult:
    labels: np.ndarray
    n_clusters: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels):
            bad = (self.labels != NOISE) & ((self.labels < 0) | (self.labels >= self.n_clusters))
            if bad.any():
                raise ValueError("cluster label out of range")


def snap(x):
    return np.floor(np.asarray(x) * SNAP + 0.5) / SNAP


@njit(cache=True, inline="always")
def _snap1(x):
    return np.floor(x * SNAP + 0.5) / SNAP


def core_distances(points: np.ndarray, min_samples: int, chunk: int = 4096) -> np.ndarray:
    """Distance to the ``min_samples``-th nearest neighbour, the point itself included."""
    pts = np.asarray(points, dtype=np.float64)
    if min_samples == 1:
        return np.zeros(len(pts))
    tree = cKDTree(pts)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        d, _ = tree.query(pts[s:s + chunk], k=[min_samples])
        out[s:s + chunk] = d[:, 0]
    return snap(out)


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    sq = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
    return snap(np.sqrt(sq))


def mutual_reachability(points: np.ndarray, core: np.ndarray) -> np.ndarray:
    """Dense matrix of max(core[a], core[b], |a - b|)."""
    d = pairwise_distances(np.asarray(points, dtype=np.float64))
    mr = np.maximum(d, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def _prim_dense(mr: np.ndarray) -> np.ndarray:
    n = len(mr)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1)
    edges = np.empty((max(n - 1, 0), 3))
    cur = 0
    in_tree[0] = True
    for k in range(n - 1):
        row = mr[cur]
        upd = ~in_tree & (row < best)
        best[upd] = row[upd]
        parent[upd] = cur
        cand = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(cand))
        edges[k] = (parent[nxt], nxt, best[nxt])
        in_tree[nxt] = True
        cur = nxt
    return edges


@njit(cache=True)
def _prim_implicit(points, core):
    n = points.shape[0]
    in_tree = np.zeros(n, dtype=np.bool_)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    edges = np.empty((max(n - 1, 0), 3))
    cur = 0
    in_tree[0] = True
    for k in range(n - 1):
        px, py, pz = points[cur, 0], points[cur, 1], points[cur, 2]
        cc = core[cur]
        nxt = -1
        nxt_w = np.inf
        for j in range(n):
            if in_tree[j]:
                continue
            dx = px - points[j, 0]
            dy = py - points[j, 1]
            dz = pz - points[j, 2]
            d = _snap1(np.sqrt(dx * dx + dy * dy + dz * dz))
            w = max(d, max(cc, core[j]))
            if w < best[j]:
                best[j] = w
                parent[j] = cur
            if best[j] < nxt_w:
                nxt_w = best[j]
                nxt = j
        edges[k, 0] = parent[nxt]
        edges[k, 1] = nxt
        edges[k, 2] = nxt_w
        in_tree[nxt] = True
        cur = nxt
    return edges


def minimum_spanning_tree(points: np.ndarray, core: np.ndarray, dense: Optional[bool] = None) -> np.ndarray:
    """MST of the mutual-reachability graph as (n-1, 3) rows (a, b, weight).

    Explicit-matrix Prim up to ``DENSE_LIMIT`` points, otherwise Prim with
    weights computed on the fly (O(n) memory, O(n^2) time). Both pick the
    lowest-index vertex among equal candidates and give identical trees.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if dense is None:
        dense = len(pts) <= DENSE_LIMIT
    if len(pts) < 2:
        return np.empty((0, 3))
    if dense:
        return _prim_dense(mutual_reachability(pts, core))
    return _prim_implicit(pts, np.ascontiguousarray(core, dtype=np.float64))


# --- hierarchy ---------------------------------------------------------------------

@dataclass
class CondensedTree:
    """Rows (parent cluster, child, lambda, child size).

    Clusters are numbered from ``n`` (the root) upwards; children below ``n``
    are points falling out of their parent at that lambda.
    """

    parent: np.ndarray
    child: np.ndarray
    lam: np.ndarray
    size: np.ndarray
    n_points: int

    @property
    def root(self) -> int:
        return self.n_points


def _find(uf: np.ndarray, x: int) -> int:
    r = x
    while uf[r] != r:
        r = uf[r]
    while uf[x] != r:
        uf[x], x = r, uf[x]
    return r


def merge_levels(edges: np.ndarray, n: int) -> tuple[list[list[int]], np.ndarray, np.ndarray]:
    """k-ary single-linkage hierarchy.

    Returns children lists, merge distances and sizes for internal nodes
    ``n .. n + m - 1``; all edges of equal weight merge in one node.
    """
    order = np.lexsort((np.maximum(edges[:, 0], edges[:, 1]),
                        np.minimum(edges[:, 0], edges[:, 1]), edges[:, 2])) if len(edges) else []
    uf = np.arange(2 * n)
    node_of = np.arange(n)  # union-find root -> hierarchy node
    size = [1] * n
    children: list[list[int]] = [[] for _ in range(n)]
    dist = [0.0] * n
    i = 0
    m = len(order)
    while i < m:
        w = edges[order[i], 2]
        j = i
        while j < m and edges[order[j], 2] == w:
            j += 1
        groups: dict[int, set[int]] = {}
        for e in order[i:j]:
            a, b = int(edges[e, 0]), int(edges[e, 1])
            ra, rb = _find(uf, a), _find(uf, b)
            if ra == rb:
                continue
            grp = groups.pop(ra, {ra}) | groups.pop(rb, {rb})
            uf[rb] = ra
            groups[ra] = grp
        for root, members in sorted(groups.items()):
            node = len(children)
            kids = sorted(int(node_of[r]) for r in members)
            children.append(kids)
            dist.append(float(w))
            size.append(sum(size[k] for k in kids))
            node_of[_find(uf, root)] = node
        i = j
    return children, np.asarray(dist), np.asarray(size)


def condense_tree(edges: np.ndarray, n: int, min_cluster_size: int) -> CondensedTree:
    children, dist, size = merge_levels(edges, n)
    rows = []
    if len(children) == n:  # no merges at all
        return CondensedTree(*(np.empty(0, dtype=t) for t in (np.int64, np.int64, float, np.int64)), n)
    # roots of the forest; a disconnected forest is joined under one infinite-distance node
    is_child = np.zeros(len(children), dtype=bool)
    for kids in children[n:]:
        is_child[kids] = True
    tops = [k for k in range(len(children)) if not is_child[k]]
    if len(tops) > 1:
        children.append(sorted(tops))
        dist = np.append(dist, np.inf)
        size = np.append(size, sum(size[t] for t in tops))
    top = len(children) - 1

    def leaves(node):
        stack, out = [node], []
        while stack:
            x = stack.pop()
            if x < n:
                out.append(x)
            else:
                stack.extend(children[x])
        return out

    next_label = n + 1
    stack = [(top, n)]  # (hierarchy node, cluster label it belongs to)
    while stack:
        node, cl = stack.pop()
        if node < n:
            continue
        lam = 1.0 / max(dist[node], MIN_DIST) if np.isfinite(dist[node]) else 0.0
        kids = children[node]
        big = [k for k in kids if size[k] >= min_cluster_size]
        small = [k for k in kids if size[k] < min_cluster_size]
        for k in small:
            for p in leaves(k):
                rows.append((cl, p, lam, 1))
        if len(big) >= 2:
            for k in big:
                rows.append((cl, next_label, lam, int(size[k])))
                stack.append((k, next_label))
                next_label += 1
        elif len(big) == 1:
            stack.append((big[0], cl))
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 4)
    return CondensedTree(arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2],
                         arr[:, 3].astype(np.int64), n)


def stabilities(tree: CondensedTree) -> dict[int, float]:
    birth = {tree.root: 0.0}
    for c, lam, s in zip(tree.child, tree.lam, tree.size):
        if s > 1 or c >= tree.n_points:
            birth[int(c)] = lam
    stab = {c: 0.0 for c in birth}
    for p, lam, s in zip(tree.parent, tree.lam, tree.size):
        stab[int(p)] += (lam - birth[int(p)]) * s
    return stab


def select_eom(tree: CondensedTree) -> list[int]:
    """Excess-of-mass selection; the root is never selected."""
    stab = stabilities(tree)
    kids: dict[int, list[int]] = {c: [] for c in stab}
    for p, c in zip(tree.parent, tree.child):
        if c >= tree.n_points:
            kids[int(p)].append(int(c))
    chosen = {c: True for c in stab if c != tree.root}
    # children carry larger labels than their parents, so descending order is bottom-up
    for c in sorted(chosen, reverse=True):
        sub = sum(stab[k] for k in kids[c])
        if sub > stab[c]:
            chosen[c] = False
            stab[c] = sub
        else:
            todo = list(kids[c])
            while todo:
                x = todo.pop()
                chosen[x] = False
                todo.extend(kids[x])
    return sorted(c for c, on in chosen.items() if on)


def label_points(tree: CondensedTree, selected: list[int]) -> np.ndarray:
    n = tree.n_points
    parent_of = {int(c): int(p) for p, c in zip(tree.parent, tree.child) if c >= n}
    sel_index = {c: i for i, c in enumerate(selected)}

    def owner(cl):
        while cl != tree.root:
            if cl in sel_index:
                return sel_index[cl]
            cl = parent_of[cl]
        return NOISE

    cluster_owner = {c: owner(c) for c in set(parent_of) | {tree.root}}
    labels = np.full(n, NOISE, dtype=np.int64)
    pts = tree.child < n
    labels[tree.child[pts]] = [cluster_owner[int(p)] for p in tree.parent[pts]]
    return labels


def hdbscan(points: np.ndarray, params: HdbscanParams = HdbscanParams()) -> ClusterResult:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    meta = asdict(params) | {"n_points": len(pts), "cluster_selection": "eom"}
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    n = len(pts)
    if n < params.min_samples or n < 2:
        return ClusterResult(np.full(n, NOISE, dtype=np.int64), 0, meta)
    core = core_distances(pts, params.min_samples)
    edges = minimum_spanning_tree(pts, core)
    tree = condense_tree(edges, n, params.min_cluster_size)
    if len(tree.parent) == 0:
        return ClusterResult(np.full(n, NOISE, dtype=np.int64), 0, meta)
    selected = select_eom(tree)
    return ClusterResult(label_points(tree, selected), len(selected), meta)


def semantic_to_instances(cloud: LabeledPointCloud, semantic_mask: np.ndarray,
                          params: HdbscanParams = HdbscanParams(), label: int = HUMAN
                          ) -> list[InstancePrediction]:
    """Cluster the masked points; every cluster becomes an instance with confidence 1."""
    sem = np.asarray(semantic_mask, dtype=bool)
    if len(sem) != len(cloud):
        raise ValueError("semantic mask length does not match the cloud")
    idx = np.nonzero(sem)[0]
    if len(idx) == 0:
        return []
    res = hdbscan(cloud.positions[idx], params)
    out = []
    for k in range(res.n_clusters):
        m = np.zeros(len(cloud))
        m[idx[res.labels == k]] = 1.0
        out.append(InstancePrediction(m, label, 1.0))
    return out
