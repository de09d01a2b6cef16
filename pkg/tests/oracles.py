"""Independent reference implementations used only by the tests.

Each one takes a different route from the package code: explicit loops,
exhaustive enumeration or plain formulas instead of the optimized paths.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


# --- geometry ------------------------------------------------------------------

def _seg_dist(p, a, b):
    ab = b - a
    L = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(L > 0, L, 1.0), 0.0, 1.0)
    q = a + t[:, None] * ab
    return np.linalg.norm(p - q, axis=1)


def point_triangle_distances(p, tris):
    """Distance from one point to every triangle: plane projection if inside, else nearest edge."""
    p = np.asarray(p, dtype=np.float64)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.linalg.norm(n, axis=1)
    n = n / nn[:, None]
    h = np.einsum("ij,ij->i", p - a, n)
    q = p - h[:, None] * n
    # barycentric sign test via sub-triangle normals
    s1 = np.einsum("ij,ij->i", np.cross(b - a, q - a), n)
    s2 = np.einsum("ij,ij->i", np.cross(c - b, q - b), n)
    s3 = np.einsum("ij,ij->i", np.cross(a - c, q - c), n)
    inside = (s1 >= 0) & (s2 >= 0) & (s3 >= 0)
    P = np.broadcast_to(p, a.shape)
    edge = np.minimum(np.minimum(_seg_dist(P, a, b), _seg_dist(P, b, c)), _seg_dist(P, c, a))
    return np.where(inside, np.abs(h), edge)


def nearest_face(p, tris):
    d = point_triangle_distances(p, tris)
    return float(d.min()), int(np.argmin(d))


# --- HDBSCAN -------------------------------------------------------------------

def brute_core(points, k):
    d = np.linalg.norm(points[:, None] - points[None], axis=-1)
    return np.sort(d, axis=1)[:, k - 1]


def brute_mst_weight(mr):
    """Prim with explicit loops over a dense matrix."""
    n = len(mr)
    seen = [False] * n
    seen[0] = True
    best = list(mr[0])
    total = 0.0
    for _ in range(n - 1):
        j = min((i for i in range(n) if not seen[i]), key=lambda i: best[i])
        total += best[j]
        seen[j] = True
        for i in range(n):
            if not seen[i] and mr[j][i] < best[i]:
                best[i] = mr[j][i]
    return total


def reference_hdbscan_from_mst(edges, n, min_cluster_size):
    """Condensed tree built top-down by deleting MST edges level by level.

    Returns per-point labels after excess-of-mass selection (root excluded),
    with cluster ids in first-appearance order of the points.
    """
    edges = np.asarray(edges, dtype=np.float64)
    w = edges[:, 2]
    levels = np.unique(w)[::-1]

    def components(members, max_w):
        members = np.asarray(members)
        pos = {m: i for i, m in enumerate(members)}
        keep = [(pos[int(a)], pos[int(b)]) for a, b, ww in edges
                if ww < max_w and int(a) in pos and int(b) in pos]
        k = len(members)
        if keep:
            r, c = zip(*keep)
            g = coo_matrix((np.ones(len(r)), (r, c)), shape=(k, k))
        else:
            g = coo_matrix((k, k))
        _, lab = connected_components(g, directed=False)
        return [members[lab == x] for x in range(lab.max() + 1)]

    clusters = {0: {"parent": None, "birth": 0.0, "points": {}, "kids": []}}
    # work items: (cluster id, current member points, index into levels)
    stack = [(0, np.arange(n), 0)]
    next_id = 1
    while stack:
        cid, members, li = stack.pop()
        while li < len(levels) and len(members) > 0:
            dist = levels[li]
            lam = 1.0 / max(dist, 1e-12)
            parts = components(members, dist)
            li += 1
            if len(parts) == 1:
                continue
            big = [p for p in parts if len(p) >= min_cluster_size]
            small = [p for p in parts if len(p) < min_cluster_size]
            for p in small:
                for x in p:
                    clusters[cid]["points"][int(x)] = lam
            if len(big) >= 2:
                for p in big:
                    clusters[next_id] = {"parent": cid, "birth": lam, "points": {}, "kids": []}
                    clusters[cid]["kids"].append(next_id)
                    stack.append((next_id, p, li))
                    for x in p:
                        pass
                    next_id += 1
                members = np.array([], dtype=int)
            elif len(big) == 1:
                members = big[0]
            else:
                members = np.array([], dtype=int)
        # single points that never split off leave at their last merge; handled by levels exhausting
        for x in members:
            clusters[cid]["points"].setdefault(int(x), np.inf)

    def stability(c):
        cl = clusters[c]
        s = sum(l - cl["birth"] for l in cl["points"].values())
        for k in cl["kids"]:
            s += (clusters[k]["birth"] - cl["birth"]) * _size(k)
        return s

    def _size(c):
        cl = clusters[c]
        return len(cl["points"]) + sum(_size(k) for k in cl["kids"])

    def select(c):
        kids = clusters[c]["kids"]
        sub = [x for k in kids for x in select(k)]
        sub_stab = sum(best_stab[k] for k in kids)
        own = stability(c)
        if c != 0 and own >= sub_stab:
            best_stab[c] = own
            return [c]
        best_stab[c] = sub_stab
        return sub

    best_stab = {}
    chosen = select(0) if clusters[0]["kids"] else []

    def all_points(c):
        pts = list(clusters[c]["points"])
        for k in clusters[c]["kids"]:
            pts += all_points(k)
        return pts

    labels = np.full(n, -1)
    for i, c in enumerate(chosen):
        labels[all_points(c)] = i
    return canonical(labels)


def canonical(labels):
    """Rename cluster ids in order of first appearance; noise stays -1."""
    labels = np.asarray(labels)
    out = np.full(len(labels), -1)
    mapping = {}
    for i, l in enumerate(labels):
        if l < 0:
            continue
        if l not in mapping:
            mapping[l] = len(mapping)
        out[i] = mapping[l]
    return out


# --- assignment ---------------------------------------------------------------

def brute_assignment(cost):
    """Minimum total over all injective assignments; returns (total, pairs)."""
    cost = np.asarray(cost, dtype=np.float64)
    r, c = cost.shape
    best = (np.inf, None)
    if r <= c:
        for perm in itertools.permutations(range(c), r):
            t = sum(cost[i, perm[i]] for i in range(r))
            if t < best[0]:
                best = (t, [(i, perm[i]) for i in range(r)])
    else:
        for perm in itertools.permutations(range(r), c):
            t = sum(cost[perm[j], j] for j in range(c))
            if t < best[0]:
                best = (t, sorted((perm[j], j) for j in range(c)))
    return best


def all_assignments(r, c):
    if r <= c:
        for perm in itertools.permutations(range(c), r):
            yield [(i, perm[i]) for i in range(r)]
    else:
        for perm in itertools.permutations(range(r), c):
            yield sorted((perm[j], j) for j in range(c))


# --- AP ------------------------------------------------------------------------

def brute_ap(pred_masks, confidences, gt_masks, thr):
    """Explicit PR table: rank, greedy match, then sum over recall steps of the best later precision."""
    n_gt = len(gt_masks)
    if n_gt == 0:
        return 100.0 if len(pred_masks) == 0 else 0.0
    if len(pred_masks) == 0:
        return 0.0
    order = sorted(range(len(pred_masks)), key=lambda i: (-confidences[i], i))
    used = set()
    table = []
    tp_count = 0
    for k, i in enumerate(order, 1):
        best_j, best_iou = None, -1.0
        for j in range(n_gt):
            if j in used:
                continue
            a, b = pred_masks[i], gt_masks[j]
            u = np.sum(a | b)
            iou = 1.0 if u == 0 else np.sum(a & b) / u
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j is not None and best_iou >= thr:
            used.add(best_j)
            tp_count += 1
        table.append((tp_count / n_gt, tp_count / k))
    ap = 0.0
    prev_r = 0.0
    for k, (rec, _) in enumerate(table):
        if rec > prev_r:
            ap += (rec - prev_r) * max(p for _, p in table[k:])
            prev_r = rec
    return 100.0 * ap


# --- hierarchical matching -------------------------------------------------------

def _naive_cost(p, g, w_bce, w_dice, eps):
    n = len(p)
    bce = 0.0
    for a, b in zip(p, g):
        a = min(max(a, eps), 1 - eps)
        bce -= b * np.log(a) + (1 - b) * np.log(1 - a)
    bce = bce / n if n else 0.0
    dice = 1 - (2 * sum(a * b for a, b in zip(p, g)) + 1) / (sum(p) + sum(g) + 1)
    return w_bce * bce + w_dice * dice


def naive_cost_matrix(preds, gts, w_bce=5.0, w_dice=2.0, w_cls=2.0, eps=1e-6, probs=None, classes=None):
    out = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            out[i, j] = _naive_cost(list(p), list(g), w_bce, w_dice, eps)
            if probs is not None:
                out[i, j] += w_cls * (1 - probs[i][classes[j] - 1])
    return out


def brute_two_stage(human_masks, part_masks, gt_humans, gt_parts, gt_part_ids, probs=None):
    """Enumerate every stage-1 assignment, keep the cheapest, then enumerate parts per matched pair."""
    hc = naive_cost_matrix(human_masks, gt_humans)
    best = None
    for pairs in all_assignments(len(human_masks), len(gt_humans)):
        t = sum(hc[i, j] for i, j in pairs)
        if best is None or t < best[0]:
            best = (t, pairs)
    h_total, h_pairs = best
    parts = {}
    p_total = 0.0
    for q, g in h_pairs:
        if len(gt_parts[g]) == 0 or len(part_masks[q]) == 0:
            parts[g] = []
            continue
        pc = naive_cost_matrix(part_masks[q], gt_parts[g],
                               probs=None if probs is None else probs[q], classes=gt_part_ids[g])
        pb = None
        for pp in all_assignments(len(part_masks[q]), len(gt_parts[g])):
            t = sum(pc[i, j] for i, j in pp)
            if pb is None or t < pb[0]:
                pb = (t, pp)
        parts[g] = pb[1]
        p_total += pb[0]
    return sorted(h_pairs), parts, h_total, p_total
