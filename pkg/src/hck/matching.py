"""Mask costs, Hungarian assignment and the two-stage human/part matcher."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry.cloud import N_FINAL_PARTS
from .instances import InstancePrediction

N_HUMAN_QUERIES = 5
N_PART_QUERIES = 16


@dataclass(frozen=True)
class MaskCostConfig:
    w_bce: float = 5.0
    w_dice: float = 2.0
    w_cls: float = 2.0
    eps: float = 1e-6

    def __post_init__(self):
        if min(self.w_bce, self.w_dice, self.w_cls) < 0:
            raise ValueError("cost weights must be >= 0")
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 0.5)")


def _check_lengths(p, g):
    if p.shape[1] != g.shape[1]:
        raise ValueError(f"mask length mismatch: {p.shape[1]} vs {g.shape[1]}")


def dice_cost(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """1 - (2 sum(p g) + 1) / (sum p + sum g + 1) for every (pred, gt) pair."""
    p = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    g = np.atleast_2d(np.asarray(gt, dtype=np.float64))
    _check_lengths(p, g)
    inter = p @ g.T
    return 1.0 - (2.0 * inter + 1.0) / (p.sum(1)[:, None] + g.sum(1)[None, :] + 1.0)


def bce_cost(pred: np.ndarray, gt: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Mean binary cross-entropy over points for every (pred, gt) pair."""
    p = np.clip(np.atleast_2d(np.asarray(pred, dtype=np.float64)), eps, 1.0 - eps)
    g = np.atleast_2d(np.asarray(gt, dtype=np.float64))
    _check_lengths(p, g)
    n = p.shape[1]
    if n == 0:
        return np.zeros((len(p), len(g)))
    return -(np.log(p) @ g.T + np.log1p(-p) @ (1.0 - g).T) / n


def mask_cost_matrix(pred: np.ndarray, gt: np.ndarray, cfg: MaskCostConfig = MaskCostConfig(),
                     class_probs: Optional[np.ndarray] = None,
                     gt_classes: Optional[Sequence[int]] = None) -> np.ndarray:
    """Weighted bce + dice, plus ``w_cls * (1 - prob of the gt class)`` when probabilities are given.

    ``class_probs`` is (n_pred, n_classes) indexed by class id - 1.
    """
    c = cfg.w_bce * bce_cost(pred, gt, cfg.eps) + cfg.w_dice * dice_cost(pred, gt)
    if class_probs is not None:
        if gt_classes is None:
            raise ValueError("class probabilities need gt classes")
        probs = np.atleast_2d(np.asarray(class_probs, dtype=np.float64))
        idx = np.asarray(gt_classes, dtype=np.int64) - 1
        if np.any(idx < 0) or np.any(idx >= probs.shape[1]):
            raise ValueError("gt class outside the probability table")
        c = c + cfg.w_cls * (1.0 - probs[:, idx])
    return c


# --- Hungarian ---------------------------------------------------------------------

def _sap(cost: np.ndarray) -> np.ndarray:
    """Shortest augmenting path on a square matrix; returns column of each row."""
    n = cost.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row matched to column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            upd = free & (cur < minv[1:])
            minv[1:][upd] = cur[upd]
            way[1:][upd] = j0
            cand = np.where(free, minv[1:], INF)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col = np.empty(n, dtype=np.int64)
    col[p[1:] - 1] = np.arange(n)
    return col


def _solve(cost: np.ndarray) -> tuple[np.ndarray, float]:
    r, c = cost.shape
    n = max(r, c)
    big = (np.abs(cost).max() if cost.size else 0.0) + 1.0
    sq = np.full((n, n), big)
    sq[:r, :c] = cost
    col = _sap(sq)
    return col[:r], float(sum(sq[i, col[i]] for i in range(r)))


def hungarian(cost: np.ndarray, lexicographic: bool = True) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost assignment of a rectangular matrix.

    Every row or every column (whichever is fewer) is matched. With
    ``lexicographic`` the optimal pairing whose (row -> col) sequence is
    lexicographically smallest is returned, so equal-cost alternatives resolve
    the same way every time.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be 2-D")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost must be finite")
    r, c = cost.shape
    if r == 0 or c == 0:
        return [], 0.0
    transposed = r > c
    m = cost.T if transposed else cost  # rows <= cols
    col, _ = _solve(m)
    if lexicographic:
        col = _lex_smallest(m, col)
    pairs = [(int(c_), i) for i, c_ in enumerate(col)] if transposed else [(i, int(c_)) for i, c_ in enumerate(col)]
    pairs.sort()
    total = 0.0
    for i, j in pairs:
        total += float(cost[i, j])
    return pairs, total


def _lex_smallest(m: np.ndarray, col: np.ndarray) -> np.ndarray:
    opt = sum(m[i, col[i]] for i in range(len(col)))
    tol = 1e-12 * max(1.0, abs(opt))
    fixed: list[tuple[int, int]] = []
    used = set()
    for i in range(len(m)):
        for j in range(m.shape[1]):
            if j in used:
                continue
            rows = [k for k in range(i + 1, len(m))]
            cols = [k for k in range(m.shape[1]) if k not in used and k != j]
            val = sum(m[a, b] for a, b in fixed) + m[i, j]
            if rows:
                sub = m[np.ix_(rows, cols)]
                sc, _ = _solve(sub)
                val += sum(sub[k, sc[k]] for k in range(len(rows)))
            if val <= opt + tol:
                fixed.append((i, j))
                used.add(j)
                break
        else:  # numerical fallback: keep the solver's choice
            fixed.append((i, int(col[i])))
            used.add(int(col[i]))
    return np.array([j for _, j in fixed], dtype=np.int64)


# --- two-stage matcher -----------------------------------------------------------

@dataclass
class QueryBundle:
    """N human predictions, each owning K part predictions.

    Part predictions may carry ``class_probs`` over the 15 final parts
    (indexed by part id - 1); either all of them do or none.
    """

    human_preds: list[InstancePrediction]
    part_preds: list[list[InstancePrediction]]

    def __post_init__(self):
        if len(self.part_preds) != len(self.human_preds):
            raise ValueError("every human query needs its own group of part queries")
        sizes = {len(g) for g in self.part_preds}
        if len(sizes) > 1:
            raise ValueError("every human query must own the same number of part queries")
        lengths = {len(p.mask) for p in self.human_preds} | {len(p.mask) for g in self.part_preds for p in g}
        if len(lengths) > 1:
            raise ValueError("all masks must cover the same points")
        has = {p.class_probs is not None for g in self.part_preds for p in g}
        if len(has) > 1:
            raise ValueError("class probabilities must be given for all part queries or none")
        for g in self.part_preds:
            for p in g:
                if p.class_probs is not None and len(p.class_probs) != N_FINAL_PARTS:
                    raise ValueError(f"part class distribution must have {N_FINAL_PARTS} entries")

    @classmethod
    def from_arrays(cls, human_masks, part_masks, part_probs=None) -> "QueryBundle":
        """``human_masks`` (N, P), ``part_masks`` (N, K, P), ``part_probs`` (N, K, 15) or None."""
        hm = np.asarray(human_masks, dtype=np.float64)
        pm = np.asarray(part_masks, dtype=np.float64)
        if pm.ndim != 3 or pm.shape[0] != hm.shape[0]:
            raise ValueError("part masks must be (n_humans, n_parts, n_points)")
        humans = [InstancePrediction(m) for m in hm]
        parts = [[InstancePrediction(pm[h, k], class_probs=None if part_probs is None else part_probs[h][k])
                  for k in range(pm.shape[1])] for h in range(pm.shape[0])]
        return cls(humans, parts)

    @property
    def n_humans(self) -> int:
        return len(self.human_preds)

    @property
    def n_parts(self) -> int:
        return len(self.part_preds[0]) if self.part_preds else 0

    def human_masks(self) -> np.ndarray:
        return np.stack([p.mask for p in self.human_preds])

    def part_masks(self, h: int) -> np.ndarray:
        return np.stack([p.mask for p in self.part_preds[h]])

    def part_probs(self, h: int) -> Optional[np.ndarray]:
        if not self.part_preds[h] or self.part_preds[h][0].class_probs is None:
            return None
        return np.stack([p.class_probs for p in self.part_preds[h]])


@dataclass
class GroundTruthHuman:
    mask: np.ndarray
    part_masks: np.ndarray  # (M, P)
    part_ids: np.ndarray    # (M,) final ids 1..15

    @classmethod
    def from_labels(cls, instance: np.ndarray, part: np.ndarray, instance_id: int) -> "GroundTruthHuman":
        m = np.asarray(instance) == instance_id
        ids = np.unique(np.asarray(part)[m])
        ids = ids[ids > 0]
        pm = np.stack([m & (part == k) for k in ids]) if len(ids) else np.zeros((0, len(m)))
        return cls(m.astype(float), pm.astype(float), ids.astype(np.int64))


@dataclass
class TwoStageAssignment:
    humans: list[tuple[int, int]]                      # (query, gt)
    parts: dict[int, list[tuple[int, int]]]            # gt human -> [(part query, gt part)]
    human_cost: float
    part_cost: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"human_pairs": [list(p) for p in self.humans],
                "part_pairs": {str(g): [list(p) for p in pp] for g, pp in sorted(self.parts.items())},
                "human_cost": self.human_cost, "part_cost": self.part_cost, "config": self.config}


def two_stage_match(queries: QueryBundle, gts: Sequence[GroundTruthHuman],
                    cfg: MaskCostConfig = MaskCostConfig()) -> TwoStageAssignment:
    """Match human queries to gt humans, then part queries within each matched pair only."""
    if not gts or queries.n_humans == 0:
        return TwoStageAssignment([], {}, 0.0, 0.0, asdict(cfg))
    gt_masks = np.stack([g.mask for g in gts])
    h_pairs, h_cost = hungarian(mask_cost_matrix(queries.human_masks(), gt_masks, cfg))
    parts: dict[int, list[tuple[int, int]]] = {}
    p_cost = 0.0
    for q, g in h_pairs:
        gt = gts[g]
        if len(gt.part_ids) == 0:
            parts[g] = []
            continue
        if queries.n_parts == 0:
            parts[g] = []
            continue
        probs = queries.part_probs(q)
        c = mask_cost_matrix(queries.part_masks(q), gt.part_masks, cfg, probs,
                             gt.part_ids if probs is not None else None)
        pp, pc = hungarian(c)
        parts[g] = pp
        p_cost += pc
    return TwoStageAssignment(h_pairs, parts, h_cost, p_cost, asdict(cfg))


def attention_scope_mask(human_masks, threshold: float = 0.5) -> list[np.ndarray]:
    """Points each human query's part queries may attend to.

    A point is in scope when the human mask reaches ``threshold``; an empty
    scope falls back to every point.
    """
    out = []
    for m in human_masks:
        m = m.mask if isinstance(m, InstancePrediction) else np.asarray(m, dtype=np.float64)
        keep = np.nonzero(m >= threshold)[0]
        out.append(keep if len(keep) else np.arange(len(m)))
    return out
