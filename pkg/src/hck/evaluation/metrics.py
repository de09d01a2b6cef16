"""Instance AP, part mIoU and label-set comparison."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..geometry.cloud import HUMAN, N_FINAL_PARTS
from ..instances import InstancePrediction, masks_from_labels


@dataclass(frozen=True)
class ApConfig:
    ap_thresholds: tuple[float, ...] = tuple(np.round(np.arange(0.50, 0.951, 0.05), 2))
    ap50: float = 0.50
    ap25: float = 0.25

    def __post_init__(self):
        th = np.asarray(self.ap_thresholds, dtype=np.float64)
        if len(th) == 0 or np.any(th <= 0) or np.any(th > 1) or np.any(np.diff(th) <= 0):
            raise ValueError("AP thresholds must be sorted and lie in (0, 1]")
        for t in (self.ap50, self.ap25):
            if not 0 < t <= 1:
                raise ValueError("thresholds must lie in (0, 1]")


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask length mismatch: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def iou_matrix(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """IoU between boolean masks (n_pred, P) and (n_gt, P)."""
    p = np.asarray(pred, dtype=np.float64).reshape(len(pred), -1)
    g = np.asarray(gt, dtype=np.float64).reshape(len(gt), -1)
    if p.shape[1] != g.shape[1] and len(p) and len(g):
        raise ValueError("mask length mismatch")
    inter = p @ g.T
    union = p.sum(1)[:, None] + g.sum(1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, inter / np.where(union > 0, union, 1), 1.0)


def _prepare(preds: Sequence[InstancePrediction], gts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gt = np.asarray([np.asarray(g, dtype=bool) for g in gts]).reshape(len(gts), -1)
    pm = np.asarray([p.binary() for p in preds]).reshape(len(preds), -1)
    conf = np.asarray([p.confidence for p in preds], dtype=np.float64)
    order = np.lexsort((np.arange(len(preds)), -conf))
    return pm[order], gt, conf[order]


def match_predictions(preds: Sequence[InstancePrediction], gts, iou_threshold: float) -> np.ndarray:
    """TP flag per prediction in ranked order (confidence descending, index ascending)."""
    pm, gt, _ = _prepare(preds, gts)
    if len(pm) == 0:
        return np.zeros(0, dtype=bool)
    if len(gt) == 0:
        return np.zeros(len(pm), dtype=bool)
    ious = iou_matrix(pm, gt)
    taken = np.zeros(len(gt), dtype=bool)
    tp = np.zeros(len(pm), dtype=bool)
    for i in range(len(pm)):
        cand = np.where(taken, -np.inf, ious[i])
        j = int(np.argmax(cand))
        if cand[j] >= iou_threshold:
            tp[i] = True
            taken[j] = True
    return tp


def pr_curve(tp: np.ndarray, n_gt: int) -> tuple[np.ndarray, np.ndarray]:
    ctp = np.cumsum(tp)
    ranks = np.arange(1, len(tp) + 1)
    return ctp / max(n_gt, 1), ctp / ranks


def _interpolated_area(recall: np.ndarray, precision: np.ndarray) -> float:
    r = np.concatenate([[0.0], recall, [recall[-1] if len(recall) else 0.0]])
    p = np.concatenate([[0.0], precision, [0.0]])
    p = np.maximum.accumulate(p[::-1])[::-1]
    idx = np.nonzero(r[1:] != r[:-1])[0]
    return float(np.sum((r[idx + 1] - r[idx]) * p[idx + 1]))


def average_precision(preds: Sequence[InstancePrediction], gts, iou_threshold: float) -> float:
    """Area under the all-point interpolated PR curve, in [0, 100].

    No gts and no predictions scores 100; anything else with an empty side
    scores 0.
    """
    if len(gts) == 0:
        return 100.0 if len(preds) == 0 else 0.0
    if len(preds) == 0:
        return 0.0
    tp = match_predictions(preds, gts, iou_threshold)
    recall, precision = pr_curve(tp, len(gts))
    return 100.0 * _interpolated_area(recall, precision)


def ap_suite(preds: Sequence[InstancePrediction], gts, cfg: ApConfig = ApConfig()) -> tuple[float, float, float]:
    vals = [average_precision(preds, gts, t) for t in cfg.ap_thresholds]
    # a rounded mean can land one ulp outside the range of its inputs
    ap = min(max(math.fsum(vals) / len(vals), min(vals)), max(vals))
    return ap, average_precision(preds, gts, cfg.ap50), average_precision(preds, gts, cfg.ap25)


def pr_curve_csv(preds: Sequence[InstancePrediction], gts, thresholds: Sequence[float]) -> str:
    """Rows (threshold, rank, confidence, tp, recall, precision)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iou_threshold", "rank", "confidence", "tp", "recall", "precision"])
    _, _, conf = _prepare(preds, gts)
    for t in thresholds:
        tp = match_predictions(preds, gts, t)
        recall, precision = pr_curve(tp, len(gts))
        for k in range(len(tp)):
            w.writerow([f"{t:.2f}", k + 1, repr(float(conf[k])), int(tp[k]),
                        repr(float(recall[k])), repr(float(precision[k]))])
    return buf.getvalue()


# --- parts ----------------------------------------------------------------------

def semantic_part_miou(pred: np.ndarray, gt: np.ndarray, taxonomy=None) -> tuple[dict[int, float], float]:
    """Per-part IoU for parts present in ``gt`` and their mean.

    Labels are final part ids with 0 as background. A part that appears only
    in the prediction is still reported (IoU 0) but does not enter the mean.
    """
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    if pred.shape != gt.shape:
        raise ValueError("label length mismatch")
    n_parts = len(taxonomy.final_parts) if taxonomy is not None else N_FINAL_PARTS
    for arr in (pred, gt):
        bad = (arr < 0) | (arr > n_parts)
        if bad.any():
            raise ValueError(f"unknown part label {int(arr[bad][0])}")
    present = sorted(set(np.unique(gt).tolist()) - {0})
    extra = sorted(set(np.unique(pred).tolist()) - {0} - set(present))
    per = {}
    for k in present + extra:
        per[k] = mask_iou(pred == k, gt == k)
    mean = float(np.mean([per[k] for k in present])) if present else float("nan")
    return dict(sorted(per.items())), mean


# --- label set comparison ---------------------------------------------------------

@dataclass
class EvalReport:
    ap: dict[int, float]
    ap50: dict[int, float]
    ap25: dict[int, float]
    part_iou: dict[int, float] = field(default_factory=dict)
    part_miou: Optional[float] = None
    scenes: list[dict] = field(default_factory=list)

    def __post_init__(self):
        for d in (self.ap, self.ap50, self.ap25):
            for v in d.values():
                if not 0.0 <= v <= 100.0:
                    raise ValueError("scores must lie in [0, 100]")

    def to_dict(self) -> dict:
        return {"ap": {str(k): v for k, v in self.ap.items()},
                "ap50": {str(k): v for k, v in self.ap50.items()},
                "ap25": {str(k): v for k, v in self.ap25.items()},
                "part_iou": {str(k): v for k, v in self.part_iou.items()},
                "part_miou": self.part_miou, "scenes": self.scenes}

    def table(self) -> str:
        lines = ["class      AP    AP50    AP25"]
        for c in self.ap:
            lines.append(f"{c:<5} {self.ap[c]:7.2f} {self.ap50[c]:7.2f} {self.ap25[c]:7.2f}")
        if self.part_iou:
            lines.append("part   IoU")
            lines += [f"{k:<5} {v:6.4f}" for k, v in self.part_iou.items()]
            lines.append(f"mIoU  {self.part_miou:6.4f}")
        return "\n".join(lines)


def _as_predictions(instance: np.ndarray) -> list[InstancePrediction]:
    return [InstancePrediction(m.astype(float), HUMAN, 1.0) for m in masks_from_labels(instance)]


def compare_label_sets(candidate_instance: np.ndarray, reference_instance: np.ndarray,
                       cfg: ApConfig = ApConfig(), candidate_part: Optional[np.ndarray] = None,
                       reference_part: Optional[np.ndarray] = None) -> EvalReport:
    """Score candidate instance labels (confidence 1) against reference labels.

    Inputs are per-point instance ids (0 = not a human) over the same points.
    Parts are scored too when both part arrays are given.
    """
    cand = np.asarray(candidate_instance)
    ref = np.asarray(reference_instance)
    if cand.shape != ref.shape:
        raise ValueError("label sets cover different points")
    ap, ap50, ap25 = ap_suite(_as_predictions(cand), masks_from_labels(ref), cfg)
    report = EvalReport({HUMAN: ap}, {HUMAN: ap50}, {HUMAN: ap25})
    if candidate_part is not None and reference_part is not None:
        report.part_iou, report.part_miou = semantic_part_miou(candidate_part, reference_part)
    return report


def merge_reports(per_scene: Sequence[tuple[int, EvalReport]]) -> EvalReport:
    """Average per-scene scores, ordered by scene id."""
    ordered = sorted(per_scene, key=lambda x: x[0])
    if not ordered:
        return EvalReport({}, {}, {})
    classes = sorted({c for _, r in ordered for c in r.ap})

    def avg(attr, c):
        return float(np.mean([getattr(r, attr)[c] for _, r in ordered if c in getattr(r, attr)]))

    out = EvalReport({c: avg("ap", c) for c in classes}, {c: avg("ap50", c) for c in classes},
                     {c: avg("ap25", c) for c in classes})
    out.scenes = [{"scene": s, **r.to_dict()} for s, r in ordered]
    return out
