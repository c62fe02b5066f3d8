"""Segmentation and affinity-quality evaluation.

mIoU follows the usual convention: confusion counts over non-ignored
pixels, per-class IoU, mean over classes present in ground truth or
prediction (classes absent from both are skipped). Affinity accuracy
buckets every valid entry by its pixel's ground-truth neighbor category
and reports the fraction predicted correctly at threshold 0.5; all pixels
are pooled before dividing (micro average). A prediction counts as
positive only when strictly greater than 0.5, so ties are negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity_core import AffinityField, RateSet, UNCOUNTED
from .tensor_io import IGNORE_VALUE, LabelMap


def _as_label_array(x) -> tuple[np.ndarray, int | None]:
    if isinstance(x, LabelMap):
        return x.data, x.ignore_value
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValueError("label array must be 2-D")
    return arr, None


def confusion_matrix(pred, gt, num_classes: int,
                     ignore_value: int | None = None) -> np.ndarray:
    """C x C counts, rows = ground truth, cols = prediction.

    Pixels whose ground-truth label equals the ignore value are excluded.
    """
    pred_arr, _ = _as_label_array(pred)
    gt_arr, gt_ignore = _as_label_array(gt)
    if pred_arr.shape != gt_arr.shape:
        raise ValueError(f"shape mismatch: pred {pred_arr.shape} "
                         f"vs gt {gt_arr.shape}")
    if ignore_value is None:
        ignore_value = gt_ignore if gt_ignore is not None else IGNORE_VALUE
    keep = gt_arr != ignore_value
    g = gt_arr[keep].astype(np.int64)
    p = pred_arr[keep].astype(np.int64)
    observed = -1
    if g.size:
        observed = max(int(g.max()), int(p.max()))
    if observed >= num_classes:
        raise ValueError(f"num_classes={num_classes} too small for "
                         f"observed class {observed}")
    counts = np.bincount(g * num_classes + p, minlength=num_classes ** 2)
    return counts.reshape(num_classes, num_classes)


def miou(pred, gt, num_classes: int, ignore_value: int | None = None) -> float:
    """Mean intersection-over-union over classes present in GT or prediction."""
    cm = confusion_matrix(pred, gt, num_classes, ignore_value)
    inter = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - np.diag(cm)
    present = union > 0
    if not present.any():
        raise ValueError("no evaluated pixels: every pixel is ignored")
    return float(np.mean(inter[present] / union[present]))


@dataclass(frozen=True)
class AccuracyRow:
    rate: tuple[int, int]
    category: int
    total: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total


@dataclass(frozen=True)
class AffinityAccuracyTable:
    rows: tuple[AccuracyRow, ...]

    def aggregate(self) -> float:
        """Pooled accuracy over every counted entry."""
        total = sum(r.total for r in self.rows)
        correct = sum(r.correct for r in self.rows)
        if total == 0:
            raise ValueError("empty accuracy table")
        return correct / total

    def to_csv(self) -> str:
        lines = ["rate_h,rate_w,category,total,correct,accuracy"]
        for r in self.rows:
            lines.append(f"{r.rate[0]},{r.rate[1]},{r.category},"
                         f"{r.total},{r.correct},{r.accuracy!r}")
        return "\n".join(lines) + "\n"


def affinity_accuracy(
    pred: AffinityField,
    gt: AffinityField,
    categories: np.ndarray,
    rates: RateSet,
) -> AffinityAccuracyTable:
    """Per-rate, per-category accuracy of thresholded affinity predictions.

    ``categories`` is the [n_rates, H, W] ground-truth category array
    (UNCOUNTED entries contribute nothing); empty groups are omitted from
    the table rather than reported as zero.
    """
    if pred.values.shape != gt.values.shape:
        raise ValueError(f"shape mismatch: pred {pred.values.shape} "
                         f"vs gt {gt.values.shape}")
    if categories.shape != (gt.n_rates,) + gt.values.shape[1:]:
        raise ValueError("categories must be [n_rates, H, W]")
    if len(rates) != gt.n_rates:
        raise ValueError("rate set does not match field channel count")
    rows: list[AccuracyRow] = []
    pred_pos = pred.values > 0.5
    gt_pos = gt.values > 0.5
    hit = pred_pos == gt_pos
    for k, rate in enumerate(rates):
        block = slice(8 * k, 8 * k + 8)
        for cat in range(9):
            sel = gt.valid[block] & (categories[k] == cat)[None, :, :]
            total = int(np.count_nonzero(sel))
            if total == 0:
                continue
            correct = int(np.count_nonzero(hit[block] & sel))
            rows.append(AccuracyRow(rate=rate, category=cat,
                                    total=total, correct=correct))
    return AffinityAccuracyTable(rows=tuple(rows))
