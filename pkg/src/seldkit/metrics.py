"""Segment-based joint localization/detection scores.

Events are pooled into 1-second segments (10 label frames). Within each
(segment, class) cell, predicted and reference DoAs are paired by a
minimum-total-angle assignment; pairs under the 20 degree threshold are
location-dependent true positives, pairs at or beyond it count one FP and
one FN each (a substitution). The error rate ER is micro-averaged over
segments; F1, localization error LE, and localization recall LR aggregate
per class (macro by default, micro available). LE and LR ignore the 20
degree gate: they score every matched pair, which is what makes them
class-dependent rather than location-dependent.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .accdoa import decode, doa_to_unit_vector
from .errors import ZeroVector

SEGMENT_LABEL_FRAMES = 10
SPATIAL_THRESHOLD_DEG = 20.0

_EPS_NORM = 1e-9


@dataclass
class ClassCounts:
    """Per-class tallies accumulated over all segments."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_matched: int = 0
    n_refs: int = 0
    angle_sum: float = 0.0


@dataclass(frozen=True)
class SeldScores:
    """er is a ratio, f1/lr percentages, le degrees.

    er_undefined marks the degenerate case of zero reference events, where
    ER's denominator vanishes and 0.0 is reported by convention.
    """

    er: float
    f1: float
    le: float
    lr: float
    er_undefined: bool = False
    per_class: dict = field(default_factory=dict)


def angular_distance(v1, v2) -> float:
    """Great-circle angle between two direction vectors, in degrees."""
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < _EPS_NORM or nb < _EPS_NORM:
        raise ZeroVector("cannot measure an angle to a zero vector")
    cos = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
    return float(np.rad2deg(np.arccos(cos)))


def segment_events(events, segment_len: int = SEGMENT_LABEL_FRAMES) -> dict:
    """Group events into (segment, class) cells of deduplicated DoAs.

    Returns {(segment, class_id): sorted unique (azimuth, elevation)}; a
    source holding one direction across a whole segment contributes a
    single DoA to its cell.
    """
    cells = defaultdict(set)
    for ev in events:
        cells[(ev.frame // segment_len, ev.class_id)].add((ev.azimuth, ev.elevation))
    return {cell: sorted(doas) for cell, doas in cells.items()}


def match_cell(pred_doas, ref_doas) -> tuple:
    """Minimum-total-angle assignment between two DoA lists.

    Returns (pairs, n_unmatched_pred, n_unmatched_ref) where pairs is a
    list of (pred_index, ref_index, angle_degrees); min(P, R) pairs are
    always formed, however far apart they are.
    """
    if not pred_doas or not ref_doas:
        return [], len(pred_doas), len(ref_doas)
    cost = np.array(
        [
            [
                angular_distance(doa_to_unit_vector(*p), doa_to_unit_vector(*r))
                for r in ref_doas
            ]
            for p in pred_doas
        ]
    )
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(i), int(j), float(cost[i, j])) for i, j in zip(rows, cols)]
    return pairs, len(pred_doas) - len(pairs), len(ref_doas) - len(pairs)


def compute_seld_scores(preds, refs,
                        spatial_threshold: float = SPATIAL_THRESHOLD_DEG,
                        segment_len: int = SEGMENT_LABEL_FRAMES,
                        average: str = "macro") -> SeldScores:
    """Score predicted events against references.

    Empty references leave ER without a denominator: er is then 0.0 with
    er_undefined set. When both sides are empty every score is perfect by
    convention (0, 100, 0, 100).
    """
    if average not in ("macro", "micro"):
        raise ValueError(f"average must be 'macro' or 'micro', got {average!r}")
    pred_cells = segment_events(preds, segment_len)
    ref_cells = segment_events(refs, segment_len)

    per_class = defaultdict(ClassCounts)
    per_segment = defaultdict(lambda: [0, 0, 0])  # fp, fn, n_refs
    for cell in set(pred_cells) | set(ref_cells):
        segment, class_id = cell
        p = pred_cells.get(cell, [])
        r = ref_cells.get(cell, [])
        pairs, unmatched_p, unmatched_r = match_cell(p, r)
        tp = sum(1 for _, _, angle in pairs if angle < spatial_threshold)
        far = len(pairs) - tp
        counts = per_class[class_id]
        counts.tp += tp
        counts.fp += unmatched_p + far
        counts.fn += unmatched_r + far
        counts.n_matched += len(pairs)
        counts.n_refs += len(r)
        counts.angle_sum += sum(angle for _, _, angle in pairs)
        seg = per_segment[segment]
        seg[0] += unmatched_p + far
        seg[1] += unmatched_r + far
        seg[2] += len(r)

    errors = 0
    total_refs = 0
    for fp, fn, n_refs in per_segment.values():
        substitutions = min(fp, fn)
        errors += substitutions + (fn - substitutions) + (fp - substitutions)
        total_refs += n_refs
    er_undefined = total_refs == 0
    er = 0.0 if er_undefined else errors / total_refs

    f1 = _average_f1(per_class, average)
    le = _average_le(per_class, average, empty_inputs=not per_class)
    lr = _average_lr(per_class, average)
    return SeldScores(er, f1, le, lr, er_undefined, dict(per_class))


def threshold_sweep(accdoa_pred, refs, thresholds=(0.3, 0.5, 0.7),
                    **score_kwargs) -> list:
    """Decode a prediction tensor at each threshold and score it.

    Returns [(threshold, SeldScores)] in the given threshold order.
    """
    return [
        (thr, compute_seld_scores(decode(accdoa_pred, thr), refs, **score_kwargs))
        for thr in thresholds
    ]


def format_scores_line(scores: SeldScores) -> str:
    return (
        f"ER {scores.er:.2f} F1 {scores.f1:.1f} "
        f"LE {scores.le:.1f} LR {scores.lr:.1f}"
    )


def format_sweep_table(rows) -> str:
    """Aligned text table over (threshold, SeldScores) rows."""
    lines = [f"{'thr':>5} {'ER':>6} {'F1':>6} {'LE':>7} {'LR':>6}"]
    for thr, scores in rows:
        lines.append(
            f"{thr:>5.2f} {scores.er:>6.2f} {scores.f1:>6.1f} "
            f"{scores.le:>7.1f} {scores.lr:>6.1f}"
        )
    return "\n".join(lines)


def scores_to_csv(scores: SeldScores) -> str:
    """Flat metric,value rows; per-class rows keyed by class id."""
    lines = [
        "metric,value",
        f"er,{scores.er:.6f}",
        f"f1,{scores.f1:.6f}",
        f"le,{scores.le:.6f}",
        f"lr,{scores.lr:.6f}",
        f"er_undefined,{int(scores.er_undefined)}",
    ]
    for class_id in sorted(scores.per_class):
        c = scores.per_class[class_id]
        lines.append(
            f"class_{class_id},tp={c.tp};fp={c.fp};fn={c.fn};"
            f"matched={c.n_matched};refs={c.n_refs}"
        )
    return "\n".join(lines) + "\n"


def _average_f1(per_class, average: str) -> float:
    if average == "micro":
        tp = sum(c.tp for c in per_class.values())
        fp = sum(c.fp for c in per_class.values())
        fn = sum(c.fn for c in per_class.values())
        return 100.0 if 2 * tp + fp + fn == 0 else 200.0 * tp / (2 * tp + fp + fn)
    shares = [
        2.0 * c.tp / (2 * c.tp + c.fp + c.fn)
        for c in per_class.values()
        if c.tp + c.fp + c.fn > 0
    ]
    return 100.0 * float(np.mean(shares)) if shares else 100.0


def _average_le(per_class, average: str, empty_inputs: bool) -> float:
    if average == "micro":
        matched = sum(c.n_matched for c in per_class.values())
        if matched == 0:
            return 0.0 if empty_inputs else 180.0
        return sum(c.angle_sum for c in per_class.values()) / matched
    shares = [
        c.angle_sum / c.n_matched for c in per_class.values() if c.n_matched > 0
    ]
    if not shares:
        return 0.0 if empty_inputs else 180.0
    return float(np.mean(shares))


def _average_lr(per_class, average: str) -> float:
    if average == "micro":
        refs = sum(c.n_refs for c in per_class.values())
        if refs == 0:
            return 100.0
        return 100.0 * sum(c.n_matched for c in per_class.values()) / refs
    shares = [c.n_matched / c.n_refs for c in per_class.values() if c.n_refs > 0]
    return 100.0 * float(np.mean(shares)) if shares else 100.0