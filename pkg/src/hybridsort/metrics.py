"""CLEAR-MOT (MOTA, FP, FN, IDSW) and identity (IDF1) scores.

Per-frame matching is optimal under cost ``1 - IoU`` with pairs below the IoU
threshold forbidden. Before solving, every ground-truth object keeps the
hypothesis id it was last matched to if that id is present in the frame and
still overlaps enough (the usual CLEAR continuity rule). An identity switch
is counted whenever an object is matched to an id other than the last id it
was matched to.

IDF1 uses one global bipartite matching between ground-truth and predicted
identities maximising the number of frames where the pair overlaps at or
above the threshold.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .assignment import solve
from .geometry import iou_matrix


@dataclass
class EvalReport:
    mota: float
    idf1: float
    fp: int
    fn: int
    idsw: int
    gt: int
    matches: int
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0
    per_sequence: dict[str, "EvalReport"] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "MOTA": self.mota,
            "IDF1": self.idf1,
            "FP": self.fp,
            "FN": self.fn,
            "IDSW": self.idsw,
            "GT": self.gt,
            "matches": self.matches,
            "IDTP": self.idtp,
            "IDFP": self.idfp,
            "IDFN": self.idfn,
        }


class FrameMismatchError(ValueError):
    pass


def _by_frame(rows: Iterable) -> dict[int, list[tuple[int, np.ndarray]]]:
    """rows of (frame, id, box) -> {frame: [(id, [x1, y1, x2, y2]), ...]}"""
    out: dict[int, list] = defaultdict(list)
    for frame, oid, box in rows:
        out[int(frame)].append((int(oid), np.array([box.x1, box.y1, box.x2, box.y2], dtype=float)))
    return out


def _frame_iou(gt: list, hyp: list) -> np.ndarray:
    if not gt or not hyp:
        return np.zeros((len(gt), len(hyp)))
    return iou_matrix(np.stack([b for _, b in gt]), np.stack([b for _, b in hyp]))


def _idf1_counts(gt_frames, hyp_frames, frames, threshold) -> tuple[int, int, int]:
    gt_ids = sorted({o for f in frames for o, _ in gt_frames.get(f, [])})
    hyp_ids = sorted({h for f in frames for h, _ in hyp_frames.get(f, [])})
    n_gt = sum(len(gt_frames.get(f, [])) for f in frames)
    n_hyp = sum(len(hyp_frames.get(f, [])) for f in frames)
    if not gt_ids or not hyp_ids:
        return 0, n_hyp, n_gt
    overlap = identity_overlap(gt_frames, hyp_frames, frames, threshold, gt_ids, hyp_ids)
    res = solve(-overlap.astype(float))
    idtp = int(sum(overlap[r, c] for r, c in res.matches))
    return idtp, n_hyp - idtp, n_gt - idtp


def identity_overlap(gt_frames, hyp_frames, frames, threshold, gt_ids, hyp_ids) -> np.ndarray:
    """Frames in which each (gt id, hyp id) pair overlaps at or above ``threshold``."""
    gi = {o: i for i, o in enumerate(gt_ids)}
    hi = {h: j for j, h in enumerate(hyp_ids)}
    counts = np.zeros((len(gt_ids), len(hyp_ids)), dtype=np.int64)
    for f in frames:
        g = gt_frames.get(f, [])
        h = hyp_frames.get(f, [])
        if not g or not h:
            continue
        ok = _frame_iou(g, h) >= threshold
        seen = set()
        for a, (oid, _) in enumerate(g):
            for b, (hid, _) in enumerate(h):
                if ok[a, b] and (oid, hid) not in seen:
                    seen.add((oid, hid))
                    counts[gi[oid], hi[hid]] += 1
    return counts


def evaluate(
    gt_rows: Iterable,
    hyp_rows: Iterable,
    iou_threshold: float = 0.5,
    frame_range: Sequence[int] | None = None,
) -> EvalReport:
    """Score a tracker output against ground truth.

    Both inputs are iterables of ``(frame, id, Box)``-like tuples. Hypothesis
    frames outside the ground-truth frame range raise
    :class:`FrameMismatchError`.
    """
    gt_frames = _by_frame((r[0], r[1], r[2]) for r in gt_rows)
    hyp_frames = _by_frame((r[0], r[1], r[2]) for r in hyp_rows)
    if frame_range is None:
        frames = sorted(gt_frames)
    else:
        frames = list(frame_range)
    frame_set = set(frames)
    stray = sorted(set(hyp_frames) - frame_set)
    if stray and (frame_range is not None or gt_frames):
        raise FrameMismatchError(f"hypothesis frames {stray[:5]} lie outside the ground-truth range")
    if not frames:
        frames = sorted(hyp_frames)

    fp = fn = idsw = n_gt = n_match = 0
    last_id: dict[int, int] = {}
    for f in frames:
        g = gt_frames.get(f, [])
        h = hyp_frames.get(f, [])
        n_gt += len(g)
        ious = _frame_iou(g, h)
        matched_g: set[int] = set()
        matched_h: set[int] = set()
        pairs: list[tuple[int, int]] = []
        # continuity: keep last frame's pairing while it still holds
        for a, (oid, _) in enumerate(g):
            prev = last_id.get(oid)
            if prev is None:
                continue
            cands = [b for b, (hid, _) in enumerate(h) if hid == prev and b not in matched_h and ious[a, b] >= iou_threshold]
            if cands:
                b = max(cands, key=lambda j: (ious[a, j], -j))
                pairs.append((a, b))
                matched_g.add(a)
                matched_h.add(b)
        rest_g = [a for a in range(len(g)) if a not in matched_g]
        rest_h = [b for b in range(len(h)) if b not in matched_h]
        if rest_g and rest_h:
            sub = ious[np.ix_(rest_g, rest_h)]
            res = solve(1.0 - sub, gate=sub < iou_threshold)
            pairs += [(rest_g[r], rest_h[c]) for r, c in res.matches]
        for a, b in pairs:
            oid, hid = g[a][0], h[b][0]
            if oid in last_id and last_id[oid] != hid:
                idsw += 1
            last_id[oid] = hid
        n_match += len(pairs)
        fn += len(g) - len(pairs)
        fp += len(h) - len(pairs)

    idtp, idfp, idfn = _idf1_counts(gt_frames, hyp_frames, frames, iou_threshold)
    denom = 2 * idtp + idfp + idfn
    idf1 = 2 * idtp / denom if denom else 1.0
    mota = 1.0 - (fn + fp + idsw) / n_gt if n_gt else (1.0 if fp == 0 else -math.inf)
    return EvalReport(
        mota=mota, idf1=idf1, fp=fp, fn=fn, idsw=idsw, gt=n_gt, matches=n_match,
        idtp=idtp, idfp=idfp, idfn=idfn,
    )


def aggregate(reports: dict[str, EvalReport]) -> EvalReport:
    """Pool event counts over sequences (not an average of ratios)."""
    fp = sum(r.fp for r in reports.values())
    fn = sum(r.fn for r in reports.values())
    idsw = sum(r.idsw for r in reports.values())
    gt = sum(r.gt for r in reports.values())
    idtp = sum(r.idtp for r in reports.values())
    idfp = sum(r.idfp for r in reports.values())
    idfn = sum(r.idfn for r in reports.values())
    denom = 2 * idtp + idfp + idfn
    return EvalReport(
        mota=1.0 - (fn + fp + idsw) / gt if gt else 1.0,
        idf1=2 * idtp / denom if denom else 1.0,
        fp=fp, fn=fn, idsw=idsw, gt=gt,
        matches=sum(r.matches for r in reports.values()),
        idtp=idtp, idfp=idfp, idfn=idfn,
        per_sequence=dict(reports),
    )


REPORT_COLUMNS = ("MOTA", "IDF1", "IDSW", "FP", "FN", "GT")


def format_table(rows: Sequence[tuple[str, EvalReport]], label: str = "sequence") -> str:
    """Fixed-width text table, one row per labelled report."""
    width = max([len(label)] + [len(name) for name, _ in rows])
    head = f"{label:<{width}}  " + "  ".join(f"{c:>8}" for c in REPORT_COLUMNS)
    lines = [head]
    for name, r in rows:
        d = r.as_dict()
        cells = [f"{d[c]:8.4f}" if isinstance(d[c], float) else f"{d[c]:8d}" for c in REPORT_COLUMNS]
        lines.append(f"{name:<{width}}  " + "  ".join(cells))
    return "\n".join(lines) + "\n"


def format_keyvalue(report: EvalReport) -> str:
    """Machine-readable ``key=value`` lines, aggregate first then per sequence."""
    lines = [f"{k}={v!r}" for k, v in report.as_dict().items()]
    for name in sorted(report.per_sequence):
        for k, v in report.per_sequence[name].as_dict().items():
            lines.append(f"{name}.{k}={v!r}")
    return "\n".join(lines) + "\n"
