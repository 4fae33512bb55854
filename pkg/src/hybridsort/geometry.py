"""Box geometry and the per-pair cue costs used during association.

Scalar functions operate on a single pair and are the reference definitions.
The ``*_matrix`` helpers compute the same quantities for every
(track, detection) pair at once and are what the tracker calls each frame.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

# Diagnostic counters, e.g. zero-norm embeddings seen by the appearance cost.
diagnostics: Counter = Counter()

ROCM_INTERVALS = (1, 2, 3)
# Start point of the detection-implied direction: the newest observation, or
# the same old observation the tracklet direction starts from.
ROCM_ANCHORS = ("newest", "oldest")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its top-left and bottom-right corners."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates: {vals}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"inverted box: {vals}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> "Point":
        return Point((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=float)

    def translate(self, du: float, dv: float) -> "Box":
        return Box(self.x1 + du, self.y1 + dv, self.x2 + du, self.y2 + dv)

    @classmethod
    def from_ltwh(cls, left: float, top: float, width: float, height: float) -> "Box":
        return cls(left, top, left + width, top + height)


class Point(NamedTuple):
    u: float
    v: float


class CornerSet(NamedTuple):
    lt: Point
    rt: Point
    lb: Point
    rb: Point


def corners(box: Box) -> CornerSet:
    return CornerSet(
        lt=Point(box.x1, box.y1),
        rt=Point(box.x2, box.y1),
        lb=Point(box.x1, box.y2),
        rb=Point(box.x2, box.y2),
    )


def _overlap_1d(a1: float, a2: float, b1: float, b2: float) -> float:
    return max(0.0, min(a2, b2) - max(a1, b1))


def iou(a: Box, b: Box) -> float:
    """Area intersection-over-union. Zero for disjoint or fully degenerate pairs."""
    inter = _overlap_1d(a.x1, a.x2, b.x1, b.x2) * _overlap_1d(a.y1, a.y2, b.y1, b.y2)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _axis_iou(a1: float, a2: float, b1: float, b2: float) -> float:
    span = max(a2, b2) - min(a1, b1)
    if span <= 0.0:
        return 0.0
    return max(0.0, min(a2, b2) - max(a1, b1)) / span


def hiou(a: Box, b: Box) -> float:
    """IoU of the vertical extents only, clamped at zero for separated extents."""
    return _axis_iou(a.y1, a.y2, b.y1, b.y2)


def wiou(a: Box, b: Box) -> float:
    return _axis_iou(a.x1, a.x2, b.x1, b.x2)


def hmiou(a: Box, b: Box) -> float:
    """Height-modulated IoU: ``hiou * iou``."""
    return hiou(a, b) * iou(a, b)


def wmiou(a: Box, b: Box) -> float:
    """Width-modulated IoU, the ablation counterpart of :func:`hmiou`."""
    return wiou(a, b) * iou(a, b)


def confidence_cost(c_hat: float, c_det: float) -> float:
    return abs(c_hat - c_det)


def clamp_unit(x: float) -> float:
    return min(1.0, max(0.0, x))


def linear_confidence_prediction(c_prev: float, c_prev2: Optional[float] = None) -> float:
    """Extrapolate a tracklet's confidence one frame ahead from its last two values.

    With only one stored confidence the last value is returned unchanged.
    The extrapolation is clamped to [0, 1].
    """
    if c_prev2 is None:
        return c_prev
    return clamp_unit(2.0 * c_prev - c_prev2)


def velocity_direction(p_old: Point, p_new: Point) -> Optional[float]:
    """Full-quadrant direction of motion from ``p_old`` to ``p_new`` in (-pi, pi].

    Returns None when the points coincide (no defined direction).
    """
    du = p_new[0] - p_old[0]
    dv = p_new[1] - p_old[1]
    if du == 0.0 and dv == 0.0:
        return None
    theta = math.atan2(dv, du)
    # atan2 returns -pi for (-x, -0.0); fold onto the half-open range
    return math.pi if theta == -math.pi else theta


def angle_difference(theta_t: float, theta_d: float) -> float:
    """Shortest-arc absolute difference between two angles, in [0, pi]."""
    d = math.fmod(abs(theta_t - theta_d), 2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


def rocm_cost(history: Sequence[tuple[int, Box]], det: Box, anchor: str = "newest") -> float:
    """Corner velocity-direction inconsistency between a tracklet and a detection.

    ``history`` holds ``(frame, box)`` observations, oldest first. The newest
    observation is the anchor. For each interval ``dt`` in 1..3 whose
    observation ``anchor_frame - dt`` is present, every corner contributes the
    angle between the tracklet's own motion (old corner to anchor corner) and
    the motion implied by the detection (anchor corner to detection corner).
    Corners with an undefined direction contribute zero. The per-interval
    cost is the mean over the four corners; intervals are summed.

    With ``anchor="oldest"`` the detection direction starts at the old corner
    instead (old corner to detection corner).
    """
    if anchor not in ROCM_ANCHORS:
        raise ValueError(f"unknown ROCM anchor {anchor!r}")
    if len(history) < 2:
        return 0.0
    anchor_frame, newest = history[-1]
    by_frame = {f: b for f, b in history}
    anchor_c = corners(newest)
    det_c = corners(det)
    theta_d = [velocity_direction(a, d) for a, d in zip(anchor_c, det_c)]
    total = 0.0
    for dt in ROCM_INTERVALS:
        old = by_frame.get(anchor_frame - dt)
        if old is None:
            continue
        acc = 0.0
        old_c = corners(old)
        if anchor == "oldest":
            theta_d = [velocity_direction(o, d) for o, d in zip(old_c, det_c)]
        for old_k, anchor_k, td in zip(old_c, anchor_c, theta_d):
            tt = velocity_direction(old_k, anchor_k)
            if tt is None or td is None:
                continue
            acc += angle_difference(tt, td)
        total += acc / 4.0
    return total


def cosine_appearance_cost(e_track, e_det) -> float:
    """Cosine distance ``1 - cos`` between two embeddings, in [0, 2].

    A zero-norm input yields the neutral cost 1.0 and bumps
    ``diagnostics['zero_norm_embedding']``.
    """
    a = np.asarray(e_track, dtype=float)
    b = np.asarray(e_det, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"embedding dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        diagnostics["zero_norm_embedding"] += 1
        return 1.0
    cos = float(np.dot(a, b)) / (na * nb)
    return 1.0 - min(1.0, max(-1.0, cos))


# ---------------------------------------------------------------------------
# Batched forms: rows are tracks (``a``), columns are detections (``b``).
# Every entry equals the scalar function on the same pair.
# ---------------------------------------------------------------------------

def _as_boxes(boxes) -> np.ndarray:
    arr = np.asarray(boxes, dtype=float)
    return arr.reshape(-1, 4)


def _axis_iou_matrix(a_lo, a_hi, b_lo, b_hi) -> np.ndarray:
    inter = np.minimum(a_hi[:, None], b_hi[None, :]) - np.maximum(a_lo[:, None], b_lo[None, :])
    span = np.maximum(a_hi[:, None], b_hi[None, :]) - np.minimum(a_lo[:, None], b_lo[None, :])
    out = np.zeros_like(span)
    ok = span > 0.0
    out[ok] = np.maximum(inter[ok], 0.0) / span[ok]
    return out


def iou_matrix(a, b) -> np.ndarray:
    a = _as_boxes(a)
    b = _as_boxes(b)
    iw = np.maximum(0.0, np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0]))
    ih = np.maximum(0.0, np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1]))
    inter = iw * ih
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(union)
    ok = union > 0.0
    out[ok] = inter[ok] / union[ok]
    return out


def hiou_matrix(a, b) -> np.ndarray:
    a = _as_boxes(a)
    b = _as_boxes(b)
    return _axis_iou_matrix(a[:, 1], a[:, 3], b[:, 1], b[:, 3])


def wiou_matrix(a, b) -> np.ndarray:
    a = _as_boxes(a)
    b = _as_boxes(b)
    return _axis_iou_matrix(a[:, 0], a[:, 2], b[:, 0], b[:, 2])


def hmiou_matrix(a, b) -> np.ndarray:
    return hiou_matrix(a, b) * iou_matrix(a, b)


def wmiou_matrix(a, b) -> np.ndarray:
    return wiou_matrix(a, b) * iou_matrix(a, b)


SIMILARITY_MATRICES = {
    "iou": iou_matrix,
    "hmiou": hmiou_matrix,
    "wmiou": wmiou_matrix,
}


_CORNER_INDEX = np.array([[0, 1], [2, 1], [0, 3], [2, 3]])


def _corner_array(boxes: np.ndarray) -> np.ndarray:
    """(..., 4) boxes -> (..., 4 corners, 2) in lt, rt, lb, rb order."""
    return boxes[..., _CORNER_INDEX]


def _directions(delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    du, dv = delta[..., 0], delta[..., 1]
    valid = (du != 0.0) | (dv != 0.0)
    theta = np.arctan2(dv, du)
    theta = np.where(theta == -np.pi, np.pi, theta)
    return theta, valid


def _angle_difference_array(t: np.ndarray, d: np.ndarray) -> np.ndarray:
    diff = np.fmod(np.abs(t - d), 2.0 * np.pi)
    return np.minimum(diff, 2.0 * np.pi - diff)


def rocm_matrix(histories: Sequence[Sequence[tuple[int, Box]]], dets, anchor: str = "newest") -> np.ndarray:
    """:func:`rocm_cost` for every (history, detection) pair."""
    if anchor not in ROCM_ANCHORS:
        raise ValueError(f"unknown ROCM anchor {anchor!r}")
    dets = _as_boxes(dets)
    n_t, n_d = len(histories), len(dets)
    if n_t == 0 or n_d == 0:
        return np.zeros((n_t, n_d))
    k = len(ROCM_INTERVALS)
    anchors = np.zeros((n_t, 4))
    olds = np.zeros((n_t, k, 4))
    have = np.zeros((n_t, k), dtype=bool)
    for i, hist in enumerate(histories):
        if not hist:
            continue
        anchor_frame, newest = hist[-1]
        anchors[i] = (newest.x1, newest.y1, newest.x2, newest.y2)
        for f, b in hist:
            dt = anchor_frame - f
            if 1 <= dt <= k:
                olds[i, dt - 1] = (b.x1, b.y1, b.x2, b.y2)
                have[i, dt - 1] = True
    anchor_c = _corner_array(anchors)  # (T, 4, 2)
    old_c = _corner_array(olds)  # (T, K, 4, 2)
    det_c = _corner_array(dets)  # (D, 4, 2)
    tt, tt_ok = _directions(anchor_c[:, None] - old_c)  # (T, K, 4)
    if anchor == "newest":
        td, td_ok = _directions(det_c[None] - anchor_c[:, None])  # (T, D, 4)
        td, td_ok = td[:, :, None], td_ok[:, :, None]
    else:
        td, td_ok = _directions(det_c[None, :, None] - old_c[:, None])  # (T, D, K, 4)
    diff = _angle_difference_array(tt[:, None], td)  # (T, D, K, 4)
    ok = tt_ok[:, None] & td_ok & have[:, None, :, None]
    return (np.where(ok, diff, 0.0).sum(axis=3) / 4.0).sum(axis=2)


def cosine_cost_matrix(track_embs: np.ndarray, det_embs: np.ndarray) -> np.ndarray:
    a = np.asarray(track_embs, dtype=float)
    b = np.asarray(det_embs, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or (a.size and b.size and a.shape[1] != b.shape[1]):
        raise ValueError(f"embedding dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    zero = (na[:, None] == 0.0) | (nb[None, :] == 0.0)
    if zero.any():
        diagnostics["zero_norm_embedding"] += int(zero.sum())
    safe_a = np.where(na[:, None] > 0, a / np.where(na > 0, na, 1.0)[:, None], 0.0)
    safe_b = np.where(nb[:, None] > 0, b / np.where(nb > 0, nb, 1.0)[:, None], 0.0)
    cos = np.clip(safe_a @ safe_b.T, -1.0, 1.0)
    return np.where(zero, 1.0, 1.0 - cos)
