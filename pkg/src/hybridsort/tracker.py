"""Per-frame tracking state machine and the baseline tracker family.

:class:`HybridSort` runs three association stages each frame:

1. high-confidence detections against every track, with the fused cost
   ``-sim + l1 * velocity + l2 * confidence + l3 * appearance``;
2. low-confidence detections against tracks left over from stage 1, using the
   similarity plus a (by default linearly predicted) confidence term;
3. leftover high-confidence detections against the last observed box of the
   tracks still unmatched, by plain IoU.

:class:`SortTracker` and :class:`ByteTracker` are the baselines used by the
ablation harness. They share the track lifecycle but build their own costs.
"""
from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kalman
from .assignment import AssignmentResult, solve
from .config import TrackerConfig
from .geometry import (
    SIMILARITY_MATRICES,
    Box,
    cosine_cost_matrix,
    iou_matrix,
    linear_confidence_prediction,
    rocm_matrix,
)


class TrackerInputError(ValueError):
    """Bad input handed to a tracker (frame order, embedding shape, ...)."""


@dataclass(frozen=True)
class Detection:
    box: Box
    confidence: float
    embedding: Optional[np.ndarray] = None
    index: int = -1


class TrackOutput(NamedTuple):
    track_id: int
    box: Box
    confidence: float


class Status(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


def update_ema_embedding(current: Optional[np.ndarray], det_embedding, momentum: float) -> np.ndarray:
    """Blend a detection embedding into the track's running appearance.

    ``momentum`` weights the old value. The result is L2-normalised. With no
    previous embedding the (normalised) detection embedding is returned.
    """
    e_det = np.asarray(det_embedding, dtype=float)
    if current is None:
        blended = e_det
    else:
        current = np.asarray(current, dtype=float)
        if current.shape != e_det.shape:
            raise TrackerInputError(f"embedding dimension mismatch: track {current.shape} vs detection {e_det.shape}")
        blended = momentum * current + (1.0 - momentum) * e_det
    norm = np.linalg.norm(blended)
    return blended / norm if norm > 0 else blended


class Track:
    def __init__(self, track_id: int, det: Detection, frame: int, cfg: TrackerConfig):
        self.id = track_id
        self.kalman = kalman.init_from_detection(det, cfg.noise)
        self.observations: deque[tuple[int, Box]] = deque([(frame, det.box)], maxlen=cfg.observation_ring)
        # newest last: [..., c^{t-2}, c^{t-1}]
        self.confidences: deque[float] = deque([det.confidence], maxlen=2)
        self.ema_embedding = None
        if det.embedding is not None:
            self.ema_embedding = update_ema_embedding(None, det.embedding, cfg.ema_momentum)
        self.hits = 1
        self.time_since_update = 0
        self.last_observation: tuple[int, Box] = (frame, det.box)
        self.last_confidence = det.confidence
        self.status = Status.CONFIRMED if cfg.min_hits <= 1 else Status.TENTATIVE
        self.predicted_box: Box = det.box

    def predict(self, noise: kalman.NoiseConfig) -> None:
        self.kalman = kalman.predict(self.kalman, noise)
        self.predicted_box, _ = kalman.state_to_box(self.kalman)

    @property
    def kalman_confidence(self) -> float:
        return self.kalman.confidence

    @property
    def linear_confidence(self) -> float:
        if len(self.confidences) == 2:
            return linear_confidence_prediction(self.confidences[1], self.confidences[0])
        return linear_confidence_prediction(self.confidences[-1])

    def confidence_estimate(self, model: str) -> float:
        return self.kalman_confidence if model == "kalman" else self.linear_confidence

    def update(self, det: Detection, frame: int, cfg: TrackerConfig) -> None:
        z = kalman.box_to_measurement(det.box, det.confidence)
        self.kalman = kalman.update(self.kalman, z, cfg.noise, context=f"frame {frame}, track {self.id}")
        self.observations.append((frame, det.box))
        self.confidences.append(det.confidence)
        self.last_observation = (frame, det.box)
        self.last_confidence = det.confidence
        if det.embedding is not None:
            self.ema_embedding = update_ema_embedding(self.ema_embedding, det.embedding, cfg.ema_momentum)
        self.time_since_update = 0
        self.hits += 1
        if self.status is Status.LOST or (self.status is Status.TENTATIVE and self.hits >= cfg.min_hits):
            self.status = Status.CONFIRMED

    def mark_missed(self) -> None:
        self.time_since_update += 1
        self.hits = 0
        if self.status is Status.CONFIRMED:
            self.status = Status.LOST

    def output(self) -> TrackOutput:
        box, _ = kalman.state_to_box(self.kalman)
        return TrackOutput(self.id, box, self.last_confidence)


def _boxes(items: Sequence[Box]) -> np.ndarray:
    if not items:
        return np.zeros((0, 4))
    return np.array([[b.x1, b.y1, b.x2, b.y2] for b in items], dtype=float)


def _confidences(dets: Sequence[Detection]) -> np.ndarray:
    return np.array([d.confidence for d in dets], dtype=float)


class BaseTracker:
    """Track lifecycle shared by every tracker variant.

    Subclasses implement :meth:`_associate`, which returns the matched
    ``(track, detection)`` pairs and the high-confidence detections that stay
    unmatched (these spawn new tracks).
    """

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._ids = itertools.count(1)
        self.frame: Optional[int] = None
        self._embedding_dim: Optional[int] = None
        self.stage_log: list[dict] = []

    def _check_inputs(self, frame: int, detections: Sequence[Detection]) -> None:
        if self.frame is not None and frame != self.frame + 1:
            raise TrackerInputError(f"frame {frame} does not follow frame {self.frame}")
        if frame < 1 and self.frame is None:
            raise TrackerInputError(f"frame index must be positive, got {frame}")
        for d in detections:
            if d.embedding is None:
                continue
            dim = int(np.asarray(d.embedding).shape[-1])
            if self._embedding_dim is None:
                self._embedding_dim = dim
            elif dim != self._embedding_dim:
                raise TrackerInputError(
                    f"frame {frame}, detection {d.index}: embedding dimension {dim} != {self._embedding_dim}"
                )

    def step(self, frame: int, detections: Sequence[Detection]) -> list[TrackOutput]:
        """Advance by one frame and return outputs of matched, confirmed tracks sorted by id."""
        cfg = self.config
        self._check_inputs(frame, detections)
        self.frame = frame
        for t in self.tracks:
            t.predict(cfg.noise)
        high = [d for d in detections if d.confidence >= cfg.high_threshold]
        low = [d for d in detections if cfg.low_threshold <= d.confidence < cfg.high_threshold]
        matches, leftover_high = self._associate(frame, high, low)
        matched_ids = set()
        for track, det in matches:
            track.update(det, frame, cfg)
            matched_ids.add(id(track))
        for t in self.tracks:
            if id(t) not in matched_ids:
                t.mark_missed()
        for det in leftover_high:
            self.tracks.append(Track(next(self._ids), det, frame, cfg))
        self.tracks = [t for t in self.tracks if t.time_since_update <= cfg.max_age]
        out = [t.output() for t in self.tracks if t.time_since_update == 0 and t.status is Status.CONFIRMED]
        return sorted(out, key=lambda o: o.track_id)

    def _associate(self, frame, high, low):
        raise NotImplementedError

    def _gated(self, sim: np.ndarray, cost: np.ndarray) -> AssignmentResult:
        return solve(cost, gate=sim < self.config.gate)


class HybridSort(BaseTracker):
    def _confidence_cost(self, tracks: Sequence[Track], dets: Sequence[Detection], model: str) -> np.ndarray:
        c_hat = np.array([t.confidence_estimate(model) for t in tracks], dtype=float)
        return np.abs(c_hat[:, None] - _confidences(dets)[None, :])

    def _appearance_cost(self, tracks: Sequence[Track], dets: Sequence[Detection]) -> tuple[np.ndarray, np.ndarray]:
        """Cosine cost plus a mask of pairs where both embeddings exist."""
        cost = np.zeros((len(tracks), len(dets)))
        has_t = np.array([t.ema_embedding is not None for t in tracks], dtype=bool)
        has_d = np.array([d.embedding is not None for d in dets], dtype=bool)
        mask = has_t[:, None] & has_d[None, :]
        if mask.any():
            ti = np.flatnonzero(has_t)
            di = np.flatnonzero(has_d)
            te = np.stack([tracks[i].ema_embedding for i in ti])
            de = np.stack([np.asarray(dets[j].embedding, dtype=float) for j in di])
            cost[np.ix_(ti, di)] = cosine_cost_matrix(te, de)
        return cost, mask

    def stage1_associate(self, tracks: Sequence[Track], dets: Sequence[Detection]) -> AssignmentResult:
        cfg = self.config
        sim = SIMILARITY_MATRICES[cfg.similarity](_boxes([t.predicted_box for t in tracks]), _boxes([d.box for d in dets]))
        cost = -sim
        if cfg.rocm and cfg.lambda_velocity > 0:
            cost = cost + cfg.lambda_velocity * rocm_matrix(
                [list(t.observations) for t in tracks], _boxes([d.box for d in dets]), cfg.rocm_anchor)
        if cfg.tcm:
            cost = cost + cfg.lambda_conf_stage1 * self._confidence_cost(tracks, dets, cfg.stage1_confidence)
        if cfg.appearance:
            app, mask = self._appearance_cost(tracks, dets)
            cost = cost + cfg.lambda_appearance * np.where(mask, app, 0.0)
        return self._gated(sim, cost)

    def stage2_byte(self, tracks: Sequence[Track], dets: Sequence[Detection]) -> AssignmentResult:
        cfg = self.config
        sim = SIMILARITY_MATRICES[cfg.similarity](_boxes([t.predicted_box for t in tracks]), _boxes([d.box for d in dets]))
        cost = -sim
        if cfg.tcm:
            cost = cost + cfg.lambda_conf_stage2 * self._confidence_cost(tracks, dets, cfg.stage2_confidence)
        return self._gated(sim, cost)

    def stage3_ocr(self, tracks: Sequence[Track], dets: Sequence[Detection]) -> AssignmentResult:
        sim = iou_matrix(_boxes([t.last_observation[1] for t in tracks]), _boxes([d.box for d in dets]))
        return self._gated(sim, -sim)

    def _associate(self, frame, high, low):
        cfg = self.config
        tracks = list(self.tracks)
        matches: list[tuple[Track, Detection]] = []

        res = self.stage1_associate(tracks, high)
        matches += [(tracks[r], high[c]) for r, c in res.matches]
        rest_tracks = [tracks[r] for r in res.unmatched_rows]
        rest_high = [high[c] for c in res.unmatched_cols]
        log = {"frame": frame, "stage1": len(res.matches), "stage2": 0, "stage3": 0}

        if cfg.byte and rest_tracks and low:
            res = self.stage2_byte(rest_tracks, low)
            matches += [(rest_tracks[r], low[c]) for r, c in res.matches]
            rest_tracks = [rest_tracks[r] for r in res.unmatched_rows]
            log["stage2"] = len(res.matches)

        if cfg.ocr and rest_tracks and rest_high:
            res = self.stage3_ocr(rest_tracks, rest_high)
            matches += [(rest_tracks[r], rest_high[c]) for r, c in res.matches]
            rest_high = [rest_high[c] for c in res.unmatched_cols]
            log["stage3"] = len(res.matches)

        self.stage_log.append(log)
        return matches, rest_high


class SortTracker(BaseTracker):
    """Single-stage IoU tracker with optional confidence (TCM) and HMIoU plug-ins."""

    def _cost(self, tracks, dets, lam: float, model: str):
        cfg = self.config
        pred = _boxes([t.predicted_box for t in tracks])
        boxes = _boxes([d.box for d in dets])
        sim = SIMILARITY_MATRICES[cfg.similarity](pred, boxes)
        cost = -sim
        if cfg.tcm:
            est = np.array([t.confidence_estimate(model) for t in tracks], dtype=float)
            cost = cost + lam * np.abs(est[:, None] - _confidences(dets)[None, :])
        return sim, cost

    def _associate(self, frame, high, low):
        tracks = list(self.tracks)
        sim, cost = self._cost(tracks, high, self.config.lambda_conf_stage1, self.config.stage1_confidence)
        res = self._gated(sim, cost)
        return [(tracks[r], high[c]) for r, c in res.matches], [high[c] for c in res.unmatched_cols]


class ByteTracker(SortTracker):
    """SORT plus a second pass over low-confidence detections."""

    def _associate(self, frame, high, low):
        cfg = self.config
        tracks = list(self.tracks)
        sim, cost = self._cost(tracks, high, cfg.lambda_conf_stage1, cfg.stage1_confidence)
        res = self._gated(sim, cost)
        matches = [(tracks[r], high[c]) for r, c in res.matches]
        rest = [tracks[r] for r in res.unmatched_rows]
        if rest and low:
            sim2, cost2 = self._cost(rest, low, cfg.lambda_conf_stage2, cfg.stage2_confidence)
            res2 = self._gated(sim2, cost2)
            matches += [(rest[r], low[c]) for r, c in res2.matches]
        return matches, [high[c] for c in res.unmatched_cols]


_BASELINES = {
    "hybrid_sort": HybridSort,
    "sort": SortTracker,
    "byte_two_stage": ByteTracker,
}


def make_baseline(selector: str, config: TrackerConfig | None = None, **overrides) -> BaseTracker:
    """Build a tracker by name.

    ``sort`` and ``byte_two_stage`` ignore the ROCM, appearance, BYTE and OCR
    switches; they honour ``tcm`` and the similarity choice so the plug-in
    ablations can be expressed. When no config is given, the baselines start
    with every extra cue off.
    """
    if selector not in _BASELINES:
        raise ValueError(f"unknown tracker {selector!r}; expected one of {sorted(_BASELINES)}")
    if config is None:
        config = TrackerConfig(tracker=selector)
        if selector != "hybrid_sort":
            config = config.all_off()
    config = config.replace(tracker=selector, **overrides)
    return _BASELINES[selector](config)


def make_tracker(config: TrackerConfig) -> BaseTracker:
    return _BASELINES[config.tracker](config)


def run_sequence(tracker: BaseTracker, frames: dict[int, list[Detection]], n_frames: Optional[int] = None):
    """Feed frames 1..n (missing frames count as empty) and collect outputs.

    Returns ``(outputs, association_seconds)`` where outputs is a list of
    ``(frame, TrackOutput)``.
    """
    import time

    last = n_frames if n_frames is not None else max(frames, default=0)
    outputs: list[tuple[int, TrackOutput]] = []
    elapsed = 0.0
    for f in range(1, last + 1):
        dets = frames.get(f, [])
        t0 = time.perf_counter()
        res = tracker.step(f, dets)
        elapsed += time.perf_counter() - t0
        outputs.extend((f, o) for o in res)
    return outputs, elapsed
