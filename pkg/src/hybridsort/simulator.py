"""Seeded synthetic scenes with depth-ordered occlusion.

Objects move under one of three motion models. Each frame, an object's
visible fraction is computed against every nearer object (nearer = taller
box, ties broken by the lower bottom edge). Once the hidden fraction exceeds
``occlusion_threshold`` the detector confidence falls linearly with it,
``0.9 * (1 - slope * hidden)``, and the detection may drop out.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .geometry import Box
from .io_mot import GTRow, write_detections, write_ground_truth, write_seqinfo
from .tracker import Detection

MOTIONS = ("linear", "weave", "crossing")
BASE_CONFIDENCE = 0.9
POSE_CORRELATION = 0.7


@dataclass(frozen=True)
class ScenarioSpec:
    n_objects: int = 2
    motions: tuple[str, ...] = ("crossing",)
    frame_count: int = 60
    image_width: float = 1280.0
    image_height: float = 720.0
    occlusion_threshold: float = 0.2
    confidence_slope: float = 1.0
    dropout_prob: float = 0.0
    jitter_std: float = 0.0
    confidence_noise: float = 0.05
    # irregular per-frame width change (limb movement), as a fraction of width
    width_wobble: float = 0.0
    height_range: tuple[float, float] = (80.0, 240.0)
    aspect_range: tuple[float, float] = (0.35, 0.5)
    # when set, base widths in px are drawn from this range independently of depth
    width_range: Optional[tuple[float, float]] = None
    speed_range: tuple[float, float] = (2.0, 6.0)
    # common horizontal velocity shared by both members of a crossing pair
    pair_drift: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "motions", tuple(self.motions))
        object.__setattr__(self, "height_range", tuple(self.height_range))
        object.__setattr__(self, "aspect_range", tuple(self.aspect_range))
        object.__setattr__(self, "speed_range", tuple(self.speed_range))
        if self.width_range is not None:
            object.__setattr__(self, "width_range", tuple(self.width_range))
        bad = [m for m in self.motions if m not in MOTIONS]
        if bad or not self.motions:
            raise ValueError(f"motions must be drawn from {MOTIONS}, got {self.motions}")
        if not 0.0 < self.occlusion_threshold < 1.0:
            raise ValueError("occlusion_threshold must lie in (0, 1)")
        if self.n_objects < 0 or self.frame_count < 1:
            raise ValueError("need n_objects >= 0 and frame_count >= 1")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must lie in [0, 1]")
        if min(self.jitter_std, self.confidence_noise, self.width_wobble, self.confidence_slope) < 0:
            raise ValueError("noise parameters must be non-negative")

    def object_motions(self) -> list[str]:
        return [self.motions[i % len(self.motions)] for i in range(self.n_objects)]

    def replace(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("motions", "height_range", "aspect_range", "speed_range", "width_range"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class GroundTruth:
    frames: dict[int, list[GTRow]]
    frame_count: int

    def rows(self) -> list[GTRow]:
        return [r for f in sorted(self.frames) for r in self.frames[f]]


def rect_union_area(rects: Sequence[tuple[float, float, float, float]]) -> float:
    """Exact area of a union of axis-aligned rectangles (coordinate compression)."""
    rects = [r for r in rects if r[2] > r[0] and r[3] > r[1]]
    if not rects:
        return 0.0
    xs = sorted({x for r in rects for x in (r[0], r[2])})
    total = 0.0
    for xa, xb in zip(xs, xs[1:]):
        spans = sorted((r[1], r[3]) for r in rects if r[0] <= xa and r[2] >= xb)
        covered = 0.0
        cur_lo = cur_hi = None
        for lo, hi in spans:
            if cur_hi is None or lo > cur_hi:
                if cur_hi is not None:
                    covered += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        if cur_hi is not None:
            covered += cur_hi - cur_lo
        total += covered * (xb - xa)
    return total


def nearer(a: Box, b: Box) -> bool:
    """Depth rule: is ``a`` in front of ``b``?"""
    if a.height != b.height:
        return a.height > b.height
    return a.y2 > b.y2


def visibility_fractions(boxes: Sequence[Box]) -> list[float]:
    """Visible fraction of each box given occlusion by every nearer box."""
    out = []
    for i, b in enumerate(boxes):
        if b.area <= 0.0:
            out.append(1.0)
            continue
        clips = []
        for j, o in enumerate(boxes):
            if j == i or not nearer(o, b):
                continue
            x1, y1 = max(b.x1, o.x1), max(b.y1, o.y1)
            x2, y2 = min(b.x2, o.x2), min(b.y2, o.y2)
            if x2 > x1 and y2 > y1:
                clips.append((x1, y1, x2, y2))
        out.append(1.0 - rect_union_area(clips) / b.area)
    return out


def occluded_confidence(hidden: float, slope: float) -> float:
    return max(0.0, BASE_CONFIDENCE * (1.0 - slope * hidden))


def _trajectories(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """Centre (u, v), height and base width per object per frame: shape (N, T, 4)."""
    n, T = spec.n_objects, spec.frame_count
    W, H = spec.image_width, spec.image_height
    t = np.arange(T, dtype=float)
    out = np.zeros((n, T, 4))
    motions = spec.object_motions()
    h_lo, h_hi = spec.height_range
    a_lo, a_hi = spec.aspect_range
    s_lo, s_hi = spec.speed_range
    def base_width(h: float) -> float:
        if spec.width_range is not None:
            return rng.uniform(*spec.width_range)
        return h * rng.uniform(a_lo, a_hi)

    i = 0
    while i < n:
        kind = motions[i]
        if kind == "crossing" and i + 1 < n:
            # Two objects at clearly different depths meeting mid-sequence.
            h_far = rng.uniform(h_lo, h_lo + 0.4 * (h_hi - h_lo))
            h_near = rng.uniform(h_far + 0.35 * (h_hi - h_lo), h_hi)
            speed = rng.uniform(s_lo, s_hi, size=2)
            meet_t = rng.uniform(0.4, 0.6) * (T - 1)
            meet_u = rng.uniform(0.3 * W, 0.7 * W)
            ground = rng.uniform(0.55 * H, 0.8 * H)
            vy = rng.uniform(-0.3, 0.3, size=2)
            drift = rng.uniform(-spec.pair_drift, spec.pair_drift)
            for k, (h, sgn) in enumerate(((h_far, 1.0), (h_near, -1.0))):
                u = meet_u + (drift + sgn * speed[k]) * (t - meet_t)
                # feet of the nearer object sit lower in the image
                bottom = ground + (0.25 * h if k == 1 else 0.0) + vy[k] * (t - meet_t)
                out[i + k, :, 0] = u
                out[i + k, :, 1] = bottom - h / 2.0
                out[i + k, :, 2] = h
                out[i + k, :, 3] = base_width(h)
            i += 2
            continue
        h = rng.uniform(h_lo, h_hi)
        angle = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(s_lo, s_hi)
        u0 = rng.uniform(0.2 * W, 0.8 * W)
        v0 = rng.uniform(0.3 * H, 0.7 * H)
        u = u0 + speed * math.cos(angle) * t
        v = v0 + 0.3 * speed * math.sin(angle) * t
        if kind == "weave":
            amp = rng.uniform(10.0, 40.0)
            period = rng.uniform(15.0, 40.0)
            phase = rng.uniform(0, 2 * math.pi)
            u = u0 + speed * math.cos(angle) * t
            v = v0 + amp * np.sin(2 * math.pi * t / period + phase)
            u = u + 0.5 * amp * np.sin(4 * math.pi * t / period + phase)
        out[i, :, 0] = u
        out[i, :, 1] = v
        out[i, :, 2] = h
        out[i, :, 3] = base_width(h)
        i += 1
    return out


def _pose_factors(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance AR(1) width factors per object and frame (limb/pose changes)."""
    n, T = spec.n_objects, spec.frame_count
    z = np.zeros((n, T))
    if n == 0:
        return z
    rho = POSE_CORRELATION
    z[:, 0] = rng.standard_normal(n)
    innov = rng.standard_normal((n, T)) * math.sqrt(1.0 - rho * rho)
    for t in range(1, T):
        z[:, t] = rho * z[:, t - 1] + innov[:, t]
    return z


def _clamp_box(x1, y1, x2, y2, W, H, min_size=2.0) -> Box:
    x1 = min(max(x1, 0.0), W - min_size)
    y1 = min(max(y1, 0.0), H - min_size)
    x2 = min(max(x2, x1 + min_size), W)
    y2 = min(max(y2, y1 + min_size), H)
    return Box(x1, y1, x2, y2)


def generate(spec: ScenarioSpec) -> tuple[GroundTruth, dict[int, list[Detection]]]:
    """Ground truth and per-frame detections for a scenario. Deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    traj = _trajectories(spec, rng)
    pose = _pose_factors(spec, rng)
    W, H = spec.image_width, spec.image_height
    gt_frames: dict[int, list[GTRow]] = {}
    det_frames: dict[int, list[Detection]] = {}
    index = 0
    for f in range(spec.frame_count):
        frame = f + 1
        boxes = []
        for k in range(spec.n_objects):
            u, v, h, w0 = traj[k, f]
            w = w0 * max(0.2, 1.0 + spec.width_wobble * pose[k, f])
            boxes.append(_clamp_box(u - w / 2, v - h / 2, u + w / 2, v + h / 2, W, H))
        vis = visibility_fractions(boxes)
        gt_frames[frame] = [GTRow(frame, k + 1, b, vis[k]) for k, b in enumerate(boxes)]
        dets = []
        for k, b in enumerate(boxes):
            hidden = 1.0 - vis[k]
            # draws are made unconditionally so the RNG stream does not depend on branches
            u_noise = rng.uniform()
            u_drop = rng.uniform()
            jitter = rng.standard_normal(4) * spec.jitter_std
            if hidden > spec.occlusion_threshold:
                conf = occluded_confidence(hidden, spec.confidence_slope)
                if u_drop < spec.dropout_prob:
                    continue
            else:
                conf = min(1.0, BASE_CONFIDENCE + spec.confidence_noise * u_noise)
            if spec.jitter_std > 0:
                x1, y1, x2, y2 = b.x1 + jitter[0], b.y1 + jitter[1], b.x2 + jitter[2], b.y2 + jitter[3]
                box = _clamp_box(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2), W, H)
            else:
                box = b
            dets.append(Detection(box=box, confidence=conf, index=index))
            index += 1
        det_frames[frame] = dets
    return GroundTruth(gt_frames, spec.frame_count), det_frames


def export(gt: GroundTruth, dets: dict[int, list[Detection]], out_dir) -> dict[str, Path]:
    """Write ``gt.txt``, ``det.txt`` and ``seqinfo.ini`` (sequence length) to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"gt": out_dir / "gt.txt", "det": out_dir / "det.txt", "seqinfo": out_dir / "seqinfo.ini"}
    write_ground_truth(paths["gt"], gt.rows())
    write_detections(paths["det"], dets)
    write_seqinfo(paths["seqinfo"], out_dir.name, gt.frame_count)
    return paths
