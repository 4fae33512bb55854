"""Constant-velocity Kalman filter over box geometry plus detection confidence.

State layout: ``[u, v, s, c, r, du, dv, ds, dc]`` with (u, v) the box centre,
s the area, c the confidence and r the aspect ratio w/h. Aspect ratio has no
velocity term. All functions return new states; inputs are never mutated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Box, clamp_unit

DIM_X = 9
DIM_Z = 5
AREA_FLOOR = 1e-6

# Velocity slot for each observed component; r (index 4) has none.
_VELOCITY_OF = {0: 5, 1: 6, 2: 7, 3: 8}


def transition_matrix() -> np.ndarray:
    F = np.eye(DIM_X)
    for pos, vel in _VELOCITY_OF.items():
        F[pos, vel] = 1.0
    return F


def observation_matrix() -> np.ndarray:
    H = np.zeros((DIM_Z, DIM_X))
    H[np.arange(DIM_Z), np.arange(DIM_Z)] = 1.0
    return H


_F = transition_matrix()
_H = observation_matrix()


class KalmanError(ArithmeticError):
    """Numerical failure inside the filter (e.g. singular innovation covariance)."""


@dataclass(frozen=True)
class NoiseConfig:
    """Noise model. Standard deviations, not variances.

    measurement_std is ordered (u, v, s, c, r); process_std follows the full
    state layout. The initial covariance uses the measurement variances for the
    observed components and ``velocity_inflation`` times the matching
    measurement variance for each velocity.
    """

    measurement_std: tuple[float, ...] = (1.0, 1.0, math.sqrt(10.0), 0.1, math.sqrt(10.0))
    process_std: tuple[float, ...] = (1.0, 1.0, 1.0, 0.01, 1.0, 0.1, 0.1, 0.01, 0.01)
    velocity_inflation: float = 1000.0

    def __post_init__(self):
        if len(self.measurement_std) != DIM_Z or len(self.process_std) != DIM_X:
            raise ValueError("measurement_std needs 5 entries and process_std 9")
        vals = (*self.measurement_std, *self.process_std, self.velocity_inflation)
        if not all(math.isfinite(x) and x > 0 for x in vals):
            raise ValueError("noise parameters must be finite and strictly positive")

    @property
    def R(self) -> np.ndarray:
        return np.diag(np.square(self.measurement_std))

    @property
    def Q(self) -> np.ndarray:
        return np.diag(np.square(self.process_std))

    def initial_covariance(self) -> np.ndarray:
        var = np.zeros(DIM_X)
        meas_var = np.square(self.measurement_std)
        var[:DIM_Z] = meas_var
        for pos, vel in _VELOCITY_OF.items():
            var[vel] = self.velocity_inflation * meas_var[pos]
        return np.diag(var)

    def to_dict(self) -> dict:
        return {
            "measurement_std": list(self.measurement_std),
            "process_std": list(self.process_std),
            "velocity_inflation": self.velocity_inflation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        return cls(
            measurement_std=tuple(float(x) for x in d["measurement_std"]),
            process_std=tuple(float(x) for x in d["process_std"]),
            velocity_inflation=float(d["velocity_inflation"]),
        )


@dataclass(frozen=True)
class Measurement:
    u: float
    v: float
    s: float
    c: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.s, self.c, self.r], dtype=float)


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(DIM_X)
        cov = np.array(self.covariance, dtype=float).reshape(DIM_X, DIM_X)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def confidence(self) -> float:
        """Filter confidence clamped to [0, 1] for use in costs."""
        return clamp_unit(float(self.mean[3]))


def box_to_measurement(box: Box, confidence: float) -> Measurement:
    w, h = box.width, box.height
    if not (w > 0.0 and h > 0.0):
        raise ValueError(f"box {box} has zero width or height; aspect ratio undefined")
    if not math.isfinite(confidence):
        raise ValueError(f"non-finite confidence {confidence}")
    return Measurement(
        u=box.x1 + w / 2.0,
        v=box.y1 + h / 2.0,
        s=w * h,
        c=confidence,
        r=w / h,
    )


def init_from_detection(det, cfg: NoiseConfig) -> KalmanState:
    """Start a filter at a detection with zero velocities."""
    z = box_to_measurement(det.box, det.confidence)
    mean = np.zeros(DIM_X)
    mean[:DIM_Z] = z.as_array()
    return KalmanState(mean, cfg.initial_covariance())


def predict(state: KalmanState, cfg: NoiseConfig) -> KalmanState:
    mean = _F @ state.mean
    cov = _F @ state.covariance @ _F.T + cfg.Q
    return KalmanState(mean, 0.5 * (cov + cov.T))


def update(
    state: KalmanState,
    z: Measurement,
    cfg: NoiseConfig,
    context: Optional[str] = None,
) -> KalmanState:
    """Standard Kalman correction with a Joseph-form covariance update."""
    P = state.covariance
    x = state.mean
    R = cfg.R
    S = _H @ P @ _H.T + R
    PHt = P @ _H.T
    try:
        # K = P H^T S^-1, solved as S^T K^T = (P H^T)^T
        K = np.linalg.solve(S.T, PHt.T).T
    except np.linalg.LinAlgError as exc:
        where = f" ({context})" if context else ""
        raise KalmanError(f"singular innovation covariance{where}") from exc
    innovation = z.as_array() - _H @ x
    mean = x + K @ innovation
    IKH = np.eye(DIM_X) - K @ _H
    cov = IKH @ P @ IKH.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        where = f" ({context})" if context else ""
        raise KalmanError(f"non-finite posterior{where}")
    return KalmanState(mean, cov)


def state_to_box(state: KalmanState) -> tuple[Box, float]:
    """Box and clamped confidence described by a state.

    Negative predicted area is floored at ``AREA_FLOOR``; zero area maps to a
    zero-size box at the centre.
    """
    u, v, s, c, r = (float(x) for x in state.mean[:DIM_Z])
    if not r > 0.0:
        raise ValueError(f"aspect ratio {r} must be positive")
    if s < 0.0:
        s = AREA_FLOOR
    w = math.sqrt(s * r)
    h = math.sqrt(s / r)
    return Box(u - w / 2.0, v - h / 2.0, u + w / 2.0, v + h / 2.0), clamp_unit(c)
