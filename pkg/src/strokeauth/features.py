"""Per-sample time functions derived from the pen trajectory.

A drawn character is reduced to 21 equal-length channels: normalized
position, path-tangent angle, speed, log curvature radius, acceleration
magnitude, their derivatives, and windowed shape ratios. These are the
standard local features of the online-handwriting literature.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientLengthError
from .strokes import StrokeSample, validate_sample

CHANNEL_NAMES = (
    "x",
    "y",
    "path_tangent_angle",
    "velocity",
    "log_curvature_radius",
    "acceleration",
    "dx",
    "dy",
    "dtheta",
    "dvelocity",
    "dlog_curvature_radius",
    "dacceleration",
    "ddx",
    "ddy",
    "speed_ratio_5",
    "step_angle",
    "dstep_angle",
    "sin_step_angle",
    "cos_step_angle",
    "length_width_ratio_5",
    "length_width_ratio_7",
)

N_CHANNELS = len(CHANNEL_NAMES)

# Feature 21 uses a centered 7-sample window.
MIN_SEQUENCE_LENGTH = 7

# Denominators smaller than this are clamped so every channel stays finite.
DENOM_FLOOR = 1e-6

# The curvature-radius ratio gets a coarser clamp: straight segments have
# near-zero turn rate, and with a tiny floor the log ratio spikes to ~14
# in a way that swamps the channel's variance. Clamping both terms at
# 1e-3 bounds the spikes while leaving ordinary strokes untouched
# (speeds and turn rates sit well above it after normalization).
CURVATURE_FLOOR = 1e-3


@dataclass
class TimeFunctionSet:
    """The 21 derived channels for one sample.

    channels has shape (21, N) in CHANNEL_NAMES order; timestamps holds
    the N sample times in seconds from the first point (pen-up gaps
    included, so derivative channels reflect real pause durations).
    """

    channels: np.ndarray
    timestamps: np.ndarray

    @property
    def length(self) -> int:
        return self.channels.shape[1]

    @property
    def channel_names(self):
        return CHANNEL_NAMES

    def channel(self, name: str) -> np.ndarray:
        return self.channels[CHANNEL_NAMES.index(name)]


def finite_difference(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Derivative of `values` w.r.t. time: central differences at interior
    samples, forward/backward at the two endpoints."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (t[2:] - t[:-2])
    out[0] = (values[1] - values[0]) / (t[1] - t[0])
    out[-1] = (values[-1] - values[-2]) / (t[-1] - t[-2])
    return out


def _window_bounds(n: int, halfwidth: int):
    lo = np.maximum(np.arange(n) - halfwidth, 0)
    hi = np.minimum(np.arange(n) + halfwidth, n - 1)
    return lo, hi


def _speed_ratio(v: np.ndarray, halfwidth: int) -> np.ndarray:
    lo, hi = _window_bounds(len(v), halfwidth)
    out = np.empty_like(v)
    for n in range(len(v)):
        w = v[lo[n] : hi[n] + 1]
        out[n] = w.min() / max(w.max(), DENOM_FLOOR)
    return out


def _length_width_ratio(x: np.ndarray, y: np.ndarray, halfwidth: int) -> np.ndarray:
    seg = np.hypot(np.diff(x), np.diff(y))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    lo, hi = _window_bounds(len(x), halfwidth)
    out = np.empty_like(x)
    for n in range(len(x)):
        a, b = lo[n], hi[n]
        length = cum[b] - cum[a]
        width = x[a : b + 1].max() - x[a : b + 1].min()
        out[n] = length / max(width, DENOM_FLOOR)
    return out


def extract_time_functions(sample: StrokeSample) -> TimeFunctionSet:
    """Compute the 21 channels for a (resampled) sample.

    Strokes are concatenated into one sequence; no synthetic points are
    inserted at pen-ups, so derivatives span the gap. Positions are
    mean-centered and scaled by the joint x/y standard deviation before
    anything else is derived from them.
    """
    validate_sample(sample)
    points = sample.concatenated()
    n = len(points)
    if n < MIN_SEQUENCE_LENGTH:
        raise InsufficientLengthError(
            f"need at least {MIN_SEQUENCE_LENGTH} points for windowed features, got {n}"
        )

    t = (points[:, 2] - points[0, 2]) / 1000.0  # seconds
    x = points[:, 0] - points[:, 0].mean()
    y = points[:, 1] - points[:, 1].mean()
    scale = max(np.concatenate([x, y]).std(), DENOM_FLOOR)
    x = x / scale
    y = y / scale

    dx = finite_difference(x, t)
    dy = finite_difference(y, t)
    theta = np.unwrap(np.arctan2(dy, dx))
    v = np.hypot(dx, dy)
    dtheta = finite_difference(theta, t)
    rho = np.log(
        np.maximum(v, CURVATURE_FLOOR) / np.maximum(np.abs(dtheta), CURVATURE_FLOOR)
    )
    dv = finite_difference(v, t)
    accel = np.hypot(dv, v * dtheta)

    drho = finite_difference(rho, t)
    daccel = finite_difference(accel, t)
    ddx = finite_difference(dx, t)
    ddy = finite_difference(dy, t)

    # angle between consecutive samples; last value repeated to keep length N
    alpha_raw = np.unwrap(np.arctan2(np.diff(y), np.diff(x)))
    alpha = np.concatenate([alpha_raw, alpha_raw[-1:]])
    dalpha = finite_difference(alpha, t)

    channels = np.stack(
        [
            x,
            y,
            theta,
            v,
            rho,
            accel,
            dx,
            dy,
            dtheta,
            dv,
            drho,
            daccel,
            ddx,
            ddy,
            _speed_ratio(v, 2),
            alpha,
            dalpha,
            np.sin(alpha),
            np.cos(alpha),
            _length_width_ratio(x, y, 2),
            _length_width_ratio(x, y, 3),
        ]
    )
    return TimeFunctionSet(channels=channels, timestamps=t)


def z_normalize(tfs: TimeFunctionSet) -> TimeFunctionSet:
    """Per-channel z-normalization (zero mean, unit variance, floor-clamped)."""
    mean = tfs.channels.mean(axis=1, keepdims=True)
    std = np.maximum(tfs.channels.std(axis=1, keepdims=True), DENOM_FLOOR)
    return TimeFunctionSet(channels=(tfs.channels - mean) / std, timestamps=tfs.timestamps)


def prepared_channels(tfs: TimeFunctionSet) -> np.ndarray:
    """Channels ready for alignment or scoring: z-normalized, shape (21, N)."""
    return z_normalize(tfs).channels
