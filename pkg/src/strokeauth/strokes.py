"""Raw touch samples: one drawn character as a list of timestamped strokes."""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MalformedSampleError

SOURCES = ("imported", "synthetic", "live")

# Feature windows downstream need at least this many points per sample.
MIN_TOTAL_POINTS = 5

DEFAULT_RATE_HZ = 100.0


@dataclass
class StrokeSample:
    """One captured drawing of a single character.

    Each stroke is a float64 array of shape (n_points, 3) with columns
    x (px), y (px), t (ms since capture start). Strokes are ordered by
    their first timestamp and timestamps increase strictly, also across
    the pen-up gap between consecutive strokes.
    """

    user_id: str
    session: int
    label: str
    strokes: list = field(default_factory=list)
    source: str = "imported"
    repetition: int = 0

    @property
    def point_count(self) -> int:
        return sum(len(s) for s in self.strokes)

    def concatenated(self) -> np.ndarray:
        """All points of all strokes as one (N, 3) array, in time order."""
        return np.concatenate([np.asarray(s, dtype=np.float64) for s in self.strokes])

    def stroke_arrays(self) -> list:
        return [np.asarray(s, dtype=np.float64) for s in self.strokes]

    @property
    def key(self):
        return (self.user_id, self.label, self.session, self.repetition)


def validate_sample(sample: StrokeSample, min_points: int = MIN_TOTAL_POINTS) -> None:
    """Raise MalformedSampleError if `sample` violates any invariant.

    min_points can be lowered by callers that only need structural
    validity (the default minimum exists for the windowed features
    computed downstream)."""
    if not isinstance(sample.user_id, str) or not sample.user_id:
        raise MalformedSampleError("user_id must be a non-empty string")
    if sample.session < 1:
        raise MalformedSampleError(f"session must be >= 1, got {sample.session}")
    if sample.source not in SOURCES:
        raise MalformedSampleError(f"unknown source {sample.source!r}")
    if not sample.strokes:
        raise MalformedSampleError("sample has no strokes")

    last_t = -np.inf
    first_ts = []
    for i, stroke in enumerate(sample.strokes):
        arr = np.asarray(stroke, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise MalformedSampleError(f"stroke {i}: expected shape (n, 3), got {arr.shape}")
        if len(arr) < 2:
            raise MalformedSampleError(f"stroke {i}: needs at least 2 points, got {len(arr)}")
        if not np.all(np.isfinite(arr)):
            raise MalformedSampleError(f"stroke {i}: non-finite coordinate or timestamp")
        t = arr[:, 2]
        if np.any(np.diff(t) <= 0):
            raise MalformedSampleError(f"stroke {i}: timestamps not strictly increasing")
        if t[0] <= last_t:
            raise MalformedSampleError(
                f"stroke {i}: starts at t={t[0]} before previous stroke ended at t={last_t}"
            )
        first_ts.append(t[0])
        last_t = t[-1]

    if any(b <= a for a, b in zip(first_ts, first_ts[1:])):
        raise MalformedSampleError("strokes not ordered by first timestamp")
    if sample.point_count < min_points:
        raise MalformedSampleError(
            f"sample has {sample.point_count} points, needs >= {min_points}"
        )


def resample_uniform(sample: StrokeSample, rate: float = DEFAULT_RATE_HZ) -> StrokeSample:
    """Resample every stroke onto a uniform time grid at `rate` samples/s.

    x and y are linearly interpolated per stroke; pen-up gaps between
    strokes are preserved because each stroke keeps its own start time.
    A sample already on the grid comes back unchanged (up to float64
    representation of the grid times).
    """
    if rate <= 0:
        raise MalformedSampleError(f"rate must be positive, got {rate}")
    # structural validity only: resampling changes the point count anyway
    validate_sample(sample, min_points=2)

    step_ms = 1000.0 / rate
    out = []
    for i, stroke in enumerate(sample.stroke_arrays()):
        t = stroke[:, 2]
        span = t[-1] - t[0]
        if span <= 0:
            raise MalformedSampleError(f"stroke {i}: zero time span, cannot resample")
        # 1e-9 guard keeps an on-grid endpoint from being dropped by float error
        n_out = int(np.floor(span / step_ms + 1e-9)) + 1
        if n_out < 2:
            # stroke shorter than one grid step: keep its two endpoints
            grid = np.array([t[0], t[-1]], dtype=np.float64)
        else:
            grid = t[0] + np.arange(n_out, dtype=np.float64) * step_ms
        x = np.interp(grid, t, stroke[:, 0])
        y = np.interp(grid, t, stroke[:, 1])
        out.append(np.column_stack([x, y, grid]))

    return replace(sample, strokes=out)
