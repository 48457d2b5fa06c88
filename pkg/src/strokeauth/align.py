"""Elastic alignment of time sequences.

Classic dynamic time warping plus a sliding-window variant whose per-cell
cost is a weighted average of neighboring sample distances. Both return
the full warping path so that two multichannel function sets can be
gathered into equal-length, step-paired sequences.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .features import TimeFunctionSet, prepared_channels

# Predecessor codes stored during the forward pass. Ties prefer the
# diagonal, then advancing A only, then advancing B only; argmin over
# this ordering implements that deterministically.
_DIAG, _ADV_A, _ADV_B = 0, 1, 2


def triangular_weights(halfwidth: int) -> tuple:
    """Symmetric triangular window weights over offsets [-L, L], summing to 1."""
    offsets = np.arange(-halfwidth, halfwidth + 1)
    w = (halfwidth + 1 - np.abs(offsets)).astype(np.float64)
    return tuple(w / w.sum())


@dataclass(frozen=True)
class DtwConfig:
    """Step pattern, window, and band settings for the aligners.

    step_weights are per-transition multipliers (diagonal, advance-A,
    advance-B); the first path step always carries weight 1. The
    normalized distance divides the accumulated cost by the sum of step
    weights along the chosen path, so with unit weights it is cost/K.

    window_halfwidth L and neighbor_weights define the sliding-window
    cost used by sw_dtw; with L=0 it degenerates to plain DTW. band is
    an optional Sakoe-Chiba halfwidth; it is widened to |N-M| when
    necessary so a path always exists.
    """

    step_weights: tuple = (1.0, 1.0, 1.0)
    window_halfwidth: int = 2
    neighbor_weights: tuple = None
    band: int = None

    def __post_init__(self):
        if len(self.step_weights) != 3 or any(w <= 0 for w in self.step_weights):
            raise InvalidInputError(f"step_weights must be 3 positive reals, got {self.step_weights}")
        if self.window_halfwidth < 0:
            raise InvalidInputError("window_halfwidth must be >= 0")
        if self.band is not None and self.band < 0:
            raise InvalidInputError("band must be >= 0 when given")
        if self.neighbor_weights is not None:
            w = np.asarray(self.neighbor_weights, dtype=np.float64)
            if len(w) != 2 * self.window_halfwidth + 1:
                raise InvalidInputError(
                    f"need {2 * self.window_halfwidth + 1} neighbor weights, got {len(w)}"
                )
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise InvalidInputError("neighbor_weights must be nonnegative and sum to 1")

    def window_weights(self) -> np.ndarray:
        if self.neighbor_weights is not None:
            return np.asarray(self.neighbor_weights, dtype=np.float64)
        return np.asarray(triangular_weights(self.window_halfwidth))


@dataclass
class AlignmentPath:
    """A warping path with its cost bookkeeping.

    pairs is a (K, 2) int array of 0-based (index into A, index into B)
    correspondences from (0, 0) to (N-1, M-1), each step one of the
    three allowed transitions. normalized_distance = accumulated /
    weight_sum where weight_sum adds the step weights along the path.
    """

    pairs: np.ndarray
    accumulated: float
    weight_sum: float
    normalized_distance: float = field(init=False)

    def __post_init__(self):
        self.normalized_distance = self.accumulated / self.weight_sum

    @property
    def K(self) -> int:
        return len(self.pairs)


def validate_path(path: AlignmentPath, n: int, m: int) -> None:
    """Check boundary, step, and normalization invariants; raise on violation."""
    p = path.pairs
    if tuple(p[0]) != (0, 0) or tuple(p[-1]) != (n - 1, m - 1):
        raise InvalidInputError(f"path must run (0,0)..({n - 1},{m - 1}), got {p[0]}..{p[-1]}")
    steps = np.diff(p, axis=0)
    legal = {(0, 1), (1, 1), (1, 0)}
    for s in steps:
        if tuple(s) not in legal:
            raise InvalidInputError(f"illegal path step {tuple(s)}")
    recomputed = path.accumulated / path.weight_sum
    if not np.isclose(path.normalized_distance, recomputed, rtol=0, atol=1e-12):
        raise InvalidInputError("normalized_distance inconsistent with accumulated/weight_sum")


def _solve(cost: np.ndarray, cfg: DtwConfig) -> AlignmentPath:
    """Run the DP recursion on a precomputed cost matrix and trace the path.

    Processes anti-diagonals so each wavefront is a vectorized min over
    the three predecessors; G carries the accumulated cost with an
    inf border standing in for out-of-range predecessors.
    """
    n, m = cost.shape
    w_diag, w_adv_a, w_adv_b = (float(w) for w in cfg.step_weights)

    band = cfg.band
    if band is not None:
        band = max(band, abs(n - m))

    G = np.full((n + 1, m + 1), np.inf)
    choices = np.full((n, m), 255, dtype=np.uint8)
    G[1, 1] = cost[0, 0]  # first step carries weight 1

    trans_w = np.array([w_diag, w_adv_a, w_adv_b])
    for s in range(1, n + m - 1):
        i = np.arange(max(0, s - m + 1), min(n - 1, s) + 1)
        j = s - i
        if band is not None:
            keep = np.abs(i - j) <= band
            i, j = i[keep], j[keep]
            if len(i) == 0:
                continue
        cand = np.stack([G[i, j], G[i, j + 1], G[i + 1, j]])
        cand += cost[i, j] * trans_w[:, None]
        pick = np.argmin(cand, axis=0)  # first minimum: diagonal-first tie-break
        best = cand[pick, np.arange(len(i))]
        # keep the seeded origin cell out of the update
        valid = (i > 0) | (j > 0)
        G[i[valid] + 1, j[valid] + 1] = best[valid]
        choices[i[valid], j[valid]] = pick[valid]

    accumulated = G[n, m]
    if not np.isfinite(accumulated):
        raise InvalidInputError("no feasible warping path (band too narrow)")

    # traceback
    pairs = [(n - 1, m - 1)]
    weight_sum = 1.0
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        c = choices[i, j]
        if c == _DIAG:
            weight_sum += w_diag
            i, j = i - 1, j - 1
        elif c == _ADV_A:
            weight_sum += w_adv_a
            i = i - 1
        else:
            weight_sum += w_adv_b
            j = j - 1
        pairs.append((i, j))
    pairs.reverse()

    path = AlignmentPath(
        pairs=np.array(pairs, dtype=np.int64),
        accumulated=float(accumulated),
        weight_sum=float(weight_sum),
    )
    validate_path(path, n, m)
    return path


def _as_channels(seq) -> np.ndarray:
    if isinstance(seq, TimeFunctionSet):
        return seq.channels
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[1] == 0 or b.shape[1] == 0:
        raise InvalidInputError("sequences must be non-empty")
    if a.shape[0] != b.shape[0]:
        raise InvalidInputError(f"channel count mismatch: {a.shape[0]} vs {b.shape[0]}")


def cost_matrix(a, b) -> np.ndarray:
    """Per-cell cost: squared difference, summed over channels.

    Differences are formed directly (not via a norm expansion) so that
    identical samples give an exact zero cell.
    """
    a = _as_channels(a)
    b = _as_channels(b)
    _check_pair(a, b)
    cost = np.zeros((a.shape[1], b.shape[1]))
    for ch_a, ch_b in zip(a, b):
        d = ch_a[:, None] - ch_b[None, :]
        cost += d * d
    return cost


def windowed_cost_matrix(cost: np.ndarray, halfwidth: int, weights: np.ndarray) -> np.ndarray:
    """Sliding-window cost: weighted average of neighboring cells along the
    diagonal offset, with indices clamped at the sequence edges."""
    if halfwidth == 0:
        return cost
    n, m = cost.shape
    out = np.zeros_like(cost)
    for w, off in zip(weights, range(-halfwidth, halfwidth + 1)):
        ia = np.clip(np.arange(n) + off, 0, n - 1)
        ib = np.clip(np.arange(m) + off, 0, m - 1)
        out += w * cost[np.ix_(ia, ib)]
    return out


def dtw(a, b, cfg: DtwConfig = None) -> AlignmentPath:
    """Plain DTW between two sequences (1-D arrays or channel matrices)."""
    cfg = cfg or DtwConfig()
    return _solve(cost_matrix(a, b), cfg)


def sw_dtw(a, b, cfg: DtwConfig = None) -> AlignmentPath:
    """Sliding-window DTW: same recursion as dtw on the windowed cost.

    With window_halfwidth 0 the result is identical to dtw."""
    cfg = cfg or DtwConfig()
    base = cost_matrix(a, b)
    cost = windowed_cost_matrix(base, cfg.window_halfwidth, cfg.window_weights())
    return _solve(cost, cfg)


def dtw_multichannel(a, b, cfg: DtwConfig = None) -> AlignmentPath:
    """One shared warping path over all channels, z-normalized per channel."""
    cfg = cfg or DtwConfig()
    return _solve(cost_matrix(_znorm(a), _znorm(b)), cfg)


def sw_dtw_multichannel(a, b, cfg: DtwConfig = None) -> AlignmentPath:
    """Sliding-window DTW over all channels, z-normalized per channel."""
    cfg = cfg or DtwConfig()
    base = cost_matrix(_znorm(a), _znorm(b))
    cost = windowed_cost_matrix(base, cfg.window_halfwidth, cfg.window_weights())
    return _solve(cost, cfg)


def _znorm(seq) -> np.ndarray:
    if isinstance(seq, TimeFunctionSet):
        return prepared_channels(seq)
    arr = _as_channels(seq)
    mean = arr.mean(axis=1, keepdims=True)
    std = np.maximum(arr.std(axis=1, keepdims=True), 1e-6)
    return (arr - mean) / std


def apply_path(a, b, path: AlignmentPath):
    """Gather both inputs along the path so each has length K.

    Accepts TimeFunctionSet or channel arrays and returns the same kind.
    Output step k holds A at path index n_k and B at path index m_k."""
    ia = path.pairs[:, 0]
    ib = path.pairs[:, 1]

    def gather(seq, idx):
        if isinstance(seq, TimeFunctionSet):
            if idx.max() >= seq.length:
                raise InvalidInputError("path index out of range for sequence")
            return TimeFunctionSet(
                channels=seq.channels[:, idx], timestamps=seq.timestamps[idx]
            )
        arr = _as_channels(seq)
        if idx.max() >= arr.shape[1]:
            raise InvalidInputError("path index out of range for sequence")
        return arr[:, idx]

    return gather(a, ia), gather(b, ib)
