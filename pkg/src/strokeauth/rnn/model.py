"""Siamese bidirectional-LSTM pair scorer.

Two equal-length input sequences pass through one shared branch layer;
the branch outputs are concatenated step by step, then refined by a
merge layer and a top layer, and a sigmoid head turns the top layer's
final states into a similarity score in (0,1). Higher means "same
writer". One writer-independent model serves every user and character.
"""

import json
import zipfile
from dataclasses import dataclass

import numpy as np

from ..errors import CheckpointError, InvalidInputError
from ..features import TimeFunctionSet
from .layers import (
    BlstmParams,
    LstmParams,
    blstm_backward,
    blstm_forward,
    init_blstm,
    sigmoid,
)

CHECKPOINT_FORMAT = 1

# Scores are clipped this far away from {0,1} so log-loss stays finite
# and the (0,1) range contract is strict.
SCORE_EPS = 1e-12


def _as_channel_array(seq) -> np.ndarray:
    if isinstance(seq, TimeFunctionSet):
        return seq.channels
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"expected (channels, length) array, got shape {arr.shape}")
    return arr


@dataclass
class PairExample:
    """A pair of equal-length channel sequences plus a genuine/impostor label."""

    a: np.ndarray  # (channels, K)
    b: np.ndarray  # (channels, K)
    label: int

    def __post_init__(self):
        self.a = _as_channel_array(self.a)
        self.b = _as_channel_array(self.b)
        if self.a.shape != self.b.shape:
            raise InvalidInputError(
                f"pair members must have equal shape, got {self.a.shape} vs {self.b.shape}"
            )
        if self.a.shape[1] < 1:
            raise InvalidInputError("pair sequences must be non-empty")
        if self.label not in (0, 1):
            raise InvalidInputError(f"label must be 0 or 1, got {self.label}")

    @property
    def length(self) -> int:
        return self.a.shape[1]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture sizes and the initialization seed.

    Defaults are the full-size scorer (42/84/168 blocks per direction);
    tests and the synthetic benchmarks shrink them for speed.
    """

    input_width: int = 21
    branch_blocks: int = 42
    merge_blocks: int = 84
    top_blocks: int = 168
    init_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.input_width, self.branch_blocks, self.merge_blocks, self.top_blocks) < 1:
            raise InvalidInputError("all widths must be >= 1")
        if self.init_std <= 0:
            raise InvalidInputError("init_std must be > 0")


class SiameseModel:
    """Holds the parameters and implements forward/backward for batches."""

    def __init__(self, config: ModelConfig = ModelConfig()):
        self.config = config
        rng = np.random.default_rng(config.seed)
        std = config.init_std
        # one branch layer only: both pair members go through these weights
        self.branch = init_blstm(rng, config.input_width, config.branch_blocks, std)
        self.merge = init_blstm(rng, 4 * config.branch_blocks, config.merge_blocks, std)
        self.top = init_blstm(rng, 2 * config.merge_blocks, config.top_blocks, std)
        self.head_w = rng.normal(0.0, std, size=2 * config.top_blocks)
        self.head_b = np.zeros(1)

    # -- parameter registry -------------------------------------------------

    def parameters(self):
        """Ordered (name, array) pairs; arrays are the live tensors."""
        out = []
        for layer_name in ("branch", "merge", "top"):
            layer: BlstmParams = getattr(self, layer_name)
            for direction in ("fwd", "bwd"):
                p: LstmParams = getattr(layer, direction)
                out.append((f"{layer_name}.{direction}.W", p.W))
                out.append((f"{layer_name}.{direction}.b", p.b))
        out.append(("head.w", self.head_w))
        out.append(("head.b", self.head_b))
        return out

    def set_parameters(self, values: dict):
        for name, arr in self.parameters():
            if name not in values:
                raise InvalidInputError(f"missing parameter {name}")
            if values[name].shape != arr.shape:
                raise InvalidInputError(
                    f"parameter {name}: shape {values[name].shape} != {arr.shape}"
                )
            arr[...] = values[name]

    def copy_parameters(self) -> dict:
        return {name: arr.copy() for name, arr in self.parameters()}

    # -- forward ------------------------------------------------------------

    def _check_batch_shapes(self, xa, xb, mask):
        if xa.shape != xb.shape:
            raise InvalidInputError(f"pair batches differ: {xa.shape} vs {xb.shape}")
        if xa.shape[2] != self.config.input_width:
            raise InvalidInputError(
                f"input width {xa.shape[2]} != configured {self.config.input_width}"
            )
        if mask.shape != xa.shape[:2]:
            raise InvalidInputError("mask shape mismatch")

    def forward_batch(self, xa, xb, mask, want_caches: bool = False):
        """Scores for padded batches xa, xb of shape (B, T, channels).

        Returns (scores, logits) or (scores, logits, caches)."""
        self._check_batch_shapes(xa, xb, mask)
        out_a, _, cache_a = blstm_forward(self.branch, xa, mask)
        out_b, _, cache_b = blstm_forward(self.branch, xb, mask)
        paired = np.concatenate([out_a, out_b], axis=2)
        out_m, _, cache_m = blstm_forward(self.merge, paired, mask)
        _, final, cache_t = blstm_forward(self.top, out_m, mask)
        logits = final @ self.head_w + self.head_b[0]
        scores = np.clip(sigmoid(logits), SCORE_EPS, 1.0 - SCORE_EPS)
        if want_caches:
            return scores, logits, (cache_a, cache_b, cache_m, cache_t, final)
        return scores, logits

    def score_pair(self, pair: PairExample) -> float:
        xa = pair.a.T[None, :, :]
        xb = pair.b.T[None, :, :]
        mask = np.ones((1, pair.length))
        scores, _ = self.forward_batch(xa, xb, mask)
        return float(scores[0])

    def score_examples(self, pairs, batch_size: int = 64) -> np.ndarray:
        """Scores for many pair examples, original order preserved.

        Examples are grouped by similar length before padding so one
        outlier sequence cannot inflate every batch."""
        if batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        pairs = list(pairs)
        order = sorted(range(len(pairs)), key=lambda k: pairs[k].length)
        scores = np.empty(len(pairs))
        for start in range(0, len(order), batch_size):
            chunk = order[start : start + batch_size]
            xa, xb, mask, _ = batch_from_pairs([pairs[k] for k in chunk])
            chunk_scores, _ = self.forward_batch(xa, xb, mask)
            scores[chunk] = chunk_scores
        return scores

    # -- persistence --------------------------------------------------------

    def save(self, path):
        payload = {f"param/{name}": arr for name, arr in self.parameters()}
        payload["format_version"] = np.array(CHECKPOINT_FORMAT)
        payload["config_json"] = np.frombuffer(
            json.dumps(self.config.__dict__, sort_keys=True).encode(), dtype=np.uint8
        )
        with open(path, "wb") as fh:
            np.savez(fh, **payload)

    @classmethod
    def load(cls, path) -> "SiameseModel":
        try:
            with np.load(path, allow_pickle=False) as data:
                if "format_version" not in data:
                    raise CheckpointError(f"{path}: not a model checkpoint")
                version = int(data["format_version"])
                if version != CHECKPOINT_FORMAT:
                    raise CheckpointError(
                        f"{path}: format version {version} unsupported (expected {CHECKPOINT_FORMAT})"
                    )
                cfg = ModelConfig(**json.loads(bytes(data["config_json"]).decode()))
                model = cls(cfg)
                values = {
                    name[len("param/") :]: data[name]
                    for name in data.files
                    if name.startswith("param/")
                }
                model.set_parameters(values)
                return model
        except (OSError, ValueError, KeyError, zipfile.BadZipFile, InvalidInputError) as exc:
            raise CheckpointError(f"cannot load checkpoint {path}: {exc}") from exc


def batch_from_pairs(pairs) -> tuple:
    """Pad a list of PairExample to common length.

    Returns (xa, xb, mask, labels): inputs are (B, T, channels) with
    zeros past each pair's true length, mask marks the valid steps."""
    if not pairs:
        raise InvalidInputError("empty batch")
    B = len(pairs)
    T = max(p.length for p in pairs)
    C = pairs[0].a.shape[0]
    xa = np.zeros((B, T, C))
    xb = np.zeros((B, T, C))
    mask = np.zeros((B, T))
    labels = np.empty(B)
    for k, p in enumerate(pairs):
        if p.a.shape[0] != C:
            raise InvalidInputError("channel count differs within batch")
        xa[k, : p.length] = p.a.T
        xb[k, : p.length] = p.b.T
        mask[k, : p.length] = 1.0
        labels[k] = p.label
    return xa, xb, mask, labels


def bce_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy computed from logits (stable form)."""
    per = np.maximum(logits, 0.0) - labels * logits + np.log1p(np.exp(-np.abs(logits)))
    return float(per.mean())


def loss_and_gradients(model: SiameseModel, pairs) -> tuple:
    """Mean BCE over the batch and its exact gradient for every parameter.

    Returns (loss, grads) with grads keyed like model.parameters()."""
    xa, xb, mask, labels = batch_from_pairs(pairs)
    _, logits, (cache_a, cache_b, cache_m, cache_t, final) = model.forward_batch(
        xa, xb, mask, want_caches=True
    )
    loss = bce_loss(logits, labels)

    B = len(pairs)
    dlogits = (sigmoid(logits) - labels) / B

    grads = {name: np.zeros_like(arr) for name, arr in model.parameters()}
    grads["head.w"] = final.T @ dlogits
    grads["head.b"] = np.array([dlogits.sum()])

    dfinal = dlogits[:, None] * model.head_w[None, :]
    dout_m, g_top = blstm_backward(cache_t, None, dfinal)
    dpaired, g_merge = blstm_backward(cache_m, dout_m, None)

    H2 = 2 * model.config.branch_blocks
    _, g_branch_a = blstm_backward(cache_a, dpaired[:, :, :H2], None)
    _, g_branch_b = blstm_backward(cache_b, dpaired[:, :, H2:], None)

    for layer_name, g in (("top", g_top), ("merge", g_merge)):
        for direction in ("fwd", "bwd"):
            p = getattr(g, direction)
            grads[f"{layer_name}.{direction}.W"] = p.W
            grads[f"{layer_name}.{direction}.b"] = p.b
    # shared branch weights: both applications contribute
    for direction in ("fwd", "bwd"):
        pa = getattr(g_branch_a, direction)
        pb = getattr(g_branch_b, direction)
        grads[f"branch.{direction}.W"] = pa.W + pb.W
        grads[f"branch.{direction}.b"] = pa.b + pb.b

    return loss, grads
