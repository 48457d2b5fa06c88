"""Training loop: Adam over mean binary cross-entropy, with validation
tracking, early stopping, and a reproducible shuffle."""

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, TrainingDivergedError
from .model import SiameseModel, batch_from_pairs, bce_loss, loss_and_gradients


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    batch_size: int = 32
    epochs: int = 200
    early_stop_patience: int = 20
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InvalidInputError("learning_rate must be >= 0")
        if self.weight_decay < 0:
            raise InvalidInputError("weight_decay must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidInputError("batch_size must be >= 1 and epochs >= 0")


class AdamState:
    """First/second moment accumulators for one set of named tensors."""

    def __init__(self, params):
        self.step = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params}
        self.v = {name: np.zeros_like(arr) for name, arr in params}

    def update(self, params, grads, cfg: TrainConfig):
        self.step += 1
        b1, b2 = cfg.beta1, cfg.beta2
        bias1 = 1.0 - b1**self.step
        bias2 = 1.0 - b2**self.step
        for name, arr in params:
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * (g * g)
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            step = m_hat / (np.sqrt(v_hat) + cfg.eps)
            if cfg.weight_decay and not name.endswith(".b"):
                # decoupled decay: shrink weights directly instead of
                # folding the penalty into the loss gradient; biases stay
                # unregularized
                step = step + cfg.weight_decay * arr
            arr -= cfg.learning_rate * step


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float


@dataclass
class TrainResult:
    model: SiameseModel
    log: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    stopped_early: bool = False


def make_batches(pairs, batch_size: int, rng: np.random.Generator):
    """Shuffle, then group examples of similar length together.

    The stable sort keeps the shuffled order within each length, so
    batches differ between epochs while padding stays minimal."""
    order = rng.permutation(len(pairs))
    by_len = sorted(order, key=lambda k: pairs[k].length)
    return [
        [pairs[k] for k in by_len[i : i + batch_size]]
        for i in range(0, len(by_len), batch_size)
    ]


def evaluate_loss(model: SiameseModel, pairs, batch_size: int = 64) -> float:
    """Mean BCE over a pair list, batched for speed, exact over the whole set."""
    if not pairs:
        raise InvalidInputError("no pairs to evaluate")
    ordered = sorted(pairs, key=lambda p: p.length)
    total = 0.0
    for i in range(0, len(ordered), batch_size):
        chunk = ordered[i : i + batch_size]
        xa, xb, mask, labels = batch_from_pairs(chunk)
        _, logits = model.forward_batch(xa, xb, mask)
        total += bce_loss(logits, labels) * len(chunk)
    return total / len(ordered)


def train(model: SiameseModel, train_pairs, val_pairs, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Optimize in place; return the best-validation parameters.

    The model ends up holding the parameters of the epoch with the
    lowest validation loss, not the last epoch's."""
    if not train_pairs or not val_pairs:
        raise InvalidInputError("need non-empty train and validation pair lists")

    rng = np.random.default_rng(cfg.shuffle_seed)
    adam = AdamState(model.parameters())
    result = TrainResult(model=model)
    best_params = model.copy_parameters()
    since_best = 0

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        batches = make_batches(train_pairs, cfg.batch_size, rng)
        running = 0.0
        for batch in batches:
            loss, grads = loss_and_gradients(model, batch)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, "
                    f"batch of {len(batch)} (lr={cfg.learning_rate})"
                )
            adam.update(model.parameters(), grads, cfg)
            running += loss * len(batch)
        train_loss = running / len(train_pairs)
        val_loss = evaluate_loss(model, val_pairs)
        result.log.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val_loss,
                seconds=time.perf_counter() - t0,
            )
        )

        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best_params = model.copy_parameters()
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.early_stop_patience:
                result.stopped_early = True
                break

    model.set_parameters(best_params)
    return result
