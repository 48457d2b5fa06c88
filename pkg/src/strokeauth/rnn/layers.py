"""LSTM and bidirectional LSTM layers in plain numpy.

Forward and backward passes are hand-derived so gradients are exact for
the implemented graph (no autograd). Batches of unequal-length
sequences use a {0,1} mask with carry semantics: at masked steps the
hidden and cell states are carried through unchanged, so padded steps
contribute exactly zero to outputs and gradients.

Gate layout is packed as [input, forget, candidate, output] along the
last axis of the weight matrix W with shape (input_dim + hidden, 4 *
hidden); the step computes z = [x_t, h_prev] @ W + b.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmParams:
    """One direction's weights: W stacks input and recurrent maps."""

    W: np.ndarray  # (input_dim + hidden, 4 * hidden)
    b: np.ndarray  # (4 * hidden,)

    @property
    def hidden(self) -> int:
        return self.W.shape[1] // 4

    @property
    def input_dim(self) -> int:
        return self.W.shape[0] - self.hidden


def init_lstm(rng: np.random.Generator, input_dim: int, hidden: int, std: float) -> LstmParams:
    """Gaussian weights; zero bias except the forget gate, which starts
    at 1 so early training does not immediately flush the cell state."""
    W = rng.normal(0.0, std, size=(input_dim + hidden, 4 * hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return LstmParams(W=W, b=b)


def lstm_cell_step(params: LstmParams, x, h_prev, c_prev):
    """One gate update. Inputs may be single vectors or (B, ·) batches.

    Returns (h, c, gates) where gates packs the activated [i, f, g, o]
    values for callers that need them for backpropagation."""
    x = np.atleast_2d(x)
    h_prev = np.atleast_2d(h_prev)
    c_prev = np.atleast_2d(c_prev)
    H = params.hidden
    if x.shape[1] != params.input_dim or h_prev.shape[1] != H or c_prev.shape[1] != H:
        raise InvalidInputError(
            f"step dimensions (x {x.shape[1]}, h {h_prev.shape[1]}, c {c_prev.shape[1]}) "
            f"do not match parameters (D={params.input_dim}, H={H})"
        )
    z = np.concatenate([x, h_prev], axis=1) @ params.W + params.b
    i = sigmoid(z[:, :H])
    f = sigmoid(z[:, H : 2 * H])
    g = np.tanh(z[:, 2 * H : 3 * H])
    o = sigmoid(z[:, 3 * H :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, np.concatenate([i, f, g, o], axis=1)


@dataclass
class LstmCache:
    """Everything the backward pass needs from one forward run.

    h and c hold the carried states in processing order; gates holds the
    activated gate values [i, f, g, o] packed like the bias.
    """

    params: LstmParams
    x: np.ndarray      # (B, T, D)
    mask: np.ndarray   # (B, T)
    gates: np.ndarray  # (B, T, 4H) after activations
    ctil: np.ndarray   # (B, T, H) candidate cell before the carry
    c: np.ndarray      # (B, T, H) carried cell
    h: np.ndarray      # (B, T, H) carried hidden


def lstm_forward(params: LstmParams, x: np.ndarray, mask: np.ndarray) -> LstmCache:
    """Run the recurrence left to right over a padded batch."""
    B, T, D = x.shape
    H = params.hidden
    if D != params.input_dim:
        raise InvalidInputError(f"input width {D} does not match parameters ({params.input_dim})")
    if mask.shape != (B, T):
        raise InvalidInputError(f"mask shape {mask.shape} does not match input {(B, T)}")

    gates = np.empty((B, T, 4 * H))
    ctil = np.empty((B, T, H))
    c = np.empty((B, T, H))
    h = np.empty((B, T, H))

    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        ht, ct, g_t = lstm_cell_step(params, x[:, t], h_prev, c_prev)

        m = mask[:, t, None]
        c_prev = m * ct + (1.0 - m) * c_prev
        h_prev = m * ht + (1.0 - m) * h_prev

        gates[:, t] = g_t
        ctil[:, t] = ct
        c[:, t] = c_prev
        h[:, t] = h_prev

    return LstmCache(params=params, x=x, mask=mask, gates=gates, ctil=ctil, c=c, h=h)


def lstm_backward(cache: LstmCache, dh: np.ndarray):
    """Backpropagate through the recurrence.

    dh is the upstream gradient with respect to the carried hidden state
    at every step (callers fold output masking and any final-state reads
    into it). Returns (dx, dW, db).
    """
    params, x, mask = cache.params, cache.x, cache.mask
    B, T, D = x.shape
    H = params.hidden

    dW = np.zeros_like(params.W)
    db = np.zeros_like(params.b)
    dx = np.zeros_like(x)

    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        m = mask[:, t, None]
        g_all = cache.gates[:, t]
        i, f = g_all[:, :H], g_all[:, H : 2 * H]
        g, o = g_all[:, 2 * H : 3 * H], g_all[:, 3 * H :]
        c_prev = cache.c[:, t - 1] if t > 0 else np.zeros((B, H))
        h_prev = cache.h[:, t - 1] if t > 0 else np.zeros((B, H))

        dh_t = dh[:, t] + dh_next
        # carry split: masked steps pass gradients straight through
        dh_til = dh_t * m
        dh_carry = dh_t * (1.0 - m)
        dc_til = dc_next * m
        dc_carry = dc_next * (1.0 - m)

        tc = np.tanh(cache.ctil[:, t])
        do = dh_til * tc
        dc_til = dc_til + dh_til * o * (1.0 - tc * tc)

        df = dc_til * c_prev
        di = dc_til * g
        dg = dc_til * i
        dc_prev = dc_til * f + dc_carry

        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        u = np.concatenate([x[:, t], h_prev], axis=1)
        dW += u.T @ dz
        db += dz.sum(axis=0)
        du = dz @ params.W.T
        dx[:, t] = du[:, :D]

        dh_next = dh_carry + du[:, D:]
        dc_next = dc_prev

    return dx, dW, db


@dataclass
class BlstmParams:
    """Forward- and backward-direction weights of one bidirectional layer."""

    fwd: LstmParams
    bwd: LstmParams

    @property
    def hidden(self) -> int:
        return self.fwd.hidden


def init_blstm(rng: np.random.Generator, input_dim: int, hidden: int, std: float) -> BlstmParams:
    return BlstmParams(
        fwd=init_lstm(rng, input_dim, hidden, std),
        bwd=init_lstm(rng, input_dim, hidden, std),
    )


@dataclass
class BlstmCache:
    fwd: LstmCache
    bwd: LstmCache  # runs on the time-reversed batch
    mask: np.ndarray


def blstm_forward(params: BlstmParams, x: np.ndarray, mask: np.ndarray):
    """Bidirectional pass over a padded batch.

    Returns (out, final, cache): out is (B, T, 2H) with both directions'
    carried hiddens concatenated and zeroed at padded steps; final is
    (B, 2H) holding the states that have consumed the whole sequence —
    the forward state at the last step and the backward state at step 0.
    """
    if x.shape[1] == 0:
        raise InvalidInputError("empty sequence")
    f_cache = lstm_forward(params.fwd, x, mask)
    b_cache = lstm_forward(params.bwd, x[:, ::-1], mask[:, ::-1])
    h_b = b_cache.h[:, ::-1]  # original time order

    out = np.concatenate([f_cache.h, h_b], axis=2) * mask[:, :, None]
    final = np.concatenate([f_cache.h[:, -1], h_b[:, 0]], axis=1)
    return out, final, BlstmCache(fwd=f_cache, bwd=b_cache, mask=mask)


def blstm_backward(cache: BlstmCache, dout, dfinal):
    """Backward pass mirroring blstm_forward.

    dout (B, T, 2H) is the gradient of the masked per-step output and
    may be None; dfinal (B, 2H) is the gradient of the final-state read
    and may be None. Returns (dx, gradients-for-params as BlstmParams).
    """
    mask = cache.mask
    B, T = mask.shape
    H = cache.fwd.params.hidden

    dh_f = np.zeros((B, T, H))
    dh_b = np.zeros((B, T, H))  # original time order
    if dout is not None:
        dh_f += dout[:, :, :H] * mask[:, :, None]
        dh_b += dout[:, :, H:] * mask[:, :, None]
    if dfinal is not None:
        dh_f[:, -1] += dfinal[:, :H]
        dh_b[:, 0] += dfinal[:, H:]

    dx_f, dW_f, db_f = lstm_backward(cache.fwd, dh_f)
    dx_b_rev, dW_b, db_b = lstm_backward(cache.bwd, dh_b[:, ::-1])
    dx = dx_f + dx_b_rev[:, ::-1]
    grads = BlstmParams(fwd=LstmParams(W=dW_f, b=db_f), bwd=LstmParams(W=dW_b, b=db_b))
    return dx, grads
