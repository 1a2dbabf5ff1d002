"""From-scratch bidirectional LSTM regression from melodies to mean scores.

Tokens are one-hot encoded (dimension V = alphabet size).  One LSTM cell
reads the melody left to right, an independent cell reads it right to left,
and the two final hidden states are concatenated (2H) and mapped affinely to
a scalar.  A sigmoid squashes that scalar and the result is scaled by 100,
so predictions always land strictly inside (0, 100).

Per cell and step t (x the one-hot input, h/c the recurrent state, [.;.]
concatenation, * elementwise):

    i = sigmoid(Wi [x; h] + bi)        input gate
    f = sigmoid(Wf [x; h] + bf)        forget gate
    o = sigmoid(Wo [x; h] + bo)        output gate
    g = tanh   (Wg [x; h] + bg)        candidate
    c = f * c_prev + i * g
    h = o * tanh(c)

Training is plain full-batch gradient descent on the mean squared error,
with backpropagation through time over both directions and global
gradient-norm clipping.  Targets are scaled to [0, 1] internally; reported
losses and the gradients returned by :func:`loss_and_gradients` are in
score units squared (i.e. of ``mean((prediction - target)^2)`` with both in
[0, 100]), so the pair is directly checkable by finite differences.

The hot paths run all four gates as one stacked matrix product per step, so
whole-batch epochs stay cheap; the per-gate weight matrices on the model are
the single source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .abc import Token, tokenize
from .ga import Melody

GATES = ("i", "f", "o", "g")

INIT_SCALE = 0.08      # uniform init range for all weights
FORGET_BIAS = 1.0      # forget gates start open
_SCORE_SCALE = 100.0


class UnknownToken(KeyError):
    """Melody contains a token outside the model's alphabet."""


class DivergenceDetected(RuntimeError):
    """Training loss became non-finite; lower the learning rate."""


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 5000
    learning_rate: float = 0.01
    clip_norm: float = 5.0
    optimizer: str = "adam"       # or "gd" (plain gradient descent)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError("optimizer must be 'adam' or 'gd'")


@dataclass
class LstmCell:
    """One direction's parameters: per-gate weights (H x (V+H)) and biases (H,)."""

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """(4H, V+H) weight stack and (4H,) bias stack, gate order i,f,o,g."""
        return (np.concatenate([self.w_i, self.w_f, self.w_o, self.w_g], axis=0),
                np.concatenate([self.b_i, self.b_f, self.b_o, self.b_g]))

    def copy(self) -> "LstmCell":
        return LstmCell(*(getattr(self, f"w_{g}").copy() for g in GATES),
                        *(getattr(self, f"b_{g}").copy() for g in GATES))


@dataclass(eq=False)
class SurrogateModel:
    token_alphabet: tuple[Token, ...]
    hidden_size: int
    forward_cell: LstmCell
    backward_cell: LstmCell
    output_weights: np.ndarray    # (2H,)
    output_bias: np.ndarray       # (1,)
    _index: dict[Token, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {tok: i for i, tok in enumerate(self.token_alphabet)}

    @property
    def input_size(self) -> int:
        return len(self.token_alphabet)

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays in a fixed order (update targets)."""
        params: dict[str, np.ndarray] = {}
        for prefix, cell in (("fwd", self.forward_cell), ("bwd", self.backward_cell)):
            for g in GATES:
                params[f"{prefix}.w_{g}"] = getattr(cell, f"w_{g}")
                params[f"{prefix}.b_{g}"] = getattr(cell, f"b_{g}")
        params["out.w"] = self.output_weights
        params["out.b"] = self.output_bias
        return params

    def copy(self) -> "SurrogateModel":
        return SurrogateModel(self.token_alphabet, self.hidden_size,
                              self.forward_cell.copy(), self.backward_cell.copy(),
                              self.output_weights.copy(), self.output_bias.copy())

    def encode(self, melody: Melody) -> np.ndarray:
        """Melody as an int index vector; raises UnknownToken on OOV."""
        if not melody:
            raise ValueError("cannot encode an empty melody")
        try:
            return np.array([self._index[tok] for tok in melody], dtype=np.int64)
        except KeyError as exc:
            raise UnknownToken(f"token {exc.args[0]} not in model alphabet") from exc


def initialize_model(token_alphabet, hidden_size: int = 50, seed: int = 0,
                     dtype=np.float64) -> SurrogateModel:
    """All weights uniform in [-0.08, 0.08]; forget-gate biases start at 1.

    ``dtype`` selects the parameter precision; float32 roughly halves
    training cost when full float64 accuracy is not needed.
    """
    alphabet = tuple(token_alphabet)
    if not alphabet:
        raise ValueError("alphabet must be non-empty")
    v, h = len(alphabet), hidden_size
    rng = np.random.default_rng(seed)

    def cell() -> LstmCell:
        ws = [rng.uniform(-INIT_SCALE, INIT_SCALE, size=(h, v + h)).astype(dtype)
              for _ in GATES]
        bs = [np.zeros(h, dtype=dtype) for _ in GATES]
        bs[1][:] = FORGET_BIAS
        return LstmCell(*ws, *bs)

    return SurrogateModel(
        token_alphabet=alphabet,
        hidden_size=h,
        forward_cell=cell(),
        backward_cell=cell(),
        output_weights=rng.uniform(-INIT_SCALE, INIT_SCALE,
                                   size=2 * h).astype(dtype),
        output_bias=np.zeros(1, dtype=dtype),
    )


def _sigmoid(x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """1 / (1 + exp(-x)), in place when ``out`` is given.

    exp overflows for very negative inputs and saturates the result to
    exactly 0.0, which is the correct limit, so that warning is suppressed.
    """
    out = np.negative(x, out=out)
    with np.errstate(over="ignore"):
        np.exp(out, out=out)
    out += 1.0
    return np.reciprocal(out, out=out)


@dataclass
class _DirCache:
    """Per-direction forward activations kept for backpropagation.

    Everything is laid out batch-last, (.., H, B), so that each gate block is
    a contiguous row range and every elementwise kernel runs vectorized.
    """

    x_idx: np.ndarray       # (B, T)
    h_prev: np.ndarray      # (T, H, B) hidden state entering each step
    gates: np.ndarray       # (T, 4H, B) post-activation i,f,o,g
    c_prev: np.ndarray      # (T, H, B)
    tanh_c: np.ndarray      # (T, H, B)
    w_h: np.ndarray         # (4H, H) stacked recurrent weights used


def _run_direction(cell: LstmCell, x_idx: np.ndarray, v: int,
                   keep_cache: bool) -> tuple[np.ndarray, _DirCache | None]:
    """Run one cell over a batch of index sequences; returns the final hidden
    state (H, B) and, optionally, the activation cache.

    The loop works on preallocated batch-last buffers with in-place ufuncs:
    this is the innermost cost of both training and phase-3 evaluation.
    """
    b, t_len = x_idx.shape
    h_size = cell.b_i.shape[0]
    w, bias = cell.stacked()
    dtype = w.dtype
    w_x = np.ascontiguousarray(w[:, :v])
    w_h = np.ascontiguousarray(w[:, v:])
    bias_col = bias[:, None]

    h = np.zeros((h_size, b), dtype=dtype)
    c = np.zeros((h_size, b), dtype=dtype)
    a = np.empty((4 * h_size, b), dtype=dtype)
    tmp = np.empty((h_size, b), dtype=dtype)
    cache = None
    if keep_cache:
        cache = _DirCache(
            x_idx=x_idx,
            h_prev=np.empty((t_len, h_size, b), dtype=dtype),
            gates=np.empty((t_len, 4 * h_size, b), dtype=dtype),
            c_prev=np.empty((t_len, h_size, b), dtype=dtype),
            tanh_c=np.empty((t_len, h_size, b), dtype=dtype),
            w_h=w_h,
        )
        scratch_gates = None
        scratch_tanh = None
    else:
        scratch_gates = np.empty((4 * h_size, b), dtype=dtype)
        scratch_tanh = np.empty((h_size, b), dtype=dtype)
    for t in range(t_len):
        np.dot(w_h, h, out=a)
        a += w_x[:, x_idx[:, t]]      # one-hot input contribution
        a += bias_col
        gates = cache.gates[t] if cache is not None else scratch_gates
        _sigmoid(a[:3 * h_size], out=gates[:3 * h_size])
        np.tanh(a[3 * h_size:], out=gates[3 * h_size:])
        i_g = gates[:h_size]
        f_g = gates[h_size:2 * h_size]
        o_g = gates[2 * h_size:3 * h_size]
        g_g = gates[3 * h_size:]
        if cache is not None:
            cache.h_prev[t] = h
            cache.c_prev[t] = c
        c *= f_g                      # previous c is already cached
        np.multiply(i_g, g_g, out=tmp)
        c += tmp
        tanh_c = cache.tanh_c[t] if cache is not None else scratch_tanh
        np.tanh(c, out=tanh_c)
        np.multiply(o_g, tanh_c, out=h)   # previous h is already cached
    return h, cache


def _direction_backward(cache: _DirCache, dh_final: np.ndarray,
                        v: int) -> tuple[np.ndarray, np.ndarray]:
    """BPTT through one direction.  Returns (dW (4H, V+H), db (4H,)) for the
    cell, given the loss gradient at its final hidden state (H, B).

    Weight gradients accumulate step by step as small matrix products; the
    one-hot input structure turns the input-weight gradient into a
    column-indexed GEMM against the per-step one-hot matrix.
    """
    t_len, h_size, b = cache.h_prev.shape
    dtype = cache.h_prev.dtype
    da = np.empty((4 * h_size, b), dtype=dtype)
    dh = dh_final.astype(dtype, copy=True)
    dh_next = np.empty((h_size, b), dtype=dtype)
    dc = np.zeros((h_size, b), dtype=dtype)
    tmp = np.empty((h_size, b), dtype=dtype)
    tmp2 = np.empty((h_size, b), dtype=dtype)
    dw_x = np.zeros((4 * h_size, v), dtype=dtype)
    dw_h = np.zeros((4 * h_size, h_size), dtype=dtype)
    db = np.zeros(4 * h_size, dtype=dtype)
    one_hot = np.empty((b, v), dtype=dtype)
    rows = np.arange(b)
    for t in range(t_len - 1, -1, -1):
        gates = cache.gates[t]
        i_g = gates[:h_size]
        f_g = gates[h_size:2 * h_size]
        o_g = gates[2 * h_size:3 * h_size]
        g_g = gates[3 * h_size:]
        tanh_c = cache.tanh_c[t]
        # dc += dh * o * (1 - tanh(c)^2)
        np.multiply(tanh_c, tanh_c, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        np.multiply(dh, o_g, out=tmp2)
        tmp2 *= tmp
        dc += tmp2
        # output gate: da_o = dh * tanh(c) * o * (1 - o)
        d_o = da[2 * h_size:3 * h_size]
        np.multiply(dh, tanh_c, out=d_o)
        d_o *= o_g
        np.subtract(1.0, o_g, out=tmp)
        d_o *= tmp
        # input gate: da_i = dc * g * i * (1 - i)
        d_i = da[:h_size]
        np.multiply(dc, g_g, out=d_i)
        d_i *= i_g
        np.subtract(1.0, i_g, out=tmp)
        d_i *= tmp
        # forget gate: da_f = dc * c_prev * f * (1 - f)
        d_f = da[h_size:2 * h_size]
        np.multiply(dc, cache.c_prev[t], out=d_f)
        d_f *= f_g
        np.subtract(1.0, f_g, out=tmp)
        d_f *= tmp
        # candidate: da_g = dc * i * (1 - g^2)
        d_g = da[3 * h_size:]
        np.multiply(g_g, g_g, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        np.multiply(dc, i_g, out=d_g)
        d_g *= tmp
        # parameter gradients for this step
        one_hot[:] = 0.0
        one_hot[rows, cache.x_idx[:, t]] = 1.0
        dw_x += da @ one_hot
        dw_h += da @ cache.h_prev[t].T
        db += da.sum(axis=1)
        # recurrent flows
        np.dot(cache.w_h.T, da, out=dh_next)
        dh, dh_next = dh_next, dh
        dc *= f_g
    return np.concatenate([dw_x, dw_h], axis=1), db


def _predict_encoded(model: SurrogateModel, x_idx: np.ndarray,
                     keep_cache: bool = False):
    """Sigmoid-squashed network output in [0, 1] for a batch (B, T)."""
    v = model.input_size
    h_fwd, cache_f = _run_direction(model.forward_cell, x_idx, v, keep_cache)
    h_bwd, cache_b = _run_direction(model.backward_cell, x_idx[:, ::-1], v, keep_cache)
    h_cat = np.concatenate([h_fwd, h_bwd], axis=0)      # (2H, B)
    y = model.output_weights @ h_cat + model.output_bias[0]
    return _sigmoid(y), h_cat, cache_f, cache_b


def forward(model: SurrogateModel, melody: Melody) -> float:
    """Predicted mean score in (0, 100) for one melody."""
    x_idx = model.encode(melody)[None, :]
    p, _, _, _ = _predict_encoded(model, x_idx)
    return float(_SCORE_SCALE * p[0])


def forward_batch(model: SurrogateModel, melodies) -> np.ndarray:
    """Predicted scores for equal-length melodies, as one batched pass."""
    x_idx = np.stack([model.encode(m) for m in melodies])
    p, _, _, _ = _predict_encoded(model, x_idx)
    return _SCORE_SCALE * p


def _split_gate_grads(prefix: str, dw: np.ndarray, db: np.ndarray,
                      h_size: int, out: dict[str, np.ndarray]) -> None:
    for k, g in enumerate(GATES):
        rows = slice(k * h_size, (k + 1) * h_size)
        out[f"{prefix}.w_{g}"] += dw[rows]
        out[f"{prefix}.b_{g}"] += db[rows]


def _loss_and_grads_normalized(model: SurrogateModel, encoded):
    """MSE on the [0, 1] scale plus gradients, over batches grouped by
    melody length so mixed-length inputs still form one consistent average."""
    total = sum(len(group_x) for group_x, _ in encoded)
    grads = {name: np.zeros_like(arr) for name, arr in model.parameters().items()}
    h_size = model.hidden_size
    v = model.input_size
    loss = 0.0
    for x_idx, t01 in encoded:
        p, h_cat, cache_f, cache_b = _predict_encoded(model, x_idx, keep_cache=True)
        resid = p - t01
        loss += float(resid @ resid)
        dy = (2.0 / total) * resid * p * (1.0 - p)      # (B,)
        grads["out.w"] += h_cat @ dy
        grads["out.b"] += np.array([dy.sum()])
        dh_cat = np.outer(model.output_weights, dy)     # (2H, B)
        dw_f, db_f = _direction_backward(cache_f, dh_cat[:h_size], v)
        dw_b, db_b = _direction_backward(cache_b, dh_cat[h_size:], v)
        _split_gate_grads("fwd", dw_f, db_f, h_size, grads)
        _split_gate_grads("bwd", dw_b, db_b, h_size, grads)
    return loss / total, grads


def _encode_batches(model: SurrogateModel, batch):
    """Group (melody, target) pairs by length into encoded index batches."""
    dtype = model.output_weights.dtype
    by_len: dict[int, tuple[list, list]] = {}
    for melody, target in batch:
        mels, targs = by_len.setdefault(len(melody), ([], []))
        mels.append(model.encode(melody))
        targs.append(float(target) / _SCORE_SCALE)
    return [(np.stack(mels), np.array(targs, dtype=dtype))
            for mels, targs in by_len.values()]


def loss_and_gradients(model: SurrogateModel, batch):
    """Mean squared error of the batch, in score units squared, together
    with the gradients of exactly that quantity (finite-difference
    checkable).  ``batch`` is a sequence of (melody, target score) pairs."""
    if not batch:
        raise ValueError("batch must be non-empty")
    encoded = _encode_batches(model, batch)
    loss01, grads = _loss_and_grads_normalized(model, encoded)
    scale = _SCORE_SCALE ** 2
    return scale * loss01, {name: scale * g for name, g in grads.items()}


def evaluate_mse(model: SurrogateModel, batch) -> float:
    """Mean squared prediction error over ``batch``, in score units squared."""
    if not batch:
        raise ValueError("batch must be non-empty")
    total = 0.0
    for x_idx, t01 in _encode_batches(model, batch):
        p, _, _, _ = _predict_encoded(model, x_idx)
        resid = p - t01
        total += float(resid @ resid)
    return _SCORE_SCALE ** 2 * total / len(batch)


def train(model: SurrogateModel, data, config: TrainConfig):
    """Full-batch training for ``config.epochs`` steps.

    The update rule is Adam by default (plain gradient descent cannot fit
    this regression at practical epoch counts; ``optimizer="gd"`` keeps it
    available).  Gradients are globally norm-clipped first.  Returns
    (trained model, per-epoch mse trace in score units squared); the input
    model is left untouched.  Raises :class:`DivergenceDetected` as soon as
    the loss stops being finite.
    """
    if not data:
        raise ValueError("training data must be non-empty")
    model = model.copy()
    encoded = _encode_batches(model, data)
    params = model.parameters()
    adam_m = {name: np.zeros_like(arr) for name, arr in params.items()}
    adam_v = {name: np.zeros_like(arr) for name, arr in params.items()}
    trace: list[float] = []
    for epoch in range(config.epochs):
        loss01, grads = _loss_and_grads_normalized(model, encoded)
        mse = _SCORE_SCALE ** 2 * loss01
        if not np.isfinite(mse):
            raise DivergenceDetected(f"mse became non-finite at epoch {epoch}")
        trace.append(mse)
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if norm > config.clip_norm:
            scale = config.clip_norm / norm
            for g in grads.values():
                g *= scale
        if config.optimizer == "adam":
            t = epoch + 1
            correction = (np.sqrt(1.0 - ADAM_BETA2 ** t) / (1.0 - ADAM_BETA1 ** t))
            for name, arr in params.items():
                g = grads[name]
                m = adam_m[name]
                v = adam_v[name]
                m *= ADAM_BETA1
                m += (1.0 - ADAM_BETA1) * g
                v *= ADAM_BETA2
                v += (1.0 - ADAM_BETA2) * g * g
                arr -= (config.learning_rate * correction
                        * m / (np.sqrt(v) + ADAM_EPS))
        else:
            for name, arr in params.items():
                arr -= config.learning_rate * grads[name]
    return model, trace


def as_fitness(model: SurrogateModel):
    """A pure melody -> predicted-score callable around an immutable model."""
    def predict(melody: Melody) -> float:
        return forward(model, melody)
    return predict


# -- serialization ------------------------------------------------------

_FORMAT_VERSION = 1


def save_model(model: SurrogateModel, path) -> None:
    """Write the model as an .npz archive: version, hidden size, alphabet
    (token texts), then every parameter array under its parameters() name."""
    arrays = {name.replace(".", "__"): arr for name, arr in model.parameters().items()}
    np.savez(path,
             version=np.array(_FORMAT_VERSION),
             hidden_size=np.array(model.hidden_size),
             alphabet=np.array([tok.text for tok in model.token_alphabet]),
             **arrays)


def load_model(path) -> SurrogateModel:
    """Read a model written by :func:`save_model`; forward outputs are
    reproduced bit-exactly."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        alphabet = tuple(tokenize(text)[0] for text in data["alphabet"])
        h_size = int(data["hidden_size"])
        fields = {name: data[name.replace(".", "__")].copy()
                  for name in _parameter_names()}
    def cell(prefix: str) -> LstmCell:
        return LstmCell(*(fields[f"{prefix}.w_{g}"] for g in GATES),
                        *(fields[f"{prefix}.b_{g}"] for g in GATES))
    return SurrogateModel(token_alphabet=alphabet, hidden_size=h_size,
                          forward_cell=cell("fwd"), backward_cell=cell("bwd"),
                          output_weights=fields["out.w"],
                          output_bias=fields["out.b"])


def _parameter_names() -> list[str]:
    names = [f"{prefix}.{kind}_{g}"
             for prefix in ("fwd", "bwd") for g in GATES for kind in ("w", "b")]
    names += ["out.w", "out.b"]
    return names
