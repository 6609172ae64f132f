"""The attention sequence model and its baselines.

Four variants share one forward/backward implementation:

* ``retainex``          -- dual embeddings, two bidirectional GRUs, scalar
                           alpha and vector beta attention, three day-interval
                           features appended to the attention-side embedding.
* ``retainex_no_time``  -- same, without the interval features.
* ``retain``            -- single shared embedding, both GRUs unidirectional
                           over the reversed sequence, no interval features.
* ``gru``               -- plain GRU, prediction from the final hidden state.

The context vector is o = sum_t alpha_t * (beta_t ⊙ v^b_t), the score
s = w_out . o, and the prediction sigmoid(s). Because neither the output
layer nor the embeddings carry a bias, s decomposes exactly into
per-(visit, code) contributions; see interpret.py.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import Dataset, EncodedSequence, encode_patient, make_batches
from .metrics import auc
from .numerics import ArgumentError, ParamStore, adam_step, make_rng, sigmoid, softmax

__all__ = [
    "VARIANTS",
    "TIME_CHANNELS",
    "Hyperparams",
    "ModelParams",
    "TrainingError",
    "ForwardTrace",
    "compute_time_features",
    "embed_visits",
    "gru_cell",
    "bi_gru",
    "alpha_attention",
    "beta_attention",
    "init_model",
    "forward",
    "baseline_gru_forward",
    "baseline_retain_forward",
    "loss",
    "backward",
    "predict",
    "train",
    "derive_seed",
]

VARIANTS = ("retainex", "retainex_no_time", "retain", "gru")
TIME_CHANNELS = 3
_GATES = ("Wz", "Wr", "Wh", "Uz", "Ur", "Uh", "bz", "br", "bh")


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")


@dataclass(frozen=True)
class Hyperparams:
    m: int = 64
    learning_rate: float = 0.001
    epochs: int = 10
    seed: int = 0
    variant: str = "retainex"
    beta_tanh: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise ArgumentError("hidden size m must be >= 1")
        if self.variant not in VARIANTS:
            raise ArgumentError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")


class ModelParams:
    """Learnable parameters for one variant, kept in a ParamStore.

    GRU blocks are named by role and direction: retainex variants use
    alpha_f/alpha_b and beta_f/beta_b (forward/backward), the reverse-order
    baseline uses alpha_r/beta_r, and the plain baseline uses rnn. Gate
    parameter names append .Wz .Wr .Wh .Uz .Ur .Uh .bz .br .bh.
    """

    def __init__(self, variant: str, m: int, n_codes: int, beta_tanh: bool = True):
        if variant not in VARIANTS:
            raise ArgumentError(f"unknown variant {variant!r}")
        self.variant = variant
        self.m = m
        self.n_codes = n_codes
        self.beta_tanh = beta_tanh
        self.store = ParamStore()
        m_in = m + TIME_CHANNELS if variant == "retainex" else m
        self.gru_input = m_in
        if variant in ("retainex", "retainex_no_time"):
            self.store.add("W_emb_a", np.zeros((m, n_codes)))
            self.store.add("W_emb_b", np.zeros((m, n_codes)))
            for block in ("alpha_f", "alpha_b", "beta_f", "beta_b"):
                self._add_gru(block, m_in, m)
            self.store.add("w_alpha", np.zeros(2 * m))
            self.store.add("W_beta", np.zeros((m, 2 * m)))
        elif variant == "retain":
            self.store.add("W_emb", np.zeros((m, n_codes)))
            for block in ("alpha_r", "beta_r"):
                self._add_gru(block, m, m)
            self.store.add("w_alpha", np.zeros(m))
            self.store.add("W_beta", np.zeros((m, m)))
        else:  # gru
            self.store.add("W_emb", np.zeros((m, n_codes)))
            self._add_gru("rnn", m, m)
        self.store.add("w_out", np.zeros(m))

    def _add_gru(self, prefix: str, d_in: int, m: int) -> None:
        for g in ("Wz", "Wr", "Wh"):
            self.store.add(f"{prefix}.{g}", np.zeros((m, d_in)))
        for g in ("Uz", "Ur", "Uh"):
            self.store.add(f"{prefix}.{g}", np.zeros((m, m)))
        for g in ("bz", "br", "bh"):
            self.store.add(f"{prefix}.{g}", np.zeros(m))

    def gru_weights(self, prefix: str) -> tuple:
        return tuple(self.store[f"{prefix}.{g}"] for g in _GATES)

    def copy(self) -> "ModelParams":
        out = ModelParams.__new__(ModelParams)
        out.variant = self.variant
        out.m = self.m
        out.n_codes = self.n_codes
        out.beta_tanh = self.beta_tanh
        out.gru_input = self.gru_input
        out.store = self.store.copy()
        return out


def init_model(hp: Hyperparams, n_codes: int) -> ModelParams:
    """Fresh parameters, every tensor uniform in [-1/sqrt(m), +1/sqrt(m)]
    drawn from the seeded stream in declaration order."""
    params = ModelParams(hp.variant, hp.m, n_codes, hp.beta_tanh)
    rng = make_rng(hp.seed)
    bound = 1.0 / math.sqrt(hp.m)
    for name in params.store.names():
        arr = params.store[name]
        arr[...] = rng.uniform(-bound, bound, size=arr.shape)
    return params


def compute_time_features(days) -> np.ndarray:
    """Per-visit interval features (T, 3): the day gap to the previous
    visit, its reciprocal, and 1/ln(e + gap). The first gap is fixed to 1
    and all gaps are floored at 1 day (same-day revisits)."""
    days = np.asarray(days, dtype=np.int64)
    if days.ndim != 1 or days.size == 0:
        raise ArgumentError("need at least one visit day")
    gaps = np.diff(days)
    if np.any(gaps < 0):
        raise ArgumentError("visit days must be non-decreasing")
    dt = np.concatenate(([1], np.maximum(gaps, 1))).astype(np.float64)
    return np.stack([dt, 1.0 / dt, 1.0 / np.log(math.e + dt)], axis=1)


def embed_visits(codes: tuple[tuple[int, ...], ...], W: np.ndarray) -> np.ndarray:
    """v_t = sum of the columns of W at the visit's active codes."""
    V = np.zeros((len(codes), W.shape[0]))
    for t, cs in enumerate(codes):
        if cs:
            V[t] = W[:, list(cs)].sum(axis=1)
    return V


def gru_cell(weights: tuple, v: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """Single GRU step; weights as returned by ModelParams.gru_weights."""
    Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh = weights
    z = 1.0 / (1.0 + np.exp(-(Wz @ v + Uz @ h_prev + bz)))
    r = 1.0 / (1.0 + np.exp(-(Wr @ v + Ur @ h_prev + br)))
    c = np.tanh(Wh @ v + Uh @ (r * h_prev) + bh)
    return (1.0 - z) * h_prev + z * c


def _run_gru(weights: tuple, V: np.ndarray):
    V = np.ascontiguousarray(V)
    return kernels.gru_seq_forward(V, *weights)


def bi_gru(params: ModelParams, role: str, V: np.ndarray):
    """Forward and reverse passes from zero states; per-step output is the
    2m concatenation [h_fwd_t ; h_bwd_t]. Returns (states, caches)."""
    fwd = _run_gru(params.gru_weights(f"{role}_f"), V)
    bwd = _run_gru(params.gru_weights(f"{role}_b"), V[::-1])
    T = V.shape[0]
    states = np.concatenate([fwd[0], bwd[0][::-1]], axis=1)
    return states, {"f": fwd, "b": bwd}


def alpha_attention(g_seq: np.ndarray, w_alpha: np.ndarray):
    """Per-visit scalars e_t = w_alpha . g_t, normalized with softmax."""
    e = g_seq @ w_alpha
    return e, softmax(e)


def beta_attention(h_seq: np.ndarray, W_beta: np.ndarray, beta_tanh: bool) -> np.ndarray:
    pre = h_seq @ W_beta.T
    return np.tanh(pre) if beta_tanh else pre


@dataclass
class ForwardTrace:
    """Everything the forward pass computed, enough to rerun backprop or
    recompute the score bit-identically."""

    variant: str
    encoded: EncodedSequence
    time_feats: np.ndarray | None
    v_a: np.ndarray | None
    v_b: np.ndarray | None
    g_states: np.ndarray | None
    h_states: np.ndarray | None
    caches: dict = field(default_factory=dict)
    e: np.ndarray | None = None
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    o: np.ndarray | None = None
    s: float = 0.0
    y_hat: float = 0.5


def forward(params: ModelParams, encoded: EncodedSequence) -> ForwardTrace:
    if encoded.length == 0:
        raise ArgumentError("cannot run the model on an empty visit sequence")
    if encoded.n_codes != params.n_codes:
        raise ArgumentError(
            f"encoded width {encoded.n_codes} does not match model {params.n_codes}"
        )
    if params.variant == "gru":
        return _forward_gru(params, encoded)
    if params.variant == "retain":
        return _forward_retain(params, encoded)
    return _forward_retainex(params, encoded)


def _forward_retainex(params: ModelParams, encoded: EncodedSequence) -> ForwardTrace:
    T = encoded.length
    emb_a = embed_visits(encoded.codes, params.store["W_emb_a"])
    if params.variant == "retainex":
        tf = compute_time_features(encoded.days)
        v_a = np.concatenate([emb_a, tf], axis=1)
    else:
        tf = None
        v_a = emb_a
    v_b = embed_visits(encoded.codes, params.store["W_emb_b"])
    g_states, g_cache = bi_gru(params, "alpha", v_a)
    h_states, h_cache = bi_gru(params, "beta", v_a)
    e, alpha = alpha_attention(g_states, params.store["w_alpha"])
    beta = beta_attention(h_states, params.store["W_beta"], params.beta_tanh)
    o = (alpha[:, None] * beta * v_b).sum(axis=0)
    s = float(params.store["w_out"] @ o)
    return ForwardTrace(
        variant=params.variant, encoded=encoded, time_feats=tf,
        v_a=v_a, v_b=v_b, g_states=g_states, h_states=h_states,
        caches={"alpha": g_cache, "beta": h_cache},
        e=e, alpha=alpha, beta=beta, o=o, s=s, y_hat=sigmoid(s),
    )


def _forward_retain(params: ModelParams, encoded: EncodedSequence) -> ForwardTrace:
    v = embed_visits(encoded.codes, params.store["W_emb"])
    g_rev = _run_gru(params.gru_weights("alpha_r"), v[::-1])
    h_rev = _run_gru(params.gru_weights("beta_r"), v[::-1])
    g_states = g_rev[0][::-1].copy()
    h_states = h_rev[0][::-1].copy()
    e, alpha = alpha_attention(g_states, params.store["w_alpha"])
    beta = beta_attention(h_states, params.store["W_beta"], params.beta_tanh)
    o = (alpha[:, None] * beta * v).sum(axis=0)
    s = float(params.store["w_out"] @ o)
    return ForwardTrace(
        variant="retain", encoded=encoded, time_feats=None,
        v_a=v, v_b=v, g_states=g_states, h_states=h_states,
        caches={"alpha": g_rev, "beta": h_rev},
        e=e, alpha=alpha, beta=beta, o=o, s=s, y_hat=sigmoid(s),
    )


def _forward_gru(params: ModelParams, encoded: EncodedSequence) -> ForwardTrace:
    v = embed_visits(encoded.codes, params.store["W_emb"])
    run = _run_gru(params.gru_weights("rnn"), v)
    s = float(params.store["w_out"] @ run[0][-1])
    return ForwardTrace(
        variant="gru", encoded=encoded, time_feats=None,
        v_a=v, v_b=None, g_states=run[0], h_states=None,
        caches={"rnn": run}, s=s, y_hat=sigmoid(s),
    )


def baseline_gru_forward(params: ModelParams, encoded: EncodedSequence) -> float:
    if params.variant != "gru":
        raise ArgumentError("baseline_gru_forward expects a gru-variant model")
    return forward(params, encoded).y_hat


def baseline_retain_forward(params: ModelParams, encoded: EncodedSequence) -> ForwardTrace:
    if params.variant != "retain":
        raise ArgumentError("baseline_retain_forward expects a retain-variant model")
    return forward(params, encoded)


def predict(params: ModelParams, encoded: EncodedSequence) -> float:
    return forward(params, encoded).y_hat


def loss(y_hat: float, y: int) -> float:
    """Binary cross-entropy with the prediction clamped to
    [1e-12, 1 - 1e-12] so the logs stay finite."""
    p = min(max(float(y_hat), 1e-12), 1.0 - 1e-12)
    return -(y * math.log(p) + (1 - y) * math.log(1.0 - p))


def _scatter_embedding_grad(acc: np.ndarray, codes, dV: np.ndarray) -> None:
    for t, cs in enumerate(codes):
        if cs:
            acc[:, list(cs)] += dV[t][:, None]


def _gru_backward(params: ModelParams, prefix: str, V, cache, dH):
    H, Z, R, C = cache
    Wz, Wr, Wh, Uz, Ur, Uh = (params.store[f"{prefix}.{g}"] for g in _GATES[:6])
    out = kernels.gru_seq_backward(
        np.ascontiguousarray(V), H, Z, R, C, np.ascontiguousarray(dH),
        Wz, Wr, Wh, Uz, Ur, Uh,
    )
    dV = out[0]
    acc = params.store.acc
    for g, grad in zip(_GATES, out[1:]):
        acc(f"{prefix}.{g}")[...] += grad
    return dV


def _bi_gru_backward(params: ModelParams, role: str, V, caches, dStates):
    m = params.m
    dV = _gru_backward(params, f"{role}_f", V, caches["f"], dStates[:, :m])
    dV_rev = _gru_backward(
        params, f"{role}_b", V[::-1], caches["b"], dStates[:, m:][::-1]
    )
    return dV + dV_rev[::-1]


def backward(trace: ForwardTrace, params: ModelParams, y: int, weight: float = 1.0) -> None:
    """Accumulate d(weight * loss)/d(param) into the store's gradient
    buffers for every parameter, reverse-mode through the whole graph.
    Interval features are constants, so their gradient columns are
    dropped."""
    ds = weight * (trace.y_hat - y)
    acc = params.store.acc
    if trace.variant == "gru":
        h_last = trace.g_states[-1]
        acc("w_out")[...] += ds * h_last
        dH = np.zeros_like(trace.g_states)
        dH[-1] = ds * params.store["w_out"]
        dV = _gru_backward(params, "rnn", trace.v_a, trace.caches["rnn"], dH)
        _scatter_embedding_grad(acc("W_emb"), trace.encoded.codes, dV)
        return

    alpha, beta, v_b, o = trace.alpha, trace.beta, trace.v_b, trace.o
    w_out = params.store["w_out"]
    acc("w_out")[...] += ds * o
    do = ds * w_out
    weighted = beta * v_b  # (T, m)
    dalpha = weighted @ do
    dbeta = alpha[:, None] * (v_b * do[None, :])
    dv_b = alpha[:, None] * (beta * do[None, :])
    de = alpha * (dalpha - float(alpha @ dalpha))
    acc("w_alpha")[...] += trace.g_states.T @ de
    dG = np.outer(de, params.store["w_alpha"])
    dpre = dbeta * (1.0 - beta * beta) if params.beta_tanh else dbeta
    acc("W_beta")[...] += dpre.T @ trace.h_states
    dH = dpre @ params.store["W_beta"]

    if trace.variant == "retain":
        dV_g = _gru_backward(params, "alpha_r", trace.v_a[::-1], trace.caches["alpha"], dG[::-1])
        dV_h = _gru_backward(params, "beta_r", trace.v_a[::-1], trace.caches["beta"], dH[::-1])
        dv = dV_g[::-1] + dV_h[::-1] + dv_b
        _scatter_embedding_grad(acc("W_emb"), trace.encoded.codes, dv)
        return

    dVa = _bi_gru_backward(params, "alpha", trace.v_a, trace.caches["alpha"], dG)
    dVa += _bi_gru_backward(params, "beta", trace.v_a, trace.caches["beta"], dH)
    _scatter_embedding_grad(acc("W_emb_a"), trace.encoded.codes, dVa[:, : params.m])
    _scatter_embedding_grad(acc("W_emb_b"), trace.encoded.codes, dv_b)


def derive_seed(seed: int, *parts: int) -> int:
    """Stable child seed for (seed, parts), via the documented SeedSequence
    expansion."""
    return int(np.random.SeedSequence((seed,) + parts).generate_state(1)[0])


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_auc: float
    seconds: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_auc": self.val_auc,
            "seconds": self.seconds,
        }


def train(
    train_ds: Dataset,
    val_ds: Dataset,
    hp: Hyperparams,
    log=None,
) -> tuple[ModelParams, list[EpochStats]]:
    """Adam over case-group batches: per-patient forward/backward without
    padding, gradients averaged across the batch, one optimizer step per
    batch. Keeps the epoch with the best validation AUC. Deterministic for
    a fixed seed and dataset."""
    if not train_ds.patients or not val_ds.patients:
        raise ArgumentError("train and validation sets must be non-empty")
    vocab = train_ds.vocabulary or val_ds.vocabulary
    if vocab is None:
        raise ArgumentError("dataset carries no vocabulary")
    params = init_model(hp, len(vocab))
    val_encoded = [(encode_patient(p, vocab), p.label) for p in val_ds.patients]
    history: list[EpochStats] = []
    best_auc = -1.0
    best_params = params.copy()
    for epoch in range(hp.epochs):
        tic = time.perf_counter()
        batches = make_batches(train_ds, seed=derive_seed(hp.seed, epoch))
        total_loss = 0.0
        n_seen = 0
        for bi, batch in enumerate(batches):
            w = 1.0 / len(batch)
            for rec in batch:
                trace = forward(params, encode_patient(rec, vocab))
                l = loss(trace.y_hat, rec.label)
                if not np.isfinite(l):
                    raise TrainingError("non-finite loss", epoch, bi)
                total_loss += l
                n_seen += 1
                backward(trace, params, rec.label, weight=w)
            adam_step(params.store, hp.learning_rate)
        scores = [predict(params, enc) for enc, _ in val_encoded]
        labels = [y for _, y in val_encoded]
        val_auc = auc(scores, labels)
        stats = EpochStats(
            epoch=epoch,
            train_loss=total_loss / max(n_seen, 1),
            val_auc=val_auc,
            seconds=time.perf_counter() - tic,
        )
        history.append(stats)
        if log:
            log(stats)
        if val_auc > best_auc:
            best_auc = val_auc
            best_params = params.copy()
    return best_params, history
