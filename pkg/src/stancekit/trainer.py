"""Encoder head training over frozen embeddings.

The model is a small tanh MLP: frozen embedding -> hidden representation ->
five-way logits. The objective adds a cosine-based contrastive term to the
cross-entropy: same-label pairs are pulled toward cosine 1 through
e*(1 - e^(cos-1)) and different-label pairs are pushed below a margin beta
through e^(max(0, cos-beta)) - 1, averaged over unordered batch pairs.
Optimization is AdamW (decoupled weight decay, bias correction) under global
gradient-norm clipping and a linear warmup/decay schedule.

All gradients here are hand-derived; `grad_check` verifies them against
central finite differences computed with f64 accumulation.
"""

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .corpus import LABEL_ORDER, StanceLabel
from .errors import DataError, NumericalError

N_CLASSES = len(LABEL_ORDER)
_LABEL_INDEX = {label: i for i, label in enumerate(LABEL_ORDER)}

CHECKPOINT_VERSION = 1


def label_index(label) -> int:
    if isinstance(label, StanceLabel):
        return _LABEL_INDEX[label]
    return int(label)


@dataclass
class EncoderHead:
    """Two-layer tanh head; the hidden activation is the pair representation."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, dims: int, hidden: int, seed: int = 0, dtype=np.float64) -> "EncoderHead":
        rng = np.random.default_rng(seed)
        return cls(
            W1=(rng.standard_normal((dims, hidden)) / math.sqrt(dims)).astype(dtype),
            b1=np.zeros(hidden, dtype=dtype),
            W2=(rng.standard_normal((hidden, N_CLASSES)) / math.sqrt(hidden)).astype(dtype),
            b2=np.zeros(N_CLASSES, dtype=dtype),
        )

    @property
    def dims(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def dtype(self):
        return self.W1.dtype

    def params(self) -> dict:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def astype(self, dtype) -> "EncoderHead":
        return EncoderHead(*(p.astype(dtype) for p in (self.W1, self.b1, self.W2, self.b2)))

    def copy(self) -> "EncoderHead":
        return EncoderHead(*(p.copy() for p in (self.W1, self.b1, self.W2, self.b2)))

    def forward(self, embeddings: np.ndarray):
        """Returns (representations, logits)."""
        emb = np.asarray(embeddings, dtype=self.dtype)
        reps = np.tanh(emb @ self.W1 + self.b1)
        logits = reps @ self.W2 + self.b2
        return reps, logits

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        _, logits = self.forward(embeddings)
        return np.argmax(logits, axis=1)


@dataclass
class TrainConfig:
    """Optimization settings.

    lr_peak defaults to 2e-3: the published 2e-5 targets full-model
    fine-tuning and undershoots badly for a small head on frozen inputs;
    the schedule shape (10% linear warmup, linear decay to zero) is kept.
    """

    lr_peak: float = 2e-3
    weight_decay: float = 0.01
    epochs: int = 3
    batch_size: int = 32
    warmup_fraction: float = 0.10
    clip_norm: float = 1.0
    beta_margin: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hidden: int = 128
    contrastive: bool = True
    dtype: str = "float64"

    def __post_init__(self):
        if not 0.0 < self.warmup_fraction < 1.0:
            raise DataError("warmup_fraction must lie in (0, 1)")
        if not 0.0 <= self.beta_margin < 1.0:
            raise DataError("beta_margin must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise DataError("epochs must be >= 0 and batch_size >= 1")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype).type

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainState:
    head: EncoderHead
    moments_m: dict
    moments_v: dict
    step: int
    history: list
    config: TrainConfig


def build_pair_matrix(labels) -> np.ndarray:
    """b x b matrix of +1 (same label) / -1 (different label) entries."""
    idx = np.array([label_index(y) for y in labels])
    pm = np.where(idx[:, None] == idx[None, :], 1, -1).astype(np.int8)
    assert np.array_equal(pm, pm.T) and np.all(np.diag(pm) == 1)
    return pm


def loss_ce(logits, y) -> float:
    """Negative log softmax probability of the true class (max-stabilized)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite logits")
    shifted = logits - logits.max()
    return float(np.log(np.sum(np.exp(shifted))) - shifted[label_index(y)])


def loss_cl_pair(x_i, x_j, p: int, beta: float) -> float:
    """Contrastive loss for one representation pair."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    ni, nj = np.linalg.norm(x_i), np.linalg.norm(x_j)
    if ni == 0.0 or nj == 0.0:
        raise NumericalError("contrastive loss of a zero representation")
    cos = float(np.dot(x_i, x_j) / (ni * nj))
    if p == 1:
        return math.e * (1.0 - math.exp(cos - 1.0))
    if p == -1:
        return math.exp(max(0.0, cos - beta)) - 1.0
    raise DataError(f"pair flag must be +1 or -1, got {p}")


def _pos_branch(cos):
    return math.e * (1.0 - np.exp(np.asarray(cos, dtype=np.float64) - 1.0))


def _neg_branch(cos, beta: float):
    return np.exp(np.maximum(0.0, np.asarray(cos, dtype=np.float64) - beta)) - 1.0


def pair_losses(x_a, x_b, p: int, beta: float) -> np.ndarray:
    """Vectorized pair loss: row k of x_a against row k of x_b."""
    a = np.asarray(x_a, dtype=np.float64)
    b = np.asarray(x_b, dtype=np.float64)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise NumericalError("contrastive loss of a zero representation")
    cos = np.clip(np.einsum("ij,ij->i", a, b) / (na * nb), -1.0, 1.0)
    if p == 1:
        return _pos_branch(cos)
    if p == -1:
        return _neg_branch(cos, beta)
    raise DataError(f"pair flag must be +1 or -1, got {p}")


def loss_cl_batch(reps, pair_matrix, beta: float) -> float:
    """Mean contrastive loss over unordered pairs i < j."""
    reps = np.asarray(reps, dtype=np.float64)
    b = reps.shape[0]
    if b < 2:
        raise DataError("contrastive batch needs at least 2 examples")
    total = 0.0
    for i in range(b):
        for j in range(i + 1, b):
            total += loss_cl_pair(reps[i], reps[j], int(pair_matrix[i, j]), beta)
    return total / (b * (b - 1) / 2)


def _batch_losses(head, emb, y_idx, pair_matrix, cfg):
    """Forward pass returning (reps, logits, softmax, ce, cl) at head dtype."""
    reps, logits = head.forward(emb)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expl = np.exp(shifted)
    softmax = expl / expl.sum(axis=1, keepdims=True)
    b = emb.shape[0]
    ce_terms = np.log(expl.sum(axis=1)) - shifted[np.arange(b), y_idx]
    ce = float(ce_terms.mean())

    cl = 0.0
    if cfg.contrastive and b >= 2:
        norms = np.linalg.norm(reps, axis=1)
        if np.any(norms == 0.0):
            raise NumericalError("zero representation in contrastive batch")
        unit = reps / norms[:, None]
        cosmat = np.clip(unit @ unit.T, -1.0, 1.0)
        pos = pair_matrix == 1
        neg = ~pos
        upper = np.triu(np.ones_like(cosmat, dtype=bool), k=1)
        pos_terms = _pos_branch(cosmat)
        neg_terms = _neg_branch(cosmat, cfg.beta_margin)
        n_pairs = b * (b - 1) / 2
        cl = float(
            (pos_terms[pos & upper].sum() + neg_terms[neg & upper].sum()) / n_pairs
        )
    return reps, logits, softmax, ce, cl


def total_loss(batch, head, pair_matrix, cfg) -> float:
    """Mean cross-entropy plus the batch contrastive term."""
    emb, labels = batch
    if len(labels) == 0:
        raise DataError("empty batch")
    y_idx = np.array([label_index(y) for y in labels])
    _, _, _, ce, cl = _batch_losses(head, emb, y_idx, pair_matrix, cfg)
    return ce + cl


def loss_and_grads(head, emb, y_idx, pair_matrix, cfg):
    """Analytic gradients of the total objective for one batch.

    Returns (ce, cl, grads) where grads maps parameter name to array. The
    derivation: CE flows through softmax as (p - onehot)/b; the contrastive
    term flows into each representation x_i as sum_j w_ij (u_j - cos_ij u_i)
    / |x_i| with w_ij the pair-loss derivative at cos_ij divided by the pair
    count, u the unit representations.
    """
    dtype = head.dtype
    emb = np.asarray(emb, dtype=dtype)
    b = emb.shape[0]
    reps, logits, softmax, ce, cl = _batch_losses(head, emb, y_idx, pair_matrix, cfg)

    dlogits = softmax.copy()
    dlogits[np.arange(b), y_idx] -= 1.0
    dlogits /= b

    d_reps = dlogits @ head.W2.T

    if cfg.contrastive and b >= 2:
        norms = np.linalg.norm(reps, axis=1)
        unit = reps / norms[:, None]
        cosmat = unit @ unit.T
        n_pairs = b * (b - 1) / 2
        pos = pair_matrix == 1
        # d(pos)/dcos = -e^cos ; d(neg)/dcos = e^(cos-beta) above the margin
        w = np.where(
            pos,
            -np.exp(cosmat),
            np.where(cosmat > cfg.beta_margin, np.exp(cosmat - cfg.beta_margin), 0.0),
        ).astype(dtype)
        np.fill_diagonal(w, 0.0)
        w /= n_pairs
        d_reps = d_reps + (w @ unit - (w * cosmat).sum(axis=1)[:, None] * unit) / norms[:, None]

    dz = d_reps * (1.0 - reps * reps)
    grads = {
        "W1": emb.T @ dz,
        "b1": dz.sum(axis=0),
        "W2": reps.T @ dlogits,
        "b2": dlogits.sum(axis=0),
    }
    return ce, cl, grads


def clip_global_norm(grads: dict, clip_norm: float) -> float:
    """Scale all gradients in place so the global L2 norm is <= clip_norm."""
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if clip_norm > 0.0 and total > clip_norm:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale
    return total


def adamw_step(head, grads, moments_m, moments_v, step: int, lr: float, cfg) -> None:
    """One AdamW update (bias-corrected, decoupled weight decay), in place."""
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    params = head.params()
    for name, p in params.items():
        g = grads[name]
        m = moments_m[name]
        v = moments_v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**step)
        v_hat = v / (1.0 - b2**step)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p -= lr * cfg.weight_decay * p


def lr_at(step: int, total_steps: int, cfg) -> float:
    """Piecewise-linear schedule: 0 -> lr_peak over the warmup leg, then
    lr_peak -> 0 at total_steps."""
    if not 0 <= step <= total_steps:
        raise DataError(f"step {step} outside [0, {total_steps}]")
    if total_steps == 0:
        return 0.0
    warmup = math.ceil(cfg.warmup_fraction * total_steps)
    if step <= warmup:
        return cfg.lr_peak * step / warmup
    return cfg.lr_peak * (total_steps - step) / (total_steps - warmup)


def train(subset, m, labels, cfg: TrainConfig) -> TrainState:
    """Fit an encoder head on the subset's embeddings.

    Batches are drawn once with the config seed and reused every epoch, so
    each batch's pair matrix is precomputed before the epoch loop. Missing
    embeddings or labels fail before any training step.
    """
    ids = list(subset.selected) if hasattr(subset, "selected") else list(subset)
    if not ids:
        raise DataError("cannot train on an empty subset")
    missing = [i for i in ids if i not in labels]
    if missing:
        raise DataError(f"ids missing labels: {missing[:5]}")
    dtype = cfg.np_dtype
    emb = m.rows_for(ids).astype(dtype)
    y_idx = np.array([label_index(labels[i]) for i in ids])

    rng = np.random.default_rng(cfg.seed)
    head = EncoderHead.init(m.dims, cfg.hidden, seed=cfg.seed, dtype=dtype)
    moments_m = {k: np.zeros_like(p) for k, p in head.params().items()}
    moments_v = {k: np.zeros_like(p) for k, p in head.params().items()}

    order = rng.permutation(len(ids))
    batches = []
    for start in range(0, len(ids), cfg.batch_size):
        sel = order[start : start + cfg.batch_size]
        batches.append((emb[sel], y_idx[sel], build_pair_matrix(y_idx[sel])))

    total_steps = cfg.epochs * len(batches)
    history = []
    step = 0
    for _ in range(cfg.epochs):
        for bemb, by, pm in batches:
            lr = lr_at(step, total_steps, cfg)
            ce, cl, grads = loss_and_grads(head, bemb, by, pm, cfg)
            clip_global_norm(grads, cfg.clip_norm)
            adamw_step(head, grads, moments_m, moments_v, step + 1, lr, cfg)
            history.append(
                {"step": step, "lr": lr, "ce": ce, "cl": cl, "total": ce + cl}
            )
            step += 1
    return TrainState(
        head=head,
        moments_m=moments_m,
        moments_v=moments_v,
        step=step,
        history=history,
        config=cfg,
    )


def grad_check(head, batch, cfg, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    The finite-difference reference always runs in f64 (from the head's exact
    parameter values), so the returned error reflects the precision of the
    analytic path at the head's own dtype. eps must stay small: a central
    difference straddling the hinge at cos = beta is wrong by O(eps).
    """
    emb, labels = batch
    y_idx = np.array([label_index(y) for y in labels])
    pm = build_pair_matrix(y_idx)
    _, _, grads = loss_and_grads(head, emb, y_idx, pm, cfg)

    ref = head.astype(np.float64)
    emb64 = np.asarray(emb, dtype=np.float64)
    worst = 0.0
    for name, p in ref.params().items():
        analytic = grads[name].astype(np.float64)
        flat = p.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            _, _, _, ce_hi, cl_hi = _batch_losses(ref, emb64, y_idx, pm, cfg)
            flat[k] = orig - eps
            _, _, _, ce_lo, cl_lo = _batch_losses(ref, emb64, y_idx, pm, cfg)
            flat[k] = orig
            fd = ((ce_hi + cl_hi) - (ce_lo + cl_lo)) / (2.0 * eps)
            ga = analytic.reshape(-1)[k]
            rel = abs(ga - fd) / max(1e-8, abs(ga) + abs(fd))
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# checkpoint and history persistence
# ---------------------------------------------------------------------------


def save_checkpoint(state: TrainState, path) -> None:
    arrays = {f"param_{k}": v for k, v in state.head.params().items()}
    arrays.update({f"m_{k}": v for k, v in state.moments_m.items()})
    arrays.update({f"v_{k}": v for k, v in state.moments_v.items()})
    np.savez(
        path,
        version=np.int64(CHECKPOINT_VERSION),
        step=np.int64(state.step),
        config_json=np.frombuffer(
            json.dumps(state.config.to_dict()).encode("utf-8"), dtype=np.uint8
        ),
        **arrays,
    )


def load_checkpoint(path) -> TrainState:
    with np.load(path) as blob:
        if int(blob["version"]) != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {int(blob['version'])}")
        cfg = TrainConfig(**json.loads(bytes(blob["config_json"]).decode("utf-8")))
        head = EncoderHead(
            W1=blob["param_W1"], b1=blob["param_b1"],
            W2=blob["param_W2"], b2=blob["param_b2"],
        )
        moments_m = {k: blob[f"m_{k}"] for k in ("W1", "b1", "W2", "b2")}
        moments_v = {k: blob[f"v_{k}"] for k in ("W1", "b1", "W2", "b2")}
        return TrainState(
            head=head,
            moments_m=moments_m,
            moments_v=moments_v,
            step=int(blob["step"]),
            history=[],
            config=cfg,
        )


def write_history_csv(state: TrainState, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "lr", "ce", "cl", "total"])
        writer.writeheader()
        writer.writerows(state.history)
