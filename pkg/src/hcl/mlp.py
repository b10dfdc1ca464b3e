"""Single-hidden-layer perceptron with sigmoid outputs and manual backprop.

Everything runs in float64 and is a pure function of (seed, config, data):
weight init, batch order and dropout masks all draw from one seeded
generator in a fixed order. The training loop recomputes the curriculum
selection vector once per epoch from a full eval-mode pass over the train
split; the same pass provides the logged training loss.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import curriculum, losses, metrics
from .data import Dataset
from .taxonomy import Taxonomy

LOSS_MODES = ("ce", "focal", "hcl-hier", "hcl-cl", "hcl")

CHECKPOINT_MAGIC = b"HCLMLP1\n"


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class TrainConfig:
    hidden_width: int = 800
    dropout_rate: float = 0.25
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    optimizer: str = "adam"
    loss_mode: str = "hcl"
    transform_scope: str = losses.SCOPE_ALL_SHALLOWER
    decision_threshold: float = 0.5
    focal_gamma: float = 2.0
    selection_rule: str = curriculum.RULE_OPTIMAL_PREFIX
    selection_thresh: float | None = None

    def __post_init__(self):
        if self.hidden_width < 1:
            raise ValueError(f"hidden_width must be >= 1, got {self.hidden_width}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"unknown loss_mode {self.loss_mode!r}, expected one of {LOSS_MODES}")
        if self.transform_scope not in losses.SCOPES:
            raise ValueError(f"unknown transform_scope {self.transform_scope!r}")


@dataclass
class MlpParams:
    W1: np.ndarray  # D x H
    b1: np.ndarray  # H
    W2: np.ndarray  # H x C
    b2: np.ndarray  # C

    def copy(self) -> "MlpParams":
        return MlpParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def arrays(self):
        return (self.W1, self.b1, self.W2, self.b2)

    @property
    def dims(self):
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]


def init_params(n_features: int, hidden_width: int, n_classes: int, seed: int) -> MlpParams:
    """Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases."""
    if n_features < 1 or hidden_width < 1 or n_classes < 1:
        raise ValueError(
            f"dimensions must be positive, got D={n_features} H={hidden_width} C={n_classes}"
        )
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / n_features)
    lim2 = np.sqrt(6.0 / hidden_width)
    return MlpParams(
        W1=rng.uniform(-lim1, lim1, size=(n_features, hidden_width)),
        b1=np.zeros(hidden_width),
        W2=rng.uniform(-lim2, lim2, size=(hidden_width, n_classes)),
        b2=np.zeros(n_classes),
    )


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ForwardCache:
    params: MlpParams = field(repr=False)
    x: np.ndarray = field(repr=False)
    z1: np.ndarray = field(repr=False)
    hidden: np.ndarray = field(repr=False)  # post-relu, post-dropout
    mask_scale: np.ndarray | None = field(repr=False)
    scores: np.ndarray = field(repr=False)


def forward(params: MlpParams, x, dropout_mask=None, dropout_rate: float = 0.0):
    """Eval-mode unless a dropout mask is given (inverted scaling 1/(1-rate))."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.W1.shape[0]:
        raise ValueError(
            f"feature width {x.shape[-1] if x.ndim == 2 else '?'} does not match "
            f"D={params.W1.shape[0]}"
        )
    z1 = x @ params.W1 + params.b1
    hidden = np.maximum(z1, 0.0)
    mask_scale = None
    if dropout_mask is not None:
        if dropout_mask.shape != hidden.shape:
            raise ValueError("dropout mask shape does not match hidden activations")
        mask_scale = dropout_mask / (1.0 - dropout_rate)
        hidden = hidden * mask_scale
    scores = _sigmoid(hidden @ params.W2 + params.b2)
    cache = ForwardCache(params=params, x=x, z1=z1, hidden=hidden,
                         mask_scale=mask_scale, scores=scores)
    return scores, cache


def backward(params: MlpParams, cache: ForwardCache, dscores) -> MlpParams:
    """Exact reverse-mode gradients; returns them in MlpParams layout."""
    if cache.params is not params:
        raise ValueError("stale cache: it was produced by a different parameter set")
    dscores = np.asarray(dscores, dtype=np.float64)
    if dscores.shape != cache.scores.shape:
        raise ValueError(f"upstream gradient shape {dscores.shape} does not match scores")
    dz2 = dscores * cache.scores * (1.0 - cache.scores)
    dW2 = cache.hidden.T @ dz2
    db2 = dz2.sum(axis=0)
    dhidden = dz2 @ params.W2.T
    if cache.mask_scale is not None:
        dhidden = dhidden * cache.mask_scale
    dz1 = dhidden * (cache.z1 > 0)
    dW1 = cache.x.T @ dz1
    db1 = dz1.sum(axis=0)
    return MlpParams(W1=dW1, b1=db1, W2=dW2, b2=db2)


class _Optimizer:
    def __init__(self, cfg: TrainConfig, params: MlpParams):
        self.cfg = cfg
        if cfg.optimizer == "adam":
            self.m = [np.zeros_like(a) for a in params.arrays()]
            self.v = [np.zeros_like(a) for a in params.arrays()]
            self.t = 0

    def step(self, params: MlpParams, grads: MlpParams):
        lr = self.cfg.learning_rate
        if self.cfg.optimizer == "sgd":
            for p, g in zip(params.arrays(), grads.arrays()):
                p -= lr * g
            return
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for i, (p, g) in enumerate(zip(params.arrays(), grads.arrays())):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            mhat = self.m[i] / (1 - b1 ** self.t)
            vhat = self.v[i] / (1 - b2 ** self.t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)


@dataclass
class EpochLog:
    epoch: int
    loss: float
    hit1: float
    mrr: float
    hierdist: float
    selected: np.ndarray = field(repr=False)

    def jsonl_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "hit1": self.hit1,
            "mrr": self.mrr,
            "hierdist": self.hierdist,
            "selected_classes": int(self.selected.sum()),
        }


def _selection_and_loss(scores, y, taxonomy, cfg: TrainConfig):
    """Full-pass curriculum state: selection vector and the logged loss.

    The logged loss is a per-example mean: plain column-summed base loss for
    ce/focal, transformed for hcl-hier, and the curriculum objective value
    for the selection-based modes.
    """
    n = len(y)
    c = taxonomy.n_classes
    mode = cfg.loss_mode
    if mode == "ce":
        return np.ones(c), float(losses.bce_loss(y, scores).sum() / n)
    if mode == "focal":
        return np.ones(c), float(losses.focal_loss(y, scores, cfg.focal_gamma).sum() / n)
    if mode == "hcl-hier":
        lh, _ = losses.hier_transform(losses.bce_loss(y, scores), taxonomy, cfg.transform_scope)
        return np.ones(c), float(lh.sum() / n)
    if mode == "hcl-cl":
        base = losses.bce_loss(y, scores)
        e01 = losses.zero_one_loss(y, scores, cfg.decision_threshold)
        agg = curriculum.aggregate_class_losses(base, e01)
        s = curriculum.select_classes(agg, c, cfg.selection_rule, cfg.selection_thresh)
        return s, curriculum.curriculum_objective(s, agg, c) / n
    value, s, _ = curriculum.hcl_loss(
        y, scores, taxonomy,
        scope=cfg.transform_scope,
        decision_threshold=cfg.decision_threshold,
        rule=cfg.selection_rule,
        thresh=cfg.selection_thresh,
    )
    return s, value / n


def _batch_dscores(xb_scores, yb, s, taxonomy, cfg: TrainConfig):
    """Gradient of the batch training loss w.r.t. the scores."""
    b = len(yb)
    mode = cfg.loss_mode
    if mode == "ce":
        return losses.bce_grad(yb, xb_scores) / b
    if mode == "focal":
        return losses.focal_grad(yb, xb_scores, cfg.focal_gamma) / b
    base_grad = losses.bce_grad(yb, xb_scores)
    if mode == "hcl-cl":
        return (s[None, :] * base_grad) / b
    base = losses.bce_loss(yb, xb_scores)
    _, routing = losses.hier_transform(base, taxonomy, cfg.transform_scope)
    upstream = np.ones_like(base) if mode == "hcl-hier" else np.broadcast_to(s, base.shape)
    w = losses.hier_transform_backward(routing, upstream)
    return (w * base_grad) / b


def train(dataset: Dataset, taxonomy: Taxonomy, cfg: TrainConfig):
    """Mini-batch training; returns final params and the per-epoch log."""
    if taxonomy.n_classes != dataset.labels.shape[1]:
        raise ValueError("taxonomy does not match the dataset's label width")
    idx_train = dataset.indices("train")
    idx_valid = dataset.indices("valid")
    if len(idx_train) == 0:
        raise ValueError("train split is empty")
    x_tr = dataset.features[idx_train]
    y_tr = dataset.labels[idx_train]
    x_va = dataset.features[idx_valid]
    y_va = dataset.labels[idx_valid]

    rng = np.random.default_rng(cfg.seed)
    params = init_params(dataset.n_features, cfg.hidden_width, taxonomy.n_classes, cfg.seed)
    opt = _Optimizer(cfg, params)

    # Epoch 1 trains every class: selection needs loss statistics, and an
    # untrained model has none worth acting on. Each epoch end recomputes
    # the selection from a full clean forward pass for the next epoch.
    s = np.ones(taxonomy.n_classes)

    log: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(idx_train))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            xb, yb = x_tr[batch], y_tr[batch]
            mask = None
            if cfg.dropout_rate > 0:
                mask = (rng.random((len(batch), cfg.hidden_width))
                        >= cfg.dropout_rate).astype(np.float64)
            scores, cache = forward(params, xb, mask, cfg.dropout_rate)
            dscores = _batch_dscores(scores, yb, s, taxonomy, cfg)
            grads = backward(params, cache, dscores)
            opt.step(params, grads)

        scores_tr, _ = forward(params, x_tr)
        s, train_loss = _selection_and_loss(scores_tr, y_tr, taxonomy, cfg)
        if not np.isfinite(train_loss):
            raise TrainingDiverged(
                f"non-finite training loss {train_loss!r} at epoch {epoch} "
                f"(loss_mode={cfg.loss_mode}, lr={cfg.learning_rate})"
            )
        scores_va, _ = forward(params, x_va)
        report = metrics.evaluate(y_va, scores_va, taxonomy)
        log.append(EpochLog(
            epoch=epoch,
            loss=train_loss,
            hit1=report.hit_at_1,
            mrr=report.mrr,
            hierdist=report.hier_dist,
            selected=s.copy(),
        ))
    return params, log


def save_checkpoint(path, params: MlpParams) -> None:
    """Magic string, three little-endian uint64 dims, then the four arrays
    as row-major little-endian float64. Write->read round-trips bitwise."""
    d, h, c = params.dims
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<QQQ", d, h, c))
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> MlpParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        d, h, c = struct.unpack("<QQQ", fh.read(24))
        def block(shape):
            n = int(np.prod(shape))
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"{path}: truncated checkpoint")
            return np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
        params = MlpParams(
            W1=block((d, h)), b1=block((h,)), W2=block((h, c)), b2=block((c,))
        )
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after checkpoint payload")
    return params


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
