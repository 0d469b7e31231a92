"""Interaction classification head in plain numpy with explicit backprop.

Holistic branches (human, object, union, spatial) feed the
interactiveness head; the action head additionally sees the
human-to-object part branch (with object-guided part attention) and the
object-to-human part branch.  Every FC stack uses ReLU between layers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace

import numpy as np

log = logging.getLogger(__name__)

EPS = 1e-7
HOLISTIC_BRANCHES = ("human", "object", "union", "spatial")


@dataclass(frozen=True)
class HeadConfig:
    num_actions: int = 26
    feat_channels: int = 256
    holistic_res: int = 7
    part_res: int = 5
    spatial_size: int = 64
    branch_dim: int = 256
    ho_dim: int = 512
    oh_dim: int = 256
    attn_hidden: int = 64
    inter_hidden: int = 256
    num_human_parts: int = 17
    num_object_parts: int = 9

    @property
    def holistic_in(self) -> int:
        return self.feat_channels * self.holistic_res ** 2

    @property
    def spatial_in(self) -> int:
        return 3 * self.spatial_size ** 2

    @property
    def part_app(self) -> int:
        return self.feat_channels * self.part_res ** 2

    @property
    def part_coord(self) -> int:
        return 2 * self.part_res ** 2

    @property
    def part_dim(self) -> int:
        return self.part_app + self.part_coord

    @property
    def ho_in(self) -> int:
        return (self.num_human_parts + 1) * self.part_dim

    @property
    def oh_in(self) -> int:
        return (self.num_object_parts + 1) * self.part_coord

    @property
    def hol_dim(self) -> int:
        return 4 * self.branch_dim

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        B = self.branch_dim
        layers = {}
        for name in HOLISTIC_BRANCHES:
            fan_in = self.spatial_in if name == "spatial" else self.holistic_in
            layers[f"{name}.fc1"] = (B, fan_in)
            layers[f"{name}.fc2"] = (B, B)
        layers["attn.fc1"] = (self.attn_hidden, self.part_app)
        layers["attn.fc2"] = (self.num_human_parts, self.attn_hidden)
        layers["ho.fc1"] = (self.ho_dim, self.ho_in)
        layers["ho.fc2"] = (self.ho_dim, self.ho_dim)
        layers["oh.fc1"] = (self.oh_dim, self.oh_in)
        layers["oh.fc2"] = (self.oh_dim, self.oh_dim)
        layers["inter.fc1"] = (self.inter_hidden, self.hol_dim)
        layers["inter.fc2"] = (1, self.inter_hidden)
        layers["action.fc"] = (self.num_actions, self.hol_dim + self.ho_dim + self.oh_dim)
        shapes = {}
        for name, (out, fan_in) in layers.items():
            shapes[f"{name}.w"] = (out, fan_in)
            shapes[f"{name}.b"] = (out,)
        return shapes

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class HeadParams:
    config: HeadConfig
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        shapes = self.config.param_shapes()
        if set(shapes) != set(self.tensors):
            missing = set(shapes) ^ set(self.tensors)
            raise ValueError(f"parameter names mismatch: {sorted(missing)}")
        for name, shape in shapes.items():
            t = np.asarray(self.tensors[name], dtype=np.float64)
            if t.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {t.shape}")
            if not np.isfinite(t).all():
                raise ValueError(f"{name} has non-finite entries")
            self.tensors[name] = t

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "HeadParams":
        return HeadParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    @classmethod
    def zeros(cls, config: HeadConfig) -> "HeadParams":
        return cls(config, {k: np.zeros(s) for k, s in config.param_shapes().items()})

    @classmethod
    def init(cls, config: HeadConfig, seed: int = 0) -> "HeadParams":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in config.param_shapes().items():
            fan_in = config.param_shapes()[name[:-2] + ".w"][1]
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        return cls(config, tensors)


@dataclass
class PairBatch:
    """Encoded inputs for N human-object pairs.

    Part features of invalid object parts / invisible keypoints are
    expected to be zero; ``forward`` also multiplies them by the flags.
    """

    human: np.ndarray  # (N, D*Dh*Dh)
    object: np.ndarray  # (N, D*Dh*Dh)
    union: np.ndarray  # (N, D*Dh*Dh)
    spatial: np.ndarray  # (N, 3*S*S)
    part_app: np.ndarray  # (N, K_H, D*Dp*Dp)
    part_coord: np.ndarray  # (N, K_H, 2*Dp*Dp)
    part_valid: np.ndarray  # (N, K_H)
    object_app: np.ndarray  # (N, D*Dp*Dp)
    object_coord: np.ndarray  # (N, 2*Dp*Dp)
    object_part_coord: np.ndarray  # (N, K_O, 2*Dp*Dp)
    object_part_valid: np.ndarray  # (N, K_O)
    human_coord: np.ndarray  # (N, 2*Dp*Dp)

    def __len__(self) -> int:
        return self.human.shape[0]

    @staticmethod
    def shapes_for(cfg: HeadConfig, n: int) -> dict[str, tuple[int, ...]]:
        return {
            "human": (n, cfg.holistic_in),
            "object": (n, cfg.holistic_in),
            "union": (n, cfg.holistic_in),
            "spatial": (n, cfg.spatial_in),
            "part_app": (n, cfg.num_human_parts, cfg.part_app),
            "part_coord": (n, cfg.num_human_parts, cfg.part_coord),
            "part_valid": (n, cfg.num_human_parts),
            "object_app": (n, cfg.part_app),
            "object_coord": (n, cfg.part_coord),
            "object_part_coord": (n, cfg.num_object_parts, cfg.part_coord),
            "object_part_valid": (n, cfg.num_object_parts),
            "human_coord": (n, cfg.part_coord),
        }

    def check(self, cfg: HeadConfig) -> None:
        for name, shape in self.shapes_for(cfg, len(self)).items():
            got = np.shape(getattr(self, name))
            if got != shape:
                raise ValueError(f"pair feature {name!r}: expected {shape}, got {got}")

    def take(self, idx) -> "PairBatch":
        return PairBatch(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    @classmethod
    def concat(cls, batches: list["PairBatch"]) -> "PairBatch":
        return cls(**{f.name: np.concatenate([getattr(b, f.name) for b in batches]) for f in fields(cls)})

    @classmethod
    def zeros(cls, cfg: HeadConfig, n: int) -> "PairBatch":
        return cls(**{k: np.zeros(s) for k, s in cls.shapes_for(cfg, n).items()})


@dataclass
class PairLabels:
    y: np.ndarray  # (N, A) multi-hot
    z: np.ndarray = None  # (N,) derived from y when omitted

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim == 1:
            self.y = self.y[None]
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("action labels must be 0/1")
        derived = self.y.any(axis=1).astype(np.float64)
        if self.z is None:
            self.z = derived
        self.z = np.asarray(self.z, dtype=np.float64).reshape(-1)
        if not np.array_equal(self.z, derived):
            raise ValueError("interactiveness label must be 1 exactly when some action is labeled")

    def take(self, idx) -> "PairLabels":
        return PairLabels(self.y[idx], self.z[idx])


@dataclass
class Scores:
    action: np.ndarray  # (N, A)
    interactiveness: np.ndarray  # (N,)
    attention: np.ndarray = field(default=None, repr=False)  # (N, K_H)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _mlp(x, params, prefix, n_layers=2, final_relu=True):
    """Run an FC stack; returns output and per-layer (input, preactivation)."""
    cache = []
    h = x
    for i in range(1, n_layers + 1):
        w, b = params[f"{prefix}.fc{i}.w"], params[f"{prefix}.fc{i}.b"]
        pre = h @ w.T + b
        cache.append((h, pre))
        last = i == n_layers
        h = np.maximum(pre, 0.0) if (final_relu or not last) else pre
    return h, cache


def _mlp_backward(dout, params, prefix, cache, grads, final_relu=True):
    n_layers = len(cache)
    d = dout
    for i in range(n_layers, 0, -1):
        h_in, pre = cache[i - 1]
        if final_relu or i != n_layers:
            d = d * (pre > 0)
        w = params[f"{prefix}.fc{i}.w"]
        grads[f"{prefix}.fc{i}.w"] = d.T @ h_in
        grads[f"{prefix}.fc{i}.b"] = d.sum(axis=0)
        d = d @ w
    return d


def part_attention(object_app: np.ndarray, params: HeadParams) -> np.ndarray:
    """Per-human-part attention from the object appearance crop, in (0, 1)."""
    x = np.atleast_2d(object_app)
    logits, _ = _mlp(x, params, "attn", final_relu=False)
    return sigmoid(logits)


def _forward(batch: PairBatch, params: HeadParams, attention=None):
    cfg = params.config
    batch.check(cfg)
    n = len(batch)
    c = {}
    hol = []
    for name in HOLISTIC_BRANCHES:
        f, c[name] = _mlp(getattr(batch, name), params, name)
        hol.append(f)
    f_hol = np.concatenate(hol, axis=1)

    if attention is None:
        a_logit, c["attn"] = _mlp(batch.object_app, params, "attn", final_relu=False)
        alpha = sigmoid(a_logit)
    else:
        alpha = np.broadcast_to(np.asarray(attention, dtype=np.float64), (n, cfg.num_human_parts))
    parts = np.concatenate([batch.part_app, batch.part_coord], axis=2) * batch.part_valid[:, :, None]
    f_hk = alpha[:, :, None] * parts
    ho_in = np.concatenate([f_hk.reshape(n, -1), batch.object_app, batch.object_coord], axis=1)
    f_ho, c["ho"] = _mlp(ho_in, params, "ho")

    o_parts = batch.object_part_coord * batch.object_part_valid[:, :, None]
    oh_in = np.concatenate([o_parts.reshape(n, -1), batch.human_coord], axis=1)
    f_oh, c["oh"] = _mlp(oh_in, params, "oh")

    i_logit, c["inter"] = _mlp(f_hol, params, "inter", final_relu=False)
    s_i = sigmoid(i_logit[:, 0])

    act_in = np.concatenate([f_hol, f_ho, f_oh], axis=1)
    a_logit_out = act_in @ params["action.fc.w"].T + params["action.fc.b"]
    s_a = sigmoid(a_logit_out)
    c.update(parts=parts, alpha=alpha, act_in=act_in, attention_given=attention is not None)
    return Scores(s_a, s_i, alpha), c


def forward(batch: PairBatch, params: HeadParams, attention=None) -> Scores:
    """Action and interactiveness scores for every pair in ``batch``.

    ``attention`` overrides the predicted part attention when given.
    """
    scores, _ = _forward(batch, params, attention)
    return scores


def _clamped(s):
    return np.clip(s, EPS, 1 - EPS)


def loss(scores: Scores, labels: PairLabels, lam: float = 0.1) -> float:
    """Mean over pairs of sum_a CE(y_a, s_a) + lam * CE(z, s_i)."""
    sa, si = _clamped(scores.action), _clamped(scores.interactiveness)
    y, z = labels.y, labels.z
    cls = -(y * np.log(sa) + (1 - y) * np.log(1 - sa)).sum(axis=1)
    inter = -(z * np.log(si) + (1 - z) * np.log(1 - si))
    value = float(np.mean(cls + lam * inter))
    if not np.isfinite(value):
        raise FloatingPointError("non-finite loss")
    return value


def loss_and_grad(batch: PairBatch, labels: PairLabels, params: HeadParams,
                  lam: float = 0.1) -> tuple[float, dict[str, np.ndarray]]:
    scores, c = _forward(batch, params)
    value = loss(scores, labels, lam)
    cfg = params.config
    n = len(batch)
    sa, si = scores.action, scores.interactiveness
    # zero gradient where the clamp is active
    d_alogit = (sa - labels.y) * ((sa > EPS) & (sa < 1 - EPS)) / n
    d_ilogit = lam * (si - labels.z) * ((si > EPS) & (si < 1 - EPS)) / n

    grads: dict[str, np.ndarray] = {}
    grads["action.fc.w"] = d_alogit.T @ c["act_in"]
    grads["action.fc.b"] = d_alogit.sum(axis=0)
    d_act_in = d_alogit @ params["action.fc.w"]
    H, HO = cfg.hol_dim, cfg.ho_dim
    d_hol = d_act_in[:, :H].copy()
    d_fho = d_act_in[:, H:H + HO]
    d_foh = d_act_in[:, H + HO:]

    d_hol += _mlp_backward(d_ilogit[:, None], params, "inter", c["inter"], grads, final_relu=False)
    B = cfg.branch_dim
    for k, name in enumerate(HOLISTIC_BRANCHES):
        _mlp_backward(d_hol[:, k * B:(k + 1) * B], params, name, c[name], grads)

    _mlp_backward(d_foh, params, "oh", c["oh"], grads)
    d_ho_in = _mlp_backward(d_fho, params, "ho", c["ho"], grads)
    K = cfg.num_human_parts
    d_fhk = d_ho_in[:, :K * cfg.part_dim].reshape(n, K, cfg.part_dim)
    alpha = c["alpha"]
    d_alpha = (d_fhk * c["parts"]).sum(axis=2)
    _mlp_backward(d_alpha * alpha * (1 - alpha), params, "attn", c["attn"], grads, final_relu=False)

    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for {name}")
    return value, grads


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 16
    neg_per_pos: int = 3
    loss_weight: float = 0.1
    seed: int = 0


def _sample_batch(rng, pos_idx, neg_idx, cfg: TrainConfig) -> np.ndarray:
    if len(pos_idx) == 0 or len(neg_idx) == 0:
        pool = np.concatenate([pos_idx, neg_idx])
        return rng.choice(pool, size=cfg.batch_size, replace=True)
    n_pos = max(1, int(round(cfg.batch_size / (1 + cfg.neg_per_pos))))
    n_neg = cfg.batch_size - n_pos
    return np.concatenate([rng.choice(pos_idx, size=n_pos, replace=True),
                           rng.choice(neg_idx, size=n_neg, replace=True)])


def train_toy(batch: PairBatch, labels: PairLabels, head_config: HeadConfig,
              config: TrainConfig = TrainConfig(), params: HeadParams | None = None) -> HeadParams:
    """SGD with momentum on mini-batches drawn at a fixed positive:negative ratio.

    Deterministic for a given ``config.seed``.
    """
    if len(batch) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    params = HeadParams.init(head_config, seed=config.seed) if params is None else params.copy()
    velocity = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    pos_idx = np.flatnonzero(labels.z > 0)
    neg_idx = np.flatnonzero(labels.z == 0)
    for step in range(config.steps):
        idx = _sample_batch(rng, pos_idx, neg_idx, config)
        value, grads = loss_and_grad(batch.take(idx), labels.take(idx), params, config.loss_weight)
        for name, p in params.tensors.items():
            v = velocity[name]
            v *= config.momentum
            v += grads[name] + config.weight_decay * p
            p -= config.lr * v
        if step % 500 == 0:
            log.debug("step %d loss %.4f", step, value)
    return params


def pair_accuracy(scores: Scores, labels: PairLabels) -> float:
    """Fraction of pairs whose interactiveness and every action label are predicted correctly."""
    inter_ok = (scores.interactiveness > 0.5) == (labels.z > 0)
    act_ok = ((scores.action > 0.5) == (labels.y > 0)).all(axis=1)
    return float(np.mean(inter_ok & act_ok))


def with_actions(config: HeadConfig, num_actions: int) -> HeadConfig:
    return replace(config, num_actions=num_actions)
