from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .head import HeadConfig, TrainConfig


class ValidationError(ValueError):
    """Malformed input data or configuration."""


@dataclass(frozen=True)
class Config:
    # part generation
    grid_size: int = 3
    min_ratio: float = 1 / 16
    part_ratio: float = 0.1
    # ROI resolutions
    holistic_res: int = 7
    part_res: int = 5
    spatial_size: int = 64
    normalize_offsets: bool = False
    # head widths
    feat_channels: int = 256
    branch_dim: int = 256
    ho_dim: int = 512
    oh_dim: int = 256
    attn_hidden: int = 64
    inter_hidden: int = 256
    # training
    loss_weight: float = 0.1
    lr: float = 0.04
    momentum: float = 0.9
    weight_decay: float = 1e-4
    steps: int = 2000
    batch_size: int = 16
    neg_per_pos: int = 3
    seed: int = 0
    # inference
    human_threshold: float = 0.5
    object_threshold: float = 0.4
    s_min: float = 0.5
    beta: float = 0.95
    regroup: bool = True
    use_pose: bool = True
    use_object_parts: bool = True
    human_category: str = "person"

    def __post_init__(self):
        checks = [
            (self.grid_size >= 1, "grid_size must be >= 1"),
            (0 < self.min_ratio < 1, "min_ratio must lie in (0, 1)"),
            (self.part_ratio > 0, "part_ratio must be positive"),
            (min(self.holistic_res, self.part_res, self.spatial_size) >= 1, "resolutions must be >= 1"),
            (min(self.feat_channels, self.branch_dim, self.ho_dim, self.oh_dim,
                 self.attn_hidden, self.inter_hidden) >= 1, "feature widths must be >= 1"),
            (self.loss_weight >= 0 and self.lr >= 0, "loss_weight and lr must be >= 0"),
            (0 <= self.momentum < 1, "momentum must lie in [0, 1)"),
            (self.steps >= 0 and self.batch_size >= 1 and self.neg_per_pos >= 0, "bad training sizes"),
            (0 <= self.human_threshold <= 1 and 0 <= self.object_threshold <= 1, "thresholds must lie in [0, 1]"),
            (0 <= self.s_min <= 1 and 0 <= self.beta <= 1, "s_min and beta must lie in [0, 1]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)

    def head_config(self, num_actions: int) -> HeadConfig:
        return HeadConfig(
            num_actions=num_actions, feat_channels=self.feat_channels,
            holistic_res=self.holistic_res, part_res=self.part_res,
            spatial_size=self.spatial_size, branch_dim=self.branch_dim,
            ho_dim=self.ho_dim, oh_dim=self.oh_dim, attn_hidden=self.attn_hidden,
            inter_hidden=self.inter_hidden, num_object_parts=self.grid_size ** 2,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(steps=self.steps, lr=self.lr, momentum=self.momentum,
                           weight_decay=self.weight_decay, batch_size=self.batch_size,
                           neg_per_pos=self.neg_per_pos, loss_weight=self.loss_weight, seed=self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path | None, **overrides) -> "Config":
        data = {}
        if path is not None:
            with open(path) as f:
                try:
                    data = json.load(f)
                except json.JSONDecodeError as e:
                    raise ValidationError(f"{path}: {e}") from e
        cfg = cls.from_dict(data)
        return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
