"""Small builders shared by several test modules."""

import numpy as np

from hoikit.head import HeadConfig, PairBatch, PairLabels


def tiny_config(num_actions: int = 3) -> HeadConfig:
    return HeadConfig(num_actions=num_actions, feat_channels=2, holistic_res=2, part_res=2,
                      spatial_size=4, branch_dim=4, ho_dim=5, oh_dim=4, attn_hidden=3,
                      inter_hidden=4, num_human_parts=4, num_object_parts=4)


def random_batch(cfg: HeadConfig, n: int, rng) -> PairBatch:
    batch = PairBatch(**{k: rng.standard_normal(s) for k, s in PairBatch.shapes_for(cfg, n).items()})
    batch.part_valid = (rng.random(batch.part_valid.shape) > 0.3).astype(np.float64)
    batch.object_part_valid = (rng.random(batch.object_part_valid.shape) > 0.3).astype(np.float64)
    return batch


def random_labels(cfg: HeadConfig, n: int, rng) -> PairLabels:
    return PairLabels((rng.random((n, cfg.num_actions)) < 0.3).astype(np.float64))
