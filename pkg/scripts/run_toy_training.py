"""Train the interaction head on the linearly separable fixture and report accuracy.

    python3 scripts/run_toy_training.py --steps 2000 --seeds 0 1 2
"""

import argparse
import time

import numpy as np

from hoikit.head import HeadConfig, TrainConfig, forward, loss, pair_accuracy, train_toy
from hoikit.scenes import separable_pairs


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--pairs", type=int, default=400)
    p.add_argument("--actions", type=int, default=3)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = p.parse_args()

    cfg = HeadConfig(num_actions=args.actions, feat_channels=4, holistic_res=3, part_res=2, spatial_size=8,
                     branch_dim=16, ho_dim=16, oh_dim=16, attn_hidden=8, inter_hidden=16)
    # one fixture, split in half: the labeling direction depends on the fixture seed
    batch, labels = separable_pairs(cfg, 2 * args.pairs, seed=0)
    idx = np.arange(2 * args.pairs)
    train, train_y = batch.take(idx[:args.pairs]), labels.take(idx[:args.pairs])
    held, held_y = batch.take(idx[args.pairs:]), labels.take(idx[args.pairs:])
    for seed in args.seeds:
        t0 = time.perf_counter()
        params = train_toy(train, train_y, cfg, TrainConfig(steps=args.steps, lr=args.lr, seed=seed))
        s = forward(train, params)
        print(f"seed {seed}: loss {loss(s, train_y):.4f}  train acc {pair_accuracy(s, train_y):.3f}  "
              f"held-out acc {pair_accuracy(forward(held, params), held_y):.3f}  "
              f"({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
