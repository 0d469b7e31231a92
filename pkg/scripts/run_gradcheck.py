"""Finite-difference check of the head's analytic gradients, per parameter tensor.

    python3 scripts/run_gradcheck.py --instances 5
"""

import argparse

import numpy as np

from hoikit.head import HeadConfig, HeadParams, PairBatch, PairLabels, forward, loss, loss_and_grad


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--pairs", type=int, default=3)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--lam", type=float, default=0.1)
    args = p.parse_args()

    cfg = HeadConfig(num_actions=3, feat_channels=2, holistic_res=2, part_res=2, spatial_size=4, branch_dim=4,
                     ho_dim=5, oh_dim=4, attn_hidden=3, inter_hidden=4, num_human_parts=4, num_object_parts=4)
    for inst in range(args.instances):
        rng = np.random.default_rng(inst)
        shapes = PairBatch.shapes_for(cfg, args.pairs)
        batch = PairBatch(**{k: rng.standard_normal(s) for k, s in shapes.items()})
        batch.part_valid = (rng.random(shapes["part_valid"]) > 0.3).astype(float)
        batch.object_part_valid = (rng.random(shapes["object_part_valid"]) > 0.3).astype(float)
        labels = PairLabels((rng.random((args.pairs, cfg.num_actions)) < 0.3).astype(float))
        params = HeadParams.init(cfg, inst)
        _, grads = loss_and_grad(batch, labels, params, args.lam)
        worst = ("", 0.0)
        for name, t in params.tensors.items():
            for idx in np.ndindex(t.shape):
                old = t[idx]
                t[idx] = old + args.step
                up = loss(forward(batch, params), labels, args.lam)
                t[idx] = old - args.step
                down = loss(forward(batch, params), labels, args.lam)
                t[idx] = old
                num = (up - down) / (2 * args.step)
                rel = abs(num - grads[name][idx]) / max(abs(num), abs(grads[name][idx]), 1e-6)
                if rel > worst[1]:
                    worst = (f"{name}{list(idx)}", rel)
        print(f"instance {inst}: worst relative error {worst[1]:.2e} at {worst[0]}")


if __name__ == "__main__":
    main()
