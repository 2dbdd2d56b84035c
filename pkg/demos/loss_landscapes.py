"""Loss-surface slices and sharpness probes around trained models.

Trains two arms briefly, then cuts a filter-normalized random-direction
slice through each final model on a shared, fixed evaluation sample and
summarizes flatness with the gradient-norm proxy.  The CSV written at
the end is the same format the `fedpgn landscape` subcommand emits.
"""

import numpy as np

from fedpgn import config as cfgmod
from fedpgn import engine, probes
from fedpgn.numerics import stream

OVERRIDES = [
    "federation.n_clients=16", "federation.sample_size=4",
    "federation.local_steps=10", "federation.rounds=25",
    "federation.batch_size=25", "data.per_class=120", "data.spread=0.5",
    "partition.alpha=0.1",
]

finals = {}
cfg = None
for variant in ("dp-fedavg", "dp-fedpgn"):
    cfg = cfgmod.build_run_config(cfgmod.resolve(
        {}, overrides=OVERRIDES + [f"algorithm.variant={variant}"]))
    finals[variant] = engine.run(cfg).x_final

_, test = cfg.source.load(cfg.seed_data)
sample = probes.eval_sample(test, stream(cfg.seed_data, 7001), size=512)

print("sharpness proxies on the shared evaluation sample")
print(f"{'algorithm':<12} {'grad norm':>10} {'max rise at rho=0.5':>20}")
for variant, x in finals.items():
    probe = probes.sharpness_proxy(cfg.model, x, sample, rho_probe=0.5,
                                   rng=stream(99, 0))
    print(f"{variant:<12} {probe.grad_norm:>10.4f} {probe.max_rise:>20.4f}")

print()
grid = probes.landscape_slice(cfg.model, finals["dp-fedpgn"], sample,
                              probes.GridSpec(lim=1.0, resolution=9),
                              stream(99, 1))
center = grid.losses[4, 4]
print(f"9x9 slice around the dp-fedpgn model: center loss {center:.4f}, "
      f"corner losses "
      f"{grid.losses[0, 0]:.2f} {grid.losses[0, -1]:.2f} "
      f"{grid.losses[-1, 0]:.2f} {grid.losses[-1, -1]:.2f}")

from fedpgn.cli import write_landscape_csv

write_landscape_csv("landscape_demo.csv", grid)
print("wrote landscape_demo.csv (header row of b-offsets, rows of a, losses)")
