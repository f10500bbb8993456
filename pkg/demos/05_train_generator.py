# %% [markdown]
# # Training a generator
#
# The generator minimizes J1 against the critic; the critic follows the
# comparison rule with two critic steps per generator step. ``w_oracle`` in the trace is the exact W1
# between a fixed target pool and the generator's output on fixed noise.

# %%
import numpy as np

from cowgan.measures import benchmark_4x4_gaussians
from cowgan.training import ExperimentConfig, train_gan

target, _ = benchmark_4x4_gaussians()
cfg = ExperimentConfig(method="cowgan", batch_size=64, iterations=2000, n_critic=2, eval_every=250,
                       eval_pool=256, d_lr=5e-4, g_lr=2e-4, gen_width=64, disc_width=64)
trace = train_gan(cfg, target)
for r in trace:
    print(f"iter {r.iter:5d}  J1 {r.j1:.4f}  W {r.w_oracle:.4f}")

gen = trace.meta["generated"].points
print("generated mean", gen.mean(0).round(3), " target means lie at (+-1, +-1)")
print("quadrant counts", np.histogram2d(gen[:, 0], gen[:, 1], bins=[[-9, 0, 9], [-9, 0, 9]])[0].ravel())
