# %% [markdown]
# # Estimating W1 with a comparison-trained critic
#
# Train only the critic between two fixed 2D mixtures. At each evaluation the
# trace holds J1..J4 on fixed pools, the exact W1 between those pools, branch
# counts and two Lipschitz estimates. A short run keeps this quick; the
# acceptance suite uses batch 256 and 2000 iterations.

# %%
from cowgan.measures import benchmark_4x4_gaussians
from cowgan.training import ExperimentConfig, estimate_distance

mu, nu = benchmark_4x4_gaussians()
cfg = ExperimentConfig(method="cowgan", batch_size=128, iterations=600, eval_every=100,
                       eval_pool=512, d_lr=2e-4)

trace = estimate_distance(cfg, mu, nu)
print(" iter      J1      J2      J3      J4       W    lip  j1/j2/j3")
for r in trace:
    print(f"{r.iter:5d} {r.j1:7.4f} {r.j2:7.4f} {r.j3:7.4f} {r.j4:7.4f} {r.w_oracle:7.4f} "
          f"{r.lip_cross:6.3f}  {r.branch_j1}/{r.branch_j2}/{r.branch_j3}")
