# %% [markdown]
# # Four batch objectives and the admissibility check
#
# For a potential phi and two batches, J1 compares raw potentials while J2, J3
# and J4 replace one or both sides by c-transforms restricted to the batch
# support. An admissible phi (phi(x) - phi(y) <= |x - y| on the batch pairs)
# keeps them ordered: J1 <= J2, J3 <= J4. A violated pair pushes J2 and J3
# below J1 instead.

# %%
import numpy as np

from cowgan import autodiff as ad
from cowgan.measures import EmpiricalMeasure, benchmark_4x4_gaussians
from cowgan.transport import check_admissibility, evaluate_objectives, linear_potential

rng = np.random.default_rng(0)
mu, nu = benchmark_4x4_gaussians()
x, y = mu.sample(64, rng), nu.sample(64, rng)

# %%
# a 1-Lipschitz potential: projection on -e1 (points of nu sit to the right)
phi = linear_potential([-1.0, 0.0])
rep = evaluate_objectives(phi, x, y)
print("admissible phi :", " ".join(f"J{i + 1}={v:.4f}" for i, v in enumerate(rep.values())))
print("ordered        :", rep.ordered())

# %%
# three times steeper: no longer admissible
steep = lambda p: ad.mul(ad.as_tensor(3.0), phi(p))
rep = evaluate_objectives(steep, x, y)
print("steep phi      :", " ".join(f"J{i + 1}={v:.4f}" for i, v in enumerate(rep.values())))
viol = check_admissibility(steep, x.points, y.points)
print(f"{len(viol)} violating pairs; worst excess {viol[0].excess:.4f} at x={viol[0].x}, y={viol[0].y}")

# %%
# on single points the comparison is a witness: J2 < J1 and J3 < J1
v = viol[0]
rep = evaluate_objectives(steep, EmpiricalMeasure.dirac(v.x), EmpiricalMeasure.dirac(v.y))
print(f"singleton batch: J1={rep.j1:.4f}  J2={rep.j2:.4f}  J3={rep.j3:.4f}")
