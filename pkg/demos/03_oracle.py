# %% [markdown]
# # Exact transport between point clouds, and the median pitfall
#
# ``exact_w1`` solves the assignment problem on the Euclidean cost matrix.
# In 1D the sorted matching gives the same number. The second half shows why
# averaging mini-batch transport costs is a poor training signal: with one
# generated point per batch the best point mass sits at a median of the data.

# %%
import numpy as np

from cowgan.oracle import brute_force_w1, exact_w1, median_minimizer, w1_sorted_1d

rng = np.random.default_rng(3)
a, b = rng.normal(size=(6, 2)), rng.normal(size=(6, 2)) + [2.0, 0.0]
c = exact_w1(a, b)
print("assignment", c.assignment, "cost", c.cost, "brute force", brute_force_w1(a, b))

xs, ys = rng.normal(size=500), rng.exponential(size=500)
print("1D: assignment", exact_w1(xs, ys).cost, " sorted", w1_sorted_1d(xs, ys))

# %%
data = np.array([-2.0, -1.0, 0.5, 4.0, 9.0])
cert = median_minimizer(data)
print("minimizer", cert.minimizer, "median interval", cert.interval)
print("value", cert.value, "closed form", cert.closed_form)
