import numpy as np

from cowgan.nn import MlpNetwork
from cowgan.transport import cone_potential, linear_potential

import reference as ref


def random_admissible_potential(rng, d=2):
    """A random member of the cone or unit-linear 1-Lipschitz families."""
    if rng.uniform() < 0.5:
        k = int(rng.integers(1, 6))
        return cone_potential(rng.uniform(-3, 6, size=(k, d)), rng.normal(scale=2.0, size=k))
    a = rng.normal(size=d)
    a *= rng.uniform(0.0, 1.0) / np.linalg.norm(a)
    if rng.uniform() < 0.5:
        a /= np.linalg.norm(a)
    return linear_potential(a, rng.normal())


def plant_violation(rng, d=2, width=16, step=0.05, scale=3.0):
    """Random steep network plus a pair (x, y) with phi(x) - phi(y) > |x - y|.

    y is placed a short step from x against the input gradient, so the
    excess is roughly (|grad phi(x)| - 1) * step.
    """
    while True:
        net = MlpNetwork.discriminator(d, width=width, seed=int(rng.integers(1 << 30)))
        net.set_params(scale * net.params + 0.1 * rng.normal(size=net.num_params))
        x = rng.normal(scale=2.0, size=d)
        g = ref.mlp_input_grad(net.params, net.layer_dims, net.activations, x[None])[0]
        if np.linalg.norm(g) <= 1.2:
            continue
        y = x - step * g / np.linalg.norm(g)
        vals = ref.mlp(net.params, net.layer_dims, net.activations, np.stack([x, y]))[:, 0]
        excess = vals[0] - vals[1] - np.linalg.norm(x - y)
        if excess > 1e-6:
            return net, x, y, excess
