"""Plain-numpy reference implementations used as independent oracles.

Nothing here touches the autodiff engine: networks are evaluated from the
flat parameter vector with explicit loops over layers, and gradients are
checked with central finite differences.
"""

import numpy as np


def unpack(flat, dims):
    out, k = [], 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = flat[k:k + fan_in * fan_out].reshape(fan_in, fan_out)
        k += fan_in * fan_out
        b = flat[k:k + fan_out]
        k += fan_out
        out.append((w, b))
    return out


def act(name, z, leak=0.2):
    if name == "leaky_relu":
        return np.where(z > 0, z, leak * z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def act_slope(name, z, leak=0.2):
    if name == "leaky_relu":
        return np.where(z > 0, 1.0, leak)
    if name == "relu":
        return (z > 0).astype(float)
    return np.ones_like(z)


def mlp(flat, dims, acts, x):
    h = np.asarray(x, dtype=float)
    for (w, b), a in zip(unpack(flat, dims), acts):
        h = act(a, h @ w + b)
    return h


def mlp_input_grad(flat, dims, acts, x):
    """d phi / d x for a scalar-output MLP, one row per input point."""
    h = np.asarray(x, dtype=float)
    slopes, layers = [], unpack(flat, dims)
    for (w, b), a in zip(layers, acts):
        z = h @ w + b
        slopes.append(act_slope(a, z))
        h = act(a, z)
    g = np.ones((h.shape[0], 1))
    for (w, _), s in reversed(list(zip(layers, slopes))):
        g = (g * s) @ w.T
    return g


def dist(x, y):
    return np.sqrt(((x[:, None, :] - y[None, :, :]) ** 2).sum(-1))


def objectives(fx, fy, x, y):
    c = dist(x, y)
    phi_c = (c - fx[:, None]).min(axis=0)
    neg_phi_c = (c + fy[None, :]).min(axis=1)
    return (fx.mean() - fy.mean(), fx.mean() + phi_c.mean(),
            neg_phi_c.mean() - fy.mean(), neg_phi_c.mean() + phi_c.mean())


def gp_penalty(flat, dims, acts, x_hat):
    g = mlp_input_grad(flat, dims, acts, x_hat)
    return float(((np.sqrt((g * g).sum(1)) - 1.0) ** 2).mean())


def central_diff(f, p, h=1e-5):
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    for i in range(p.size):
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (f(up) - f(dn)) / (2 * h)
    return out


def max_rel_err(a, b, floor=1e-6):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def vec_rel_err(a, b, floor=1e-5):
    """|a - b| / max(|a|, |b|, floor) on whole vectors.

    ``floor`` sits at the resolution of central differences with h=1e-5 on
    O(1) objectives (roundoff ~1e-10 per component), so an exactly zero
    gradient is compared absolutely instead of against pure noise.
    """
    a, b = np.ravel(a).astype(float), np.ravel(b).astype(float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))
