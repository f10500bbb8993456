"""Critic updates and training loops.

Four critic rules share one loop:

``cowgan``
    Ascend J2 if J2 < J1, else J3 if J3 < J1, else J1.
``cowgan_p``
    Same, but the J2 branch is only taken when a fresh uniform draw is below
    ``mix_prob``.
``ctransform``
    Always ascend J2.
``wgan_gp``
    Ascend J1 - lambda * mean((|grad phi(x_hat)| - 1)^2) with x_hat on
    segments between paired batch points.

:func:`estimate_distance` trains only the critic between two fixed sources;
:func:`train_gan` alternates ``n_critic`` critic steps with one generator
step on J1.
"""

import csv
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .errors import ContractError, NonFiniteError
from .measures import DatasetPool, EmpiricalMeasure, GeneratorMeasure
from .nn import Adam, MlpNetwork, descend, save_params
from .oracle import exact_w1
from .transport import evaluate_objectives, lipschitz_estimate

METHODS = ("cowgan", "cowgan_p", "ctransform", "wgan_gp")
BRANCHES = ("j1", "j2", "j3")


@dataclass
class ExperimentConfig:
    method: str = "cowgan"
    batch_size: int = 256
    iterations: int = 2000
    n_critic: int = 1
    gp_lambda: float = 10.0
    mix_prob: float = 0.5
    d_lr: float = None  # 1e-4 for wgan_gp, 5e-5 otherwise
    g_lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_every: int = 100
    eval_pool: int = 2048
    lip_samples: int = 64
    disc_width: int = 128
    disc_depth: int = 2
    gen_width: int = 128
    gen_depth: int = 2
    noise_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.d_lr is None:
            self.d_lr = 1e-4 if self.method == "wgan_gp" else 5e-5
        self.validate()

    def validate(self):
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}; choose from {METHODS}")
        for name in ("batch_size", "iterations", "n_critic", "eval_every", "eval_pool", "lip_samples"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.gp_lambda < 0:
            raise ContractError("gp_lambda must be >= 0")
        if not 0 <= self.mix_prob <= 1:
            raise ContractError("mix_prob must lie in [0, 1]")
        if self.d_lr < 0 or self.g_lr < 0:
            raise ContractError("learning rates must be >= 0")

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    def to_dict(self):
        return asdict(self)

    def critic_adam(self):
        return Adam(lr=self.d_lr, beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps, source="critic")

    def generator_adam(self):
        return Adam(lr=self.g_lr, beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps, source="generator")


# --- critic steps ----------------------------------------------------------------

def _objectives(phi, mu_n, nu_n):
    try:
        return evaluate_objectives(phi, mu_n, nu_n)
    except NonFiniteError as exc:
        raise NonFiniteError(exc.message, source=exc.source,
                             payload={"mu_n": mu_n.points, "nu_n": nu_n.points}) from exc


def _ascend(phi, objective, adam, branch, mu_n, nu_n):
    try:
        descend(phi, ad.neg(objective), adam, source=branch)
    except NonFiniteError as exc:
        raise NonFiniteError(exc.message, source=branch,
                             payload={"mu_n": mu_n.points, "nu_n": nu_n.points}) from exc


def choose_branch(report, allow_j2=True):
    """Algorithm branch for a report: strict comparisons against J1, no epsilon."""
    if allow_j2 and report.j2 < report.j1:
        return "j2"
    if report.j3 < report.j1:
        return "j3"
    return "j1"


def critic_step_cowgan(phi, mu_n, nu_n, adam):
    """One comparison-based critic update; returns the branch taken."""
    report = _objectives(phi, mu_n, nu_n)
    branch = choose_branch(report)
    _ascend(phi, report.terms[branch], adam, branch, mu_n, nu_n)
    return branch


def critic_step_cowgan_p(phi, mu_n, nu_n, adam, rng, mix_prob=0.5):
    """Comparison update whose J2 branch is gated by ``uniform() < mix_prob``.

    One uniform is drawn per call whether or not it is used.
    """
    gate = rng.uniform() < mix_prob
    report = _objectives(phi, mu_n, nu_n)
    branch = choose_branch(report, allow_j2=gate)
    _ascend(phi, report.terms[branch], adam, branch, mu_n, nu_n)
    return branch


def critic_step_ctransform(phi, mu_n, nu_n, adam):
    """Always ascend J2."""
    report = _objectives(phi, mu_n, nu_n)
    _ascend(phi, report.terms["j2"], adam, "j2", mu_n, nu_n)
    return "j2"


def interpolate(mu_n, nu_n, rng):
    """Points t*x_i + (1-t)*y_i with one t ~ U(0, 1) per pair."""
    x, y = mu_n.points, nu_n.points
    if x.shape != y.shape:
        raise ContractError("gradient penalty pairs batches of equal shape")
    t = rng.uniform(size=(x.shape[0], 1))
    return t * x + (1.0 - t) * y


def gradient_penalty(phi, x_hat):
    """mean_k (|grad_x phi(x_hat_k)| - 1)^2, differentiable in phi's weights."""
    xh = ad.Tensor(x_hat, requires_grad=True)
    out = ad.as_tensor(phi(xh)).sum()
    g = ad.grad(out, xh, create_graph=True)
    norms = ad.sqrt((g * g).sum(axis=1))
    return ((norms - 1.0) ** 2).mean()


def wgan_gp_objective(phi, mu_n, nu_n, lam, x_hat):
    fx = ad.as_tensor(phi(mu_n.as_tensor())).reshape(-1)
    fy = ad.as_tensor(phi(nu_n.as_tensor())).reshape(-1)
    j1 = fx.mean() - fy.mean()
    if lam == 0:
        return j1
    return j1 - lam * gradient_penalty(phi, x_hat)


def critic_step_wgan_gp(phi, mu_n, nu_n, adam, lam, rng):
    """One gradient-penalty critic update (counted as a J1 step)."""
    if lam < 0:
        raise ContractError("gp lambda must be >= 0")
    x_hat = interpolate(mu_n, nu_n, rng)
    try:
        objective = wgan_gp_objective(phi, mu_n, nu_n, lam, x_hat)
    except NonFiniteError as exc:
        raise NonFiniteError(exc.message, source="wgan_gp",
                             payload={"mu_n": mu_n.points, "nu_n": nu_n.points}) from exc
    _ascend(phi, objective, adam, "wgan_gp", mu_n, nu_n)
    return "j1"


class Critic:
    """Binds a method and its random streams to a network and optimizer."""

    def __init__(self, cfg, phi, gate_rng, gp_rng):
        self.cfg, self.phi = cfg, phi
        self.adam = cfg.critic_adam()
        self.gate_rng, self.gp_rng = gate_rng, gp_rng

    def step(self, mu_n, nu_n):
        cfg = self.cfg
        if cfg.method == "cowgan":
            return critic_step_cowgan(self.phi, mu_n, nu_n, self.adam)
        if cfg.method == "cowgan_p":
            return critic_step_cowgan_p(self.phi, mu_n, nu_n, self.adam, self.gate_rng, cfg.mix_prob)
        if cfg.method == "ctransform":
            return critic_step_ctransform(self.phi, mu_n, nu_n, self.adam)
        return critic_step_wgan_gp(self.phi, mu_n, nu_n, self.adam, cfg.gp_lambda, self.gp_rng)


# --- traces ----------------------------------------------------------------------

TRACE_COLUMNS = ("iter", "j1", "j2", "j3", "j4", "w_oracle", "lip_cross", "lip_within",
                 "branch_j1", "branch_j2", "branch_j3")


@dataclass
class TraceRow:
    iter: int
    j1: float
    j2: float
    j3: float
    j4: float
    w_oracle: float
    lip_cross: float
    lip_within: float
    branch_j1: int
    branch_j2: int
    branch_j3: int
    wall_ms: float = field(default=0.0, compare=False)

    def rel_gap(self):
        return abs(self.j1 - self.w_oracle) / self.w_oracle if self.w_oracle > 0 else float("nan")

    def spread(self):
        js = (self.j1, self.j2, self.j3, self.j4)
        return max(js) - min(js)


def _fmt(v):
    return str(v) if isinstance(v, (int, np.integer)) else format(float(v), ".17g")


@dataclass
class TrainingTrace:
    rows: list = field(default_factory=list)
    pool_size: int = 0
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    @property
    def final(self):
        return self.rows[-1]

    def write_csv(self, path):
        """Metric columns only; wall-clock times go to :meth:`write_timings` so reruns compare byte-for-byte."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in self.rows:
                w.writerow([_fmt(getattr(row, c)) for c in TRACE_COLUMNS])

    def write_timings(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iter", "wall_ms"))
            for row in self.rows:
                w.writerow((row.iter, format(row.wall_ms, ".3f")))

    @classmethod
    def read_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                vals = {k: (int(v) if k == "iter" or k.startswith("branch") else float(v))
                        for k, v in rec.items()}
                trace.rows.append(TraceRow(**vals))
        return trace


# --- loops -------------------------------------------------------------------------

def _streams(seed):
    names = ("init", "batch", "gate", "gp", "eval", "gen_init", "pool")
    children = np.random.SeedSequence(seed).spawn(len(names))
    streams = {name: np.random.default_rng(child) for name, child in zip(names, children)}
    streams["pool_seed"] = children[-1]
    return streams


def _pool(source, n, seed_seq):
    # each side gets an identically seeded generator, so equal sources give equal pools
    rng = np.random.default_rng(seed_seq)
    if isinstance(source, DatasetPool):
        n = min(n, len(source))
        return EmpiricalMeasure(source.points[rng.choice(len(source), n, replace=False)])
    return source.sample(n, rng)


def _subsample(points, k, rng):
    return points[rng.choice(points.shape[0], min(k, points.shape[0]), replace=False)]


class _Evaluator:
    """Metrics on fixed evaluation pools; the oracle W1 is cached while pools stay put."""

    def __init__(self, cfg, mu_pool, nu_pool, rng):
        n = min(mu_pool.n, nu_pool.n)
        self.cfg, self.rng = cfg, rng
        self.mu_pool = EmpiricalMeasure(mu_pool.points[:n])
        self.nu_pool = EmpiricalMeasure(nu_pool.points[:n])
        self._w = None

    def set_nu_pool(self, nu_pool):
        self.nu_pool = EmpiricalMeasure(nu_pool.points[:self.mu_pool.n])
        self._w = None

    @property
    def w_oracle(self):
        if self._w is None:
            self._w = exact_w1(self.mu_pool, self.nu_pool).cost
        return self._w

    def row(self, it, phi, counts, wall_ms):
        with ad.no_grad():
            rep = evaluate_objectives(phi, self.mu_pool, self.nu_pool)
            k = self.cfg.lip_samples
            xa = _subsample(self.mu_pool.points, k, self.rng)
            yb = _subsample(self.nu_pool.points, k, self.rng)
            xw = _subsample(self.mu_pool.points, k, self.rng)
            lip_cross = lipschitz_estimate(phi, xa, yb)
            lip_within = lipschitz_estimate(phi, xw)
        return TraceRow(it, rep.j1, rep.j2, rep.j3, rep.j4, self.w_oracle, lip_cross, lip_within,
                        counts["j1"], counts["j2"], counts["j3"], wall_ms)


def _checkpoint(checkpoint_dir, it, phi, generator=None):
    if checkpoint_dir is None:
        return
    os.makedirs(checkpoint_dir, exist_ok=True)
    save_params(os.path.join(checkpoint_dir, f"critic_{it:07d}.f64"), phi.params)
    if generator is not None:
        save_params(os.path.join(checkpoint_dir, f"generator_{it:07d}.f64"), generator.params)


def _is_eval(it, cfg):
    return it % cfg.eval_every == 0 or it == cfg.iterations


def estimate_distance(cfg, mu_source, nu_source, phi=None, checkpoint_dir=None, log=None):
    """Train only the critic between two fixed sources and trace the four objectives.

    Objectives are reported on fixed evaluation pools of ``cfg.eval_pool``
    points drawn once from each source; ``w_oracle`` is the exact W1 between
    those pools.
    """
    s = _streams(cfg.seed)
    d = mu_source.d
    if nu_source.d != d:
        raise ContractError("sources live in different dimensions")
    if phi is None:
        phi = MlpNetwork.discriminator(d, cfg.disc_width, cfg.disc_depth, seed=s["init"])
    critic = Critic(cfg, phi, s["gate"], s["gp"])
    ev = _Evaluator(cfg, _pool(mu_source, cfg.eval_pool, s["pool_seed"]),
                    _pool(nu_source, cfg.eval_pool, s["pool_seed"]), s["eval"])
    trace = TrainingTrace(pool_size=ev.mu_pool.n, meta={"critic": phi})
    counts = dict.fromkeys(BRANCHES, 0)
    start = time.perf_counter()
    trace.rows.append(ev.row(0, phi, counts, 0.0))
    for it in range(1, cfg.iterations + 1):
        mu_n = mu_source.sample(cfg.batch_size, s["batch"])
        nu_n = nu_source.sample(cfg.batch_size, s["batch"])
        counts[critic.step(mu_n, nu_n)] += 1
        if _is_eval(it, cfg):
            row = ev.row(it, phi, counts, 1e3 * (time.perf_counter() - start))
            trace.rows.append(row)
            counts = dict.fromkeys(BRANCHES, 0)
            _checkpoint(checkpoint_dir, it, phi)
            if log is not None:
                log(row)
    return trace


def generator_step(phi, gen_measure, mu_n, n, adam, rng):
    """Minimize J1 over the generator weights with a fresh generated batch."""
    nu_n = gen_measure.sample(n, rng)
    fx = ad.as_tensor(phi(ad.Tensor(mu_n.points))).reshape(-1)
    fy = ad.as_tensor(phi(nu_n.tensor)).reshape(-1)
    j1 = fx.mean() - fy.mean()
    descend(gen_measure.generator, j1, adam, source="generator J1")
    return j1.item()


def train_gan(cfg, data_source, generator=None, phi=None, checkpoint_dir=None, log=None):
    """Alternate ``n_critic`` critic steps with one generator step on J1.

    Evaluation rows compare a fixed target pool with the generator's output
    on a fixed noise pool.
    """
    s = _streams(cfg.seed)
    d = data_source.d
    if generator is None:
        generator = MlpNetwork.generator(cfg.noise_dim, d, cfg.gen_width, cfg.gen_depth, seed=s["gen_init"])
    if generator.d_out != d:
        raise ContractError(f"generator emits d={generator.d_out} but data has d={d}")
    if phi is None:
        phi = MlpNetwork.discriminator(d, cfg.disc_width, cfg.disc_depth, seed=s["init"])
    gen = GeneratorMeasure(generator)
    critic = Critic(cfg, phi, s["gate"], s["gp"])
    g_adam = cfg.generator_adam()
    target_pool = _pool(data_source, cfg.eval_pool, s["pool_seed"])
    eval_noise = s["eval"].standard_normal((target_pool.n, gen.noise_dim))

    def generated_pool():
        with ad.no_grad():
            return EmpiricalMeasure(generator(eval_noise).data)

    ev = _Evaluator(cfg, target_pool, generated_pool(), s["eval"])
    trace = TrainingTrace(pool_size=ev.mu_pool.n, meta={"critic": phi, "generator": generator})
    counts = dict.fromkeys(BRANCHES, 0)
    start = time.perf_counter()
    trace.rows.append(ev.row(0, phi, counts, 0.0))
    for it in range(1, cfg.iterations + 1):
        for _ in range(cfg.n_critic):
            mu_n = data_source.sample(cfg.batch_size, s["batch"])
            with ad.no_grad():
                nu_n = gen.sample(cfg.batch_size, s["batch"])
            nu_n = EmpiricalMeasure(nu_n.points)
            counts[critic.step(mu_n, nu_n)] += 1
        mu_n = data_source.sample(cfg.batch_size, s["batch"])
        generator_step(phi, gen, mu_n, cfg.batch_size, g_adam, s["batch"])
        if _is_eval(it, cfg):
            ev.set_nu_pool(generated_pool())
            row = ev.row(it, phi, counts, 1e3 * (time.perf_counter() - start))
            trace.rows.append(row)
            counts = dict.fromkeys(BRANCHES, 0)
            _checkpoint(checkpoint_dir, it, phi, generator)
            if log is not None:
                log(row)
    trace.meta["generated"] = generated_pool()
    return trace
