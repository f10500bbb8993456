"""Comparison-based Wasserstein GAN training on numpy.

The critic is trained by comparing three empirical dual objectives and
ascending whichever one exposes a Lipschitz violation; an exact assignment
solver supplies ground-truth W1 values to check the estimates against.
"""

from .autodiff import Tensor, grad, no_grad
from .measures import (DatasetPool, EmpiricalMeasure, GaussianMixture, GeneratorMeasure,
                       benchmark_4x4_gaussians, load_pointcloud, sample, save_pointcloud)
from .nn import Adam, MlpNetwork, adam_step, load_params, save_params
from .oracle import Coupling, exact_w1, median_minimizer, w1_sorted_1d
from .training import (ExperimentConfig, TrainingTrace, critic_step_cowgan, critic_step_cowgan_p,
                       critic_step_ctransform, critic_step_wgan_gp, estimate_distance, train_gan)
from .transport import (ObjectiveReport, c_transform, check_admissibility, evaluate_objectives,
                        lipschitz_estimate)

__version__ = "0.1.0"
