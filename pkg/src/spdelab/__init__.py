"""spdelab: moderately interacting particle systems with shared environmental
noise, their limiting stochastic Fokker-Planck dynamics on the torus, and the
measurement harness that estimates how fast the smoothed empirical measure
converges to the field solution."""

from .drift import DriftSpec, eval_FA, eval_drift, eval_fA
from .harness import (
    ExperimentConfig,
    build_setup,
    preset,
    run_convergence_study,
    run_coupled,
    run_corollary_empirical,
    run_replica,
    validate_config,
)
from .kernels import (
    KernelSpec,
    apply_kernel,
    biot_savart_2d,
    custom_multiplier,
    dirac,
    keller_segel,
    mollified_kernel,
)
from .metrics import (
    RateReport,
    fit_rate,
    kr_bruteforce_dual,
    kr_distance_1d,
    lm_moment,
    predicted_rate,
    sup_lq_discrepancy,
)
from .mollifier import MollifierSpec, eval_V, eval_VN, vn_gradient_norm_q
from .particles import (
    BrownianPaths,
    CutoffMonitor,
    NoiseModel,
    ParticleEnsemble,
    deposit,
    em_step,
    interaction_force,
    mollify,
)
from .spde import Solver, heat_then_translate, weak_form_residual
from .torus import FieldState, PeriodicGrid, lq_norm, wrap

__version__ = "0.1.0"
