"""Convex optimization under adversarially perturbed gradient oracles."""

from .losses import (
    AggregateLoss,
    BinaryCrossEntropy,
    Dataset,
    LabeledPoint,
    LossKind,
    PointLoss,
    Quadratic,
    RobustRegression,
    aggregate,
    quadratic_aggregate,
    smoothness_constant,
    synth_dataset,
)
from .oracle import (
    HardInstance1D,
    HardKind,
    OracleStrategy,
    Strategy,
    hard_eval,
    hard_grad,
    make_oracle,
    reply,
    thm31_adversary_finalize,
)
from .optimizer import (
    OptimizerConfig,
    OptimizerRun,
    Termination,
    agp_opt,
    k_schedule,
    plain_gd,
    suboptimality_gap,
)
from .distributed import (
    Budget,
    ClientPool,
    Mode,
    SampledOracleConfig,
    compute_B0,
    full_oracle,
    query,
    run_dlagp,
    sampled_oracle,
    sampled_schedule,
)
from .estimation import PointSet, required_m, sampled_center, true_center

__version__ = "0.1.0"
