"""prunelab: a teacher-student pruning laboratory.

Two-layer networks with the erf sigmoid are trained by online SGD on
teacher-generated Gaussian streams, pruned five ways (DPP / random /
importance node pruning; random / importance edge pruning), and measured
against exact closed-form generalization-error predictions.

Quick tour:

    netcore   -- networks, activation, forward pass, data generation
    trainer   -- online SGD with convergence and specialization checks
    analytics -- overlap matrices, closed-form and Monte-Carlo error
    dpp       -- kernels and exact k-DPP sampling
    pruning   -- the five pruning methods, parameter matching, reweighting
    theory    -- closed-form error formulas for pruned converged networks
    harness   -- multi-round experiments, records, the benchmark table
    verify    -- the closed-form-vs-simulation check suite
"""

from . import analytics, dpp, harness, netcore, pruning, theory, trainer, verify
from .analytics import (
    GEEstimate,
    GroupAssignment,
    OrderParams,
    assign_groups,
    canonicalize_signs,
    ge_closed_form,
    ge_monte_carlo,
    order_params,
)
from .dpp import DppKernel, KdppSampler, activation_kernel, analytic_kernel, kdpp_subset_prob, sample_kdpp
from .harness import (
    ExperimentConfig,
    ExperimentRecord,
    emit,
    reproduce_table,
    run_experiment,
    run_round,
    summarize,
)
from .netcore import (
    InputSample,
    NoiseConfig,
    TwoLayerNet,
    activation,
    activation_deriv,
    forward,
    forward_many,
    make_student,
    make_teacher,
    sample_input,
    teacher_label,
)
from .pruning import (
    EdgeMask,
    MatchSpec,
    NodeMask,
    apply_mask,
    match_params,
    optimal_edge_scale,
    prune_dpp_node,
    prune_importance_edge,
    prune_importance_node,
    prune_random_edge,
    prune_random_node,
    reweight_edge_scale,
    reweight_node,
)
from .theory import (
    DiffGrid,
    TheoryParams,
    dpp_node_minus_random_edge_grid,
    expected_edge_order_params,
    ge_dpp_node,
    ge_dpp_node_reweighted,
    ge_node_pruned,
    ge_random_edge,
    ge_random_edge_rescaled,
    ge_random_node_expected,
    reweighted_dpp_minus_rescaled_edge_grid,
)
from .trainer import TrainConfig, TrainTrace, sgd_step, train
from .verify import verify_theorems

__version__ = "0.1.0"
