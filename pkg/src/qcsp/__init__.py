"""Quantum constraint satisfaction: operator-valued assignments, gap reductions and MaxCut intervals."""

__version__ = "0.1.0"

from .assignments import (
    ObservableAssignment,
    PvmAssignment,
    eval_csp_value,
    eval_labelcover_value,
    eval_lin_observable_value,
    long_code_encode,
    validate_assignment,
)
from .fourier import OperatorFunction, fourier_transform, influence, noise_stability, povm_from_observable_function
from .instances import (
    GeneralCspInstance,
    LabelCoverInstance,
    LinInstance,
    brute_force_classical_value,
    generate_planted_ulc,
    generate_random_ulc,
    maxcut_instance,
    validate_instance,
)
from .projectivize import decompose_to_pvms, minimal_projections, projectivize_assignment
from .reductions import (
    closed_form_psi_value,
    fold_2lin,
    fold_assignment,
    lift_completeness_2lin,
    lift_completeness_maxcut,
    reduce_ulc_to_2lin,
    reduce_ulc_to_maxcut,
    unfold_assignment,
)
from .sdp import alpha_gw, gw_round, interval_report, solve_maxcut_sdp, tsirelson_assignment
from .soundness import MaxCutParams, TwoLinParams, run_soundness_pipeline
