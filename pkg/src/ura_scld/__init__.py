"""Coded compressed sensing for unsourced random access with a massive-MIMO receiver.

Outer tree code, covariance-based activity detection, and successive
cancellation list decoding that prunes the detector's codebook slot by slot.
"""
from .activity_detection import (
    ADConfig,
    GammaEstimate,
    coordinate_descent,
    coordinate_step,
    nll_objective,
    select_fragments,
    step_size,
)
from .channel import SlotObservation, sample_covariance, simulate_slot
from .codebook import Codebook, SupportSet, admissible_support, generate_codebook, subblock_index
from .errors import InvalidConfig, InvalidGenerator, InvalidPayload, NumericalFailure
from .experiment import ExperimentConfig, ExperimentReport, TrialResult, pupe, run_experiment, run_trial
from .pipeline import DecodeResult, decode_baseline, decode_scld
from .tree_code import (
    ParityGenerators,
    ParityPatternSet,
    ParityProfile,
    PathList,
    compute_parity,
    encode_outer,
    extend_paths,
    finalize_paths,
    permissible_parities,
    split_payload,
    tree_decode_baseline,
)

__version__ = "0.1.0"
