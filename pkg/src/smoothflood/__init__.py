"""Flooding on smoothed dynamic graphs: samplers, adversaries, engine, harness."""

from .adversary import (
    AdaptiveSpoolingAdversary,
    AdversarySpec,
    AdversaryView,
    CassetteAdversary,
    LowChurnSpoolingAdversary,
    SpoolingAdversary,
    StarRecenterAdversary,
    StaticAdversary,
    build_adversary,
)
from .engine import TrialRecord, flood_step, run_trial
from .errors import (
    BudgetExceededError,
    ConfigError,
    SamplerStarvationError,
    SmoothFloodError,
    UsageError,
)
from .graph import EdgeDelta, Graph, apply_delta, diameter, hamming_distance, is_connected
from .harness import ExperimentConfig, run_experiment
from .smoothing import KSmooth, Proportional, Targeted, roundp_sample, sample_t_smoothing

__version__ = "0.1.0"
