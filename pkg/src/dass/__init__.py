"""Adaptive sparse sensing for sensor networks.

Learn a low-dimensional block model online from incomplete measurements,
choose each block's sampling pattern greedily against that model, and
reconstruct by least squares with a computable error bound.
"""
from .core import (FieldBlock, Measurement, ModelNotReady, PreconditionError, SamplingPattern,
                   SignalModel, add_noise, apply_pattern, make_rng, rmse, sense)
from .cs import L1Config, L1Result, l1_reconstruct, optimality_certificate
from .energy import EnergyPlatform, energy_saving, energy_saving_grid, preset, zero_crossing
from .kernels import BACKEND
from .model import (Learner, LearnerConfig, batch_model, interpolate_block, load_model,
                    select_dimension, update_model_buffer, update_model_incremental)
from .recon import (IllConditionedPattern, UnderdeterminedError, error_bound, expected_mse,
                    ols_reconstruct, theta_cost)
from .scheduler import (baseline_pattern, exhaustive_oracle, frame_potential, greedy_schedule,
                        greedy_set)
from .simulator import (ExperimentConfig, ExperimentReport, joint_vs_independent_ratio,
                        run_experiment, sweep)
from .synth import SynthParams, generate_synthetic

__version__ = "0.1.0"
