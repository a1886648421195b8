"""OTA emulation of a fully connected layer over multi-hop AF relays."""

from .allocation import (AllocationState, Heuristic, allocate,
                         heuristic_weights, pilot_dictionary_size,
                         tau_min_total, tau_minimums)
from .channel import (ChannelSet, EstimatedChannelSet, HopStatistics,
                      NoiseModel, PathlossParams, default_noise_model,
                      draw_channels, effective_channel, hop_statistics,
                      linear_gain, noise_covariance, noise_power_watts,
                      pathloss_db, relay_input_power, relay_input_powers,
                      transfer_matrix)
from .estimation import (PilotPlan, estimate_all, estimate_hop, inject_error,
                         make_pilots)
from .harness import (ConfigError, ExperimentConfig, ResultRow, SweepPoint,
                      TrialResult, config_from_dict, derive_trial_seed,
                      emit_csv, load_config, run_experiment, run_trial)
from .inference import (ImportedPipeline, SyntheticTask, accuracy,
                        digital_forward, imported_forward, load_pipeline,
                        make_synthetic_task, ota_forward, save_pipeline)
from .solver import (OtaParams, PowerBudget, SolveResult, SolverConfig,
                     SolverDivergenceError, TargetLayer, TrueEvaluation,
                     evaluate_true, objective, solve, update_a, update_f1,
                     update_f2)
from .topology import Placement, Topology, generate_placement

__version__ = "0.1.0"
