"""Safe deep Q-learning with Wasserstein-DRO constraint tightening, a
battery fast-charging environment, a DQN baseline, and an experiment
harness."""

from .agent import (
    DqnAgent,
    DrqAgent,
    FitReport,
    InputEncoder,
    TransitionRecord,
    constraint_cost,
    run_episode,
    run_greedy_eval,
)
from .battery import BatteryEnv, EcmParams, EcmState, OcvTable, action_grid, default_ocv, load_ocv
from .dro import DroOffset, WassersteinConfig, compute_offset, epsilon_radius, normalize, solve_sigma, worst_case_probability
from .harness import ExperimentConfig, compute_stats, parse_config, run_experiment
from .nn import LabeledDataset, LayerSpec, MlpParams, TrainConfig, fit, forward, gradient

__version__ = "0.1.0"
