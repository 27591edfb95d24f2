"""Online prediction for partially observed linear dynamical systems with spectral filters."""

from .errors import SlipError
from .lds import InputSpec, KalmanSolution, LdsParams, Trajectory, simulate, solve_dare
from .spectral import FilterBank, spectral_filters
from .features import compute_features
from .predictor import RegretTrace, run_slip, run_truncated, run_wave, slip_init, slip_predict, slip_update
from .harness import ExperimentConfig, preset, run_experiment, summarize, sweep_filters

__version__ = "0.1.0"
