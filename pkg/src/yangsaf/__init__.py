"""F0 and aperiodicity analysis with harmonic refinement and time warping."""
from .config import AnalysisConfig
from .evaluation import fmtf, rms_cent_error, snr_sweep
from .frontend import analyze_frontend, design_channels
from .mixing import optimal_weights
from .refinement import (PipelineResult, refine_harmonic, refine_warped, run_pipeline,
                         warp_time_axis)
from .signal_core import AudioBuffer, ParameterError, make_kernel_pair
from .testgen import TestSignalSpec, synthesize
from .tracker import F0Trajectory, NoPeriodicEvidence, initial_estimate

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "AudioBuffer", "F0Trajectory", "NoPeriodicEvidence", "ParameterError",
    "PipelineResult", "TestSignalSpec", "analyze_frontend", "design_channels", "fmtf",
    "initial_estimate", "make_kernel_pair", "optimal_weights", "refine_harmonic",
    "refine_warped", "rms_cent_error", "run_pipeline", "snr_sweep", "synthesize",
    "warp_time_axis",
]
