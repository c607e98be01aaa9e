"""Losses, oracle masks, metrics, and optimization experiments for
magnitude/phase compensation in time-frequency source separation."""

from .compensation import (
    Histogram2D,
    compensated_magnitude,
    histogram2d,
    optimal_magnitude_along_phase,
    phase_diff_map,
)
from .losses import (
    LossKind,
    LossTag,
    LossValue,
    SourceTargets,
    all_loss_kinds,
    evaluate_loss,
    pit_wrap,
)
from .masks import MaskKind, MaskMatrix, apply_mask_resynth, iam, masked_magnitude, psa_target, psm
from .metrics import MetricReport, msnr, psnr, report, si_sdr, snr
from .optim import (
    OptimizationProblem,
    OptimizationResult,
    Parameterization,
    Targets,
    TrajectoryRecord,
    TrendReport,
    optimize,
    run_trend_experiment,
)
from .scenes import HarmonicTarget, Interference, ReverbSpec, Scene, SceneSpec, synth_rir, synth_scene
from .stft import WindowPair, consistency_project, istft, stft, window_pair
from .types import (
    MagSpectrogram,
    Spectrogram,
    StftConfig,
    TimeSignal,
    WindowKind,
    magnitude_of,
    phase_of,
    validate_magnitude,
    validate_signal,
    validate_spectrogram,
)

__version__ = "0.1.0"
