"""OTFS over multipath rapid-fading channels.

Delay-Doppler channel operators for ideal and rectangular pulses, a
time-domain reference chain, ML / MMSE / message-passing detectors,
pairwise-error analysis and a reproducible Monte Carlo BER harness.
"""

from .analysis import (build_codewords, condition_number, diversity_distribution,
                       effective_r, pep_chernoff, pep_monte_carlo)
from .channel import (ChannelRealization, FadingProcess, PathSpec, add_awgn, apply_channel,
                      make_rng, sample_channel)
from .dd_cir import (DdChannelOperator, beta_kernel, build_H_matrix, build_hdd_from_H,
                     ideal_pulse_hdd, pulse_hdd, quasi_static_hdd, rect_pulse_hdd, tf_cir)
from .detectors import make_constellation, ml_detect, mmse_detect, mp_detect
from .errors import ConfigError, NumericalError, OtfsLabError, PreconditionError, ResourceLimitError
from .harness import BerRecord, ExperimentConfig, load_config, run_ber, run_ofdm_baseline
from .transforms import dft_matrix, isfft, kron_dft_identity, sfft, unvec, vec
from .waveform import FrameParams, TimeSignal, heisenberg_modulate, matched_filter_demodulate

__version__ = "0.1.0"

__all__ = [
    "BerRecord", "ChannelRealization", "ConfigError", "DdChannelOperator", "ExperimentConfig",
    "FadingProcess", "FrameParams", "NumericalError", "OtfsLabError", "PathSpec",
    "PreconditionError", "ResourceLimitError", "TimeSignal", "add_awgn", "apply_channel",
    "beta_kernel", "build_H_matrix", "build_codewords", "build_hdd_from_H", "condition_number",
    "dft_matrix", "diversity_distribution", "effective_r", "heisenberg_modulate",
    "ideal_pulse_hdd", "isfft", "kron_dft_identity", "load_config", "make_constellation",
    "make_rng", "matched_filter_demodulate", "ml_detect", "mmse_detect", "mp_detect",
    "pep_chernoff", "pep_monte_carlo", "pulse_hdd", "quasi_static_hdd", "rect_pulse_hdd",
    "run_ber", "run_ofdm_baseline", "sample_channel", "sfft", "tf_cir", "unvec", "vec",
]
