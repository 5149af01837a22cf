"""Low-rank tensor denoising: amplification, stable-rank methods and classic baselines."""

from .amplification import PHI_SIGMA4, AmplificationMap, amplify, phi_sigma4, stable_slice_rank_value
from .baselines import cp_als, hooi, multiway_wiener, rank_sweep
from .data import NoisyPair, SyntheticSpec, add_noise_to_snr, gen_nonuniform, gen_uniform, measure_snr_db
from .ecg import EcgRecord, TautStringResult, extract_features, form_tensor_full, form_tensor_windowed, taut_string
from .harness import ExperimentSpec, HyperGrid, TrialRecord, emit, run_experiment, summarize
from .outcome import DenoiseOutcome
from .stable_rank import StableRankConfig, denoise_amplification, denoise_slicerank, denoise_xrank, find_cutoff
from .tensor_core import DegenerateInputError, SvdFactors, flatten, fold, load_tensor, n_mode_product, save_tensor

__all__ = [
    "PHI_SIGMA4", "AmplificationMap", "amplify", "phi_sigma4", "stable_slice_rank_value",
    "cp_als", "hooi", "multiway_wiener", "rank_sweep",
    "NoisyPair", "SyntheticSpec", "add_noise_to_snr", "gen_nonuniform", "gen_uniform", "measure_snr_db",
    "EcgRecord", "TautStringResult", "extract_features", "form_tensor_full", "form_tensor_windowed", "taut_string",
    "ExperimentSpec", "HyperGrid", "TrialRecord", "emit", "run_experiment", "summarize",
    "DenoiseOutcome",
    "StableRankConfig", "denoise_amplification", "denoise_slicerank", "denoise_xrank", "find_cutoff",
    "DegenerateInputError", "SvdFactors", "flatten", "fold", "load_tensor", "n_mode_product", "save_tensor",
]
