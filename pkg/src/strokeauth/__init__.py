"""Touchscreen drawn-password verification.

Capture strokes, turn them into multichannel time functions, compare
them with elastic alignment or a Siamese recurrent scorer, and evaluate
verification accuracy with a reproducible enrollment/test protocol.
"""

from .align import AlignmentPath, DtwConfig, apply_path, dtw, dtw_multichannel, sw_dtw, sw_dtw_multichannel
from .data import (
    Dataset,
    ImportResult,
    Split,
    SplitSpec,
    export_dataset,
    import_dataset,
    make_split,
)
from .errors import (
    CheckpointError,
    DatasetError,
    InsufficientLengthError,
    InvalidInputError,
    MalformedSampleError,
    ProtocolError,
    StrokeAuthError,
    TrainingDivergedError,
)
from .evalproto import (
    ProtocolConfig,
    ProtocolReport,
    compute_eer,
    det_curve,
    fuse_password,
    rank_characters,
    run_protocol,
    score_zvs1,
)
from .features import CHANNEL_NAMES, TimeFunctionSet, extract_time_functions, z_normalize
from .scorers import DtwScorer, RnnScorer, SwDtwScorer, TaRnnScorer, get_scorer, prepare_sample
from .strokes import StrokeSample, resample_uniform, validate_sample
from .synth import SynthConfig, SynthTruth, generate_synthetic, preset_config

__version__ = "0.1.0"

__all__ = [
    "AlignmentPath",
    "CHANNEL_NAMES",
    "CheckpointError",
    "Dataset",
    "DatasetError",
    "DtwConfig",
    "DtwScorer",
    "ImportResult",
    "InsufficientLengthError",
    "InvalidInputError",
    "MalformedSampleError",
    "ProtocolConfig",
    "ProtocolError",
    "ProtocolReport",
    "RnnScorer",
    "Split",
    "SplitSpec",
    "StrokeAuthError",
    "StrokeSample",
    "SwDtwScorer",
    "SynthConfig",
    "SynthTruth",
    "TaRnnScorer",
    "TimeFunctionSet",
    "TrainingDivergedError",
    "apply_path",
    "compute_eer",
    "det_curve",
    "dtw",
    "dtw_multichannel",
    "export_dataset",
    "extract_time_functions",
    "fuse_password",
    "generate_synthetic",
    "get_scorer",
    "import_dataset",
    "make_split",
    "prepare_sample",
    "preset_config",
    "rank_characters",
    "resample_uniform",
    "run_protocol",
    "score_zvs1",
    "sw_dtw",
    "sw_dtw_multichannel",
    "validate_sample",
    "z_normalize",
]
