"""Blind separation of sparse, partially correlated sources.

The package covers the whole experimental loop: synthetic mixtures of
smoothed spike trains (spcgen), translation-invariant wavelet frames
(transforms), the gmca and amca alternating estimators (separation),
mixing-matrix and distortion scoring (metrics), and seeded Monte-Carlo
sweeps (harness). The numerical hot spots run on a compiled extension
when available and a pure numpy twin otherwise; see spcbss.backend.
"""

from .backend import backend_name
from .errors import (
    DegenerateMatchError,
    GenerationError,
    InvalidConfigError,
    SeparationFailureError,
)
from .harness import (
    ExperimentSpec,
    SweepRow,
    aggregate_rows,
    default_experiments,
    emit_csv,
    emit_plotdata,
    load_spec,
    run_sweep,
)
from .matio import load_matrix, save_matrix
from .metrics import (
    MatchResult,
    SdrDecomposition,
    SdrEvaluator,
    match_and_scale,
    mixing_criterion,
    score_result,
    sdr,
    sdr_decompose,
)
from .rng import derive_seed, make_rng
from .separation import (
    AlgoParams,
    SeparationResult,
    TraceRecord,
    compute_weights,
    hard_threshold,
    init_mixing,
    mad_sigma,
    q_schedule,
    run,
    soft_threshold,
    threshold_schedule,
    update_mixing,
    update_sources,
)
from .spcgen import (
    GroundTruth,
    SpcConfig,
    SupportSets,
    generate,
    laplacian_kernel,
    laplacian_smooth,
    mix_with_noise,
    sample_amplitudes,
    sample_mixing,
    sample_supports,
)
from .transforms import (
    FrameSpec,
    analyze,
    analyze_matrix,
    default_levels,
    parse_frame,
    synthesize,
    synthesize_matrix,
)

__version__ = "0.1.0"
