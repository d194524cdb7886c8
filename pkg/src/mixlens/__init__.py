"""Two-level explanations and bias debugging for black-box audio models.

The package answers two questions about an audio regression model: which
parts of a clip (stems, bands, segments) drive one of its outputs, and which
mid-level feature carries an emotion prediction through the model's linear
head. On top of both sits a dataset-scale debugging pipeline that ties
prediction errors to tags, features, and sources.
"""

from .audio import (
    AudioClip,
    Decomposition,
    Mask,
    load_wav,
    mix,
    save_wav,
    validate_decomposition,
)
from .dataset import ManifestEntry, load_manifest
from .debugging import (
    ErrorRecord,
    ErrorRun,
    GroupEffectsReport,
    QuantileReport,
    SourceAttributionReport,
    compute_errors,
    group_effects_report,
    group_overestimation,
    quantile_report,
    run_debug_bundle,
    source_attribution_report,
)
from .decompose import (
    DEFAULT_STEM_LABELS,
    BandSplitConfig,
    StemLayout,
    band_bin_edges,
    band_decompose,
    stem_decompose,
    time_decompose,
)
from .effects import (
    EffectsVector,
    TwoLevelExplanation,
    aggregate_relative_effects,
    effects,
    relative_effects,
    two_level_explain,
)
from .errors import (
    AudioIOError,
    CapabilityError,
    DecompositionError,
    DegenerateExplanationError,
    LabelRangeWarning,
    ManifestError,
    MixlensError,
    PredictorError,
    ProtocolError,
    SingularSystemError,
    StemResidualWarning,
)
from .metrics import (
    BaselineStats,
    baseline_complexities,
    complexity,
    fidelity,
    random_baseline,
)
from .predictors import (
    ExternalPredictor,
    LinearHead,
    OutputVector,
    Predictor,
    SyntheticLinearPredictor,
    TwoLevelSyntheticPredictor,
    connect_external,
    make_synthetic_linear,
    make_synthetic_two_level,
    probe_clip,
    verify_head_consistency,
)
from .surrogate import (
    Explanation,
    PerturbationSet,
    SurrogateConfig,
    evaluate_perturbations,
    explain,
    fit_surrogate,
    generate_masks,
)
from .synth import build_planted_dataset

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "Decomposition",
    "Mask",
    "load_wav",
    "mix",
    "save_wav",
    "validate_decomposition",
    "ManifestEntry",
    "load_manifest",
    "ErrorRecord",
    "ErrorRun",
    "GroupEffectsReport",
    "QuantileReport",
    "SourceAttributionReport",
    "compute_errors",
    "group_effects_report",
    "group_overestimation",
    "quantile_report",
    "run_debug_bundle",
    "source_attribution_report",
    "DEFAULT_STEM_LABELS",
    "BandSplitConfig",
    "StemLayout",
    "band_bin_edges",
    "band_decompose",
    "stem_decompose",
    "time_decompose",
    "EffectsVector",
    "TwoLevelExplanation",
    "aggregate_relative_effects",
    "effects",
    "relative_effects",
    "two_level_explain",
    "MixlensError",
    "AudioIOError",
    "DecompositionError",
    "PredictorError",
    "ProtocolError",
    "CapabilityError",
    "DegenerateExplanationError",
    "SingularSystemError",
    "ManifestError",
    "StemResidualWarning",
    "LabelRangeWarning",
    "BaselineStats",
    "baseline_complexities",
    "complexity",
    "fidelity",
    "random_baseline",
    "ExternalPredictor",
    "LinearHead",
    "OutputVector",
    "Predictor",
    "SyntheticLinearPredictor",
    "TwoLevelSyntheticPredictor",
    "connect_external",
    "make_synthetic_linear",
    "make_synthetic_two_level",
    "probe_clip",
    "verify_head_consistency",
    "Explanation",
    "PerturbationSet",
    "SurrogateConfig",
    "evaluate_perturbations",
    "explain",
    "fit_surrogate",
    "generate_masks",
    "build_planted_dataset",
    "__version__",
]
