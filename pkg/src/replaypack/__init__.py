"""Storage-budgeted compressed replay buffers with analytic quality selection.

The package answers one question for replay-based continual learning:
given a byte budget, at what compression quality should old exemplars be
stored?  Lower quality stores more samples but drifts their features;
the selector keeps the candidate qualities whose packed subsets preserve
feature-space volume (ratio within an epsilon band of 1) and among those
picks the one that stores the most samples.
"""

from .buffer import (
    BufferEntry,
    BufferManifest,
    build_buffer,
    load_buffer,
    shrink_buffer,
    shrink_buffer_dir,
)
from .compression import (
    BudgetScope,
    CompressorBackend,
    IdentityBackend,
    JpegBackend,
    PackingResult,
    StorageBudget,
    SyntheticBackend,
    interleave_rankings,
    make_backend,
    pack_for_quality,
    pack_phase,
    quantity_curve,
)
from .errors import (
    AlignmentError,
    BodySizeError,
    BufferIntegrityError,
    EmptyClassError,
    FeatureFormatError,
    MalformedHeaderError,
    ManifestError,
    NearSingularError,
    NonFiniteValueError,
    QualityRangeError,
    RankDeficientError,
    ReplayPackError,
    SidecarError,
    ZeroColumnError,
)
from .features import (
    DatasetManifest,
    FeatureMatrix,
    PhaseSpec,
    SampleRecord,
    load_dataset_manifest,
    read_feature_matrix,
    save_dataset_manifest,
    write_feature_matrix,
)
from .harness import (
    GridResult,
    GridRow,
    PhaseMetrics,
    SyntheticConfig,
    SyntheticDataset,
    averaged_forgetting,
    export_dataset,
    generate_synthetic,
    grid_search,
    run_continual,
    select_for_dataset,
)
from .selection import ClassRanking, class_mean, rank_by_mean_of_feature, rank_classes
from .selector import (
    DEFAULT_CANDIDATES,
    DEFAULT_EPSILON,
    PhaseInputs,
    QualityCandidateSet,
    QualityDecision,
    QualityReport,
    decide_across_phases,
    evaluate_candidates,
    select_quality,
)
from .volume import (
    VolumeReport,
    averaged_ratio,
    log_volume,
    normalize_columns,
    phase_ratio,
    volume_ratio,
)

__version__ = "0.1.0"
