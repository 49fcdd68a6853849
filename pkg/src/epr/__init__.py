"""Efficient sequence-based place recognition on sparse similarity matrices."""

__version__ = "0.1.0"

from .autotune import ThresholdModel, autotune, normal_quantile, robust_fit
from .engine import EngineState, EprConfig, EprEngine, RunReport, Strategy, run
from .errors import (
    DataError,
    DomainError,
    EprError,
    FormatError,
    IndexRangeError,
    TruncationError,
    ValidationError,
)
from .evaluation import (
    EvalReport,
    PrCurve,
    compare_runs,
    density_report,
    multi_matching_curve,
    single_matching_curve,
)
from .io import (
    DescriptorSet,
    GroundTruth,
    load_descriptors,
    load_ground_truth,
    load_sparse_csv,
    save_descriptors,
    save_ground_truth,
    save_sparse_csv,
)
from .matrix import SparseSimilarityMatrix
from .similarity import (
    cosine_similarity,
    intra_db_matrix,
    intra_db_neighbors,
    k_argmax,
    standardize,
)
from .synthetic import EXPLORE, SyntheticSpec, generate_synthetic
