"""Consistency-guided zero-shot OOD detection over precomputed embeddings.

The pipeline: load unit-norm image/text embeddings (SLEB files), generate a
per-class similar-label map, score images with MCM or the similar-class
consistency score, calibrate a decision threshold, and report AUROC /
FPR@95 / accuracy.
"""

from .embedding_store import (
    EmbeddingMatrix,
    LabelKind,
    LabelSet,
    extend_labels,
    l2_normalize,
    load_embeddings,
    load_labels,
    save_embeddings,
    save_labels,
    validate_pairing,
)
from .errors import (
    DataError,
    DegenerateRowError,
    FormatError,
    IoError,
    LabelError,
    MapError,
    NormError,
    PairingError,
    ParamError,
    ShapeError,
    SimlabelError,
)
from .scoring import (
    Decision,
    ScoreBatch,
    ScoreMode,
    ScoringConfig,
    affinity_vector,
    classify,
    decide,
    mcm_score,
    score_batch,
    simlabel_score,
)
from .simclass import (
    CandidatePool,
    Hierarchy,
    MapSource,
    SimilarClassMap,
    from_candidates,
    from_hierarchy,
    from_image_alignment,
    load_map,
    pseudo_label,
    save_map,
)
from .similarity import (
    SimilarityMatrix,
    cosine,
    similarity_matrix,
    softmax,
    top_k_indices,
)

__version__ = "0.1.0"
