"""noiseforge: instance-dependent label noise synthesis and detection for
node-classification graphs."""

from .graph import (
    DatasetManifest,
    Graph,
    LabelSet,
    build_graph,
    load_dataset,
    node_homophily,
    save_dataset,
    split_nodes,
)
from .ppr import PPRConfig, PPRVector, dense_ppr_oracle, ppr_class_mass, ppr_single
from .noise import (
    PredictionMatrix,
    TransitionMatrix,
    TransitionProbabilities,
    build_confidence,
    build_feature,
    build_pairwise,
    build_topology,
    build_uniform,
    class_transition_matrix,
)
from .corruption import (
    CorruptionFrequency,
    CorruptionResult,
    NoiseSpec,
    corrupt,
    corrupt_many,
    derive_seed,
    weighted_sample_without_replacement,
)
from .classifier import (
    ClassifierConfig,
    ClassifierParams,
    LossTrajectory,
    confidence_protocol,
    predict_proba,
    propagate,
    supervised_detector,
    train,
)
from .detection import (
    DetectionScores,
    GMM1D,
    GMMConfig,
    detect_average,
    detect_maximum,
    fit_gmm_em,
    roc_auc,
    score_corrupted,
)
from .analytics import (
    consistency_gap,
    consistency_scores,
    correlation,
    feature_similarity_split,
    offdiag_entropy,
    prediction_entropy,
)
from .llm import (
    AnnotationRecord,
    LLMConfig,
    annotate,
    build_prompt,
    noise_rate_report,
    parse_label,
    records_to_labelset,
    refine,
)

__version__ = "0.1.0"
