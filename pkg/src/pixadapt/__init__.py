"""Few-shot region localization and segmentation adapters over
pixel-level feature maps.

The package reads precomputed per-pixel feature fields, localizes regions
of interest with one of three adapters (a fixed cosine threshold, a
trained pixel classifier, or a trained Siamese pair scorer), cleans the
result with connected-component filtering, and hands prompt points to a
promptable segmenter for mask refinement.
"""

__version__ = "0.1.0"

from .adapters import (
    ContrastiveModel,
    ScoreMap,
    TrainConfig,
    basic_localize,
    basic_similarity_map,
    contrastive_localize,
    embed,
    pair_score,
    predict_classification,
    read_contrastive_model,
    train_classification_adapter,
    train_contrastive_adapter,
    write_contrastive_model,
)
from .config import RunConfig, config_hash, resolve_config, with_overrides
from .errors import (
    BadMagicError,
    ConfigError,
    DataError,
    FormatError,
    LabelRangeError,
    NonFiniteValueError,
    PipelineError,
    PixadaptError,
    TruncatedPayloadError,
)
from .formats import (
    FeatureMap,
    LabelMask,
    PatchGrid,
    interpolate_patch_grid,
    l2_normalize,
    read_feature_map,
    read_label_mask,
    write_feature_map,
    write_label_mask,
)
from .metrics import (
    LabelMetrics,
    LocalizationCase,
    MetricReport,
    aggregate_binary_multilabel,
    emit_report,
    iou,
    localization_accuracy,
    read_report,
    render_csv,
    render_table,
)
from .pipeline import (
    PromptSet,
    RefinerRequest,
    export_prompts,
    filter_components,
    import_prompts,
    import_refined_mask,
    landmark_from_mask,
    largest_component,
    mock_refine,
    select_prompts,
)
from .runner import RunResult, load_scenario, prepare_adapter, run_pipeline
from .sampling import (
    ClassificationSet,
    PairSet,
    ReferenceSet,
    foreground_pixels,
    sample_classification_set,
    sample_contrastive_pairs,
    select_reference_pixels,
)
from .synth import (
    Region,
    ScenarioSpec,
    background_only_scenario,
    confound_scenario,
    generate_scenario,
    materialize_scenario,
    read_scenario_spec,
    separable_scenario,
    two_intensity_scenario,
)

__all__ = [name for name in dir() if not name.startswith("_")]
