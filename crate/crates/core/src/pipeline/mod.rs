//! The fixed encoder and the three training stages: supervised pretraining on
//! labeled frames, pseudo-label guided contrast, and OHEM fine-tuning of a
//! fresh classifier on the contrast backbone.

mod checkpoint;
mod config;
mod losses;
mod model;
mod run;
mod schedule;
mod train;

pub use checkpoint::{
    load_contrast, load_segmentation, save_contrast, save_segmentation, CheckpointMeta, Loaded, META_ENTRY, OPTIMIZER,
};
pub use config::{ContrastOptimizer, ExperimentConfig, RunConfig};
pub use losses::{cross_entropy_loss, ohem_loss, ohem_selection, pixel_cross_entropy, PixelCrossEntropy};
pub use model::{
    build_encoder, Backbone, BackboneCache, Classifier, ClassifierCache, ContrastCache, ContrastNet, ModelSpec,
    Projector, ProjectorCache, SegmentationCache, SegmentationModel, FEATURE_STRIDE,
};
pub use run::{
    continue_pipeline, detect_all_shots, model_spec, prepare, prepare_from, run_contrast, run_finetune, run_pipeline,
    run_pretrain, ContrastResult, PipelineResult, Prepared,
};
pub use schedule::{warmup_factor, Schedule, ScheduleKind};
pub use train::{
    contrast_stage, finetune, pretrain, stage_rng, ContrastData, MetricRecord, StageLog, StageOutcome, METRICS_HEADER,
};

/// The contrast-stage pair: θ with its momentum copy θ^m.
pub type ContrastModel = crate::contrast::EncoderPair<ContrastNet>;
