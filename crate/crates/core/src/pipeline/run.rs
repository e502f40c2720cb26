use super::config::ExperimentConfig;
use super::model::{build_encoder, Backbone, ContrastNet, ModelSpec, SegmentationModel};
use super::train::{contrast_stage, finetune, pretrain, stage_rng, stream, ContrastData, StageOutcome};
use crate::contrast::{detect_shots, EncoderPair, Shots};
use crate::error::Result;
use crate::evalcli::{evaluate_video, MetricsReport};
use crate::sampling::{equidistant_split, generate_pseudo_labels, DatasetSplit, PseudoLabels};
use crate::synthdata::{generate_dataset, Video, VideoDataset};

/// Training videos, the held-out video and the labeled split of the training videos.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: VideoDataset,
    pub eval: VideoDataset,
    pub split: DatasetSplit,
}

impl Prepared {
    pub fn eval_video(&self) -> &Video {
        &self.eval.videos[0]
    }
}

pub fn prepare(exp: &ExperimentConfig) -> Result<Prepared> {
    exp.validate()?;
    prepare_from(&generate_dataset(&exp.data)?, exp)
}

pub fn prepare_from(ds: &VideoDataset, exp: &ExperimentConfig) -> Result<Prepared> {
    exp.run.validate()?;
    let (train, eval) = ds.split_holdout(exp.run.holdout_video)?;
    let split = equidistant_split(&train, exp.run.interval)?;
    Ok(Prepared { train, eval, split })
}

pub fn model_spec(exp: &ExperimentConfig, ds: &VideoDataset) -> ModelSpec {
    ModelSpec {
        num_classes: ds.num_classes,
        feature_dim: exp.run.feature_dim,
        embed_dim: exp.run.embed_dim,
        height: ds.height,
        width: ds.width,
    }
}

pub fn run_pretrain(exp: &ExperimentConfig, prep: &Prepared) -> Result<(SegmentationModel, StageOutcome<SegmentationModel>)> {
    let mut model = build_encoder(model_spec(exp, &prep.train), exp.run.seed)?;
    let outcome = pretrain(&mut model, &prep.split, &prep.train, Some(prep.eval_video()), &exp.run)?;
    Ok((model, outcome))
}

pub fn detect_all_shots(ds: &VideoDataset, exp: &ExperimentConfig) -> Vec<Shots> {
    ds.videos
        .iter()
        .map(|v| Shots::new(detect_shots(v, exp.run.shot_bins, exp.run.shot_threshold), v.len()))
        .collect()
}

pub fn run_contrast(
    exp: &ExperimentConfig,
    prep: &Prepared,
    backbone: &Backbone,
    pseudo: &PseudoLabels,
    shots: &[Shots],
) -> Result<(EncoderPair<ContrastNet>, StageOutcome<ContrastNet>)> {
    let mut rng = stage_rng(exp.run.seed, stream::CONTRAST);
    let net = ContrastNet::new(backbone.clone(), exp.run.embed_dim, &mut rng);
    let mut pair = EncoderPair::new(net, exp.run.momentum_coeff);
    let data = ContrastData {
        dataset: &prep.train,
        split: &prep.split,
        pseudo,
        shots,
    };
    let outcome = contrast_stage(&mut pair, data, &exp.run, &mut rng)?;
    Ok((pair, outcome))
}

/// Fresh classifier on `backbone`, then OHEM fine-tuning.
pub fn run_finetune(
    exp: &ExperimentConfig,
    prep: &Prepared,
    backbone: &Backbone,
) -> Result<(SegmentationModel, StageOutcome<SegmentationModel>)> {
    let mut rng = stage_rng(exp.run.seed, stream::FINETUNE);
    let mut model = SegmentationModel::with_backbone(model_spec(exp, &prep.train), backbone.clone(), &mut rng)?;
    let outcome = finetune(&mut model, &prep.split, &prep.train, Some(prep.eval_video()), &exp.run, &mut rng)?;
    Ok((model, outcome))
}

#[derive(Clone, Debug)]
pub struct ContrastResult {
    pub pseudo: PseudoLabels,
    pub shots: Vec<Shots>,
    pub pair: EncoderPair<ContrastNet>,
    pub outcome: StageOutcome<ContrastNet>,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub pretrained: SegmentationModel,
    pub pretrain: StageOutcome<SegmentationModel>,
    pub pretrained_report: MetricsReport,
    /// `None` for the labeled-only baseline.
    pub contrast: Option<ContrastResult>,
    pub model: SegmentationModel,
    pub finetune: StageOutcome<SegmentationModel>,
    pub report: MetricsReport,
}

/// All three stages, or pretrain then fine-tune when `with_contrast` is false.
pub fn run_pipeline(exp: &ExperimentConfig, prep: &Prepared, with_contrast: bool) -> Result<PipelineResult> {
    let (pretrained, outcome) = run_pretrain(exp, prep)?;
    continue_pipeline(exp, prep, pretrained, outcome, with_contrast)
}

/// Stages 2 and 3 from an already pretrained model. Pretraining depends on
/// none of the contrast settings, so sweeps share one pretrained model.
pub fn continue_pipeline(
    exp: &ExperimentConfig,
    prep: &Prepared,
    pretrained: SegmentationModel,
    pretrain: StageOutcome<SegmentationModel>,
    with_contrast: bool,
) -> Result<PipelineResult> {
    let pretrained_report = evaluate_video(&pretrained, prep.eval_video())?;
    let contrast = if with_contrast {
        let pseudo = generate_pseudo_labels(&pretrained, &prep.split, &prep.train)?;
        let shots = detect_all_shots(&prep.train, exp);
        let (pair, outcome) = run_contrast(exp, prep, &pretrained.backbone, &pseudo, &shots)?;
        Some(ContrastResult {
            pseudo,
            shots,
            pair,
            outcome,
        })
    } else {
        None
    };
    let backbone = contrast
        .as_ref()
        .map_or(&pretrained.backbone, |c| &c.pair.online.backbone);
    let (model, finetune) = run_finetune(exp, prep, backbone)?;
    let report = evaluate_video(&model, prep.eval_video())?;
    Ok(PipelineResult {
        pretrained,
        pretrain,
        pretrained_report,
        contrast,
        model,
        finetune,
        report,
    })
}
