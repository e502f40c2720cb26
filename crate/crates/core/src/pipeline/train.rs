use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ContrastOptimizer, RunConfig};
use super::losses::{cross_entropy_loss, ohem_loss};
use super::model::{stack, ContrastNet, SegmentationModel};
use super::schedule::{warmup_factor, Schedule};
use crate::contrast::{
    aggregate, augment, backprop_to_features, build_masks, contrastive_loss, select_keys, similarity_map, Branch,
    EncoderPair, FeatureMap, KeyPool, Parameters, Shots,
};
use crate::error::{Error, Result};
use crate::evalcli::evaluate_video;
use crate::numerics::{lars_step, sgd_step, Tensor};
use crate::sampling::{DatasetSplit, FrameId, PseudoLabels};
use crate::synthdata::{LabelMap, Video, VideoDataset};

pub const METRICS_HEADER: &str = "stage,epoch,step,loss,lr,miou";

/// Independent random streams per stage, so a stage's draws do not depend on
/// which stages ran before it.
pub(crate) mod stream {
    pub const PRETRAIN: u64 = 2;
    pub const CONTRAST: u64 = 3;
    pub const FINETUNE: u64 = 4;
}

pub fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub stage: String,
    pub epoch: usize,
    /// Optimizer steps taken so far in this stage.
    pub step: usize,
    pub loss: f32,
    pub lr: f32,
    pub miou: Option<f64>,
}

impl MetricRecord {
    pub fn to_line(&self) -> String {
        let miou = self.miou.map(|m| format!("{m:.6}")).unwrap_or_default();
        format!("{},{},{},{:.6},{:.6e},{}", self.stage, self.epoch, self.step, self.loss, self.lr, miou)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageLog {
    /// One record per epoch.
    pub records: Vec<MetricRecord>,
    /// Loss of every optimizer step, in order.
    pub step_losses: Vec<f32>,
    /// Skipped steps and other events.
    pub notes: Vec<String>,
}

impl StageLog {
    pub fn to_text(&self) -> String {
        self.records.iter().fold(String::new(), |mut s, r| {
            let _ = writeln!(s, "{}", r.to_line());
            s
        })
    }

    pub fn last_miou(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.miou)
    }
}

/// Trained parameters come back through `&mut`; this carries the rest.
#[derive(Clone, Debug)]
pub struct StageOutcome<M> {
    pub log: StageLog,
    /// SGD velocity buffers after the last step.
    pub velocity: M,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug)]
enum Objective {
    CrossEntropy,
    Ohem { tau: f32, k_min: usize },
}

fn should_eval(epoch: usize, epochs: usize, every: usize) -> bool {
    epoch + 1 == epochs || (every > 0 && (epoch + 1).is_multiple_of(every))
}

fn mean(v: &[f32]) -> f32 {
    if v.is_empty() {
        f32::NAN
    } else {
        (v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64) as f32
    }
}

#[allow(clippy::too_many_arguments)]
fn supervised_stage(
    stage: &str,
    model: &mut SegmentationModel,
    frames: &[FrameId],
    ds: &VideoDataset,
    eval: Option<&Video>,
    epochs: usize,
    base_lr: f32,
    objective: Objective,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StageOutcome<SegmentationModel>> {
    if frames.is_empty() {
        return Err(Error::Config(format!("{stage}: no labeled frames to train on")));
    }
    let per_epoch = frames.len().div_ceil(cfg.batch_size);
    let schedule = Schedule::poly(base_lr, epochs * per_epoch, cfg.poly_power);
    let mut velocity = model.zeros_like();
    let mut log = StageLog::default();
    let mut order = frames.to_vec();
    let mut step = 0;
    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut epoch_losses = Vec::with_capacity(per_epoch);
        let mut lr = schedule.lr(step);
        for batch in order.chunks(cfg.batch_size) {
            lr = schedule.lr(step);
            let images: Vec<&Tensor> = batch.iter().map(|id| &ds.videos[id.video].frames[id.frame].image).collect();
            let x = stack(&images)?;
            let (logits, cache) = model.forward(&x)?;
            let inv_b = 1.0 / batch.len() as f32;
            let mut grads = Vec::with_capacity(batch.len());
            let mut loss = 0f32;
            for (b, id) in batch.iter().enumerate() {
                let target = &ds.videos[id.video].frames[id.frame].label;
                let l = logits.item(b)?;
                let (lv, mut g) = match objective {
                    Objective::CrossEntropy => cross_entropy_loss(&l, target)?,
                    Objective::Ohem { tau, k_min } => ohem_loss(&l, target, tau, k_min)?,
                };
                g.scale(inv_b);
                loss += lv * inv_b;
                grads.push(g);
            }
            let grad_logits = Tensor::stack(&grads.iter().collect::<Vec<_>>())?;
            let (gb, gc) = model.backward(&cache, &grad_logits)?;
            let grad = SegmentationModel {
                spec: model.spec,
                backbone: gb,
                classifier: gc,
            };
            sgd_step(
                &mut model.params_mut(),
                &grad.params(),
                lr,
                cfg.sgd_momentum,
                cfg.weight_decay,
                &mut velocity.params_mut(),
            )?;
            if !loss.is_finite() {
                return Err(Error::Degenerate(format!("{stage}: loss became {loss} at step {step}")));
            }
            log.step_losses.push(loss);
            epoch_losses.push(loss);
            step += 1;
        }
        let miou = match eval {
            Some(video) if should_eval(epoch, epochs, cfg.eval_every) => Some(evaluate_video(&*model, video)?.miou),
            _ => None,
        };
        log.records.push(MetricRecord {
            stage: stage.to_string(),
            epoch,
            step,
            loss: mean(&epoch_losses),
            lr,
            miou,
        });
    }
    Ok(StageOutcome {
        log,
        velocity,
        steps: step,
    })
}

/// Stage 1: cross-entropy on the labeled frames, poly schedule.
pub fn pretrain(
    model: &mut SegmentationModel,
    split: &DatasetSplit,
    ds: &VideoDataset,
    eval: Option<&Video>,
    cfg: &RunConfig,
) -> Result<StageOutcome<SegmentationModel>> {
    let frames: Vec<FrameId> = split.labeled.iter().copied().collect();
    let mut rng = stage_rng(cfg.seed, stream::PRETRAIN);
    supervised_stage(
        "pretrain",
        model,
        &frames,
        ds,
        eval,
        cfg.pretrain_epochs,
        cfg.pretrain_lr,
        Objective::CrossEntropy,
        cfg,
        &mut rng,
    )
}

/// Stage 3: OHEM on the labeled frames, poly schedule. `model` should carry the
/// contrast backbone and a fresh classifier (see [`run_finetune`](super::run_finetune)).
pub fn finetune(
    model: &mut SegmentationModel,
    split: &DatasetSplit,
    ds: &VideoDataset,
    eval: Option<&Video>,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StageOutcome<SegmentationModel>> {
    let frames: Vec<FrameId> = split.labeled.iter().copied().collect();
    let objective = Objective::Ohem {
        tau: cfg.ohem_tau,
        k_min: cfg.ohem_min_kept(ds.height * ds.width),
    };
    supervised_stage(
        "finetune",
        model,
        &frames,
        ds,
        eval,
        cfg.finetune_epochs,
        cfg.finetune_lr,
        objective,
        cfg,
        rng,
    )
}

/// Contrast-stage inputs: training videos, their pseudo labels and shot partitions.
#[derive(Clone, Copy)]
pub struct ContrastData<'a> {
    pub dataset: &'a VideoDataset,
    pub split: &'a DatasetSplit,
    pub pseudo: &'a PseudoLabels,
    pub shots: &'a [Shots],
}

/// Up to `k_max` query pixels (all of them if fewer), ascending.
fn query_pixels(pixels: usize, k_max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if pixels <= k_max {
        return (0..pixels).collect();
    }
    let mut idx = sample(rng, pixels, k_max).into_vec();
    idx.sort_unstable();
    idx
}

fn gather(emb: &Tensor, labels: &LabelMap, idx: &[usize]) -> Result<(FeatureMap, LabelMap)> {
    let (d, h, w) = emb.dims3()?;
    let p = h * w;
    let mut data = Vec::with_capacity(d * idx.len());
    for c in 0..d {
        data.extend(idx.iter().map(|&i| emb.data()[c * p + i]));
    }
    let fm = FeatureMap::new(Tensor::new(vec![d, 1, idx.len()], data)?, Branch::Query)?;
    let lab = LabelMap::new(1, idx.len(), idx.iter().map(|&i| labels.data()[i]).collect())?;
    Ok((fm, lab))
}

/// Stage 2: pseudo-label guided cross-video pixel contrast on θ, EMA into θ^m.
///
/// The learning rate ramps up linearly over `contrast_warmup_epochs` under the
/// cosine decay. The first `projector_warmup_epochs` leave the backbone alone
/// so the fresh head does not push random gradients into it.
///
/// Draw order per step: for each query in the batch, its augmentation then its
/// key set; then, per query, the sampled query pixels.
pub fn contrast_stage(
    pair: &mut EncoderPair<ContrastNet>,
    data: ContrastData,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StageOutcome<ContrastNet>> {
    let ds = data.dataset;
    if data.shots.len() != ds.videos.len() || data.pseudo.videos.len() != ds.videos.len() {
        return Err(Error::Config(format!(
            "contrast stage: {} videos, {} shot lists, {} pseudo-label videos",
            ds.videos.len(),
            data.shots.len(),
            data.pseudo.videos.len()
        )));
    }
    let frames: Vec<FrameId> = data.split.labeled.union(&data.split.unlabeled).copied().collect();
    if frames.is_empty() {
        return Err(Error::Config("contrast stage: no frames".into()));
    }
    let key_cfg = cfg.key_config();
    let crop = cfg.crop_params();
    let pool = KeyPool {
        dataset: ds,
        pseudo: data.pseudo,
        shots: data.shots,
    };
    let per_epoch = frames.len().div_ceil(cfg.batch_size);
    let schedule = Schedule::cosine(cfg.contrast_lr, cfg.contrast_epochs * per_epoch);
    let mut velocity = pair.online.zeros_like();
    let mut log = StageLog::default();
    let mut order = frames.clone();
    let mut step = 0;
    for epoch in 0..cfg.contrast_epochs {
        order.shuffle(rng);
        let mut epoch_losses = Vec::with_capacity(per_epoch);
        let mut lr = schedule.lr(step);
        for batch in order.chunks(cfg.batch_size) {
            lr = schedule.lr(step) * warmup_factor(step, cfg.contrast_warmup_epochs * per_epoch);
            let mut query_images = Vec::with_capacity(batch.len());
            let mut query_labels = Vec::with_capacity(batch.len());
            let mut key_sets = Vec::with_capacity(batch.len());
            for &id in batch {
                let frame = &ds.videos[id.video].frames[id.frame];
                let (img, lab) = augment(&frame.image, &data.pseudo.get(id).label, &crop, rng);
                query_images.push(img);
                query_labels.push(lab);
                key_sets.push(select_keys(id, &pool, &key_cfg, rng)?);
            }

            let (emb, cache) = pair.online.forward(&stack(&query_images.iter().collect::<Vec<_>>())?)?;
            let (_, d, fh, fw) = emb.dims4()?;
            let key_images: Vec<&Tensor> = key_sets.iter().flat_map(|k| k.iter().map(|v| &v.image)).collect();
            let key_emb = if key_images.is_empty() {
                None
            } else {
                Some(pair.momentum.forward_inference(&stack(&key_images)?)?)
            };

            let mut grad_emb = vec![0f32; emb.len()];
            let mut losses = Vec::with_capacity(batch.len());
            let mut key_offset = 0;
            for (b, keys) in key_sets.iter().enumerate() {
                let n_keys = keys.len();
                let first_key = key_offset;
                key_offset += n_keys;
                if n_keys == 0 {
                    log.notes.push(format!("epoch {epoch} step {step}: query {:?} has no keys", batch[b]));
                    continue;
                }
                let q_lab = query_labels[b].resize_nearest(fh, fw);
                let idx = query_pixels(fh * fw, cfg.k_max, rng);
                let (q_fm, q_sel) = gather(&emb.item(b)?, &q_lab, &idx)?;
                let key_emb = key_emb.as_ref().expect("keys were embedded");
                let mut key_fms = Vec::with_capacity(n_keys);
                let mut masks = Vec::with_capacity(n_keys);
                for (j, view) in keys.iter().enumerate() {
                    key_fms.push(FeatureMap::new(key_emb.item(first_key + j)?, Branch::Key)?);
                    masks.push(build_masks(&q_sel, &view.label.resize_nearest(fh, fw)));
                }
                let result = key_fms
                    .iter()
                    .map(|k| similarity_map(&q_fm, k))
                    .collect::<Result<Vec<_>>>()
                    .and_then(|sims| aggregate(&sims, &masks))
                    .and_then(|agg| {
                        let loss = contrastive_loss(&agg)?;
                        let g = backprop_to_features(&loss, &agg, &masks, &q_fm, &key_fms)?;
                        Ok((loss.loss, g.query))
                    });
                match result {
                    Ok((loss, g)) => {
                        let base = b * d * fh * fw;
                        for c in 0..d {
                            for (k, &i) in idx.iter().enumerate() {
                                grad_emb[base + c * fh * fw + i] = g.data()[c * idx.len() + k];
                            }
                        }
                        losses.push((b, loss));
                    }
                    Err(e @ (Error::EmptyBatch(_) | Error::Degenerate(_))) => {
                        log.notes.push(format!("epoch {epoch} step {step}: skipped query {:?}: {e}", batch[b]));
                    }
                    Err(e) => return Err(e),
                }
            }

            if losses.is_empty() {
                log.notes.push(format!("epoch {epoch} step {step}: no valid query, update skipped"));
                step += 1;
                continue;
            }
            // mean over the queries that produced a loss
            let inv = 1.0 / losses.len() as f32;
            grad_emb.iter_mut().for_each(|g| *g *= inv);
            let grad = pair.online.backward(&cache, &Tensor::new(emb.shape().to_vec(), grad_emb)?)?;
            let (params, grads, state) = if epoch < cfg.projector_warmup_epochs {
                (
                    &mut pair.online.projector.params_mut(),
                    &grad.projector.params(),
                    &mut velocity.projector.params_mut(),
                )
            } else {
                (&mut pair.online.params_mut(), &grad.params(), &mut velocity.params_mut())
            };
            match cfg.contrast_optimizer {
                ContrastOptimizer::Sgd => sgd_step(params, grads, lr, cfg.sgd_momentum, cfg.weight_decay, state)?,
                ContrastOptimizer::Lars => {
                    lars_step(params, grads, lr, cfg.sgd_momentum, cfg.weight_decay, cfg.lars_trust, state)?
                }
            }
            pair.ema_update()?;
            let loss = losses.iter().map(|&(_, l)| l).sum::<f32>() * inv;
            if !loss.is_finite() {
                return Err(Error::Degenerate(format!("contrast: loss became {loss} at step {step}")));
            }
            log.step_losses.push(loss);
            epoch_losses.push(loss);
            step += 1;
        }
        log.records.push(MetricRecord {
            stage: "contrast".into(),
            epoch,
            step,
            loss: mean(&epoch_losses),
            lr,
            miou: None,
        });
    }
    Ok(StageOutcome {
        log,
        velocity,
        steps: step,
    })
}
