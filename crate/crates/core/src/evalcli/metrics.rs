use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{argmax_labels, PixelClassifier};
use crate::synthdata::{LabelMap, Video};

/// Rows are ground truth, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        self.accumulate_slices(pred.data(), gt.data())
    }

    pub fn accumulate_slices(&mut self, pred: &[u8], gt: &[u8]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::shape("accumulate", format!("{} predictions, {} targets", pred.len(), gt.len())));
        }
        let c = self.num_classes;
        if let Some(bad) = pred.iter().chain(gt).find(|&&l| l as usize >= c) {
            return Err(Error::Data(format!("label {bad} outside {c} classes")));
        }
        for (&p, &g) in pred.iter().zip(gt) {
            self.counts[g as usize * c + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::shape("merge", format!("{} vs {} classes", self.num_classes, other.num_classes)));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub miou: f64,
    pub pa: f64,
    pub pac: f64,
    /// `None` for classes without ground-truth pixels; those are left out of the means.
    pub per_class_iou: Vec<Option<f64>>,
    pub pixels: u64,
}

impl MetricsReport {
    pub fn to_line(&self) -> String {
        let per_class: Vec<String> = self
            .per_class_iou
            .iter()
            .map(|v| v.map_or_else(|| "absent".to_string(), |x| format!("{x:.6}")))
            .collect();
        format!(
            "miou={:.6} pa={:.6} pac={:.6} pixels={} per_class_iou={} absent_classes=excluded",
            self.miou,
            self.pa,
            self.pac,
            self.pixels,
            per_class.join(":")
        )
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyBatch("confusion matrix has no pixels".into()));
    }
    let c = cm.num_classes();
    let mut per_class_iou = Vec::with_capacity(c);
    let (mut iou_sum, mut acc_sum, mut present, mut trace) = (0f64, 0f64, 0usize, 0u64);
    for k in 0..c {
        let tp = cm.get(k, k);
        let gt: u64 = (0..c).map(|j| cm.get(k, j)).sum();
        let pred: u64 = (0..c).map(|i| cm.get(i, k)).sum();
        trace += tp;
        if gt == 0 {
            per_class_iou.push(None);
            continue;
        }
        let iou = tp as f64 / (gt + pred - tp) as f64;
        per_class_iou.push(Some(iou));
        iou_sum += iou;
        acc_sum += tp as f64 / gt as f64;
        present += 1;
    }
    Ok(MetricsReport {
        miou: iou_sum / present as f64,
        pa: trace as f64 / total as f64,
        pac: acc_sum / present as f64,
        per_class_iou,
        pixels: total,
    })
}

/// Argmax predictions over every frame of `video`, pooled into one matrix.
pub fn video_confusion(model: &impl PixelClassifier, video: &Video) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(model.num_classes());
    for frame in &video.frames {
        let pred = argmax_labels(&model.logits(&frame.image)?)?;
        cm.accumulate(&pred, &frame.label)?;
    }
    Ok(cm)
}

pub fn evaluate_video(model: &impl PixelClassifier, video: &Video) -> Result<MetricsReport> {
    compute_metrics(&video_confusion(model, video)?)
}
