//! Equidistant labeled/unlabeled split and pseudo-label production.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Tensor, TensorFile};
use crate::synthdata::{LabelMap, VideoDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameId {
    pub video: usize,
    pub frame: usize,
}

impl FrameId {
    pub fn new(video: usize, frame: usize) -> Self {
        Self { video, frame }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub interval: usize,
    pub labeled: BTreeSet<FrameId>,
    pub unlabeled: BTreeSet<FrameId>,
}

impl DatasetSplit {
    pub fn is_labeled(&self, id: FrameId) -> bool {
        self.labeled.contains(&id)
    }

    pub fn total(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn labeled_fraction(&self) -> f64 {
        self.labeled.len() as f64 / self.total().max(1) as f64
    }

    /// One `video,frame,labeled` line per frame.
    pub fn to_text(&self) -> String {
        let mut all: Vec<(FrameId, bool)> = self
            .labeled
            .iter()
            .map(|&id| (id, true))
            .chain(self.unlabeled.iter().map(|&id| (id, false)))
            .collect();
        all.sort();
        let mut s = format!("# interval={}\nvideo,frame,labeled\n", self.interval);
        for (id, l) in all {
            let _ = writeln!(s, "{},{},{}", id.video, id.frame, u8::from(l));
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let fail = |detail: String| Error::Format {
            path: origin.to_string(),
            detail,
        };
        let mut interval = None;
        let mut labeled = BTreeSet::new();
        let mut unlabeled = BTreeSet::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("# interval=") {
                interval = Some(rest.parse().map_err(|_| fail(format!("bad interval '{rest}'")))?);
                continue;
            }
            if line.starts_with('#') || line.starts_with("video,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.parse::<usize>().map_err(|_| fail(format!("bad line '{line}'")));
            if fields.len() != 3 {
                return Err(fail(format!("bad line '{line}'")));
            }
            let id = FrameId::new(parse(fields[0])?, parse(fields[1])?);
            match fields[2] {
                "1" => labeled.insert(id),
                "0" => unlabeled.insert(id),
                _ => return Err(fail(format!("bad flag in '{line}'"))),
            };
        }
        Ok(Self {
            interval: interval.ok_or_else(|| fail("missing interval header".into()))?,
            labeled,
            unlabeled,
        })
    }
}

/// Labels frames `0, h, 2h, …` (all multiples of `h` up to `T − 1`) in every video.
pub fn equidistant_split(ds: &VideoDataset, interval: usize) -> Result<DatasetSplit> {
    if interval == 0 {
        return Err(Error::Config("labeling interval must be >= 1".into()));
    }
    let mut labeled = BTreeSet::new();
    let mut unlabeled = BTreeSet::new();
    for (v, video) in ds.videos.iter().enumerate() {
        for t in 0..video.len() {
            let id = FrameId::new(v, t);
            if t % interval == 0 {
                labeled.insert(id);
            } else {
                unlabeled.insert(id);
            }
        }
    }
    Ok(DatasetSplit {
        interval,
        labeled,
        unlabeled,
    })
}

/// Anything that maps a 3×H×W image to C×H×W class scores.
pub trait PixelClassifier {
    fn input_size(&self) -> (usize, usize);
    fn num_classes(&self) -> usize;
    fn logits(&self, image: &Tensor) -> Result<Tensor>;
}

/// Per-pixel argmax over a C×H×W score tensor; ties go to the smaller class id.
pub fn argmax_labels(logits: &Tensor) -> Result<LabelMap> {
    let (c, h, w) = logits.dims3()?;
    let plane = h * w;
    let d = logits.data();
    let labels = (0..plane)
        .map(|p| {
            let mut best = 0usize;
            for k in 1..c {
                if d[k * plane + p] > d[best * plane + p] {
                    best = k;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(h, w, labels)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoLabeledFrame {
    pub id: FrameId,
    pub label: LabelMap,
    pub is_ground_truth: bool,
}

/// Pseudo labels for every frame of a dataset, indexed `[video][frame]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoLabels {
    pub videos: Vec<Vec<PseudoLabeledFrame>>,
}

impl PseudoLabels {
    pub fn get(&self, id: FrameId) -> &PseudoLabeledFrame {
        &self.videos[id.video][id.frame]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PseudoLabeledFrame> {
        self.videos.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.videos.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (v, frames) in self.videos.iter().enumerate() {
            let Some(first) = frames.first() else { continue };
            let (h, w) = (first.label.height(), first.label.width());
            let labels: Vec<f32> = frames
                .iter()
                .flat_map(|f| f.label.data().iter().map(|&l| f32::from(l)))
                .collect();
            let flags = frames.iter().map(|f| f32::from(u8::from(f.is_ground_truth))).collect();
            let mut file = TensorFile::new();
            file.push("pseudo_labels", Tensor::new(vec![frames.len(), h, w], labels)?);
            file.push("is_gt", Tensor::new(vec![frames.len()], flags)?);
            file.write(&dir.join(pseudo_file_name(v)))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path, num_videos: usize) -> Result<Self> {
        let mut videos = Vec::with_capacity(num_videos);
        for v in 0..num_videos {
            let path = dir.join(pseudo_file_name(v));
            if !path.is_file() {
                return Err(Error::MissingArtifact(path));
            }
            let origin = path.display().to_string();
            let file = TensorFile::read(&path)?;
            let labels = file.require("pseudo_labels", &origin)?;
            let flags = file.require("is_gt", &origin)?;
            let [t, h, w] = labels.shape() else {
                return Err(Error::Format {
                    path: origin,
                    detail: format!("pseudo_labels rank {}", labels.rank()),
                });
            };
            let (t, h, w) = (*t, *h, *w);
            if flags.shape() != [t] {
                return Err(Error::Integrity(format!("{origin}: is_gt shape {:?}", flags.shape())));
            }
            let mut frames = Vec::with_capacity(t);
            for f in 0..t {
                let data = labels.data()[f * h * w..(f + 1) * h * w].iter().map(|&x| x as u8).collect();
                frames.push(PseudoLabeledFrame {
                    id: FrameId::new(v, f),
                    label: LabelMap::new(h, w, data)?,
                    is_ground_truth: flags.data()[f] != 0.0,
                });
            }
            videos.push(frames);
        }
        Ok(Self { videos })
    }
}

pub fn pseudo_file_name(video: usize) -> String {
    format!("pseudo_{video:03}.pgvt")
}

/// Ground truth for labeled frames, model argmax for the rest.
pub fn generate_pseudo_labels(
    model: &impl PixelClassifier,
    split: &DatasetSplit,
    ds: &VideoDataset,
) -> Result<PseudoLabels> {
    if model.input_size() != (ds.height, ds.width) {
        return Err(Error::Config(format!(
            "model expects {:?} inputs, dataset frames are {}x{}",
            model.input_size(),
            ds.height,
            ds.width
        )));
    }
    if model.num_classes() != ds.num_classes {
        return Err(Error::Config(format!(
            "model predicts {} classes, dataset has {}",
            model.num_classes(),
            ds.num_classes
        )));
    }
    let mut videos = Vec::with_capacity(ds.videos.len());
    for (v, video) in ds.videos.iter().enumerate() {
        let mut frames = Vec::with_capacity(video.len());
        for (t, frame) in video.frames.iter().enumerate() {
            let id = FrameId::new(v, t);
            let is_ground_truth = split.is_labeled(id);
            let label = if is_ground_truth {
                frame.label.clone()
            } else {
                argmax_labels(&model.logits(&frame.image)?)?
            };
            frames.push(PseudoLabeledFrame {
                id,
                label,
                is_ground_truth,
            });
        }
        videos.push(frames);
    }
    Ok(PseudoLabels { videos })
}

/// Fraction of pixels on unlabeled frames whose pseudo label equals ground truth.
pub fn pseudo_label_accuracy(pseudo: &PseudoLabels, split: &DatasetSplit, ds: &VideoDataset) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for id in &split.unlabeled {
        let gt = &ds.videos[id.video].frames[id.frame].label;
        let p = &pseudo.get(*id).label;
        hit += gt.data().iter().zip(p.data()).filter(|(a, b)| a == b).count() as u64;
        total += gt.data().len() as u64;
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}
