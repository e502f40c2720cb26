use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use super::augment::{augment, CropParams};
use super::shots::Shots;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::sampling::{FrameId, PseudoLabels};
use crate::synthdata::{LabelMap, VideoDataset};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyConfig {
    /// Frames drawn from the query's shot.
    pub n_adjacent: usize,
    /// Frames drawn from other videos.
    pub n_other_video: usize,
    /// Extra augmented views of the query frame itself.
    pub n_views: usize,
    pub crop: CropParams,
}

impl Default for KeyConfig {
    fn default() -> Self {
        Self {
            n_adjacent: 1,
            n_other_video: 4,
            n_views: 1,
            crop: CropParams::default(),
        }
    }
}

impl KeyConfig {
    pub fn total(&self) -> usize {
        self.n_adjacent + self.n_other_video + self.n_views
    }
}

/// An augmented key image with its (equally augmented) pseudo label.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyView {
    pub source: FrameId,
    pub image: Tensor,
    pub label: LabelMap,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct KeySet {
    pub current_views: Vec<KeyView>,
    pub shot_frames: Vec<KeyView>,
    pub other_video_frames: Vec<KeyView>,
}

impl KeySet {
    pub fn len(&self) -> usize {
        self.current_views.len() + self.shot_frames.len() + self.other_video_frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Views, then same-shot frames, then other-video frames.
    pub fn iter(&self) -> impl Iterator<Item = &KeyView> {
        self.current_views
            .iter()
            .chain(&self.shot_frames)
            .chain(&self.other_video_frames)
    }
}

/// Everything key selection reads: frames, their pseudo labels and shot partitions.
#[derive(Clone, Copy)]
pub struct KeyPool<'a> {
    pub dataset: &'a VideoDataset,
    pub pseudo: &'a PseudoLabels,
    pub shots: &'a [Shots],
}

impl KeyPool<'_> {
    fn view(&self, id: FrameId, crop: &CropParams, rng: &mut impl Rng) -> KeyView {
        let frame = &self.dataset.videos[id.video].frames[id.frame];
        let (image, label) = augment(&frame.image, &self.pseudo.get(id).label, crop, rng);
        KeyView {
            source: id,
            image,
            label,
        }
    }
}

/// Builds the key set for one query frame.
///
/// Draw order: the `n_views` query views, then same-shot indices and their
/// augmentations, then other-video frames and their augmentations.
pub fn select_keys(query: FrameId, pool: &KeyPool, cfg: &KeyConfig, rng: &mut impl Rng) -> Result<KeySet> {
    let videos = pool.dataset.videos.len();
    if cfg.n_other_video > 0 && videos < 2 {
        return Err(Error::Config(format!(
            "{} other-video keys requested but the dataset has {videos} video(s)",
            cfg.n_other_video
        )));
    }
    if query.video >= videos || query.frame >= pool.dataset.videos[query.video].len() {
        return Err(Error::Config(format!("query {query:?} outside dataset")));
    }

    let current_views = (0..cfg.n_views).map(|_| pool.view(query, &cfg.crop, rng)).collect();

    let shots = &pool.shots[query.video];
    let candidates: Vec<usize> = shots
        .frames_of(shots.shot_of(query.frame))
        .filter(|&t| t != query.frame)
        .collect();
    let take = cfg.n_adjacent.min(candidates.len());
    let mut picked: Vec<usize> = sample(rng, candidates.len(), take).into_iter().collect();
    picked.sort_unstable();
    let shot_frames = picked
        .into_iter()
        .map(|i| pool.view(FrameId::new(query.video, candidates[i]), &cfg.crop, rng))
        .collect();

    // Uniform over the union of other videos' frames, one frame per video until
    // every other video has been used once.
    let mut other_video_frames = Vec::with_capacity(cfg.n_other_video);
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for _ in 0..cfg.n_other_video {
        let eligible: Vec<usize> = (0..videos)
            .filter(|&v| v != query.video && !used.contains(&v))
            .collect();
        let eligible = if eligible.is_empty() {
            used.clear();
            (0..videos).filter(|&v| v != query.video).collect()
        } else {
            eligible
        };
        let total: usize = eligible.iter().map(|&v| pool.dataset.videos[v].len()).sum();
        let mut pick = rng.random_range(0..total);
        let mut id = None;
        for &v in &eligible {
            let n = pool.dataset.videos[v].len();
            if pick < n {
                id = Some(FrameId::new(v, pick));
                break;
            }
            pick -= n;
        }
        let id = id.expect("pick within total");
        used.insert(id.video);
        other_video_frames.push(pool.view(id, &cfg.crop, rng));
    }

    Ok(KeySet {
        current_views,
        shot_frames,
        other_video_frames,
    })
}
