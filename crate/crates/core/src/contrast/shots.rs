use std::ops::Range;

use crate::synthdata::Video;
use crate::numerics::Tensor;

pub const DEFAULT_BINS: usize = 16;
pub const DEFAULT_THRESHOLD: f32 = 0.3;

/// Normalised histogram of per-pixel luma (mean of RGB) over `bins` equal bins of [0, 1].
pub fn gray_histogram(image: &Tensor, bins: usize) -> Vec<f64> {
    let shape = image.shape();
    let plane = shape[shape.len() - 2] * shape[shape.len() - 1];
    let d = image.data();
    let mut hist = vec![0f64; bins];
    for p in 0..plane {
        let luma = (d[p] + d[plane + p] + d[2 * plane + p]) / 3.0;
        let bin = ((luma * bins as f32) as usize).min(bins - 1);
        hist[bin] += 1.0;
    }
    hist.iter_mut().for_each(|h| *h /= plane as f64);
    hist
}

pub fn histogram_l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Frame indices `t` where the histogram distance between frames `t−1` and `t` exceeds `threshold`.
pub fn detect_shots(video: &Video, bins: usize, threshold: f32) -> Vec<usize> {
    assert!(bins >= 2, "need at least two histogram bins");
    let hists: Vec<Vec<f64>> = video.frames.iter().map(|f| gray_histogram(&f.image, bins)).collect();
    hists
        .windows(2)
        .enumerate()
        .filter(|(_, w)| histogram_l1(&w[0], &w[1]) > threshold as f64)
        .map(|(t, _)| t + 1)
        .collect()
}

/// Shot partition of one video.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shots {
    boundaries: Vec<usize>,
    len: usize,
}

impl Shots {
    pub fn new(boundaries: Vec<usize>, len: usize) -> Self {
        debug_assert!(boundaries.windows(2).all(|w| w[0] < w[1]));
        Self { boundaries, len }
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn num_shots(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn shot_of(&self, frame: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= frame)
    }

    pub fn frames_of(&self, shot: usize) -> Range<usize> {
        let start = if shot == 0 { 0 } else { self.boundaries[shot - 1] };
        let end = self.boundaries.get(shot).copied().unwrap_or(self.len);
        start..end
    }
}
