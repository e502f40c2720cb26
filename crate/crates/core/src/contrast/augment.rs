use rand::Rng;

use crate::numerics::{resize, ResizeMode, Tensor};
use crate::synthdata::LabelMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropParams {
    /// Smallest patch side as a fraction of the image side.
    pub crop_min: f32,
    pub crop_max: f32,
    pub flip_prob: f64,
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            crop_min: 0.3,
            crop_max: 0.7,
            flip_prob: 0.5,
        }
    }
}

/// Random square crop resized back to full size, plus an optional horizontal flip,
/// applied identically to the image (bilinear) and its label map (nearest).
///
/// Draw order: side, top, left, flip.
pub fn augment(image: &Tensor, label: &LabelMap, params: &CropParams, rng: &mut impl Rng) -> (Tensor, LabelMap) {
    let (c, h, w) = image.dims3().expect("3-D image");
    let side_max = h.min(w);
    let lo = params.crop_min * side_max as f32;
    let hi = params.crop_max * side_max as f32;
    let side = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let side = (side.round() as usize).clamp(1, side_max);
    let top = rng.random_range(0..=h - side);
    let left = rng.random_range(0..=w - side);
    let flip = params.flip_prob > 0.0 && rng.random_bool(params.flip_prob.min(1.0));

    let mut patch = Vec::with_capacity(c * side * side);
    for ch in 0..c {
        for y in top..top + side {
            let row = ch * h * w + y * w;
            patch.extend_from_slice(&image.data()[row + left..row + left + side]);
        }
    }
    let patch = Tensor::new(vec![1, c, side, side], patch).expect("patch shape");
    let mut out = resize(&patch, h, w, ResizeMode::Bilinear)
        .expect("resize")
        .reshape(vec![c, h, w])
        .expect("reshape");
    let mut out_label = label.crop(top, left, side, side).resize_nearest(h, w);
    if flip {
        for row in out.data_mut().chunks_exact_mut(w) {
            row.reverse();
        }
        out_label = out_label.flip_horizontal();
    }
    (out, out_label)
}
