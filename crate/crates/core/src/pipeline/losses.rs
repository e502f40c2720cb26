use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::synthdata::LabelMap;

/// Per-pixel softmax cross-entropy and `softmax − onehot` for a C×H×W logit map.
pub struct PixelCrossEntropy {
    pub per_pixel: Vec<f32>,
    /// Unscaled gradient of each pixel's own CE term, C×H×W.
    pub grad: Tensor,
}

pub fn pixel_cross_entropy(logits: &Tensor, target: &LabelMap) -> Result<PixelCrossEntropy> {
    let (c, h, w) = logits.dims3()?;
    if (target.height(), target.width()) != (h, w) {
        return Err(Error::shape(
            "cross_entropy",
            format!("logits {h}x{w}, target {}x{}", target.height(), target.width()),
        ));
    }
    let p = h * w;
    let x = logits.data();
    let mut per_pixel = vec![0f32; p];
    let mut grad = vec![0f32; c * p];
    for (i, &t) in target.data().iter().enumerate() {
        let t = t as usize;
        if t >= c {
            return Err(Error::Data(format!("target class {t} with {c} logits")));
        }
        let max = (0..c).map(|k| x[k * p + i]).fold(f32::NEG_INFINITY, f32::max);
        let sum: f64 = (0..c).map(|k| ((x[k * p + i] - max) as f64).exp()).sum();
        per_pixel[i] = (sum.ln() - (x[t * p + i] - max) as f64) as f32;
        for k in 0..c {
            let prob = (((x[k * p + i] - max) as f64).exp() / sum) as f32;
            grad[k * p + i] = prob - if k == t { 1.0 } else { 0.0 };
        }
    }
    Ok(PixelCrossEntropy {
        per_pixel,
        grad: Tensor::new(vec![c, h, w], grad)?,
    })
}

/// Mean pixel cross-entropy and its gradient.
pub fn cross_entropy_loss(logits: &Tensor, target: &LabelMap) -> Result<(f32, Tensor)> {
    let ce = pixel_cross_entropy(logits, target)?;
    let n = ce.per_pixel.len() as f64;
    let loss = ce.per_pixel.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mut grad = ce.grad;
    grad.scale(1.0 / n as f32);
    Ok((loss as f32, grad))
}

/// Pixels with CE above `tau`, topped up with the hardest remaining pixels
/// until at least `k_min` are kept. Returned in ascending pixel order.
pub fn ohem_selection(per_pixel: &[f32], tau: f32, k_min: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..per_pixel.len()).collect();
    // hardest first, ties to the lower index
    order.sort_by(|&a, &b| per_pixel[b].total_cmp(&per_pixel[a]).then(a.cmp(&b)));
    let above = order.iter().take_while(|&&i| per_pixel[i] > tau).count();
    let mut kept = order[..above.max(k_min).min(order.len())].to_vec();
    kept.sort_unstable();
    kept
}

/// Online hard example mining: mean CE over the kept pixels, zero gradient elsewhere.
pub fn ohem_loss(logits: &Tensor, target: &LabelMap, tau: f32, k_min: usize) -> Result<(f32, Tensor)> {
    let ce = pixel_cross_entropy(logits, target)?;
    let p = ce.per_pixel.len();
    if !(tau >= 0.0) || k_min == 0 || k_min > p {
        return Err(Error::Config(format!("ohem needs tau >= 0 and 1 <= k_min <= {p}, got {tau}, {k_min}")));
    }
    let kept = ohem_selection(&ce.per_pixel, tau, k_min);
    let inv = 1.0 / kept.len() as f64;
    let loss = kept.iter().map(|&i| ce.per_pixel[i] as f64).sum::<f64>() * inv;
    let c = logits.shape()[0];
    let mut grad = Tensor::zeros(logits.shape());
    let (src, dst) = (ce.grad.data(), grad.data_mut());
    for &i in &kept {
        for k in 0..c {
            dst[k * p + i] = src[k * p + i] * inv as f32;
        }
    }
    Ok((loss as f32, grad))
}
