use super::similarity::{AggregatedSimilarities, FeatureMap, PairMasks};
use crate::error::{Error, Result};
use crate::numerics::{gemm, Layout, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastLoss {
    pub loss: f32,
    /// ∂L/∂S_i^p, zero for invalid pixels.
    pub d_sp: Vec<f32>,
    /// ∂L/∂S_i^n, zero for invalid pixels.
    pub d_sn: Vec<f32>,
    pub valid_pixels: usize,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `L = −(1/k) Σ_valid log(e^{Sp} / (e^{Sp} + e^{Sn})) = (1/k) Σ softplus(Sn − Sp)`.
pub fn contrastive_loss(agg: &AggregatedSimilarities) -> Result<ContrastLoss> {
    let k = agg.num_valid();
    if k == 0 {
        return Err(Error::EmptyBatch("no query pixel has both positive and negative keys".into()));
    }
    let inv_k = 1.0 / k as f64;
    let n = agg.sp.len();
    let mut loss = 0f64;
    let mut d_sp = vec![0f32; n];
    let mut d_sn = vec![0f32; n];
    for i in 0..n {
        if !agg.valid[i] {
            continue;
        }
        let margin = agg.sn[i] as f64 - agg.sp[i] as f64;
        loss += softplus(margin);
        let g = sigmoid(margin) * inv_k;
        d_sp[i] = -g as f32;
        d_sn[i] = g as f32;
    }
    Ok(ContrastLoss {
        loss: (loss * inv_k) as f32,
        d_sp,
        d_sn,
        valid_pixels: k,
    })
}

/// Gradients of the contrastive loss with respect to the feature maps.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGradients {
    /// Same shape as the query feature map.
    pub query: Tensor,
    /// One per key map; always zero, the key branch is a stop-gradient target.
    pub keys: Vec<Tensor>,
}

/// Chains `∂L/∂Sp`, `∂L/∂Sn` through the aggregation and the cosine similarity
/// onto the query embeddings. Key embeddings are treated as constants.
pub fn backprop_to_features(
    loss: &ContrastLoss,
    agg: &AggregatedSimilarities,
    masks: &[PairMasks],
    query: &FeatureMap,
    keys: &[FeatureMap],
) -> Result<FeatureGradients> {
    if masks.len() != keys.len() || agg.negative_counts.len() != keys.len() {
        return Err(Error::shape(
            "backprop_to_features",
            format!("{} masks, {} key maps, {} aggregated frames", masks.len(), keys.len(), agg.negative_counts.len()),
        ));
    }
    let (d, pq) = (query.dim(), query.pixels());
    if loss.d_sp.len() != pq || agg.sp.len() != pq {
        return Err(Error::shape(
            "backprop_to_features",
            format!("{} query pixels, {} loss entries", pq, loss.d_sp.len()),
        ));
    }
    let (q_unit, q_norm) = query.normalized()?;

    // ∂L/∂q̂, stored pixel-major (Pq × D)
    let mut d_unit = vec![0f32; pq * d];
    for (f, (m, key)) in masks.iter().zip(keys).enumerate() {
        if key.dim() != d {
            return Err(Error::shape("backprop_to_features", format!("key dim {} vs {d}", key.dim())));
        }
        let pk = key.pixels();
        if m.rows() != pq || m.cols() != pk {
            return Err(Error::shape(
                "backprop_to_features",
                format!("mask {:?} for {pq}x{pk} pairs", m.positive.shape()),
            ));
        }
        let (k_unit, _) = key.normalized()?;
        // G_ij = dSp_i·Mp_ij/|P_i| + dSn_i·Mn_ij/|N_i^f|
        let mut g = vec![0f32; pq * pk];
        for i in 0..pq {
            if !agg.valid[i] {
                continue;
            }
            let wp = loss.d_sp[i] / agg.positive_counts[i] as f32;
            let nc = agg.negative_counts[f][i];
            let wn = if nc > 0 { loss.d_sn[i] / nc as f32 } else { 0.0 };
            let prow = &m.positive.data()[i * pk..(i + 1) * pk];
            for (gv, &mp) in g[i * pk..(i + 1) * pk].iter_mut().zip(prow) {
                *gv = if mp != 0.0 { wp } else { wn };
            }
        }
        // d_unit += G · K̂  (K̂ is Pk × D, stored D × Pk)
        gemm(pq, pk, d, &g, Layout::row_major(pk), &k_unit, Layout::transposed(pk), 1.0, &mut d_unit);
    }

    // ∂L/∂q = (I − q̂q̂ᵀ) ∂L/∂q̂ / ‖q‖
    let mut grad = vec![0f32; d * pq];
    for i in 0..pq {
        let du = &d_unit[i * d..(i + 1) * d];
        let dot: f32 = (0..d).map(|c| du[c] * q_unit[c * pq + i]).sum();
        for c in 0..d {
            grad[c * pq + i] = (du[c] - dot * q_unit[c * pq + i]) / q_norm[i];
        }
    }
    Ok(FeatureGradients {
        query: Tensor::new(query.features.shape().to_vec(), grad)?,
        keys: keys.iter().map(|k| Tensor::zeros_like(&k.features)).collect(),
    })
}
