use crate::error::{Error, Result};
use crate::numerics::{gemm, Layout, Tensor};
use crate::synthdata::LabelMap;

/// Which encoder branch produced a feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Query,
    Key,
}

/// D×H′×W′ pixel embeddings (not normalised).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub features: Tensor,
    pub branch: Branch,
}

impl FeatureMap {
    pub fn new(features: Tensor, branch: Branch) -> Result<Self> {
        features.dims3()?;
        Ok(Self { features, branch })
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn pixels(&self) -> usize {
        self.features.shape()[1] * self.features.shape()[2]
    }

    /// Unit-norm embeddings in the same D×P layout, plus the original norms.
    pub(crate) fn normalized(&self) -> Result<(Vec<f32>, Vec<f32>)> {
        let (d, p) = (self.dim(), self.pixels());
        let w = self.features.shape()[2];
        let data = self.features.data();
        let mut norms = vec![0f32; p];
        for (j, n) in norms.iter_mut().enumerate() {
            let sq: f64 = (0..d).map(|c| (data[c * p + j] as f64).powi(2)).sum();
            *n = sq.sqrt() as f32;
            if !(*n > 1e-8) {
                return Err(Error::Degenerate(format!(
                    "{:?} embedding at pixel ({}, {}) has zero norm",
                    self.branch,
                    j / w,
                    j % w
                )));
            }
        }
        let mut unit = vec![0f32; d * p];
        for c in 0..d {
            for j in 0..p {
                unit[c * p + j] = data[c * p + j] / norms[j];
            }
        }
        Ok((unit, norms))
    }
}

/// Cosine similarity of every query pixel (rows) with every key pixel (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMap {
    pub values: Tensor,
}

impl SimilarityMap {
    pub fn rows(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values.data()[i * self.cols() + j]
    }
}

/// `S_ij = ⟨q_i, k_j⟩ / (‖q_i‖‖k_j‖)`.
pub fn similarity_map(fq: &FeatureMap, fk: &FeatureMap) -> Result<SimilarityMap> {
    if fq.dim() != fk.dim() {
        return Err(Error::shape(
            "similarity_map",
            format!("embedding dims {} vs {}", fq.dim(), fk.dim()),
        ));
    }
    let (q, _) = fq.normalized()?;
    let (k, _) = fk.normalized()?;
    Ok(similarity_from_unit(&q, &k, fq.dim(), fq.pixels(), fk.pixels()))
}

/// Both inputs in D×P layout, already unit-norm per pixel.
pub(crate) fn similarity_from_unit(q: &[f32], k: &[f32], d: usize, pq: usize, pk: usize) -> SimilarityMap {
    let mut s = vec![0f32; pq * pk];
    gemm(pq, d, pk, q, Layout::transposed(pq), k, Layout::row_major(pk), 0.0, &mut s);
    for v in &mut s {
        *v = v.clamp(-1.0, 1.0);
    }
    SimilarityMap {
        values: Tensor::new(vec![pq, pk], s).expect("similarity shape"),
    }
}

/// Binary positive/negative selection masks for one query-key pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairMasks {
    pub positive: Tensor,
    pub negative: Tensor,
}

impl PairMasks {
    pub fn rows(&self) -> usize {
        self.positive.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.positive.shape()[1]
    }
}

/// `Mp_ij = [ŷq_i == ŷk_j]`, `Mn = 1 − Mp`.
pub fn build_masks(query_labels: &LabelMap, key_labels: &LabelMap) -> PairMasks {
    let q = query_labels.data();
    let k = key_labels.data();
    let mut pos = Vec::with_capacity(q.len() * k.len());
    for &a in q {
        pos.extend(k.iter().map(|&b| if a == b { 1.0f32 } else { 0.0 }));
    }
    let neg = pos.iter().map(|&m| 1.0 - m).collect();
    PairMasks {
        positive: Tensor::new(vec![q.len(), k.len()], pos).expect("mask shape"),
        negative: Tensor::new(vec![q.len(), k.len()], neg).expect("mask shape"),
    }
}

/// Per-query-pixel positive and negative similarity summaries across all key frames.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedSimilarities {
    pub sp: Vec<f32>,
    pub sn: Vec<f32>,
    pub valid: Vec<bool>,
    /// |P_i|: positives pooled over every key frame.
    pub positive_counts: Vec<u32>,
    /// |N_i^id| per key frame, indexed `[frame][pixel]`.
    pub negative_counts: Vec<Vec<u32>>,
}

impl AggregatedSimilarities {
    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Positives: one mean over the positive pixels of all key frames together.
/// Negatives: a mean per key frame, summed over the frames that have any.
pub fn aggregate(sims: &[SimilarityMap], masks: &[PairMasks]) -> Result<AggregatedSimilarities> {
    let first = sims
        .first()
        .ok_or_else(|| Error::shape("aggregate", "no key frames"))?;
    if sims.len() != masks.len() {
        return Err(Error::shape(
            "aggregate",
            format!("{} similarity maps, {} masks", sims.len(), masks.len()),
        ));
    }
    let rows = first.rows();
    for (s, m) in sims.iter().zip(masks) {
        if s.rows() != rows || m.rows() != rows || m.cols() != s.cols() {
            return Err(Error::shape(
                "aggregate",
                format!("similarity {:?} vs mask {:?}", s.values.shape(), m.positive.shape()),
            ));
        }
    }

    let frames = sims.len();
    let mut pos_sum = vec![0f64; rows];
    let mut positive_counts = vec![0u32; rows];
    let mut neg_total = vec![0f64; rows];
    let mut negative_counts = vec![vec![0u32; rows]; frames];
    for (f, (s, m)) in sims.iter().zip(masks).enumerate() {
        let cols = s.cols();
        for i in 0..rows {
            let srow = &s.values.data()[i * cols..(i + 1) * cols];
            let prow = &m.positive.data()[i * cols..(i + 1) * cols];
            let (mut ps, mut pc, mut ns, mut nc) = (0f64, 0u32, 0f64, 0u32);
            for (&sv, &mp) in srow.iter().zip(prow) {
                if mp != 0.0 {
                    ps += sv as f64;
                    pc += 1;
                } else {
                    ns += sv as f64;
                    nc += 1;
                }
            }
            pos_sum[i] += ps;
            positive_counts[i] += pc;
            negative_counts[f][i] = nc;
            if nc > 0 {
                neg_total[i] += ns / nc as f64;
            }
        }
    }

    let sp = (0..rows)
        .map(|i| {
            if positive_counts[i] > 0 {
                (pos_sum[i] / positive_counts[i] as f64) as f32
            } else {
                0.0
            }
        })
        .collect();
    let sn = neg_total.iter().map(|&v| v as f32).collect();
    let valid = (0..rows)
        .map(|i| positive_counts[i] > 0 && negative_counts.iter().any(|c| c[i] > 0))
        .collect();
    Ok(AggregatedSimilarities {
        sp,
        sn,
        valid,
        positive_counts,
        negative_counts,
    })
}
