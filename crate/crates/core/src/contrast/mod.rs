//! Pseudo-label guided cross-video pixel contrast.
//!
//! For one query view, every key view contributes a cosine similarity map and a
//! pair of label masks. Positives are averaged over all key frames at once,
//! negatives are averaged per key frame and then summed, and the loss is a
//! two-way softmax between the two per query pixel. Only the query branch
//! receives gradients; the key branch follows it by an exponential moving
//! average.

mod augment;
mod ema;
mod keys;
mod loss;
mod shots;
mod similarity;

pub use augment::{augment, CropParams};
pub use ema::{ema_update, EncoderPair, Parameters};
pub use keys::{select_keys, KeyConfig, KeyPool, KeySet, KeyView};
pub use loss::{backprop_to_features, contrastive_loss, ContrastLoss, FeatureGradients};
pub use shots::{detect_shots, gray_histogram, histogram_l1, Shots, DEFAULT_BINS, DEFAULT_THRESHOLD};
pub use similarity::{
    aggregate, build_masks, similarity_map, AggregatedSimilarities, Branch, FeatureMap, PairMasks, SimilarityMap,
};
