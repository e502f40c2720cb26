//! The fixed encoder, the segmentation classifier and the projection head.
//!
//! ```text
//! backbone   conv3x3(3→16, s2) relu  conv3x3(16→32, s2) relu  conv3x3(32→F, s1) relu   (stride 4)
//! classifier conv1x1(F→C), bilinear upsample ×4
//! projector  conv1x1(F→F) relu conv1x1(F→D)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::contrast::Parameters;
use crate::error::{Error, Result};
use crate::numerics::{
    conv2d, conv2d_forward, relu, relu_forward, resize, resize_backward, Conv2dBackward, ReluBackward,
    ResizeMode, Tensor,
};
use crate::sampling::PixelClassifier;

pub const FEATURE_STRIDE: usize = 4;
const STEM_CHANNELS: usize = 16;
const MID_CHANNELS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub num_classes: usize,
    /// Backbone output channels.
    pub feature_dim: usize,
    /// Projection-head output channels (contrast embedding size).
    pub embed_dim: usize,
    pub height: usize,
    pub width: usize,
}

impl ModelSpec {
    pub fn new(num_classes: usize, feature_dim: usize) -> Self {
        Self {
            num_classes,
            feature_dim,
            embed_dim: 16,
            height: 64,
            width: 64,
        }
    }

    pub fn feature_size(&self) -> (usize, usize) {
        (self.height.div_ceil(FEATURE_STRIDE), self.width.div_ceil(FEATURE_STRIDE))
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.feature_dim < 2 || self.embed_dim < 2 {
            return Err(Error::Config(format!("model needs C >= 2 and D >= 2, got {self:?}")));
        }
        if !self.height.is_multiple_of(FEATURE_STRIDE) || !self.width.is_multiple_of(FEATURE_STRIDE) {
            return Err(Error::Config(format!(
                "input {}x{} must be divisible by the feature stride {FEATURE_STRIDE}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

/// He-normal `out×in×k×k` kernel and zero bias.
fn he_conv(out: usize, inp: usize, k: usize, rng: &mut ChaCha8Rng) -> (Tensor, Tensor) {
    let fan_in = (inp * k * k) as f32;
    let normal = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).expect("valid std");
    let data = (0..out * inp * k * k).map(|_| normal.sample(rng)).collect();
    (
        Tensor::new(vec![out, inp, k, k], data).expect("kernel shape"),
        Tensor::zeros(&[out]),
    )
}

fn stack_batch(images: &[&Tensor]) -> Result<Tensor> {
    Tensor::stack(images)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub conv3_w: Tensor,
    pub conv3_b: Tensor,
}

pub struct BackboneCache {
    c1: Conv2dBackward,
    r1: ReluBackward,
    c2: Conv2dBackward,
    r2: ReluBackward,
    c3: Conv2dBackward,
    r3: ReluBackward,
}

impl Backbone {
    pub fn init(feature_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let (conv1_w, conv1_b) = he_conv(STEM_CHANNELS, 3, 3, rng);
        let (conv2_w, conv2_b) = he_conv(MID_CHANNELS, STEM_CHANNELS, 3, rng);
        let (conv3_w, conv3_b) = he_conv(feature_dim, MID_CHANNELS, 3, rng);
        Self {
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            conv3_w,
            conv3_b,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.conv3_w.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, BackboneCache)> {
        let c1 = conv2d(x, &self.conv1_w, &self.conv1_b, 2, 1)?;
        let r1 = relu(&c1.output);
        let c2 = conv2d(&r1.output, &self.conv2_w, &self.conv2_b, 2, 1)?;
        let r2 = relu(&c2.output);
        let c3 = conv2d(&r2.output, &self.conv3_w, &self.conv3_b, 1, 1)?;
        let r3 = relu(&c3.output);
        Ok((
            r3.output,
            BackboneCache {
                c1: c1.backward,
                r1: r1.backward,
                c2: c2.backward,
                r2: r2.backward,
                c3: c3.backward,
                r3: r3.backward,
            },
        ))
    }

    pub fn forward_inference(&self, x: &Tensor) -> Result<Tensor> {
        let h = relu_forward(&conv2d_forward(x, &self.conv1_w, &self.conv1_b, 2, 1)?);
        let h = relu_forward(&conv2d_forward(&h, &self.conv2_w, &self.conv2_b, 2, 1)?);
        Ok(relu_forward(&conv2d_forward(&h, &self.conv3_w, &self.conv3_b, 1, 1)?))
    }

    /// Parameter gradients, laid out as a `Backbone`.
    pub fn backward(&self, cache: &BackboneCache, grad_features: &Tensor) -> Result<Backbone> {
        let g = cache.r3.backward(grad_features)?;
        let g3 = cache.c3.backward(&g)?;
        let g = cache.r2.backward(&g3.input)?;
        let g2 = cache.c2.backward(&g)?;
        let g = cache.r1.backward(&g2.input)?;
        let g1 = cache.c1.backward(&g)?;
        Ok(Backbone {
            conv1_w: g1.weight,
            conv1_b: g1.bias,
            conv2_w: g2.weight,
            conv2_b: g2.bias,
            conv3_w: g3.weight,
            conv3_b: g3.bias,
        })
    }
}

impl Parameters for Backbone {
    fn param_names(&self) -> Vec<&'static str> {
        vec!["conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b"]
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.conv1_w, &self.conv1_b, &self.conv2_w, &self.conv2_b, &self.conv3_w, &self.conv3_b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.conv3_w,
            &mut self.conv3_b,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub w: Tensor,
    pub b: Tensor,
}

pub struct ClassifierCache {
    conv: Conv2dBackward,
    low_h: usize,
    low_w: usize,
}

impl Classifier {
    pub fn init(feature_dim: usize, num_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let (w, b) = he_conv(num_classes, feature_dim, 1, rng);
        Self { w, b }
    }

    /// Logits at input resolution `out_h × out_w`.
    pub fn forward(&self, features: &Tensor, out_h: usize, out_w: usize) -> Result<(Tensor, ClassifierCache)> {
        let (_, _, low_h, low_w) = features.dims4()?;
        let conv = conv2d(features, &self.w, &self.b, 1, 0)?;
        let logits = resize(&conv.output, out_h, out_w, ResizeMode::Bilinear)?;
        Ok((
            logits,
            ClassifierCache {
                conv: conv.backward,
                low_h,
                low_w,
            },
        ))
    }

    pub fn forward_inference(&self, features: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
        resize(&conv2d_forward(features, &self.w, &self.b, 1, 0)?, out_h, out_w, ResizeMode::Bilinear)
    }

    /// Returns (parameter gradients, gradient w.r.t. the features).
    pub fn backward(&self, cache: &ClassifierCache, grad_logits: &Tensor) -> Result<(Classifier, Tensor)> {
        let g = resize_backward(grad_logits, cache.low_h, cache.low_w, ResizeMode::Bilinear)?;
        let gc = cache.conv.backward(&g)?;
        Ok((Classifier { w: gc.weight, b: gc.bias }, gc.input))
    }
}

impl Parameters for Classifier {
    fn param_names(&self) -> Vec<&'static str> {
        vec!["cls.w", "cls.b"]
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

pub struct ProjectorCache {
    c1: Conv2dBackward,
    r1: ReluBackward,
    c2: Conv2dBackward,
}

impl Projector {
    pub fn init(feature_dim: usize, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let (w1, b1) = he_conv(feature_dim, feature_dim, 1, rng);
        let (w2, b2) = he_conv(embed_dim, feature_dim, 1, rng);
        Self { w1, b1, w2, b2 }
    }

    pub fn forward(&self, features: &Tensor) -> Result<(Tensor, ProjectorCache)> {
        let c1 = conv2d(features, &self.w1, &self.b1, 1, 0)?;
        let r1 = relu(&c1.output);
        let c2 = conv2d(&r1.output, &self.w2, &self.b2, 1, 0)?;
        Ok((
            c2.output,
            ProjectorCache {
                c1: c1.backward,
                r1: r1.backward,
                c2: c2.backward,
            },
        ))
    }

    pub fn forward_inference(&self, features: &Tensor) -> Result<Tensor> {
        let h = relu_forward(&conv2d_forward(features, &self.w1, &self.b1, 1, 0)?);
        conv2d_forward(&h, &self.w2, &self.b2, 1, 0)
    }

    pub fn backward(&self, cache: &ProjectorCache, grad_embed: &Tensor) -> Result<(Projector, Tensor)> {
        let g2 = cache.c2.backward(grad_embed)?;
        let g = cache.r1.backward(&g2.input)?;
        let g1 = cache.c1.backward(&g)?;
        Ok((
            Projector {
                w1: g1.weight,
                b1: g1.bias,
                w2: g2.weight,
                b2: g2.bias,
            },
            g1.input,
        ))
    }
}

impl Parameters for Projector {
    fn param_names(&self) -> Vec<&'static str> {
        vec!["proj1.w", "proj1.b", "proj2.w", "proj2.b"]
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Backbone plus per-pixel classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationModel {
    pub spec: ModelSpec,
    pub backbone: Backbone,
    pub classifier: Classifier,
}

pub struct SegmentationCache {
    backbone: BackboneCache,
    classifier: ClassifierCache,
}

/// Deterministic He-initialised model.
pub fn build_encoder(spec: ModelSpec, seed: u64) -> Result<SegmentationModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let backbone = Backbone::init(spec.feature_dim, &mut rng);
    let classifier = Classifier::init(spec.feature_dim, spec.num_classes, &mut rng);
    Ok(SegmentationModel {
        spec,
        backbone,
        classifier,
    })
}

impl SegmentationModel {
    /// Keeps `backbone`, draws a fresh classifier from `rng`.
    pub fn with_backbone(spec: ModelSpec, backbone: Backbone, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        if backbone.feature_dim() != spec.feature_dim {
            return Err(Error::Config(format!(
                "backbone has {} output channels, spec wants {}",
                backbone.feature_dim(),
                spec.feature_dim
            )));
        }
        Ok(Self {
            classifier: Classifier::init(spec.feature_dim, spec.num_classes, rng),
            spec,
            backbone,
        })
    }

    /// Batch forward on N×3×H×W input, keeping what backward needs.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, SegmentationCache)> {
        let (_, _, h, w) = x.dims4()?;
        let (feat, bc) = self.backbone.forward(x)?;
        let (logits, cc) = self.classifier.forward(&feat, h, w)?;
        Ok((
            logits,
            SegmentationCache {
                backbone: bc,
                classifier: cc,
            },
        ))
    }

    pub fn backward(&self, cache: &SegmentationCache, grad_logits: &Tensor) -> Result<(Backbone, Classifier)> {
        let (gc, gfeat) = self.classifier.backward(&cache.classifier, grad_logits)?;
        let gb = self.backbone.backward(&cache.backbone, &gfeat)?;
        Ok((gb, gc))
    }

    pub fn predict_batch(&self, x: &Tensor) -> Result<Tensor> {
        let (_, _, h, w) = x.dims4()?;
        let feat = self.backbone.forward_inference(x)?;
        self.classifier.forward_inference(&feat, h, w)
    }

    pub fn zeros_like(&self) -> SegmentationModel {
        let mut z = self.clone();
        z.params_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }
}

impl PixelClassifier for SegmentationModel {
    fn input_size(&self) -> (usize, usize) {
        (self.spec.height, self.spec.width)
    }

    fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn logits(&self, image: &Tensor) -> Result<Tensor> {
        let (c, h, w) = image.dims3()?;
        let batch = image.clone().reshape(vec![1, c, h, w])?;
        self.predict_batch(&batch)?.reshape(vec![self.spec.num_classes, h, w])
    }
}

impl Parameters for SegmentationModel {
    fn param_names(&self) -> Vec<&'static str> {
        let mut n = self.backbone.param_names();
        n.extend(self.classifier.param_names());
        n
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.backbone.params();
        p.extend(self.classifier.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.backbone.params_mut();
        p.extend(self.classifier.params_mut());
        p
    }
}

/// θ for the contrast stage: backbone plus projection head.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastNet {
    pub backbone: Backbone,
    pub projector: Projector,
}

pub struct ContrastCache {
    backbone: BackboneCache,
    projector: ProjectorCache,
}

impl ContrastNet {
    pub fn new(backbone: Backbone, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let projector = Projector::init(backbone.feature_dim(), embed_dim, rng);
        Self { backbone, projector }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ContrastCache)> {
        let (feat, bc) = self.backbone.forward(x)?;
        let (emb, pc) = self.projector.forward(&feat)?;
        Ok((
            emb,
            ContrastCache {
                backbone: bc,
                projector: pc,
            },
        ))
    }

    pub fn forward_inference(&self, x: &Tensor) -> Result<Tensor> {
        self.projector.forward_inference(&self.backbone.forward_inference(x)?)
    }

    pub fn backward(&self, cache: &ContrastCache, grad_embed: &Tensor) -> Result<ContrastNet> {
        let (gp, gfeat) = self.projector.backward(&cache.projector, grad_embed)?;
        let gb = self.backbone.backward(&cache.backbone, &gfeat)?;
        Ok(ContrastNet {
            backbone: gb,
            projector: gp,
        })
    }

    pub fn zeros_like(&self) -> ContrastNet {
        let mut z = self.clone();
        z.params_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }
}

impl Parameters for ContrastNet {
    fn param_names(&self) -> Vec<&'static str> {
        let mut n = self.backbone.param_names();
        n.extend(self.projector.param_names());
        n
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.backbone.params();
        p.extend(self.projector.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.backbone.params_mut();
        p.extend(self.projector.params_mut());
        p
    }
}

pub(crate) fn stack(images: &[&Tensor]) -> Result<Tensor> {
    stack_batch(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_parameters() {
        let a = build_encoder(ModelSpec::new(5, 32), 11).unwrap();
        let b = build_encoder(ModelSpec::new(5, 32), 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, build_encoder(ModelSpec::new(5, 32), 12).unwrap());
    }

    #[test]
    fn stride_arithmetic() {
        let m = build_encoder(ModelSpec::new(5, 32), 0).unwrap();
        let x = Tensor::full(&[1, 3, 64, 64], 0.5);
        let feat = m.backbone.forward_inference(&x).unwrap();
        assert_eq!(feat.shape(), &[1, 32, 16, 16]);
        assert_eq!(m.predict_batch(&x).unwrap().shape(), &[1, 5, 64, 64]);
    }

    #[test]
    fn random_forward_is_finite() {
        let m = build_encoder(ModelSpec::new(5, 32), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.5f32, 0.3).unwrap();
        let x = Tensor::new(vec![2, 3, 64, 64], (0..2 * 3 * 64 * 64).map(|_| normal.sample(&mut rng)).collect()).unwrap();
        assert!(m.predict_batch(&x).unwrap().all_finite());
    }

    #[test]
    fn cached_and_inference_paths_agree() {
        let m = build_encoder(ModelSpec::new(4, 8), 2).unwrap();
        let x = Tensor::full(&[1, 3, 16, 16], 0.25);
        let (a, _) = m.forward(&x).unwrap();
        assert_eq!(a, m.predict_batch(&x).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(build_encoder(ModelSpec::new(1, 32), 0).is_err());
        assert!(build_encoder(ModelSpec::new(3, 1), 0).is_err());
        let mut s = ModelSpec::new(3, 8);
        s.height = 30;
        assert!(build_encoder(s, 0).is_err());
    }
}
