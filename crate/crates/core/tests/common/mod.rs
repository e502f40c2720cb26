//! Shared oracles for the integration tests.
#![allow(dead_code)]

use pgvcl::numerics::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_EPS: f64 = 1e-2;
pub const GRAD_TOL: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], scale: f32, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Central differences of a scalar function of `x`, evaluated in f64 around
/// an f32 point: `(f(x + ε e_i) − f(x − ε e_i)) / 2ε`.
pub fn numeric_gradient(x: &Tensor, eps: f64, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = x.data()[i];
            probe.data_mut()[i] = (orig as f64 + eps) as f32;
            let up = f(&probe);
            probe.data_mut()[i] = (orig as f64 - eps) as f32;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`; zero when both vanish.
pub fn relative_error(analytic: &[f32], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(&a, &n)| (a as f64 - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Sum of `w ⊙ t`; turns a tensor output into a scalar with a known upstream gradient.
pub fn weighted_sum(t: &Tensor, w: &Tensor) -> f64 {
    t.data().iter().zip(w.data()).map(|(&a, &b)| a as f64 * b as f64).sum()
}

pub mod grad {
    //! Randomised gradient-check cases. Each returns the worst relative error
    //! over the checked inputs of one instance, or `None` if the instance had
    //! to be discarded (a non-differentiable point within ε).

    use super::*;
    use pgvcl::contrast::{
        aggregate, backprop_to_features, build_masks, contrastive_loss, similarity_map, Branch, FeatureMap,
    };
    use pgvcl::numerics::{conv2d, conv2d_forward, relu, relu_forward};
    use pgvcl::contrast::Parameters;
    use pgvcl::pipeline::{cross_entropy_loss, ohem_loss, ohem_selection, pixel_cross_entropy, Backbone, ContrastNet};
    use pgvcl::synthdata::LabelMap;

    pub fn labels(h: usize, w: usize, c: u8, rng: &mut ChaCha8Rng) -> LabelMap {
        LabelMap::new(h, w, (0..h * w).map(|_| rng.random_range(0..c)).collect()).unwrap()
    }

    pub fn conv(seed: u64) -> Option<f64> {
        let mut r = rng(seed);
        let (n, c, o) = (r.random_range(1..3), r.random_range(1..4), r.random_range(1..4));
        let k = [1, 3][r.random_range(0..2)];
        let (stride, pad) = (r.random_range(1..3), r.random_range(0..=k / 2));
        let (h, w) = (r.random_range(k..7), r.random_range(k..7));
        let x = random_tensor(&[n, c, h, w], 1.0, &mut r);
        let wt = random_tensor(&[o, c, k, k], 1.0, &mut r);
        let b = random_tensor(&[o], 1.0, &mut r);
        let fwd = conv2d(&x, &wt, &b, stride, pad).unwrap();
        let up = random_tensor(fwd.output.shape(), 1.0, &mut r);
        let g = fwd.backward.backward(&up).unwrap();
        let nx = numeric_gradient(&x, GRAD_EPS, |t| weighted_sum(&conv2d_forward(t, &wt, &b, stride, pad).unwrap(), &up));
        let nw = numeric_gradient(&wt, GRAD_EPS, |t| weighted_sum(&conv2d_forward(&x, t, &b, stride, pad).unwrap(), &up));
        let nb = numeric_gradient(&b, GRAD_EPS, |t| weighted_sum(&conv2d_forward(&x, &wt, t, stride, pad).unwrap(), &up));
        Some(
            relative_error(g.input.data(), &nx)
                .max(relative_error(g.weight.data(), &nw))
                .max(relative_error(g.bias.data(), &nb)),
        )
    }

    pub fn relu_case(seed: u64) -> Option<f64> {
        let mut r = rng(seed);
        let n = r.random_range(4..40);
        // keep every input at least 5ε away from the kink
        let data: Vec<f32> = (0..n)
            .map(|_| {
                let v: f32 = r.random_range(0.05..2.0);
                if r.random_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let x = Tensor::new(vec![n], data).unwrap();
        let up = random_tensor(&[n], 1.0, &mut r);
        let g = relu(&x).backward.backward(&up).unwrap();
        let num = numeric_gradient(&x, GRAD_EPS, |t| weighted_sum(&relu_forward(t), &up));
        Some(relative_error(g.data(), &num))
    }

    pub fn cross_entropy(seed: u64) -> Option<f64> {
        let mut r = rng(seed);
        let (c, h, w) = (r.random_range(2..6), r.random_range(1..5), r.random_range(1..5));
        let logits = random_tensor(&[c, h, w], 3.0, &mut r);
        let target = labels(h, w, c as u8, &mut r);
        let (_, g) = cross_entropy_loss(&logits, &target).unwrap();
        let num = numeric_gradient(&logits, GRAD_EPS, |t| cross_entropy_loss(t, &target).unwrap().0 as f64);
        Some(relative_error(g.data(), &num))
    }

    pub fn ohem(seed: u64) -> Option<f64> {
        let mut r = rng(seed);
        let (c, h, w) = (r.random_range(2..5), r.random_range(2..5), r.random_range(2..5));
        let logits = random_tensor(&[c, h, w], 3.0, &mut r);
        let target = labels(h, w, c as u8, &mut r);
        let tau = r.random_range(0.2f32..1.5);
        let k_min = r.random_range(1..=h * w);
        // the kept set must not change inside the ε-ball
        let ce = pixel_cross_entropy(&logits, &target).unwrap().per_pixel;
        let margin = 0.1;
        if ce.iter().any(|&v| (v - tau).abs() < margin) {
            return None;
        }
        let mut sorted = ce.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let kept = ohem_selection(&ce, tau, k_min).len();
        if kept < sorted.len() && sorted[kept - 1] - sorted[kept] < margin {
            return None;
        }
        let (_, g) = ohem_loss(&logits, &target, tau, k_min).unwrap();
        let num = numeric_gradient(&logits, GRAD_EPS, |t| ohem_loss(t, &target, tau, k_min).unwrap().0 as f64);
        Some(relative_error(g.data(), &num))
    }

    fn chain_loss(q: &Tensor, ql: &LabelMap, keys: &[FeatureMap], kl: &[LabelMap]) -> f64 {
        let qf = FeatureMap::new(q.clone(), Branch::Query).unwrap();
        let sims: Vec<_> = keys.iter().map(|k| similarity_map(&qf, k).unwrap()).collect();
        let masks: Vec<_> = kl.iter().map(|l| build_masks(ql, l)).collect();
        contrastive_loss(&aggregate(&sims, &masks).unwrap()).unwrap().loss as f64
    }

    /// Query features → cosine similarity → masks → aggregation → loss. Also
    /// checks that no gradient reaches the key features.
    pub fn contrastive(seed: u64) -> Option<f64> {
        let mut r = rng(seed);
        let d = r.random_range(2..6);
        let (qh, qw) = (r.random_range(1..4), r.random_range(1..4));
        let n_keys = r.random_range(1..4);
        let q = random_tensor(&[d, qh, qw], 3.0, &mut r);
        let ql = labels(qh, qw, 3, &mut r);
        let keys: Vec<FeatureMap> = (0..n_keys)
            .map(|_| FeatureMap::new(random_tensor(&[d, 2, 2], 3.0, &mut r), Branch::Key).unwrap())
            .collect();
        let kl: Vec<LabelMap> = (0..n_keys).map(|_| labels(2, 2, 3, &mut r)).collect();
        let qf = FeatureMap::new(q.clone(), Branch::Query).unwrap();
        let sims: Vec<_> = keys.iter().map(|k| similarity_map(&qf, k).unwrap()).collect();
        let masks: Vec<_> = kl.iter().map(|l| build_masks(&ql, l)).collect();
        let agg = aggregate(&sims, &masks).unwrap();
        let loss = contrastive_loss(&agg).ok()?;
        // clamping at ±1 is a kink; stay clear of it
        if sims.iter().any(|s| s.values.data().iter().any(|v| v.abs() > 0.99)) {
            return None;
        }
        let grads = backprop_to_features(&loss, &agg, &masks, &qf, &keys).unwrap();
        if grads.keys.iter().any(|k| k.data().iter().any(|&v| v != 0.0)) {
            return Some(f64::INFINITY);
        }
        let num = numeric_gradient(&q, GRAD_EPS, |x| chain_loss(x, &ql, &keys, &kl));
        Some(relative_error(grads.query.data(), &num))
    }

    fn network_loss(net: &ContrastNet, x: &Tensor, ql: &LabelMap, keys: &[FeatureMap], kl: &[LabelMap]) -> Option<f64> {
        let emb = net.forward_inference(x).ok()?.item(0).ok()?;
        chain_loss_checked(&emb, ql, keys, kl)
    }

    fn chain_loss_checked(q: &Tensor, ql: &LabelMap, keys: &[FeatureMap], kl: &[LabelMap]) -> Option<f64> {
        let qf = FeatureMap::new(q.clone(), Branch::Query).ok()?;
        let sims = keys.iter().map(|k| similarity_map(&qf, k)).collect::<Result<Vec<_>, _>>().ok()?;
        let masks: Vec<_> = kl.iter().map(|l| build_masks(ql, l)).collect();
        Some(contrastive_loss(&aggregate(&sims, &masks).ok()?).ok()?.loss as f64)
    }

    /// The whole contrast step: image → backbone → projector → loss, against
    /// fixed key embeddings. Coordinates whose one-sided differences disagree
    /// straddle a ReLU kink and are left out; saturated instances are discarded.
    pub fn network(seed: u64) -> Option<f64> {
        const EPS: f32 = 1e-3;
        let mut r = rng(seed);
        let net = ContrastNet::new(Backbone::init(r.random_range(2..6), &mut r), r.random_range(2..5), &mut r);
        let d = net.projector.w2.shape()[0];
        let x = random_tensor(&[1, 3, 8, 8], 1.0, &mut r);
        let ql = labels(2, 2, 3, &mut r);
        let keys: Vec<FeatureMap> = (0..r.random_range(1..4))
            .map(|_| FeatureMap::new(random_tensor(&[d, 2, 2], 1.0, &mut r), Branch::Key).unwrap())
            .collect();
        let kl: Vec<LabelMap> = keys.iter().map(|_| labels(2, 2, 3, &mut r)).collect();

        let (emb, cache) = net.forward(&x).ok()?;
        let qf = FeatureMap::new(emb.item(0).unwrap(), Branch::Query).ok()?;
        let sims = keys.iter().map(|k| similarity_map(&qf, k)).collect::<Result<Vec<_>, _>>().ok()?;
        let masks: Vec<_> = kl.iter().map(|l| build_masks(&ql, l)).collect();
        let agg = aggregate(&sims, &masks).ok()?;
        let loss = contrastive_loss(&agg).ok()?;
        let gq = backprop_to_features(&loss, &agg, &masks, &qf, &keys).unwrap().query;
        let grads = net.backward(&cache, &gq.reshape(emb.shape().to_vec()).unwrap()).unwrap();
        let total: f32 = grads.params().iter().flat_map(|g| g.data()).map(|v| v * v).sum::<f32>().sqrt();
        if total < 1e-2 {
            return None;
        }

        let l0 = network_loss(&net, &x, &ql, &keys, &kl)?;
        let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
        for (t, g) in grads.params().iter().enumerate() {
            for i in 0..g.len() {
                let mut probe = net.clone();
                let orig = probe.params()[t].data()[i];
                probe.params_mut()[t].data_mut()[i] = orig + EPS;
                let up = network_loss(&probe, &x, &ql, &keys, &kl)?;
                probe.params_mut()[t].data_mut()[i] = orig - EPS;
                let down = network_loss(&probe, &x, &ql, &keys, &kl)?;
                let (fwd, bwd) = ((up - l0) / EPS as f64, (l0 - down) / EPS as f64);
                if (fwd - bwd).abs() > 0.05 * fwd.abs().max(bwd.abs()) + 1e-3 {
                    continue;
                }
                analytic.push(g.data()[i]);
                numeric.push((up - down) / (2.0 * EPS as f64));
            }
        }
        Some(relative_error(&analytic, &numeric))
    }

    /// Runs `case` on consecutive seeds until `n` instances were checked; returns the errors.
    pub fn run(case: fn(u64) -> Option<f64>, n: usize) -> Vec<f64> {
        let mut errs = Vec::with_capacity(n);
        let mut seed = 0;
        while errs.len() < n {
            if let Some(e) = case(seed) {
                errs.push(e);
            }
            seed += 1;
            assert!(seed < 100 * n as u64, "too many discarded instances");
        }
        errs
    }
}

pub mod oracles {
    //! Hand-worked two-pixel fixtures. Expected values are computed here
    //! from the definitions, not from the library.

    use pgvcl::contrast::{aggregate, build_masks, contrastive_loss, similarity_map, Branch, FeatureMap, SimilarityMap};
    use pgvcl::numerics::Tensor;
    use pgvcl::synthdata::LabelMap;

    pub struct Check {
        pub name: &'static str,
        pub got: f64,
        pub want: f64,
    }

    fn sims(rows: usize, cols: usize, v: &[f32]) -> SimilarityMap {
        SimilarityMap {
            values: Tensor::new(vec![rows, cols], v.to_vec()).unwrap(),
        }
    }

    fn labels(v: &[u8]) -> LabelMap {
        LabelMap::new(1, v.len(), v.to_vec()).unwrap()
    }

    fn softplus(x: f64) -> f64 {
        x.exp().ln_1p()
    }

    #[allow(clippy::approx_constant)]
    pub fn checks() -> Vec<Check> {
        let mut out = Vec::new();

        // cosine of (3,4) and (4,3) is 24/25
        let q = FeatureMap::new(Tensor::new(vec![2, 1, 1], vec![3.0, 4.0]).unwrap(), Branch::Query).unwrap();
        let k = FeatureMap::new(Tensor::new(vec![2, 1, 1], vec![4.0, 3.0]).unwrap(), Branch::Key).unwrap();
        out.push(Check {
            name: "cosine similarity",
            got: similarity_map(&q, &k).unwrap().get(0, 0) as f64,
            want: 24.0 / 25.0,
        });

        // Query labels [0, 1]; frame A labels [0, 1], frame B labels [0, 0].
        let q_lab = labels(&[0, 1]);
        let s = [sims(2, 2, &[0.8, -0.2, 0.1, 0.6]), sims(2, 2, &[0.4, 0.2, -0.5, 0.3])];
        let m = [build_masks(&q_lab, &labels(&[0, 1])), build_masks(&q_lab, &labels(&[0, 0]))];
        let agg = aggregate(&s, &m).unwrap();
        // pixel 0: positives {0.8, 0.4, 0.2}; negatives only in A: {-0.2}
        let (sp0, sn0) = ((0.8 + 0.4 + 0.2) / 3.0, -0.2);
        // pixel 1: positives {0.6}; negatives A: {0.1}, B: mean{-0.5, 0.3}
        let (sp1, sn1) = (0.6, 0.1 + (-0.5 + 0.3) / 2.0);
        for (name, got, want) in [
            ("pixel 0 positive mean", agg.sp[0], sp0),
            ("pixel 0 negative sum", agg.sn[0], sn0),
            ("pixel 1 positive mean", agg.sp[1], sp1),
            ("pixel 1 negative sum", agg.sn[1], sn1),
        ] {
            out.push(Check {
                name,
                got: got as f64,
                want,
            });
        }
        out.push(Check {
            name: "two-frame loss",
            got: contrastive_loss(&agg).unwrap().loss as f64,
            want: (softplus(sn0 - sp0) + softplus(sn1 - sp1)) / 2.0,
        });

        // equal positive and negative similarity: ln 2
        let q_lab = labels(&[0]);
        let agg = aggregate(&[sims(1, 2, &[0.3, 0.3])], &[build_masks(&q_lab, &labels(&[0, 1]))]).unwrap();
        out.push(Check {
            name: "Sp = Sn gives ln 2",
            got: contrastive_loss(&agg).unwrap().loss as f64,
            want: 0.69315,
        });

        // Sp = 1, Sn = -1: ln(1 + e^-2)
        let agg = aggregate(&[sims(1, 2, &[1.0, -1.0])], &[build_masks(&q_lab, &labels(&[0, 1]))]).unwrap();
        out.push(Check {
            name: "Sp = 1, Sn = -1",
            got: contrastive_loss(&agg).unwrap().loss as f64,
            want: 0.12693,
        });

        // pixel 0 has no positives, pixel 1 no negatives: neither counts
        let q_lab = labels(&[0, 1]);
        let agg = aggregate(&[sims(2, 2, &[0.5, 0.5, 0.2, 0.9])], &[build_masks(&q_lab, &labels(&[1, 1]))]).unwrap();
        out.push(Check {
            name: "degenerate pixels are excluded",
            got: agg.num_valid() as f64,
            want: 0.0,
        });
        out
    }

    pub const TOL: f64 = 1e-5;
}

pub mod invariants {
    //! Randomised structural checks of the contrast objective. Each returns
    //! the first violated property.

    use super::*;
    use pgvcl::contrast::{
        aggregate, backprop_to_features, build_masks, contrastive_loss, ema_update, similarity_map,
        AggregatedSimilarities, Branch, FeatureMap,
    };
    use pgvcl::synthdata::LabelMap;

    pub struct Instance {
        pub query: FeatureMap,
        pub query_labels: LabelMap,
        pub keys: Vec<FeatureMap>,
        pub key_labels: Vec<LabelMap>,
    }

    pub fn instance(seed: u64) -> Instance {
        let mut r = rng(seed);
        let d = r.random_range(2..8);
        let classes = r.random_range(1..4u8);
        let (qh, qw) = (r.random_range(1..5), r.random_range(1..5));
        let n_keys = r.random_range(1..5);
        let lab = |h: usize, w: usize, r: &mut ChaCha8Rng| {
            LabelMap::new(h, w, (0..h * w).map(|_| r.random_range(0..classes)).collect()).unwrap()
        };
        let query = FeatureMap::new(random_tensor(&[d, qh, qw], 2.0, &mut r), Branch::Query).unwrap();
        let query_labels = lab(qh, qw, &mut r);
        let mut keys = Vec::new();
        let mut key_labels = Vec::new();
        for _ in 0..n_keys {
            let (kh, kw) = (r.random_range(1..5), r.random_range(1..5));
            keys.push(FeatureMap::new(random_tensor(&[d, kh, kw], 2.0, &mut r), Branch::Key).unwrap());
            key_labels.push(lab(kh, kw, &mut r));
        }
        Instance {
            query,
            query_labels,
            keys,
            key_labels,
        }
    }

    fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
        if ok {
            Ok(())
        } else {
            Err(what())
        }
    }

    pub fn masks_partition(seed: u64) -> Result<(), String> {
        let inst = instance(seed);
        for kl in &inst.key_labels {
            let m = build_masks(&inst.query_labels, kl);
            for (i, (p, n)) in m.positive.data().iter().zip(m.negative.data()).enumerate() {
                ensure(p + n == 1.0 && (*p == 0.0 || *p == 1.0), || format!("seed {seed}: Mp+Mn at {i} is {}", p + n))?;
            }
        }
        Ok(())
    }

    pub fn similarity_bounded_and_symmetric(seed: u64) -> Result<(), String> {
        let inst = instance(seed);
        for k in &inst.keys {
            let s = similarity_map(&inst.query, k).unwrap();
            let key_as_query = FeatureMap::new(k.features.clone(), Branch::Query).unwrap();
            let query_as_key = FeatureMap::new(inst.query.features.clone(), Branch::Key).unwrap();
            let t = similarity_map(&key_as_query, &query_as_key).unwrap();
            for i in 0..s.rows() {
                for j in 0..s.cols() {
                    let v = s.get(i, j);
                    ensure(v.abs() <= 1.0 + 1e-5, || format!("seed {seed}: S[{i},{j}] = {v}"))?;
                    ensure((v - t.get(j, i)).abs() <= 1e-6, || format!("seed {seed}: S not symmetric at {i},{j}"))?;
                }
            }
        }
        Ok(())
    }

    fn aggregated(inst: &Instance, order: &[usize]) -> AggregatedSimilarities {
        let sims: Vec<_> = order.iter().map(|&j| similarity_map(&inst.query, &inst.keys[j]).unwrap()).collect();
        let masks: Vec<_> = order.iter().map(|&j| build_masks(&inst.query_labels, &inst.key_labels[j])).collect();
        aggregate(&sims, &masks).unwrap()
    }

    pub fn key_permutation_invariance(seed: u64) -> Result<(), String> {
        let inst = instance(seed);
        let n = inst.keys.len();
        let forward: Vec<usize> = (0..n).collect();
        let mut shuffled = forward.clone();
        shuffled.shuffle(&mut rng(seed ^ 0x5eed));
        shuffled.reverse();
        let a = aggregated(&inst, &forward);
        let b = aggregated(&inst, &shuffled);
        ensure(a.valid == b.valid, || format!("seed {seed}: validity changed under permutation"))?;
        for i in 0..a.sp.len() {
            ensure((a.sp[i] - b.sp[i]).abs() <= 1e-5 && (a.sn[i] - b.sn[i]).abs() <= 1e-5, || {
                format!("seed {seed}: pixel {i} moved from ({}, {}) to ({}, {})", a.sp[i], a.sn[i], b.sp[i], b.sn[i])
            })?;
        }
        Ok(())
    }

    pub fn no_gradient_into_keys(seed: u64) -> Result<(), String> {
        let inst = instance(seed);
        let order: Vec<usize> = (0..inst.keys.len()).collect();
        let agg = aggregated(&inst, &order);
        let Ok(loss) = contrastive_loss(&agg) else {
            return Ok(());
        };
        let masks: Vec<_> = inst.key_labels.iter().map(|kl| build_masks(&inst.query_labels, kl)).collect();
        let g = backprop_to_features(&loss, &agg, &masks, &inst.query, &inst.keys).unwrap();
        ensure(g.keys.len() == inst.keys.len(), || format!("seed {seed}: missing key gradients"))?;
        for (k, gk) in inst.keys.iter().zip(&g.keys) {
            ensure(gk.shape() == k.features.shape(), || format!("seed {seed}: key gradient shape"))?;
            ensure(gk.data().iter().all(|&v| v == 0.0), || format!("seed {seed}: nonzero key gradient"))?;
        }
        Ok(())
    }

    /// A query pixel whose label matches every key pixel: its positive mean is
    /// the plain mean of its similarity rows and it has no negatives.
    pub fn uniform_key_labels(seed: u64) -> Result<(), String> {
        let mut inst = instance(seed);
        let class = inst.query_labels.data()[0];
        for (kl, k) in inst.key_labels.iter_mut().zip(&inst.keys) {
            let (h, w) = (k.features.shape()[1], k.features.shape()[2]);
            *kl = LabelMap::filled(h, w, class);
        }
        let order: Vec<usize> = (0..inst.keys.len()).collect();
        let agg = aggregated(&inst, &order);
        let (mut sum, mut n) = (0f64, 0usize);
        for k in &inst.keys {
            let s = similarity_map(&inst.query, k).unwrap();
            sum += (0..s.cols()).map(|j| s.get(0, j) as f64).sum::<f64>();
            n += s.cols();
        }
        ensure(!agg.valid[0], || format!("seed {seed}: pixel without negatives counted as valid"))?;
        ensure((agg.sp[0] as f64 - sum / n as f64).abs() <= 1e-5, || {
            format!("seed {seed}: Sp {} vs row mean {}", agg.sp[0], sum / n as f64)
        })
    }

    pub fn loss_monotone(seed: u64) -> Result<(), String> {
        let mut r = rng(seed);
        let n = r.random_range(1..6);
        let base = AggregatedSimilarities {
            sp: (0..n).map(|_| r.random_range(-1.0..1.0f32)).collect(),
            sn: (0..n).map(|_| r.random_range(-3.0..3.0f32)).collect(),
            valid: vec![true; n],
            positive_counts: vec![1; n],
            negative_counts: vec![vec![1; n]],
        };
        let l0 = contrastive_loss(&base).unwrap().loss;
        let i = r.random_range(0..n);
        let delta = r.random_range(0.01..0.5f32);
        let mut up_p = base.clone();
        up_p.sp[i] += delta;
        let mut up_n = base.clone();
        up_n.sn[i] += delta;
        let (lp, ln) = (contrastive_loss(&up_p).unwrap().loss, contrastive_loss(&up_n).unwrap().loss);
        ensure(lp <= l0, || format!("seed {seed}: raising Sp raised L {l0} -> {lp}"))?;
        ensure(ln >= l0, || format!("seed {seed}: raising Sn lowered L {l0} -> {ln}"))
    }

    pub fn ema_contraction(seed: u64) -> Result<(), String> {
        let mut r = rng(seed);
        let n = r.random_range(1..20);
        let online = random_tensor(&[n], 3.0, &mut r);
        let old = random_tensor(&[n], 3.0, &mut r);
        let m = r.random_range(0.0..=1.0f32);
        let mut new = old.clone();
        ema_update(&[&online], &mut [&mut new], m).unwrap();
        for i in 0..n {
            let (o, a, b) = (online.data()[i] as f64, old.data()[i] as f64, new.data()[i] as f64);
            let want = m as f64 * (a - o).abs();
            ensure(((b - o).abs() - want).abs() <= 1e-5 * (1.0 + a.abs() + o.abs()), || {
                format!("seed {seed}: |new - online| = {} but m·|old - online| = {want}", (b - o).abs())
            })?;
        }
        Ok(())
    }

    pub const ALL: [(&str, fn(u64) -> Result<(), String>); 7] = [
        ("Mp + Mn = 1", masks_partition),
        ("S bounded and symmetric", similarity_bounded_and_symmetric),
        ("key-frame permutation invariance", key_permutation_invariance),
        ("zero gradient into keys", no_gradient_into_keys),
        ("uniform key labels", uniform_key_labels),
        ("loss monotone in Sp and Sn", loss_monotone),
        ("EMA contraction", ema_contraction),
    ];
}

/// Three 12-frame 32×32 videos and two epochs per stage: seconds, not minutes.
pub fn small_experiment(seed: u64) -> pgvcl::pipeline::ExperimentConfig {
    let mut exp = pgvcl::pipeline::ExperimentConfig::default().with_seed(seed);
    exp.data.num_videos = 3;
    exp.data.frames_per_video = 12;
    exp.data.shots_per_video = 2;
    exp.data.num_classes = 4;
    exp.data.height = 32;
    exp.data.width = 32;
    exp.data.objects_min = 2;
    exp.data.objects_max = 3;
    exp.data.radius_min = 3.0;
    exp.data.radius_max = 5.0;
    exp.run.interval = 4;
    exp.run.holdout_video = 2;
    exp.run.pretrain_epochs = 2;
    exp.run.contrast_epochs = 2;
    exp.run.finetune_epochs = 2;
    exp.run.eval_every = 1;
    exp.run.contrast_warmup_epochs = 1;
    exp.run.projector_warmup_epochs = 1;
    exp
}

/// The same settings as `small_experiment`, as config-file text.
pub const SMALL_CONFIG: &str = "\
num_videos = 3
frames_per_video = 12
shots_per_video = 2
num_classes = 4
height = 32
width = 32
objects_min = 2
objects_max = 3
radius_min = 3.0
radius_max = 5.0
interval = 4
holdout_video = 2
pretrain_epochs = 2
contrast_epochs = 2
finetune_epochs = 2
eval_every = 1
contrast_warmup_epochs = 1
projector_warmup_epochs = 1
";
