//! Checkpoints: parameters, optional SGD velocity and a `__meta__` text entry,
//! all in one PGVT container.

use std::collections::BTreeMap;
use std::path::Path;

use super::model::{build_encoder, Backbone, ContrastNet, ModelSpec, SegmentationModel};
use crate::contrast::{EncoderPair, Parameters};
use crate::error::{Error, Result};
use crate::numerics::{tensor_text, text_tensor, TensorFile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const META_ENTRY: &str = "__meta__";
/// Optimizer recorded by [`CheckpointMeta::new`].
pub const OPTIMIZER: &str = "sgd_momentum";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub stage: String,
    pub step: usize,
    pub config_hash: String,
    pub optimizer: String,
    /// Further `key=value` fields; the loader fills in the model shape keys.
    pub extra: BTreeMap<String, String>,
}

impl CheckpointMeta {
    pub fn new(stage: &str, step: usize, config_hash: &str) -> Self {
        Self {
            stage: stage.to_string(),
            step,
            config_hash: config_hash.to_string(),
            optimizer: OPTIMIZER.to_string(),
            extra: BTreeMap::new(),
        }
    }

    fn to_text(&self) -> String {
        let mut s = format!(
            "stage={}\nstep={}\nconfig_hash={}\noptimizer={}\n",
            self.stage, self.step, self.config_hash, self.optimizer
        );
        for (k, v) in &self.extra {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut fields: BTreeMap<String, String> = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut take = |k: &str| {
            fields.remove(k).ok_or_else(|| Error::Format {
                path: origin.to_string(),
                detail: format!("metadata lacks '{k}'"),
            })
        };
        let stage = take("stage")?;
        let step = take("step")?.parse().map_err(|_| Error::Format {
            path: origin.to_string(),
            detail: "metadata step is not an integer".into(),
        })?;
        let config_hash = take("config_hash")?;
        let optimizer = take("optimizer")?;
        Ok(Self {
            stage,
            step,
            config_hash,
            optimizer,
            extra: fields,
        })
    }

    fn usize_field(&self, key: &str, origin: &str) -> Result<usize> {
        self.extra
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format {
                path: origin.to_string(),
                detail: format!("metadata lacks integer '{key}'"),
            })
    }
}

#[derive(Clone, Debug)]
pub struct Loaded<M, V = M> {
    pub model: M,
    pub velocity: Option<V>,
    pub meta: CheckpointMeta,
    /// Non-fatal problems, such as a config hash that differs from the expected one.
    pub warnings: Vec<String>,
}

fn put<P: Parameters>(file: &mut TensorFile, prefix: &str, p: &P) {
    for (name, t) in p.param_names().into_iter().zip(p.params()) {
        file.push(format!("{prefix}.{name}"), t.clone());
    }
}

fn fill<P: Parameters>(file: &TensorFile, prefix: &str, p: &mut P, origin: &str) -> Result<()> {
    let names = p.param_names();
    for (name, t) in names.into_iter().zip(p.params_mut()) {
        let key = format!("{prefix}.{name}");
        let stored = file.require(&key, origin)?;
        if stored.shape() != t.shape() {
            return Err(Error::Format {
                path: origin.to_string(),
                detail: format!("{key} has shape {:?}, expected {:?}", stored.shape(), t.shape()),
            });
        }
        *t = stored.clone();
    }
    Ok(())
}

fn read_with_meta(path: &Path, expected_hash: Option<&str>) -> Result<(TensorFile, CheckpointMeta, Vec<String>)> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let origin = path.display().to_string();
    let file = TensorFile::read(path)?;
    let text = tensor_text(file.require(META_ENTRY, &origin)?).ok_or_else(|| Error::Format {
        path: origin.clone(),
        detail: "metadata is not UTF-8".into(),
    })?;
    let meta = CheckpointMeta::parse(&text, &origin)?;
    let mut warnings = Vec::new();
    if let Some(h) = expected_hash {
        if h != meta.config_hash {
            warnings.push(format!(
                "{origin}: config hash {} differs from current {h}; loading anyway",
                meta.config_hash
            ));
        }
    }
    Ok((file, meta, warnings))
}

fn spec_meta(meta: &mut CheckpointMeta, spec: &ModelSpec) {
    for (k, v) in [
        ("num_classes", spec.num_classes),
        ("feature_dim", spec.feature_dim),
        ("embed_dim", spec.embed_dim),
        ("height", spec.height),
        ("width", spec.width),
    ] {
        meta.extra.insert(k.to_string(), v.to_string());
    }
}

fn spec_from_meta(meta: &CheckpointMeta, origin: &str) -> Result<ModelSpec> {
    Ok(ModelSpec {
        num_classes: meta.usize_field("num_classes", origin)?,
        feature_dim: meta.usize_field("feature_dim", origin)?,
        embed_dim: meta.usize_field("embed_dim", origin)?,
        height: meta.usize_field("height", origin)?,
        width: meta.usize_field("width", origin)?,
    })
}

pub fn save_segmentation(
    path: &Path,
    model: &SegmentationModel,
    velocity: Option<&SegmentationModel>,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut meta = meta.clone();
    meta.extra.insert("kind".into(), "segmentation".into());
    spec_meta(&mut meta, &model.spec);
    let mut file = TensorFile::new();
    file.push(META_ENTRY, text_tensor(&meta.to_text()));
    put(&mut file, "model", model);
    if let Some(v) = velocity {
        put(&mut file, "velocity", v);
    }
    file.write(path)
}

pub fn load_segmentation(path: &Path, expected_hash: Option<&str>) -> Result<Loaded<SegmentationModel>> {
    let (file, meta, warnings) = read_with_meta(path, expected_hash)?;
    let origin = path.display().to_string();
    let spec = spec_from_meta(&meta, &origin)?;
    let mut model = build_encoder(spec, 0)?;
    fill(&file, "model", &mut model, &origin)?;
    let velocity = if file.get("velocity.conv1.w").is_some() {
        let mut v = model.zeros_like();
        fill(&file, "velocity", &mut v, &origin)?;
        Some(v)
    } else {
        None
    };
    Ok(Loaded {
        model,
        velocity,
        meta,
        warnings,
    })
}

pub fn save_contrast(
    path: &Path,
    pair: &EncoderPair<ContrastNet>,
    velocity: Option<&ContrastNet>,
    spec: &ModelSpec,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut meta = meta.clone();
    meta.extra.insert("kind".into(), "contrast".into());
    meta.extra.insert("momentum_coeff".into(), pair.m.to_string());
    spec_meta(&mut meta, spec);
    let mut file = TensorFile::new();
    file.push(META_ENTRY, text_tensor(&meta.to_text()));
    put(&mut file, "online", &pair.online);
    put(&mut file, "momentum", &pair.momentum);
    if let Some(v) = velocity {
        put(&mut file, "velocity", v);
    }
    file.write(path)
}

/// Returns the pair, its model spec and the rest of the checkpoint.
pub fn load_contrast(path: &Path, expected_hash: Option<&str>) -> Result<(Loaded<EncoderPair<ContrastNet>, ContrastNet>, ModelSpec)> {
    let (file, meta, warnings) = read_with_meta(path, expected_hash)?;
    let origin = path.display().to_string();
    let spec = spec_from_meta(&meta, &origin)?;
    let m: f32 = meta
        .extra
        .get("momentum_coeff")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format {
            path: origin.clone(),
            detail: "metadata lacks momentum_coeff".into(),
        })?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let template = ContrastNet::new(Backbone::init(spec.feature_dim, &mut rng), spec.embed_dim, &mut rng);
    let mut pair = EncoderPair::new(template, m);
    fill(&file, "online", &mut pair.online, &origin)?;
    fill(&file, "momentum", &mut pair.momentum, &origin)?;
    let velocity = if file.get("velocity.conv1.w").is_some() {
        let mut v = pair.online.zeros_like();
        fill(&file, "velocity", &mut v, &origin)?;
        Some(v)
    } else {
        None
    };
    Ok((
        Loaded {
            model: pair,
            velocity,
            meta,
            warnings,
        },
        spec,
    ))
}
