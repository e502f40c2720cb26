//! Deterministic multi-video, multi-shot synthetic scene-segmentation data.
//!
//! Each video is a run of shots. Inside a shot a textured background drifts
//! slowly while class-coloured discs and rectangles translate a little every
//! frame. At a shot cut the background palette jumps, so the grayscale
//! histogram changes sharply, and a fresh set of objects is placed. Labels are
//! the exact rasterised shape masks and the cut positions are kept as ground
//! truth for the shot detector.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{resize, ResizeMode, Tensor, TensorFile};

/// Per-pixel class ids, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::shape(
                "label map",
                format!("{height}x{width} with {} values", data.len()),
            ));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, class: u8) -> Self {
        Self {
            height,
            width,
            data: vec![class; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![1, 1, self.height, self.width],
            self.data.iter().map(|&v| f32::from(v)).collect(),
        )
        .expect("label tensor")
    }

    fn from_plane(height: usize, width: usize, plane: &[f32], origin: &str) -> Result<Self> {
        let data = plane
            .iter()
            .map(|&v| {
                if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                    Ok(v as u8)
                } else {
                    Err(Error::Data(format!("{origin}: non-integer label value {v}")))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        LabelMap::new(height, width, data)
    }

    /// Nearest-neighbour resampling; never introduces ids absent from the input.
    pub fn resize_nearest(&self, height: usize, width: usize) -> LabelMap {
        if height == self.height && width == self.width {
            return self.clone();
        }
        let t = resize(&self.to_tensor(), height, width, ResizeMode::Nearest).expect("label resize");
        LabelMap {
            height,
            width,
            data: t.data().iter().map(|&v| v as u8).collect(),
        }
    }

    /// Square/rect window starting at (top, left).
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> LabelMap {
        let mut data = Vec::with_capacity(height * width);
        for y in top..top + height {
            data.extend_from_slice(&self.data[y * self.width + left..y * self.width + left + width]);
        }
        LabelMap { height, width, data }
    }

    pub fn flip_horizontal(&self) -> LabelMap {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.width) {
            row.reverse();
        }
        out
    }

    pub fn classes(&self) -> BTreeSet<u8> {
        self.data.iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    /// 3×H×W RGB in [0, 1].
    pub image: Tensor,
    pub label: LabelMap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub frames: Vec<Frame>,
    /// Index of the first frame of every shot after the first.
    pub true_shot_boundaries: Vec<usize>,
}

impl Video {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoDataset {
    pub videos: Vec<Video>,
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
}

impl VideoDataset {
    pub fn num_frames(&self) -> usize {
        self.videos.iter().map(Video::len).sum()
    }

    /// Splits off one whole video for evaluation; the remaining videos keep their order.
    pub fn split_holdout(&self, holdout: usize) -> Result<(VideoDataset, VideoDataset)> {
        if holdout >= self.videos.len() || self.videos.len() < 2 {
            return Err(Error::Config(format!(
                "holdout video {holdout} invalid for {} videos",
                self.videos.len()
            )));
        }
        let mut train = self.clone();
        let held = train.videos.remove(holdout);
        let eval = VideoDataset {
            videos: vec![held],
            ..self.clone_header()
        };
        Ok((train, eval))
    }

    fn clone_header(&self) -> VideoDataset {
        VideoDataset {
            videos: Vec::new(),
            num_classes: self.num_classes,
            height: self.height,
            width: self.width,
            seed: self.seed,
        }
    }

    /// Class ids that occur anywhere in the dataset.
    pub fn classes_present(&self) -> BTreeSet<u8> {
        let mut seen = BTreeSet::new();
        for f in self.videos.iter().flat_map(|v| &v.frames) {
            seen.extend(f.label.data().iter().copied());
            if seen.len() == self.num_classes {
                break;
            }
        }
        seen
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_videos: usize,
    pub frames_per_video: usize,
    /// Upper bound; each video gets `shots_per_video - 1` or `shots_per_video` shots.
    pub shots_per_video: usize,
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    pub objects_min: usize,
    pub objects_max: usize,
    pub radius_min: f32,
    pub radius_max: f32,
    /// Probability that an object is a rectangle rather than a disc.
    pub rect_fraction: f32,
    /// Pixels per frame.
    pub motion_speed: f32,
    pub noise_amplitude: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_videos: 6,
            frames_per_video: 60,
            shots_per_video: 3,
            num_classes: 5,
            height: 64,
            width: 64,
            objects_min: 2,
            objects_max: 4,
            radius_min: 6.0,
            radius_max: 11.0,
            rect_fraction: 0.5,
            motion_speed: 0.8,
            noise_amplitude: 0.12,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_videos == 0 || self.frames_per_video == 0 {
            return bad("num_videos and frames_per_video must be >= 1".into());
        }
        if self.shots_per_video == 0 {
            return bad("shots_per_video must be >= 1".into());
        }
        if self.num_classes < 3 || self.num_classes > 255 {
            return bad(format!("num_classes must be in [3, 255], got {}", self.num_classes));
        }
        if self.objects_min == 0 || self.objects_min > self.objects_max {
            return bad(format!("invalid object range [{}, {}]", self.objects_min, self.objects_max));
        }
        if !(self.radius_min > 0.0 && self.radius_min <= self.radius_max) {
            return bad(format!("invalid radius range [{}, {}]", self.radius_min, self.radius_max));
        }
        if !(0.0..=1.0).contains(&self.rect_fraction) || self.noise_amplitude < 0.0 || self.motion_speed < 0.0 {
            return bad("rect_fraction must be in [0,1]; noise and speed non-negative".into());
        }
        let side = self.height.min(self.width) as f32;
        if side < 2.0 * self.radius_max + 2.0 {
            return bad(format!(
                "resolution {}x{} too small for objects of radius {}",
                self.height, self.width, self.radius_max
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    Disc { r: f32 },
    Rect { half_w: f32, half_h: f32 },
}

impl Shape {
    fn bound(&self) -> f32 {
        match *self {
            Shape::Disc { r } => r,
            Shape::Rect { half_w, half_h } => (half_w * half_w + half_h * half_h).sqrt(),
        }
    }

    fn extent(&self) -> (f32, f32) {
        match *self {
            Shape::Disc { r } => (r, r),
            Shape::Rect { half_w, half_h } => (half_w, half_h),
        }
    }

    fn contains(&self, dx: f32, dy: f32) -> bool {
        match *self {
            Shape::Disc { r } => dx * dx + dy * dy <= r * r,
            Shape::Rect { half_w, half_h } => dx.abs() <= half_w && dy.abs() <= half_h,
        }
    }
}

#[derive(Clone, Debug)]
struct Object {
    class: u8,
    shape: Shape,
    color: [f32; 3],
    x: f32,
    y: f32,
    vx: f32,
    vy: f32,
}

#[derive(Clone, Debug)]
struct Background {
    base: [f32; 3],
    accent: [f32; 3],
    fx: f32,
    fy: f32,
    phase: f32,
    drift: f32,
}

/// Fixed per-class hue on the colour wheel; class 0 is background.
fn class_color(class: u8, num_classes: usize) -> [f32; 3] {
    let hue = (class as f32 - 1.0) / (num_classes as f32 - 1.0);
    hsv_to_rgb(hue, 0.7, 0.85)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn luma(c: [f32; 3]) -> f32 {
    (c[0] + c[1] + c[2]) / 3.0
}

/// Places the first frame of every shot after the first.
fn shot_boundaries(frames: usize, shots: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let shots = shots.min(frames);
    if shots <= 1 {
        return Vec::new();
    }
    let base = frames as f32 / shots as f32;
    let jitter = base / 4.0;
    let mut cuts = Vec::with_capacity(shots - 1);
    let mut prev = 0usize;
    for i in 1..shots {
        let ideal = i as f32 * base + rng.random_range(-jitter..=jitter);
        let remaining = shots - i;
        let cut = (ideal.round() as usize).clamp(prev + 1, frames - remaining);
        cuts.push(cut);
        prev = cut;
    }
    cuts
}

fn make_background(prev_luma: Option<f32>, rng: &mut ChaCha8Rng) -> Background {
    let mut level = rng.random_range(0.15..0.85f32);
    if let Some(prev) = prev_luma {
        // force a visible jump in brightness across the cut
        for _ in 0..64 {
            if (level - prev).abs() >= 0.25 {
                break;
            }
            level = rng.random_range(0.15..0.85f32);
        }
        if (level - prev).abs() < 0.25 {
            level = if prev < 0.5 { prev + 0.3 } else { prev - 0.3 };
        }
    }
    let tint: [f32; 3] = std::array::from_fn(|_| rng.random_range(-0.08..0.08f32));
    let base = tint.map(|t| (level + t).clamp(0.0, 1.0));
    let contrast = rng.random_range(0.06..0.16f32) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let accent = base.map(|c| (c + contrast).clamp(0.0, 1.0));
    Background {
        base,
        accent,
        fx: rng.random_range(1..=3) as f32,
        fy: rng.random_range(0..=3) as f32,
        phase: rng.random_range(0.0..std::f32::consts::TAU),
        drift: rng.random_range(0.02..0.08f32),
    }
}

struct ShotScene {
    background: Background,
    objects: Vec<Object>,
}

fn place_objects(
    cfg: &SynthConfig,
    classes: &mut ClassCycle,
    jitter: &[[f32; 3]],
    gain: f32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Object>> {
    let count = rng.random_range(cfg.objects_min..=cfg.objects_max);
    let (w, h) = (cfg.width as f32, cfg.height as f32);
    let mut objects: Vec<Object> = Vec::with_capacity(count);
    for _ in 0..count {
        let class = classes.next(rng);
        let r = if cfg.radius_min == cfg.radius_max {
            cfg.radius_min
        } else {
            rng.random_range(cfg.radius_min..=cfg.radius_max)
        };
        let shape = if rng.random::<f32>() < cfg.rect_fraction {
            Shape::Rect {
                half_w: r * rng.random_range(0.7..1.0f32),
                half_h: r * rng.random_range(0.7..1.0f32),
            }
        } else {
            Shape::Disc { r }
        };
        let (ex, ey) = shape.extent();
        let mut placed = None;
        for _ in 0..2000 {
            let x = rng.random_range(ex..=w - ex);
            let y = rng.random_range(ey..=h - ey);
            let clear = objects
                .iter()
                .all(|o| ((o.x - x).powi(2) + (o.y - y).powi(2)).sqrt() > o.shape.bound() + shape.bound() + 1.0);
            if clear {
                placed = Some((x, y));
                break;
            }
        }
        let (x, y) = placed.ok_or_else(|| {
            Error::Config(format!(
                "resolution {}x{} too small to place {count} objects of radius up to {}",
                cfg.height, cfg.width, cfg.radius_max
            ))
        })?;
        let angle = rng.random_range(0.0..std::f32::consts::TAU);
        let base = class_color(class, cfg.num_classes);
        let j = jitter[class as usize];
        let color = std::array::from_fn(|c| ((base[c] + j[c]) * gain).clamp(0.0, 1.0));
        objects.push(Object {
            class,
            shape,
            color,
            x,
            y,
            vx: angle.cos() * cfg.motion_speed,
            vy: angle.sin() * cfg.motion_speed,
        });
    }
    Ok(objects)
}

/// Cycles through a shuffled list of foreground classes so every class is used.
struct ClassCycle {
    order: Vec<u8>,
    next: usize,
}

impl ClassCycle {
    fn new(num_classes: usize) -> Self {
        Self {
            order: (1..num_classes as u8).collect(),
            next: usize::MAX,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> u8 {
        if self.next >= self.order.len() {
            rand::seq::SliceRandom::shuffle(self.order.as_mut_slice(), rng);
            self.next = 0;
        }
        let c = self.order[self.next];
        self.next += 1;
        c
    }
}

fn step_objects(objects: &mut [Object], width: f32, height: f32) {
    for i in 0..objects.len() {
        let (ex, ey) = objects[i].shape.extent();
        let mut nx = objects[i].x + objects[i].vx;
        let mut ny = objects[i].y + objects[i].vy;
        if nx - ex < 0.0 || nx + ex > width {
            objects[i].vx = -objects[i].vx;
            nx = objects[i].x;
        }
        if ny - ey < 0.0 || ny + ey > height {
            objects[i].vy = -objects[i].vy;
            ny = objects[i].y;
        }
        let bound = objects[i].shape.bound();
        let collides = objects.iter().enumerate().any(|(j, o)| {
            j != i && ((o.x - nx).powi(2) + (o.y - ny).powi(2)).sqrt() <= o.shape.bound() + bound + 1.0
        });
        if collides {
            objects[i].vx = -objects[i].vx;
            objects[i].vy = -objects[i].vy;
        } else {
            objects[i].x = nx;
            objects[i].y = ny;
        }
    }
}

fn render(cfg: &SynthConfig, scene: &ShotScene, t_in_shot: usize, rng: &mut ChaCha8Rng) -> Frame {
    let (h, w) = (cfg.height, cfg.width);
    let bg = &scene.background;
    let mut image = vec![0.0f32; 3 * h * w];
    let mut label = vec![0u8; h * w];
    let phase = bg.phase + bg.drift * t_in_shot as f32;
    for y in 0..h {
        for x in 0..w {
            let arg = std::f32::consts::TAU * (bg.fx * x as f32 / w as f32 + bg.fy * y as f32 / h as f32) + phase;
            let mix = 0.5 + 0.5 * arg.sin();
            let mut rgb: [f32; 3] = std::array::from_fn(|c| bg.base[c] * (1.0 - mix) + bg.accent[c] * mix);
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            for o in &scene.objects {
                if o.shape.contains(px - o.x, py - o.y) {
                    rgb = o.color;
                    label[y * w + x] = o.class;
                }
            }
            for (c, v) in rgb.iter().enumerate() {
                let noise = if cfg.noise_amplitude > 0.0 {
                    rng.random_range(-cfg.noise_amplitude..=cfg.noise_amplitude)
                } else {
                    0.0
                };
                image[c * h * w + y * w + x] = (v + noise).clamp(0.0, 1.0);
            }
        }
    }
    Frame {
        image: Tensor::new(vec![3, h, w], image).expect("frame shape"),
        label: LabelMap::new(h, w, label).expect("label shape"),
    }
}

fn generate_video(cfg: &SynthConfig, index: usize) -> Result<Video> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);
    let shots = if cfg.shots_per_video >= 2 {
        rng.random_range(cfg.shots_per_video - 1..=cfg.shots_per_video)
    } else {
        1
    };
    let boundaries = shot_boundaries(cfg.frames_per_video, shots, &mut rng);
    let gain = rng.random_range(0.8..1.2f32);
    let mut classes = ClassCycle::new(cfg.num_classes);

    let mut frames = Vec::with_capacity(cfg.frames_per_video);
    let mut starts = vec![0usize];
    starts.extend(&boundaries);
    let mut prev_luma = None;
    for (s, &start) in starts.iter().enumerate() {
        let end = starts.get(s + 1).copied().unwrap_or(cfg.frames_per_video);
        let background = make_background(prev_luma, &mut rng);
        prev_luma = Some(luma(background.base));
        let jitter: Vec<[f32; 3]> = (0..cfg.num_classes)
            .map(|_| std::array::from_fn(|_| rng.random_range(-0.06..0.06f32)))
            .collect();
        let objects = place_objects(cfg, &mut classes, &jitter, gain, &mut rng)?;
        let mut scene = ShotScene { background, objects };
        for t in 0..end - start {
            if t > 0 {
                step_objects(&mut scene.objects, cfg.width as f32, cfg.height as f32);
            }
            frames.push(render(cfg, &scene, t, &mut rng));
        }
    }
    Ok(Video {
        frames,
        true_shot_boundaries: boundaries,
    })
}

/// Generates a dataset; identical configs give bit-identical output.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<VideoDataset> {
    cfg.validate()?;
    let videos = (0..cfg.num_videos)
        .map(|v| generate_video(cfg, v))
        .collect::<Result<Vec<_>>>()?;
    let ds = VideoDataset {
        videos,
        num_classes: cfg.num_classes,
        height: cfg.height,
        width: cfg.width,
        seed: cfg.seed,
    };
    let present = ds.classes_present();
    if present.len() != cfg.num_classes {
        return Err(Error::Config(format!(
            "generated dataset covers only classes {present:?} of {}; raise objects or videos",
            cfg.num_classes
        )));
    }
    Ok(ds)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    num_videos: usize,
    frames_per_video: Vec<usize>,
    height: usize,
    width: usize,
    num_classes: usize,
    class_names: Vec<String>,
    seed: u64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn video_file_name(index: usize) -> String {
    format!("video_{index:03}.pgvt")
}

pub fn class_names(num_classes: usize) -> Vec<String> {
    (0..num_classes)
        .map(|c| if c == 0 { "background".to_string() } else { format!("class_{c}") })
        .collect()
}

pub fn write_dataset(ds: &VideoDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format: "pgvcl-dataset".into(),
        version: 1,
        num_videos: ds.videos.len(),
        frames_per_video: ds.videos.iter().map(Video::len).collect(),
        height: ds.height,
        width: ds.width,
        num_classes: ds.num_classes,
        class_names: class_names(ds.num_classes),
        seed: ds.seed,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;

    for (i, video) in ds.videos.iter().enumerate() {
        let images: Vec<&Tensor> = video.frames.iter().map(|f| &f.image).collect();
        let labels: Vec<f32> = video
            .frames
            .iter()
            .flat_map(|f| f.label.data().iter().map(|&v| f32::from(v)))
            .collect();
        let mut file = TensorFile::new();
        file.push("images", Tensor::stack(&images)?);
        file.push("labels", Tensor::new(vec![video.len(), ds.height, ds.width], labels)?);
        if !video.true_shot_boundaries.is_empty() {
            let b = video.true_shot_boundaries.iter().map(|&v| v as f32).collect();
            file.push("boundaries", Tensor::new(vec![video.true_shot_boundaries.len()], b)?);
        }
        file.write(&dir.join(video_file_name(i)))?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<VideoDataset> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    if manifest.frames_per_video.len() != manifest.num_videos {
        return Err(Error::Integrity(format!(
            "{}: num_videos {} but {} frame counts",
            path.display(),
            manifest.num_videos,
            manifest.frames_per_video.len()
        )));
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut present = 0usize;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("video_") && name.ends_with(".pgvt") {
            present += 1;
        }
    }
    if present != manifest.num_videos {
        return Err(Error::Integrity(format!(
            "{}: manifest lists {} videos but {present} video files are present",
            dir.display(),
            manifest.num_videos
        )));
    }

    let (h, w) = (manifest.height, manifest.width);
    let mut videos = Vec::with_capacity(manifest.num_videos);
    for (i, &frames) in manifest.frames_per_video.iter().enumerate() {
        let vpath = dir.join(video_file_name(i));
        let origin = vpath.display().to_string();
        let file = TensorFile::read(&vpath)?;
        let images = file.require("images", &origin)?;
        let labels = file.require("labels", &origin)?;
        if images.shape() != [frames, 3, h, w] || labels.shape() != [frames, h, w] {
            return Err(Error::Integrity(format!(
                "{origin}: images {:?} / labels {:?} disagree with manifest ({frames} frames of {h}x{w})",
                images.shape(),
                labels.shape()
            )));
        }
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let label = LabelMap::from_plane(h, w, &labels.data()[t * h * w..(t + 1) * h * w], &origin)?;
            if let Some(&bad) = label.data().iter().find(|&&v| v as usize >= manifest.num_classes) {
                return Err(Error::Data(format!("{origin}: label {bad} >= {} classes", manifest.num_classes)));
            }
            out.push(Frame {
                image: images.item(t)?,
                label,
            });
        }
        let true_shot_boundaries = file
            .get("boundaries")
            .map(|b| b.data().iter().map(|&v| v as usize).collect())
            .unwrap_or_default();
        videos.push(Video {
            frames: out,
            true_shot_boundaries,
        });
    }
    Ok(VideoDataset {
        videos,
        num_classes: manifest.num_classes,
        height: h,
        width: w,
        seed: manifest.seed,
    })
}
