//! The acceptance gate: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=5,6` runs a subset.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{grad, invariants, oracles, GRAD_TOL};
use pgvcl::contrast::{detect_shots, DEFAULT_BINS, DEFAULT_THRESHOLD};
use pgvcl::evalcli::{GridPoint, MetricsReport};
use pgvcl::numerics::Tensor;
use pgvcl::pipeline::*;
use pgvcl::synthdata::{generate_dataset, read_dataset, write_dataset, SynthConfig, VideoDataset};

const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn gradients() -> Verdict {
    let start = Instant::now();
    let cases: [(&str, fn(u64) -> Option<f64>); 5] = [
        ("conv2d", grad::conv),
        ("relu", grad::relu_case),
        ("cross_entropy", grad::cross_entropy),
        ("ohem", grad::ohem),
        ("contrastive_chain", grad::contrastive),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, case) in cases {
        let errs = grad::run(case, 24);
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        pass &= worst < GRAD_TOL;
        parts.push(format!("{name}={worst:.2e}/{}", errs.len()));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    verdict(pass, format!("worst relative error {} in {elapsed:.1?}", parts.join(" ")))
}

fn equation_oracles() -> Verdict {
    let checks = oracles::checks();
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !((c.got - c.want).abs() <= oracles::TOL))
        .map(|c| format!("{} got {} want {}", c.name, c.got, c.want))
        .collect();
    if bad.is_empty() {
        verdict(true, format!("{} fixtures within {:.0e}", checks.len(), oracles::TOL))
    } else {
        verdict(false, bad.join("; "))
    }
}

fn contrast_invariants() -> Verdict {
    let mut failures = Vec::new();
    for (name, check) in invariants::ALL {
        for seed in 0..128 {
            if let Err(e) = check(seed) {
                failures.push(format!("{name}: {e}"));
                break;
            }
        }
    }
    if failures.is_empty() {
        verdict(true, format!("{} properties x 128 random instances", invariants::ALL.len()))
    } else {
        verdict(false, failures.join("; "))
    }
}

fn shot_detection() -> Verdict {
    let (mut exact, mut total) = (0, 0);
    for seed in 0..20 {
        let ds = generate_dataset(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })
        .expect("default dataset");
        for v in &ds.videos {
            total += 1;
            if detect_shots(v, DEFAULT_BINS, DEFAULT_THRESHOLD) == v.true_shot_boundaries {
                exact += 1;
            }
        }
    }
    let rate = exact as f64 / total as f64;
    verdict(rate >= 0.95, format!("{exact}/{total} videos exact ({:.1}%)", 100.0 * rate))
}

struct SeedRun {
    pretrained: MetricsReport,
    baseline: MetricsReport,
    full: MetricsReport,
    p0n0: MetricsReport,
}

fn seed_runs() -> (Vec<SeedRun>, Duration) {
    let start = Instant::now();
    let mut runs = Vec::new();
    for seed in SEEDS {
        let exp = ExperimentConfig::default().with_seed(seed);
        let prep = prepare(&exp).expect("prepare");
        let (pre, outcome) = run_pretrain(&exp, &prep).expect("pretrain");
        let baseline = continue_pipeline(&exp, &prep, pre.clone(), outcome.clone(), false).expect("baseline");
        let full = continue_pipeline(&exp, &prep, pre.clone(), outcome.clone(), true).expect("full");
        let p0n0_exp = GridPoint::Pairs {
            adjacent: 0,
            other_video: 0,
        }
        .apply(&exp);
        let p0n0 = continue_pipeline(&p0n0_exp, &prep, pre, outcome, true).expect("P0N0");
        let losses = &full.contrast.as_ref().expect("contrast ran").outcome.log.step_losses;
        let tenth = (losses.len() / 10).max(1);
        let mean = |v: &[f32]| v.iter().sum::<f32>() / v.len() as f32;
        println!(
            "info seed={seed} pretrained={:.4} baseline={:.4} full={:.4} p0n0={:.4} contrast_loss first10%={:.3} last10%={:.3}",
            baseline.pretrained_report.miou,
            baseline.report.miou,
            full.report.miou,
            p0n0.report.miou,
            mean(&losses[..tenth]),
            mean(&losses[losses.len() - tenth..])
        );
        runs.push(SeedRun {
            pretrained: baseline.pretrained_report,
            baseline: baseline.report,
            full: full.report,
            p0n0: p0n0.report,
        });
    }
    (runs, start.elapsed())
}

fn semi_supervised_gain(runs: &[SeedRun], elapsed: Duration) -> Verdict {
    let base = median(runs.iter().map(|r| r.baseline.miou).collect());
    let full = median(runs.iter().map(|r| r.full.miou).collect());
    let gain = 100.0 * (full - base);
    let pre = median(runs.iter().map(|r| r.pretrained.miou).collect());
    verdict(
        gain >= 1.0 && elapsed < Duration::from_secs(45 * 60),
        format!(
            "median mIoU full {:.2} vs baseline {:.2}: {gain:+.2} points (pretrained {:.2}); all runs {elapsed:.0?}",
            100.0 * full,
            100.0 * base,
            100.0 * pre
        ),
    )
}

fn pair_ablation(runs: &[SeedRun]) -> Verdict {
    let p1n4 = median(runs.iter().map(|r| r.full.miou).collect());
    let p0n0 = median(runs.iter().map(|r| r.p0n0.miou).collect());
    verdict(p1n4 >= p0n0, format!("median mIoU P1N4 {:.2} vs P0N0 {:.2}", 100.0 * p1n4, 100.0 * p0n0))
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("read run dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).expect("read artifact")));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_pgvcl"))
            .args(["run-all", "--seed", "7", "--out", out.to_str().unwrap()])
            .output()
            .expect("spawn pgvcl");
        if !status.status.success() {
            return verdict(false, format!("run-all failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        trees.push(tree(&out));
    }
    let checked: Vec<&String> = trees[0]
        .iter()
        .map(|(n, _)| n)
        .filter(|n| n.ends_with(".pgvt") || n.ends_with(".csv"))
        .collect();
    let differing: Vec<&String> = trees[0]
        .iter()
        .zip(&trees[1])
        .filter(|((na, a), (nb, b))| na != nb || a != b)
        .map(|((na, _), _)| na)
        .collect();
    let pass = trees[0].len() == trees[1].len() && differing.is_empty() && checked.len() >= 8;
    verdict(
        pass,
        format!(
            "run-all --seed 7 twice: {} files, {} checkpoints/metrics, {} differ",
            trees[0].len(),
            checked.len(),
            differing.len()
        ),
    )
}

fn bits(ts: &[&Tensor]) -> Vec<u32> {
    ts.iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
}

fn dataset_bits(ds: &VideoDataset) -> Vec<u32> {
    ds.videos
        .iter()
        .flat_map(|v| &v.frames)
        .flat_map(|f| f.image.data().iter().map(|v| v.to_bits()).chain(f.label.data().iter().map(|&l| l as u32)))
        .collect()
}

fn round_trips() -> Verdict {
    use pgvcl::contrast::Parameters;
    let dir = tempfile::tempdir().expect("tempdir");
    let exp = ExperimentConfig::default();
    let ds = generate_dataset(&exp.data).expect("dataset");
    write_dataset(&ds, &dir.path().join("data")).expect("write dataset");
    let back = read_dataset(&dir.path().join("data")).expect("read dataset");
    let data_ok = back == ds && dataset_bits(&back) == dataset_bits(&ds);

    let prep = prepare_from(&ds, &exp).expect("prepare");
    let mut short = exp.clone();
    short.run.pretrain_epochs = 1;
    short.run.contrast_epochs = 1;
    let (model, outcome) = run_pretrain(&short, &prep).expect("pretrain");
    let seg_path = dir.path().join("seg.pgvt");
    save_segmentation(&seg_path, &model, Some(&outcome.velocity), &CheckpointMeta::new("pretrain", outcome.steps, &short.hash()))
        .expect("save");
    let loaded = load_segmentation(&seg_path, Some(&short.hash())).expect("load");
    let seg_ok = bits(&loaded.model.params()) == bits(&model.params())
        && loaded.velocity.as_ref().map(|v| bits(&v.params())) == Some(bits(&outcome.velocity.params()))
        && loaded.warnings.is_empty();

    let pseudo = pgvcl::sampling::generate_pseudo_labels(&model, &prep.split, &prep.train).expect("pseudo");
    let shots = detect_all_shots(&prep.train, &short);
    let (pair, c_out) = run_contrast(&short, &prep, &model.backbone, &pseudo, &shots).expect("contrast");
    let c_path = dir.path().join("contrast.pgvt");
    let spec = model_spec(&short, &prep.train);
    save_contrast(&c_path, &pair, Some(&c_out.velocity), &spec, &CheckpointMeta::new("contrast", c_out.steps, &short.hash()))
        .expect("save contrast");
    let (c_loaded, c_spec) = load_contrast(&c_path, Some(&short.hash())).expect("load contrast");
    let contrast_ok = c_spec == spec
        && bits(&c_loaded.model.online.params()) == bits(&pair.online.params())
        && bits(&c_loaded.model.momentum.params()) == bits(&pair.momentum.params())
        && c_loaded.velocity.as_ref().map(|v| bits(&v.params())) == Some(bits(&c_out.velocity.params()));

    verdict(
        data_ok && seg_ok && contrast_ok,
        format!("dataset {data_ok}, segmentation checkpoint {seg_ok}, contrast checkpoint {contrast_ok}"),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut failed = 0;
    let mut report = |n: usize, name: &str, v: Verdict| {
        println!("{} {n} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    };
    if wanted(1) {
        report(1, "gradient correctness", gradients());
    }
    if wanted(2) {
        report(2, "equation oracles", equation_oracles());
    }
    if wanted(3) {
        report(3, "mask/similarity invariants", contrast_invariants());
    }
    if wanted(4) {
        report(4, "shot detection", shot_detection());
    }
    if wanted(5) || wanted(6) {
        let (runs, elapsed) = seed_runs();
        if wanted(5) {
            report(5, "semi-supervised gain", semi_supervised_gain(&runs, elapsed));
        }
        if wanted(6) {
            report(6, "pair-count ablation", pair_ablation(&runs));
        }
    }
    if wanted(7) {
        report(7, "determinism", determinism());
    }
    if wanted(8) {
        report(8, "round trips", round_trips());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
