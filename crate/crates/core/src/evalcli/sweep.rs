use std::fmt;
use std::io::Write;

use super::metrics::MetricsReport;
use crate::error::{Error, Result};
use crate::pipeline::{continue_pipeline, prepare, run_pretrain, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    PairCounts,
    CropSize,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pair_counts" => Ok(Self::PairCounts),
            "crop_size" => Ok(Self::CropSize),
            _ => Err(Error::Config(format!("unknown sweep axis '{s}' (pair_counts | crop_size)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PairCounts => "pair_counts",
            Self::CropSize => "crop_size",
        }
    }

    pub fn default_grid(self) -> Vec<GridPoint> {
        match self {
            Self::PairCounts => [(0, 0), (1, 2), (1, 3), (1, 4), (2, 4), (0, 4)]
                .into_iter()
                .map(|(p, n)| GridPoint::Pairs { adjacent: p, other_video: n })
                .collect(),
            Self::CropSize => [(0.1, 0.3), (0.3, 0.5), (0.3, 0.7), (0.5, 0.9), (0.7, 1.0)]
                .into_iter()
                .map(|(min, max)| GridPoint::Crop { min, max })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridPoint {
    /// `P{adjacent}N{other_video}`: same-shot keys and other-video keys.
    Pairs { adjacent: usize, other_video: usize },
    Crop { min: f32, max: f32 },
}

impl GridPoint {
    pub fn axis(&self) -> SweepAxis {
        match self {
            Self::Pairs { .. } => SweepAxis::PairCounts,
            Self::Crop { .. } => SweepAxis::CropSize,
        }
    }

    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut exp = base.clone();
        match *self {
            Self::Pairs { adjacent, other_video } => {
                exp.run.n_adjacent = adjacent;
                exp.run.n_other_video = other_video;
            }
            Self::Crop { min, max } => {
                exp.run.crop_min = min;
                exp.run.crop_max = max;
            }
        }
        exp
    }

    /// `P1N4` or `0.3-0.7`.
    pub fn parse(axis: SweepAxis, s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad {} grid point '{s}'", axis.name()));
        match axis {
            SweepAxis::PairCounts => {
                let rest = s.strip_prefix('P').ok_or_else(bad)?;
                let (p, n) = rest.split_once('N').ok_or_else(bad)?;
                Ok(Self::Pairs {
                    adjacent: p.parse().map_err(|_| bad())?,
                    other_video: n.parse().map_err(|_| bad())?,
                })
            }
            SweepAxis::CropSize => {
                let (a, b) = s.split_once('-').ok_or_else(bad)?;
                let (min, max) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if !(min > 0.0 && min <= max && max <= 1.0) {
                    return Err(bad());
                }
                Ok(Self::Crop { min, max })
            }
        }
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pairs { adjacent, other_video } => write!(f, "P{adjacent}N{other_video}"),
            Self::Crop { min, max } => write!(f, "{min}-{max}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub point: GridPoint,
    pub seed: u64,
    pub result: std::result::Result<MetricsReport, String>,
}

impl SweepRow {
    pub fn to_line(&self) -> String {
        let head = format!("axis={} point={} seed={}", self.point.axis().name(), self.point, self.seed);
        match &self.result {
            Ok(r) => format!("{head} status=ok miou={:.6} pa={:.6} pac={:.6} pixels={}", r.miou, r.pa, r.pac, r.pixels),
            Err(e) => format!("{head} status=error error={}", e.replace(char::is_whitespace, "_")),
        }
    }
}

/// Runs the three stages once per grid point, all with `base`'s seed.
/// Pretraining depends on no swept setting, so it runs once and is shared.
/// A failing point is recorded and the sweep moves on; each row is written
/// to `sink` as soon as it is known.
pub fn run_sweep(base: &ExperimentConfig, grid: &[GridPoint], sink: &mut dyn Write) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let prep = prepare(base)?;
    let (pretrained, outcome) = run_pretrain(base, &prep)?;
    let mut rows = Vec::with_capacity(grid.len());
    for point in grid {
        let exp = point.apply(base);
        let result = exp
            .validate()
            .and_then(|_| continue_pipeline(&exp, &prep, pretrained.clone(), outcome.clone(), true))
            .map(|r| r.report)
            .map_err(|e| format!("{}:{e}", e.kind()));
        let row = SweepRow {
            point: *point,
            seed: base.run.seed,
            result,
        };
        writeln!(sink, "{}", row.to_line()).map_err(|e| Error::io("<sweep output>", e))?;
        sink.flush().map_err(|e| Error::io("<sweep output>", e))?;
        rows.push(row);
    }
    Ok(rows)
}
