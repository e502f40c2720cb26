use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScheduleKind {
    Poly { power: f32 },
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub base_lr: f32,
    pub total_steps: usize,
}

impl Schedule {
    pub fn poly(base_lr: f32, total_steps: usize, power: f32) -> Self {
        Self {
            kind: ScheduleKind::Poly { power },
            base_lr,
            total_steps,
        }
    }

    pub fn cosine(base_lr: f32, total_steps: usize) -> Self {
        Self {
            kind: ScheduleKind::Cosine,
            base_lr,
            total_steps,
        }
    }

    /// Learning rate before update `step`; clamps past the end.
    pub fn lr(&self, step: usize) -> f32 {
        if self.total_steps == 0 {
            return self.base_lr;
        }
        let frac = step.min(self.total_steps) as f64 / self.total_steps as f64;
        let base = self.base_lr as f64;
        let lr = match self.kind {
            ScheduleKind::Poly { power } => base * (1.0 - frac).powf(power as f64),
            ScheduleKind::Cosine => base * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()),
        };
        lr.max(0.0) as f32
    }
}

/// Linear ramp `(step + 1) / warmup_steps`, capped at 1; multiplies a schedule.
pub fn warmup_factor(step: usize, warmup_steps: usize) -> f32 {
    if warmup_steps == 0 {
        return 1.0;
    }
    ((step + 1) as f64 / warmup_steps as f64).min(1.0) as f32
}
