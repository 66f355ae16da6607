use serde::{Deserialize, Serialize};

use super::network::EncoderParams;
use crate::error::{Error, Result};

/// Optimiser and learning-rate schedule settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub optimizer_momentum: f64,
    /// Scale the peak rate by `batch_size / 256`.
    pub linear_scaling: bool,
    /// Peak rate of the online linear classifier; it follows the same
    /// warmup/cosine shape as the backbone.
    pub probe_lr: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.03,
            warmup_epochs: 10,
            total_epochs: 30,
            batch_size: 128,
            weight_decay: 5e-4,
            optimizer_momentum: 0.9,
            linear_scaling: true,
            probe_lr: 0.1,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_epochs > self.total_epochs {
            return Err(Error::InvalidConfig("warmup longer than training".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall(self.batch_size));
        }
        for (name, v) in [
            ("base_lr", self.base_lr),
            ("weight_decay", self.weight_decay),
            ("optimizer_momentum", self.optimizer_momentum),
            ("probe_lr", self.probe_lr),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }

    pub fn peak_lr(&self) -> f64 {
        if self.linear_scaling {
            self.base_lr * self.batch_size as f64 / 256.0
        } else {
            self.base_lr
        }
    }
}

/// Fraction of the peak rate at `step`: a linear ramp over the warmup steps,
/// then a half cosine reaching zero at the last step.
pub fn lr_factor(step: u64, schedule: &ScheduleConfig, steps_per_epoch: usize) -> f64 {
    let warmup = (schedule.warmup_epochs * steps_per_epoch) as f64;
    let total = (schedule.total_epochs * steps_per_epoch) as f64;
    let s = step as f64;
    if s < warmup {
        return s / warmup;
    }
    if total <= warmup {
        return 1.0;
    }
    let progress = ((s - warmup) / (total - warmup)).min(1.0);
    0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

pub fn lr_at(step: u64, schedule: &ScheduleConfig, steps_per_epoch: usize) -> f64 {
    schedule.peak_lr() * lr_factor(step, schedule, steps_per_epoch)
}

/// `v = mu v + g + wd p; p -= lr v`
pub fn sgd_step(params: &mut EncoderParams, grads: &EncoderParams, velocity: &mut EncoderParams, lr: f64, schedule: &ScheduleConfig) {
    let mu = schedule.optimizer_momentum;
    let wd = schedule.weight_decay;
    for ((p, g), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(velocity.tensors_mut())
    {
        for ((pi, gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = mu * *vi + gi + wd * *pi;
            *pi -= lr * *vi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> ScheduleConfig {
        ScheduleConfig {
            warmup_epochs: 2,
            total_epochs: 10,
            ..Default::default()
        }
    }

    #[test]
    fn warmup_end_is_peak() {
        let s = sched();
        assert_eq!(lr_at(20, &s, 10), s.peak_lr());
        assert_eq!(lr_at(0, &s, 10), 0.0);
        assert!((lr_at(10, &s, 10) - s.peak_lr() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn final_step_is_zero_and_midpoint_half() {
        let s = sched();
        assert!(lr_at(100, &s, 10).abs() < 1e-15);
        assert!((lr_at(60, &s, 10) - s.peak_lr() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn linear_scaling() {
        let s = ScheduleConfig { batch_size: 512, ..sched() };
        assert!((s.peak_lr() - 0.06).abs() < 1e-15);
        let s = ScheduleConfig { linear_scaling: false, ..s };
        assert_eq!(s.peak_lr(), 0.03);
    }

    #[test]
    fn monotone_after_warmup() {
        let s = sched();
        let lrs: Vec<f64> = (20..=100).map(|t| lr_at(t, &s, 10)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(ScheduleConfig { warmup_epochs: 11, ..sched() }.validate().is_err());
        assert!(ScheduleConfig { batch_size: 1, ..sched() }.validate().is_err());
        assert!(ScheduleConfig { base_lr: -1.0, ..sched() }.validate().is_err());
    }
}
