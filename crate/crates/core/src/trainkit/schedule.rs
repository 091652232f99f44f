//! Warmup/decay learning-rate schedule with staged divide-by-ten drops.
//!
//! Base rate at global step n (1-based):
//!   LR(n) = (lambda / sqrt(d_h)) * min(n / n_warmup^1.5, 1 / sqrt(n))
//! which rises linearly to the crossover at n = n_warmup, then decays as
//! inverse square root. Stage s multiplies by 10^-s; in `Freeze` mode the
//! base formula is held at the step where the stage began instead of
//! continuing to decay.

use crate::error::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageDecay {
    /// The inverse-sqrt decay keeps evolving under the 10^-stage multiplier.
    #[default]
    Continue,
    /// The base rate freezes at its stage-entry value.
    Freeze,
}

impl StageDecay {
    pub fn name(&self) -> &'static str {
        match self {
            StageDecay::Continue => "continue",
            StageDecay::Freeze => "freeze",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "continue" => Some(StageDecay::Continue),
            "freeze" => Some(StageDecay::Freeze),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LrSchedule {
    pub lambda: f64,
    pub d_h: usize,
    pub n_warmup: usize,
    pub decay: StageDecay,
}

impl LrSchedule {
    /// The unstaged formula at step n >= 1.
    pub fn base(&self, n: usize) -> Result<f64, TrainError> {
        if n == 0 {
            return Err(TrainError::ZeroStep);
        }
        let n = n as f64;
        let warm = self.n_warmup as f64;
        let rate = (self.lambda / (self.d_h as f64).sqrt())
            * (n / warm.powf(1.5)).min(1.0 / n.sqrt());
        Ok(rate)
    }

    /// Staged rate. `stage_start` is the global step at which the current
    /// stage began (only consulted in `Freeze` mode for stage >= 1).
    pub fn at(&self, n: usize, stage: usize, stage_start: usize) -> Result<f64, TrainError> {
        let anchor = match (self.decay, stage) {
            (StageDecay::Freeze, s) if s >= 1 => stage_start,
            _ => n,
        };
        Ok(self.base(anchor)? * 10f64.powi(-(stage as i32)))
    }
}

/// Stage for a 0-based epoch: stage 0 until `stage_switch_epoch`, then one
/// stage per `stage_length_epochs`, capped at `n_stages`.
pub fn stage_for_epoch(
    epoch: usize,
    stage_switch_epoch: usize,
    stage_length_epochs: usize,
    n_stages: usize,
) -> usize {
    if epoch < stage_switch_epoch || n_stages == 0 {
        return 0;
    }
    if stage_length_epochs == 0 {
        return n_stages;
    }
    (1 + (epoch - stage_switch_epoch) / stage_length_epochs).min(n_stages)
}

/// Epochs a full run takes: the stage-0 span plus every decayed stage.
pub fn total_epochs(stage_switch_epoch: usize, stage_length_epochs: usize, n_stages: usize) -> usize {
    stage_switch_epoch + n_stages * stage_length_epochs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_schedule() -> LrSchedule {
        LrSchedule {
            lambda: 400.0,
            d_h: 512,
            n_warmup: 8000,
            decay: StageDecay::Continue,
        }
    }

    #[test]
    fn continuous_at_warmup_crossover() {
        let s = paper_schedule();
        let left = s.base(8000).unwrap();
        // both branches algebraically equal lambda/sqrt(d_h)/sqrt(n_warmup)
        let expected = 400.0 / 512f64.sqrt() / 8000f64.sqrt();
        assert!((left - expected).abs() <= 1e-12);
        let just_before = s.base(7999).unwrap();
        let just_after = s.base(8001).unwrap();
        assert!(just_before < left && just_after < left);
        assert!((just_before - left).abs() < 1e-4);
        assert!((just_after - left).abs() < 1e-4);
    }

    #[test]
    fn value_at_warmup_step() {
        let s = paper_schedule();
        let v = s.base(8000).unwrap();
        assert!((v - 0.19764235376052366).abs() <= 1e-12);
        assert!((v - 0.19765).abs() < 1e-5);
    }

    #[test]
    fn value_at_step_one() {
        let s = paper_schedule();
        let v = s.base(1).unwrap();
        let expected = (400.0 / 512f64.sqrt()) * (1.0 / 8000f64.powf(1.5));
        assert!((v - expected).abs() <= 1e-18);
        assert!((v - 2.47e-5).abs() < 1e-7);
    }

    #[test]
    fn step_zero_is_an_error() {
        assert!(matches!(paper_schedule().base(0), Err(TrainError::ZeroStep)));
    }

    #[test]
    fn strictly_decreasing_after_warmup() {
        let s = paper_schedule();
        let mut prev = s.base(8000).unwrap();
        for n in (8001..9000).step_by(7) {
            let v = s.base(n).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn stages_divide_by_ten() {
        let s = paper_schedule();
        let n = 20000;
        let base = s.at(n, 0, 1).unwrap();
        assert!((s.at(n, 1, n).unwrap() - base / 10.0).abs() < 1e-15);
        assert!((s.at(n, 2, n).unwrap() - base / 100.0).abs() < 1e-15);
    }

    #[test]
    fn freeze_holds_stage_entry_value() {
        let mut s = paper_schedule();
        s.decay = StageDecay::Freeze;
        let entry = 16000;
        let a = s.at(entry, 1, entry).unwrap();
        let b = s.at(entry + 500, 1, entry).unwrap();
        assert_eq!(a, b);
        // stage 0 still decays
        assert!(s.at(9000, 0, 1).unwrap() > s.at(9500, 0, 1).unwrap());
    }

    #[test]
    fn stage_boundaries_land_on_configured_epochs() {
        // switch at 40, stages of 20: epochs 0..39 -> 0, 40..59 -> 1, 60.. -> 2
        assert_eq!(stage_for_epoch(0, 40, 20, 2), 0);
        assert_eq!(stage_for_epoch(39, 40, 20, 2), 0);
        assert_eq!(stage_for_epoch(40, 40, 20, 2), 1);
        assert_eq!(stage_for_epoch(59, 40, 20, 2), 1);
        assert_eq!(stage_for_epoch(60, 40, 20, 2), 2);
        assert_eq!(stage_for_epoch(79, 40, 20, 2), 2);
        assert_eq!(total_epochs(40, 20, 2), 80);
    }
}
