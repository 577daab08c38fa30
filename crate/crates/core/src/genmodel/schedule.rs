//! Noise level schedule for the diffusion process.

use crate::error::{Error, Result};

/// Cumulative signal levels ᾱ_0..ᾱ_T for a T-step diffusion: ᾱ_0 = 1,
/// strictly decreasing, with a nearly destroyed signal at t = T.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

/// Largest admissible per-step variance. Clipping the per-step beta here
/// keeps √ᾱ_T representable instead of collapsing to ~1e-33 at T = 1000, so
/// a single reverse step can still recover the signal in f64.
const BETA_MAX: f64 = 0.999;

/// Required signal destruction at the final step (with a hair of float
/// slack: T = 1 lands exactly on 1 - BETA_MAX).
const TAIL_MAX: f64 = 1e-3 * (1.0 + 1e-9);

impl NoiseSchedule {
    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 2 {
            return Err(Error::InvalidParam("schedule needs at least one step".into()));
        }
        if alpha_bar[0] != 1.0 {
            return Err(Error::InvalidParam(format!(
                "schedule must start at 1, got {}",
                alpha_bar[0]
            )));
        }
        for pair in alpha_bar.windows(2) {
            if !(pair[1] > 0.0 && pair[1] < pair[0]) {
                return Err(Error::InvalidParam(format!(
                    "signal levels must decrease strictly within (0, 1]: {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        let tail = *alpha_bar.last().unwrap();
        if tail > TAIL_MAX {
            return Err(Error::InvalidParam(format!(
                "final signal level {tail} leaves too much signal (max {TAIL_MAX})"
            )));
        }
        Ok(NoiseSchedule { alpha_bar })
    }

    /// Number of diffusion steps T.
    pub fn t_steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    /// ᾱ_t for t in 0..=T.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn sqrt_alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t].sqrt()
    }

    pub fn sqrt_one_minus_alpha_bar(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar[t]).sqrt()
    }
}

/// Squared-cosine schedule: ᾱ_t built from f(t) = cos²(((t/T + s)/(1 + s))·π/2)
/// with s = 0.008, accumulated through per-step betas clipped at 0.999.
pub fn cosine_schedule(t_steps: usize) -> Result<NoiseSchedule> {
    if t_steps < 1 {
        return Err(Error::InvalidParam("schedule needs at least one step".into()));
    }
    let f = |t: f64| {
        let arg = (t / t_steps as f64 + 0.008) / 1.008 * std::f64::consts::FRAC_PI_2;
        arg.cos().powi(2)
    };
    let mut alpha_bar = Vec::with_capacity(t_steps + 1);
    alpha_bar.push(1.0);
    let mut prev_f = f(0.0);
    for t in 1..=t_steps {
        let cur_f = f(t as f64);
        let beta = (1.0 - cur_f / prev_f).min(BETA_MAX);
        let next = alpha_bar[t - 1] * (1.0 - beta);
        alpha_bar.push(next);
        prev_f = cur_f;
    }
    NoiseSchedule::from_alpha_bar(alpha_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_one_exactly() {
        for t in [1usize, 2, 10, 1000] {
            assert_eq!(cosine_schedule(t).unwrap().alpha_bar(0), 1.0);
        }
    }

    #[test]
    fn strictly_decreasing_for_thousand_steps() {
        let sched = cosine_schedule(1000).unwrap();
        for t in 1..=1000 {
            assert!(sched.alpha_bar(t) < sched.alpha_bar(t - 1));
            assert!(sched.alpha_bar(t) > 0.0);
        }
        assert!(sched.alpha_bar(1000) < 1e-3);
    }

    #[test]
    fn midpoint_matches_direct_formula() {
        // Below the clip threshold the cumulative product telescopes back to
        // f(t)/f(0); check the midpoint against a direct scalar evaluation.
        let t_steps = 1000usize;
        let sched = cosine_schedule(t_steps).unwrap();
        let f = |t: f64| {
            ((t / t_steps as f64 + 0.008) / 1.008 * std::f64::consts::FRAC_PI_2)
                .cos()
                .powi(2)
        };
        let expect = f(500.0) / f(0.0);
        assert!((sched.alpha_bar(500) - expect).abs() < 1e-12);
    }

    #[test]
    fn beta_clip_keeps_the_tail_representable() {
        let sched = cosine_schedule(1000).unwrap();
        // Without the per-step cap the tail would underflow to ~3.7e-33 and
        // x0 would fall below half an ulp of x_T.
        assert!(sched.alpha_bar(1000) > 1e-10);
        // Betas themselves never exceed the cap.
        for t in 1..=1000 {
            let beta = 1.0 - sched.alpha_bar(t) / sched.alpha_bar(t - 1);
            assert!(beta <= 0.999 + 1e-12, "beta_{t} = {beta}");
        }
    }

    #[test]
    fn single_step_schedule_is_valid_edge_case() {
        let sched = cosine_schedule(1).unwrap();
        assert_eq!(sched.t_steps(), 1);
        assert!((sched.alpha_bar(1) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(cosine_schedule(0).is_err());
    }

    #[test]
    fn hand_built_schedules_are_validated() {
        assert!(NoiseSchedule::from_alpha_bar(vec![1.0, 0.5]).is_err()); // tail too high
        assert!(NoiseSchedule::from_alpha_bar(vec![0.9, 1e-4]).is_err()); // wrong start
        assert!(NoiseSchedule::from_alpha_bar(vec![1.0, 2e-4, 1e-4, 1.5e-4]).is_err()); // not decreasing
        assert!(NoiseSchedule::from_alpha_bar(vec![1.0, 0.5, 1e-4]).is_ok());
    }
}
