//! Step-size schedules and averaging weights.
//!
//! Horizons passed to [`StepSchedule::gamma`] and [`AveragingScheme::window_start`]
//! use the convention of the convergence theorems: a run of `T + 1` steps
//! `t = 0..=T` has horizon `T`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule parameter: {0}")]
    InvalidParameter(String),
    #[error("constant-horizon schedule needs the horizon T")]
    MissingHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    /// `gamma_t = c / (t + 1)^a`.
    Power { c: f64, a: f64 },
    /// `gamma = c / (T + 1)^a` for every `t`, with `T` the horizon.
    ConstantHorizon { c: f64, a: f64 },
    #[serde(alias = "fixed_value")]
    Fixed { gamma: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        match *self {
            Self::Power { c, a } | Self::ConstantHorizon { c, a } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(ScheduleError::InvalidParameter(format!(
                        "c must be > 0, got {c}"
                    )));
                }
                if !(a > 0.0 && a < 1.0) {
                    return Err(ScheduleError::InvalidParameter(format!(
                        "a must lie in (0, 1), got {a}"
                    )));
                }
                Ok(())
            }
            Self::Fixed { gamma } => {
                if gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(ScheduleError::InvalidParameter(format!(
                        "gamma must be > 0, got {gamma}"
                    )))
                }
            }
        }
    }

    pub fn gamma(&self, t: usize, horizon: Option<usize>) -> Result<f64, ScheduleError> {
        match *self {
            Self::Power { c, a } => Ok(c / ((t + 1) as f64).powf(a)),
            Self::ConstantHorizon { c, a } => {
                let big_t = horizon.ok_or(ScheduleError::MissingHorizon)?;
                Ok(c / ((big_t + 1) as f64).powf(a))
            }
            Self::Fixed { gamma } => Ok(gamma),
        }
    }

    /// `c` for the parametric schedules, `None` for a fixed step.
    pub fn c(&self) -> Option<f64> {
        match *self {
            Self::Power { c, .. } | Self::ConstantHorizon { c, .. } => Some(c),
            Self::Fixed { .. } => None,
        }
    }
}

/// Largest constant step allowed by the residual theorem for a Lipschitz
/// mapping: `min(alpha / (sqrt 2 L1 sqrt(r (w5 - 1) alpha + 4)), alpha sqrt(1 - r) / (2 L1))`.
pub fn lipschitz_cap(alpha: f64, l1: f64, r: f64, w5: f64) -> Result<f64, ScheduleError> {
    if !(alpha > 0.0) || !(l1 > 0.0) || !(0.0..1.0).contains(&r) || !(w5 > 1.0) || !w5.is_finite() {
        return Err(ScheduleError::InvalidParameter(format!(
            "need alpha > 0, L1 > 0, 0 <= r < 1, w5 > 1; got alpha={alpha}, L1={l1}, r={r}, w5={w5}"
        )));
    }
    let first = alpha / (std::f64::consts::SQRT_2 * l1 * (r * (w5 - 1.0) * alpha + 4.0).sqrt());
    let second = alpha * (1.0 - r).sqrt() / (2.0 * l1);
    Ok(first.min(second))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `omega_t = gamma_t`.
    #[default]
    Step,
    /// `omega_t = 1 / gamma_t`.
    InverseStep,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Zero,
    /// Average over `t = floor(T/2)..=T`.
    HalfHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingScheme {
    #[serde(default)]
    pub weights: WeightRule,
    #[serde(default)]
    pub window: Window,
}

impl AveragingScheme {
    pub fn new(weights: WeightRule, window: Window) -> Self {
        Self { weights, window }
    }

    pub fn window_start(&self, horizon: usize) -> usize {
        match self.window {
            Window::Zero => 0,
            Window::HalfHorizon => horizon / 2,
        }
    }

    /// Averaging weight of step `t`, scaled by the first step `gamma_0`.
    ///
    /// The scaling leaves every weighted average unchanged and makes the
    /// weights of a constant schedule exactly 1.
    pub fn weight(&self, gamma_t: f64, gamma_0: f64) -> f64 {
        match self.weights {
            WeightRule::Step => gamma_t / gamma_0,
            WeightRule::InverseStep => gamma_0 / gamma_t,
            WeightRule::Uniform => 1.0,
        }
    }
}

/// The `{"step": ..., "averaging": ...}` fragment of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub step: StepSchedule,
    #[serde(default)]
    pub averaging: AveragingScheme,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(
            StepSchedule::Power { c: 1.0, a: 0.5 }.gamma(3, None),
            Ok(0.5)
        );
        let ch = StepSchedule::ConstantHorizon { c: 1.0, a: 0.5 };
        assert_eq!(ch.gamma(17, Some(399)), Ok(0.05));
        assert_eq!(ch.gamma(0, None), Err(ScheduleError::MissingHorizon));
        assert_eq!(
            StepSchedule::Fixed { gamma: 0.05 }.gamma(12345, None),
            Ok(0.05)
        );
    }

    #[test]
    fn validation() {
        assert!(StepSchedule::Power { c: 0.0, a: 0.5 }.validate().is_err());
        assert!(StepSchedule::Power { c: 1.0, a: 1.0 }.validate().is_err());
        assert!(StepSchedule::ConstantHorizon { c: 1.0, a: 0.0 }
            .validate()
            .is_err());
        assert!(StepSchedule::Fixed { gamma: -1.0 }.validate().is_err());
        assert!(StepSchedule::Fixed { gamma: f64::NAN }.validate().is_err());
        assert!(StepSchedule::Power { c: 1.0, a: 0.5 }.validate().is_ok());
    }

    #[test]
    fn cap_examples() {
        let cap = lipschitz_cap(1.0, 10.0, 0.5, 2.0).unwrap();
        assert!((cap - 1.0 / 30.0).abs() <= 1e-17);
        let cap0 = lipschitz_cap(1.0, 10.0, 0.0, 2.0).unwrap();
        assert_eq!(cap0, 1.0 / (std::f64::consts::SQRT_2 * 10.0 * 2.0));
        let mut prev = f64::INFINITY;
        for l1 in [1.0, 2.0, 10.0, 100.0, 1e6] {
            let c = lipschitz_cap(1.0, l1, 0.5, 2.0).unwrap();
            assert!(c < prev);
            prev = c;
        }
        assert!(lipschitz_cap(1.0, 10.0, 1.0, 2.0).is_err());
        assert!(lipschitz_cap(1.0, 10.0, 0.5, 1.0).is_err());
        assert!(lipschitz_cap(0.0, 10.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn window_examples() {
        let half = AveragingScheme::new(WeightRule::Step, Window::HalfHorizon);
        assert_eq!(half.window_start(5), 2);
        assert_eq!(half.window_start(0), 0);
        assert_eq!(half.window_start(400), 200);
        assert_eq!(AveragingScheme::default().window_start(400), 0);
    }

    #[test]
    fn step_weights_under_fixed_step_are_uniform() {
        let s = AveragingScheme::new(WeightRule::Step, Window::Zero);
        assert_eq!(s.weight(0.05, 0.05), 1.0);
        let inv = AveragingScheme::new(WeightRule::InverseStep, Window::Zero);
        assert_eq!(inv.weight(0.05, 0.05), 1.0);
    }

    #[test]
    fn config_fragment_parses() {
        let text = r#"{"step":{"kind":"power","c":1.0,"a":0.5},"averaging":{"weights":"inverse_step","window":"zero"}}"#;
        let cfg: ScheduleConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.step, StepSchedule::Power { c: 1.0, a: 0.5 });
        assert_eq!(
            cfg.averaging,
            AveragingScheme::new(WeightRule::InverseStep, Window::Zero)
        );
        let fixed: StepSchedule =
            serde_json::from_str(r#"{"kind":"fixed_value","gamma":0.05}"#).unwrap();
        assert_eq!(fixed, StepSchedule::Fixed { gamma: 0.05 });
        assert!(
            serde_json::from_str::<StepSchedule>(r#"{"kind":"power","c":1.0,"a":0.5,"z":1}"#)
                .is_err()
        );
    }
}
