//! Step-size schedules `γ_n` and the optional sampling radius `δ_n` used by
//! zeroth-order schemes. Iterations are indexed from `n = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `scale / n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub scale: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn new(scale: f64, exponent: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::invalid(
                "exponent",
                format!("must be positive, got {exponent}"),
            ));
        }
        Ok(Self { scale, exponent })
    }

    pub fn at(&self, n: u64) -> f64 {
        self.scale / (n as f64).powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Power(PowerLaw),
    Constant(f64),
    /// Explicit values for `n = 1, 2, ...`; the last value is held afterwards.
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    kind: StepKind,
    sampling_radius: Option<PowerLaw>,
}

/// The step (and sampling radius, when configured) for one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepValue {
    pub gamma: f64,
    pub delta: Option<f64>,
}

impl StepSchedule {
    /// `γ_n = scale / n^exponent`.
    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        Ok(Self {
            kind: StepKind::Power(PowerLaw::new(scale, exponent)?),
            sampling_radius: None,
        })
    }

    pub fn constant(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(Self {
            kind: StepKind::Constant(gamma),
            sampling_radius: None,
        })
    }

    pub fn sequence(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sequence", "empty step sequence"));
        }
        if let Some(bad) = values.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::invalid("sequence", format!("non-positive step {bad}")));
        }
        Ok(Self {
            kind: StepKind::Sequence(values),
            sampling_radius: None,
        })
    }

    pub fn with_sampling_radius(mut self, scale: f64, exponent: f64) -> Result<Self> {
        self.sampling_radius = Some(PowerLaw::new(scale, exponent)?);
        Ok(self)
    }

    /// Re-validates a deserialized schedule.
    pub fn validated(self) -> Result<Self> {
        let base = match self.kind {
            StepKind::Power(p) => Self::power(p.scale, p.exponent)?,
            StepKind::Constant(g) => Self::constant(g)?,
            StepKind::Sequence(v) => Self::sequence(v)?,
        };
        match self.sampling_radius {
            Some(d) => base.with_sampling_radius(d.scale, d.exponent),
            None => Ok(base),
        }
    }

    pub fn kind(&self) -> &StepKind {
        &self.kind
    }

    pub fn sampling_radius(&self) -> Option<&PowerLaw> {
        self.sampling_radius.as_ref()
    }

    /// Number of explicitly defined steps, if the schedule is a finite sequence.
    pub fn explicit_len(&self) -> Option<usize> {
        match &self.kind {
            StepKind::Sequence(v) => Some(v.len()),
            _ => None,
        }
    }

    pub fn gamma(&self, n: u64) -> f64 {
        assert!(n >= 1, "schedules are indexed from n = 1");
        match &self.kind {
            StepKind::Power(p) => p.at(n),
            StepKind::Constant(g) => *g,
            StepKind::Sequence(v) => v[(n as usize - 1).min(v.len() - 1)],
        }
    }

    pub fn value(&self, n: u64) -> StepValue {
        StepValue {
            gamma: self.gamma(n),
            delta: self.sampling_radius.map(|d| d.at(n)),
        }
    }

    /// Errors if `horizon` runs past an explicit sequence.
    pub fn check_horizon(&self, horizon: u64) -> Result<()> {
        match self.explicit_len() {
            Some(len) if horizon as usize > len => {
                Err(Error::ScheduleExhausted { n: horizon, len })
            }
            _ => Ok(()),
        }
    }
}

/// Constants of the two-sided window `A/n <= γ_n <= B / sqrt(n (log n)^(1+ε))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConstants {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub satisfies_prop1_window: bool,
    pub witness_constants: WindowConstants,
    /// First `n` at which the lower bound failed.
    pub lower_violation: Option<u64>,
    /// First `n` at which the upper bound failed.
    pub upper_violation: Option<u64>,
    /// For schedules with a sampling radius: whether the dyadic block sums of
    /// `γ_n² / δ_n²` are strictly decreasing over the scanned range.
    pub zeroth_order_summable: Option<bool>,
}

/// Scans `n = 2..=horizon` for the window bounds with the declared constants.
pub fn validate_schedule(
    schedule: &StepSchedule,
    horizon: u64,
    window: WindowConstants,
) -> ScheduleReport {
    assert!(horizon >= 2, "validate_schedule needs horizon >= 2");
    // Relative slack so that exact equality A/n == γ_n is not lost to rounding.
    const SLACK: f64 = 1e-12;
    let mut lower_violation = None;
    let mut upper_violation = None;
    for n in 2..=horizon {
        let g = schedule.gamma(n);
        let nf = n as f64;
        let lower = window.a / nf;
        let upper = window.b / (nf * nf.ln().powf(1.0 + window.eps)).sqrt();
        if lower_violation.is_none() && g < lower * (1.0 - SLACK) {
            lower_violation = Some(n);
        }
        if upper_violation.is_none() && g > upper * (1.0 + SLACK) {
            upper_violation = Some(n);
        }
        if lower_violation.is_some() && upper_violation.is_some() {
            break;
        }
    }

    let zeroth_order_summable = schedule.sampling_radius().map(|_| {
        let mut block_sums = Vec::new();
        let mut start = 1u64;
        while start <= horizon {
            let end = (2 * start).min(horizon + 1);
            let s: f64 = (start..end)
                .map(|n| {
                    let v = schedule.value(n);
                    let d = v.delta.expect("sampling radius configured");
                    (v.gamma / d).powi(2)
                })
                .sum();
            // Only complete dyadic blocks are comparable.
            if end == 2 * start {
                block_sums.push(s);
            }
            start = end;
        }
        block_sums.len() >= 2 && block_sums.windows(2).all(|w| w[1] < w[0])
    });

    ScheduleReport {
        satisfies_prop1_window: lower_violation.is_none() && upper_violation.is_none(),
        witness_constants: window,
        lower_violation,
        upper_violation,
        zeroth_order_summable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_schedule_value() {
        let s = StepSchedule::power(1.0, 1.0).unwrap();
        assert_eq!(s.gamma(4), 0.25);
    }

    #[test]
    fn zeroth_order_pair() {
        let s = StepSchedule::power(1.0, 1.0)
            .unwrap()
            .with_sampling_radius(1.0, 1.0 / 3.0)
            .unwrap();
        let v = s.value(8);
        assert_eq!(v.gamma, 0.125);
        assert!((v.delta.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_schedule_is_constant() {
        let s = StepSchedule::constant(0.01).unwrap();
        assert_eq!(s.gamma(1_000_000), 0.01);
        assert_eq!(s.value(3).delta, None);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(StepSchedule::power(0.0, 1.0).is_err());
        assert!(StepSchedule::power(1.0, 0.0).is_err());
        assert!(StepSchedule::power(-1.0, 0.5).is_err());
        assert!(StepSchedule::constant(0.0).is_err());
        assert!(StepSchedule::constant(f64::NAN).is_err());
        assert!(StepSchedule::sequence(vec![0.1, -0.1]).is_err());
        assert!(StepSchedule::sequence(vec![]).is_err());
    }

    #[test]
    fn sequence_holds_last_value_and_reports_exhaustion() {
        let s = StepSchedule::sequence(vec![0.5, 0.25]).unwrap();
        assert_eq!(s.gamma(1), 0.5);
        assert_eq!(s.gamma(2), 0.25);
        assert_eq!(s.gamma(7), 0.25);
        assert!(s.check_horizon(2).is_ok());
        assert!(matches!(
            s.check_horizon(3),
            Err(Error::ScheduleExhausted { n: 3, len: 2 })
        ));
    }

    #[test]
    fn harmonic_schedule_inside_window() {
        let s = StepSchedule::power(1.0, 1.0).unwrap();
        let r = validate_schedule(&s, 10_000, WindowConstants { a: 1.0, b: 2.0, eps: 0.5 });
        assert!(r.satisfies_prop1_window, "{r:?}");
    }

    #[test]
    fn constant_schedule_violates_window() {
        let s = StepSchedule::constant(0.01).unwrap();
        let r = validate_schedule(&s, 10_000, WindowConstants { a: 0.01, b: 2.0, eps: 0.5 });
        assert!(!r.satisfies_prop1_window);
        assert!(r.upper_violation.is_some());
    }

    #[test]
    fn inverse_sqrt_schedule_violates_upper_bound() {
        let s = StepSchedule::power(1.0, 0.5).unwrap();
        let r = validate_schedule(&s, 10_000, WindowConstants { a: 1.0, b: 2.0, eps: 0.5 });
        assert!(!r.satisfies_prop1_window);
        assert!(r.lower_violation.is_none());
        assert!(r.upper_violation.is_some());
    }

    #[test]
    fn zeroth_order_block_sums_flatten() {
        let s = StepSchedule::power(1.0, 1.0)
            .unwrap()
            .with_sampling_radius(1.0, 1.0 / 3.0)
            .unwrap();
        let r = validate_schedule(&s, 1 << 14, WindowConstants { a: 1.0, b: 2.0, eps: 0.5 });
        assert_eq!(r.zeroth_order_summable, Some(true));

        // γ_n = δ_n makes every term 1: the block sums grow.
        let bad = StepSchedule::power(1.0, 0.5)
            .unwrap()
            .with_sampling_radius(1.0, 0.5)
            .unwrap();
        let r = validate_schedule(&bad, 1 << 14, WindowConstants { a: 1.0, b: 2.0, eps: 0.5 });
        assert_eq!(r.zeroth_order_summable, Some(false));
    }
}
