//! Limiting structures of flows and runs: critical points, limit cycles,
//! Abelian-integral predictions and Monte Carlo attraction statistics.

mod abelian;
mod critical;
mod cycle;
mod montecarlo;

pub use abelian::{abelian_integral, predict_cycle_radius, CyclePrediction};
pub use critical::{
    classify, classify_known, describe_critical_point, eigenvalues, find_critical_points, forsaken_annulus_check,
    AnnulusReport, Classification, CriticalPoint, CriticalScan, SearchBox,
};
pub use cycle::{detect_cycle, CycleDescriptor, CycleDetection, CycleOptions, CycleStability};
pub use montecarlo::{monte_carlo, InitSampler, MonteCarloConfig, MonteCarloReport, TargetSet};

use crate::trajectory::SampledPath;

/// `(t, ‖z(t)‖)` at every recorded sample.
pub fn radius_series<P: SampledPath + ?Sized>(path: &P) -> Vec<(f64, f64)> {
    path.times()
        .iter()
        .zip(path.states())
        .map(|(&t, z)| (t, z.norm()))
        .collect()
}

/// Mean of `‖z‖` over the last `fraction` of the recorded samples (at least
/// one sample).
pub fn tail_mean_radius<P: SampledPath + ?Sized>(path: &P, fraction: f64) -> Option<f64> {
    let states = path.states();
    if states.is_empty() {
        return None;
    }
    let k = ((states.len() as f64 * fraction).ceil() as usize).clamp(1, states.len());
    let tail = &states[states.len() - k..];
    Some(tail.iter().map(|z| z.norm()).sum::<f64>() / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run, RunOptions, Scheme, SchemeKind, SchemeSpec};
    use crate::dynamics::integrate_flow_strided;
    use crate::noise::{NoiseModel, NoiseStream};
    use crate::point::Point;
    use crate::problems::make_bilinear;
    use crate::schedule::StepSchedule;

    #[test]
    fn bilinear_flow_radius_is_constant() {
        let p = integrate_flow_strided(&make_bilinear(), &Point::xy(0.6, 0.8), 20.0, 1e-3, 100).unwrap();
        for (_, r) in radius_series(&p) {
            assert!((r - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sgda_squared_radius_ratio() {
        let mut s = Scheme::new(SchemeSpec::plain(SchemeKind::Sgda)).unwrap();
        let mut stream = NoiseStream::new(NoiseModel::None, 0);
        let out = run(
            &mut s,
            &make_bilinear(),
            &Point::xy(1.0, 0.0),
            &StepSchedule::constant(0.1).unwrap(),
            &mut stream,
            RunOptions::new(100, 1),
        )
        .unwrap();
        let rs = radius_series(&out.trajectory);
        for w in rs.windows(2) {
            assert!((w[1].1.powi(2) / w[0].1.powi(2) - 1.01).abs() < 1e-12);
        }
        assert!(tail_mean_radius(&out.trajectory, 0.0).unwrap() == rs.last().unwrap().1);
    }
}
