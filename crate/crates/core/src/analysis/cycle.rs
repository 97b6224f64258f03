use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::point::Point;
use crate::trajectory::SampledPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleStability {
    Attracting,
    Repelling,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDescriptor {
    pub period: f64,
    /// Statistics of `‖z‖` over the last period.
    pub radius_min: f64,
    pub radius_mean: f64,
    pub radius_max: f64,
    pub stability: CycleStability,
    pub section_point: Vec<f64>,
    /// Center of the angular section (the origin unless recentering kicked in).
    pub center: [f64; 2],
    pub crossings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CycleDetection {
    Cycle(CycleDescriptor),
    /// Fewer than three section crossings after burn-in, even after
    /// recentering.
    NoRecurrence { crossings: usize },
    /// Enough crossings, but the last three radii disagree.
    Unsettled { crossings: usize, spread: f64 },
}

impl CycleDetection {
    pub fn cycle(&self) -> Option<&CycleDescriptor> {
        match self {
            CycleDetection::Cycle(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_cycle(&self) -> bool {
        self.cycle().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOptions {
    /// Fraction of the time span discarded before looking for crossings.
    pub burn_in: f64,
    /// Relative spread allowed among the last three crossing radii.
    pub rel_tol: f64,
    /// Radius gaps at or below this (relative) size count as noise when
    /// reading stability.
    pub gap_floor: f64,
    /// Orbits that stay closer than this to the section center are points,
    /// not cycles.
    pub min_radius: f64,
}

impl CycleOptions {
    pub fn flow() -> Self {
        Self {
            burn_in: 0.5,
            rel_tol: 1e-3,
            gap_floor: 1e-9,
            min_radius: 1e-3,
        }
    }

    pub fn stochastic() -> Self {
        Self {
            rel_tol: 5e-2,
            ..Self::flow()
        }
    }
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self::flow()
    }
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    time: f64,
    /// Distance to the section center.
    radius: f64,
    /// `‖z‖` at the crossing.
    norm: f64,
    x: f64,
    y: f64,
}

/// Crossings of the half-line `{y = c_y, x > c_x}` counted through the
/// unwrapped polar angle around `c`: a crossing is recorded each time the
/// angle passes a new multiple of `2π`, so jitter back and forth across the
/// section is not counted twice.
fn section_crossings(times: &[f64], states: &[Point], center: [f64; 2], min_radius: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64, f64, f64)> = None; // time, unwrapped angle, x, y
    let mut prev_norm = 0.0;
    let mut level = 0.0;
    for (t, z) in times.iter().zip(states) {
        let (x, y) = (z[0] - center[0], z[1] - center[1]);
        if x.hypot(y) < min_radius {
            // too close to the center for the angle to mean anything
            prev = None;
            continue;
        }
        let raw = y.atan2(x);
        let theta = match prev {
            None => {
                level = (raw / TAU).round() * TAU;
                raw
            }
            Some((_, pth, _, _)) => {
                let mut d = raw - pth.rem_euclid(TAU);
                d = (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
                pth + d
            }
        };
        if let Some((pt, pth, px, py)) = prev {
            for target in [level + TAU, level - TAU] {
                let crossed = (pth < target && theta >= target) || (pth > target && theta <= target);
                if crossed {
                    let s = (target - pth) / (theta - pth);
                    let cx = px + s * (x - px);
                    let cy = py + s * (y - py);
                    // radii are blended, not read off the chord, which would
                    // cut inside a curved orbit
                    let (pr, r) = (px.hypot(py), x.hypot(y));
                    out.push(Crossing {
                        time: pt + s * (t - pt),
                        radius: pr + s * (r - pr),
                        norm: prev_norm + s * (z.norm() - prev_norm),
                        x: cx + center[0],
                        y: cy + center[1],
                    });
                    level = target;
                    break;
                }
            }
        }
        prev = Some((*t, theta, x, y));
        prev_norm = z.norm();
    }
    out
}

/// Ratio of the latest pair of successive radius gaps that both stand clear
/// of the noise: above `floor` (relative) and above 1e-3 of the largest gap.
/// Once an attracting cycle is reached, the gaps shrink to the interpolation
/// error of the crossing radii, and those carry no stability information.
fn stability(crossings: &[Crossing], floor: f64) -> CycleStability {
    let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1].radius - w[0].radius).collect();
    let scale = crossings.last().map_or(1.0, |c| c.radius.max(1e-300));
    let largest = gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let cut = (floor * scale).max(1e-3 * largest);
    for w in gaps.windows(2).rev() {
        if w[0].abs() > cut && w[1].abs() > cut {
            let ratio = (w[1] / w[0]).abs();
            return if ratio < 1.0 {
                CycleStability::Attracting
            } else {
                CycleStability::Repelling
            };
        }
    }
    CycleStability::Undetermined
}

fn tail_mean(states: &[Point]) -> [f64; 2] {
    let n = states.len().max(1) as f64;
    let (sx, sy) = states.iter().fold((0.0, 0.0), |(a, b), z| (a + z[0], b + z[1]));
    [sx / n, sy / n]
}

/// Looks for a periodic orbit through successive returns to the section.
/// Planar paths only; only the first two coordinates are read.
pub fn detect_cycle<P: SampledPath + ?Sized>(path: &P, opts: CycleOptions) -> CycleDetection {
    let times = path.times();
    let states = path.states();
    if times.len() < 2 {
        return CycleDetection::NoRecurrence { crossings: 0 };
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let cut = times.partition_point(|&t| t < t0 + opts.burn_in * (t1 - t0));
    let (tail_t, tail_z) = (&times[cut..], &states[cut..]);

    let mut center = [0.0, 0.0];
    let mut crossings = section_crossings(tail_t, tail_z, center, opts.min_radius);
    if crossings.len() < 3 {
        center = tail_mean(tail_z);
        crossings = section_crossings(tail_t, tail_z, center, opts.min_radius);
    }
    let k = crossings.len();
    if k < 3 {
        return CycleDetection::NoRecurrence { crossings: k };
    }
    let last3 = &crossings[k - 3..];
    let lo = last3.iter().map(|c| c.radius).fold(f64::INFINITY, f64::min);
    let hi = last3.iter().map(|c| c.radius).fold(0.0, f64::max);
    let mean = last3.iter().map(|c| c.radius).sum::<f64>() / 3.0;
    let spread = (hi - lo) / mean;
    if !(spread <= opts.rel_tol) {
        return CycleDetection::Unsettled { crossings: k, spread };
    }

    let (a, b) = (crossings[k - 2], crossings[k - 1]);
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    let mut area = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let i0 = times.partition_point(|&t| t < a.time);
    let i1 = times.partition_point(|&t| t <= b.time);
    let ends = [(a.time, a.norm), (b.time, b.norm)];
    let inner = (i0..i1).map(|i| (times[i], states[i][0].hypot(states[i][1])));
    for (t, r) in std::iter::once(ends[0]).chain(inner).chain(std::iter::once(ends[1])) {
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        if let Some((pt, pr)) = prev {
            area += 0.5 * (r + pr) * (t - pt);
        }
        prev = Some((t, r));
    }
    let period = b.time - a.time;
    let radius_mean = (area / period).clamp(rmin, rmax);

    // stability reads the full path, where the approach to the cycle is visible
    let full = section_crossings(times, states, center, opts.min_radius);
    CycleDetection::Cycle(CycleDescriptor {
        period,
        radius_min: rmin,
        radius_mean,
        radius_max: rmax,
        stability: stability(&full, opts.gap_floor),
        section_point: {
            let mut p = states[states.len() - 1].to_vec();
            p[0] = b.x;
            p[1] = b.y;
            p
        },
        center,
        crossings: k,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dynamics::{integrate_flow_strided, FlowPath};
    use crate::problems::{make_bilinear, GradientWell};

    #[test]
    fn bilinear_circle() {
        let p = integrate_flow_strided(&make_bilinear(), &Point::xy(1.0, 0.0), 40.0, 1e-3, 1).unwrap();
        let c = detect_cycle(&p, CycleOptions::flow());
        let c = c.cycle().expect("cycle");
        assert!((c.radius_mean - 1.0).abs() < 1e-6);
        assert!((c.period - 2.0 * PI).abs() < 1e-4, "{}", c.period);
        assert_eq!(c.stability, CycleStability::Undetermined);
        assert!(c.radius_min <= c.radius_mean && c.radius_mean <= c.radius_max);
    }

    #[test]
    fn clockwise_orbits_count_too() {
        let times: Vec<f64> = (0..4000).map(|k| k as f64 * 0.01).collect();
        let states = times.iter().map(|t| Point::xy(2.0 * t.cos(), -2.0 * t.sin())).collect();
        let p = FlowPath::from_samples(times, states, 0.01).unwrap();
        let c = detect_cycle(&p, CycleOptions::flow());
        let c = c.cycle().expect("cycle");
        assert!((c.period - 2.0 * PI).abs() < 1e-6);
        assert!((c.radius_mean - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jitter_across_the_section_is_one_crossing() {
        let mut times = Vec::new();
        let mut states = Vec::new();
        // wiggle around angle 0 ten times, never completing a turn
        for k in 0..200 {
            let a: f64 = if k % 2 == 0 { 0.1 } else { -0.1 };
            times.push(k as f64);
            states.push(Point::xy(a.cos(), a.sin()));
        }
        let p = FlowPath::from_samples(times, states, 1.0).unwrap();
        assert!(!detect_cycle(&p, CycleOptions::flow()).is_cycle());
    }

    #[test]
    fn gradient_well_has_no_recurrence() {
        let p =
            integrate_flow_strided(&GradientWell::default(), &Point::xy(0.1, 0.1), 200.0, 1e-3, 10).unwrap();
        assert!(matches!(
            detect_cycle(&p, CycleOptions::flow()),
            CycleDetection::NoRecurrence { .. }
        ));
    }

    #[test]
    fn spiral_in_is_attracting() {
        let times: Vec<f64> = (0..20000).map(|k| k as f64 * 0.01).collect();
        let states = times
            .iter()
            .map(|t| {
                let r = 1.0 + (-0.02 * t).exp();
                Point::xy(r * t.cos(), r * t.sin())
            })
            .collect();
        let p = FlowPath::from_samples(times, states, 0.01).unwrap();
        let opts = CycleOptions {
            rel_tol: 0.2,
            ..CycleOptions::flow()
        };
        let c = detect_cycle(&p, opts);
        assert_eq!(c.cycle().unwrap().stability, CycleStability::Attracting);
    }

    #[test]
    fn descriptor_json_field_names() {
        let p = integrate_flow_strided(&make_bilinear(), &Point::xy(1.0, 0.0), 40.0, 1e-3, 5).unwrap();
        let c = detect_cycle(&p, CycleOptions::flow());
        let v = serde_json::to_value(c.cycle().unwrap()).unwrap();
        for key in ["period", "radius_min", "radius_mean", "radius_max", "stability"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["stability"], "undetermined");
    }

    fn synthetic(radii: impl Iterator<Item = f64>) -> Vec<Crossing> {
        radii
            .enumerate()
            .map(|(i, r)| Crossing {
                time: i as f64,
                radius: r,
                norm: r,
                x: r,
                y: 0.0,
            })
            .collect()
    }

    #[test]
    fn stability_ignores_gaps_at_the_noise_level() {
        // geometric approach to 1.2, then alternating 5e-9 jitter
        let approach = (0..20).map(|k| 1.2 - 0.3 * 0.5f64.powi(k));
        let jitter = (0..30).map(|k| 1.2 + if k % 2 == 0 { 5e-9 } else { -5e-9 });
        let c = synthetic(approach.chain(jitter));
        assert_eq!(stability(&c, 1e-9), CycleStability::Attracting);
    }

    #[test]
    fn growing_gaps_read_as_repelling() {
        let c = synthetic((0..15).map(|k| 1.0 + 1e-4 * 1.5f64.powi(k)));
        assert_eq!(stability(&c, 1e-9), CycleStability::Repelling);
        let flat = synthetic((0..15).map(|_| 1.0));
        assert_eq!(stability(&flat, 1e-9), CycleStability::Undetermined);
    }
}
