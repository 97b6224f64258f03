use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problems::{Forsaken, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Every eigenvalue has negative real part.
    Stable,
    /// Some eigenvalue has positive real part.
    Unstable,
    /// Largest real part is zero within tolerance.
    Center,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    /// `(re, im)` pairs of the field Jacobian's eigenvalues.
    pub eigenvalues: Vec<[f64; 2]>,
    pub classification: Classification,
    pub residual: f64,
}

impl CriticalPoint {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn distance_to(&self, coords: &[f64]) -> f64 {
        self.location
            .iter()
            .zip(coords)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Axis-aligned box, one `(lo, hi)` pair per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub bounds: Vec<(f64, f64)>,
}

impl SearchBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::invalid("search_box", "every axis needs finite lo < hi"));
        }
        Ok(Self { bounds })
    }

    pub fn square(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![(-half_width, half_width); dim])
    }

    pub fn contains(&self, z: &DVector<f64>, slack: f64) -> bool {
        z.iter()
            .zip(&self.bounds)
            .all(|(&c, &(lo, hi))| c >= lo - slack && c <= hi + slack)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalScan {
    pub points: Vec<CriticalPoint>,
    pub seeds: usize,
    /// Seeds abandoned on a singular Jacobian.
    pub singular_seeds: usize,
    /// Seeds that ran out of iterations or left the box.
    pub lost_seeds: usize,
}

const NEWTON_ITERATIONS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-12;
const DEDUP_RADIUS: f64 = 1e-6;
const CLASSIFY_TOL: f64 = 1e-9;

/// Eigenvalues of a square matrix; closed form for 2×2.
pub fn eigenvalues(j: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if j.nrows() == 2 {
        let tr = j[(0, 0)] + j[(1, 1)];
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        let disc = 0.25 * tr * tr - det;
        let half = 0.5 * tr;
        if disc >= 0.0 {
            let s = disc.sqrt();
            vec![Complex::new(half + s, 0.0), Complex::new(half - s, 0.0)]
        } else {
            let s = (-disc).sqrt();
            vec![Complex::new(half, s), Complex::new(half, -s)]
        }
    } else {
        j.complex_eigenvalues().iter().copied().collect()
    }
}

pub fn classify(eigs: &[Complex<f64>]) -> Classification {
    let scale = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let tol = CLASSIFY_TOL * scale.max(f64::MIN_POSITIVE);
    let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re > tol {
        Classification::Unstable
    } else if max_re < -tol {
        Classification::Stable
    } else {
        Classification::Center
    }
}

/// Builds the record for a known critical point.
pub fn describe_critical_point(problem: &dyn Problem, z: &DVector<f64>) -> CriticalPoint {
    let eigs = eigenvalues(&problem.jacobian(z));
    CriticalPoint {
        location: z.iter().copied().collect(),
        eigenvalues: eigs.iter().map(|e| [e.re, e.im]).collect(),
        classification: classify(&eigs),
        residual: problem.field(z).norm(),
    }
}

enum Newton {
    Root(DVector<f64>),
    Singular,
    Lost,
}

fn newton(problem: &dyn Problem, seed: DVector<f64>, search: &SearchBox) -> Newton {
    let mut z = seed;
    let width = search.bounds.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    for _ in 0..NEWTON_ITERATIONS {
        let v = problem.field(&z);
        if v.norm() <= RESIDUAL_TOL {
            return Newton::Root(z);
        }
        let Some(dz) = problem.jacobian(&z).lu().solve(&v) else {
            return Newton::Singular;
        };
        if !dz.iter().all(|c| c.is_finite()) {
            return Newton::Singular;
        }
        z -= dz;
        if !search.contains(&z, width) {
            return Newton::Lost;
        }
    }
    let v = problem.field(&z);
    if v.norm() <= 1e-10 {
        Newton::Root(z)
    } else {
        Newton::Lost
    }
}

/// Newton iterations seeded on a `grid_n^d` lattice over the box; roots in the
/// box are deduplicated within `1e-6` and classified from the Jacobian
/// spectrum.
pub fn find_critical_points(problem: &dyn Problem, search: &SearchBox, grid_n: usize) -> Result<CriticalScan> {
    if grid_n < 2 {
        return Err(Error::invalid("grid_n", "must be >= 2"));
    }
    let d = problem.dim();
    if search.bounds.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: search.bounds.len(),
        });
    }
    let seeds = grid_n.pow(d as u32);
    let mut scan = CriticalScan {
        points: Vec::new(),
        seeds,
        singular_seeds: 0,
        lost_seeds: 0,
    };
    let mut roots: Vec<DVector<f64>> = Vec::new();
    for idx in 0..seeds {
        let mut rem = idx;
        let seed = DVector::from_fn(d, |i, _| {
            let k = rem % grid_n;
            rem /= grid_n;
            let (lo, hi) = search.bounds[i];
            lo + (hi - lo) * k as f64 / (grid_n - 1) as f64
        });
        match newton(problem, seed, search) {
            Newton::Root(z) => {
                if search.contains(&z, 1e-9) && roots.iter().all(|r| (r - &z).norm() > DEDUP_RADIUS) {
                    roots.push(z);
                }
            }
            Newton::Singular => scan.singular_seeds += 1,
            Newton::Lost => scan.lost_seeds += 1,
        }
    }
    roots.sort_by(|a, b| a.iter().partial_cmp(b.iter()).unwrap_or(std::cmp::Ordering::Equal));
    scan.points = roots.iter().map(|z| describe_critical_point(problem, z)).collect();
    Ok(scan)
}

/// Radial behavior of the forsaken field on the circles `r² = 4/3` and
/// `r² = 2`, read from `⟨V(z), z⟩ = ½ d(r²)/dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusReport {
    pub samples: usize,
    pub inner_min: f64,
    pub inner_argmin: [f64; 2],
    pub outer_max: f64,
    pub outer_argmax: [f64; 2],
    /// Critical points with `4/3 <= r² <= 2`.
    pub critical_points_inside: Vec<CriticalPoint>,
}

impl AnnulusReport {
    pub fn inner_outward(&self) -> bool {
        self.inner_min > 0.0
    }

    pub fn outer_inward(&self) -> bool {
        self.outer_max < 0.0
    }
}

pub fn forsaken_annulus_check(samples: usize) -> Result<AnnulusReport> {
    if samples < 4 {
        return Err(Error::invalid("samples", "need at least 4 points per circle"));
    }
    let f = Forsaken;
    let rate = |r: f64, k: usize| {
        let a = std::f64::consts::TAU * k as f64 / samples as f64;
        let z = DVector::from_vec(vec![r * a.cos(), r * a.sin()]);
        (f.field(&z).dot(&z), [z[0], z[1]])
    };
    let (r_in, r_out) = ((4.0f64 / 3.0).sqrt(), 2f64.sqrt());
    let mut inner = (f64::INFINITY, [0.0; 2]);
    let mut outer = (f64::NEG_INFINITY, [0.0; 2]);
    for k in 0..samples {
        let a = rate(r_in, k);
        if a.0 < inner.0 {
            inner = a;
        }
        let b = rate(r_out, k);
        if b.0 > outer.0 {
            outer = b;
        }
    }
    let scan = find_critical_points(&f, &SearchBox::square(2, r_out)?, 41)?;
    let critical_points_inside = scan
        .points
        .into_iter()
        .filter(|c| {
            let r2 = c.location[0].powi(2) + c.location[1].powi(2);
            (4.0 / 3.0..=2.0).contains(&r2)
        })
        .collect();
    Ok(AnnulusReport {
        samples,
        inner_min: inner.0,
        inner_argmin: inner.1,
        outer_max: outer.0,
        outer_argmax: outer.1,
        critical_points_inside,
    })
}

/// Locations of the critical points a problem is known to have, classified.
pub fn classify_known(problem: &dyn Problem) -> Vec<CriticalPoint> {
    problem
        .known_critical_points()
        .iter()
        .map(|p: &Point| describe_critical_point(problem, p.coords()))
        .collect()
}
