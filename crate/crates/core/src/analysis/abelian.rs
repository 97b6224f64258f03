use serde::Serialize;

use crate::problems::PolynomialPerturbation;

/// `I(h) = -∮ φ'(y) dx` over the circle of radius `h`, in closed form:
/// `4π Σ_k a_{2k} k h^{2k} Π_{i<=k} (2i-1)/(2i)`. Odd powers of `φ` integrate
/// to zero and `ε` plays no role.
pub fn abelian_integral(pert: &PolynomialPerturbation, h: f64) -> f64 {
    let mut sum = 0.0;
    for (&degree, &a) in pert.coefficients() {
        if degree == 0 || degree % 2 == 1 {
            continue;
        }
        let k = degree / 2;
        let mut wallis = 1.0;
        for i in 1..=k {
            wallis *= (2 * i - 1) as f64 / (2 * i) as f64;
        }
        sum += a * k as f64 * h.powi(degree as i32) * wallis;
    }
    4.0 * std::f64::consts::PI * sum
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CyclePrediction {
    /// Positive roots of `I`, ascending.
    Radii { roots: Vec<f64> },
    NoPositiveRoot,
    /// No even term beyond the constant: `I ≡ 0`.
    IdenticallyZero,
}

impl CyclePrediction {
    /// The smallest predicted radius `h*`.
    pub fn root(&self) -> Option<f64> {
        match self {
            CyclePrediction::Radii { roots } => roots.first().copied(),
            _ => None,
        }
    }
}

const SCAN_LO: f64 = 1e-6;
const SCAN_HI: f64 = 1e3;
const SCAN_POINTS: usize = 4000;

/// Sign-change scan of `I` on a log grid over `(1e-6, 1e3)`, refined by
/// bisection well below `1e-9`.
pub fn predict_cycle_radius(pert: &PolynomialPerturbation) -> CyclePrediction {
    let has_even = pert
        .coefficients()
        .iter()
        .any(|(&d, &a)| d > 0 && d % 2 == 0 && a != 0.0);
    if !has_even {
        return CyclePrediction::IdenticallyZero;
    }
    let i = |h: f64| abelian_integral(pert, h);
    let ratio = (SCAN_HI / SCAN_LO).ln() / (SCAN_POINTS - 1) as f64;
    let mut roots = Vec::new();
    let mut prev_h = SCAN_LO;
    let mut prev = i(prev_h);
    for k in 1..SCAN_POINTS {
        let h = SCAN_LO * (ratio * k as f64).exp();
        let cur = i(h);
        if cur == 0.0 {
            roots.push(h);
        } else if prev != 0.0 && prev.signum() != cur.signum() {
            roots.push(bisect(&i, prev_h, h, prev));
        }
        prev_h = h;
        prev = cur;
    }
    if roots.is_empty() {
        CyclePrediction::NoPositiveRoot
    } else {
        CyclePrediction::Radii { roots }
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
