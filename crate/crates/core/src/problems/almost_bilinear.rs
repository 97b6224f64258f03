use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::error::{Error, Result};
use crate::point::Point;

/// `εφ(y)` with `φ(y) = Σ_k a_k y^k`, `k >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPerturbation {
    coefficients: BTreeMap<u32, f64>,
    epsilon: f64,
}

impl PolynomialPerturbation {
    pub fn new(coefficients: BTreeMap<u32, f64>, epsilon: f64) -> Result<Self> {
        if coefficients.contains_key(&0) {
            return Err(Error::invalid("coefficients", "degrees start at 1"));
        }
        if let Some((k, a)) = coefficients.iter().find(|(_, a)| !a.is_finite()) {
            return Err(Error::invalid("coefficients", format!("a_{k} = {a} is not finite")));
        }
        if !epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be finite"));
        }
        Ok(Self {
            coefficients,
            epsilon,
        })
    }

    pub fn from_terms(terms: &[(u32, f64)], epsilon: f64) -> Result<Self> {
        Self::new(terms.iter().copied().collect(), epsilon)
    }

    /// `φ(y) = ½y² - ¼y⁴`.
    pub fn default_quartic(epsilon: f64) -> Self {
        Self::from_terms(&[(2, 0.5), (4, -0.25)], epsilon).expect("valid constants")
    }

    /// Parses a degree -> coefficient map with string keys (config files).
    pub fn from_coefficient_map(map: &BTreeMap<String, f64>, epsilon: f64) -> Result<Self> {
        let mut coefficients = BTreeMap::new();
        for (k, a) in map {
            let degree: u32 = k
                .trim()
                .parse()
                .map_err(|_| Error::invalid("coefficients", format!("degree `{k}` is not an integer")))?;
            coefficients.insert(degree, *a);
        }
        Self::new(coefficients, epsilon)
    }

    pub fn coefficient_map(&self) -> BTreeMap<String, f64> {
        self.coefficients.iter().map(|(k, a)| (k.to_string(), *a)).collect()
    }

    pub fn coefficients(&self) -> &BTreeMap<u32, f64> {
        &self.coefficients
    }

    pub fn coefficient(&self, degree: u32) -> f64 {
        self.coefficients.get(&degree).copied().unwrap_or(0.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            coefficients: self.coefficients.clone(),
            epsilon,
        }
    }

    pub fn phi(&self, y: f64) -> f64 {
        self.coefficients.iter().map(|(&k, &a)| a * y.powi(k as i32)).sum()
    }

    pub fn phi_prime(&self, y: f64) -> f64 {
        self.coefficients
            .iter()
            .map(|(&k, &a)| k as f64 * a * y.powi(k as i32 - 1))
            .sum()
    }

    pub fn phi_second(&self, y: f64) -> f64 {
        self.coefficients
            .iter()
            .filter(|(&k, _)| k >= 2)
            .map(|(&k, &a)| (k * (k - 1)) as f64 * a * y.powi(k as i32 - 2))
            .sum()
    }
}

/// `f(x, y) = xy + εφ(y)`, field `(-y, x + εφ'(y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostBilinear {
    perturbation: PolynomialPerturbation,
}

impl AlmostBilinear {
    pub fn new(perturbation: PolynomialPerturbation) -> Self {
        Self { perturbation }
    }

    pub fn perturbation(&self) -> &PolynomialPerturbation {
        &self.perturbation
    }
}

impl Problem for AlmostBilinear {
    fn label(&self) -> &str {
        "almost-bilinear"
    }

    fn d1(&self) -> usize {
        1
    }

    fn d2(&self) -> usize {
        1
    }

    fn objective(&self, z: &DVector<f64>) -> Option<f64> {
        Some(z[0] * z[1] + self.perturbation.epsilon * self.perturbation.phi(z[1]))
    }

    fn field(&self, z: &DVector<f64>) -> DVector<f64> {
        let eps = self.perturbation.epsilon;
        DVector::from_vec(vec![-z[1], z[0] + eps * self.perturbation.phi_prime(z[1])])
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let eps = self.perturbation.epsilon;
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, eps * self.perturbation.phi_second(z[1])])
    }

    fn hessian_objective(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let eps = self.perturbation.epsilon;
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, 1.0, eps * self.perturbation.phi_second(z[1])],
        ))
    }

    fn is_affine(&self) -> bool {
        self.perturbation.epsilon == 0.0
            || self.perturbation.coefficients.iter().all(|(&k, &a)| k <= 2 || a == 0.0)
    }

    fn known_critical_points(&self) -> Vec<Point> {
        // y = 0 forces x = -εφ'(0) = -ε a_1.
        vec![Point::xy(-self.perturbation.epsilon * self.perturbation.coefficient(1), 0.0)]
    }
}
