//! The problem zoo: objectives `f(x, y)`, their min-max fields
//! `V = (-∇_x f, ∇_y f)`, Jacobians, and the stochastic oracles built on them.

mod almost_bilinear;
mod bilinear;
mod forsaken;
mod gradient_well;
mod oracle;
mod wac;

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use almost_bilinear::{AlmostBilinear, PolynomialPerturbation};
pub use bilinear::Bilinear;
pub use forsaken::Forsaken;
pub use gradient_well::GradientWell;
pub use oracle::{sfo_query, spsa_estimate_for_seed, spsa_query, OracleSample};
pub use wac::{check_wac, WacReport};

use crate::error::{Error, Result};
use crate::point::Point;

pub trait Problem: Debug + Send + Sync {
    fn label(&self) -> &str;

    /// Size of the minimizing block.
    fn d1(&self) -> usize;

    /// Size of the maximizing block.
    fn d2(&self) -> usize;

    fn dim(&self) -> usize {
        self.d1() + self.d2()
    }

    /// `f(z)`, or `None` when the field is not the min-max field of any
    /// objective (pure gradient systems).
    fn objective(&self, z: &DVector<f64>) -> Option<f64>;

    fn field(&self, z: &DVector<f64>) -> DVector<f64>;

    /// Jacobian of the field.
    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64>;

    /// Hessian of the objective, when it exists.
    fn hessian_objective(&self, _z: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// `∇f(z)`, recovered from the field as `(-V_x, V_y)`.
    fn objective_gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = self.field(z);
        for i in 0..self.d1() {
            g[i] = -g[i];
        }
        g
    }

    /// True when the field is affine (constant Jacobian).
    fn is_affine(&self) -> bool {
        false
    }

    /// True for fields of the form `V = -∇g`.
    fn is_gradient_system(&self) -> bool {
        false
    }

    /// Potential `g` with `V = -∇g`, for gradient systems.
    fn potential(&self, _z: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Critical points known in closed form.
    fn known_critical_points(&self) -> Vec<Point> {
        Vec::new()
    }

    fn point(&self, coords: Vec<f64>) -> Result<Point> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        Point::new(coords, self.d1())
    }
}

/// Serializable description of a zoo problem, addressed by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Bilinear,
    AlmostBilinear {
        epsilon: f64,
        /// Degree -> coefficient of `φ`; defaults to `½y² - ¼y⁴`.
        #[serde(default = "default_coefficients")]
        coefficients: BTreeMap<String, f64>,
    },
    Forsaken,
    GradientWell {
        #[serde(default = "one")]
        radius: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_coefficients() -> BTreeMap<String, f64> {
    PolynomialPerturbation::default_quartic(0.0).coefficient_map()
}

impl ProblemSpec {
    pub const LABELS: [&'static str; 4] = ["bilinear", "almost-bilinear", "forsaken", "gradient-well"];

    pub fn build(&self) -> Result<Arc<dyn Problem>> {
        Ok(match self {
            ProblemSpec::Bilinear => Arc::new(make_bilinear()),
            ProblemSpec::AlmostBilinear {
                epsilon,
                coefficients,
            } => Arc::new(make_almost_bilinear(PolynomialPerturbation::from_coefficient_map(
                coefficients,
                *epsilon,
            )?)),
            ProblemSpec::Forsaken => Arc::new(make_forsaken()),
            ProblemSpec::GradientWell { radius } => Arc::new(GradientWell::new(*radius)?),
        })
    }
}

pub fn make_bilinear() -> Bilinear {
    Bilinear
}

pub fn make_almost_bilinear(perturbation: PolynomialPerturbation) -> AlmostBilinear {
    AlmostBilinear::new(perturbation)
}

pub fn make_forsaken() -> Forsaken {
    Forsaken
}

/// Gradient system with a ring of minima of `g(z) = ¼‖z‖⁴ - ½ρ²‖z‖²` at
/// `‖z‖ = ρ`.
pub fn make_gradient_test(radius: f64) -> Result<GradientWell> {
    GradientWell::new(radius)
}
