//! Generalized Robbins-Monro schemes behind one step interface.

mod adaptive;
mod first_order;
mod runner;
mod second_order;
mod wrappers;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use adaptive::{adam_step, AdamMoments, AdamParams};
pub use first_order::{peg_step, ppm_step, seg_step, sgda_step, spsa_step, PpmOptions};
pub use runner::{run, run_observed, RunOptions, RunStats, RunSummary, DIVERGENCE_THRESHOLD};
pub use second_order::{second_order_field, second_order_step, SecondOrderKind};
pub use wrappers::{alternating_step, averaged_step, AlternatingParts};

use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::point::Point;
use crate::problems::Problem;
use crate::schedule::StepValue;

/// Result of one scheme step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: Point,
    /// The realized signal `v_n`; `next = z + γ·signal` for unwrapped
    /// first-order schemes.
    pub signal: DVector<f64>,
    /// Systematic error `b_n`, when it is available in closed form.
    pub bias_estimate: Option<DVector<f64>>,
    pub queries_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Sgda,
    Ppm,
    Seg,
    /// Optimistic gradient / past extragradient.
    Peg,
    Spsa,
    Hd,
    Sga { lambda: f64 },
    Cono { lambda: f64 },
    Adam(AdamParams),
    ExtraAdam(AdamParams),
}

impl SchemeKind {
    pub const NAMES: [&'static str; 10] = [
        "sgda",
        "ppm",
        "seg",
        "peg",
        "spsa",
        "hd",
        "sga",
        "cono",
        "adam",
        "extra-adam",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Sgda => "sgda",
            SchemeKind::Ppm => "ppm",
            SchemeKind::Seg => "seg",
            SchemeKind::Peg => "peg",
            SchemeKind::Spsa => "spsa",
            SchemeKind::Hd => "hd",
            SchemeKind::Sga { .. } => "sga",
            SchemeKind::Cono { .. } => "cono",
            SchemeKind::Adam(_) => "adam",
            SchemeKind::ExtraAdam(_) => "extra-adam",
        }
    }

    /// First-order schemes in the sense of the wrapper lemmas.
    pub fn is_first_order(&self) -> bool {
        matches!(
            self,
            SchemeKind::Sgda | SchemeKind::Ppm | SchemeKind::Seg | SchemeKind::Peg | SchemeKind::Spsa
        )
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SchemeKind::Sga { lambda } | SchemeKind::Cono { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")))
            }
            SchemeKind::Adam(p) | SchemeKind::ExtraAdam(p) => {
                for (name, b) in [("beta1", p.beta1), ("beta2", p.beta2)] {
                    if !(0.0..1.0).contains(&b) {
                        return Err(Error::invalid(name, format!("must lie in [0, 1), got {b}")));
                    }
                }
                if !(p.stabilizer > 0.0) {
                    return Err(Error::invalid("stabilizer", "must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wrapper {
    /// `z⁺ = α·(base step) + (1 - α)·z`.
    Averaged(f64),
    /// `k1` min-block updates, then `k2` max-block updates, at a fixed step.
    Alternating([u32; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrapper: Option<Wrapper>,
}

impl SchemeSpec {
    pub fn plain(kind: SchemeKind) -> Self {
        Self { kind, wrapper: None }
    }

    pub fn averaged(kind: SchemeKind, alpha: f64) -> Self {
        Self {
            kind,
            wrapper: Some(Wrapper::Averaged(alpha)),
        }
    }

    pub fn alternating(kind: SchemeKind, k1: u32, k2: u32) -> Self {
        Self {
            kind,
            wrapper: Some(Wrapper::Alternating([k1, k2])),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        match self.wrapper {
            Some(Wrapper::Averaged(a)) if !(a > 0.0 && a < 1.0) => {
                Err(Error::invalid("alpha", format!("must lie in (0, 1), got {a}")))
            }
            Some(Wrapper::Alternating([k1, k2])) if k1 == 0 || k2 == 0 => {
                Err(Error::invalid("alternating", "k1 and k2 must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Per-trajectory carry of a scheme: the last oracle answer for the
/// optimistic scheme and the moment accumulators for the adaptive ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemeState {
    pub carried: Option<DVector<f64>>,
    pub moments: Option<AdamMoments>,
}

/// A scheme instance driving one trajectory.
#[derive(Debug, Clone)]
pub struct Scheme {
    spec: SchemeSpec,
    state: SchemeState,
    ppm: PpmOptions,
}

impl Scheme {
    pub fn new(spec: SchemeSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            state: SchemeState::default(),
            ppm: PpmOptions::default(),
        })
    }

    pub fn with_ppm_options(mut self, opts: PpmOptions) -> Self {
        self.ppm = opts;
        self
    }

    pub fn spec(&self) -> &SchemeSpec {
        &self.spec
    }

    pub fn state(&self) -> &SchemeState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = SchemeState::default();
    }

    /// The unwrapped update rule.
    pub(crate) fn base_step(
        &mut self,
        problem: &dyn Problem,
        z: &Point,
        step: StepValue,
        stream: &mut NoiseStream,
    ) -> Result<StepOutcome> {
        let gamma = step.gamma;
        match self.spec.kind {
            SchemeKind::Sgda => Ok(sgda_step(problem, z, gamma, stream)),
            SchemeKind::Ppm => ppm_step(problem, z, gamma, self.ppm),
            SchemeKind::Seg => Ok(seg_step(problem, z, gamma, stream)),
            SchemeKind::Peg => Ok(peg_step(problem, z, gamma, stream, &mut self.state.carried)),
            SchemeKind::Spsa => {
                let delta = step.delta.ok_or_else(|| {
                    Error::invalid("sampling_radius", "SPSA needs a schedule with a sampling radius")
                })?;
                spsa_step(problem, z, gamma, delta, stream)
            }
            SchemeKind::Hd => second_order_step(problem, z, gamma, SecondOrderKind::Hamiltonian, stream),
            SchemeKind::Sga { lambda } => second_order_step(
                problem,
                z,
                gamma,
                SecondOrderKind::SymplecticAdjustment { lambda },
                stream,
            ),
            SchemeKind::Cono { lambda } => {
                second_order_step(problem, z, gamma, SecondOrderKind::Consensus { lambda }, stream)
            }
            SchemeKind::Adam(p) | SchemeKind::ExtraAdam(p) => {
                let extra = matches!(self.spec.kind, SchemeKind::ExtraAdam(_));
                let moments = self
                    .state
                    .moments
                    .get_or_insert_with(|| AdamMoments::zeros(z.dim()));
                Ok(adam_step(problem, z, gamma, &p, stream, moments, extra))
            }
        }
    }

    /// One (possibly wrapped) iteration at step `γ_n`.
    pub fn step(
        &mut self,
        problem: &dyn Problem,
        z: &Point,
        step: StepValue,
        stream: &mut NoiseStream,
    ) -> Result<StepOutcome> {
        match self.spec.wrapper {
            None => self.base_step(problem, z, step, stream),
            Some(Wrapper::Averaged(alpha)) => averaged_step(self, problem, z, step, alpha, stream),
            Some(Wrapper::Alternating([k1, k2])) => {
                alternating_step(self, problem, z, step, k1, k2, stream).map(|(out, _)| out)
            }
        }
    }
}
