//! Base update rules for two-player games.
//!
//! Every rule is written as descent on each player's own loss and draws its
//! gradients through an [`Oracle`], which is also where the pass accounting
//! happens: each [`Oracle::sample`] charges one query of the current batch
//! size, however many points that batch is then evaluated at.

mod adam;
mod eg;
mod gda;
mod ogda;
mod svre;
mod unroll;

pub use adam::{adam_direction, extra_adam_step, AdamState};
pub use eg::eg_step;
pub use gda::{gda_step_alternating, gda_step_simultaneous};
pub use ogda::{ogda_step, OgdaState};
pub use svre::{corrected_jvf, svre_epoch, SvreState};
pub use unroll::{unroll_step, UnrollMode};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problems::{Batch, BatchSampler, GameProblem, JointPoint};
use crate::rng::Rng;

/// Gradient source for one run: problem, minibatch stream and query counter.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    problem: &'a GameProblem,
    sampler: BatchSampler,
    batch: Option<Vec<usize>>,
    queries: u64,
    samples_per_pass: u64,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a GameProblem, sampler: BatchSampler) -> Self {
        let samples_per_pass = problem.sample_count().unwrap_or(1) as u64;
        Self {
            problem,
            sampler,
            batch: None,
            queries: 0,
            samples_per_pass,
        }
    }

    /// Deterministic oracle that always uses the full batch.
    pub fn full(problem: &'a GameProblem) -> Self {
        Self::new(problem, BatchSampler::Full)
    }

    pub fn problem(&self) -> &'a GameProblem {
        self.problem
    }

    pub fn is_stochastic(&self) -> bool {
        self.sampler.batch_size().is_some()
    }

    /// Draws the next minibatch and charges it.
    pub fn sample(&mut self) {
        match self.sampler.next_batch() {
            Batch::Full => {
                self.batch = None;
                self.queries += self.samples_per_pass;
            }
            Batch::Samples(idx) => {
                self.queries += idx.len() as u64;
                match &mut self.batch {
                    Some(b) => {
                        b.clear();
                        b.extend_from_slice(idx);
                    }
                    None => self.batch = Some(idx.to_vec()),
                }
            }
        }
    }

    /// Switches to the full batch and charges one pass.
    pub fn sample_full(&mut self) {
        self.batch = None;
        self.queries += self.samples_per_pass;
    }

    fn batch(&self) -> Batch<'_> {
        match &self.batch {
            None => Batch::Full,
            Some(b) => Batch::Samples(b),
        }
    }

    /// Joint vector field on the current batch.
    pub fn jvf(&self, point: &JointPoint, out: &mut [f64]) -> Result<()> {
        self.problem.jvf_into(point, self.batch(), out)
    }

    pub fn grad_theta(&self, theta: &[f64], phi: &[f64], out: &mut [f64]) -> Result<()> {
        self.problem.grad_theta_into(theta, phi, self.batch(), out)
    }

    pub fn grad_phi(&self, theta: &[f64], phi: &[f64], out: &mut [f64]) -> Result<()> {
        self.problem.grad_phi_into(theta, phi, self.batch(), out)
    }

    /// Sample-gradient evaluations charged so far.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn samples_per_pass(&self) -> u64 {
        self.samples_per_pass
    }

    pub fn passes(&self) -> f64 {
        self.queries as f64 / self.samples_per_pass as f64
    }
}

/// `x ← x − η·g`
pub(crate) fn descend(x: &mut [f64], eta: f64, g: &[f64]) {
    x.iter_mut().zip(g).for_each(|(x, g)| *x -= eta * g);
}

/// Per-player descent on a joint vector.
pub(crate) fn descend_joint(x: &mut JointPoint, eta: StepSizes, g: &[f64]) {
    let d = x.d_theta();
    let (t, p) = x.split_mut();
    descend(t, eta.theta, &g[..d]);
    descend(p, eta.phi, &g[d..]);
}

/// Step sizes for the two players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub theta: f64,
    pub phi: f64,
}

impl StepSizes {
    pub fn shared(eta: f64) -> Self {
        Self {
            theta: eta,
            phi: eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for eta in [self.theta, self.phi] {
            if !eta.is_finite() || eta < 0.0 {
                return Err(invalid(format!(
                    "step size must be finite and ≥ 0, got {eta}"
                )));
            }
        }
        Ok(())
    }
}

/// Whether the players move at the same time or one after the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Simultaneous,
    /// `φ` is updated `ratio` times, then `θ` once against the new `φ`.
    Alternating,
}

fn one() -> usize {
    1
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

fn is_one(r: &usize) -> bool {
    *r == 1
}

/// Base optimizer and its hyperparameters, as written in a run config.
///
/// `eta` applies to both players unless `eta_phi` overrides the max player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    Gda {
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_phi: Option<f64>,
        variant: Variant,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        ratio: usize,
    },
    Eg {
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_phi: Option<f64>,
    },
    Ogda {
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_phi: Option<f64>,
    },
    Adam {
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_phi: Option<f64>,
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        variant: Variant,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        ratio: usize,
    },
    ExtraAdam {
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_phi: Option<f64>,
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    Svre {
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_phi: Option<f64>,
        restart_prob: f64,
    },
    Unroll {
        eta: f64,
        steps: usize,
        mode: UnrollMode,
        #[serde(default)]
        exact: bool,
    },
}

impl Method {
    pub fn step_sizes(&self) -> StepSizes {
        let (eta, eta_phi) = match *self {
            Method::Gda { eta, eta_phi, .. }
            | Method::Eg { eta, eta_phi }
            | Method::Ogda { eta, eta_phi }
            | Method::Adam { eta, eta_phi, .. }
            | Method::ExtraAdam { eta, eta_phi, .. }
            | Method::Svre { eta, eta_phi, .. } => (eta, eta_phi),
            Method::Unroll { eta, .. } => (eta, None),
        };
        StepSizes {
            theta: eta,
            phi: eta_phi.unwrap_or(eta),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Gda {
                variant: Variant::Simultaneous,
                ..
            } => "gda-sim",
            Method::Gda {
                variant: Variant::Alternating,
                ..
            } => "gda-alt",
            Method::Eg { .. } => "eg",
            Method::Ogda { .. } => "ogda",
            Method::Adam { .. } => "adam",
            Method::ExtraAdam { .. } => "extra-adam",
            Method::Svre { .. } => "svre",
            Method::Unroll {
                mode: UnrollMode::Y,
                ..
            } => "unroll-y",
            Method::Unroll {
                mode: UnrollMode::Xy,
                ..
            } => "unroll-xy",
        }
    }

    /// Rejects out-of-range hyperparameters and method/problem mismatches.
    pub fn validate(&self, problem: &GameProblem, batch_size: Option<usize>) -> Result<()> {
        self.step_sizes().validate()?;
        match *self {
            Method::Gda { ratio, .. } | Method::Adam { ratio, .. } if ratio == 0 => {
                return Err(invalid("update ratio must be ≥ 1"));
            }
            _ => {}
        }
        if let Method::Adam {
            beta1, beta2, eps, ..
        }
        | Method::ExtraAdam {
            beta1, beta2, eps, ..
        } = *self
        {
            AdamState::check_hypers(beta1, beta2, eps)?;
        }
        match *self {
            Method::Svre { restart_prob, .. } => {
                if !(0.0..=1.0).contains(&restart_prob) {
                    return Err(invalid(format!(
                        "restart probability must be in [0, 1], got {restart_prob}"
                    )));
                }
                if !problem.is_finite_sum() {
                    return Err(Error::Unsupported(format!(
                        "SVRE needs a finite-sum problem, {} is deterministic",
                        problem.name()
                    )));
                }
            }
            Method::Unroll {
                exact: true,
                mode: UnrollMode::Xy,
                ..
            } => {
                return Err(Error::Unsupported("Unroll-XY is approximate only".into()));
            }
            Method::Unroll { exact: true, .. } => {
                let stochastic =
                    matches!((problem.sample_count(), batch_size), (Some(n), Some(b)) if b < n);
                if stochastic {
                    return Err(Error::Unsupported(
                        "exact unrolling needs full-batch gradients".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Mutable per-run state of a base optimizer.
#[derive(Debug, Clone)]
pub enum BaseOptimizer {
    Gda {
        eta: StepSizes,
        variant: Variant,
        ratio: usize,
    },
    Eg {
        eta: StepSizes,
    },
    Ogda {
        eta: StepSizes,
        state: OgdaState,
    },
    Adam {
        eta: StepSizes,
        variant: Variant,
        ratio: usize,
        theta: AdamState,
        phi: AdamState,
    },
    ExtraAdam {
        eta: StepSizes,
        theta: AdamState,
        phi: AdamState,
    },
    Svre {
        eta: StepSizes,
        state: Box<SvreState>,
    },
    Unroll {
        eta: f64,
        steps: usize,
        mode: UnrollMode,
        exact: bool,
    },
}

impl BaseOptimizer {
    /// Builds fresh state for `method` starting at `point`. `rng` feeds
    /// method-internal randomness (SVRE restarts and epoch lengths).
    pub fn new(
        method: &Method,
        problem: &GameProblem,
        point: &JointPoint,
        batch_size: Option<usize>,
        rng: Rng,
    ) -> Result<Self> {
        method.validate(problem, batch_size)?;
        problem.check_point(point)?;
        let eta = method.step_sizes();
        let (dt, dp) = (problem.d_theta(), problem.d_phi());
        Ok(match *method {
            Method::Gda { variant, ratio, .. } => BaseOptimizer::Gda {
                eta,
                variant,
                ratio,
            },
            Method::Eg { .. } => BaseOptimizer::Eg { eta },
            Method::Ogda { .. } => BaseOptimizer::Ogda {
                eta,
                state: OgdaState::new(dt + dp),
            },
            Method::Adam {
                beta1,
                beta2,
                eps,
                variant,
                ratio,
                ..
            } => BaseOptimizer::Adam {
                eta,
                variant,
                ratio,
                theta: AdamState::new(dt, beta1, beta2, eps)?,
                phi: AdamState::new(dp, beta1, beta2, eps)?,
            },
            Method::ExtraAdam {
                beta1, beta2, eps, ..
            } => BaseOptimizer::ExtraAdam {
                eta,
                theta: AdamState::new(dt, beta1, beta2, eps)?,
                phi: AdamState::new(dp, beta1, beta2, eps)?,
            },
            Method::Svre { restart_prob, .. } => BaseOptimizer::Svre {
                eta,
                state: Box::new(SvreState::new(problem, point, restart_prob, rng)?),
            },
            Method::Unroll {
                eta,
                steps,
                mode,
                exact,
            } => BaseOptimizer::Unroll {
                eta,
                steps,
                mode,
                exact,
            },
        })
    }

    /// One both-player update, the unit counted by lookahead.
    pub fn step(&mut self, point: &mut JointPoint, oracle: &mut Oracle<'_>) -> Result<()> {
        match self {
            BaseOptimizer::Gda {
                eta,
                variant: Variant::Simultaneous,
                ..
            } => gda_step_simultaneous(oracle, point, *eta),
            BaseOptimizer::Gda {
                eta,
                variant: Variant::Alternating,
                ratio,
            } => gda_step_alternating(oracle, point, *eta, *ratio),
            BaseOptimizer::Eg { eta } => eg_step(oracle, point, *eta),
            BaseOptimizer::Ogda { eta, state } => ogda_step(oracle, point, state, *eta),
            BaseOptimizer::Adam {
                eta,
                variant,
                ratio,
                theta,
                phi,
            } => adam::adam_step(oracle, point, theta, phi, *eta, *variant, *ratio),
            BaseOptimizer::ExtraAdam { eta, theta, phi } => {
                extra_adam_step(oracle, point, theta, phi, *eta)
            }
            BaseOptimizer::Svre { eta, state } => state.step(oracle, point, *eta),
            BaseOptimizer::Unroll {
                eta,
                steps,
                mode,
                exact,
            } => unroll_step(oracle, point, *eta, *steps, *mode, *exact),
        }
    }
}

/// Cost of one method in passes, derived from the query schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassCost {
    /// Passes per both-player update.
    pub per_update: f64,
    /// Extra passes per SVRE snapshot refresh.
    pub per_snapshot: f64,
}

/// Passes per update of `method` with minibatches of `batch_size` out of `n`
/// samples (`None` for full batch). A query of `B` samples costs `B/n`.
pub fn pass_accounting(method: &Method, batch_size: Option<usize>, n: usize) -> PassCost {
    let q = batch_size.map_or(1.0, |b| b.min(n) as f64 / n as f64);
    let (queries, snapshot) = match *method {
        Method::Gda {
            variant: Variant::Simultaneous,
            ..
        }
        | Method::Adam {
            variant: Variant::Simultaneous,
            ..
        } => (1.0, 0.0),
        Method::Gda {
            variant: Variant::Alternating,
            ratio,
            ..
        }
        | Method::Adam {
            variant: Variant::Alternating,
            ratio,
            ..
        } => (ratio as f64 + 1.0, 0.0),
        Method::Ogda { .. } => (1.0, 0.0),
        Method::Eg { .. } | Method::ExtraAdam { .. } => (2.0, 0.0),
        Method::Svre { .. } => (2.0, 1.0),
        Method::Unroll {
            steps,
            mode: UnrollMode::Y,
            ..
        } => (steps as f64 + 1.0, 0.0),
        Method::Unroll {
            steps,
            mode: UnrollMode::Xy,
            ..
        } => (2.0 * steps as f64 + 1.0, 0.0),
    };
    PassCost {
        per_update: queries * q,
        per_snapshot: snapshot,
    }
}
