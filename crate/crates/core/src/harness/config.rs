use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lookahead::AverageMode;
use crate::optimizers::Method;
use crate::problems::{Bilinear2D, GameProblem, Quadratic2D, StochasticBilinear};

/// Problem section of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Bilinear2d,
    Quadratic2d {
        a: f64,
        b: f64,
        c: f64,
    },
    /// `seed` is the data seed; it is shifted together with the run seed in
    /// multi-seed runs so each replicate draws fresh data.
    StochasticBilinear {
        n: usize,
        d: usize,
        seed: u64,
    },
}

impl ProblemSpec {
    pub fn sbg(seed: u64) -> Self {
        ProblemSpec::StochasticBilinear {
            n: 100,
            d: 100,
            seed,
        }
    }

    pub fn quadratic(q: Quadratic2D) -> Self {
        ProblemSpec::Quadratic2d {
            a: q.a,
            b: q.b,
            c: q.c,
        }
    }

    pub fn build(&self) -> Result<GameProblem> {
        Ok(match *self {
            ProblemSpec::Bilinear2d => Bilinear2D.into(),
            ProblemSpec::Quadratic2d { a, b, c } => Quadratic2D { a, b, c }.into(),
            ProblemSpec::StochasticBilinear { n, d, seed } => {
                StochasticBilinear::new(n, d, seed)?.into()
            }
        })
    }

    pub fn data_seed(&self) -> Option<u64> {
        match *self {
            ProblemSpec::StochasticBilinear { seed, .. } => Some(seed),
            _ => None,
        }
    }
}

/// Lookahead wrapper around the base method.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Wrapper {
    #[default]
    None,
    Lookahead {
        k: u64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_phi: Option<f64>,
    },
    Nested {
        k_s: u64,
        k_ss: u64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_phi: Option<f64>,
    },
    /// Per-player lookahead; GDA base only.
    Alternating {
        k_theta: u64,
        k_phi: u64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_phi: Option<f64>,
    },
}

impl Wrapper {
    pub fn lookahead(k: u64, alpha: f64) -> Self {
        Wrapper::Lookahead {
            k,
            alpha,
            alpha_phi: None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Wrapper::None)
    }

    pub fn alphas(&self) -> (f64, f64) {
        match *self {
            Wrapper::None => (1.0, 1.0),
            Wrapper::Lookahead {
                alpha, alpha_phi, ..
            }
            | Wrapper::Nested {
                alpha, alpha_phi, ..
            }
            | Wrapper::Alternating {
                alpha, alpha_phi, ..
            } => (alpha, alpha_phi.unwrap_or(alpha)),
        }
    }
}

/// Which iterate an averaging tracker reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Every base update.
    #[default]
    Fast,
    /// The slow weights, once per backtrack.
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerSpec {
    #[serde(flatten)]
    pub average: AverageMode,
    #[serde(default)]
    pub source: Source,
}

impl TrackerSpec {
    pub fn ema(beta: f64, source: Source) -> Self {
        Self {
            average: AverageMode::Ema { beta },
            source,
        }
    }

    pub fn uma(source: Source) -> Self {
        Self {
            average: AverageMode::Uma,
            source,
        }
    }
}

fn default_stride() -> f64 {
    10.0
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Preset this config came from, if any. Informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Run seed: initialization, minibatch order and method-internal draws.
    #[serde(default)]
    pub seed: u64,
    /// Minibatch size; absent means full batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    pub budget_passes: f64,
    #[serde(default = "default_stride")]
    pub eval_stride: f64,
    /// Divide distances by the initial distance.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub normalize: bool,
    /// Explicit starting point `(θ, φ)`; drawn from the run seed if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<f64>>,
    pub problem: ProblemSpec,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Wrapper::is_none")]
    pub wrapper: Wrapper,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trackers: Vec<TrackerSpec>,
}

impl RunConfig {
    pub fn new(problem: ProblemSpec, method: Method, budget_passes: f64) -> Self {
        Self {
            preset: None,
            seed: 0,
            batch_size: None,
            budget_passes,
            eval_stride: default_stride(),
            normalize: true,
            init: None,
            problem,
            method,
            wrapper: Wrapper::None,
            trackers: Vec::new(),
        }
    }

    pub fn with_wrapper(mut self, wrapper: Wrapper) -> Self {
        self.wrapper = wrapper;
        self
    }

    pub fn with_batch(mut self, batch_size: Option<usize>) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_tracker(mut self, tracker: TrackerSpec) -> Self {
        self.trackers.push(tracker);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// The `offset`-th replicate: run seed and data seed both shift by `offset`.
    pub fn replicate(&self, offset: u64) -> Self {
        let mut c = self.clone();
        c.seed = self.seed.wrapping_add(offset);
        if let ProblemSpec::StochasticBilinear { seed, .. } = &mut c.problem {
            *seed = seed.wrapping_add(offset);
        }
        c
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<GameProblem> {
        let problem = self.problem.build()?;
        if !(self.budget_passes.is_finite() && self.budget_passes >= 0.0) {
            return Err(Error::Config(format!(
                "budget_passes must be finite and ≥ 0, got {}",
                self.budget_passes
            )));
        }
        if !(self.eval_stride.is_finite() && self.eval_stride > 0.0) {
            return Err(Error::Config(format!(
                "eval_stride must be finite and > 0, got {}",
                self.eval_stride
            )));
        }
        match (self.batch_size, problem.sample_count()) {
            (Some(0), _) => return Err(Error::Config("batch_size must be ≥ 1".into())),
            (Some(_), None) => {
                return Err(Error::Unsupported(format!(
                    "{} has no samples to batch over",
                    problem.name()
                )));
            }
            _ => {}
        }
        self.method.validate(&problem, self.batch_size)?;
        if let Some(init) = &self.init {
            if init.len() != problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: problem.dim(),
                    got: init.len(),
                });
            }
            if !init.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite("init"));
            }
        }
        if let Wrapper::Alternating { .. } = self.wrapper {
            if !matches!(self.method, Method::Gda { .. }) {
                return Err(Error::Unsupported(
                    "per-player lookahead is implemented for GDA only".into(),
                ));
            }
        }
        let mut tags: Vec<&str> = Vec::new();
        for t in &self.trackers {
            if t.source == Source::Slow && self.wrapper.is_none() {
                return Err(Error::Config(
                    "a slow-weight tracker needs a lookahead wrapper".into(),
                ));
            }
            let tag = super::Series::of_tracker(t).tag();
            if tags.contains(&tag) {
                return Err(Error::Config(format!("duplicate tracker series `{tag}`")));
            }
            tags.push(tag);
        }
        Ok(problem)
    }
}
