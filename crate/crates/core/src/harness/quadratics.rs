//! Step-size tuning by spectral radius on the two 2D quadratic games,
//! followed by simulation of the tuned methods.

use super::config::{ProblemSpec, RunConfig, Wrapper};
use super::run::{run, Series};
use crate::error::Result;
use crate::optimizers::{Method, StepSizes, Variant};
use crate::problems::{GameProblem, Quadratic2D};
use crate::spectral::{grid, spectrum, tune_by_spectral_radius, OperatorSpec, SpectrumReport};

/// Step-size grid `0.01, 0.02, …, 2.0`.
pub fn eta_grid() -> Vec<f64> {
    grid(0.01, 2.0, 0.01)
}

pub const LA_KS: std::ops::RangeInclusive<u32> = 1..=20;

pub fn alpha_grid() -> Vec<f64> {
    grid(0.05, 1.0, 0.05)
}

#[derive(Debug, Clone)]
pub struct Tuned {
    pub eta: StepSizes,
    /// `(k, α)` for lookahead, `None` for the bare method.
    pub lookahead: Option<(u32, f64)>,
    pub spec: OperatorSpec,
    pub report: SpectrumReport,
}

impl Tuned {
    fn new(eta: StepSizes, lookahead: Option<(u32, f64)>, problem: &GameProblem) -> Result<Self> {
        let base = OperatorSpec::GdaSim { eta };
        let spec = match lookahead {
            Some((k, alpha)) => OperatorSpec::lookahead(base, k, alpha),
            None => base,
        };
        let report = spectrum(&spec, problem)?;
        Ok(Self {
            eta,
            lookahead,
            spec,
            report,
        })
    }

    pub fn rho(&self) -> f64 {
        self.report.spectral_radius
    }

    /// Contraction per base update, `ρ^(1/k)`.
    pub fn rate_per_update(&self) -> f64 {
        let k = self.lookahead.map_or(1, |(k, _)| k);
        self.rho().powf(1.0 / k as f64)
    }

    pub fn method(&self) -> Method {
        let eta_phi = (self.eta.phi != self.eta.theta).then_some(self.eta.phi);
        Method::Gda {
            eta: self.eta.theta,
            eta_phi,
            variant: Variant::Simultaneous,
            ratio: 1,
        }
    }

    pub fn config(&self, problem: ProblemSpec, budget: f64) -> RunConfig {
        let mut c = RunConfig::new(problem, self.method(), budget);
        c.eval_stride = 1.0;
        if let Some((k, alpha)) = self.lookahead {
            c = c.with_wrapper(Wrapper::lookahead(k.into(), alpha));
        }
        c
    }
}

/// Best lookahead `(k, α)` over [`LA_KS`] × [`alpha_grid`] around a fixed
/// base step, ranked by contraction per base update. `(1, 1)` is in the
/// grid and reproduces the base method, so the result is never worse.
pub fn tune_lookahead(problem: &GameProblem, eta: StepSizes) -> Result<Tuned> {
    let mut best: Option<Tuned> = None;
    for k in LA_KS {
        for &alpha in &alpha_grid() {
            let t = Tuned::new(eta, Some((k, alpha)), problem)?;
            if best
                .as_ref()
                .is_none_or(|b| t.rate_per_update() < b.rate_per_update())
            {
                best = Some(t);
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[derive(Debug, Clone)]
pub struct QuadraticStudy {
    /// Best shared step on QP-1 and whether every grid point diverges.
    pub qp1_shared: Tuned,
    pub qp1_shared_all_diverge: bool,
    pub qp1_gda: Tuned,
    pub qp1_lagda: Tuned,
    pub qp2_gda: Tuned,
    pub qp2_lagda: Tuned,
}

pub fn study() -> Result<QuadraticStudy> {
    let qp1 = GameProblem::from(Quadratic2D::QP1);
    let qp2 = GameProblem::from(Quadratic2D::QP2);

    let mut all_diverge = true;
    for &eta in &eta_grid() {
        all_diverge &= spectrum(
            &OperatorSpec::GdaSim {
                eta: StepSizes::shared(eta),
            },
            &qp1,
        )?
        .spectral_radius
            > 1.0;
    }
    let (p, _, _) = tune_by_spectral_radius(&qp1, &[eta_grid()], |p| OperatorSpec::GdaSim {
        eta: StepSizes::shared(p[0]),
    })?;
    let qp1_shared = Tuned::new(StepSizes::shared(p[0]), None, &qp1)?;

    let (p, _, _) =
        tune_by_spectral_radius(&qp1, &[eta_grid(), eta_grid()], |p| OperatorSpec::GdaSim {
            eta: StepSizes {
                theta: p[0],
                phi: p[1],
            },
        })?;
    let qp1_gda = Tuned::new(
        StepSizes {
            theta: p[0],
            phi: p[1],
        },
        None,
        &qp1,
    )?;
    let qp1_lagda = tune_lookahead(&qp1, qp1_gda.eta)?;

    let qp2_gda = Tuned::new(StepSizes::shared(2.0 / 29.0), None, &qp2)?;
    let qp2_lagda = tune_lookahead(&qp2, qp2_gda.eta)?;

    Ok(QuadraticStudy {
        qp1_shared,
        qp1_shared_all_diverge: all_diverge,
        qp1_gda,
        qp1_lagda,
        qp2_gda,
        qp2_lagda,
    })
}

impl QuadraticStudy {
    /// Labelled run configs for every tuned method.
    pub fn jobs(&self, budget: f64) -> Vec<(String, RunConfig, &Tuned)> {
        let qp1 = ProblemSpec::quadratic(Quadratic2D::QP1);
        let qp2 = ProblemSpec::quadratic(Quadratic2D::QP2);
        vec![
            (
                "qp1-gda-shared".into(),
                self.qp1_shared.config(qp1.clone(), budget),
                &self.qp1_shared,
            ),
            (
                "qp1-gda".into(),
                self.qp1_gda.config(qp1.clone(), budget),
                &self.qp1_gda,
            ),
            (
                "qp1-lagda".into(),
                self.qp1_lagda.config(qp1, budget),
                &self.qp1_lagda,
            ),
            (
                "qp2-gda".into(),
                self.qp2_gda.config(qp2.clone(), budget),
                &self.qp2_gda,
            ),
            (
                "qp2-lagda".into(),
                self.qp2_lagda.config(qp2, budget),
                &self.qp2_lagda,
            ),
        ]
    }
}

/// Updates until the normalized fast distance first drops below `threshold`.
pub fn updates_to_reach(config: &RunConfig, threshold: f64) -> Result<Option<u64>> {
    let out = run(config)?;
    let hit = out
        .trajectory
        .series(Series::Fast)
        .find(|r| r.distance < threshold)
        .map(|r| r.update);
    Ok(hit)
}
