//! Named configurations for the benchmark settings.
//!
//! Stochastic-bilinear presets use `n = d = 100`, data seed 0, run seed 0,
//! a 2·10⁴-pass budget and the per-batch-size hyperparameter tables. The
//! 2D presets run 1000 passes logged every pass.

use super::config::{ProblemSpec, RunConfig, Wrapper};
use crate::error::{Error, Result};
use crate::optimizers::{Method, UnrollMode, Variant};
use crate::problems::{Bilinear2D, GameProblem, Quadratic2D, StochasticBilinear};
use crate::spectral::OperatorSpec;

pub const SBG_BUDGET: f64 = 2e4;
pub const TOY_BUDGET: f64 = 1000.0;

/// Step size of the full-batch figure unless stated otherwise.
pub const FULL_BATCH_ETA: f64 = 0.3;
/// Unroll depth, lookahead `k` and `α` of the full-batch figure.
pub const FULL_BATCH_UNROLL: usize = 6;
pub const FULL_BATCH_K: u64 = 6;
pub const FULL_BATCH_ALPHA: f64 = 0.5;

/// LA-EG period for the full-batch table setting. Picked by minimizing
/// the per-pass spectral rate of the lookahead operator over `k ≤ 1200`
/// at `η = 0.8, α = 0.5`: 393 EG steps rotate the spectrum by about π.
pub const FULL_BATCH_LAEG_K: u64 = 393;

pub fn gda(eta: f64) -> Method {
    Method::Gda {
        eta,
        eta_phi: None,
        variant: Variant::Simultaneous,
        ratio: 1,
    }
}

pub fn gda_alt(eta: f64) -> Method {
    Method::Gda {
        eta,
        eta_phi: None,
        variant: Variant::Alternating,
        ratio: 1,
    }
}

pub fn eg(eta: f64) -> Method {
    Method::Eg { eta, eta_phi: None }
}

pub fn ogda(eta: f64) -> Method {
    Method::Ogda { eta, eta_phi: None }
}

pub fn adam(eta: f64, beta1: f64) -> Method {
    Method::Adam {
        eta,
        eta_phi: None,
        beta1,
        beta2: 0.999,
        eps: 1e-8,
        variant: Variant::Simultaneous,
        ratio: 1,
    }
}

pub fn extra_adam(eta: f64, beta1: f64) -> Method {
    Method::ExtraAdam {
        eta,
        eta_phi: None,
        beta1,
        beta2: 0.999,
        eps: 1e-8,
    }
}

pub fn svre(eta: f64, restart_prob: f64) -> Method {
    Method::Svre {
        eta,
        eta_phi: None,
        restart_prob,
    }
}

pub fn unroll(eta: f64, steps: usize, mode: UnrollMode) -> Method {
    Method::Unroll {
        eta,
        steps,
        mode,
        exact: false,
    }
}

/// Batch sizes of the stochastic tables, `None` for full batch.
pub const BATCHES: [Option<usize>; 4] = [None, Some(64), Some(16), Some(1)];

pub fn batch_tag(batch: Option<usize>) -> String {
    batch.map_or_else(|| "full".to_string(), |b| format!("b{b}"))
}

/// Tuned hyperparameters of one method at one batch size: base method and
/// optional `(k, α)`.
pub fn tabled(method: &str, batch: Option<usize>) -> Option<(Method, Option<(u64, f64)>)> {
    let row = match (method, batch) {
        ("adam", None) => (adam(0.005, -0.9), None),
        ("adam", Some(64)) => (adam(0.005, -0.6), None),
        ("adam", Some(16)) => (adam(0.005, -0.3), None),
        ("adam", Some(1)) => (adam(0.005, 0.0), None),
        ("extra-adam", None) => (extra_adam(0.02, -0.6), None),
        ("extra-adam", Some(64)) => (extra_adam(0.01, -0.2), None),
        ("extra-adam", Some(16)) => (extra_adam(0.005, 0.0), None),
        ("extra-adam", Some(1)) => (extra_adam(0.005, 0.0), None),
        ("eg", None) => (eg(0.8), None),
        ("eg", Some(64 | 16 | 1)) => (eg(0.005), None),
        ("lagda", None) => (gda(0.2), Some((15, 0.3))),
        ("lagda", Some(64)) => (gda(0.005), Some((450, 0.3))),
        ("lagda", Some(16)) => (gda(0.01), Some((1500, 0.3))),
        ("lagda", Some(1)) => (gda(0.05), Some((2450, 0.3))),
        ("svre", Some(1)) => (svre(0.1, 0.1), None),
        _ => return None,
    };
    Some(row)
}

fn sbg(method: Method, batch: Option<usize>, la: Option<(u64, f64)>) -> RunConfig {
    let c = RunConfig::new(ProblemSpec::sbg(0), method, SBG_BUDGET).with_batch(batch);
    match la {
        Some((k, alpha)) => c.with_wrapper(Wrapper::lookahead(k, alpha)),
        None => c,
    }
}

fn toy(problem: ProblemSpec, method: Method, la: Option<(u64, f64)>) -> RunConfig {
    let mut c = RunConfig::new(problem, method, TOY_BUDGET);
    c.eval_stride = 1.0;
    match la {
        Some((k, alpha)) => c.with_wrapper(Wrapper::lookahead(k, alpha)),
        None => c,
    }
}

/// Every preset name, in listing order.
pub fn names() -> Vec<String> {
    let mut out: Vec<String> = [
        "sbg-full-gda",
        "sbg-full-lagda",
        "sbg-full-eg",
        "sbg-full-laeg",
        "sbg-full-adam",
        "sbg-full-extra-adam",
        "sbg-full-ogda",
        "sbg-full-laogda",
        "sbg-full-unroll-y",
        "sbg-full-unroll-xy",
    ]
    .map(String::from)
    .to_vec();
    for b in [64, 16, 1] {
        for m in ["gda", "adam", "extra-adam", "eg", "lagda"] {
            out.push(format!("sbg-b{b}-{m}"));
        }
    }
    out.push("sbg-b1-svre".into());
    out.extend(
        [
            "bilinear2d-gda-sim",
            "bilinear2d-gda-alt",
            "bilinear2d-eg",
            "bilinear2d-ogda",
            "bilinear2d-lagda",
            "qp1-gda",
            "qp2-gda",
            "qp2-lagda",
        ]
        .map(String::from),
    );
    out
}

/// Looks up a run preset by name.
pub fn preset(name: &str) -> Result<RunConfig> {
    let unknown = || Error::UnknownPreset(name.to_string());
    let mut c = match name {
        "sbg-full-gda" => sbg(gda(FULL_BATCH_ETA), None, None),
        "sbg-full-laeg" => sbg(eg(0.8), None, Some((FULL_BATCH_LAEG_K, FULL_BATCH_ALPHA))),
        "sbg-full-ogda" => sbg(ogda(FULL_BATCH_ETA), None, None),
        "sbg-full-laogda" => sbg(
            ogda(FULL_BATCH_ETA),
            None,
            Some((FULL_BATCH_K, FULL_BATCH_ALPHA)),
        ),
        "sbg-full-unroll-y" => sbg(
            unroll(FULL_BATCH_ETA, FULL_BATCH_UNROLL, UnrollMode::Y),
            None,
            None,
        ),
        "sbg-full-unroll-xy" => sbg(
            unroll(FULL_BATCH_ETA, FULL_BATCH_UNROLL, UnrollMode::Xy),
            None,
            None,
        ),
        // Bare GDA at the LA-GDA step size, the k-sweep baseline.
        "sbg-b64-gda" => sbg(gda(0.005), Some(64), None),
        "sbg-b16-gda" => sbg(gda(0.01), Some(16), None),
        "sbg-b1-gda" => sbg(gda(0.05), Some(1), None),
        "bilinear2d-gda-sim" => toy(ProblemSpec::Bilinear2d, gda(0.3), None),
        "bilinear2d-gda-alt" => toy(ProblemSpec::Bilinear2d, gda_alt(0.3), None),
        "bilinear2d-eg" => toy(ProblemSpec::Bilinear2d, eg(0.3), None),
        "bilinear2d-ogda" => toy(ProblemSpec::Bilinear2d, ogda(0.3), None),
        "bilinear2d-lagda" => toy(
            ProblemSpec::Bilinear2d,
            gda(0.3),
            Some((FULL_BATCH_K, FULL_BATCH_ALPHA)),
        ),
        "qp1-gda" => toy(ProblemSpec::quadratic(Quadratic2D::QP1), gda(0.1), None),
        "qp2-gda" => toy(
            ProblemSpec::quadratic(Quadratic2D::QP2),
            gda(2.0 / 29.0),
            None,
        ),
        "qp2-lagda" => toy(
            ProblemSpec::quadratic(Quadratic2D::QP2),
            gda(2.0 / 29.0),
            Some((2, 0.5)),
        ),
        _ => {
            let rest = name.strip_prefix("sbg-").ok_or_else(unknown)?;
            let (tag, method) = rest.split_once('-').ok_or_else(unknown)?;
            let batch = match tag {
                "full" => None,
                b => Some(
                    b.strip_prefix('b')
                        .and_then(|b| b.parse().ok())
                        .ok_or_else(unknown)?,
                ),
            };
            let (m, la) = tabled(method, batch).ok_or_else(unknown)?;
            sbg(m, batch, la)
        }
    };
    c.preset = Some(name.to_string());
    Ok(c)
}

/// Problem presets for the spectrum command. `sbg` accepts an optional
/// `:seed`, e.g. `sbg:3`.
pub fn problem_preset(name: &str) -> Result<GameProblem> {
    Ok(match name {
        "bilinear2d" => Bilinear2D.into(),
        "qp1" => Quadratic2D::QP1.into(),
        "qp2" => Quadratic2D::QP2.into(),
        "sbg" => StochasticBilinear::new(100, 100, 0)?.into(),
        _ => match name.strip_prefix("sbg:").and_then(|s| s.parse().ok()) {
            Some(seed) => StochasticBilinear::new(100, 100, seed)?.into(),
            None => return Err(Error::UnknownPreset(name.to_string())),
        },
    })
}

/// Linearized update operator of a run config's method and wrapper.
pub fn operator_of(config: &RunConfig) -> Result<OperatorSpec> {
    let narrow =
        |k: u64| u32::try_from(k).map_err(|_| Error::Unsupported(format!("k = {k} is too large")));
    let (a_t, a_p) = config.wrapper.alphas();
    if a_t != a_p {
        return Err(Error::Unsupported(
            "spectrum needs one α for both players".into(),
        ));
    }
    match config.wrapper {
        Wrapper::None => OperatorSpec::from_method(&config.method, None, None),
        Wrapper::Lookahead { k, .. } => {
            OperatorSpec::from_method(&config.method, Some((narrow(k)?, a_t)), None)
        }
        Wrapper::Nested { k_s, k_ss, .. } => OperatorSpec::from_method(
            &config.method,
            None,
            Some((narrow(k_s)?, narrow(k_ss)?, a_t)),
        ),
        Wrapper::Alternating { .. } => Err(Error::Unsupported(
            "no operator for per-player lookahead".into(),
        )),
    }
}

/// A run preset name or an operator descriptor such as `la:6:0.5/eg:0.3`.
pub fn operator_preset(name: &str) -> Result<OperatorSpec> {
    match preset(name) {
        Ok(c) => operator_of(&c),
        Err(Error::UnknownPreset(_)) => name.parse(),
        Err(e) => Err(e),
    }
}
