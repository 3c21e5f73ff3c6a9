//! Linearized update operators and their spectra.
//!
//! Every in-scope problem has an affine joint vector field, so the Jacobian
//! of each update map is a constant matrix and the formulas below hold
//! globally, not only near the fixed point.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::lookahead::{LookaheadState, NestedLookaheadState};
use crate::optimizers::{
    eg_step, gda_step_alternating, gda_step_simultaneous, ogda_step, Method, OgdaState, Oracle,
    StepSizes, Variant,
};
use crate::problems::{Batch, GameProblem, JointPoint};
use crate::rng;

/// Band around ρ = 1 reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-9;

/// An update rule whose Jacobian can be written in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    GdaSim {
        eta: StepSizes,
    },
    GdaAlt {
        eta: StepSizes,
        ratio: usize,
    },
    Eg {
        eta: StepSizes,
    },
    /// Acts on the stacked state `(ω_t, ω_{t−1})`.
    OgdaCompanion {
        eta: StepSizes,
    },
    Lookahead {
        base: Box<OperatorSpec>,
        k: u32,
        alpha: f64,
    },
    /// Requires `k_ss` to be a multiple of `k_s`.
    NestedLookahead {
        base: Box<OperatorSpec>,
        k_s: u32,
        k_ss: u32,
        alpha: f64,
    },
}

impl OperatorSpec {
    pub fn lookahead(base: OperatorSpec, k: u32, alpha: f64) -> Self {
        OperatorSpec::Lookahead {
            base: Box::new(base),
            k,
            alpha,
        }
    }

    /// Whether the operator acts on `(ω_t, ω_{t−1})` instead of `ω_t`.
    pub fn is_augmented(&self) -> bool {
        match self {
            OperatorSpec::OgdaCompanion { .. } => true,
            OperatorSpec::Lookahead { base, .. } | OperatorSpec::NestedLookahead { base, .. } => {
                base.is_augmented()
            }
            _ => false,
        }
    }

    /// Operator spec of a run configuration's base method and wrapper.
    pub fn from_method(
        method: &Method,
        la: Option<(u32, f64)>,
        nested: Option<(u32, u32, f64)>,
    ) -> Result<Self> {
        let eta = method.step_sizes();
        let base = match *method {
            Method::Gda {
                variant: Variant::Simultaneous,
                ..
            } => OperatorSpec::GdaSim { eta },
            Method::Gda {
                variant: Variant::Alternating,
                ratio,
                ..
            } => OperatorSpec::GdaAlt { eta, ratio },
            Method::Eg { .. } => OperatorSpec::Eg { eta },
            Method::Ogda { .. } => OperatorSpec::OgdaCompanion { eta },
            _ => {
                return Err(Error::Unsupported(format!(
                    "{} has no constant update Jacobian",
                    method.label()
                )));
            }
        };
        Ok(match (la, nested) {
            (Some((k, alpha)), _) => OperatorSpec::lookahead(base, k, alpha),
            (None, Some((k_s, k_ss, alpha))) => OperatorSpec::NestedLookahead {
                base: Box::new(base),
                k_s,
                k_ss,
                alpha,
            },
            (None, None) => base,
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::GdaSim { eta }
            | OperatorSpec::Eg { eta }
            | OperatorSpec::OgdaCompanion { eta } => eta.validate(),
            OperatorSpec::GdaAlt { eta, ratio } => {
                if *ratio == 0 {
                    return Err(invalid("update ratio must be ≥ 1"));
                }
                eta.validate()
            }
            OperatorSpec::Lookahead { base, k, alpha } => {
                if *k == 0 || !(0.0..=1.0).contains(alpha) {
                    return Err(invalid(format!(
                        "lookahead needs k ≥ 1 and α in [0, 1], got k = {k}, α = {alpha}"
                    )));
                }
                base.validate()
            }
            OperatorSpec::NestedLookahead {
                base,
                k_s,
                k_ss,
                alpha,
            } => {
                if *k_s == 0 || *k_ss == 0 || !(0.0..=1.0).contains(alpha) {
                    return Err(invalid(
                        "nested lookahead needs k_s, k_ss ≥ 1 and α in [0, 1]",
                    ));
                }
                if k_ss % k_s != 0 {
                    return Err(Error::Unsupported(format!(
                        "nested operator needs k_ss to be a multiple of k_s, got {k_ss} and {k_s}"
                    )));
                }
                base.validate()
            }
        }
    }
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let etas = |f: &mut fmt::Formatter<'_>, eta: &StepSizes| {
            if eta.theta == eta.phi {
                write!(f, "{:?}", eta.theta)
            } else {
                write!(f, "{:?}:{:?}", eta.theta, eta.phi)
            }
        };
        match self {
            OperatorSpec::GdaSim { eta } => {
                f.write_str("gda-sim:")?;
                etas(f, eta)
            }
            OperatorSpec::GdaAlt { eta, ratio } => {
                f.write_str("gda-alt:")?;
                etas(f, eta)?;
                if *ratio != 1 {
                    write!(f, ":r{ratio}")?;
                }
                Ok(())
            }
            OperatorSpec::Eg { eta } => {
                f.write_str("eg:")?;
                etas(f, eta)
            }
            OperatorSpec::OgdaCompanion { eta } => {
                f.write_str("ogda:")?;
                etas(f, eta)
            }
            OperatorSpec::Lookahead { base, k, alpha } => write!(f, "la:{k}:{alpha:?}/{base}"),
            OperatorSpec::NestedLookahead {
                base,
                k_s,
                k_ss,
                alpha,
            } => {
                write!(f, "nla:{k_s}:{k_ss}:{alpha:?}/{base}")
            }
        }
    }
}

/// Parses descriptors such as `gda-sim:0.3`, `gda-alt:0.1:0.2:r2`, `eg:0.3`,
/// `ogda:0.1`, `la:6:0.5/eg:0.3` and `nla:5:15:0.5/gda-sim:0.5`.
impl FromStr for OperatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| invalid(format!("operator `{s}`: {why}"));
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad("expected a number"));
        let int = |x: &str| {
            x.parse::<u32>()
                .map_err(|_| bad("expected a positive integer"))
        };
        if let Some((head, rest)) = s.split_once('/') {
            let base = Box::new(rest.parse()?);
            let parts: Vec<&str> = head.split(':').collect();
            let spec = match parts.as_slice() {
                ["la", k, a] => OperatorSpec::Lookahead {
                    base,
                    k: int(k)?,
                    alpha: num(a)?,
                },
                ["nla", ks, kss, a] => OperatorSpec::NestedLookahead {
                    base,
                    k_s: int(ks)?,
                    k_ss: int(kss)?,
                    alpha: num(a)?,
                },
                _ => return Err(bad("wrapper must be la:K:ALPHA or nla:KS:KSS:ALPHA")),
            };
            spec.validate()?;
            return Ok(spec);
        }
        let mut parts: Vec<&str> = s.split(':').collect();
        let mut ratio = 1;
        if let Some(r) = parts.last().and_then(|p| p.strip_prefix('r')) {
            ratio = int(r)? as usize;
            parts.pop();
        }
        let (name, etas) = parts.split_first().ok_or_else(|| bad("empty"))?;
        let eta = match etas {
            [e] => StepSizes::shared(num(e)?),
            [t, p] => StepSizes {
                theta: num(t)?,
                phi: num(p)?,
            },
            _ => return Err(bad("expected one or two step sizes")),
        };
        let spec = match *name {
            "gda-sim" => OperatorSpec::GdaSim { eta },
            "gda-alt" => OperatorSpec::GdaAlt { eta, ratio },
            "eg" => OperatorSpec::Eg { eta },
            "ogda" => OperatorSpec::OgdaCompanion { eta },
            _ => return Err(bad("unknown base; use gda-sim, gda-alt, eg or ogda")),
        };
        if ratio != 1 && !matches!(spec, OperatorSpec::GdaAlt { .. }) {
            return Err(bad("only gda-alt takes a ratio"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// `diag(η_θ I, η_φ I)`
fn step_matrix(eta: StepSizes, d_theta: usize, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| match (i == j, i < d_theta) {
        (false, _) => 0.0,
        (true, true) => eta.theta,
        (true, false) => eta.phi,
    })
}

/// Exact Jacobian of the update operator described by `spec` for a problem
/// with joint-vector-field Jacobian `jac` and `d_theta` min-player
/// coordinates.
pub fn operator_jacobian(
    spec: &OperatorSpec,
    jac: &DMatrix<f64>,
    d_theta: usize,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let dim = jac.nrows();
    if jac.ncols() != dim || d_theta > dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: jac.ncols(),
        });
    }
    let id = DMatrix::<f64>::identity(dim, dim);
    Ok(match spec {
        OperatorSpec::GdaSim { eta } => &id - step_matrix(*eta, d_theta, dim) * jac,
        OperatorSpec::Eg { eta } => {
            let dj = step_matrix(*eta, d_theta, dim) * jac;
            &id - &dj + &dj * &dj
        }
        OperatorSpec::GdaAlt { eta, ratio } => {
            let only_theta = StepSizes {
                theta: eta.theta,
                phi: 0.0,
            };
            let only_phi = StepSizes {
                theta: 0.0,
                phi: eta.phi,
            };
            let m_theta = &id - step_matrix(only_theta, d_theta, dim) * jac;
            let m_phi = &id - step_matrix(only_phi, d_theta, dim) * jac;
            m_theta * m_phi.pow(*ratio as u32)
        }
        OperatorSpec::OgdaCompanion { eta } => {
            let dj = step_matrix(*eta, d_theta, dim) * jac;
            let mut m = DMatrix::zeros(2 * dim, 2 * dim);
            m.view_mut((0, 0), (dim, dim)).copy_from(&(&id - &dj * 2.0));
            m.view_mut((0, dim), (dim, dim)).copy_from(&dj);
            m.view_mut((dim, 0), (dim, dim)).copy_from(&id);
            m
        }
        OperatorSpec::Lookahead { base, k, alpha } => {
            let b = operator_jacobian(base, jac, d_theta)?;
            la_operator(&b.pow(*k), *alpha, dim)
        }
        OperatorSpec::NestedLookahead {
            base,
            k_s,
            k_ss,
            alpha,
        } => {
            let b = operator_jacobian(base, jac, d_theta)?;
            let slow = la_operator(&b.pow(*k_s), *alpha, dim);
            la_operator(&slow.pow(k_ss / k_s), *alpha, dim)
        }
    })
}

/// `(1−α)I + α·B^k` on the iterate block. On an augmented state only the
/// current-iterate rows are interpolated; the memory rows pass through.
fn la_operator(bk: &DMatrix<f64>, alpha: f64, dim: usize) -> DMatrix<f64> {
    let mut m = bk.clone();
    m.rows_mut(0, dim).scale_mut(alpha);
    for i in 0..dim {
        m[(i, i)] += 1.0 - alpha;
    }
    m
}

/// `λ ↦ 1 − α + α·λ^k`
pub fn la_eigen_map(eigs: &[Complex<f64>], k: u32, alpha: f64) -> Vec<Complex<f64>> {
    eigs.iter()
        .map(|l| Complex::new(1.0 - alpha, 0.0) + l.powu(k) * alpha)
        .collect()
}

/// Eigenvalues of a square matrix, sorted by real then imaginary part.
/// 2×2 matrices use the characteristic polynomial directly.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("operator matrix"));
    }
    let mut eigs: Vec<Complex<f64>> = if m.nrows() == 2 {
        let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
        // (tr/2)² − det rewritten to avoid cancellation.
        let half_gap = 0.5 * (m[(0, 0)] - m[(1, 1)]);
        let disc = half_gap * half_gap + m[(0, 1)] * m[(1, 0)];
        if disc >= 0.0 {
            let r = disc.sqrt();
            vec![
                Complex::new(half_tr - r, 0.0),
                Complex::new(half_tr + r, 0.0),
            ]
        } else {
            let r = (-disc).sqrt();
            vec![Complex::new(half_tr, -r), Complex::new(half_tr, r)]
        }
    } else {
        m.clone().complex_eigenvalues().iter().copied().collect()
    };
    if eigs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen);
    }
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eigs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converges,
    Marginal,
    Diverges,
}

impl Verdict {
    pub fn from_radius(rho: f64) -> Self {
        if (rho - 1.0).abs() <= MARGINAL_TOL {
            Verdict::Marginal
        } else if rho < 1.0 {
            Verdict::Converges
        } else {
            Verdict::Diverges
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex<f64>>,
    pub spectral_radius: f64,
    pub verdict: Verdict,
    /// True when the operator acts on `(ω_t, ω_{t−1})`.
    pub augmented: bool,
}

impl SpectrumReport {
    pub fn of_matrix(m: &DMatrix<f64>, augmented: bool) -> Result<Self> {
        let eigenvalues = eigenvalues(m)?;
        let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(Self {
            eigenvalues,
            spectral_radius,
            verdict: Verdict::from_radius(spectral_radius),
            augmented,
        })
    }
}

impl Serialize for SpectrumReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.eigenvalues.iter().map(|z| [z.re, z.im]).collect();
        let mut st = s.serialize_struct("SpectrumReport", 4)?;
        st.serialize_field("eigenvalues", &pairs)?;
        st.serialize_field("spectral_radius", &self.spectral_radius)?;
        st.serialize_field("verdict", &self.verdict)?;
        st.serialize_field(
            "state",
            if self.augmented {
                "augmented (w_t, w_t-1)"
            } else {
                "joint"
            },
        )?;
        st.end()
    }
}

/// Spectrum JSON as written by the CLI: the report plus what it describes.
#[derive(Debug, Serialize)]
pub struct SpectrumDocument<'a> {
    pub problem: &'a str,
    pub operator: String,
    #[serde(flatten)]
    pub report: &'a SpectrumReport,
}

impl SpectrumDocument<'_> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Spectrum of `spec` on `problem`.
pub fn spectrum(spec: &OperatorSpec, problem: &GameProblem) -> Result<SpectrumReport> {
    let m = operator_jacobian(spec, &problem.jvf_jacobian(), problem.d_theta())?;
    SpectrumReport::of_matrix(&m, spec.is_augmented())
}

/// Pairs each eigenvalue of `a` with the nearest unused one in `b` and
/// returns the largest gap.
pub fn match_eigenvalues(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, gap) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("lengths match");
        used[j] = true;
        worst = worst.max(gap);
    }
    worst
}

/// Outcome of cross-checking an operator Jacobian against the simulated map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// Largest entrywise gap between the formula and central differences.
    pub finite_difference_error: f64,
    /// Largest gap between mapped base eigenvalues and the direct spectrum
    /// of the lookahead operator. `None` when the map does not apply.
    pub eigen_map_error: Option<f64>,
    pub passed: bool,
}

pub const FD_TOL: f64 = 1e-6;
pub const EIGEN_MAP_TOL: f64 = 1e-8;

/// Applies the update rule of `spec` once to `state` by running the actual
/// optimizer and lookahead code. Augmented states are `(ω_t, ω_{t−1})`.
pub fn simulate_operator(
    spec: &OperatorSpec,
    problem: &GameProblem,
    state: &[f64],
) -> Result<Vec<f64>> {
    let dim = problem.dim();
    let dt = problem.d_theta();
    let mut point = JointPoint::from_joint(state[..dim].to_vec(), dt)?;
    let mut memory = if spec.is_augmented() {
        let prev = JointPoint::from_joint(state[dim..].to_vec(), dt)?;
        Some(OgdaState {
            prev_jvf: problem.jvf(&prev, Batch::Full)?,
        })
    } else {
        None
    };
    let mut prev_point = point.clone();
    let base_of = |s: &OperatorSpec| -> OperatorSpec {
        match s {
            OperatorSpec::Lookahead { base, .. } | OperatorSpec::NestedLookahead { base, .. } => {
                (**base).clone()
            }
            other => other.clone(),
        }
    };
    let base = base_of(spec);
    let mut oracle = Oracle::full(problem);
    let mut base_step = |point: &mut JointPoint, prev: &mut JointPoint| -> Result<()> {
        prev.clone_from(point);
        match &base {
            OperatorSpec::GdaSim { eta } => gda_step_simultaneous(&mut oracle, point, *eta),
            OperatorSpec::GdaAlt { eta, ratio } => {
                gda_step_alternating(&mut oracle, point, *eta, *ratio)
            }
            OperatorSpec::Eg { eta } => eg_step(&mut oracle, point, *eta),
            OperatorSpec::OgdaCompanion { eta } => ogda_step(
                &mut oracle,
                point,
                memory.as_mut().expect("augmented"),
                *eta,
            ),
            _ => Err(Error::Unsupported(
                "wrappers nest only one level deep".into(),
            )),
        }
    };
    match spec {
        OperatorSpec::Lookahead { k, alpha, .. } => {
            let mut la = LookaheadState::new(&point, *k as u64, *alpha, *alpha)?;
            for _ in 0..*k {
                base_step(&mut point, &mut prev_point)?;
                la.after_update(&mut point);
            }
        }
        OperatorSpec::NestedLookahead {
            k_ss, k_s, alpha, ..
        } => {
            let mut st =
                NestedLookaheadState::new(&point, *k_s as u64, *k_ss as u64, *alpha, *alpha)?;
            for _ in 0..*k_ss {
                base_step(&mut point, &mut prev_point)?;
                st.after_update(&mut point);
            }
        }
        _ => base_step(&mut point, &mut prev_point)?,
    }
    let mut out = point.into_vec();
    if spec.is_augmented() {
        out.extend_from_slice(prev_point.as_slice());
    }
    Ok(out)
}

/// Cross-validates [`operator_jacobian`] on `trials` random points.
pub fn verify_operator(
    spec: &OperatorSpec,
    problem: &GameProblem,
    trials: usize,
    seed: u64,
) -> Result<VerifyReport> {
    let dt = problem.d_theta();
    let jac = problem.jvf_jacobian();
    let op = operator_jacobian(spec, &jac, dt)?;
    let n = op.nrows();
    let mut rng = rng::seeded(seed);
    let h = 1e-4;
    let mut fd_err: f64 = 0.0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for j in 0..n {
            let (mut plus, mut minus) = (x.clone(), x.clone());
            plus[j] += h;
            minus[j] -= h;
            let fp = simulate_operator(spec, problem, &plus)?;
            let fm = simulate_operator(spec, problem, &minus)?;
            for i in 0..n {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                fd_err = fd_err.max((fd - op[(i, j)]).abs());
            }
        }
    }
    let eigen_map_error = match spec {
        OperatorSpec::Lookahead { base, k, alpha } if !spec.is_augmented() => {
            let base_eigs = eigenvalues(&operator_jacobian(base, &jac, dt)?)?;
            let mapped = la_eigen_map(&base_eigs, *k, *alpha);
            Some(match_eigenvalues(&mapped, &eigenvalues(&op)?))
        }
        _ => None,
    };
    let passed = fd_err < FD_TOL && eigen_map_error.is_none_or(|e| e < EIGEN_MAP_TOL);
    Ok(VerifyReport {
        finite_difference_error: fd_err,
        eigen_map_error,
        passed,
    })
}

/// Local stability of a stationary point from the Jacobian spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsspCheck {
    /// Every eigenvalue has strictly positive real part.
    pub positive_real: bool,
    /// Some eigenvalue has a nonzero imaginary part.
    pub rotational: bool,
    #[serde(skip)]
    pub eigenvalues: Vec<Complex<f64>>,
}

pub fn lssp_check(jac: &DMatrix<f64>) -> Result<LsspCheck> {
    let eigenvalues = eigenvalues(jac)?;
    let scale = jac.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale;
    Ok(LsspCheck {
        positive_real: eigenvalues.iter().all(|z| z.re > tol),
        rotational: eigenvalues.iter().any(|z| z.im.abs() > tol),
        eigenvalues,
    })
}

/// `start, start + step, …` up to `stop` inclusive, computed without
/// accumulating rounding error.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + i as f64 * step).collect()
}

/// Exhaustive search over the Cartesian product of `axes`, visited in
/// lexicographic order; `make` turns a grid point into an operator. The
/// first point attaining the smallest spectral radius wins.
pub fn tune_by_spectral_radius(
    problem: &GameProblem,
    axes: &[Vec<f64>],
    make: impl Fn(&[f64]) -> OperatorSpec,
) -> Result<(Vec<f64>, OperatorSpec, SpectrumReport)> {
    if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
        return Err(invalid("tuning grid is empty"));
    }
    let mut idx = vec![0usize; axes.len()];
    let mut best: Option<(Vec<f64>, OperatorSpec, SpectrumReport)> = None;
    loop {
        let params: Vec<f64> = idx.iter().zip(axes).map(|(&i, a)| a[i]).collect();
        let spec = make(&params);
        let report = spectrum(&spec, problem)?;
        if best
            .as_ref()
            .is_none_or(|b| report.spectral_radius < b.2.spectral_radius)
        {
            best = Some((params, spec, report));
        }
        // Odometer with the last axis varying fastest.
        let mut d = axes.len();
        loop {
            if d == 0 {
                return Ok(best.expect("non-empty grid"));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}
