use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{descend, gda_step_simultaneous, Oracle, StepSizes};
use crate::error::Result;
use crate::problems::JointPoint;

/// Which players are unrolled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnrollMode {
    /// Only the max player is unrolled; the min player steps against it.
    Y,
    /// Both players are unrolled against a frozen opponent and each steps
    /// against the other's unrolled value.
    Xy,
}

/// One unrolled update with `m` unroll steps.
///
/// Y costs `m + 1` queries: the first unroll step of `φ` is also its normal
/// update. XY costs `2m + 1`: the first unroll step of both players shares
/// one query at `ω_t`. With `m = 0` both reduce to simultaneous GDA.
pub fn unroll_step(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    eta: f64,
    m: usize,
    mode: UnrollMode,
    exact: bool,
) -> Result<()> {
    if m == 0 {
        return gda_step_simultaneous(oracle, point, StepSizes::shared(eta));
    }
    match mode {
        UnrollMode::Y => unroll_y(oracle, point, eta, m, exact),
        UnrollMode::Xy => unroll_xy(oracle, point, eta, m),
    }
}

fn unroll_y(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    eta: f64,
    m: usize,
    exact: bool,
) -> Result<()> {
    let (dt, dp) = (point.d_theta(), point.d_phi());
    let theta = point.theta().to_vec();
    let mut phi = point.phi().to_vec();
    let mut g_phi = vec![0.0; dp];
    let mut phi_next = Vec::new();
    for j in 0..m {
        oracle.sample();
        oracle.grad_phi(&theta, &phi, &mut g_phi)?;
        descend(&mut phi, eta, &g_phi);
        if j == 0 {
            phi_next = phi.clone();
        }
    }

    oracle.sample();
    let mut g_theta = vec![0.0; dt];
    oracle.grad_theta(&theta, &phi, &mut g_theta)?;
    if exact {
        // Sensitivity S_j = ∂φ^j/∂θ of the affine unrolled map:
        // S_{j+1} = S_j − η (J_φθ + J_φφ S_j), S_0 = 0.
        let jac = oracle.problem().jvf_jacobian();
        let j_pt = jac.view((dt, 0), (dp, dt)).into_owned();
        let j_pp = jac.view((dt, dt), (dp, dp)).into_owned();
        let mut s = DMatrix::<f64>::zeros(dp, dt);
        for _ in 0..m {
            s -= (&j_pt + &j_pp * &s) * eta;
        }
        // d/dθ L(θ, φ^m(θ)) = ∂_θ L + Sᵀ ∂_φ L, and ∂_φ L = −v_φ.
        oracle.grad_phi(&theta, &phi, &mut g_phi)?;
        let chain = s.transpose() * DVector::from_column_slice(&g_phi);
        g_theta
            .iter_mut()
            .zip(chain.iter())
            .for_each(|(g, c)| *g -= c);
    }

    let (t, p) = point.split_mut();
    descend(t, eta, &g_theta);
    p.copy_from_slice(&phi_next);
    Ok(())
}

fn unroll_xy(oracle: &mut Oracle<'_>, point: &mut JointPoint, eta: f64, m: usize) -> Result<()> {
    let (dt, dp) = (point.d_theta(), point.d_phi());
    let (theta0, phi0) = (point.theta().to_vec(), point.phi().to_vec());
    let mut g_theta = vec![0.0; dt];
    let mut g_phi = vec![0.0; dp];

    oracle.sample();
    oracle.grad_theta(&theta0, &phi0, &mut g_theta)?;
    oracle.grad_phi(&theta0, &phi0, &mut g_phi)?;
    let (mut theta, mut phi) = (theta0.clone(), phi0.clone());
    descend(&mut theta, eta, &g_theta);
    descend(&mut phi, eta, &g_phi);
    for _ in 1..m {
        oracle.sample();
        oracle.grad_phi(&theta0, &phi, &mut g_phi)?;
        descend(&mut phi, eta, &g_phi);
    }
    for _ in 1..m {
        oracle.sample();
        oracle.grad_theta(&theta, &phi0, &mut g_theta)?;
        descend(&mut theta, eta, &g_theta);
    }

    oracle.sample();
    oracle.grad_theta(&theta0, &phi, &mut g_theta)?;
    oracle.sample();
    oracle.grad_phi(&theta, &phi0, &mut g_phi)?;
    let (t, p) = point.split_mut();
    descend(t, eta, &g_theta);
    descend(p, eta, &g_phi);
    Ok(())
}
