use super::{descend, Oracle, StepSizes, Variant};
use crate::error::{invalid, Result};
use crate::problems::JointPoint;

/// First and second moment estimates of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of directions drawn so far; drives the bias correction.
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        Self::check_hypers(beta1, beta2, eps)?;
        Ok(Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            beta1,
            beta2,
            eps,
        })
    }

    pub(crate) fn check_hypers(beta1: f64, beta2: f64, eps: f64) -> Result<()> {
        // Negative β₁ is allowed on purpose.
        if !(beta1 > -1.0 && beta1 < 1.0) {
            return Err(invalid(format!("beta1 must be in (-1, 1), got {beta1}")));
        }
        if !(0.0..1.0).contains(&beta2) {
            return Err(invalid(format!("beta2 must be in [0, 1), got {beta2}")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!("epsilon must be > 0, got {eps}")));
        }
        Ok(())
    }
}

/// Advances the moments with `grad` and returns `m̂ / (√v̂ + ε)`.
pub fn adam_direction(state: &mut AdamState, grad: &[f64]) -> Vec<f64> {
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    let mut dir = Vec::with_capacity(grad.len());
    for ((m, v), g) in state.m.iter_mut().zip(state.v.iter_mut()).zip(grad) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        dir.push((*m / c1) / ((*v / c2).sqrt() + state.eps));
    }
    dir
}

/// One Adam update of both players. The alternating variant moves `φ`
/// `ratio` times before `θ`, each player with its own step counter.
pub(crate) fn adam_step(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    theta_state: &mut AdamState,
    phi_state: &mut AdamState,
    eta: StepSizes,
    variant: Variant,
    ratio: usize,
) -> Result<()> {
    let mut g_theta = vec![0.0; point.d_theta()];
    let mut g_phi = vec![0.0; point.d_phi()];
    match variant {
        Variant::Simultaneous => {
            oracle.sample();
            let (theta, phi) = point.split_mut();
            oracle.grad_theta(theta, phi, &mut g_theta)?;
            oracle.grad_phi(theta, phi, &mut g_phi)?;
            descend(theta, eta.theta, &adam_direction(theta_state, &g_theta));
            descend(phi, eta.phi, &adam_direction(phi_state, &g_phi));
        }
        Variant::Alternating => {
            for _ in 0..ratio {
                oracle.sample();
                let (theta, phi) = point.split_mut();
                oracle.grad_phi(theta, phi, &mut g_phi)?;
                descend(phi, eta.phi, &adam_direction(phi_state, &g_phi));
            }
            oracle.sample();
            let (theta, phi) = point.split_mut();
            oracle.grad_theta(theta, phi, &mut g_theta)?;
            descend(theta, eta.theta, &adam_direction(theta_state, &g_theta));
        }
    }
    Ok(())
}

/// Extragradient whose extrapolation and update both draw Adam directions
/// from the same, continuously advancing moment estimates. Two queries.
pub fn extra_adam_step(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    theta_state: &mut AdamState,
    phi_state: &mut AdamState,
    eta: StepSizes,
) -> Result<()> {
    let mut g_theta = vec![0.0; point.d_theta()];
    let mut g_phi = vec![0.0; point.d_phi()];

    oracle.sample();
    oracle.grad_theta(point.theta(), point.phi(), &mut g_theta)?;
    oracle.grad_phi(point.theta(), point.phi(), &mut g_phi)?;
    let mut half = point.clone();
    {
        let (theta, phi) = half.split_mut();
        descend(theta, eta.theta, &adam_direction(theta_state, &g_theta));
        descend(phi, eta.phi, &adam_direction(phi_state, &g_phi));
    }

    oracle.sample();
    oracle.grad_theta(half.theta(), half.phi(), &mut g_theta)?;
    oracle.grad_phi(half.theta(), half.phi(), &mut g_phi)?;
    let (theta, phi) = point.split_mut();
    descend(theta, eta.theta, &adam_direction(theta_state, &g_theta));
    descend(phi, eta.phi, &adam_direction(phi_state, &g_phi));
    Ok(())
}
