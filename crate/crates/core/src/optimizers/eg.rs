use super::{descend_joint, Oracle, StepSizes};
use crate::error::Result;
use crate::problems::JointPoint;

/// Extragradient: `ω½ = ω − η·v(ω)`, then `ω ← ω − η·v(ω½)`.
/// Each phase draws its own batch, so two queries per update.
pub fn eg_step(oracle: &mut Oracle<'_>, point: &mut JointPoint, eta: StepSizes) -> Result<()> {
    let mut v = vec![0.0; point.len()];
    oracle.sample();
    oracle.jvf(point, &mut v)?;
    let mut half = point.clone();
    descend_joint(&mut half, eta, &v);
    oracle.sample();
    oracle.jvf(&half, &mut v)?;
    descend_joint(point, eta, &v);
    Ok(())
}
