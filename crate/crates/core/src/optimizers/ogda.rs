use super::{descend_joint, Oracle, StepSizes};
use crate::error::Result;
use crate::problems::JointPoint;

/// Memory of the previous update's joint vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct OgdaState {
    pub prev_jvf: Vec<f64>,
}

impl OgdaState {
    /// Zero memory, so the first step is a GDA step with doubled size.
    pub fn new(dim: usize) -> Self {
        Self {
            prev_jvf: vec![0.0; dim],
        }
    }
}

/// `ω ← ω − 2η·v(ω_t) + η·v(ω_{t−1})`. One query.
pub fn ogda_step(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    state: &mut OgdaState,
    eta: StepSizes,
) -> Result<()> {
    let mut v = vec![0.0; point.len()];
    oracle.sample();
    oracle.jvf(point, &mut v)?;
    let step: Vec<f64> = v
        .iter()
        .zip(&state.prev_jvf)
        .map(|(now, prev)| 2.0 * now - prev)
        .collect();
    descend_joint(point, eta, &step);
    state.prev_jvf = v;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Bilinear2D, GameProblem};

    #[test]
    fn first_step_uses_zero_memory() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let mut s = OgdaState::new(2);
        let mut w = JointPoint::new(vec![1.0], vec![1.0]).unwrap();
        ogda_step(&mut o, &mut w, &mut s, StepSizes::shared(0.25)).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 1.5]);
        assert_eq!(s.prev_jvf, vec![1.0, -1.0]);
    }

    #[test]
    fn zero_step_still_refreshes_memory() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let mut s = OgdaState::new(2);
        let mut w = JointPoint::new(vec![2.0], vec![3.0]).unwrap();
        ogda_step(&mut o, &mut w, &mut s, StepSizes::shared(0.0)).unwrap();
        assert_eq!(w.as_slice(), &[2.0, 3.0]);
        assert_eq!(s.prev_jvf, vec![3.0, -2.0]);
    }

    #[test]
    fn converges_on_bilinear() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let mut s = OgdaState::new(2);
        let mut w = JointPoint::new(vec![1.0], vec![1.0]).unwrap();
        for _ in 0..5000 {
            ogda_step(&mut o, &mut w, &mut s, StepSizes::shared(0.1)).unwrap();
        }
        assert!(p.distance_to_opt(&w) < 1e-6);
    }
}
