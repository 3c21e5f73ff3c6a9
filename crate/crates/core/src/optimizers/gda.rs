use super::{descend, descend_joint, Oracle, StepSizes};
use crate::error::Result;
use crate::problems::JointPoint;

/// `ω ← ω − η·v(ω)`, both players reading the same point. One query.
pub fn gda_step_simultaneous(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    eta: StepSizes,
) -> Result<()> {
    let mut v = vec![0.0; point.len()];
    oracle.sample();
    oracle.jvf(point, &mut v)?;
    descend_joint(point, eta, &v);
    Ok(())
}

/// `φ` takes `ratio` steps on fresh batches, then `θ` one step against the
/// new `φ`. `ratio + 1` queries.
pub fn gda_step_alternating(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    eta: StepSizes,
    ratio: usize,
) -> Result<()> {
    let mut g_phi = vec![0.0; point.d_phi()];
    let mut g_theta = vec![0.0; point.d_theta()];
    for _ in 0..ratio {
        oracle.sample();
        let (theta, phi) = point.split_mut();
        oracle.grad_phi(theta, phi, &mut g_phi)?;
        descend(phi, eta.phi, &g_phi);
    }
    oracle.sample();
    let (theta, phi) = point.split_mut();
    oracle.grad_theta(theta, phi, &mut g_theta)?;
    descend(theta, eta.theta, &g_theta);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Bilinear2D, GameProblem};

    fn at(x: f64, y: f64) -> JointPoint {
        JointPoint::new(vec![x], vec![y]).unwrap()
    }

    #[test]
    fn simultaneous_hand_step() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let mut w = at(1.0, 1.0);
        gda_step_simultaneous(&mut o, &mut w, StepSizes::shared(0.5)).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 1.5]);
        assert!((w.norm().powi(2) - 2.5).abs() < 1e-12);
        assert_eq!(o.queries(), 1);
    }

    #[test]
    fn simultaneous_growth_over_ten_steps() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let mut w = at(1.0, 0.0);
        for _ in 0..10 {
            gda_step_simultaneous(&mut o, &mut w, StepSizes::shared(0.3)).unwrap();
        }
        let expected = 1.09f64.powi(10);
        assert!((w.norm().powi(2) - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn alternating_hand_step() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let mut w = at(1.0, 1.0);
        gda_step_alternating(&mut o, &mut w, StepSizes::shared(0.5), 1).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 1.5]);
        assert_eq!(o.queries(), 2);
    }

    #[test]
    fn alternating_ratio_two_matches_script() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let (mut x, mut y) = (0.7, -0.4);
        let eta = 0.3;
        let mut w = at(x, y);
        gda_step_alternating(&mut o, &mut w, StepSizes::shared(eta), 2).unwrap();
        // Max player ascends x·y twice, then the min player descends once.
        y += eta * x;
        y += eta * x;
        x -= eta * y;
        assert_eq!(w.as_slice(), &[x, y]);
        assert_eq!(o.queries(), 3);
    }

    #[test]
    fn zero_step_is_identity() {
        let p = GameProblem::from(Bilinear2D);
        let mut o = Oracle::full(&p);
        let mut w = at(0.3, -2.0);
        gda_step_simultaneous(&mut o, &mut w, StepSizes::shared(0.0)).unwrap();
        gda_step_alternating(&mut o, &mut w, StepSizes::shared(0.0), 3).unwrap();
        assert_eq!(w, at(0.3, -2.0));
    }
}
