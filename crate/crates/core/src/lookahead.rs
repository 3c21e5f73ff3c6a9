//! Lookahead wrappers and iterate averaging.
//!
//! A wrapper never touches base-optimizer internals: Adam moments, OGDA
//! memory and SVRE snapshots keep running across backtracks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::optimizers::{descend, BaseOptimizer, Oracle, StepSizes, Variant};
use crate::problems::JointPoint;

fn check_k(k: u64, what: &str) -> Result<()> {
    if k == 0 {
        return Err(invalid(format!("{what} must be ≥ 1")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must be in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Joint lookahead: after every `k` both-player updates, both players move
/// to `ω^S + α(ω − ω^S)` at once and the snapshot is refreshed.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadState {
    pub slow: JointPoint,
    pub k: u64,
    pub alpha_theta: f64,
    pub alpha_phi: f64,
    /// Updates since the last backtrack.
    pub counter: u64,
}

impl LookaheadState {
    pub fn new(point: &JointPoint, k: u64, alpha_theta: f64, alpha_phi: f64) -> Result<Self> {
        check_k(k, "k")?;
        check_alpha(alpha_theta)?;
        check_alpha(alpha_phi)?;
        Ok(Self {
            slow: point.clone(),
            k,
            alpha_theta,
            alpha_phi,
            counter: 0,
        })
    }

    /// Counts one base update and backtracks when due. Returns whether it did.
    pub fn after_update(&mut self, point: &mut JointPoint) -> bool {
        self.counter += 1;
        if self.counter < self.k {
            return false;
        }
        point.pull_towards(&self.slow, self.alpha_theta, self.alpha_phi);
        self.slow.clone_from(point);
        self.counter = 0;
        true
    }
}

/// One base update followed by the lookahead bookkeeping.
pub fn la_minmax_step(
    base: &mut BaseOptimizer,
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    la: &mut LookaheadState,
) -> Result<bool> {
    base.step(point, oracle)?;
    Ok(la.after_update(point))
}

/// Which levels of a nested lookahead fired on an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NestedFire {
    pub slow: bool,
    pub super_slow: bool,
}

/// Two-level lookahead: slow backtracks every `k_s` updates, super-slow
/// every `k_ss`, and a super-slow backtrack resets both snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedLookaheadState {
    pub slow: JointPoint,
    pub super_slow: JointPoint,
    pub k_s: u64,
    pub k_ss: u64,
    pub alpha_theta: f64,
    pub alpha_phi: f64,
    /// Updates since the start.
    pub t: u64,
}

impl NestedLookaheadState {
    pub fn new(
        point: &JointPoint,
        k_s: u64,
        k_ss: u64,
        alpha_theta: f64,
        alpha_phi: f64,
    ) -> Result<Self> {
        check_k(k_s, "k_s")?;
        check_k(k_ss, "k_ss")?;
        if k_ss < k_s {
            return Err(invalid(format!("k_ss ({k_ss}) must be ≥ k_s ({k_s})")));
        }
        check_alpha(alpha_theta)?;
        check_alpha(alpha_phi)?;
        Ok(Self {
            slow: point.clone(),
            super_slow: point.clone(),
            k_s,
            k_ss,
            alpha_theta,
            alpha_phi,
            t: 0,
        })
    }

    pub fn after_update(&mut self, point: &mut JointPoint) -> NestedFire {
        self.t += 1;
        let mut fire = NestedFire::default();
        if self.t.is_multiple_of(self.k_s) {
            point.pull_towards(&self.slow, self.alpha_theta, self.alpha_phi);
            self.slow.clone_from(point);
            fire.slow = true;
        }
        if self.t.is_multiple_of(self.k_ss) {
            point.pull_towards(&self.super_slow, self.alpha_theta, self.alpha_phi);
            self.super_slow.clone_from(point);
            self.slow.clone_from(point);
            fire.super_slow = true;
        }
        fire
    }
}

pub fn la_nested_step(
    base: &mut BaseOptimizer,
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    state: &mut NestedLookaheadState,
) -> Result<NestedFire> {
    base.step(point, oracle)?;
    Ok(state.after_update(point))
}

/// Lookahead applied to each player separately, with its own counter and
/// snapshot. A backtracked player is what the opponent reads next.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingLookaheadState {
    pub slow_theta: Vec<f64>,
    pub slow_phi: Vec<f64>,
    pub k_theta: u64,
    pub k_phi: u64,
    pub alpha_theta: f64,
    pub alpha_phi: f64,
    pub theta_updates: u64,
    pub phi_updates: u64,
}

impl AlternatingLookaheadState {
    pub fn new(
        point: &JointPoint,
        k_theta: u64,
        k_phi: u64,
        alpha_theta: f64,
        alpha_phi: f64,
    ) -> Result<Self> {
        check_k(k_theta, "k_theta")?;
        check_k(k_phi, "k_phi")?;
        check_alpha(alpha_theta)?;
        check_alpha(alpha_phi)?;
        Ok(Self {
            slow_theta: point.theta().to_vec(),
            slow_phi: point.phi().to_vec(),
            k_theta,
            k_phi,
            alpha_theta,
            alpha_phi,
            theta_updates: 0,
            phi_updates: 0,
        })
    }

    /// Returns whether `true` backtracked.
    fn after_theta(&mut self, theta: &mut [f64]) -> bool {
        self.theta_updates += 1;
        if !self.theta_updates.is_multiple_of(self.k_theta) {
            return false;
        }
        interpolate(theta, &self.slow_theta, self.alpha_theta);
        self.slow_theta.copy_from_slice(theta);
        true
    }

    fn after_phi(&mut self, phi: &mut [f64]) -> bool {
        self.phi_updates += 1;
        if !self.phi_updates.is_multiple_of(self.k_phi) {
            return false;
        }
        interpolate(phi, &self.slow_phi, self.alpha_phi);
        self.slow_phi.copy_from_slice(phi);
        true
    }
}

fn interpolate(x: &mut [f64], anchor: &[f64], alpha: f64) {
    // Written so that α = 1 and α = 0 reproduce the endpoints exactly.
    x.iter_mut()
        .zip(anchor)
        .for_each(|(x, a)| *x = (1.0 - alpha) * a + alpha * *x);
}

/// One GDA update with per-player lookahead. In the alternating variant each
/// `φ` sub-step may backtrack before `θ` reads it.
pub fn la_alternating_step(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    state: &mut AlternatingLookaheadState,
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
            descend(theta, eta.theta, &g_theta);
            descend(phi, eta.phi, &g_phi);
            state.after_phi(phi);
            state.after_theta(theta);
        }
        Variant::Alternating => {
            for _ in 0..ratio {
                oracle.sample();
                let (theta, phi) = point.split_mut();
                oracle.grad_phi(theta, phi, &mut g_phi)?;
                descend(phi, eta.phi, &g_phi);
                state.after_phi(phi);
            }
            oracle.sample();
            let (theta, phi) = point.split_mut();
            oracle.grad_theta(theta, phi, &mut g_theta)?;
            descend(theta, eta.theta, &g_theta);
            state.after_theta(theta);
        }
    }
    Ok(())
}

/// Lookahead for a single parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleLookahead {
    pub slow: Vec<f64>,
    pub k: u64,
    pub alpha: f64,
    pub counter: u64,
}

impl SingleLookahead {
    pub fn new(point: &[f64], k: u64, alpha: f64) -> Result<Self> {
        check_k(k, "k")?;
        check_alpha(alpha)?;
        Ok(Self {
            slow: point.to_vec(),
            k,
            alpha,
            counter: 0,
        })
    }
}

/// One gradient step of size `gamma`, then a backtrack every `k` steps.
pub fn la_single_objective_step(
    mut grad: impl FnMut(&[f64]) -> Vec<f64>,
    point: &mut [f64],
    gamma: f64,
    state: &mut SingleLookahead,
) -> bool {
    let g = grad(point);
    descend(point, gamma, &g);
    state.counter += 1;
    if state.counter < state.k {
        return false;
    }
    interpolate(point, &state.slow, state.alpha);
    state.slow.copy_from_slice(point);
    state.counter = 0;
    true
}

/// Averaging rule of an [`AverageTracker`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AverageMode {
    /// `value ← β·value + (1−β)·x`
    Ema { beta: f64 },
    /// Arithmetic mean of every iterate seen.
    Uma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageTracker {
    pub mode: AverageMode,
    value: Vec<f64>,
    count: u64,
}

impl AverageTracker {
    /// EMA starts from `init`; UMA reports `init` until the first update
    /// and ignores it afterwards.
    pub fn new(mode: AverageMode, init: &[f64]) -> Result<Self> {
        if let AverageMode::Ema { beta } = mode {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(invalid(format!("EMA beta must be in (0, 1), got {beta}")));
            }
        }
        Ok(Self {
            mode,
            value: init.to_vec(),
            count: 0,
        })
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        match self.mode {
            AverageMode::Ema { beta } => {
                self.value
                    .iter_mut()
                    .zip(x)
                    .for_each(|(v, x)| *v = beta * *v + (1.0 - beta) * x);
            }
            AverageMode::Uma => {
                let w = 1.0 / self.count as f64;
                self.value
                    .iter_mut()
                    .zip(x)
                    .for_each(|(v, x)| *v += w * (x - *v));
            }
        }
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// Functional form of [`AverageTracker::update`].
pub fn tracker_update(mut tracker: AverageTracker, x: &[f64]) -> AverageTracker {
    tracker.update(x);
    tracker
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{gda_step_simultaneous, Method};
    use crate::problems::{Bilinear2D, GameProblem};
    use crate::rng;

    fn at(x: f64, y: f64) -> JointPoint {
        JointPoint::new(vec![x], vec![y]).unwrap()
    }

    fn gda(eta: f64) -> Method {
        Method::Gda {
            eta,
            eta_phi: None,
            variant: Variant::Simultaneous,
            ratio: 1,
        }
    }

    fn base(m: &Method, p: &GameProblem, w: &JointPoint) -> BaseOptimizer {
        BaseOptimizer::new(m, p, w, None, rng::seeded(0)).unwrap()
    }

    #[test]
    fn alpha_one_is_bare_base() {
        let p = GameProblem::from(Bilinear2D);
        let mut a = at(1.0, 0.5);
        let mut b = a.clone();
        let mut la = LookaheadState::new(&a, 3, 1.0, 1.0).unwrap();
        let mut opt = base(&gda(0.2), &p, &a);
        let mut o = Oracle::full(&p);
        for _ in 0..20 {
            la_minmax_step(&mut opt, &mut o, &mut a, &mut la).unwrap();
            gda_step_simultaneous(&mut Oracle::full(&p), &mut b, StepSizes::shared(0.2)).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn two_step_cycle_contraction() {
        let (eta, alpha) = (0.5f64, 0.2f64);
        let factor = (1.0 - eta * eta * alpha).powi(2) + 4.0 * eta * eta * alpha * alpha;
        assert!((factor - 0.9425f64).abs() < 1e-15);
        let p = GameProblem::from(Bilinear2D);
        let mut w = at(1.0, 1.0);
        let mut la = LookaheadState::new(&w, 2, alpha, alpha).unwrap();
        let mut opt = base(&gda(eta), &p, &w);
        let mut o = Oracle::full(&p);
        for _ in 0..50 {
            let before = w.norm().powi(2);
            la_minmax_step(&mut opt, &mut o, &mut w, &mut la).unwrap();
            assert!(la_minmax_step(&mut opt, &mut o, &mut w, &mut la).unwrap());
            let ratio = w.norm().powi(2) / before;
            assert!((ratio - factor).abs() / factor < 1e-12);
        }
    }

    #[test]
    fn k_one_is_damped_step() {
        let p = GameProblem::from(Bilinear2D);
        let mut w = at(0.3, -0.8);
        let mut la = LookaheadState::new(&w, 1, 0.4, 0.4).unwrap();
        let mut opt = base(&gda(0.3), &p, &w);
        let start = w.clone();
        la_minmax_step(&mut opt, &mut Oracle::full(&p), &mut w, &mut la).unwrap();
        let mut f = start.clone();
        gda_step_simultaneous(&mut Oracle::full(&p), &mut f, StepSizes::shared(0.3)).unwrap();
        for i in 0..2 {
            let damped = start.as_slice()[i] + 0.4 * (f.as_slice()[i] - start.as_slice()[i]);
            assert!((w.as_slice()[i] - damped).abs() < 1e-15);
        }
    }

    #[test]
    fn backtracks_every_k_updates() {
        let mut w = at(1.0, 1.0);
        let mut la = LookaheadState::new(&w, 4, 0.5, 0.5).unwrap();
        let fired: Vec<bool> = (0..12).map(|_| la.after_update(&mut w)).collect();
        let expect: Vec<bool> = (1..=12).map(|t| t % 4 == 0).collect();
        assert_eq!(fired, expect);
    }

    #[test]
    fn rejects_bad_hypers() {
        let w = at(0.0, 0.0);
        assert!(LookaheadState::new(&w, 0, 0.5, 0.5).is_err());
        assert!(LookaheadState::new(&w, 2, 1.5, 0.5).is_err());
        assert!(LookaheadState::new(&w, 2, 0.5, -0.1).is_err());
        assert!(NestedLookaheadState::new(&w, 5, 3, 0.5, 0.5).is_err());
    }

    #[test]
    fn nested_equal_periods_apply_two_interpolations() {
        let p = GameProblem::from(Bilinear2D);
        let alpha = 0.5;
        let mut w = at(1.0, 0.0);
        let start = w.clone();
        let mut st = NestedLookaheadState::new(&w, 3, 3, alpha, alpha).unwrap();
        let mut opt = base(&gda(0.3), &p, &w);
        let mut o = Oracle::full(&p);
        let mut fire = NestedFire::default();
        for _ in 0..3 {
            fire = la_nested_step(&mut opt, &mut o, &mut w, &mut st).unwrap();
        }
        assert!(fire.slow && fire.super_slow);
        let mut f = start.clone();
        for _ in 0..3 {
            gda_step_simultaneous(&mut Oracle::full(&p), &mut f, StepSizes::shared(0.3)).unwrap();
        }
        // Both levels pull towards the same start point with the same α.
        for i in 0..2 {
            let s = start.as_slice()[i];
            let once = s + alpha * (f.as_slice()[i] - s);
            let twice = s + alpha * (once - s);
            assert!((w.as_slice()[i] - twice).abs() < 1e-15);
        }
        assert_eq!(st.slow, w);
        assert_eq!(st.super_slow, w);
    }

    #[test]
    fn nested_outer_backtracks_reduce_distance() {
        let p = GameProblem::from(Bilinear2D);
        let mut w = at(1.0, 1.0);
        let mut st = NestedLookaheadState::new(&w, 5, 15, 0.5, 0.5).unwrap();
        let mut opt = base(&gda(0.5), &p, &w);
        let mut o = Oracle::full(&p);
        let mut fires = 0;
        for _ in 0..600 {
            opt.step(&mut w, &mut o).unwrap();
            let mut probe = w.clone();
            let mut probe_state = st.clone();
            let fire = probe_state.after_update(&mut probe);
            if fire.super_slow {
                // The fast point before this update's backtracks versus the
                // point after the outer one.
                assert!(probe.norm() < w.norm());
                fires += 1;
            }
            st = probe_state;
            w = probe;
        }
        assert_eq!(fires, 40);
    }

    #[test]
    fn alternating_lookahead_matches_joint_on_simultaneous_gda() {
        let p = GameProblem::from(Bilinear2D);
        let eta = StepSizes::shared(0.4);
        let mut a = at(0.9, -0.2);
        let mut b = a.clone();
        let mut alt = AlternatingLookaheadState::new(&a, 3, 3, 0.5, 0.5).unwrap();
        let mut joint = LookaheadState::new(&b, 3, 0.5, 0.5).unwrap();
        let mut opt = base(&gda(0.4), &p, &b);
        for _ in 0..9 {
            la_alternating_step(
                &mut Oracle::full(&p),
                &mut a,
                &mut alt,
                eta,
                Variant::Simultaneous,
                1,
            )
            .unwrap();
            la_minmax_step(&mut opt, &mut Oracle::full(&p), &mut b, &mut joint).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn alternating_lookahead_alpha_one_is_bare() {
        let p = GameProblem::from(Bilinear2D);
        let eta = StepSizes::shared(0.3);
        let mut a = at(0.9, -0.2);
        let mut b = a.clone();
        let mut alt = AlternatingLookaheadState::new(&a, 2, 5, 1.0, 1.0).unwrap();
        for _ in 0..20 {
            la_alternating_step(
                &mut Oracle::full(&p),
                &mut a,
                &mut alt,
                eta,
                Variant::Alternating,
                2,
            )
            .unwrap();
            crate::optimizers::gda_step_alternating(&mut Oracle::full(&p), &mut b, eta, 2).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn single_objective_cycle_contraction() {
        let (gamma, k, alpha) = (0.1, 5, 0.5);
        let mut w = vec![1.0];
        let mut st = SingleLookahead::new(&w, k, alpha).unwrap();
        let factor = 1.0 - alpha * (1.0 - 0.9f64.powi(5));
        for _ in 0..20 {
            let before = w[0];
            for _ in 0..k {
                la_single_objective_step(|x| x.to_vec(), &mut w, gamma, &mut st);
            }
            assert!((w[0] / before - factor).abs() < 1e-12);
        }
    }

    #[test]
    fn single_objective_alpha_one_is_sgd() {
        let mut w = vec![2.0, -1.0];
        let mut st = SingleLookahead::new(&w, 3, 1.0).unwrap();
        let mut v = w.clone();
        for _ in 0..10 {
            la_single_objective_step(
                |x| x.iter().map(|a| 2.0 * a).collect(),
                &mut w,
                0.1,
                &mut st,
            );
            v.iter_mut().for_each(|a| *a -= 0.1 * 2.0 * *a);
        }
        assert_eq!(w, v);
    }

    #[test]
    fn uma_of_one_two_three() {
        let mut t = AverageTracker::new(AverageMode::Uma, &[0.0]).unwrap();
        for x in [1.0, 2.0, 3.0] {
            t.update(&[x]);
        }
        assert_eq!(t.value(), &[2.0]);
    }

    #[test]
    fn ema_of_constant_stays_constant() {
        let mut t = AverageTracker::new(AverageMode::Ema { beta: 0.999 }, &[0.7]).unwrap();
        for _ in 0..1000 {
            t = tracker_update(t, &[0.7]);
        }
        assert_eq!(t.value(), &[0.7]);
    }

    #[test]
    fn ema_closed_form() {
        let (beta, v0, c) = (0.999f64, 3.0, -1.0);
        let mut t = AverageTracker::new(AverageMode::Ema { beta }, &[v0]).unwrap();
        for _ in 0..1000 {
            t.update(&[c]);
        }
        let expect = beta.powi(1000) * v0 + (1.0 - beta.powi(1000)) * c;
        assert!((t.value()[0] - expect).abs() < 1e-9);
    }
}
