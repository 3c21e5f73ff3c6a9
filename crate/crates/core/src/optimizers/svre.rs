use rand::Rng as _;
use rand_distr::{Distribution, Geometric};

use super::{descend_joint, Oracle, StepSizes};
use crate::error::{invalid, Error, Result};
use crate::problems::{Batch, GameProblem, JointPoint};
use crate::rng::Rng;

/// Restarted SVRE: snapshot, full-batch anchor gradient, running average
/// and the remaining length of the current epoch.
#[derive(Debug, Clone)]
pub struct SvreState {
    pub snapshot: JointPoint,
    /// Full-batch joint vector field at the snapshot, `(μ_θ, μ_φ)`.
    pub mu: Vec<f64>,
    pub average: JointPoint,
    /// Iterates folded into `average` since the last restart.
    pub average_count: u64,
    pub restart_prob: f64,
    pub epoch_remaining: u64,
    /// Epochs started so far.
    pub epoch: u64,
    epoch_length: Geometric,
    rng: Rng,
}

impl SvreState {
    pub fn new(
        problem: &GameProblem,
        point: &JointPoint,
        restart_prob: f64,
        rng: Rng,
    ) -> Result<Self> {
        let n = problem.sample_count().ok_or_else(|| {
            Error::Unsupported(format!(
                "SVRE needs a finite-sum problem, {} is deterministic",
                problem.name()
            ))
        })?;
        if !(0.0..=1.0).contains(&restart_prob) {
            return Err(invalid(format!(
                "restart probability must be in [0, 1], got {restart_prob}"
            )));
        }
        let epoch_length = Geometric::new(1.0 / n as f64).map_err(|e| invalid(e.to_string()))?;
        Ok(Self {
            snapshot: point.clone(),
            mu: vec![0.0; point.len()],
            average: point.clone(),
            average_count: 0,
            restart_prob,
            epoch_remaining: 0,
            epoch: 0,
            epoch_length,
            rng,
        })
    }

    pub fn mu_theta(&self) -> &[f64] {
        &self.mu[..self.snapshot.d_theta()]
    }

    pub fn mu_phi(&self) -> &[f64] {
        &self.mu[self.snapshot.d_theta()..]
    }

    /// Outer-loop head: maybe restart from the average, refresh the snapshot
    /// and its full-batch gradient, draw the epoch length.
    fn begin_epoch(&mut self, oracle: &mut Oracle<'_>, point: &mut JointPoint) -> Result<()> {
        // Drawn every epoch, even the first, so the stream does not depend on e.
        let restart = self.rng.random_bool(self.restart_prob);
        if restart && self.epoch > 0 {
            *point = self.average.clone();
            self.average_count = 1;
        }
        self.snapshot = point.clone();
        oracle.sample_full();
        oracle.jvf(&self.snapshot, &mut self.mu)?;
        // `Geometric` counts failures; the epoch length counts trials.
        self.epoch_remaining = 1 + self.epoch_length.sample(&mut self.rng);
        self.epoch += 1;
        Ok(())
    }

    fn corrected(&self, oracle: &Oracle<'_>, point: &JointPoint, out: &mut [f64]) -> Result<()> {
        let mut at_snapshot = vec![0.0; out.len()];
        oracle.jvf(point, out)?;
        oracle.jvf(&self.snapshot, &mut at_snapshot)?;
        for ((o, s), m) in out.iter_mut().zip(&at_snapshot).zip(&self.mu) {
            *o = m + (*o - s);
        }
        Ok(())
    }

    /// One inner iteration: variance-corrected extrapolation and update,
    /// then the online average. Starts a new epoch first when due.
    pub fn step(
        &mut self,
        oracle: &mut Oracle<'_>,
        point: &mut JointPoint,
        eta: StepSizes,
    ) -> Result<()> {
        if self.epoch_remaining == 0 {
            self.begin_epoch(oracle, point)?;
        }
        let mut d = vec![0.0; point.len()];
        oracle.sample();
        self.corrected(oracle, point, &mut d)?;
        let mut half = point.clone();
        descend_joint(&mut half, eta, &d);
        oracle.sample();
        self.corrected(oracle, &half, &mut d)?;
        descend_joint(point, eta, &d);

        let t = self.average_count as f64;
        let (avg, cur) = (self.average.as_mut_slice(), point.as_slice());
        avg.iter_mut()
            .zip(cur)
            .for_each(|(a, x)| *a = (t * *a + x) / (t + 1.0));
        self.average_count += 1;
        self.epoch_remaining -= 1;
        Ok(())
    }
}

/// Runs one complete outer iteration (restart check, snapshot, epoch).
pub fn svre_epoch(
    oracle: &mut Oracle<'_>,
    point: &mut JointPoint,
    state: &mut SvreState,
    eta: StepSizes,
) -> Result<()> {
    state.epoch_remaining = 0;
    state.step(oracle, point, eta)?;
    while state.epoch_remaining > 0 {
        state.step(oracle, point, eta)?;
    }
    Ok(())
}

/// `μ + v_B(ω) − v_B(ω^S)` for an explicit batch.
pub fn corrected_jvf(
    problem: &GameProblem,
    point: &JointPoint,
    snapshot: &JointPoint,
    mu: &[f64],
    batch: Batch<'_>,
) -> Result<Vec<f64>> {
    let now = problem.jvf(point, batch)?;
    let then = problem.jvf(snapshot, batch)?;
    Ok(mu
        .iter()
        .zip(now.iter().zip(&then))
        .map(|(m, (a, b))| m + (a - b))
        .collect())
}
