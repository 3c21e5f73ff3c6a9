//! Analytic two-player testbeds.
//!
//! Every problem is zero-sum with loss `L(θ, φ)`: the min player descends `L`
//! and the max player descends its own loss `-L`. All sign conventions live
//! here, so the optimizers only ever subtract gradients.
//!
//! The joint vector field of every problem is affine, which is what makes
//! the closed-form optima and the constant Jacobians below exact.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Rng, Stream};

/// The concatenated iterate `ω = (θ, φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    data: Vec<f64>,
    d_theta: usize,
}

impl JointPoint {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let d_theta = theta.len();
        let mut data = theta;
        data.extend(phi);
        Self::from_joint(data, d_theta)
    }

    /// Builds a point from an already concatenated vector.
    pub fn from_joint(data: Vec<f64>, d_theta: usize) -> Result<Self> {
        if d_theta > data.len() {
            return Err(Error::DimensionMismatch {
                expected: d_theta,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("joint point"));
        }
        Ok(Self { data, d_theta })
    }

    pub fn zeros(d_theta: usize, d_phi: usize) -> Self {
        Self {
            data: vec![0.0; d_theta + d_phi],
            d_theta,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.data[..self.d_theta]
    }

    pub fn phi(&self) -> &[f64] {
        &self.data[self.d_theta..]
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.data[..self.d_theta]
    }

    pub fn phi_mut(&mut self) -> &mut [f64] {
        &mut self.data[self.d_theta..]
    }

    pub fn split_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        self.data.split_at_mut(self.d_theta)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn d_theta(&self) -> usize {
        self.d_theta
    }

    pub fn d_phi(&self) -> usize {
        self.data.len() - self.d_theta
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &JointPoint) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self ← anchor + α (self − anchor)`, per player. Evaluated as
    /// `(1 − α)·anchor + α·self` so that α = 1 leaves `self` bit-identical.
    pub fn pull_towards(&mut self, anchor: &JointPoint, alpha_theta: f64, alpha_phi: f64) {
        let d = self.d_theta;
        for (i, (x, a)) in self.data.iter_mut().zip(&anchor.data).enumerate() {
            let alpha = if i < d { alpha_theta } else { alpha_phi };
            *x = (1.0 - alpha) * a + alpha * *x;
        }
    }
}

/// Which samples a gradient query averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batch<'a> {
    Full,
    Samples(&'a [usize]),
}

/// `L(x, y) = x·y`, the scalar bilinear game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Bilinear2D;

/// `L(x, y) = a·x² + b·x·y + c·y²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic2D {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic2D {
    /// `-3x² + 4xy - y²`
    pub const QP1: Quadratic2D = Quadratic2D {
        a: -3.0,
        b: 4.0,
        c: -1.0,
    };
    /// `x² + 5xy - y²`
    pub const QP2: Quadratic2D = Quadratic2D {
        a: 1.0,
        b: 5.0,
        c: -1.0,
    };
}

/// Finite-sum bilinear game
/// `L(θ, φ) = 1/n Σ_i θᵀb_i + θᵀA_iφ + c_iᵀφ` with `A_i = e_i e_iᵀ`.
///
/// The `A_i` are never stored: sample `i` couples only coordinate `i` of
/// the two players, so the mean matrix is `I / d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticBilinear {
    n: usize,
    d: usize,
    seed: u64,
    /// Row-major `n × d`.
    b: Vec<f64>,
    c: Vec<f64>,
    b_mean: Vec<f64>,
    c_mean: Vec<f64>,
}

impl StochasticBilinear {
    /// Draws `b_i, c_i` with i.i.d. `N(0, 1/d)` entries under `seed`.
    pub fn new(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("stochastic bilinear needs n ≥ 1"));
        }
        if n != d {
            return Err(invalid(format!(
                "stochastic bilinear needs n = d, got n = {n}, d = {d}"
            )));
        }
        let mut rng = rng::stream(seed, Stream::Data);
        let scale = (1.0 / d as f64).sqrt();
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let b = draw(n * d);
        let c = draw(n * d);
        let b_mean = column_mean(&b, n, d);
        let c_mean = column_mean(&c, n, d);
        Ok(Self {
            n,
            d,
            seed,
            b,
            c,
            b_mean,
            c_mean,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn b_row(&self, i: usize) -> &[f64] {
        &self.b[i * self.d..(i + 1) * self.d]
    }

    pub fn c_row(&self, i: usize) -> &[f64] {
        &self.c[i * self.d..(i + 1) * self.d]
    }

    pub fn b_mean(&self) -> &[f64] {
        &self.b_mean
    }

    pub fn c_mean(&self) -> &[f64] {
        &self.c_mean
    }

    /// Diagonal of the mean coupling matrix `Ā`.
    pub fn mean_coupling(&self) -> f64 {
        1.0 / self.n as f64
    }

    fn check_indices(&self, idx: &[usize]) -> Result<()> {
        if idx.is_empty() {
            return Err(invalid("empty minibatch"));
        }
        match idx.iter().find(|&&i| i >= self.n) {
            Some(&index) => Err(Error::IndexOutOfRange { index, n: self.n }),
            None => Ok(()),
        }
    }

    /// `mean_B(rows) + 1/|B| Σ_{i∈B} other_i e_i`, negated when `negate`.
    fn batch_gradient(
        &self,
        rows: &[f64],
        mean: &[f64],
        other: &[f64],
        batch: Batch<'_>,
        negate: bool,
        out: &mut [f64],
    ) {
        match batch {
            Batch::Full => {
                let w = self.mean_coupling();
                for ((o, m), x) in out.iter_mut().zip(mean).zip(other) {
                    *o = m + w * x;
                }
            }
            Batch::Samples(idx) => {
                let w = 1.0 / idx.len() as f64;
                out.iter_mut().for_each(|o| *o = 0.0);
                for &i in idx {
                    let row = &rows[i * self.d..(i + 1) * self.d];
                    out.iter_mut().zip(row).for_each(|(o, r)| *o += r);
                }
                out.iter_mut().for_each(|o| *o *= w);
                for &i in idx {
                    out[i] += w * other[i];
                }
            }
        }
        if negate {
            out.iter_mut().for_each(|o| *o = -*o);
        }
    }
}

fn column_mean(m: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for row in m.chunks_exact(d) {
        mean.iter_mut().zip(row).for_each(|(a, r)| *a += r);
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    mean
}

/// A game instance with gradient oracles, Jacobian and optimum.
#[derive(Debug, Clone, PartialEq)]
pub enum GameProblem {
    Bilinear2D(Bilinear2D),
    Quadratic(Quadratic2D),
    StochasticBilinear(StochasticBilinear),
}

impl From<Bilinear2D> for GameProblem {
    fn from(p: Bilinear2D) -> Self {
        GameProblem::Bilinear2D(p)
    }
}

impl From<Quadratic2D> for GameProblem {
    fn from(p: Quadratic2D) -> Self {
        GameProblem::Quadratic(p)
    }
}

impl From<StochasticBilinear> for GameProblem {
    fn from(p: StochasticBilinear) -> Self {
        GameProblem::StochasticBilinear(p)
    }
}

impl GameProblem {
    pub fn d_theta(&self) -> usize {
        match self {
            GameProblem::StochasticBilinear(p) => p.d,
            _ => 1,
        }
    }

    pub fn d_phi(&self) -> usize {
        self.d_theta()
    }

    pub fn dim(&self) -> usize {
        self.d_theta() + self.d_phi()
    }

    /// Number of samples for finite-sum problems.
    pub fn sample_count(&self) -> Option<usize> {
        match self {
            GameProblem::StochasticBilinear(p) => Some(p.n),
            _ => None,
        }
    }

    pub fn is_finite_sum(&self) -> bool {
        self.sample_count().is_some()
    }

    pub fn name(&self) -> &'static str {
        match self {
            GameProblem::Bilinear2D(_) => "bilinear2d",
            GameProblem::Quadratic(_) => "quadratic2d",
            GameProblem::StochasticBilinear(_) => "stochastic-bilinear",
        }
    }

    pub fn check_point(&self, point: &JointPoint) -> Result<()> {
        if point.d_theta() != self.d_theta() {
            return Err(Error::DimensionMismatch {
                expected: self.d_theta(),
                got: point.d_theta(),
            });
        }
        if point.d_phi() != self.d_phi() {
            return Err(Error::DimensionMismatch {
                expected: self.d_phi(),
                got: point.d_phi(),
            });
        }
        Ok(())
    }

    pub fn check_batch(&self, batch: Batch<'_>) -> Result<()> {
        match (self, batch) {
            (_, Batch::Full) => Ok(()),
            (GameProblem::StochasticBilinear(p), Batch::Samples(idx)) => p.check_indices(idx),
            (_, Batch::Samples(_)) => Err(Error::Unsupported(format!(
                "{} has no samples to batch over",
                self.name()
            ))),
        }
    }

    fn check_slices(&self, theta: &[f64], phi: &[f64]) -> Result<()> {
        if theta.len() != self.d_theta() {
            return Err(Error::DimensionMismatch {
                expected: self.d_theta(),
                got: theta.len(),
            });
        }
        if phi.len() != self.d_phi() {
            return Err(Error::DimensionMismatch {
                expected: self.d_phi(),
                got: phi.len(),
            });
        }
        Ok(())
    }

    /// `L(θ, φ)` over `batch`; the max player's own loss is its negation.
    pub fn loss(&self, theta: &[f64], phi: &[f64], batch: Batch<'_>) -> Result<f64> {
        self.check_slices(theta, phi)?;
        self.check_batch(batch)?;
        Ok(match self {
            GameProblem::Bilinear2D(_) => theta[0] * phi[0],
            GameProblem::Quadratic(q) => {
                let (x, y) = (theta[0], phi[0]);
                q.a * x * x + q.b * x * y + q.c * y * y
            }
            GameProblem::StochasticBilinear(p) => {
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                match batch {
                    Batch::Full => {
                        dot(theta, &p.b_mean)
                            + dot(&p.c_mean, phi)
                            + p.mean_coupling() * dot(theta, phi)
                    }
                    Batch::Samples(idx) => {
                        let total: f64 = idx
                            .iter()
                            .map(|&i| {
                                dot(theta, p.b_row(i)) + theta[i] * phi[i] + dot(p.c_row(i), phi)
                            })
                            .sum();
                        total / idx.len() as f64
                    }
                }
            }
        })
    }

    /// Gradient of the min player's loss `L` with respect to `θ`.
    pub fn grad_theta_into(
        &self,
        theta: &[f64],
        phi: &[f64],
        batch: Batch<'_>,
        out: &mut [f64],
    ) -> Result<()> {
        self.check_slices(theta, phi)?;
        self.check_batch(batch)?;
        match self {
            GameProblem::Bilinear2D(_) => out[0] = phi[0],
            GameProblem::Quadratic(q) => out[0] = 2.0 * q.a * theta[0] + q.b * phi[0],
            GameProblem::StochasticBilinear(p) => {
                p.batch_gradient(&p.b, &p.b_mean, phi, batch, false, out)
            }
        }
        Ok(())
    }

    /// Gradient of the max player's own loss `-L` with respect to `φ`.
    pub fn grad_phi_into(
        &self,
        theta: &[f64],
        phi: &[f64],
        batch: Batch<'_>,
        out: &mut [f64],
    ) -> Result<()> {
        self.check_slices(theta, phi)?;
        self.check_batch(batch)?;
        match self {
            GameProblem::Bilinear2D(_) => out[0] = -theta[0],
            GameProblem::Quadratic(q) => out[0] = -(q.b * theta[0] + 2.0 * q.c * phi[0]),
            GameProblem::StochasticBilinear(p) => {
                p.batch_gradient(&p.c, &p.c_mean, theta, batch, true, out)
            }
        }
        Ok(())
    }

    /// Both players' own-loss gradients at `point`.
    pub fn player_gradients(
        &self,
        point: &JointPoint,
        batch: Batch<'_>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(point)?;
        let mut gt = vec![0.0; self.d_theta()];
        let mut gp = vec![0.0; self.d_phi()];
        self.grad_theta_into(point.theta(), point.phi(), batch, &mut gt)?;
        self.grad_phi_into(point.theta(), point.phi(), batch, &mut gp)?;
        Ok((gt, gp))
    }

    /// Joint vector field `v(ω) = (∇_θ L^θ, ∇_φ L^φ)` written into `out`.
    pub fn jvf_into(&self, point: &JointPoint, batch: Batch<'_>, out: &mut [f64]) -> Result<()> {
        self.check_point(point)?;
        if out.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: out.len(),
            });
        }
        let (gt, gp) = out.split_at_mut(self.d_theta());
        self.grad_theta_into(point.theta(), point.phi(), batch, gt)?;
        self.grad_phi_into(point.theta(), point.phi(), batch, gp)
    }

    pub fn jvf(&self, point: &JointPoint, batch: Batch<'_>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.jvf_into(point, batch, &mut out)?;
        Ok(out)
    }

    /// The constant Jacobian of the full-batch joint vector field.
    pub fn jvf_jacobian(&self) -> DMatrix<f64> {
        match self {
            GameProblem::Bilinear2D(_) => DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            GameProblem::Quadratic(q) => {
                DMatrix::from_row_slice(2, 2, &[2.0 * q.a, q.b, -q.b, -2.0 * q.c])
            }
            GameProblem::StochasticBilinear(p) => {
                let d = p.d;
                let w = p.mean_coupling();
                let mut j = DMatrix::zeros(2 * d, 2 * d);
                for i in 0..d {
                    j[(i, d + i)] = w;
                    j[(d + i, i)] = -w;
                }
                j
            }
        }
    }

    /// Closed-form equilibrium.
    pub fn optimum(&self) -> JointPoint {
        match self {
            GameProblem::StochasticBilinear(p) => {
                // Ā = I/d, so θ* = -d·c̄ and φ* = -d·b̄.
                let scale = p.d as f64;
                let theta = p.c_mean.iter().map(|c| -scale * c).collect();
                let phi = p.b_mean.iter().map(|b| -scale * b).collect();
                JointPoint::new(theta, phi).expect("finite optimum")
            }
            _ => JointPoint::zeros(1, 1),
        }
    }

    pub fn distance_to_opt(&self, point: &JointPoint) -> f64 {
        match self {
            GameProblem::StochasticBilinear(_) => point.distance(&self.optimum()),
            _ => point.norm(),
        }
    }
}

/// Per-run source of minibatches.
#[derive(Debug, Clone)]
pub enum BatchSampler {
    Full,
    Epoch(Box<EpochSampler>),
}

impl BatchSampler {
    /// `batch_size = None` (or a batch covering all samples) means full batch.
    pub fn new(problem: &GameProblem, batch_size: Option<usize>, rng: Rng) -> Result<Self> {
        match (problem.sample_count(), batch_size) {
            (_, None) => Ok(BatchSampler::Full),
            (Some(n), Some(b)) if b >= n => Ok(BatchSampler::Full),
            (Some(n), Some(b)) => Ok(BatchSampler::Epoch(Box::new(EpochSampler::new(n, b, rng)?))),
            (None, Some(_)) => Err(Error::Unsupported(format!(
                "minibatches need a finite-sum problem, {} is deterministic",
                problem.name()
            ))),
        }
    }

    pub fn next_batch(&mut self) -> Batch<'_> {
        match self {
            BatchSampler::Full => Batch::Full,
            BatchSampler::Epoch(s) => Batch::Samples(s.next_batch()),
        }
    }

    /// Samples consumed by one query, `None` for a full-batch query.
    pub fn batch_size(&self) -> Option<usize> {
        match self {
            BatchSampler::Full => None,
            BatchSampler::Epoch(s) => Some(s.batch_size),
        }
    }

    pub fn rng_mut(&mut self) -> Option<&mut Rng> {
        match self {
            BatchSampler::Full => None,
            BatchSampler::Epoch(s) => Some(&mut s.rng),
        }
    }
}

/// Sampling without replacement, reshuffling at each epoch boundary.
///
/// When the batch size does not divide `n`, a batch may straddle two epochs;
/// indices are kept unique within the batch and each epoch still visits
/// every index exactly once.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    n: usize,
    batch_size: usize,
    perm: Vec<usize>,
    pos: usize,
    batch: Vec<usize>,
    rng: Rng,
}

impl EpochSampler {
    pub fn new(n: usize, batch_size: usize, mut rng: Rng) -> Result<Self> {
        if batch_size == 0 || batch_size > n {
            return Err(invalid(format!(
                "batch size must be in 1..={n}, got {batch_size}"
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        Ok(Self {
            n,
            batch_size,
            perm,
            pos: 0,
            batch: Vec::with_capacity(batch_size),
            rng,
        })
    }

    pub fn next_batch(&mut self) -> &[usize] {
        self.batch.clear();
        while self.batch.len() < self.batch_size {
            if self.pos == self.n {
                self.perm.shuffle(&mut self.rng);
                self.pos = 0;
            }
            let mut pick = self.pos;
            if !self.batch.is_empty() {
                // Only possible right after a reshuffle: skip indices already taken.
                while self.batch.contains(&self.perm[pick]) {
                    pick += 1;
                }
                self.perm.swap(self.pos, pick);
            }
            self.batch.push(self.perm[self.pos]);
            self.pos += 1;
        }
        &self.batch
    }
}
