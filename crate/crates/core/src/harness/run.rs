use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{RunConfig, Source, TrackerSpec, Wrapper};
use crate::error::{invalid, Error, Result};
use crate::lookahead::{
    la_alternating_step, AlternatingLookaheadState, AverageMode, AverageTracker, LookaheadState,
    NestedLookaheadState,
};
use crate::optimizers::{pass_accounting, BaseOptimizer, Method, Oracle, PassCost, Variant};
use crate::problems::{BatchSampler, GameProblem, JointPoint};
use crate::rng::{self, Stream, PRNG_ID};

/// Which iterate a trajectory row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Fast,
    Slow,
    SuperSlow,
    Ema,
    Uma,
    EmaSlow,
    UmaSlow,
}

impl Series {
    pub const ALL: [Series; 7] = [
        Series::Fast,
        Series::Slow,
        Series::SuperSlow,
        Series::Ema,
        Series::Uma,
        Series::EmaSlow,
        Series::UmaSlow,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Series::Fast => "fast",
            Series::Slow => "slow",
            Series::SuperSlow => "super_slow",
            Series::Ema => "ema",
            Series::Uma => "uma",
            Series::EmaSlow => "ema_slow",
            Series::UmaSlow => "uma_slow",
        }
    }

    pub fn of_tracker(t: &TrackerSpec) -> Series {
        match (t.average, t.source) {
            (AverageMode::Ema { .. }, Source::Fast) => Series::Ema,
            (AverageMode::Uma, Source::Fast) => Series::Uma,
            (AverageMode::Ema { .. }, Source::Slow) => Series::EmaSlow,
            (AverageMode::Uma, Source::Slow) => Series::UmaSlow,
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Series::ALL
            .into_iter()
            .find(|x| x.tag() == s)
            .ok_or_else(|| invalid(format!("unknown series `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub update: u64,
    pub passes: f64,
    pub distance: f64,
    pub series: Series,
}

pub const CSV_HEADER: &str = "update,passes,distance,series";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub rows: Vec<Row>,
}

impl Trajectory {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn series(&self, s: Series) -> impl Iterator<Item = &Row> + '_ {
        self.rows.iter().filter(move |r| r.series == s)
    }

    pub fn active_series(&self) -> Vec<Series> {
        let mut out: Vec<Series> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.series) {
                out.push(r.series);
            }
        }
        out
    }

    pub fn final_distance(&self, s: Series) -> Option<f64> {
        self.series(s).last().map(|r| r.distance)
    }

    /// Passes at the first row of `s` with distance below `threshold`.
    pub fn passes_to_reach(&self, s: Series, threshold: f64) -> Option<f64> {
        self.series(s)
            .find(|r| r.distance < threshold)
            .map(|r| r.passes)
    }

    /// Shortest round-trip floats, LF line endings.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:?},{:?},{}",
                r.update, r.passes, r.distance, r.series
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Config(format!("CSV header must be `{CSV_HEADER}`")));
        }
        let bad = |line: &str| Error::Config(format!("malformed CSV row `{line}`"));
        let rows = lines
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 4 {
                    return Err(bad(line));
                }
                Ok(Row {
                    update: f[0].parse().map_err(|_| bad(line))?,
                    passes: f[1].parse().map_err(|_| bad(line))?,
                    distance: f[2].parse().map_err(|_| bad(line))?,
                    series: f[3].parse().map_err(|_| bad(line))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }
}

/// Sidecar JSON written next to each trajectory CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: &'static str,
    pub prng: &'static str,
    pub preset: Option<String>,
    pub run_seed: u64,
    pub data_seed: Option<u64>,
    pub init_law: &'static str,
    pub config: RunConfig,
    pub config_sha256: String,
    pub pass_cost: PassCostJson,
    pub updates: u64,
    pub passes: f64,
    pub initial_distance: f64,
    /// True when the iterate overflowed and the run stopped early.
    pub non_finite: bool,
    pub final_distance: BTreeMap<Series, f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PassCostJson {
    pub per_update: f64,
    pub per_snapshot: f64,
}

impl From<PassCost> for PassCostJson {
    fn from(c: PassCost) -> Self {
        Self {
            per_update: c.per_update,
            per_snapshot: c.per_snapshot,
        }
    }
}

impl RunMetadata {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub metadata: RunMetadata,
    /// Fast iterate at the end of the run.
    pub final_point: JointPoint,
}

pub const INIT_LAW: &str = "iid normal(0, 1/d) per coordinate, d = problem dimension per player";

/// Starting point drawn from the run seed's init stream.
pub fn initial_point(config: &RunConfig, problem: &GameProblem) -> Result<JointPoint> {
    let (dt, dp) = (problem.d_theta(), problem.d_phi());
    if let Some(init) = &config.init {
        return JointPoint::from_joint(init.clone(), dt);
    }
    let mut rng = rng::stream(config.seed, Stream::Init);
    let scale = 1.0 / (dt as f64).sqrt();
    let data = (0..dt + dp)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    JointPoint::from_joint(data, dt)
}

enum WrapperState {
    None,
    Lookahead(LookaheadState),
    Nested(NestedLookaheadState),
    Alternating {
        state: AlternatingLookaheadState,
        variant: Variant,
        ratio: usize,
    },
}

impl WrapperState {
    fn new(wrapper: &Wrapper, method: &Method, point: &JointPoint) -> Result<Self> {
        let (a_t, a_p) = wrapper.alphas();
        Ok(match *wrapper {
            Wrapper::None => WrapperState::None,
            Wrapper::Lookahead { k, .. } => {
                WrapperState::Lookahead(LookaheadState::new(point, k, a_t, a_p)?)
            }
            Wrapper::Nested { k_s, k_ss, .. } => {
                WrapperState::Nested(NestedLookaheadState::new(point, k_s, k_ss, a_t, a_p)?)
            }
            Wrapper::Alternating { k_theta, k_phi, .. } => {
                let Method::Gda { variant, ratio, .. } = *method else {
                    return Err(Error::Unsupported(
                        "per-player lookahead is implemented for GDA only".into(),
                    ));
                };
                WrapperState::Alternating {
                    state: AlternatingLookaheadState::new(point, k_theta, k_phi, a_t, a_p)?,
                    variant,
                    ratio,
                }
            }
        })
    }

    /// One base update plus bookkeeping. Returns whether any slow copy moved.
    fn step(
        &mut self,
        base: &mut BaseOptimizer,
        oracle: &mut Oracle<'_>,
        point: &mut JointPoint,
        eta: crate::optimizers::StepSizes,
    ) -> Result<bool> {
        match self {
            WrapperState::None => base.step(point, oracle).map(|_| false),
            WrapperState::Lookahead(la) => {
                base.step(point, oracle)?;
                Ok(la.after_update(point))
            }
            WrapperState::Nested(la) => {
                base.step(point, oracle)?;
                let fire = la.after_update(point);
                Ok(fire.slow || fire.super_slow)
            }
            WrapperState::Alternating {
                state,
                variant,
                ratio,
            } => {
                let before = (
                    state.theta_updates / state.k_theta,
                    state.phi_updates / state.k_phi,
                );
                la_alternating_step(oracle, point, state, eta, *variant, *ratio)?;
                Ok(before
                    != (
                        state.theta_updates / state.k_theta,
                        state.phi_updates / state.k_phi,
                    ))
            }
        }
    }

    fn slow(&self) -> Option<JointPoint> {
        match self {
            WrapperState::None => None,
            WrapperState::Lookahead(la) => Some(la.slow.clone()),
            WrapperState::Nested(la) => Some(la.slow.clone()),
            WrapperState::Alternating { state, .. } => {
                JointPoint::new(state.slow_theta.clone(), state.slow_phi.clone()).ok()
            }
        }
    }

    fn super_slow(&self) -> Option<&JointPoint> {
        match self {
            WrapperState::Nested(la) => Some(&la.super_slow),
            _ => None,
        }
    }
}

struct Tracked {
    series: Series,
    source: Source,
    tracker: AverageTracker,
}

/// Executes `config` until the pass budget is spent.
///
/// Rows are logged at pass 0, whenever another `eval_stride` passes have
/// elapsed, and once more at the end. A run whose iterate overflows stops
/// and logs infinite distances.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let problem = config.validate()?;
    let n = problem.sample_count().unwrap_or(1);
    let mut point = initial_point(config, &problem)?;
    let sampler = BatchSampler::new(
        &problem,
        config.batch_size,
        rng::stream(config.seed, Stream::Sampling),
    )?;
    let mut oracle = Oracle::new(&problem, sampler);
    let mut base = BaseOptimizer::new(
        &config.method,
        &problem,
        &point,
        config.batch_size,
        rng::stream(config.seed, Stream::Method),
    )?;
    let mut wrapper = WrapperState::new(&config.wrapper, &config.method, &point)?;
    let eta = config.method.step_sizes();
    let mut tracked = config
        .trackers
        .iter()
        .map(|t| {
            Ok(Tracked {
                series: Series::of_tracker(t),
                source: t.source,
                tracker: AverageTracker::new(t.average, point.as_slice())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let initial_distance = problem.distance_to_opt(&point);
    let scale = if config.normalize && initial_distance > 0.0 {
        initial_distance
    } else {
        1.0
    };
    let dist = |x: &JointPoint| problem.distance_to_opt(x) / scale;
    let dist_slice = |x: &[f64]| match JointPoint::from_joint(x.to_vec(), problem.d_theta()) {
        Ok(p) => dist(&p),
        Err(_) => f64::INFINITY,
    };

    let mut rows = Vec::new();
    let mut update = 0u64;
    let mut non_finite = false;
    let record = |rows: &mut Vec<Row>,
                  update: u64,
                  passes: f64,
                  point: &JointPoint,
                  wrapper: &WrapperState,
                  tracked: &[Tracked],
                  broken: bool| {
        let mut push = |series, distance: f64| {
            rows.push(Row {
                update,
                passes,
                distance: if broken { f64::INFINITY } else { distance },
                series,
            })
        };
        push(Series::Fast, dist(point));
        if let Some(slow) = wrapper.slow() {
            push(Series::Slow, dist(&slow));
        }
        if let Some(ss) = wrapper.super_slow() {
            push(Series::SuperSlow, dist(ss));
        }
        for t in tracked {
            push(t.series, dist_slice(t.tracker.value()));
        }
    };

    if config.budget_passes > 0.0 {
        record(&mut rows, 0, 0.0, &point, &wrapper, &tracked, false);
        let mut last_logged = 0u64;
        let mut next_eval = config.eval_stride;
        while oracle.passes() < config.budget_passes {
            let moved = match wrapper.step(&mut base, &mut oracle, &mut point, eta) {
                Ok(m) => m,
                Err(Error::NonFinite(_)) => {
                    non_finite = true;
                    false
                }
                Err(e) => return Err(e),
            };
            update += 1;
            if non_finite || !point.is_finite() {
                non_finite = true;
                record(
                    &mut rows,
                    update,
                    oracle.passes(),
                    &point,
                    &wrapper,
                    &tracked,
                    true,
                );
                last_logged = update;
                break;
            }
            for t in &mut tracked {
                match t.source {
                    Source::Fast => t.tracker.update(point.as_slice()),
                    Source::Slow if moved => {
                        if let Some(slow) = wrapper.slow() {
                            t.tracker.update(slow.as_slice());
                        }
                    }
                    Source::Slow => {}
                }
            }
            let passes = oracle.passes();
            if passes >= next_eval {
                record(&mut rows, update, passes, &point, &wrapper, &tracked, false);
                last_logged = update;
                next_eval = ((passes / config.eval_stride).floor() + 1.0) * config.eval_stride;
            }
        }
        if last_logged != update {
            record(
                &mut rows,
                update,
                oracle.passes(),
                &point,
                &wrapper,
                &tracked,
                false,
            );
        }
    }

    let trajectory = Trajectory { rows };
    let final_distance = Series::ALL
        .into_iter()
        .filter_map(|s| trajectory.final_distance(s).map(|d| (s, d)))
        .collect();
    let metadata = RunMetadata {
        version: env!("CARGO_PKG_VERSION"),
        prng: PRNG_ID,
        preset: config.preset.clone(),
        run_seed: config.seed,
        data_seed: config.problem.data_seed(),
        init_law: if config.init.is_some() {
            "explicit"
        } else {
            INIT_LAW
        },
        config: config.clone(),
        config_sha256: config.hash()?,
        pass_cost: pass_accounting(&config.method, config.batch_size, n).into(),
        updates: update,
        passes: oracle.passes(),
        initial_distance,
        non_finite,
        final_distance,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        trajectory,
        metadata,
        final_point: point,
    })
}

/// Runs replicates `0..seeds` of `config` on up to `threads` worker threads
/// (`None` uses rayon's default). Results come back in replicate order.
pub fn run_seeds(config: &RunConfig, seeds: u64, threads: Option<usize>) -> Result<Vec<RunOutput>> {
    let configs: Vec<RunConfig> = (0..seeds).map(|s| config.replicate(s)).collect();
    run_many(&configs, threads)
}

/// Runs independent configs in parallel; output order matches input order.
pub fn run_many(configs: &[RunConfig], threads: Option<usize>) -> Result<Vec<RunOutput>> {
    use rayon::prelude::*;
    let go = || configs.par_iter().map(run).collect::<Result<Vec<_>>>();
    match threads {
        None => go(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(go),
    }
}

/// Median of a non-empty sample; NaN sorts last.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
