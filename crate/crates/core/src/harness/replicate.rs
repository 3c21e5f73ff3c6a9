//! Bundled recipes that regenerate the benchmark trajectories.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::{RunConfig, Source, TrackerSpec, Wrapper};
use super::output::{stem, write_run};
use super::presets::{
    batch_tag, eg, gda, ogda, tabled, unroll, BATCHES, FULL_BATCH_ALPHA, FULL_BATCH_ETA,
    FULL_BATCH_K, FULL_BATCH_UNROLL, SBG_BUDGET, TOY_BUDGET,
};
use super::quadratics;
use super::run::run_many;
use crate::error::{Error, Result};
use crate::optimizers::UnrollMode;
use crate::rng::PRNG_ID;

pub const RECIPES: [&str; 5] = [
    "fig-batch-bilinear",
    "fig-stoch-bilinear",
    "fig-ema-stoch",
    "fig-sensitivity-k",
    "quadratics",
];

/// k values of the sensitivity recipe.
pub const SENSITIVITY_KS: [u64; 5] = [5, 50, 500, 1500, 3000];
/// `(batch, η)` combinations of the sensitivity recipe.
pub const SENSITIVITY_SETTINGS: [(usize, f64); 2] = [(16, 0.01), (64, 0.005)];
pub const SENSITIVITY_ALPHA: f64 = 0.3;
/// EMA decay on fast weights.
pub const EMA_BETA: f64 = 0.999;
/// EMA decay on the few slow-weight snapshots of a large-`k` run.
pub const EMA_SLOW_BETA: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct Job {
    pub label: String,
    pub config: RunConfig,
}

fn job(label: impl Into<String>, config: RunConfig) -> Job {
    Job {
        label: label.into(),
        config,
    }
}

fn sbg_full(method: crate::optimizers::Method, wrapper: Wrapper) -> RunConfig {
    RunConfig::new(super::config::ProblemSpec::sbg(0), method, SBG_BUDGET).with_wrapper(wrapper)
}

/// Jobs of a recipe at base seed 0.
pub fn recipe(id: &str) -> Result<Vec<Job>> {
    let la = |alpha| Wrapper::lookahead(FULL_BATCH_K, alpha);
    Ok(match id {
        "fig-batch-bilinear" => vec![
            job("gda", sbg_full(gda(FULL_BATCH_ETA), Wrapper::None)),
            job("gda-eta1e-4", sbg_full(gda(1e-4), Wrapper::None)),
            job(
                "unroll-y",
                sbg_full(
                    unroll(FULL_BATCH_ETA, FULL_BATCH_UNROLL, UnrollMode::Y),
                    Wrapper::None,
                ),
            ),
            job(
                "unroll-xy",
                sbg_full(
                    unroll(FULL_BATCH_ETA, FULL_BATCH_UNROLL, UnrollMode::Xy),
                    Wrapper::None,
                ),
            ),
            job("lagda-a0.4", sbg_full(gda(FULL_BATCH_ETA), la(0.4))),
            job(
                "lagda-a0.5",
                sbg_full(gda(FULL_BATCH_ETA), la(FULL_BATCH_ALPHA)),
            ),
            job("eg", sbg_full(eg(FULL_BATCH_ETA), Wrapper::None)),
            job("laeg", sbg_full(eg(FULL_BATCH_ETA), la(FULL_BATCH_ALPHA))),
            job("ogda", sbg_full(ogda(FULL_BATCH_ETA), Wrapper::None)),
            job(
                "laogda",
                sbg_full(ogda(FULL_BATCH_ETA), la(FULL_BATCH_ALPHA)),
            ),
        ],
        "fig-stoch-bilinear" => stochastic(&["adam", "extra-adam", "eg", "lagda", "svre"], false)?,
        "fig-ema-stoch" => stochastic(&["adam", "extra-adam", "eg", "lagda"], true)?,
        "fig-sensitivity-k" => {
            let mut jobs = Vec::new();
            for (b, eta) in SENSITIVITY_SETTINGS {
                let base = sbg_full(gda(eta), Wrapper::None).with_batch(Some(b));
                jobs.push(job(format!("b{b}-gda"), base.clone()));
                for k in SENSITIVITY_KS {
                    jobs.push(job(
                        format!("b{b}-lagda-k{k}"),
                        base.clone()
                            .with_wrapper(Wrapper::lookahead(k, SENSITIVITY_ALPHA)),
                    ));
                }
            }
            jobs
        }
        "quadratics" => {
            let s = quadratics::study()?;
            s.jobs(TOY_BUDGET)
                .into_iter()
                .map(|(l, c, _)| job(l, c))
                .collect()
        }
        _ => return Err(Error::UnknownPreset(id.to_string())),
    })
}

/// Every tabled method at every batch size it has a row for.
fn stochastic(methods: &[&str], ema: bool) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for batch in BATCHES {
        for &m in methods {
            let Some((method, la)) = tabled(m, batch) else {
                continue;
            };
            let mut c = sbg_full(method, Wrapper::None).with_batch(batch);
            if let Some((k, alpha)) = la {
                c = c.with_wrapper(Wrapper::lookahead(k, alpha));
            }
            if ema {
                c = c.with_tracker(TrackerSpec::ema(EMA_BETA, Source::Fast));
                if la.is_some() {
                    c = c.with_tracker(TrackerSpec::ema(EMA_SLOW_BETA, Source::Slow));
                }
            }
            c.preset = Some(format!("sbg-{}-{m}", batch_tag(batch)));
            jobs.push(job(format!("{}-{m}", batch_tag(batch)), c));
        }
    }
    Ok(jobs)
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub label: String,
    pub seed: u64,
    pub data_seed: Option<u64>,
    pub csv: String,
    pub metadata: String,
    pub config_sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub recipe: String,
    pub version: &'static str,
    pub prng: &'static str,
    pub base_seed: u64,
    pub seeds: u64,
    pub runs: Vec<ManifestEntry>,
}

/// Runs every job of `id` for replicates `0..seeds` offset from
/// `base_seed`, writing one CSV and metadata file per run plus
/// `manifest.json`. Output bytes do not depend on `threads`.
pub fn replicate(
    id: &str,
    out: &Path,
    base_seed: u64,
    seeds: u64,
    threads: Option<usize>,
) -> Result<Manifest> {
    if seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let jobs = recipe(id)?;
    let mut configs = Vec::new();
    let mut labels = Vec::new();
    for j in &jobs {
        let base = j.config.replicate(base_seed);
        for s in 0..seeds {
            configs.push(base.replicate(s));
            labels.push((j.label.clone(), s));
        }
    }
    let outs = run_many(&configs, threads)?;
    let mut runs = Vec::new();
    for ((label, s), (config, o)) in labels.iter().zip(configs.iter().zip(&outs)) {
        let name = stem(label, *s, seeds);
        write_run(out, &name, o)?;
        runs.push(ManifestEntry {
            label: label.clone(),
            seed: config.seed,
            data_seed: config.problem.data_seed(),
            csv: format!("{name}.csv"),
            metadata: format!("{name}.json"),
            config_sha256: o.metadata.config_sha256.clone(),
        });
    }
    let manifest = Manifest {
        recipe: id.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        prng: PRNG_ID,
        base_seed,
        seeds,
        runs,
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_builds_valid_configs() {
        for id in RECIPES {
            let jobs = recipe(id).unwrap();
            assert!(!jobs.is_empty());
            for j in &jobs {
                j.config
                    .validate()
                    .unwrap_or_else(|e| panic!("{id}/{}: {e}", j.label));
            }
            let mut labels: Vec<_> = jobs.iter().map(|j| j.label.as_str()).collect();
            labels.sort_unstable();
            labels.dedup();
            assert_eq!(labels.len(), jobs.len(), "{id} has duplicate labels");
        }
        assert!(recipe("fig-unknown").is_err());
    }

    #[test]
    fn stochastic_recipe_covers_the_table() {
        let labels: Vec<String> = recipe("fig-stoch-bilinear")
            .unwrap()
            .into_iter()
            .map(|j| j.label)
            .collect();
        assert_eq!(labels.len(), 17);
        assert!(labels.contains(&"b1-svre".to_string()));
        assert!(labels.contains(&"full-lagda".to_string()));
    }

    #[test]
    fn table_rows_match_presets() {
        for j in recipe("fig-stoch-bilinear").unwrap() {
            let p = crate::harness::presets::preset(&format!("sbg-{}", j.label)).unwrap();
            assert_eq!(p.method, j.config.method);
            assert_eq!(p.wrapper, j.config.wrapper);
            assert_eq!(p.batch_size, j.config.batch_size);
        }
    }
}
