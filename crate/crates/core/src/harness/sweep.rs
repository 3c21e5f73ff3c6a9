use std::io::Write;

use super::config::{RunConfig, Wrapper};
use super::run::{median, run_many, Series};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: u64,
    pub seed: u64,
    pub final_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_HEADER: &str = "k,seed,final_distance";

impl SweepTable {
    pub fn ks(&self) -> Vec<u64> {
        let mut ks: Vec<u64> = Vec::new();
        for r in &self.rows {
            if !ks.contains(&r.k) {
                ks.push(r.k);
            }
        }
        ks
    }

    pub fn median(&self, k: u64) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.k == k)
            .map(|r| r.final_distance)
            .collect();
        (!v.is_empty()).then(|| median(&v))
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{SWEEP_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:?}", r.k, r.seed, r.final_distance)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Final fast-iterate distance for every `k` in `ks` and every replicate
/// in `0..seeds`. Each `k` sees the same replicate seeds, so differences
/// between rows come from `k` alone.
pub fn sweep_k(
    config: &RunConfig,
    ks: &[u64],
    seeds: u64,
    threads: Option<usize>,
) -> Result<SweepTable> {
    let Wrapper::Lookahead {
        alpha, alpha_phi, ..
    } = config.wrapper
    else {
        return Err(Error::Config(
            "sweep-k needs a config with a lookahead wrapper".into(),
        ));
    };
    if ks.is_empty() {
        return Err(Error::Config("no k values to sweep".into()));
    }
    let mut jobs = Vec::new();
    for &k in ks {
        for s in 0..seeds {
            let mut c = config.replicate(s);
            c.wrapper = Wrapper::Lookahead {
                k,
                alpha,
                alpha_phi,
            };
            jobs.push((k, c));
        }
    }
    let configs: Vec<RunConfig> = jobs.iter().map(|(_, c)| c.clone()).collect();
    let outs = run_many(&configs, threads)?;
    let rows = jobs
        .iter()
        .zip(&outs)
        .map(|((k, c), out)| SweepRow {
            k: *k,
            seed: c.seed,
            final_distance: out
                .trajectory
                .final_distance(Series::Fast)
                .unwrap_or(f64::NAN),
        })
        .collect();
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ProblemSpec;
    use crate::harness::presets::gda;
    use crate::harness::run::run;

    #[test]
    fn k_one_is_damped_gda() {
        let c = RunConfig::new(ProblemSpec::sbg(1), gda(0.2), 50.0)
            .with_wrapper(Wrapper::lookahead(1, 0.5));
        let table = sweep_k(&c, &[1], 1, Some(1)).unwrap();
        let damped = run(&RunConfig::new(ProblemSpec::sbg(1), gda(0.1), 50.0)).unwrap();
        let want = damped.trajectory.final_distance(Series::Fast).unwrap();
        assert!((table.rows[0].final_distance - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn needs_lookahead() {
        let c = RunConfig::new(ProblemSpec::Bilinear2d, gda(0.2), 5.0);
        assert!(sweep_k(&c, &[2], 1, None).is_err());
    }

    #[test]
    fn table_csv_and_medians() {
        let c = RunConfig::new(ProblemSpec::Bilinear2d, gda(0.3), 30.0)
            .with_wrapper(Wrapper::lookahead(2, 0.5));
        let t = sweep_k(&c, &[2, 5], 3, Some(2)).unwrap();
        assert_eq!(t.ks(), vec![2, 5]);
        assert_eq!(t.rows.len(), 6);
        assert!(t.median(5).is_some() && t.median(7).is_none());
        let csv = t.to_csv_string();
        assert!(csv.starts_with("k,seed,final_distance\n2,0,"));
        assert_eq!(
            csv,
            sweep_k(&c, &[2, 5], 3, Some(1)).unwrap().to_csv_string()
        );
    }
}
