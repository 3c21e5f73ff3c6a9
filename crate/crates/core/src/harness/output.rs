use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::run::RunOutput;
use crate::error::Result;

/// Writes `<stem>.csv` and `<stem>.json` under `dir`, creating it if needed.
pub fn write_run(dir: &Path, stem: &str, out: &RunOutput) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    out.trajectory
        .write_csv(BufWriter::new(File::create(&csv)?))?;
    fs::write(&json, out.metadata.to_json()? + "\n")?;
    Ok((csv, json))
}

/// File stem for replicate `seed` of a labelled run.
pub fn stem(label: &str, seed: u64, seeds: u64) -> String {
    if seeds <= 1 {
        label.to_string()
    } else {
        format!("{label}.seed{seed}")
    }
}
