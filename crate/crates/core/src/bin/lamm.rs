use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lookahead_minmax::harness::{self, presets, run_seeds, write_run, RunConfig, Series};
use lookahead_minmax::spectral::{spectrum, SpectrumDocument};
use lookahead_minmax::Result;

/// Like `println!`, but a closed pipe (e.g. `| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "lamm",
    version,
    about = "Lookahead-minmax and baseline game optimizers on analytic testbeds"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Common {
    /// Base run seed (overrides the config's)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of replicates; replicate i shifts run and data seeds by i
    #[arg(long, global = true)]
    seeds: Option<u64>,
    /// Worker threads for independent runs
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML run config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset instead of a config file
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<RunConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path),
            (None, Some(name)) => presets::preset(name),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write `<name>.csv` and `<name>.json`
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
    },
    /// Final distance for each lookahead k; writes sweep_k.csv
    SweepK {
        #[command(flatten)]
        source: Source,
        /// Comma-separated k values
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Eigenvalues and spectral radius of an update operator
    Spectrum {
        /// bilinear2d, qp1, qp2, sbg or sbg:<seed>
        #[arg(long)]
        problem: String,
        /// Run preset name or operator descriptor such as la:6:0.5/eg:0.3
        #[arg(long)]
        method: String,
        /// Print the report as JSON
        #[arg(long)]
        json: bool,
        /// Also write the JSON report to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a bundled figure or table recipe
    Replicate {
        /// One of: fig-batch-bilinear, fig-stoch-bilinear, fig-ema-stoch, fig-sensitivity-k, quadratics
        figure_id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// List presets, or print one as TOML
    Presets { name: Option<String> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let common = cli.common;
    match cli.command {
        Command::Run { source, out } => run(source.load()?, &out, common),
        Command::SweepK { source, k, out } => sweep(source.load()?, &k, &out, common),
        Command::Spectrum {
            problem,
            method,
            json,
            out,
        } => spectrum_cmd(&problem, &method, json, out.as_deref()),
        Command::Replicate { figure_id, out } => {
            let m = harness::replicate(
                &figure_id,
                &out,
                common.seed.unwrap_or(0),
                common.seeds.unwrap_or(1),
                common.threads,
            )?;
            say!(
                "{}: {} runs written to {}",
                m.recipe,
                m.runs.len(),
                out.display()
            );
            Ok(())
        }
        Command::Presets { name: Some(name) } => {
            let _ = write!(io::stdout(), "{}", presets::preset(&name)?.to_toml()?);
            Ok(())
        }
        Command::Presets { name: None } => {
            presets::names().iter().for_each(|n| say!("{n}"));
            Ok(())
        }
    }
}

fn with_seed(mut config: RunConfig, common: Common) -> RunConfig {
    if let Some(s) = common.seed {
        config.seed = s;
    }
    config
}

fn run(config: RunConfig, out: &Path, common: Common) -> Result<()> {
    let config = with_seed(config, common);
    let seeds = common.seeds.unwrap_or(1);
    let name = config.preset.clone().unwrap_or_else(|| "run".into());
    for (s, o) in run_seeds(&config, seeds, common.threads)?
        .iter()
        .enumerate()
    {
        let (csv, _) = write_run(out, &harness::output::stem(&name, s as u64, seeds), o)?;
        let last = o
            .trajectory
            .final_distance(Series::Fast)
            .unwrap_or(f64::NAN);
        say!(
            "{}: {} updates, {:?} passes, final distance {last:e}",
            csv.display(),
            o.metadata.updates,
            o.metadata.passes
        );
    }
    Ok(())
}

fn sweep(config: RunConfig, ks: &[u64], out: &Path, common: Common) -> Result<()> {
    let config = with_seed(config, common);
    let table = harness::sweep_k(&config, ks, common.seeds.unwrap_or(1), common.threads)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep_k.csv"), table.to_csv_string())?;
    for k in table.ks() {
        say!(
            "k = {k}: median final distance {:e}",
            table.median(k).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn spectrum_cmd(problem_name: &str, method: &str, json: bool, out: Option<&Path>) -> Result<()> {
    let problem = presets::problem_preset(problem_name)?;
    let spec = presets::operator_preset(method)?;
    let report = spectrum(&spec, &problem)?;
    let doc = SpectrumDocument {
        problem: problem_name,
        operator: spec.to_string(),
        report: &report,
    };
    let text = doc.to_json()?;
    if let Some(path) = out {
        fs::write(path, text.clone() + "\n")?;
    }
    if json {
        say!("{text}");
    } else {
        say!("operator {spec} on {problem_name}");
        say!(
            "spectral radius {:?} ({})",
            report.spectral_radius,
            serde_json::to_value(report.verdict)?
                .as_str()
                .unwrap_or("?")
        );
        for z in &report.eigenvalues {
            say!("  {:?} {:+?}i  |λ| = {:?}", z.re, z.im, z.norm());
        }
    }
    Ok(())
}
