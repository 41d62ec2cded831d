use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apesmc::filters::NoiseSelection;
use apesmc::scenario::{reference_scenario, ScenarioConfig};
use apesmc_bench::bank::load_bank;
use apesmc_bench::output::{write_raw, write_summary, write_sweep};
use apesmc_bench::{beta_sweep, run_monte_carlo, BenchError, FilterChoice, RunSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "apesmc", version, about = "Monte Carlo benchmarks for maneuvering-target filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run filters over repeated simulations and write per-step CSVs.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated filters: ape, lw, pl, apf, imm20, imm60, imm45, custom.
        #[arg(long, value_delimiter = ',', required = true)]
        filter: Vec<String>,
        /// Filter whose RMSE is divided by each subject's for `rel_rmse`.
        #[arg(long)]
        reference: Option<String>,
        /// Aggregate CSV; defaults to `<out>` with a `.summary.csv` suffix.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Turn-rate RMSE of the APE filter for several changepoint priors.
    SweepBeta {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.025,0.05,0.1")]
        betas: Vec<f64>,
    },
    /// Scenario file utilities.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Write the built-in maneuvering scenario as JSON.
    EmitReference {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; the built-in scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    particles: usize,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    #[arg(long, default_value_t = 0.01)]
    h2: f64,
    /// Noise variances learned by the particle filters.
    #[arg(long, value_enum)]
    learn: Option<Learn>,
    /// IMM bank JSON for `--filter custom`.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Learn {
    None,
    Eta2,
    All,
}

impl From<Learn> for NoiseSelection {
    fn from(l: Learn) -> Self {
        match l {
            Learn::None => NoiseSelection::NONE,
            Learn::Eta2 => NoiseSelection::ETA2,
            Learn::All => NoiseSelection::ALL,
        }
    }
}

impl Common {
    fn spec(&self, filter: FilterChoice) -> Result<RunSpec, BenchError> {
        let scenario = match &self.config {
            Some(p) => ScenarioConfig::load(p).map_err(|e| BenchError::Config(e.to_string()))?,
            None => reference_scenario(),
        };
        let custom_bank = self.bank.as_deref().map(load_bank).transpose()?;
        Ok(RunSpec {
            n_particles: self.particles,
            n_runs: self.runs,
            base_seed: self.seed,
            beta: self.beta,
            h2: self.h2,
            learned: self.learn.map(Into::into),
            custom_bank,
            ..RunSpec::new(filter, scenario)
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.summary.csv"))
}

/// Runs the command; `Ok(true)` means some filter collapsed in every run.
fn execute(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::Run { common, filter, reference, summary } => {
            let mut filters = filter.iter().map(|f| f.parse()).collect::<Result<Vec<FilterChoice>, _>>()?;
            let reference = reference.map(|r| r.parse::<FilterChoice>()).transpose()?;
            if let Some(r) = reference {
                if !filters.contains(&r) {
                    filters.push(r);
                }
            }
            let mut results = Vec::with_capacity(filters.len());
            for f in &filters {
                let r = run_monte_carlo(&common.spec(*f)?)?;
                println!(
                    "{:<7} avg_rmse_pos={:>9.2} m  collapsed={}/{}  time={:.1}s",
                    f.name(),
                    r.metrics.avg_rmse_pos,
                    r.metrics.n_collapsed,
                    r.metrics.n_runs,
                    r.elapsed.as_secs_f64()
                );
                results.push((*f, r));
            }
            let reference_series = reference
                .and_then(|r| results.iter().find(|(f, _)| *f == r))
                .map(|(_, r)| r.metrics.clone());
            let mut series = Vec::with_capacity(results.len());
            for (f, r) in &results {
                let m = match &reference_series {
                    Some(refm) => r.metrics.clone().with_reference(refm)?,
                    None => r.metrics.clone(),
                };
                series.push((f.name().to_string(), m));
            }
            let runs: Vec<_> = results.iter().flat_map(|(_, r)| r.runs.iter().cloned()).collect();
            write_raw(create(&common.out)?, &runs)?;
            write_summary(create(&summary.unwrap_or_else(|| summary_path(&common.out)))?, &series)?;
            Ok(results.iter().any(|(f, r)| Some(*f) != reference && r.all_collapsed()))
        }
        Command::SweepBeta { common, betas } => {
            let sweep = beta_sweep(&common.spec(FilterChoice::Ape)?, &betas)?;
            for (b, m) in &sweep {
                println!("beta={b:<6} avg_rmse_omega={:.5} rad/s  avg_rmse_pos={:.2} m", m.avg_rmse_omega(), m.avg_rmse_pos);
            }
            write_sweep(create(&common.out)?, &sweep)?;
            Ok(sweep.iter().any(|(_, m)| m.n_collapsed == m.n_runs))
        }
        Command::Scenario { action: ScenarioAction::EmitReference { out } } => {
            reference_scenario::<f64>().save(&out).map_err(|e| BenchError::Config(e.to_string()))?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: a filter collapsed in every run");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
