use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use episurvey_cli::{cmd_evaluate, cmd_simulate, cmd_synth, cmd_variance, Config, Overrides};

#[derive(Parser)]
#[command(name = "episurvey", version, about = "Spatial two-stage sampling designs on simulated epidemics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one population grid per rho level.
    Synth(Common),
    /// Run the epidemic and write daily counts and survey frames.
    Simulate(Common),
    /// Evaluate the designs on simulated frames and write tables 3-6.
    Evaluate(Common),
    /// Compute the anticipated variance of a design.
    Variance(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest JSON from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding `run.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replicates, overriding `experiment.replicates`.
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads, overriding `run.threads` (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(Config, Vec<u8>)> {
        Config::load(
            &self.config,
            Overrides {
                seed: self.seed,
                replicates: self.replicates,
                threads: self.threads,
            },
        )
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Synth(c) => {
            let (cfg, bytes) = c.load()?;
            let m = cmd_synth(&cfg, &bytes, &c.out)?;
            print_outputs(&c.out, &m.outputs);
        }
        Command::Simulate(c) => {
            let (cfg, bytes) = c.load()?;
            let m = cmd_simulate(&cfg, &bytes, &c.out)?;
            print_outputs(&c.out, &m.outputs);
        }
        Command::Evaluate(c) => {
            let (cfg, bytes) = c.load()?;
            let m = cmd_evaluate(&cfg, &bytes, &c.out)?;
            print_outputs(&c.out, &m.outputs);
        }
        Command::Variance(c) => {
            let (cfg, bytes) = c.load()?;
            let (m, report) = cmd_variance(&cfg, &bytes, &c.out)?;
            println!("anticipated variance {}", report.av_total);
            print_outputs(&c.out, &m.outputs);
        }
    }
    Ok(())
}

fn print_outputs(out: &std::path::Path, files: &[String]) {
    for f in files {
        println!("{}", out.join(f).display());
    }
}
