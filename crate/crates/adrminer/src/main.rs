use std::path::PathBuf;
use std::process::ExitCode;

use adrminer::config::RunConfig;
use adrminer::pipeline::{self, PipelineError, Summary};
use clap::{Args, Parser, Subcommand};

/// Mine risk factors of an adverse drug reaction from patient histories.
///
/// Exit status: 0 success, 1 other failure, 2 configuration error, 3 no
/// exposed patients, 4 too few controls to match, 5 I/O error, 6 invalid
/// input data.
#[derive(Parser)]
#[command(name = "adrminer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort as patients.csv, events.csv and prescriptions.csv.
    Synth(Options),
    /// Partition and mine; write the candidate file.
    Mine(Options),
    /// Run the whole pipeline; write the ranked report.
    Run(Options),
}

#[derive(Args)]
struct Options {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (for `synth`, the fixture directory).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Overrides the study and generator seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

impl Options {
    fn load(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        Ok(cfg)
    }
}

fn print_summary(s: &Summary, report: Option<&std::path::Path>) {
    println!("patients: {}", s.patients);
    println!("d1: {}", s.d1);
    println!("d2: {}", s.d2);
    println!("frequent itemsets: {}", s.frequent);
    println!("candidates: {}", s.candidates);
    if let Some(path) = report {
        println!("cases: {}", s.cases);
        println!("controls: {}", s.controls);
        println!("flagged: {}", s.flagged);
        println!("report: {}", path.display());
    }
    println!("elapsed: {:.3}s", s.elapsed.as_secs_f64());
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Synth(opts) => {
            let cfg = opts.load()?;
            let dir = match &opts.out {
                Some(dir) => dir.clone(),
                None => cfg
                    .tables
                    .patients_path
                    .parent()
                    .map_or_else(|| PathBuf::from("."), PathBuf::from),
            };
            let tables = pipeline::cmd_synth(&cfg, &dir)?;
            for path in tables.paths() {
                println!("{}", path.display());
            }
        }
        Command::Mine(opts) => {
            let mut cfg = opts.load()?;
            if let Some(dir) = &opts.out {
                cfg.set_output_dir(dir);
            }
            let summary = pipeline::cmd_mine(&cfg)?;
            print_summary(&summary, None);
            println!("candidate file: {}", cfg.candidates_path.display());
        }
        Command::Run(opts) => {
            let mut cfg = opts.load()?;
            if let Some(dir) = &opts.out {
                cfg.set_output_dir(dir);
            }
            let summary = pipeline::cmd_run(&cfg)?;
            print_summary(&summary, Some(&cfg.report_path));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
