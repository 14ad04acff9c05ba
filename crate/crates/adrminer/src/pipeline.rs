//! The four analysis steps wired to files, plus fixture generation.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use adrminer_core::logit::{evaluate_candidate, FitError, FitResult};
use adrminer_core::miner::{filter_candidates, mine_frequent, MinerError};
use adrminer_core::patient::exclude_early_records;
use adrminer_core::rank::{format_candidates, format_report, rank};
use adrminer_core::study::{partition, select_cases_and_controls, StudyError};
use adrminer_core::synth::{generate_patient, GeneratorError};
use adrminer_core::{
    CandidateItemset, Cohort, DesignSpec, MinerConfig, ReportRow, Selection, StudyDefinition,
    TransactionDb,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{ConfigError, RunConfig};
use crate::ingest::{self, IngestError, RawTables};

pub const REPORT_DELIMITER: char = ',';

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl PipelineError {
    /// Process exit status: 2 configuration, 3 empty study, 4 matching
    /// failure, 5 I/O, 6 invalid input data, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Study(StudyError::EmptyStudy(_)) => 3,
            PipelineError::Study(StudyError::StratumExhausted { .. }) => 4,
            PipelineError::Io { .. } | PipelineError::Ingest(IngestError::Io { .. }) => 5,
            PipelineError::Ingest(IngestError::Csv { source, .. }) if source.is_io_error() => 5,
            PipelineError::Ingest(_) | PipelineError::Study(StudyError::BeforeBirth { .. }) => 6,
            _ => 1,
        }
    }
}

/// Counts reported after `mine` or `run`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub patients: usize,
    pub d1: usize,
    pub d2: usize,
    pub frequent: usize,
    pub candidates: usize,
    pub cases: usize,
    pub controls: usize,
    pub flagged: usize,
    pub elapsed: Duration,
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

/// Loads the tables and drops each patient's first `first_year_days` of history.
pub fn load(tables: &RawTables, first_year_days: u32) -> Result<Cohort, PipelineError> {
    let cohort = ingest::load_cohort(tables)?;
    let before = cohort.total_events() + cohort.total_prescriptions();
    let cohort = exclude_early_records(&cohort, first_year_days);
    let after = cohort.total_events() + cohort.total_prescriptions();
    info!(
        "loaded {} patients; first-year exclusion kept {after} of {before} records",
        cohort.len()
    );
    Ok(cohort)
}

/// Frequent itemsets of D2 with their D1 supports, counted in parallel.
pub fn contrast(d1: &TransactionDb, d2: &TransactionDb, cfg: &MinerConfig) -> Result<Vec<CandidateItemset>, MinerError> {
    let frequent = mine_frequent(d2, cfg)?;
    Ok(frequent
        .into_par_iter()
        .map(|f| {
            let count_d1 = d1.count(&f.itemset);
            CandidateItemset::from_counts(f.itemset, f.count, d2.m(), count_d1, d1.m())
        })
        .collect())
}

/// Steps 1 and 2: partition, mine D2, keep itemsets with support ratio above 1.
pub fn mine(cohort: &Cohort, study: &StudyDefinition, cfg: &MinerConfig) -> Result<(Summary, Vec<CandidateItemset>), PipelineError> {
    let (d1, d2) = partition(cohort, study)?;
    info!("partitioned exposed patients: |D1| = {}, |D2| = {}", d1.m(), d2.m());
    let mut summary = Summary {
        patients: cohort.len(),
        d1: d1.m(),
        d2: d2.m(),
        ..Summary::default()
    };
    if d2.is_empty() {
        warn!("no exposed patient had the outcome within the window; nothing to mine");
        return Ok((summary, Vec::new()));
    }
    let all = contrast(&d1, &d2, cfg)?;
    summary.frequent = all.len();
    let candidates = filter_candidates(all);
    summary.candidates = candidates.len();
    info!(
        "{} frequent itemsets in D2, {} with support ratio above 1",
        summary.frequent, summary.candidates
    );
    Ok((summary, candidates))
}

/// Seed for the selection of candidate `k` when resampling per candidate.
fn candidate_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Step 3: one regression per candidate over matched cases and controls.
pub fn evaluate(
    cohort: &Cohort,
    study: &StudyDefinition,
    candidates: &[CandidateItemset],
    spec: &DesignSpec,
    resample_per_candidate: bool,
) -> Result<(Selection, Vec<Result<FitResult, FitError>>), PipelineError> {
    let selection = select_cases_and_controls(cohort, study)?;
    info!(
        "matched {} cases with {} controls",
        selection.cases().count(),
        selection.controls().count()
    );
    let fits = if resample_per_candidate {
        candidates
            .par_iter()
            .enumerate()
            .map(|(k, c)| {
                let study = StudyDefinition {
                    random_seed: candidate_seed(study.random_seed, k),
                    ..study.clone()
                };
                let selection = select_cases_and_controls(cohort, &study)?;
                Ok(evaluate_candidate(&c.itemset, &selection, spec))
            })
            .collect::<Result<Vec<_>, StudyError>>()?
    } else {
        candidates
            .par_iter()
            .map(|c| evaluate_candidate(&c.itemset, &selection, spec))
            .collect()
    };
    Ok((selection, fits))
}

/// Steps 1 to 4 on a loaded cohort.
pub fn analyse(cohort: &Cohort, cfg: &RunConfig) -> Result<(Summary, Vec<ReportRow>), PipelineError> {
    let (mut summary, candidates) = mine(cohort, &cfg.study, &cfg.miner)?;
    let spec = DesignSpec {
        center_age: cfg.center_age,
    };
    let (selection, fits) = evaluate(cohort, &cfg.study, &candidates, &spec, cfg.resample_per_candidate)?;
    summary.cases = selection.cases().count();
    summary.controls = selection.controls().count();
    let rows = rank(candidates.into_iter().zip(fits).collect());
    summary.flagged = rows.iter().filter(|r| r.flags.any()).count();
    Ok((summary, rows))
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.into(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

pub fn write_report(rows: &[ReportRow], path: &Path) -> Result<(), PipelineError> {
    write_file(path, &format_report(rows, REPORT_DELIMITER))
}

pub fn write_candidates(candidates: &[CandidateItemset], path: &Path) -> Result<(), PipelineError> {
    write_file(path, &format_candidates(candidates, REPORT_DELIMITER))
}

/// Generates the configured synthetic cohort in parallel.
pub fn synthesize(cfg: &RunConfig) -> Result<Cohort, PipelineError> {
    let g = &cfg.generator;
    g.validate()?;
    let pool = thread_pool(cfg.workers)?;
    let patients = pool.install(|| (0..g.n_patients).into_par_iter().map(|i| generate_patient(g, i)).collect());
    Cohort::new(patients).map_err(|e| GeneratorError::Invalid(e.to_string()).into())
}

/// Writes a synthetic fixture into `out_dir`.
pub fn cmd_synth(cfg: &RunConfig, out_dir: &Path) -> Result<RawTables, PipelineError> {
    let cohort = synthesize(cfg)?;
    info!(
        "generated {} patients, {} events, {} prescriptions",
        cohort.len(),
        cohort.total_events(),
        cohort.total_prescriptions()
    );
    Ok(ingest::write_fixture(&cohort, out_dir)?)
}

/// Steps 1 and 2; writes the candidate file.
pub fn cmd_mine(cfg: &RunConfig) -> Result<Summary, PipelineError> {
    let start = Instant::now();
    cfg.check_inputs()?;
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        let cohort = load(&cfg.tables, cfg.first_year_days)?;
        let (mut summary, candidates) = mine(&cohort, &cfg.study, &cfg.miner)?;
        write_candidates(&candidates, &cfg.candidates_path)?;
        info!("wrote {}", cfg.candidates_path.display());
        summary.elapsed = start.elapsed();
        Ok(summary)
    })
}

/// The full pipeline; writes the ranked report.
pub fn cmd_run(cfg: &RunConfig) -> Result<Summary, PipelineError> {
    let start = Instant::now();
    cfg.check_inputs()?;
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        let cohort = load(&cfg.tables, cfg.first_year_days)?;
        let (mut summary, rows) = analyse(&cohort, cfg)?;
        write_report(&rows, &cfg.report_path)?;
        info!("wrote {}", cfg.report_path.display());
        summary.elapsed = start.elapsed();
        Ok(summary)
    })
}
