//! The TOML run configuration.
//!
//! ```toml
//! [data]
//! dir = "fixture"            # patients.csv, events.csv, prescriptions.csv
//! delimiter = ","
//! first_year_days = 365
//!
//! [study]
//! exposure = "rx:5ASA."
//! outcome = "K05.."
//! outcome_window_days = 30
//! controls_per_case = 5
//! age_band_years = 5
//! seed = 1
//!
//! [miner]
//! min_support = 0.05
//! max_itemset_size = 3
//!
//! [generator]
//! n_patients = 10000
//! planted = [{ code = "G2...", prevalence = 0.3, interaction_logit = 1.386294 }]
//!
//! [output]
//! dir = "out"
//! workers = 4
//! ```
//!
//! Every key is optional. Relative paths resolve against the directory of
//! the config file.

use std::path::{Path, PathBuf};

use adrminer_core::miner::MinSupport;
use adrminer_core::synth::{ConfounderFactor, PlantedFactor};
use adrminer_core::{EventCode, GeneratorConfig, MinerConfig, StudyDefinition};
use chrono::NaiveDate;
use serde::Deserialize;

use crate::ingest::{RawTables, EVENTS_FILE, FIRST_YEAR_DAYS, PATIENTS_FILE, PRESCRIPTIONS_FILE};

pub const REPORT_FILE: &str = "report.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: [{section}] {message}", path.display())]
    Invalid {
        path: PathBuf,
        section: &'static str,
        message: String,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    study: StudySection,
    #[serde(default)]
    miner: MinerSection,
    #[serde(default)]
    generator: GeneratorSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    dir: Option<PathBuf>,
    patients: Option<PathBuf>,
    events: Option<PathBuf>,
    prescriptions: Option<PathBuf>,
    delimiter: Option<char>,
    first_year_days: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    exposure: Option<String>,
    outcome: Option<String>,
    outcome_window_days: Option<u32>,
    controls_per_case: Option<usize>,
    age_band_years: Option<u32>,
    code_level: Option<u8>,
    seed: Option<u64>,
    center_age: Option<bool>,
    resample_per_candidate: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MinerSection {
    min_support: Option<MinSupportValue>,
    max_itemset_size: Option<usize>,
}

/// `0.05` or `"1/20"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MinSupportValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantedEntry {
    code: String,
    prevalence: f64,
    #[serde(default)]
    main_effect_logit: f64,
    #[serde(default)]
    interaction_logit: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfounderEntry {
    code: String,
    age_threshold: u32,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSection {
    n_patients: Option<usize>,
    seed: Option<u64>,
    background_codes: Option<usize>,
    background_prevalence: Option<(f64, f64)>,
    exposure_prevalence: Option<f64>,
    baseline_outcome_logit: Option<f64>,
    age_coefficient: Option<f64>,
    gender_coefficient: Option<f64>,
    exposure_logit: Option<f64>,
    planted: Option<Vec<PlantedEntry>>,
    confounders: Option<Vec<ConfounderEntry>>,
    age_range: Option<(u32, u32)>,
    start_date: Option<String>,
    registration_spread_days: Option<u32>,
    pre_period_days: Option<u32>,
    observation_years: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    report: Option<PathBuf>,
    candidates: Option<PathBuf>,
    workers: Option<usize>,
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tables: RawTables,
    pub first_year_days: u32,
    pub study: StudyDefinition,
    pub center_age: bool,
    /// Draw a fresh case-control selection for every candidate instead of
    /// sharing one.
    pub resample_per_candidate: bool,
    pub miner: MinerConfig,
    pub generator: GeneratorConfig,
    pub output_dir: PathBuf,
    pub report_path: PathBuf,
    pub candidates_path: PathBuf,
    /// Zero means one worker per available core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_file(FileConfig::default(), Path::new("."), Path::new("<default>"))
            .expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, path)
    }

    /// Parses config text; `origin` only labels errors.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self, ConfigError> {
        let file: FileConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError::Parse {
                path: origin.into(),
                line,
                message: e.message().to_owned(),
            }
        })?;
        Self::from_file(file, base, origin)
    }

    /// Replaces the study seed and the generator seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.study.random_seed = seed;
        self.generator.random_seed = seed;
    }

    /// Moves all outputs under `dir`, keeping their file names.
    pub fn set_output_dir(&mut self, dir: &Path) {
        let file = |p: &Path, default: &str| {
            dir.join(p.file_name().map_or_else(|| default.into(), PathBuf::from))
        };
        self.report_path = file(&self.report_path, REPORT_FILE);
        self.candidates_path = file(&self.candidates_path, CANDIDATES_FILE);
        self.output_dir = dir.into();
    }

    /// Every input table exists.
    pub fn check_inputs(&self) -> Result<(), ConfigError> {
        for path in self.tables.paths() {
            if !path.is_file() {
                return Err(ConfigError::Invalid {
                    path: path.into(),
                    section: "data",
                    message: "input file not found".into(),
                });
            }
        }
        Ok(())
    }

    fn from_file(file: FileConfig, base: &Path, origin: &Path) -> Result<Self, ConfigError> {
        let invalid = |section, message: String| ConfigError::Invalid {
            path: origin.into(),
            section,
            message,
        };
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let code = |section, s: &str| {
            s.parse::<EventCode>()
                .map_err(|e| invalid(section, format!("invalid code {s:?}: {e}")))
        };

        let d = file.data;
        let data_dir = resolve(d.dir.unwrap_or_else(|| PathBuf::from(".")));
        let in_data = |p: Option<PathBuf>, default: &str| match p {
            Some(p) if p.is_absolute() => p,
            Some(p) => base.join(p),
            None => data_dir.join(default),
        };
        let delimiter = d.delimiter.unwrap_or(',');
        if !delimiter.is_ascii() {
            return Err(invalid("data", format!("delimiter {delimiter:?} must be ASCII")));
        }
        let tables = RawTables {
            patients_path: in_data(d.patients, PATIENTS_FILE),
            events_path: in_data(d.events, EVENTS_FILE),
            prescriptions_path: in_data(d.prescriptions, PRESCRIPTIONS_FILE),
            delimiter: delimiter as u8,
        };

        let s = file.study;
        let mut study = StudyDefinition::new(
            code("study", s.exposure.as_deref().unwrap_or("rx:5ASA."))?,
            code("study", s.outcome.as_deref().unwrap_or("K05.."))?,
        );
        if let Some(v) = s.outcome_window_days {
            study.outcome_window_days = v;
        }
        if let Some(v) = s.controls_per_case {
            study.controls_per_case = v;
        }
        if let Some(v) = s.age_band_years {
            study.age_band_years = v;
        }
        study.code_level = s.code_level;
        let seed = s.seed.unwrap_or(1);
        study.random_seed = seed;
        study.validate().map_err(|e| invalid("study", e.to_string()))?;

        let m = file.miner;
        let mut miner = MinerConfig::default();
        match m.min_support {
            Some(MinSupportValue::Number(x)) => {
                miner.min_support = MinSupport::from_f64(x).map_err(|e| invalid("miner", e.to_string()))?
            }
            Some(MinSupportValue::Text(t)) => {
                miner.min_support = t.parse().map_err(|e: adrminer_core::miner::MinerError| invalid("miner", e.to_string()))?
            }
            None => {}
        }
        if let Some(v) = m.max_itemset_size {
            miner.max_itemset_size = v;
        }
        miner.validate().map_err(|e| invalid("miner", e.to_string()))?;

        let g = file.generator;
        let mut generator = GeneratorConfig {
            random_seed: g.seed.unwrap_or(seed),
            exposure_code: study.exposure,
            outcome_code: study.outcome,
            outcome_window_days: study.outcome_window_days,
            ..GeneratorConfig::default()
        };
        macro_rules! take {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = g.$field { generator.$target = v; })*
            };
        }
        take!(
            n_patients => n_patients,
            background_codes => background_codes,
            background_prevalence => background_prevalence,
            exposure_prevalence => exposure_prevalence,
            baseline_outcome_logit => baseline_outcome_logit,
            age_coefficient => age_coefficient,
            gender_coefficient => gender_coefficient,
            exposure_logit => exposure_logit,
            age_range => age_range,
            registration_spread_days => registration_spread_days,
            pre_period_days => pre_period_days,
            observation_years => observation_years,
        );
        if let Some(d) = g.start_date {
            generator.start_date = NaiveDate::parse_from_str(&d, "%Y-%m-%d")
                .map_err(|e| invalid("generator", format!("start_date {d:?}: {e}")))?;
        }
        if let Some(planted) = g.planted {
            generator.planted_factors = planted
                .into_iter()
                .map(|p| {
                    Ok(PlantedFactor {
                        code: code("generator", &p.code)?,
                        prevalence: p.prevalence,
                        main_effect_logit: p.main_effect_logit,
                        interaction_logit: p.interaction_logit,
                    })
                })
                .collect::<Result<_, ConfigError>>()?;
        }
        if let Some(confounders) = g.confounders {
            generator.confounder_factors = confounders
                .into_iter()
                .map(|c| {
                    Ok(ConfounderFactor {
                        code: code("generator", &c.code)?,
                        age_threshold: c.age_threshold,
                    })
                })
                .collect::<Result<_, ConfigError>>()?;
        }
        generator.validate().map_err(|e| invalid("generator", e.to_string()))?;

        let o = file.output;
        let output_dir = resolve(o.dir.unwrap_or_else(|| PathBuf::from("out")));
        let in_output = |p: Option<PathBuf>, default: &str| match p {
            Some(p) if p.is_absolute() => p,
            Some(p) => output_dir.join(p),
            None => output_dir.join(default),
        };
        Ok(RunConfig {
            tables,
            first_year_days: d.first_year_days.unwrap_or(FIRST_YEAR_DAYS),
            study,
            center_age: s.center_age.unwrap_or(true),
            resample_per_candidate: s.resample_per_candidate.unwrap_or(false),
            miner,
            generator,
            report_path: in_output(o.report, REPORT_FILE),
            candidates_path: in_output(o.candidates, CANDIDATES_FILE),
            output_dir,
            workers: o.workers.unwrap_or(0),
        })
    }
}
