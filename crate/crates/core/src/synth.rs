//! Seeded synthetic cohorts with a known outcome model.
//!
//! Every patient gets a gender, a registration date and an age at study
//! entry (one pre-period after registration). Exposure, planted factors and
//! background codes are drawn independently; the outcome is then drawn with
//!
//! ```text
//! logit P(outcome) = baseline + β_age·age + β_gender·[gender = 2]
//!                  + β_exposure·exposed
//!                  + Σ (main_k + interaction_k·exposed)·carrier_k
//! ```
//!
//! Confounder codes are assigned iff age at entry exceeds a threshold and
//! have no effect of their own. Timeline, relative to entry: factor and
//! confounder codes on days 0..=60, exposure uniform from day 90 to the end
//! of observation less the outcome window, an exposed outcome within the
//! window after exposure, an unexposed outcome uniform from day 90 to the end
//! of observation. Background codes fall anywhere in the observation period,
//! including the pre-period.
//!
//! Patient `i` draws from its own ChaCha stream `i` of the master seed, so
//! patients can be generated independently and in any order.

use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code::EventCode;
use crate::logit::sigmoid;
use crate::patient::{Cohort, Gender, PatientRecord, Record};
use crate::study::completed_years;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeneratorError {
    #[error("invalid generator configuration: {0}")]
    Invalid(String),
}

/// A code that raises the outcome odds, optionally only under exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFactor {
    pub code: EventCode,
    pub prevalence: f64,
    pub main_effect_logit: f64,
    pub interaction_logit: f64,
}

/// A code carried exactly by patients older than `age_threshold` at entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfounderFactor {
    pub code: EventCode,
    pub age_threshold: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub random_seed: u64,
    /// Number of noise codes with no effect on the outcome.
    pub background_codes: usize,
    /// Inclusion probabilities of the noise codes are spaced evenly over
    /// this range.
    pub background_prevalence: (f64, f64),
    pub exposure_prevalence: f64,
    pub baseline_outcome_logit: f64,
    /// Per year of age at entry.
    pub age_coefficient: f64,
    /// Applied when gender code is 2.
    pub gender_coefficient: f64,
    pub exposure_logit: f64,
    pub planted_factors: Vec<PlantedFactor>,
    pub confounder_factors: Vec<ConfounderFactor>,
    pub exposure_code: EventCode,
    pub outcome_code: EventCode,
    pub outcome_window_days: u32,
    /// Inclusive range of ages at entry.
    pub age_range: (u32, u32),
    pub start_date: NaiveDate,
    /// Registration dates are spread uniformly over this many days.
    pub registration_spread_days: u32,
    pub pre_period_days: u32,
    pub observation_years: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_patients: 10_000,
            random_seed: 1,
            background_codes: 30,
            background_prevalence: (0.02, 0.3),
            exposure_prevalence: 0.2,
            baseline_outcome_logit: -5.0,
            age_coefficient: 0.03,
            gender_coefficient: 0.2,
            exposure_logit: 0.0,
            planted_factors: alloc::vec![PlantedFactor {
                code: EventCode::medical("G2...").expect("valid"),
                prevalence: 0.3,
                main_effect_logit: 0.0,
                interaction_logit: libm::log(4.0),
            }],
            confounder_factors: Vec::new(),
            exposure_code: EventCode::drug("5ASA.").expect("valid"),
            outcome_code: EventCode::medical("K05..").expect("valid"),
            outcome_window_days: 30,
            age_range: (20, 80),
            start_date: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid"),
            registration_spread_days: 3 * 365,
            pre_period_days: 365,
            observation_years: 10,
        }
    }
}

const MAX_BACKGROUND_CODES: usize = 36 * 36 * 36;

/// Exposures and unexposed outcomes start this many days after entry, so
/// factor codes always precede them.
const FIRST_EXPOSURE_DAY: u64 = 90;

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::Invalid(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_patients == 0 {
            return bad("n_patients must be at least 1".into());
        }
        if !prob(self.exposure_prevalence) {
            return bad(alloc::format!("exposure_prevalence {} not in [0, 1]", self.exposure_prevalence));
        }
        let (lo, hi) = self.background_prevalence;
        if !prob(lo) || !prob(hi) || lo > hi {
            return bad(alloc::format!("background_prevalence ({lo}, {hi}) is not a range within [0, 1]"));
        }
        if self.background_codes > MAX_BACKGROUND_CODES {
            return bad(alloc::format!("at most {MAX_BACKGROUND_CODES} background codes"));
        }
        for f in &self.planted_factors {
            if !prob(f.prevalence) {
                return bad(alloc::format!("prevalence of {} not in [0, 1]", f.code));
            }
        }
        let coefficients = [
            self.baseline_outcome_logit,
            self.age_coefficient,
            self.gender_coefficient,
            self.exposure_logit,
        ];
        if coefficients.iter().any(|c| !c.is_finite())
            || self
                .planted_factors
                .iter()
                .any(|f| !f.main_effect_logit.is_finite() || !f.interaction_logit.is_finite())
        {
            return bad("coefficients must be finite".into());
        }
        if self.age_range.0 > self.age_range.1 {
            return bad("age_range must be ascending".into());
        }
        if self.outcome_window_days == 0 {
            return bad("outcome_window_days must be positive".into());
        }
        if self.observation_years == 0 {
            return bad("observation_years must be positive".into());
        }
        Ok(())
    }

    /// Inclusion probability of background code `j`.
    pub fn background_probability(&self, j: usize) -> f64 {
        let (lo, hi) = self.background_prevalence;
        if self.background_codes <= 1 {
            lo
        } else {
            lo + (hi - lo) * j as f64 / (self.background_codes - 1) as f64
        }
    }

    /// Code of background item `j`: `N` plus three base-36 digits plus `.`.
    pub fn background_code(j: usize) -> EventCode {
        const DIGITS: &[u8; 36] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
        let text = [
            b'N',
            DIGITS[j / (36 * 36) % 36],
            DIGITS[j / 36 % 36],
            DIGITS[j % 36],
            b'.',
        ];
        EventCode::medical(core::str::from_utf8(&text).expect("ascii")).expect("valid code")
    }

    fn id_width(&self) -> usize {
        let mut n = self.n_patients;
        let mut w = 1;
        while n >= 10 {
            n /= 10;
            w += 1;
        }
        w
    }
}

fn add_days(d: NaiveDate, days: u64) -> NaiveDate {
    d.checked_add_days(Days::new(days)).unwrap_or(NaiveDate::MAX)
}

/// Generates patient `index` of the cohort.
pub fn generate_patient(cfg: &GeneratorConfig, index: usize) -> PatientRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.random_seed);
    rng.set_stream(index as u64);

    let gender = if rng.random_bool(0.5) {
        Gender::Female
    } else {
        Gender::Male
    };
    let registration = add_days(cfg.start_date, rng.random_range(0..=cfg.registration_spread_days as u64));
    let entry = add_days(registration, cfg.pre_period_days as u64);
    let end = add_days(entry, cfg.observation_years as u64 * 365);

    let years = rng.random_range(cfg.age_range.0..=cfg.age_range.1);
    let extra_days = rng.random_range(0..365u64);
    let birth = entry
        .checked_sub_months(chrono::Months::new(years * 12))
        .and_then(|d| d.checked_sub_days(Days::new(extra_days)))
        .unwrap_or(NaiveDate::MIN);
    let age = completed_years(birth, entry).unwrap_or(0);

    let id = alloc::format!("P{:0width$}", index + 1, width = cfg.id_width());
    let mut p = PatientRecord::new(id, gender, birth, registration);

    let horizon = cfg.observation_years as u64 * 365;
    let last_exposure = horizon.saturating_sub(cfg.outcome_window_days as u64).max(FIRST_EXPOSURE_DAY);
    let exposed = rng.random_bool(cfg.exposure_prevalence);
    let exposure_date = add_days(entry, rng.random_range(FIRST_EXPOSURE_DAY..=last_exposure));
    if exposed {
        p.prescriptions.push(Record::new(cfg.exposure_code, exposure_date));
    }

    let mut logit = cfg.baseline_outcome_logit
        + cfg.age_coefficient * age as f64
        + if gender == Gender::Female { cfg.gender_coefficient } else { 0.0 }
        + if exposed { cfg.exposure_logit } else { 0.0 };
    for f in &cfg.planted_factors {
        let carrier = rng.random_bool(f.prevalence);
        let date = add_days(entry, rng.random_range(0..=60));
        if carrier {
            push_code(&mut p, f.code, date);
            logit += f.main_effect_logit + if exposed { f.interaction_logit } else { 0.0 };
        }
    }
    for c in &cfg.confounder_factors {
        let date = add_days(entry, rng.random_range(0..=60));
        if age > c.age_threshold {
            push_code(&mut p, c.code, date);
        }
    }

    let outcome = rng.random::<f64>() < sigmoid(logit);
    let outcome_date = if exposed {
        add_days(exposure_date, rng.random_range(0..=cfg.outcome_window_days as u64))
    } else {
        add_days(entry, rng.random_range(FIRST_EXPOSURE_DAY..=horizon.max(FIRST_EXPOSURE_DAY)))
    };
    if outcome {
        push_code(&mut p, cfg.outcome_code, outcome_date);
    }

    let span = (end - registration).num_days().max(0) as u64;
    for j in 0..cfg.background_codes {
        if rng.random_bool(cfg.background_probability(j)) {
            let code = GeneratorConfig::background_code(j);
            for _ in 0..rng.random_range(1..=3) {
                push_code(&mut p, code, add_days(registration, rng.random_range(0..=span)));
            }
        }
    }
    p.sort_history();
    p
}

fn push_code(p: &mut PatientRecord, code: EventCode, date: NaiveDate) {
    let record = Record::new(code, date);
    if code.is_drug() {
        p.prescriptions.push(record);
    } else {
        p.events.push(record);
    }
}

/// Generates the whole cohort, patient by patient.
pub fn generate(cfg: &GeneratorConfig) -> Result<Cohort, GeneratorError> {
    cfg.validate()?;
    let patients = (0..cfg.n_patients).map(|i| generate_patient(cfg, i)).collect();
    Cohort::new(patients).map_err(|e| GeneratorError::Invalid(alloc::format!("{e}")))
}
