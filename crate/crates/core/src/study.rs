//! Study definition, D1/D2 partitioning and matched case-control selection.
//!
//! Exposed patients are split by whether an outcome followed an exposure
//! within the outcome window: D2 holds those who had the outcome, D1 those
//! who did not. Separately, every patient with the outcome anywhere in their
//! history becomes a case and is matched to outcome-free controls from the
//! same (gender, age band) stratum.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use chrono::{Days, Months, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code::EventCode;
use crate::itemset::{Itemset, TransactionDb};
use crate::patient::{Cohort, Gender, PatientId, PatientRecord};

pub const DEFAULT_OUTCOME_WINDOW_DAYS: u32 = 30;
pub const DEFAULT_CONTROLS_PER_CASE: usize = 5;
pub const DEFAULT_AGE_BAND_YEARS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StudyError {
    #[error("invalid study definition: {0}")]
    Invalid(&'static str),
    #[error("no patient in the cohort was prescribed the exposure {0}")]
    EmptyStudy(EventCode),
    #[error("date {date} precedes birth date {birth}")]
    BeforeBirth { date: NaiveDate, birth: NaiveDate },
    #[error(
        "matching stratum exhausted (gender {gender}, ages {age_lo}-{age_hi}): \
         case {case} needs {needed} controls, only {available} left"
    )]
    StratumExhausted {
        case: PatientId,
        gender: u8,
        age_lo: u32,
        age_hi: u32,
        needed: usize,
        available: usize,
    },
}

/// What counts as exposure and outcome, and how cases are matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyDefinition {
    /// Code (or subtree root) of the index drug family.
    pub exposure: EventCode,
    /// Code (or subtree root) of the adverse outcome.
    pub outcome: EventCode,
    /// An outcome on day `0..=outcome_window_days` after an exposure counts.
    pub outcome_window_days: u32,
    pub controls_per_case: usize,
    pub random_seed: u64,
    /// Width of the matching age bands, aligned at multiples of the width.
    pub age_band_years: u32,
    /// Optional roll-up of every code to at most this level.
    pub code_level: Option<u8>,
}

impl StudyDefinition {
    pub fn new(exposure: EventCode, outcome: EventCode) -> Self {
        StudyDefinition {
            exposure,
            outcome,
            outcome_window_days: DEFAULT_OUTCOME_WINDOW_DAYS,
            controls_per_case: DEFAULT_CONTROLS_PER_CASE,
            random_seed: 0,
            age_band_years: DEFAULT_AGE_BAND_YEARS,
            code_level: None,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.outcome_window_days == 0 {
            return Err(StudyError::Invalid("outcome_window_days must be positive"));
        }
        if self.controls_per_case == 0 {
            return Err(StudyError::Invalid("controls_per_case must be at least 1"));
        }
        if self.age_band_years == 0 {
            return Err(StudyError::Invalid("age_band_years must be positive"));
        }
        if matches!(self.code_level, Some(l) if !(1..=5).contains(&l)) {
            return Err(StudyError::Invalid("code_level must be within 1..=5"));
        }
        Ok(())
    }

    pub fn is_exposure(&self, code: &EventCode) -> bool {
        self.exposure.covers(code)
    }

    pub fn is_outcome(&self, code: &EventCode) -> bool {
        self.outcome.covers(code)
    }

    /// Applies the configured roll-up level.
    pub fn normalize(&self, code: EventCode) -> EventCode {
        match self.code_level {
            Some(level) => code.generalize(level),
            None => code,
        }
    }

    fn band_of(&self, age: u32) -> u32 {
        age / self.age_band_years
    }

    fn band_ages(&self, band: u32) -> (u32, u32) {
        let lo = band * self.age_band_years;
        (lo, lo + self.age_band_years - 1)
    }

    fn exposure_dates(&self, p: &PatientRecord) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = p
            .records()
            .filter(|r| self.is_exposure(&r.code))
            .map(|r| r.date)
            .collect();
        dates.sort_unstable();
        dates
    }

    fn outcome_dates(&self, p: &PatientRecord) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = p
            .records()
            .filter(|r| self.is_outcome(&r.code))
            .map(|r| r.date)
            .collect();
        dates.sort_unstable();
        dates
    }

    /// True iff some outcome falls 0..=window days after some exposure.
    pub fn had_outcome_after_exposure(&self, p: &PatientRecord) -> bool {
        let outcomes = self.outcome_dates(p);
        self.exposure_dates(p).iter().any(|&e| {
            let end = e
                .checked_add_days(Days::new(self.outcome_window_days.into()))
                .unwrap_or(NaiveDate::MAX);
            outcomes.iter().any(|&o| o >= e && o <= end)
        })
    }

    /// Date of the first recorded outcome, if any.
    pub fn first_outcome(&self, p: &PatientRecord) -> Option<NaiveDate> {
        self.outcome_dates(p).first().copied()
    }
}

/// Splits exposed patients into (D1, D2).
///
/// D2 holds exposed patients with an outcome within the window after an
/// exposure; D1 holds the remaining exposed patients. Each transaction is the
/// set of every code in the patient's history, minus the exposure and outcome
/// codes themselves. Unexposed patients appear in neither database.
pub fn partition(
    cohort: &Cohort,
    study: &StudyDefinition,
) -> Result<(TransactionDb, TransactionDb), StudyError> {
    study.validate()?;
    let mut d1 = TransactionDb::new();
    let mut d2 = TransactionDb::new();
    for p in cohort.patients() {
        if !p.records().any(|r| study.is_exposure(&r.code)) {
            continue;
        }
        let items = p
            .records()
            .map(|r| r.code)
            .filter(|c| !study.is_exposure(c) && !study.is_outcome(c))
            .map(|c| study.normalize(c));
        if study.had_outcome_after_exposure(p) {
            d2.push(p.id.clone(), items);
        } else {
            d1.push(p.id.clone(), items);
        }
    }
    if d1.is_empty() && d2.is_empty() {
        return Err(StudyError::EmptyStudy(study.exposure));
    }
    Ok((d1, d2))
}

/// Completed years between `birth` and `date`.
pub fn completed_years(birth: NaiveDate, date: NaiveDate) -> Result<u32, StudyError> {
    date.years_since(birth)
        .ok_or(StudyError::BeforeBirth { date, birth })
}

/// Age of `patient` in completed years on `date`.
pub fn age_at_event(patient: &PatientRecord, date: NaiveDate) -> Result<u32, StudyError> {
    completed_years(patient.birth_date, date)
}

/// First date on which someone born on `birth` is `age` years old.
fn date_reaching_age(birth: NaiveDate, age: u32) -> Option<NaiveDate> {
    let mut d = birth.checked_add_months(Months::new(age.checked_mul(12)?))?;
    // Leap-day births land one day early.
    while d.years_since(birth)? < age {
        d = d.succ_opt()?;
    }
    Some(d)
}

/// One case or control chosen for the regression stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subject {
    /// Position of the patient in the cohort.
    pub patient: usize,
    pub id: PatientId,
    pub gender: Gender,
    pub index_date: NaiveDate,
    pub is_case: bool,
    /// Age in completed years on `index_date`.
    pub age: u32,
    prior_codes: BTreeSet<EventCode>,
    exposed_before: bool,
}

impl Subject {
    fn new(patient: usize, record: &PatientRecord, index_date: NaiveDate, is_case: bool, study: &StudyDefinition) -> Result<Self, StudyError> {
        let before = record.records().filter(|r| r.date < index_date);
        let mut exposed_before = false;
        let mut prior_codes = BTreeSet::new();
        for r in before {
            exposed_before |= study.is_exposure(&r.code);
            prior_codes.insert(study.normalize(r.code));
        }
        Ok(Subject {
            patient,
            id: record.id.clone(),
            gender: record.gender,
            index_date,
            is_case,
            age: age_at_event(record, index_date)?,
            prior_codes,
            exposed_before,
        })
    }

    /// Codes recorded strictly before the index date, after roll-up.
    pub fn prior_codes(&self) -> &BTreeSet<EventCode> {
        &self.prior_codes
    }

    pub fn exposed_before_index(&self) -> bool {
        self.exposed_before
    }
}

/// Cases followed by their matched controls.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub subjects: Vec<Subject>,
}

impl Selection {
    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn cases(&self) -> impl Iterator<Item = &Subject> + '_ {
        self.subjects.iter().filter(|s| s.is_case)
    }

    pub fn controls(&self) -> impl Iterator<Item = &Subject> + '_ {
        self.subjects.iter().filter(|s| !s.is_case)
    }

    /// Case and control counts per (gender code, band start age).
    pub fn stratum_counts(&self, band_years: u32) -> BTreeMap<(u8, u32), (usize, usize)> {
        let mut out = BTreeMap::new();
        for s in &self.subjects {
            let key = (s.gender.code(), s.age / band_years * band_years);
            let entry = out.entry(key).or_insert((0, 0));
            if s.is_case {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
        out
    }
}

struct Candidate {
    patient: usize,
    first: NaiveDate,
    last: NaiveDate,
}

/// Selects every outcome patient as a case and draws matched controls.
///
/// A case's index date is its first outcome. For each case, in cohort order,
/// `controls_per_case` outcome-free patients of the same gender are drawn
/// without replacement among those whose recorded history overlaps the
/// case's age band; each control's index date is uniform over the days in
/// that overlap. All randomness comes from `study.random_seed`.
pub fn select_cases_and_controls(
    cohort: &Cohort,
    study: &StudyDefinition,
) -> Result<Selection, StudyError> {
    study.validate()?;
    let patients = cohort.patients();

    let mut cases = Vec::new();
    let mut strata: BTreeMap<(Gender, u32), Vec<usize>> = BTreeMap::new();
    let mut pool = Vec::new();
    for (i, p) in patients.iter().enumerate() {
        if let Some(first) = study.first_outcome(p) {
            cases.push((i, first));
            continue;
        }
        let Some((first, last)) = p.active_period() else {
            continue;
        };
        let lo = study.band_of(age_at_event(p, first)?);
        let hi = study.band_of(age_at_event(p, last)?);
        let slot = pool.len();
        pool.push(Candidate {
            patient: i,
            first,
            last,
        });
        for band in lo..=hi {
            strata.entry((p.gender, band)).or_default().push(slot);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(study.random_seed);
    let mut used = alloc::vec![false; pool.len()];
    let mut selection = Selection::default();
    let mut controls = Vec::new();
    for &(ci, index_date) in &cases {
        let case = &patients[ci];
        let case_subject = Subject::new(ci, case, index_date, true, study)?;
        let band = study.band_of(case_subject.age);
        let (age_lo, age_hi) = study.band_ages(band);

        let mut available: Vec<usize> = strata
            .get(&(case.gender, band))
            .map(|slots| slots.iter().copied().filter(|&s| !used[s]).collect())
            .unwrap_or_default();
        let needed = study.controls_per_case;
        if available.len() < needed {
            return Err(StudyError::StratumExhausted {
                case: case.id.clone(),
                gender: case.gender.code(),
                age_lo,
                age_hi,
                needed,
                available: available.len(),
            });
        }
        // Partial Fisher-Yates.
        for k in 0..needed {
            let j = rng.random_range(k..available.len());
            available.swap(k, j);
        }
        for &slot in &available[..needed] {
            used[slot] = true;
            let cand = &pool[slot];
            let control = &patients[cand.patient];
            let start = date_reaching_age(control.birth_date, age_lo)
                .map_or(cand.first, |d| d.max(cand.first));
            let end = date_reaching_age(control.birth_date, age_hi + 1)
                .and_then(|d| d.pred_opt())
                .map_or(cand.last, |d| d.min(cand.last));
            debug_assert!(start <= end);
            let span = (end - start).num_days().max(0) as u64;
            let index_date = start + Days::new(rng.random_range(0..=span));
            controls.push(Subject::new(cand.patient, control, index_date, false, study)?);
        }
        selection.subjects.push(case_subject);
    }
    selection.subjects.append(&mut controls);
    Ok(selection)
}

/// One row of the per-itemset regression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegressionRow {
    pub patient_id: PatientId,
    pub age: u32,
    pub gender: Gender,
    /// Every code of the itemset was recorded before the index date.
    pub x_present: bool,
    /// The exposure was prescribed before the index date.
    pub exposure_present: bool,
    pub outcome: bool,
}

/// Builds one regression row per selected subject for itemset `x`.
pub fn assemble_rows(selection: &Selection, x: &Itemset) -> Vec<RegressionRow> {
    selection
        .subjects
        .iter()
        .map(|s| RegressionRow {
            patient_id: s.id.clone(),
            age: s.age,
            gender: s.gender,
            x_present: x.is_subset_of(&s.prior_codes),
            exposure_present: s.exposed_before,
            outcome: s.is_case,
        })
        .collect()
}
