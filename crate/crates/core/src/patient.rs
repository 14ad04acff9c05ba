//! Patients, their dated histories, and cohorts.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{Days, NaiveDate};

use crate::code::EventCode;

/// Length of the history dropped after registration at a practice.
pub const FIRST_YEAR_DAYS: u32 = 365;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CohortError {
    #[error("duplicate patient id {0}")]
    DuplicatePatient(PatientId),
    #[error("patient {patient}: record {code} dated {date} precedes birth date {birth}")]
    BeforeBirth {
        patient: PatientId,
        code: EventCode,
        date: NaiveDate,
        birth: NaiveDate,
    },
    #[error("invalid gender code {0}: expected 1 or 2")]
    Gender(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatientId(pub String);

impl fmt::Display for PatientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PatientId {
    fn from(s: &str) -> Self {
        PatientId(s.into())
    }
}

/// Gender as coded in the source data: 1 = male, 2 = female.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    Male = 1,
    Female = 2,
}

impl Gender {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: &str) -> Result<Self, CohortError> {
        match code.trim() {
            "1" => Ok(Gender::Male),
            "2" => Ok(Gender::Female),
            other => Err(CohortError::Gender(other.into())),
        }
    }
}

/// One dated code in a patient's history; ordered by date, then code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Record {
    pub date: NaiveDate,
    pub code: EventCode,
}

impl Record {
    pub fn new(code: EventCode, date: NaiveDate) -> Self {
        Record { code, date }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub id: PatientId,
    pub gender: Gender,
    pub birth_date: NaiveDate,
    /// Start of observation at the current practice.
    pub registration_date: NaiveDate,
    /// Medical events, sorted by date.
    pub events: Vec<Record>,
    /// Drug prescriptions, sorted by date.
    pub prescriptions: Vec<Record>,
}

impl PatientRecord {
    pub fn new(
        id: impl Into<PatientId>,
        gender: Gender,
        birth_date: NaiveDate,
        registration_date: NaiveDate,
    ) -> Self {
        PatientRecord {
            id: id.into(),
            gender,
            birth_date,
            registration_date,
            events: Vec::new(),
            prescriptions: Vec::new(),
        }
    }

    /// Sorts both histories by date, then by code.
    pub fn sort_history(&mut self) {
        self.events.sort();
        self.prescriptions.sort();
    }

    /// Events followed by prescriptions.
    pub fn records(&self) -> impl Iterator<Item = &Record> + '_ {
        self.events.iter().chain(self.prescriptions.iter())
    }

    pub fn record_count(&self) -> usize {
        self.events.len() + self.prescriptions.len()
    }

    /// Every distinct code ever recorded.
    pub fn code_set(&self) -> BTreeSet<EventCode> {
        self.records().map(|r| r.code).collect()
    }

    /// Earliest and latest recorded dates, if any record exists.
    pub fn active_period(&self) -> Option<(NaiveDate, NaiveDate)> {
        let mut dates = self.records().map(|r| r.date);
        let first = dates.next()?;
        Some(dates.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    fn check_dates(&self) -> Result<(), CohortError> {
        match self.records().find(|r| r.date < self.birth_date) {
            Some(r) => Err(CohortError::BeforeBirth {
                patient: self.id.clone(),
                code: r.code,
                date: r.date,
                birth: self.birth_date,
            }),
            None => Ok(()),
        }
    }
}

impl From<String> for PatientId {
    fn from(s: String) -> Self {
        PatientId(s)
    }
}

/// A collection of patients with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cohort {
    patients: Vec<PatientRecord>,
}

impl Cohort {
    pub fn new(mut patients: Vec<PatientRecord>) -> Result<Self, CohortError> {
        let mut seen = BTreeSet::new();
        for p in &mut patients {
            if !seen.insert(p.id.clone()) {
                return Err(CohortError::DuplicatePatient(p.id.clone()));
            }
            p.sort_history();
            p.check_dates()?;
        }
        Ok(Cohort { patients })
    }

    pub fn patients(&self) -> &[PatientRecord] {
        &self.patients
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn total_events(&self) -> usize {
        self.patients.iter().map(|p| p.events.len()).sum()
    }

    pub fn total_prescriptions(&self) -> usize {
        self.patients.iter().map(|p| p.prescriptions.len()).sum()
    }

    pub fn into_patients(self) -> Vec<PatientRecord> {
        self.patients
    }
}

/// Drops every event and prescription dated strictly before
/// `registration_date + window_days`. Demographics are untouched.
pub fn exclude_early_records(cohort: &Cohort, window_days: u32) -> Cohort {
    let patients = cohort
        .patients
        .iter()
        .map(|p| {
            let cutoff = p
                .registration_date
                .checked_add_days(Days::new(window_days.into()))
                .unwrap_or(NaiveDate::MAX);
            let keep = |r: &&Record| r.date >= cutoff;
            PatientRecord {
                events: p.events.iter().filter(keep).copied().collect(),
                prescriptions: p.prescriptions.iter().filter(keep).copied().collect(),
                ..p.clone()
            }
        })
        .collect();
    Cohort { patients }
}

/// First-year exclusion with the default 365-day window.
pub fn apply_first_year_exclusion(cohort: &Cohort) -> Cohort {
    exclude_early_records(cohort, FIRST_YEAR_DAYS)
}
