//! Patient, event and prescription tables in delimited text files.
//!
//! ```text
//! patients.csv       patient_id,gender,birth_date,registration_date
//! events.csv         patient_id,code,date
//! prescriptions.csv  patient_id,code,date
//! ```
//!
//! Dates are ISO `YYYY-MM-DD`, gender is `1` or `2`. Codes in the events file
//! are medical, codes in the prescriptions file are drugs; codes longer than
//! five characters are truncated to their first five.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use adrminer_core::code::{CodeError, CodeKind};
use adrminer_core::patient::{CohortError, Gender, PatientRecord, Record};
use adrminer_core::{Cohort, EventCode};
use chrono::NaiveDate;

pub use adrminer_core::patient::{apply_first_year_exclusion, exclude_early_records, FIRST_YEAR_DAYS};

pub const PATIENTS_FILE: &str = "patients.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const PRESCRIPTIONS_FILE: &str = "prescriptions.csv";

pub const PATIENT_HEADER: [&str; 4] = ["patient_id", "gender", "birth_date", "registration_date"];
pub const RECORD_HEADER: [&str; 3] = ["patient_id", "code", "date"];

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: header {found:?} does not match {expected:?}", path.display())]
    Header {
        path: PathBuf,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{}, row {row}: {message}", path.display())]
    Row {
        path: PathBuf,
        row: u64,
        message: String,
    },
    #[error("{}, row {row}: invalid code {raw:?}: {source}", path.display())]
    Code {
        path: PathBuf,
        row: u64,
        raw: String,
        source: CodeError,
    },
    #[error("{}, row {row}: unknown patient {id}", path.display())]
    UnknownPatient { path: PathBuf, row: u64, id: String },
    #[error(transparent)]
    Cohort(#[from] CohortError),
}

/// Locations and delimiter of the three input tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTables {
    pub patients_path: PathBuf,
    pub events_path: PathBuf,
    pub prescriptions_path: PathBuf,
    pub delimiter: u8,
}

impl RawTables {
    /// The standard file names inside `dir`, comma-delimited.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        RawTables {
            patients_path: dir.join(PATIENTS_FILE),
            events_path: dir.join(EVENTS_FILE),
            prescriptions_path: dir.join(PRESCRIPTIONS_FILE),
            delimiter: b',',
        }
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn paths(&self) -> [&Path; 3] {
        [&self.patients_path, &self.events_path, &self.prescriptions_path]
    }
}

fn open(path: &Path, delimiter: u8, header: &[&str]) -> Result<csv::Reader<File>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.into(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(file);
    let found: Vec<String> = reader
        .headers()
        .map_err(|source| IngestError::Csv {
            path: path.into(),
            source,
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(IngestError::Header {
            path: path.into(),
            expected: header.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    Ok(reader)
}

fn row_number(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_date(path: &Path, row: u64, field: &str, value: &str) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(value, DATE_FORMAT).map_err(|e| IngestError::Row {
        path: path.into(),
        row,
        message: format!("{field} {value:?} is not a YYYY-MM-DD date ({e})"),
    })
}

fn read_patients(path: &Path, delimiter: u8) -> Result<Vec<PatientRecord>, IngestError> {
    let mut reader = open(path, delimiter, &PATIENT_HEADER)?;
    let mut patients = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.into(),
            source,
        })?;
        let row = row_number(&record);
        let gender = Gender::from_code(&record[1]).map_err(|e| IngestError::Row {
            path: path.into(),
            row,
            message: e.to_string(),
        })?;
        let birth = parse_date(path, row, "birth_date", &record[2])?;
        let registration = parse_date(path, row, "registration_date", &record[3])?;
        patients.push(PatientRecord::new(&record[0], gender, birth, registration));
    }
    Ok(patients)
}

/// Rows of an events or prescriptions file as (patient index, record).
fn read_records(
    path: &Path,
    delimiter: u8,
    kind: CodeKind,
    index: &HashMap<String, usize>,
) -> Result<Vec<(usize, Record)>, IngestError> {
    let mut reader = open(path, delimiter, &RECORD_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.into(),
            source,
        })?;
        let row = row_number(&record);
        let Some(&patient) = index.get(&record[0]) else {
            return Err(IngestError::UnknownPatient {
                path: path.into(),
                row,
                id: record[0].to_owned(),
            });
        };
        let code = EventCode::from_record(&record[1], kind).map_err(|source| IngestError::Code {
            path: path.into(),
            row,
            raw: record[1].to_owned(),
            source,
        })?;
        let date = parse_date(path, row, "date", &record[2])?;
        out.push((patient, Record::new(code, date)));
    }
    Ok(out)
}

/// Reads the three tables into a cohort, histories sorted by date.
pub fn load_cohort(tables: &RawTables) -> Result<Cohort, IngestError> {
    let mut patients = read_patients(&tables.patients_path, tables.delimiter)?;
    let index: HashMap<String, usize> = patients
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.0.clone(), i))
        .collect();
    let (events, prescriptions) = rayon::join(
        || read_records(&tables.events_path, tables.delimiter, CodeKind::Medical, &index),
        || read_records(&tables.prescriptions_path, tables.delimiter, CodeKind::Drug, &index),
    );
    for (i, r) in events? {
        patients[i].events.push(r);
    }
    for (i, r) in prescriptions? {
        patients[i].prescriptions.push(r);
    }
    Ok(Cohort::new(patients)?)
}

fn create(path: &Path, delimiter: u8) -> Result<csv::Writer<BufWriter<File>>, IngestError> {
    let file = File::create(path).map_err(|source| IngestError::Io {
        path: path.into(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(BufWriter::new(file)))
}

fn write_table<I, R>(path: &Path, delimiter: u8, header: &[&str], rows: I) -> Result<(), IngestError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let csv_err = |source| IngestError::Csv {
        path: path.into(),
        source,
    };
    let mut w = create(path, delimiter)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| IngestError::Io {
            path: path.into(),
            source: e.into_error(),
        })?
        .flush()
        .map_err(|source| IngestError::Io {
            path: path.into(),
            source,
        })
}

/// Writes the cohort as the three tables; `load_cohort` reads it back equal.
pub fn write_cohort(cohort: &Cohort, tables: &RawTables) -> Result<(), IngestError> {
    let date = |d: NaiveDate| d.format(DATE_FORMAT).to_string();
    write_table(
        &tables.patients_path,
        tables.delimiter,
        &PATIENT_HEADER,
        cohort.patients().iter().map(|p| {
            [
                p.id.0.clone(),
                p.gender.code().to_string(),
                date(p.birth_date),
                date(p.registration_date),
            ]
        }),
    )?;
    let records = |pick: fn(&PatientRecord) -> &[Record]| {
        cohort.patients().iter().flat_map(move |p| {
            pick(p)
                .iter()
                .map(move |r| [p.id.0.clone(), r.code.text().to_owned(), date(r.date)])
        })
    };
    write_table(
        &tables.events_path,
        tables.delimiter,
        &RECORD_HEADER,
        records(|p| &p.events),
    )?;
    write_table(
        &tables.prescriptions_path,
        tables.delimiter,
        &RECORD_HEADER,
        records(|p| &p.prescriptions),
    )
}

/// Writes the three tables under their standard names in `dir`, creating it.
pub fn write_fixture(cohort: &Cohort, dir: &Path) -> Result<RawTables, IngestError> {
    std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.into(),
        source,
    })?;
    let tables = RawTables::in_dir(dir);
    write_cohort(cohort, &tables)?;
    Ok(tables)
}
