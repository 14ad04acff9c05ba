//! Causal contrast set mining for adverse drug reaction risk factors.
//!
//! The pipeline runs in four steps over a cohort of patient histories:
//!
//! 1. [`study::partition`] splits exposed patients into D1 (no outcome after
//!    exposure) and D2 (outcome within the window after exposure).
//! 2. [`miner::contrast_candidates`] mines frequent itemsets of D2 and
//!    attaches their support in D1; [`miner::filter_candidates`] keeps those
//!    more common in D2.
//! 3. [`logit::evaluate_candidate`] fits a matched case-control logistic
//!    regression (age, gender, itemset, exposure, itemset × exposure) for
//!    each surviving itemset.
//! 4. [`rank::rank`] orders candidates by the interaction p-value.
//!
//! [`synth`] generates cohorts with a known outcome model for testing the
//! whole chain. The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod code;
pub mod itemset;
mod linalg;
pub mod logit;
pub mod miner;
pub mod patient;
pub mod rank;
pub mod stats;
pub mod study;
pub mod synth;

pub use code::{CodeError, CodeKind, EventCode};
pub use itemset::{Itemset, TransactionDb};
pub use logit::{DesignSpec, FitError, FitResult};
pub use miner::{CandidateItemset, MinSupport, MinerConfig};
pub use patient::{Cohort, Gender, PatientId, PatientRecord, Record};
pub use rank::ReportRow;
pub use study::{Selection, StudyDefinition};
pub use synth::GeneratorConfig;
