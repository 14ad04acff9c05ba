//! Itemsets and transaction databases.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::code::{CodeError, EventCode};
use crate::patient::PatientId;

/// Separator between codes in the text form of an itemset.
pub const ITEM_SEPARATOR: char = '&';

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ItemsetError {
    #[error("an itemset needs at least one code")]
    Empty,
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// A non-empty set of codes in canonical (sorted, deduplicated) order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Itemset(Vec<EventCode>);

impl Itemset {
    pub fn new(codes: impl IntoIterator<Item = EventCode>) -> Result<Self, ItemsetError> {
        let mut codes: Vec<EventCode> = codes.into_iter().collect();
        codes.sort_unstable();
        codes.dedup();
        if codes.is_empty() {
            return Err(ItemsetError::Empty);
        }
        Ok(Itemset(codes))
    }

    pub fn single(code: EventCode) -> Self {
        Itemset(alloc::vec![code])
    }

    pub fn codes(&self) -> &[EventCode] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, code: &EventCode) -> bool {
        self.0.binary_search(code).is_ok()
    }

    /// True iff every code of `self` appears in the sorted slice `items`.
    pub fn is_subset_of_sorted(&self, items: &[EventCode]) -> bool {
        let mut rest = items;
        for code in &self.0 {
            match rest.binary_search(code) {
                Ok(pos) => rest = &rest[pos + 1..],
                Err(_) => return false,
            }
        }
        true
    }

    pub fn is_subset_of(&self, items: &BTreeSet<EventCode>) -> bool {
        self.0.iter().all(|c| items.contains(c))
    }

    pub fn union(&self, other: &Itemset) -> Itemset {
        let mut codes = self.0.clone();
        codes.extend_from_slice(&other.0);
        codes.sort_unstable();
        codes.dedup();
        Itemset(codes)
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, code) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "{ITEM_SEPARATOR}")?;
            }
            write!(f, "{code}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl FromStr for Itemset {
    type Err = ItemsetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let codes = s
            .split(ITEM_SEPARATOR)
            .filter(|part| !part.trim().is_empty())
            .map(|part| part.trim().parse::<EventCode>())
            .collect::<Result<Vec<_>, _>>()?;
        Itemset::new(codes)
    }
}

/// One transaction per patient: the set of codes in their history.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransactionDb {
    ids: Vec<PatientId>,
    transactions: Vec<Vec<EventCode>>,
}

impl TransactionDb {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a database from anonymous transactions; ids are the row indices.
    pub fn from_transactions<T, I>(transactions: T) -> Self
    where
        T: IntoIterator<Item = I>,
        I: IntoIterator<Item = EventCode>,
    {
        let mut db = TransactionDb::new();
        for (i, t) in transactions.into_iter().enumerate() {
            db.push(PatientId(alloc::format!("{i}")), t);
        }
        db
    }

    pub fn push(&mut self, id: PatientId, items: impl IntoIterator<Item = EventCode>) {
        let mut items: Vec<EventCode> = items.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        self.ids.push(id);
        self.transactions.push(items);
    }

    /// Number of transactions.
    pub fn m(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Sorted, deduplicated transactions.
    pub fn transactions(&self) -> &[Vec<EventCode>] {
        &self.transactions
    }

    pub fn ids(&self) -> &[PatientId] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PatientId, &[EventCode])> + '_ {
        self.ids
            .iter()
            .zip(self.transactions.iter().map(Vec::as_slice))
    }

    /// Number of transactions containing every code of `itemset`.
    pub fn count(&self, itemset: &Itemset) -> usize {
        self.transactions
            .iter()
            .filter(|t| itemset.is_subset_of_sorted(t))
            .count()
    }

    /// All distinct codes.
    pub fn items(&self) -> BTreeSet<EventCode> {
        self.transactions.iter().flatten().copied().collect()
    }
}
