//! Level-wise frequent itemset mining and support ratios.
//!
//! Supports are kept as integer counts. An itemset is frequent when
//! `count / m > ω`, evaluated as `count * den > num * m` with ω held as an
//! exact decimal fraction, so values sitting exactly on the threshold are
//! never misclassified by floating point rounding.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::code::EventCode;
use crate::itemset::{Itemset, TransactionDb};

/// Item universes up to this size use bitset transactions.
pub const DENSE_ITEM_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MinerError {
    #[error("support is undefined on an empty transaction database")]
    EmptyDatabase,
    #[error("confidence of a rule with antecedent {0} is undefined: antecedent has zero support")]
    UndefinedConfidence(Itemset),
    #[error("itemset {0} does not occur in D2")]
    AbsentFromOutcomeGroup(Itemset),
    #[error("invalid minimum support {0:?}: expected a fraction in (0, 1] such as 0.05 or 1/20")]
    MinSupport(alloc::string::String),
    #[error("max_itemset_size must be at least 1")]
    MaxSize,
}

/// Minimum support held as the exact fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinSupport {
    num: u64,
    den: u64,
}

impl MinSupport {
    pub fn new(num: u64, den: u64) -> Result<Self, MinerError> {
        if den == 0 || num == 0 || num > den {
            return Err(MinerError::MinSupport(alloc::format!("{num}/{den}")));
        }
        Ok(MinSupport { num, den })
    }

    /// Converts through the shortest decimal text that round-trips `value`,
    /// so `0.05` becomes exactly 5/100.
    pub fn from_f64(value: f64) -> Result<Self, MinerError> {
        if !value.is_finite() {
            return Err(MinerError::MinSupport(alloc::format!("{value}")));
        }
        alloc::format!("{value}").parse()
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `count / m > ω`.
    pub fn exceeded_by(&self, count: usize, m: usize) -> bool {
        (count as u128) * (self.den as u128) > (self.num as u128) * (m as u128)
    }
}

impl FromStr for MinSupport {
    type Err = MinerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MinerError::MinSupport(s.into());
        let t = s.trim();
        if let Some((num, den)) = t.split_once('/') {
            let num = num.trim().parse().map_err(|_| bad())?;
            let den = den.trim().parse().map_err(|_| bad())?;
            return MinSupport::new(num, den).map_err(|_| bad());
        }
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if int.is_empty() && frac.is_empty()
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        MinSupport::new(num, den).map_err(|_| bad())
    }
}

impl fmt::Display for MinSupport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinerConfig {
    pub min_support: MinSupport,
    pub max_itemset_size: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            min_support: MinSupport { num: 5, den: 100 },
            max_itemset_size: 3,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<(), MinerError> {
        if self.max_itemset_size == 0 {
            return Err(MinerError::MaxSize);
        }
        Ok(())
    }
}

/// Fraction of transactions in `db` containing every code of `x`.
pub fn support(x: &Itemset, db: &TransactionDb) -> Result<f64, MinerError> {
    if db.is_empty() {
        return Err(MinerError::EmptyDatabase);
    }
    Ok(db.count(x) as f64 / db.m() as f64)
}

/// `supp(X ∪ Y) / supp(X)`.
pub fn confidence(x: &Itemset, y: &Itemset, db: &TransactionDb) -> Result<f64, MinerError> {
    if db.is_empty() {
        return Err(MinerError::EmptyDatabase);
    }
    let antecedent = db.count(x);
    if antecedent == 0 {
        return Err(MinerError::UndefinedConfidence(x.clone()));
    }
    Ok(db.count(&x.union(y)) as f64 / antecedent as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequentItemset {
    pub itemset: Itemset,
    pub count: usize,
    pub support: f64,
}

/// Dense item ids in code order, so sorted id lists map to canonical itemsets.
struct Dictionary {
    codes: Vec<EventCode>,
    ids: BTreeMap<EventCode, u32>,
}

impl Dictionary {
    fn build(db: &TransactionDb) -> Self {
        let codes: Vec<EventCode> = db.items().into_iter().collect();
        let ids = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i as u32))
            .collect();
        Dictionary { codes, ids }
    }

    fn encode(&self, transaction: &[EventCode]) -> Vec<u32> {
        // Input is sorted and ids follow code order, so output stays sorted.
        transaction
            .iter()
            .filter_map(|c| self.ids.get(c).copied())
            .collect()
    }

    fn decode(&self, ids: &[u32]) -> Itemset {
        Itemset::new(ids.iter().map(|&i| self.codes[i as usize]))
            .expect("candidate itemsets are non-empty")
    }
}

/// Horizontal transaction layout.
enum Store {
    Dense { words: usize, bits: Vec<u64> },
    Sparse(Vec<Vec<u32>>),
}

impl Store {
    fn build(dict: &Dictionary, db: &TransactionDb) -> Self {
        let n_items = dict.codes.len();
        if n_items <= DENSE_ITEM_LIMIT {
            let words = n_items.div_ceil(64).max(1);
            let mut bits = alloc::vec![0u64; words * db.m()];
            for (row, t) in db.transactions().iter().enumerate() {
                for id in dict.encode(t) {
                    bits[row * words + id as usize / 64] |= 1u64 << (id % 64);
                }
            }
            Store::Dense { words, bits }
        } else {
            Store::Sparse(db.transactions().iter().map(|t| dict.encode(t)).collect())
        }
    }

    /// Occurrence counts of each candidate over all transactions.
    fn count(&self, candidates: &[Vec<u32>]) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; candidates.len()];
        match self {
            Store::Dense { words, bits } => {
                let masks: Vec<Vec<(usize, u64)>> =
                    candidates.iter().map(|c| sparse_mask(c)).collect();
                for row in bits.chunks_exact(*words) {
                    for (mask, n) in masks.iter().zip(counts.iter_mut()) {
                        if mask.iter().all(|&(w, m)| row[w] & m == m) {
                            *n += 1;
                        }
                    }
                }
            }
            Store::Sparse(rows) => {
                for row in rows {
                    for (cand, n) in candidates.iter().zip(counts.iter_mut()) {
                        if sorted_subset(cand, row) {
                            *n += 1;
                        }
                    }
                }
            }
        }
        counts
    }
}

/// Non-zero words of the bitmask for a sorted id list.
fn sparse_mask(ids: &[u32]) -> Vec<(usize, u64)> {
    let mut out: Vec<(usize, u64)> = Vec::with_capacity(ids.len());
    for &id in ids {
        let word = id as usize / 64;
        let bit = 1u64 << (id % 64);
        match out.last_mut() {
            Some((w, m)) if *w == word => *m |= bit,
            _ => out.push((word, bit)),
        }
    }
    out
}

fn sorted_subset(needle: &[u32], hay: &[u32]) -> bool {
    let mut j = 0;
    for &x in needle {
        while j < hay.len() && hay[j] < x {
            j += 1;
        }
        if j == hay.len() || hay[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

/// Joins frequent (k-1)-itemsets sharing a (k-2)-prefix and prunes any
/// candidate with an infrequent (k-1)-subset. `prev` must be sorted.
fn next_candidates(prev: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let Some(k1) = prev.first().map(Vec::len) else {
        return out;
    };
    let mut subset = Vec::with_capacity(k1);
    for (i, a) in prev.iter().enumerate() {
        for b in &prev[i + 1..] {
            if a[..k1 - 1] != b[..k1 - 1] {
                break;
            }
            let mut cand = a.clone();
            cand.push(b[k1 - 1]);
            let all_frequent = (0..cand.len() - 2).all(|skip| {
                subset.clear();
                subset.extend(
                    cand.iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, &id)| id),
                );
                prev.binary_search(&subset).is_ok()
            });
            if all_frequent {
                out.push(cand);
            }
        }
    }
    out
}

/// Every itemset of size at most `max_itemset_size` whose support in `db`
/// strictly exceeds the minimum support, ordered by size then canonically.
pub fn mine_frequent(db: &TransactionDb, cfg: &MinerConfig) -> Result<Vec<FrequentItemset>, MinerError> {
    cfg.validate()?;
    if db.is_empty() {
        return Err(MinerError::EmptyDatabase);
    }
    let m = db.m();
    let dict = Dictionary::build(db);
    let store = Store::build(&dict, db);

    let mut out = Vec::new();
    let mut level: Vec<Vec<u32>> = (0..dict.codes.len() as u32).map(|i| alloc::vec![i]).collect();
    for size in 1..=cfg.max_itemset_size {
        if level.is_empty() {
            break;
        }
        let counts = store.count(&level);
        let frequent: Vec<Vec<u32>> = level
            .into_iter()
            .zip(counts)
            .filter(|&(_, n)| cfg.min_support.exceeded_by(n, m))
            .map(|(ids, n)| {
                out.push(FrequentItemset {
                    itemset: dict.decode(&ids),
                    count: n,
                    support: n as f64 / m as f64,
                });
                ids
            })
            .collect();
        level = if size < cfg.max_itemset_size {
            next_candidates(&frequent)
        } else {
            Vec::new()
        };
    }
    Ok(out)
}

/// A frequent itemset of D2 with its supports in both groups.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateItemset {
    pub itemset: Itemset,
    /// Occurrences in D2 and D2's size.
    pub count_d2: usize,
    pub m2: usize,
    /// Occurrences in D1 and D1's size.
    pub count_d1: usize,
    pub m1: usize,
    pub supp_d2: f64,
    pub supp_d1: f64,
    /// `supp_d2 / supp_d1`; `f64::INFINITY` when the itemset never occurs in D1.
    pub supp_ratio: f64,
}

impl CandidateItemset {
    pub fn from_counts(itemset: Itemset, count_d2: usize, m2: usize, count_d1: usize, m1: usize) -> Self {
        let supp_d2 = count_d2 as f64 / m2 as f64;
        let supp_d1 = if m1 == 0 { 0.0 } else { count_d1 as f64 / m1 as f64 };
        let supp_ratio = if count_d1 == 0 {
            f64::INFINITY
        } else {
            (count_d2 as f64 * m1 as f64) / (count_d1 as f64 * m2 as f64)
        };
        CandidateItemset {
            itemset,
            count_d2,
            m2,
            count_d1,
            m1,
            supp_d2,
            supp_d1,
            supp_ratio,
        }
    }
}

/// Ratio of two supports, infinite when the denominator support is zero.
pub fn ratio_of_supports(supp_d2: f64, supp_d1: f64) -> f64 {
    if supp_d1 == 0.0 {
        f64::INFINITY
    } else {
        supp_d2 / supp_d1
    }
}

/// Supports of `x` in both groups and their ratio.
pub fn support_ratio(
    x: &Itemset,
    d1: &TransactionDb,
    d2: &TransactionDb,
) -> Result<CandidateItemset, MinerError> {
    if d2.is_empty() {
        return Err(MinerError::EmptyDatabase);
    }
    let count_d2 = d2.count(x);
    if count_d2 == 0 {
        return Err(MinerError::AbsentFromOutcomeGroup(x.clone()));
    }
    Ok(CandidateItemset::from_counts(x.clone(), count_d2, d2.m(), d1.count(x), d1.m()))
}

/// Mines D2 and attaches each frequent itemset's support in D1.
pub fn contrast_candidates(
    d1: &TransactionDb,
    d2: &TransactionDb,
    cfg: &MinerConfig,
) -> Result<Vec<CandidateItemset>, MinerError> {
    let frequent = mine_frequent(d2, cfg)?;
    let dict = Dictionary::build(d2);
    let ids: Vec<Vec<u32>> = frequent
        .iter()
        .map(|f| dict.encode(f.itemset.codes()))
        .collect();
    let counts_d1 = Store::build(&dict, d1).count(&ids);
    Ok(frequent
        .into_iter()
        .zip(counts_d1)
        .map(|(f, c1)| CandidateItemset::from_counts(f.itemset, f.count, d2.m(), c1, d1.m()))
        .collect())
}

/// Keeps candidates whose support ratio exceeds 1, in input order.
pub fn filter_candidates(candidates: Vec<CandidateItemset>) -> Vec<CandidateItemset> {
    candidates.into_iter().filter(|c| c.supp_ratio > 1.0).collect()
}
