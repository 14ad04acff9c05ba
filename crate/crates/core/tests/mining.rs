mod oracles;

use std::collections::BTreeMap;

use adrminer_core::miner::{
    contrast_candidates, filter_candidates, mine_frequent, support_ratio, FrequentItemset,
};
use adrminer_core::{EventCode, Itemset, MinSupport, MinerConfig, TransactionDb};
use proptest::prelude::*;

const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRST";

fn item(i: usize) -> EventCode {
    let text = format!("{}....", ALPHABET[i] as char);
    EventCode::medical(&text).unwrap()
}

fn database(rows: &[Vec<usize>]) -> TransactionDb {
    TransactionDb::from_transactions(rows.iter().map(|r| r.iter().map(|&i| item(i)).collect::<Vec<_>>()))
}

fn decode(f: &FrequentItemset) -> Vec<usize> {
    f.itemset
        .codes()
        .iter()
        .map(|c| ALPHABET.iter().position(|&b| b == c.text().as_bytes()[0]).unwrap())
        .collect()
}

fn config(percent: u64, max_size: usize) -> MinerConfig {
    MinerConfig {
        min_support: MinSupport::new(percent, 100).unwrap(),
        max_itemset_size: max_size,
    }
}

fn assert_anti_monotone(frequent: &[FrequentItemset]) {
    let found: BTreeMap<&Itemset, usize> = frequent.iter().map(|f| (&f.itemset, f.count)).collect();
    for f in frequent {
        let codes = f.itemset.codes();
        if codes.len() < 2 {
            continue;
        }
        for skip in 0..codes.len() {
            let sub = Itemset::new(codes.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, c)| *c)).unwrap();
            let count = found.get(&sub).unwrap_or_else(|| panic!("{sub} missing under {}", f.itemset));
            assert!(*count >= f.count);
        }
    }
}

fn arb_db() -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
    (1usize..=12).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(prop::collection::btree_set(0..n, 0..=n), 1..80)
                .prop_map(|rows| rows.into_iter().map(|r| r.into_iter().collect()).collect()),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn matches_exhaustive_enumeration(
        (n, rows) in arb_db(),
        percent in prop::sample::select(vec![5u64, 10, 30, 50]),
        max_size in 1usize..=4,
    ) {
        let mined = mine_frequent(&database(&rows), &config(percent, max_size)).unwrap();
        assert_anti_monotone(&mined);
        let got: BTreeMap<Vec<usize>, usize> = mined.iter().map(|f| (decode(f), f.count)).collect();
        prop_assert_eq!(got, oracles::brute_force_frequent(&rows, n, percent, max_size));
    }

    #[test]
    fn transaction_order_is_irrelevant((_, rows) in arb_db(), seed in any::<u64>()) {
        let cfg = config(10, 3);
        let base = mine_frequent(&database(&rows), &cfg).unwrap();
        let mut shuffled = rows.clone();
        let len = shuffled.len();
        let mut s = seed;
        for i in (1..len).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(mine_frequent(&database(&shuffled), &cfg).unwrap(), base);
    }

    #[test]
    fn contrast_of_a_database_with_itself_is_neutral((_, rows) in arb_db()) {
        let db = database(&rows);
        for c in contrast_candidates(&db, &db, &config(5, 3)).unwrap() {
            prop_assert_eq!(c.supp_ratio, 1.0);
        }
    }

    #[test]
    fn contrast_supports_match_direct_counts((_, a) in arb_db(), (_, b) in arb_db()) {
        let (d1, d2) = (database(&a), database(&b));
        let candidates = contrast_candidates(&d1, &d2, &config(10, 3)).unwrap();
        for c in &candidates {
            let direct = support_ratio(&c.itemset, &d1, &d2).unwrap();
            prop_assert_eq!(c, &direct);
            prop_assert_eq!(c.count_d1, d1.count(&c.itemset));
        }
        let kept = filter_candidates(candidates.clone());
        prop_assert!(kept.iter().all(|c| c.supp_ratio > 1.0));
        prop_assert_eq!(kept.len(), candidates.iter().filter(|c| c.supp_ratio > 1.0).count());
    }
}

#[test]
fn strict_threshold_excludes_exact_support() {
    // 1 of 20 transactions is exactly 5%.
    let mut rows = vec![vec![0]];
    rows.extend((0..19).map(|_| vec![1]));
    let mined = mine_frequent(&database(&rows), &config(5, 3)).unwrap();
    assert_eq!(mined.iter().map(decode).collect::<Vec<_>>(), vec![vec![1]]);
    rows.push(vec![0]);
    let mined = mine_frequent(&database(&rows), &config(5, 3)).unwrap();
    assert_eq!(mined.len(), 2);
}

#[test]
fn threshold_of_one_mines_nothing() {
    let rows = vec![vec![0, 1]; 10];
    assert!(mine_frequent(&database(&rows), &config(100, 3)).unwrap().is_empty());
}

#[test]
fn sparse_store_agrees_with_brute_force() {
    // More distinct items than the dense bitset store accepts.
    let n_rows = 300;
    let mut rows: Vec<Vec<EventCode>> = Vec::new();
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
        (state >> 33) as usize
    };
    let code = |k: usize| EventCode::medical(&format!("Z{:03}.", k)).unwrap();
    for _ in 0..n_rows {
        let mut t: Vec<EventCode> = (0..30).map(|_| code(next() % 1000)).collect();
        t.extend((0..6).filter(|_| next() % 2 == 0).map(|k| EventCode::medical(&format!("{}....", ALPHABET[k] as char)).unwrap()));
        // Rare codes widen the universe past the dense limit.
        t.extend((0..20).map(|_| EventCode::medical(&format!("Y{:03}.", next() % 1000)).unwrap()));
        t.extend((0..20).map(|_| EventCode::drug(&format!("Q{:03}.", next() % 1000)).unwrap()));
        t.extend((0..20).map(|_| EventCode::drug(&format!("R{:03}.", next() % 1000)).unwrap()));
        t.extend((0..20).map(|_| EventCode::drug(&format!("S{:03}.", next() % 1000)).unwrap()));
        rows.push(t);
    }
    let db = TransactionDb::from_transactions(rows);
    assert!(db.items().len() > adrminer_core::miner::DENSE_ITEM_LIMIT);
    let cfg = config(30, 3);
    let mined = mine_frequent(&db, &cfg).unwrap();
    assert_anti_monotone(&mined);
    let mut item_counts: BTreeMap<EventCode, usize> = BTreeMap::new();
    for t in db.transactions() {
        for c in t {
            *item_counts.entry(*c).or_default() += 1;
        }
    }
    let frequent_items: Vec<EventCode> = item_counts
        .into_iter()
        .filter(|&(_, n)| n * 100 > 30 * n_rows)
        .map(|(c, _)| c)
        .collect();
    assert!(!frequent_items.is_empty() && frequent_items.len() <= 20);
    let index: Vec<Vec<usize>> = db
        .transactions()
        .iter()
        .map(|t| {
            frequent_items
                .iter()
                .enumerate()
                .filter(|(_, c)| t.contains(c))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let want = oracles::brute_force_frequent(&index, frequent_items.len(), 30, 3);
    let got: BTreeMap<Vec<usize>, usize> = mined
        .iter()
        .map(|f| {
            let ids = f
                .itemset
                .codes()
                .iter()
                .map(|c| frequent_items.iter().position(|x| x == c).unwrap())
                .collect();
            (ids, f.count)
        })
        .collect();
    assert_eq!(got, want);
}
