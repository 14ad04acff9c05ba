//! Acceptance checks, one line per criterion. Exits non-zero if any fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use adrminer::ingest::{apply_first_year_exclusion, load_cohort, RawTables};
use adrminer::pipeline::{analyse, cmd_run, cmd_synth, synthesize};
use adrminer::RunConfig;
use adrminer_core::logit::{fit_design, score, Design};
use adrminer_core::miner::{mine_frequent, ratio_of_supports, support_ratio, FrequentItemset};
use adrminer_core::patient::exclude_early_records;
use adrminer_core::stats::{standard_normal_cdf, two_sided_p};
use adrminer_core::study::partition;
use adrminer_core::{EventCode, Itemset, MinSupport, MinerConfig, TransactionDb};
use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

/// Subsets of every frequent itemset are frequent with at least its count.
fn anti_monotone(frequent: &[FrequentItemset]) -> bool {
    let found: BTreeMap<&Itemset, usize> = frequent.iter().map(|f| (&f.itemset, f.count)).collect();
    frequent.iter().all(|f| {
        let codes = f.itemset.codes();
        codes.len() < 2
            || (0..codes.len()).all(|skip| {
                let sub = Itemset::new(codes.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, c)| *c)).unwrap();
                found.get(&sub).is_some_and(|&n| n >= f.count)
            })
    })
}

fn criterion_1() -> Outcome {
    let rows = [
        (0.15903, 0.056378, 2.820757),
        (0.080863, 0.028041, 2.883717),
        (0.067385, 0.029588, 2.277463),
    ];
    let mut worst: f64 = 0.0;
    let mut got = Vec::new();
    for (s2, s1, want) in rows {
        let r = ratio_of_supports(s2, s1);
        worst = worst.max((r - want).abs());
        got.push(format!("{r:.7}"));
    }
    ensure(worst <= 1e-5, format!("ratios {} max error {worst:.2e} (tolerance 1e-5)", got.join(" ")))
}

fn item(i: usize) -> EventCode {
    EventCode::medical(&format!("{}....", (b'A' + i as u8) as char)).unwrap()
}

struct RandomDb {
    n_items: usize,
    rows: Vec<Vec<usize>>,
    percent: u64,
}

fn random_databases() -> &'static [RandomDb] {
    static DBS: OnceLock<Vec<RandomDb>> = OnceLock::new();
    DBS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        (0..200)
            .map(|_| {
                let n_items = rng.random_range(1..=15);
                let m = rng.random_range(1..=200);
                let density = rng.random_range(0.05..0.7);
                let rows = (0..m)
                    .map(|_| (0..n_items).filter(|_| rng.random_bool(density)).collect())
                    .collect();
                let percent = [5, 10, 30][rng.random_range(0..3)];
                RandomDb { n_items, rows, percent }
            })
            .collect()
    })
}

fn mine_random(db: &RandomDb) -> Vec<FrequentItemset> {
    let tx = TransactionDb::from_transactions(db.rows.iter().map(|r| r.iter().map(|&i| item(i)).collect::<Vec<_>>()));
    let cfg = MinerConfig {
        min_support: MinSupport::new(db.percent, 100).unwrap(),
        max_itemset_size: db.n_items,
    };
    mine_frequent(&tx, &cfg).unwrap()
}

fn criterion_2() -> Outcome {
    let dbs = random_databases();
    let mut itemsets = 0;
    for (k, db) in dbs.iter().enumerate() {
        let got: BTreeMap<Vec<usize>, usize> = mine_random(db)
            .iter()
            .map(|f| (f.itemset.codes().iter().map(|c| (c.text().as_bytes()[0] - b'A') as usize).collect(), f.count))
            .collect();
        let want = oracles::brute_force_frequent(&db.rows, db.n_items, db.percent, db.n_items);
        if got != want {
            return Err(format!("database {k}: {} itemsets mined, {} enumerated", got.len(), want.len()));
        }
        itemsets += want.len();
    }
    Ok(format!("{} databases, {itemsets} frequent itemsets, all equal to enumeration", dbs.len()))
}

fn criterion_3() -> Outcome {
    let mut runs = 0;
    for (k, db) in random_databases().iter().enumerate() {
        if !anti_monotone(&mine_random(db)) {
            return Err(format!("random database {k}"));
        }
        runs += 1;
    }
    for run in planted_runs() {
        if !run.d2_anti_monotone {
            return Err(format!("D2 of synthetic seed {}", run.seed));
        }
        runs += 1;
    }
    Ok(format!("{runs} mining runs"))
}

/// A logistic dataset with six columns: intercept, centred age, gender,
/// factor, exposure, interaction.
fn logistic_dataset(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<bool>) {
    let n = rng.random_range(100..=2000);
    let w: Vec<f64> = (0..6).map(|j| if j == 1 { rng.random_range(-0.05..0.05) } else { rng.random_range(-1.0..1.0) }).collect();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (f, e) = (rng.random_bool(0.4) as u8 as f64, rng.random_bool(0.5) as u8 as f64);
        let row = vec![1.0, rng.random_range(20..80) as f64 - 50.0, rng.random_bool(0.5) as u8 as f64, f, e, f * e];
        let eta: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
        y.push(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()));
        x.push(row);
    }
    (x, y)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_coef, mut worst_score): (f64, f64) = (0.0, 0.0);
    let datasets = 50;
    for k in 0..datasets {
        let (x, y) = logistic_dataset(&mut rng);
        let names = ["intercept", "age", "gender", "x", "exposure", "interaction"].map(String::from).to_vec();
        let design = Design::new(names, x.concat()).unwrap();
        let fit = fit_design(&design, &y).map_err(|e| format!("dataset {k}: {e}"))?;
        let want = oracles::newton_numeric(&x, &y).ok_or(format!("oracle did not settle on dataset {k}"))?;
        for (g, w) in fit.coefficients.iter().zip(&want) {
            worst_coef = worst_coef.max((g - w).abs());
        }
        let norm = score(&design, &y, &fit.coefficients).iter().map(|g| g * g).sum::<f64>().sqrt();
        worst_score = worst_score.max(norm);
    }
    let mut worst_intercept: f64 = 0.0;
    for (pos, n) in [(50usize, 100usize), (25, 100), (3, 40), (170, 200), (1, 1000)] {
        let design = Design::new(vec!["intercept".into()], vec![1.0; n]).unwrap();
        let y: Vec<bool> = (0..n).map(|i| i < pos).collect();
        let p = pos as f64 / n as f64;
        let w0 = fit_design(&design, &y).map_err(|e| e.to_string())?.coefficients[0];
        worst_intercept = worst_intercept.max((w0 - (p / (1.0 - p)).ln()).abs());
    }
    ensure(
        worst_coef < 1e-6 && worst_score < 1e-6 && worst_intercept < 1e-6,
        format!(
            "{datasets} datasets, max coefficient error {worst_coef:.1e}, max score norm {worst_score:.1e}, intercept-only error {worst_intercept:.1e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let z = 1.959964;
    let phi = standard_normal_cdf(z);
    let oracle = oracles::normal_cdf_simpson(z);
    let p = two_sided_p(z);
    ensure(
        standard_normal_cdf(0.0) == 0.5 && (phi - 0.975).abs() < 1e-6 && (phi - oracle).abs() < 1e-6 && (p - 0.05).abs() < 1e-4,
        format!("Φ(0) = {}, Φ({z}) = {phi:.9} (integration {oracle:.9}), p = {p:.6}", standard_normal_cdf(0.0)),
    )
}

struct PlantedRun {
    seed: u64,
    planted_top3: bool,
    planted_p: Option<f64>,
    confounder_ratio: f64,
    confounder_p: Option<f64>,
    d2_anti_monotone: bool,
}

const PLANTED: &str = "G2...";
const CONFOUNDER: &str = "C65..";

fn planted_config(seed: u64) -> RunConfig {
    let text = format!(
        "[generator]\nn_patients = 10000\nexposure_prevalence = 0.2\n\
         planted = [{{ code = \"{PLANTED}\", prevalence = 0.3, interaction_logit = {} }}]\n\
         confounders = [{{ code = \"{CONFOUNDER}\", age_threshold = 65 }}]\n",
        4f64.ln()
    );
    let mut cfg = RunConfig::parse(&text, Path::new("."), Path::new("planted.toml")).unwrap();
    cfg.set_seed(seed);
    cfg
}

fn planted_run(seed: u64) -> PlantedRun {
    let cfg = planted_config(seed);
    let cohort = exclude_early_records(&synthesize(&cfg).unwrap(), cfg.first_year_days);
    let (d1, d2) = partition(&cohort, &cfg.study).unwrap();
    let d2_anti_monotone = anti_monotone(&mine_frequent(&d2, &cfg.miner).unwrap());
    let confounder = Itemset::single(EventCode::medical(CONFOUNDER).unwrap());
    let confounder_ratio = support_ratio(&confounder, &d1, &d2).map_or(0.0, |c| c.supp_ratio);

    let (_, rows) = analyse(&cohort, &cfg).unwrap();
    let find = |code: &str| rows.iter().find(|r| r.itemset.to_string() == code);
    let planted = find(PLANTED);
    let top3: Vec<_> = rows.iter().filter(|r| !r.flags.any()).take(3).collect();
    PlantedRun {
        seed,
        planted_top3: top3.iter().any(|r| r.itemset.to_string() == PLANTED),
        planted_p: planted.and_then(|r| r.p_interaction),
        confounder_ratio,
        confounder_p: find(CONFOUNDER).and_then(|r| r.p_interaction),
        d2_anti_monotone,
    }
}

fn planted_runs() -> &'static [PlantedRun] {
    static RUNS: OnceLock<Vec<PlantedRun>> = OnceLock::new();
    RUNS.get_or_init(|| (1..=20).map(planted_run).collect())
}

fn criterion_6() -> Outcome {
    let runs = planted_runs();
    let hits = runs.iter().filter(|r| r.planted_top3 && r.planted_p.is_some_and(|p| p < 0.05)).count();
    ensure(
        hits >= 18,
        format!("planted code in top 3 unflagged rows with p < 0.05 in {hits} of {} runs (need 18)", runs.len()),
    )
}

fn criterion_7() -> Outcome {
    let runs = planted_runs();
    let passes_filter = runs.iter().filter(|r| r.confounder_ratio > 1.0).count();
    // A confounder that never reaches the report is not declared significant.
    let demoted = runs.iter().filter(|r| r.confounder_p.is_none_or(|p| p > 0.05)).count();
    ensure(
        passes_filter >= 15 && demoted >= 15,
        format!(
            "confounder ratio > 1 in {passes_filter} of {n} runs, interaction p > 0.05 in {demoted} of {n} runs (need 15 each)",
            n = runs.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::parse("[generator]\nn_patients = 3000\n", dir.path(), &dir.path().join("run.toml")).unwrap();
    cfg.set_seed(8);
    cmd_synth(&cfg, dir.path()).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for (out, workers) in [("a", 1), ("b", 1), ("c", 4)] {
        cfg.set_output_dir(&dir.path().join(out));
        cfg.workers = workers;
        cmd_run(&cfg).map_err(|e| e.to_string())?;
        reports.push(fs::read(&cfg.report_path).map_err(|e| e.to_string())?);
    }
    ensure(
        reports[0] == reports[1] && reports[0] == reports[2],
        format!("{} byte reports, identical across repeat runs and worker counts", reports[0].len()),
    )
}

fn criterion_9() -> Outcome {
    let tables = RawTables::in_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/exclusion"));
    let cohort = load_cohort(&tables).map_err(|e| e.to_string())?;
    let once = apply_first_year_exclusion(&cohort);
    let exact = cohort.patients().iter().zip(once.patients()).all(|(a, b)| {
        let cutoff: NaiveDate = a.registration_date + Days::new(365);
        a.events.iter().filter(|r| r.date >= cutoff).eq(b.events.iter())
    });
    let idempotent = apply_first_year_exclusion(&once) == once;
    let (before, after) = (cohort.total_events(), once.total_events());
    ensure(
        before == 50 && after == 32 && exact && idempotent,
        format!("{} of {before} events inside the first year, {after} retained, idempotent: {idempotent}", before - after),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("support ratio arithmetic", criterion_1),
        ("miner equals exhaustive enumeration", criterion_2),
        ("anti-monotonicity", criterion_3),
        ("IRLS against Newton oracle", criterion_4),
        ("Wald machinery", criterion_5),
        ("planted-signal recovery", criterion_6),
        ("confounder demotion", criterion_7),
        ("determinism", criterion_8),
        ("first-year exclusion", criterion_9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {}: {name}: {detail} ({secs:.1}s)", n + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {}: {name}: {detail} ({secs:.1}s)", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
