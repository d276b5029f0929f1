//! Oracle checks against planted truths, closed forms and invariances.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cocoonlab::corpus::{log_linear_fit, nearest_rank};
use cocoonlab::econ::{self, EconRow, SPECIFICATIONS, Term};
use cocoonlab::logit::LogitFit;
use cocoonlab::synth::{EconTruth, generate_econ};
use common::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use tempfile::tempdir;

fn fit(rows: &[EconRow], terms: &[Term]) -> LogitFit {
    econ::fit_logit(rows, terms).expect("fit succeeds")
}

fn dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).expect("csv file");
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn growth_rate_recovered_from_noisy_counts() {
    let (a, b, sigma) = (4.0, 0.005, 0.2);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
    let noise = Normal::new(0.0, sigma).unwrap();
    let pts: Vec<(f64, f64)> = (0..330)
        .map(|t| (t as f64, (a + b * t as f64 + noise.sample(&mut rng)).exp()))
        .collect();
    let got = log_linear_fit(&pts).unwrap();

    // Closed-form least squares on the logged counts.
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    assert!((got.slope - slope).abs() < 1e-12);
    assert!((got.intercept - (my - slope * mx)).abs() < 1e-9);
    let se = sigma / sxx.sqrt();
    assert!((got.slope - b).abs() < 3.0 * se, "slope {} vs {b}", got.slope);
    assert!((got.slope_std_error / se - 1.0).abs() < 0.2);
}

#[test]
fn irls_is_consistent_as_rows_grow() {
    let truth = EconTruth::linear();
    let terms = SPECIFICATIONS[0];
    let mut ses = Vec::new();
    for (n, seed) in [(1_000, 21), (10_000, 22), (100_000, 23)] {
        let rows = generate_econ(&truth, n, seed).unwrap();
        let f = fit(&rows, terms);
        assert!(f.converged);
        for c in &f.coefficients {
            let z = (c.estimate - truth.coefficient(&c.term)) / c.std_error;
            assert!(z.abs() < 4.0, "n={n} {}: z={z}", c.term);
        }
        ses.push(f.get("social_capital").unwrap().std_error);
    }
    for w in ses.windows(2) {
        let shrink = w[1] / w[0];
        assert!((0.25..0.40).contains(&shrink), "SE shrink {shrink}");
    }
}

#[test]
fn logit_ignores_row_order_and_scales_with_duplication() {
    let rows = generate_econ(&EconTruth::linear(), 2_000, 5).unwrap();
    let terms = SPECIFICATIONS[1];
    let base = fit(&rows, terms);

    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(9));
    let again = fit(&shuffled, terms);
    for (a, b) in base.coefficients.iter().zip(&again.coefficients) {
        assert!((a.estimate - b.estimate).abs() < 1e-9);
        assert!((a.std_error - b.std_error).abs() < 1e-9);
    }

    let doubled: Vec<EconRow> = rows.iter().chain(&rows).cloned().collect();
    let twice = fit(&doubled, terms);
    for (a, b) in base.coefficients.iter().zip(&twice.coefficients) {
        assert!((a.estimate - b.estimate).abs() < 1e-8);
        assert!((b.std_error * 2f64.sqrt() / a.std_error - 1.0).abs() < 1e-6);
    }
}

#[test]
fn econ_summary_matches_generator_moments() {
    let truth = EconTruth::linear();
    let n = 20_000;
    let rows = generate_econ(&truth, n, 8).unwrap();
    let summary = econ::summarize(&rows).unwrap();
    let get = |v: &str| summary.iter().find(|s| s.variable == v).unwrap();
    let nf = n as f64;

    let sc = get("social_capital");
    assert!((sc.mean - truth.social_capital_mean).abs() < 4.0 * truth.social_capital_sd / nf.sqrt());
    assert!((sc.sd / truth.social_capital_sd - 1.0).abs() < 0.03);
    assert!(sc.min >= 0.0);
    for (v, share) in [("hillary", truth.hillary_share), ("female", truth.female_share)] {
        let se = (share * (1.0 - share) / nf).sqrt();
        assert!((get(v).mean - share).abs() < 4.0 * se, "{v}");
        assert_eq!(get(v).n, n);
    }
    let sq = get("social_capital_sq");
    let expected = truth.social_capital_mean.powi(2) + truth.social_capital_sd.powi(2);
    assert!((sq.mean / expected - 1.0).abs() < 0.02);
}

#[test]
fn quadratic_model_recovered_through_cli() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("gen");
    gen(&g, 4, &["--econ-rows", "50000", "--econ-model", "quadratic", "--clinton", "5", "--trump", "5"]);
    let out = dir.path().join("reg");
    run_ok(&["--out", s(&out), "regress", "--dataset", s(&g.join("econ.csv"))]);
    let fits = read_json(&out.join("fits.json"));
    let truth = EconTruth::quadratic();
    let spec3 = &fits["specifications"][2]["fit"]["coefficients"];
    for c in spec3.as_array().unwrap() {
        let term = c["term"].as_str().unwrap();
        let z = (c["estimate"].as_f64().unwrap() - truth.coefficient(term)) / c["std_error"].as_f64().unwrap();
        assert!(z.abs() < 3.0, "{term}: z={z}");
    }
    let table = fs::read_to_string(out.join("table.txt")).unwrap();
    assert!(table.contains("Social Capital²"));
}

#[test]
fn missing_gender_column_fails_only_gendered_specs() {
    let dir = tempdir().unwrap();
    let rows = generate_econ(&EconTruth::linear(), 500, 2).unwrap();
    let mut text = String::from("user_id,open,hillary,social_capital\n");
    for r in &rows {
        text.push_str(&format!("{},{},{},{}\n", r.user_id, r.open, r.hillary, r.social_capital));
    }
    let data = dir.path().join("data.csv");
    fs::write(&data, text).unwrap();
    let out = dir.path().join("reg");
    let res = run(&["--out", s(&out), "regress", "--dataset", s(&data)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let fits = read_json(&out.join("fits.json"));
    let specs = fits["specifications"].as_array().unwrap();
    assert!(specs[0]["fit"].is_object());
    assert!(specs[1]["error"].is_string());
    assert!(specs[2]["error"].is_string());
}

#[test]
fn single_class_outcome_is_an_input_error() {
    let dir = tempdir().unwrap();
    let mut rows = generate_econ(&EconTruth::linear(), 300, 2).unwrap();
    rows.iter_mut().for_each(|r| r.open = 1);
    let data = dir.path().join("data.csv");
    econ::write_dataset(&data, &rows).unwrap();
    let res = run(&["--out", s(&dir.path().join("reg")), "regress", "--dataset", s(&data)]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn categorical_tweet_counts_give_matching_percentiles() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("gen");
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"users": {"clinton": 200, "trump": 200, "other": 100, "dual": 0},
            "tweets_per_user": {"categorical": [[5, 0.5], [40, 0.3], [200, 0.2]]}}"#,
    )
    .unwrap();
    gen(&g, 12, &["--spec", s(&spec)]);
    let out = dir.path().join("an");
    analyze(&g, &[g.join("corpus.jsonl")], &out, &[]);

    let truth = read_json(&g.join("ground_truth.json"));
    let mut counts: Vec<u64> = truth["tweets_per_user"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .filter(|&c| c > 0)
        .collect();
    counts.sort_unstable();
    let table: BTreeMap<u32, u64> = csv_rows(&out.join("tweets_per_user.csv"))
        .into_iter()
        .filter(|r| r[0] == "all")
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    assert_eq!(table.len(), 9);
    for (&p, &v) in &table {
        assert_eq!(v, nearest_rank(&counts, p), "p{p}");
    }
    assert_eq!(table[&10], 5);
    assert_eq!(table[&60], 40);
    assert_eq!(table[&90], 200);
}

#[test]
fn monthly_series_tracks_a_step_change() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let spec_a = dir.path().join("a.json");
    let spec_b = dir.path().join("b.json");
    fs::write(&spec_a, r#"{"within": 0.6, "cross": 0.4, "start": "2016-01-01", "end": "2016-06-30"}"#).unwrap();
    fs::write(&spec_b, r#"{"within": 0.9, "cross": 0.1, "start": "2016-07-01", "end": "2016-11-30"}"#).unwrap();
    gen(&a, 1, &["--spec", s(&spec_a)]);
    gen(&b, 2, &["--spec", s(&spec_b)]);
    for f in ["trump_ids.txt", "clinton_ids.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let out = dir.path().join("an");
    analyze(&a, &[a.join("corpus.jsonl"), b.join("corpus.jsonl")], &out, &[]);

    let mut planted: BTreeMap<String, [[u64; 3]; 2]> = BTreeMap::new();
    for g in [&a, &b] {
        let truth = read_json(&g.join("ground_truth.json"));
        for (month, m) in truth["monthly_retweet"].as_object().unwrap() {
            let c = counts(m);
            let e = planted.entry(month.clone()).or_default();
            for r in 0..2 {
                for k in 0..3 {
                    e[r][k] += c[r][k];
                }
            }
        }
    }
    let rows = csv_rows(&out.join("series_retweet_clinton.csv"));
    assert_eq!(rows.len(), 11);
    let (mut early, mut late) = ((0u64, 0u64), (0u64, 0u64));
    let (mut early_max, mut late_min) = (0f64, f64::INFINITY);
    for r in &rows {
        let month = format!("{}-{:0>2}", r[0], r[1]);
        let (own, opp): (u64, u64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert_eq!((own, opp), (planted[&month][0][0], planted[&month][0][1]), "{month}");
        let ratio: f64 = r[4].parse().unwrap();
        assert!((ratio - own as f64 / opp as f64).abs() < 5e-5);
        if r[1].parse::<u32>().unwrap() <= 6 {
            early = (early.0 + own, early.1 + opp);
            early_max = early_max.max(ratio);
        } else {
            late = (late.0 + own, late.1 + opp);
            late_min = late_min.min(ratio);
        }
    }
    let (re, rl) = (early.0 as f64 / early.1 as f64, late.0 as f64 / late.1 as f64);
    assert!((1.3..1.7).contains(&re), "early ratio {re}");
    assert!((7.0..11.5).contains(&rl), "late ratio {rl}");
    assert!(late_min > early_max, "step not visible: {early_max} vs {late_min}");
}

#[test]
fn no_cross_retweets_leaves_ratio_undefined() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("gen");
    gen(&g, 3, &["--cross", "0"]);
    let out = dir.path().join("an");
    analyze(&g, &[g.join("corpus.jsonl")], &out, &[]);
    let truth = read_json(&g.join("ground_truth.json"));
    let planted = counts(&truth["retweet"]);
    assert_eq!((planted[0][1], planted[1][0]), (0, 0));
    assert_eq!(matrix_csv(&out.join("retweet_matrix.csv")), planted);
    for row in csv_rows(&out.join("retweet_matrix.csv")) {
        assert_eq!(row[4], "", "{row:?}");
    }
    let json = read_json(&out.join("summary.json"));
    assert!(json.to_string().contains("null"));
}

#[test]
fn empty_corpus_is_an_input_error() {
    let dir = tempdir().unwrap();
    let corpus = dir.path().join("empty.jsonl");
    let ids = dir.path().join("ids.txt");
    fs::write(&corpus, "").unwrap();
    fs::write(&ids, "1\n").unwrap();
    let res = run(&[
        "--out",
        s(&dir.path().join("an")),
        "analyze",
        "--corpus",
        s(&corpus),
        "--trump-ids",
        s(&ids),
        "--clinton-ids",
        s(&ids),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("gen");
    gen(&g, 6, &[]);
    let (one, three) = (dir.path().join("one"), dir.path().join("three"));
    analyze(&g, &[g.join("corpus.jsonl")], &one, &["--threads", "1"]);
    analyze(&g, &[g.join("corpus.jsonl")], &three, &["--threads", "3"]);
    let (a, b) = (dir_files(&one), dir_files(&three));
    assert!(a.contains_key("retweet_matrix.csv"));
    assert_eq!(a, b);
}

#[test]
fn open_indicators_match_planted_truth() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("gen");
    gen(&g, 10, &["--cross", "0.01", "--retweet-rate", "0.3"]);
    let out = dir.path().join("reg");
    run_ok(&[
        "--out",
        s(&out),
        "regress",
        "--corpus",
        s(&g.join("corpus.jsonl")),
        "--trump-ids",
        s(&g.join("trump_ids.txt")),
        "--clinton-ids",
        s(&g.join("clinton_ids.txt")),
        "--names",
        s(&g.join("names.csv")),
    ]);
    let truth = read_json(&g.join("ground_truth.json"));
    let planted = truth["open"].as_object().unwrap();
    let rows = econ::read_dataset(out.join("dataset.csv")).unwrap();
    assert_eq!(rows.len(), planted.len());
    let opens = rows.iter().filter(|r| r.open == 1).count();
    assert!(opens > 0 && opens < rows.len());
    for r in &rows {
        assert_eq!(Some(u64::from(r.open)), planted[&r.user_id.to_string()].as_u64(), "user {}", r.user_id);
    }
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempdir().unwrap();
    let g = dir.path().join("gen");
    gen(&g, 13, &[]);
    let out = dir.path().join("an");
    analyze(&g, &[g.join("corpus.jsonl")], &out, &["--format", "json"]);
    let again = dir.path().join("again");
    run_ok(&["replay", s(&out.join("manifest.json")), "--into", s(&again)]);
    assert_eq!(dir_files(&out), dir_files(&again));

    let sim = dir.path().join("sim");
    run_ok(&["--seed", "5", "--out", s(&sim), "simulate", "--n", "50", "--max-iters", "200000"]);
    let sim2 = dir.path().join("sim2");
    run_ok(&["replay", s(&sim.join("manifest.json")), "--into", s(&sim2)]);
    assert_eq!(dir_files(&sim), dir_files(&sim2));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["--out", s(&out), "sweep", "--step", "0.3", "--realizations", "2"]).status.code(), Some(2));
    assert_eq!(run(&["--out", s(&out), "simulate", "--p-open", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["--out", s(&out), "frobnicate"]).status.code(), Some(2));
    let missing = dir.path().join("missing.jsonl");
    let res = run(&[
        "--out",
        s(&out),
        "analyze",
        "--corpus",
        s(&missing),
        "--trump-ids",
        s(&missing),
        "--clinton-ids",
        s(&missing),
    ]);
    assert_eq!(res.status.code(), Some(3));

    // A malformed line is skipped by default and fatal under --strict.
    let g = dir.path().join("gen");
    gen(&g, 1, &["--clinton", "5", "--trump", "5", "--other", "0", "--dual", "0"]);
    let corpus = g.join("corpus.jsonl");
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push_str("{not json\n");
    fs::write(&corpus, text).unwrap();
    analyze(&g, &[corpus.clone()], &dir.path().join("lenient"), &[]);
    let strict = run(&[
        "--strict",
        "--out",
        s(&dir.path().join("strict")),
        "analyze",
        "--corpus",
        s(&corpus),
        "--trump-ids",
        s(&g.join("trump_ids.txt")),
        "--clinton-ids",
        s(&g.join("clinton_ids.txt")),
    ]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn seeds_change_synthetic_draws() {
    let a = generate_econ(&EconTruth::linear(), 100, 1).unwrap();
    let b = generate_econ(&EconTruth::linear(), 100, 2).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, generate_econ(&EconTruth::linear(), 100, 1).unwrap());
}
