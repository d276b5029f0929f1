#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cocoonlab::logit::Design;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cocoonlab")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("COCOONLAB_SEED")
        .output()
        .expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Runs `gen` into `dir` with extra flags.
pub fn gen(dir: &Path, seed: u64, extra: &[&str]) {
    let seed = seed.to_string();
    let mut args = vec!["--seed", &seed, "--out", s(dir), "gen"];
    args.extend_from_slice(extra);
    run_ok(&args);
}

/// Runs `analyze` on the files `gen` wrote into `gen_dir`.
pub fn analyze(gen_dir: &Path, corpora: &[PathBuf], out: &Path, extra: &[&str]) -> Output {
    let trump = gen_dir.join("trump_ids.txt");
    let clinton = gen_dir.join("clinton_ids.txt");
    let mut args: Vec<String> = vec!["--out".into(), s(out).into()];
    args.extend(extra.iter().map(|a| a.to_string()));
    args.extend(["analyze".into(), "--trump-ids".into(), s(&trump).into(), "--clinton-ids".into(), s(&clinton).into()]);
    for c in corpora {
        args.push("--corpus".into());
        args.push(s(c).into());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run_ok(&refs)
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("file exists")).expect("valid JSON")
}

/// Parses a `source,clinton,trump,other,cocoon_ratio` CSV into the 2x3 count block.
pub fn matrix_csv(path: &Path) -> [[u64; 3]; 2] {
    let text = std::fs::read_to_string(path).expect("matrix file");
    let mut m = [[0; 3]; 2];
    for (row, line) in text.lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        for c in 0..3 {
            m[row][c] = cells[c + 1].parse().expect("count");
        }
    }
    m
}

pub fn counts(v: &serde_json::Value) -> [[u64; 3]; 2] {
    serde_json::from_value(v["counts"].clone()).expect("matrix counts")
}

/// Bernoulli log-likelihood written out directly, independent of the library.
pub fn loglik(d: &Design, beta: &[f64]) -> f64 {
    let p = d.terms.len();
    let mut ll = 0.0;
    for (r, y) in d.y.iter().enumerate() {
        let eta: f64 = d.x[r * p..(r + 1) * p].iter().zip(beta).map(|(x, b)| x * b).sum();
        let log1pexp = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        ll += y * eta - log1pexp;
    }
    ll
}

/// Maximises `f` by cyclic coordinate search: golden-section on each axis in turn over a
/// bracket that shrinks as the cycles settle.
pub fn coordinate_search(f: impl Fn(&[f64]) -> f64, start: &[f64], tol: f64, max_cycles: usize) -> Vec<f64> {
    let mut x = start.to_vec();
    let mut width = 2.0;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..max_cycles {
        let before = x.clone();
        for k in 0..x.len() {
            let (mut lo, mut hi) = (x[k] - width, x[k] + width);
            let eval = |v: f64, x: &mut Vec<f64>| {
                let keep = x[k];
                x[k] = v;
                let r = f(x);
                x[k] = keep;
                r
            };
            let mut a = hi - g * (hi - lo);
            let mut b = lo + g * (hi - lo);
            let mut fa = eval(a, &mut x);
            let mut fb = eval(b, &mut x);
            while hi - lo > tol * 0.1 {
                if fa > fb {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - g * (hi - lo);
                    fa = eval(a, &mut x);
                } else {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + g * (hi - lo);
                    fb = eval(b, &mut x);
                }
            }
            let best = 0.5 * (lo + hi);
            if f(&{
                let mut t = x.clone();
                t[k] = best;
                t
            }) >= f(&x)
            {
                x[k] = best;
            }
        }
        let moved = x.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        width = (4.0 * moved).clamp(tol, 2.0);
        if moved < tol * 1e-3 {
            break;
        }
    }
    x
}
