//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use vda::consistency::{self, check_landscape, minimize_risk, risk, FisherCheck};
use vda::datagen::{bayes_classify, generate, Design, SimData, SimSpec};
use vda::descent::{self, DescentConfig};
use vda::loss::{partials_intercept, partials_slope, Polynomial, Residual, SmoothingConfig};
use vda::model::{error_rate, train, TrainOptions};
use vda::penalty::PenaltyConfig;
use vda::simplex::{default_epsilon, SimplexCode};
use vda::tuning::{default_grid, false_positive_bound, stability_select, Grid};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn simplex_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 2..=30 {
        let code = SimplexCode::new(k).unwrap();
        let v = code.vertices();
        let edge = (2.0 * k as f64 / (k as f64 - 1.0)).sqrt();
        let inner = -1.0 / (k as f64 - 1.0);
        for i in 0..k {
            let vi = v.row(i);
            worst = worst.max((vi.dot(&vi).sqrt() - 1.0).abs());
            for j in i + 1..k {
                let vj = v.row(j);
                let d = &vi - &vj;
                worst = worst.max((d.dot(&d).sqrt() - edge).abs());
                worst = worst.max((vi.dot(&vj) - inner).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn smoothing_correctness() -> Outcome {
    let mut join: f64 = 0.0;
    for &(eps, delta) in &[(0.866, 0.2165), (1.0, 0.25), (0.5, 0.1), (2.0, 1.5)] {
        let cfg = SmoothingConfig::new(eps, delta, Polynomial::Quartic).unwrap();
        let (v, d1, d2) = cfg.eval(eps + delta);
        join = join.max((v - delta).abs()).max((d1 - 1.0).abs()).max(d2.abs());
        let (v, d1, d2) = cfg.eval(eps - delta);
        join = join.max(v.abs()).max(d1.abs()).max(d2.abs());
        let (_, _, peak) = cfg.eval(eps);
        join = join.max((peak - 0.75 / delta).abs());
        for i in 1..1000 {
            let s = eps - delta + 2.0 * delta * i as f64 / 1000.0;
            if cfg.eval(s).2 > peak + 1e-12 {
                join = f64::INFINITY;
            }
        }
    }

    let mut stream = vda::datagen::NormalStream::new(2024);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let k = 3 + checked % 4;
        let eps = default_epsilon(k).unwrap();
        let delta = eps / 4.0;
        let cfg = SmoothingConfig::new(eps, delta, Polynomial::Quartic).unwrap();
        let scale = 0.4 + 1.2 * stream.uniform();
        let r: Vec<f64> = (0..k - 1).map(|_| stream.normal() * scale).collect();
        let s = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (s - (eps - delta)).abs() < 0.01 || (s - (eps + delta)).abs() < 0.01 {
            continue;
        }
        let j = checked % (k - 1);
        let x = if checked % 2 == 0 { 1.0 } else { stream.normal() };
        let res = Residual::new(r.clone());
        let (g, c) = if checked % 2 == 0 {
            partials_intercept(&res, j, &cfg)
        } else {
            partials_slope(&res, j, x, &cfg)
        };
        let phi = |t: f64| {
            let mut q = r.clone();
            q[j] -= t * x;
            common::quartic(q.iter().map(|v| v * v).sum::<f64>().sqrt(), eps, delta).0
        };
        let h1 = 1e-6;
        let fd1 = (phi(h1) - phi(-h1)) / (2.0 * h1);
        let h2 = 1e-4;
        let fd2 = (phi(h2) - 2.0 * phi(0.0) + phi(-h2)) / (h2 * h2);
        worst = worst
            .max((fd1 - g).abs() / g.abs().max(1e-2))
            .max((fd2 - c).abs() / c.abs().max(1e-2));
        checked += 1;
    }
    outcome(
        join <= 1e-12 && worst <= 1e-4,
        format!("join deviation {join:.2e}, worst finite-difference relative error {worst:.2e} over 1000 points"),
    )
}

fn descent_vs_oracle() -> Outcome {
    let code = SimplexCode::new(3).unwrap();
    let eps = default_epsilon(3).unwrap();
    let delta = eps / 4.0;
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let mut stream = vda::datagen::NormalStream::new(77);
    for inst in 0..20u64 {
        let x = common::normal_matrix(20, 2, 500 + inst) * 1.5;
        let classes: Vec<usize> = (0..20).map(|i| (i + inst as usize) % 3).collect();
        let y = descent::class_targets(&classes, &code);
        let base = 0.01 + 0.2 * stream.uniform();
        let (ll, le) = match inst % 4 {
            0 => (base, 0.0),
            1 => (0.0, base),
            2 => (base, 0.5 * base),
            _ => (3.0 * base, 3.0 * base),
        };
        let smoothing = SmoothingConfig::new(eps, delta, Polynomial::Quartic).unwrap();
        let mut cfg = DescentConfig::new(smoothing, PenaltyConfig::new(ll, le).unwrap());
        cfg.standardize = false;
        cfg.tol = 1e-12;
        cfg.max_sweeps = 100_000;
        let fit = descent::fit(x.view(), &classes, 3, &cfg).unwrap();
        monotone &= fit
            .objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs());
        let pb = common::Problem {
            x: x.view(),
            y: y.view(),
            eps,
            delta,
            lambda_l: ll,
            lambda_e: le,
        };
        let a: Array2<f64> = fit.coefficients.a.clone();
        let b: Array1<f64> = fit.coefficients.b.clone();
        let f_cd = common::objective(&pb, &a, &b);
        let (_, _, f_or) = common::fista(&pb, 20_000);
        worst = worst
            .max((f_cd - f_or).abs())
            .max((f_cd - fit.final_objective()).abs());
    }
    outcome(
        worst <= 1e-5 && monotone,
        format!("max |objective - oracle| {worst:.2e}, traces nonincreasing: {monotone}"),
    )
}

fn toy_example() -> Outcome {
    let data = generate(&SimSpec::new(Design::Toy).with_seed(1)).unwrap();
    let labels: Vec<String> = data.labels.iter().map(|l| l.to_string()).collect();
    let mut errs = Vec::new();
    for eps in [0.866, 0.6] {
        let opts = TrainOptions {
            epsilon: Some(eps),
            ..Default::default()
        };
        let model = train(data.x.view(), &labels, &opts).unwrap();
        errs.push(error_rate(&labels, &model.predict(data.x.view()).unwrap()));
    }
    let ls = common::indicator_regression(data.x.view(), &data.classes(), 3, data.x.view());
    let middle = ls.iter().filter(|&&c| c == 1).count();
    outcome(
        (0.005..=0.05).contains(&errs[0]) && errs[1] >= 0.08 && middle == 0,
        format!(
            "error {:.2}% at eps 0.866, {:.2}% at eps 0.6, indicator regression predicts class 2 {} times",
            100.0 * errs[0],
            100.0 * errs[1],
            middle
        ),
    )
}

/// Best test error over the default grid; ties go to the larger penalty sum.
fn tuned_on_test(train_set: &SimData, test_set: &SimData) -> (f64, Vec<usize>) {
    let yl: Vec<String> = train_set.labels.iter().map(|l| l.to_string()).collect();
    let tl: Vec<String> = test_set.labels.iter().map(|l| l.to_string()).collect();
    let opts = TrainOptions::default();
    let grid = default_grid(train_set.x.view(), &yl, &opts).unwrap();
    let mut best = (f64::INFINITY, Vec::new(), f64::NEG_INFINITY);
    for cell in grid.cells() {
        let o = TrainOptions {
            penalties: cell,
            ..opts
        };
        let model = train(train_set.x.view(), &yl, &o).unwrap();
        let e = error_rate(&tl, &model.predict(test_set.x.view()).unwrap());
        let strength = cell.lambda_l + cell.lambda_e;
        if e < best.0 - 1e-12 || ((e - best.0).abs() <= 1e-12 && strength > best.2) {
            best = (e, model.active_predictors(), strength);
        }
    }
    (best.0, best.1)
}

fn replicates(spec: SimSpec, reps: u64, n_test: usize) -> Vec<(f64, Vec<usize>)> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let tr = generate(&spec.with_seed(10_000 + r)).unwrap();
            let te = generate(&spec.with_n(n_test).with_seed(20_000 + r)).unwrap();
            tuned_on_test(&tr, &te)
        })
        .collect()
}

fn monte_carlo_bayes(spec: SimSpec, n: usize) -> f64 {
    let data = generate(&spec.with_n(n).with_seed(424_242)).unwrap();
    let pred = bayes_classify(&spec, data.x.view()).unwrap();
    error_rate(&data.labels, &pred)
}

fn example2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, target) in [(10, 12.38), (80, 13.33)] {
        let res = replicates(SimSpec::new(Design::Ex2).with_p(p), 20, 3000);
        let mean = 100.0 * res.iter().map(|r| r.0).sum::<f64>() / res.len() as f64;
        let both = res
            .iter()
            .filter(|r| r.1.contains(&0) && r.1.contains(&1))
            .count() as f64
            / res.len() as f64;
        pass &= (mean - target).abs() <= 2.0 && both >= 0.95;
        parts.push(format!(
            "p={p}: mean error {mean:.2}% (target {target}), x1 and x2 active in {:.0}%",
            100.0 * both
        ));
    }
    let bayes = 100.0 * monte_carlo_bayes(SimSpec::new(Design::Ex2), 400_000);
    pass &= (bayes - 10.81).abs() <= 0.5;
    parts.push(format!("Monte Carlo Bayes error {bayes:.2}%"));
    outcome(pass, parts.join("; "))
}

fn example1() -> Outcome {
    let res = replicates(SimSpec::new(Design::Ex1).with_k(4).with_d(3.0), 20, 3000);
    let mean = 100.0 * res.iter().map(|r| r.0).sum::<f64>() / res.len() as f64;
    let sizes: Vec<usize> = res.iter().map(|r| r.1.len()).collect();
    let median = common::median_usize(&sizes);
    outcome(
        (mean - 3.40).abs() <= 1.5 && median == 2.0,
        format!("mean error {mean:.2}% (target 3.40), median active-set size {median}"),
    )
}

fn stability() -> Outcome {
    let spec = SimSpec::new(Design::Ex2).with_p(160).with_seed(31);
    let data = generate(&spec).unwrap();
    let labels: Vec<String> = data.labels.iter().map(|l| l.to_string()).collect();
    let lambda_l: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64).collect();
    let grid = Grid::new(lambda_l.clone(), vec![0.1]).unwrap();
    let report = stability_select(
        data.x.view(),
        &labels,
        &grid,
        100,
        0.9,
        5,
        &TrainOptions::default(),
    )
    .unwrap();
    let mut min_relevant = f64::INFINITY;
    let mut worst_p90: f64 = 0.0;
    for (c, cell) in report.cells.iter().enumerate() {
        let probs = &report.probabilities[c];
        if cell.lambda_l >= 0.1 - 1e-9 && cell.lambda_l <= 0.2 + 1e-9 {
            min_relevant = min_relevant.min(probs[0]).min(probs[1]);
        }
        worst_p90 = worst_p90.max(common::percentile(&probs[2..], 0.9));
    }
    let mut formula = true;
    for q in [0.0, 1.0, 2.5, 7.25, 40.0] {
        for pi in [0.6, 0.75, 0.9, 1.0] {
            for p in [10usize, 160, 1000] {
                formula &= false_positive_bound(q, pi, p) == q * q / ((2.0 * pi - 1.0) * p as f64);
            }
        }
    }
    formula &= false_positive_bound(10.0, 0.9, 160) == 0.78125;
    outcome(
        min_relevant > 0.9 && worst_p90 < 0.5 && formula,
        format!(
            "min pi_hat(x1, x2) on [0.1, 0.2] = {min_relevant:.2}, max 90th percentile of irrelevant pi_hat = {worst_p90:.2}, \
             fp_bound formula exact: {formula}, stable set {:?}",
            report.stable_set.iter().map(|l| l + 1).collect::<Vec<_>>()
        ),
    )
}

fn fisher() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 3..=5 {
        let draws = consistency::random_probabilities(k, 200, 900 + k as u64);
        let lands = consistency::sweep(&draws, k, None).unwrap();
        let consistent = lands
            .iter()
            .filter(|l| check_landscape(l).unwrap() == FisherCheck::Consistent)
            .count();
        let dichotomy = lands.iter().filter(|l| l.satisfies_dichotomy()).count();
        pass &= consistent == 200 && dichotomy == 200;
        parts.push(format!("k={k}: {consistent}/200 consistent, {dichotomy}/200 dichotomy"));
    }
    let code = SimplexCode::new(3).unwrap();
    let third = 1.0 / 3.0;
    let uniform = minimize_risk(&[third; 3], 3, None).unwrap();
    let origin = risk(&[0.0, 0.0], &[third; 3], &code, uniform.epsilon);
    let s1 = (uniform.min_value - origin).abs() <= 1e-9
        && uniform.minimizer.iter().all(|v| v.abs() <= 1e-4);
    let tied = minimize_risk(&[0.37, 0.37, 0.26], 3, None).unwrap();
    let d = |land: &consistency::RiskLandscape, j: usize| {
        let v = code.vertex(j);
        ((v[0] - land.minimizer[0]).powi(2) + (v[1] - land.minimizer[1]).powi(2)).sqrt()
    };
    let s2 = (d(&tied, 0) - d(&tied, 1)).abs() <= 1e-4
        && check_landscape(&tied).unwrap() == FisherCheck::Indeterminate;
    let dominant = minimize_risk(&[0.6, 0.3, 0.1], 3, None).unwrap();
    let s3 = dominant.nearest_vertex == 0 && dominant.on_boundary;
    let t = 0.025;
    let nudged = minimize_risk(&[third + t, third - 0.25 * t, third - 0.75 * t], 3, None).unwrap();
    let s4 = nudged.nearest_vertex == 0;
    pass &= s1 && s2 && s3 && s4;
    parts.push(format!(
        "uniform at origin: {s1}, tie symmetric: {s2}, dominant on boundary of v1: {s3}, t=0.025 closest to v1: {s4}"
    ));
    outcome(pass, parts.join("; "))
}

fn run_cli(dir: &Path, args: &[&str], threads: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_vda"))
        .args(args)
        .current_dir(dir)
        .env("VDA_THREADS", threads)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut same = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "4")] {
        let ok = run_cli(d, &["simulate", "--design", "ex2", "--p", "20", "--seed", "11", "--out", &format!("sim_{run}.csv")], threads)
            && run_cli(d, &["cv", "--data", "sim_a.csv", "--seed", "3", "--folds", "5", "--lambda-l-grid", "0.01,0.05,0.2", "--lambda-e-grid", "0.01,0.1", "--out", &format!("cv_{run}.csv")], threads)
            && run_cli(d, &["stability", "--data", "sim_a.csv", "--seed", "4", "--subsamples", "20", "--lambda-l-grid", "0.05,0.1,0.2", "--lambda-e-grid", "0.1", "--out", &format!("st_{run}.csv")], threads)
            && run_cli(d, &["consistency", "--k", "3", "--draws", "10", "--seed", "5", "--out", &format!("co_{run}.csv")], threads)
            && run_cli(d, &["fit", "--data", "sim_a.csv", "--lambda-l", "0.05", "--lambda-e", "0.1", "--model", &format!("m_{run}.json")], threads)
            && run_cli(d, &["predict", "--model", &format!("m_{run}.json"), "--data", "sim_a.csv", "--out", &format!("pr_{run}.csv")], threads);
        if !ok {
            return outcome(false, format!("a command failed on run {run}"));
        }
    }
    for stem in ["sim", "cv", "st", "co", "m", "pr"] {
        let ext = if stem == "m" { "json" } else { "csv" };
        let a = std::fs::read(d.join(format!("{stem}_a.{ext}"))).unwrap();
        let b = std::fs::read(d.join(format!("{stem}_b.{ext}"))).unwrap();
        same.push((stem, a == b && !a.is_empty()));
    }
    let all = same.iter().all(|s| s.1);
    outcome(all, format!("byte-identical outputs across reruns (1 vs 4 threads): {same:?}"))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 simplex exactness", simplex_exactness, Duration::from_secs(1)),
        ("2 smoothing correctness", smoothing_correctness, Duration::from_secs(5)),
        ("3 descent vs oracle", descent_vs_oracle, Duration::from_secs(120)),
        ("4 toy example", toy_example, Duration::from_secs(10)),
        ("5 simulation example 2", example2, Duration::from_secs(900)),
        ("6 simulation example 1", example1, Duration::from_secs(900)),
        ("7 stability selection", stability, Duration::from_secs(1200)),
        ("8 Fisher consistency", fisher, Duration::from_secs(300)),
        ("9 determinism", determinism, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, f, limit) in criteria {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let pass = out.pass && took <= limit;
        if !pass {
            failed += 1;
        }
        let line = format!(
            "criterion {name}: {} ({}; {:.2}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
        println!("{line}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
