//! Penalty selection: stratified k-fold cross-validation over a
//! `(λ_L, λ_E)` grid, and stability selection over random half-samples.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::descent::{class_targets, DescentState};
use crate::error::{Result, VdaError};
use crate::model::{encode_labels, error_rate, sorted_labels, train, TrainOptions};
use crate::penalty::PenaltyConfig;
use crate::simplex::SimplexCode;

/// Stability selection default from the subsampling literature.
pub const DEFAULT_SUBSAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lambda_l: Vec<f64>,
    lambda_e: Vec<f64>,
}

impl Grid {
    pub fn new(lambda_l: Vec<f64>, lambda_e: Vec<f64>) -> Result<Self> {
        for (name, v) in [("lambda_L", &lambda_l), ("lambda_E", &lambda_e)] {
            if v.is_empty() {
                return Err(VdaError::arg(format!("{name} grid is empty")));
            }
            if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(VdaError::arg(format!("{name} grid has negative or non-finite values")));
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(VdaError::arg(format!("{name} grid must be strictly increasing")));
            }
        }
        Ok(Grid { lambda_l, lambda_e })
    }

    /// `count` log-spaced values from `max / ratio` to `max`.
    pub fn log_spaced(max: f64, ratio: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![max];
        }
        let lo = (max / ratio).ln();
        let hi = max.ln();
        (0..count)
            .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
            .collect()
    }

    pub fn lambda_l(&self) -> &[f64] {
        &self.lambda_l
    }

    pub fn lambda_e(&self) -> &[f64] {
        &self.lambda_e
    }

    /// All cells, `λ_L` varying slowest.
    pub fn cells(&self) -> Vec<PenaltyConfig> {
        self.lambda_l
            .iter()
            .flat_map(|&l| {
                self.lambda_e.iter().map(move |&e| PenaltyConfig {
                    lambda_l: l,
                    lambda_e: e,
                })
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.lambda_l.len() * self.lambda_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Smallest `λ_L` (with `λ_E = 0`) and smallest `λ_E` (with `λ_L = 0`) for
/// which every slope stays at zero once the intercepts are fit.
pub fn lambda_max<S: AsRef<str>>(
    x: ArrayView2<'_, f64>,
    labels: &[S],
    opts: &TrainOptions,
) -> Result<(f64, f64)> {
    let label_map = sorted_labels(labels);
    let classes = encode_labels(labels, &label_map)?;
    let k = label_map.len();
    if k < 2 {
        return Err(VdaError::data("need at least two distinct labels"));
    }
    let cfg = opts.descent_config(k)?;
    let code = SimplexCode::new(k)?;
    let targets = class_targets(&classes, &code);
    let mut state = DescentState::new(x, targets.view(), &cfg)?;
    state.fit_intercepts(cfg.max_sweeps);
    let g = state.slope_gradient();
    let lasso = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let group = g
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0f64, f64::max);
    Ok((lasso, group))
}

/// 10 × 10 log grid from `λ_max / 100` to `λ_max` on each axis.
pub fn default_grid<S: AsRef<str>>(
    x: ArrayView2<'_, f64>,
    labels: &[S],
    opts: &TrainOptions,
) -> Result<Grid> {
    let (l, e) = lambda_max(x, labels, opts)?;
    let l = if l > 0.0 { l } else { 1.0 };
    let e = if e > 0.0 { e } else { 1.0 };
    Grid::new(Grid::log_spaced(l, 100.0, 10), Grid::log_spaced(e, 100.0, 10))
}

/// Assign each observation a fold in `0..folds`, stratified by class.
pub fn stratified_folds(classes: &[usize], k: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; classes.len()];
    let mut next = 0;
    for c in 0..k {
        let mut idx: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

fn training_sets_complete(classes: &[usize], k: usize, assignment: &[usize], folds: usize) -> bool {
    (0..folds).all(|f| {
        let mut seen = vec![false; k];
        for (i, &c) in classes.iter().enumerate() {
            if assignment[i] != f {
                seen[c] = true;
            }
        }
        seen.into_iter().all(|s| s)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub lambda_l: f64,
    pub lambda_e: f64,
    pub mean_error: f64,
    /// Standard error of the fold errors.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub cells: Vec<CvCell>,
    pub best: usize,
    pub folds: usize,
}

impl CvReport {
    pub fn best_cell(&self) -> &CvCell {
        &self.cells[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda_L,lambda_E,mean_error,se\n");
        for c in &self.cells {
            writeln!(s, "{},{},{},{}", c.lambda_l, c.lambda_e, c.mean_error, c.se).unwrap();
        }
        s
    }
}

/// Index of the lowest error; ties go to the larger `λ_L + λ_E`.
pub fn pick_best(errors: &[f64], cells: &[PenaltyConfig]) -> usize {
    let mut best = 0;
    for i in 1..errors.len() {
        let (e, eb) = (errors[i], errors[best]);
        let strength = cells[i].lambda_l + cells[i].lambda_e;
        let best_strength = cells[best].lambda_l + cells[best].lambda_e;
        if e < eb - 1e-12 || ((e - eb).abs() <= 1e-12 && strength > best_strength) {
            best = i;
        }
    }
    best
}

fn select_rows(x: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

pub fn cross_validate<S: AsRef<str> + Sync>(
    x: ArrayView2<'_, f64>,
    labels: &[S],
    grid: &Grid,
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<CvReport> {
    if folds < 2 {
        return Err(VdaError::arg(format!("need at least 2 folds, got {folds}")));
    }
    if labels.len() != x.nrows() {
        return Err(VdaError::arg("labels and rows disagree in length"));
    }
    if folds > x.nrows() {
        return Err(VdaError::arg(format!("{folds} folds for {} rows", x.nrows())));
    }
    let label_map = sorted_labels(labels);
    let classes = encode_labels(labels, &label_map)?;
    let k = label_map.len();
    let mut assignment = stratified_folds(&classes, k, folds, seed);
    if !training_sets_complete(&classes, k, &assignment, folds) {
        assignment = stratified_folds(&classes, k, folds, seed.wrapping_add(1));
        if !training_sets_complete(&classes, k, &assignment, folds) {
            return Err(VdaError::data(
                "cannot form folds whose training parts contain every class",
            ));
        }
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..x.nrows()).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect();
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..folds).map(move |f| (c, f)))
        .collect();
    let errs: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (tr, te) = &splits[f];
            let mut o = *opts;
            o.penalties = cells[c];
            let xtr = select_rows(x, tr);
            let ytr: Vec<&str> = tr.iter().map(|&i| labels[i].as_ref()).collect();
            let model = train(xtr.view(), &ytr, &o)?;
            let xte = select_rows(x, te);
            let yte: Vec<String> = te.iter().map(|&i| labels[i].as_ref().to_string()).collect();
            Ok(error_rate(&yte, &model.predict(xte.view())?))
        })
        .collect::<Result<_>>()?;
    let cv_cells: Vec<CvCell> = cells
        .iter()
        .enumerate()
        .map(|(c, pen)| {
            let e = &errs[c * folds..(c + 1) * folds];
            let mean = e.iter().sum::<f64>() / folds as f64;
            let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (folds - 1) as f64;
            CvCell {
                lambda_l: pen.lambda_l,
                lambda_e: pen.lambda_e,
                mean_error: mean,
                se: (var / folds as f64).sqrt(),
            }
        })
        .collect();
    let means: Vec<f64> = cv_cells.iter().map(|c| c.mean_error).collect();
    Ok(CvReport {
        best: pick_best(&means, &cells),
        cells: cv_cells,
        folds,
    })
}

/// Expected number of falsely selected predictors is at most
/// `q² / ((2π - 1) p)`.
pub fn false_positive_bound(q: f64, pi: f64, p: usize) -> f64 {
    q * q / ((2.0 * pi - 1.0) * p as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub cells: Vec<PenaltyConfig>,
    /// `probabilities[c][l]`: fraction of subsamples in which predictor `l`
    /// has a nonzero column at grid cell `c`.
    pub probabilities: Vec<Vec<f64>>,
    pub stable_set: Vec<usize>,
    pub pi: f64,
    /// Mean over subsamples of the size of the union of selected sets
    /// across the grid.
    pub q: f64,
    pub fp_bound: f64,
    pub n_subsamples: usize,
}

impl StabilityReport {
    /// Highest selection frequency of each predictor over the grid.
    pub fn max_probabilities(&self) -> Vec<f64> {
        let p = self.probabilities.first().map_or(0, Vec::len);
        (0..p)
            .map(|l| self.probabilities.iter().map(|row| row[l]).fold(0.0, f64::max))
            .collect()
    }

    /// Stable set for another threshold, from the same frequencies.
    pub fn stable_set_at(&self, pi: f64) -> Vec<usize> {
        self.max_probabilities()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m >= pi)
            .map(|(l, _)| l)
            .collect()
    }

    /// Long format `predictor,lambda_L,lambda_E,pi_hat`; predictors are
    /// 1-based.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("predictor,lambda_L,lambda_E,pi_hat\n");
        let p = self.probabilities.first().map_or(0, Vec::len);
        for l in 0..p {
            for (c, pen) in self.cells.iter().enumerate() {
                writeln!(
                    s,
                    "{},{},{},{}",
                    l + 1,
                    pen.lambda_l,
                    pen.lambda_e,
                    self.probabilities[c][l]
                )
                .unwrap();
            }
        }
        s
    }
}

/// Random stratified half-sample of size `⌊n/2⌋` containing every class.
pub fn half_sample(classes: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    let target = classes.len() / 2;
    if target < k {
        return Err(VdaError::data("too few observations for a half-sample containing every class"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut take: Vec<usize> = by_class.iter().map(|v| v.len() / 2).collect();
    let mut odd: Vec<usize> = (0..k).filter(|&c| by_class[c].len() % 2 == 1).collect();
    odd.shuffle(&mut rng);
    let short = target - take.iter().sum::<usize>();
    for &c in odd.iter().take(short) {
        take[c] += 1;
    }
    while let Some(c) = (0..k).find(|&c| take[c] == 0) {
        if by_class[c].is_empty() {
            return Err(VdaError::data(format!("class {c} has no observations")));
        }
        let donor = (0..k).max_by_key(|&d| (take[d], std::cmp::Reverse(d))).unwrap();
        take[donor] -= 1;
        take[c] = 1;
    }
    let mut out = Vec::with_capacity(target);
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        out.extend_from_slice(&idx[..take[c]]);
    }
    out.sort_unstable();
    Ok(out)
}

pub fn stability_select<S: AsRef<str> + Sync>(
    x: ArrayView2<'_, f64>,
    labels: &[S],
    grid: &Grid,
    n_subsamples: usize,
    pi: f64,
    seed: u64,
    opts: &TrainOptions,
) -> Result<StabilityReport> {
    if !(pi > 0.5 && pi <= 1.0) {
        return Err(VdaError::arg(format!("pi must lie in (0.5, 1], got {pi}")));
    }
    if n_subsamples < 2 {
        return Err(VdaError::arg("need at least 2 subsamples"));
    }
    if labels.len() != x.nrows() {
        return Err(VdaError::arg("labels and rows disagree in length"));
    }
    let label_map = sorted_labels(labels);
    let classes = encode_labels(labels, &label_map)?;
    let k = label_map.len();
    let p = x.ncols();
    let cells = grid.cells();
    // selected[s][c] = active set of subsample s at cell c
    let selected: Vec<Vec<Vec<usize>>> = (0..n_subsamples)
        .into_par_iter()
        .map(|s| {
            let rows = half_sample(&classes, k, seed.wrapping_add(s as u64))?;
            let xs = select_rows(x, &rows);
            let ys: Vec<&str> = rows.iter().map(|&i| labels[i].as_ref()).collect();
            cells
                .iter()
                .map(|pen| {
                    let mut o = *opts;
                    o.penalties = *pen;
                    Ok(train(xs.view(), &ys, &o)?.active_predictors())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![vec![0usize; p]; cells.len()];
    let mut union_total = 0usize;
    for per_cell in &selected {
        let mut union = vec![false; p];
        for (c, active) in per_cell.iter().enumerate() {
            for &l in active {
                counts[c][l] += 1;
                union[l] = true;
            }
        }
        union_total += union.iter().filter(|&&u| u).count();
    }
    let probabilities: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / n_subsamples as f64).collect())
        .collect();
    let q = union_total as f64 / n_subsamples as f64;
    let mut report = StabilityReport {
        cells,
        probabilities,
        stable_set: Vec::new(),
        pi,
        q,
        fp_bound: false_positive_bound(q, pi, p),
        n_subsamples,
    };
    report.stable_set = report.stable_set_at(pi);
    Ok(report)
}
