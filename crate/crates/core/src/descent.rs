//! Cyclic coordinate descent for the penalized smoothed-loss objective
//!
//! ```text
//! f(A, b) = (1/n) Σ_i p(‖y_i - A x_i - b‖) + λ_L Σ_jl |a_jl| + λ_E Σ_l ‖a_l‖
//! ```
//!
//! Every parameter starts at zero. A sweep visits the intercepts `b_1..b_(k-1)`
//! and then every column `l` of `A` coordinate by coordinate. Each visit takes
//! one Newton step, halved until the objective does not increase. Slopes
//! sitting at zero are only moved when a directional derivative is negative,
//! and a step that would cross zero stops at zero.
//!
//! The Euclidean penalty is not separable at a zero column: every coordinate
//! can look optimal while a joint move still descends. After the coordinate
//! pass over a zero column the solver checks the group optimality condition
//! `‖S(g_l, λ_L)‖ ≤ λ_E` (with `S` the soft threshold) and, when violated,
//! takes a Newton step along the steepest descent direction of the block.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Result, VdaError};
use crate::loss::{norm, partials_raw, SmoothingConfig};
use crate::penalty::{directional_derivatives, PenaltyConfig, ZERO_GROUP_TOL};
use crate::simplex::SimplexCode;

/// Newton denominators below this are treated as flat.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    /// `(k-1) × p` slopes.
    pub a: Array2<f64>,
    /// `k-1` intercepts.
    pub b: Array1<f64>,
}

impl CoefficientSet {
    pub fn zeros(dim: usize, p: usize) -> Self {
        CoefficientSet {
            a: Array2::zeros((dim, p)),
            b: Array1::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.a.ncols()
    }

    /// Predictors whose slope column is not identically zero.
    pub fn active_set(&self) -> Vec<usize> {
        self.a
            .columns()
            .into_iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
            .map(|(l, _)| l)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub max_sweeps: usize,
    /// Relative objective change between sweeps that counts as converged.
    pub tol: f64,
    pub max_halvings: usize,
    pub smoothing: SmoothingConfig,
    pub penalties: PenaltyConfig,
    /// Center and scale predictors to mean 0, variance 1 before fitting.
    pub standardize: bool,
}

impl DescentConfig {
    pub fn new(smoothing: SmoothingConfig, penalties: PenaltyConfig) -> Self {
        DescentConfig {
            max_sweeps: 1000,
            tol: 1e-6,
            max_halvings: 30,
            smoothing,
            penalties,
            standardize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps < 1 {
            return Err(VdaError::arg("max_sweeps must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(VdaError::arg(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_halvings < 1 {
            return Err(VdaError::arg("max_halvings must be at least 1"));
        }
        // round-trip through the checked constructors
        SmoothingConfig::new(
            self.smoothing.epsilon,
            self.smoothing.delta,
            self.smoothing.polynomial,
        )?;
        PenaltyConfig::new(self.penalties.lambda_l, self.penalties.lambda_e)?;
        Ok(())
    }
}

/// Per-predictor affine map `x -> (x - mean) / scale` applied before fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Standardization {
            means: vec![0.0; p],
            scales: vec![1.0; p],
        }
    }

    /// Column means and population standard deviations. Constant columns
    /// get scale 1.
    pub fn from_data(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            means.push(mean);
            scales.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Standardization { means, scales }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (l, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[l], self.scales[l]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Coefficients on the standardized predictor scale.
    pub coefficients: CoefficientSet,
    pub active_set: Vec<usize>,
    /// Objective at the start and after every sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps_used: usize,
    pub converged: bool,
    pub standardization: Standardization,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Target vectors `v_class(i)` stacked as an `n × (k-1)` matrix.
pub fn class_targets(classes: &[usize], code: &SimplexCode) -> Array2<f64> {
    let mut y = Array2::zeros((classes.len(), code.dim()));
    for (i, &c) in classes.iter().enumerate() {
        y.row_mut(i).assign(&code.vertex(c));
    }
    y
}

/// Penalized objective of `theta` on `x` (used as given, no standardization)
/// against target rows `targets`.
pub fn objective(
    theta: &CoefficientSet,
    x: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    cfg: &DescentConfig,
) -> Result<f64> {
    let (n, p) = x.dim();
    let m = theta.dim();
    if targets.nrows() != n || targets.ncols() != m || theta.n_predictors() != p {
        return Err(VdaError::arg(format!(
            "dimension mismatch: x is {n}x{p}, targets {}x{}, slopes {}x{}",
            targets.nrows(),
            targets.ncols(),
            theta.a.nrows(),
            theta.a.ncols()
        )));
    }
    if n == 0 {
        return Err(VdaError::arg("objective needs at least one observation"));
    }
    let fitted = x.dot(&theta.a.t());
    let mut loss = 0.0;
    let mut r = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            r[j] = targets[[i, j]] - fitted[[i, j]] - theta.b[j];
        }
        loss += cfg.smoothing.eval(norm(&r)).0;
    }
    Ok(loss / n as f64 + crate::penalty::penalty_value(theta.a.view(), &cfg.penalties))
}

/// Fit class labels `classes` (0-based, each in `0..k`) onto the simplex code.
pub fn fit(
    x: ArrayView2<'_, f64>,
    classes: &[usize],
    k: usize,
    cfg: &DescentConfig,
) -> Result<FitResult> {
    let code = SimplexCode::new(k)?;
    check_classes(classes, k, x.nrows())?;
    fit_targets(x, class_targets(classes, &code).view(), cfg)
}

pub(crate) fn check_classes(classes: &[usize], k: usize, n: usize) -> Result<()> {
    if classes.len() != n {
        return Err(VdaError::arg(format!(
            "{} labels for {n} rows",
            classes.len()
        )));
    }
    let mut counts = vec![0usize; k];
    for &c in classes {
        if c >= k {
            return Err(VdaError::data(format!("class index {c} outside 0..{k}")));
        }
        counts[c] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(VdaError::data(format!("class {empty} has no observations")));
    }
    Ok(())
}

/// Fit arbitrary target vectors; `targets` is `n × dim`.
pub fn fit_targets(
    x: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    cfg: &DescentConfig,
) -> Result<FitResult> {
    let mut state = DescentState::new(x, targets, cfg)?;
    let mut trace = vec![state.objective()];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        state.sweep();
        sweeps += 1;
        let prev = *trace.last().unwrap();
        let cur = state.objective();
        trace.push(cur);
        if (prev - cur).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let coefficients = state.coefficients();
    Ok(FitResult {
        active_set: coefficients.active_set(),
        coefficients,
        objective_trace: trace,
        sweeps_used: sweeps,
        converged,
        standardization: state.standardization,
    })
}

/// A pending change `θ += t · dir` restricted to one intercept block or one
/// slope column.
#[derive(Debug, Clone, Copy)]
enum Block {
    Intercept,
    Column(usize),
}

/// Mutable solver state: standardized data, parameters, and residual caches.
pub struct DescentState {
    cfg: DescentConfig,
    n: usize,
    m: usize,
    p: usize,
    /// Column-major predictors, `x[l * n + i]`.
    x: Vec<f64>,
    /// Row-major targets, `y[i * m + j]`.
    y: Vec<f64>,
    /// Column-major slopes, `a[l * m + j]`.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Row-major residuals `y_i - A x_i - b`.
    r: Vec<f64>,
    rnorm: Vec<f64>,
    /// Smoothed loss of each residual.
    rloss: Vec<f64>,
    scratch_norm: Vec<f64>,
    scratch_loss: Vec<f64>,
    standardization: Standardization,
}

impl DescentState {
    pub fn new(
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        cfg: &DescentConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let (n, p) = x.dim();
        if n == 0 {
            return Err(VdaError::data("no observations"));
        }
        if targets.nrows() != n {
            return Err(VdaError::arg(format!(
                "{} target rows for {n} observations",
                targets.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(VdaError::data("predictor matrix contains NaN or infinite values"));
        }
        let m = targets.ncols();
        let standardization = if cfg.standardize {
            Standardization::from_data(x)
        } else {
            Standardization::identity(p)
        };
        let mut xs = Vec::with_capacity(n * p);
        for (l, col) in x.columns().into_iter().enumerate() {
            let (mu, sd) = (standardization.means[l], standardization.scales[l]);
            xs.extend(col.iter().map(|v| (v - mu) / sd));
        }
        let y: Vec<f64> = targets.iter().copied().collect();
        let mut state = DescentState {
            cfg: *cfg,
            n,
            m,
            p,
            x: xs,
            y,
            a: vec![0.0; m * p],
            b: vec![0.0; m],
            r: vec![0.0; n * m],
            rnorm: vec![0.0; n],
            rloss: vec![0.0; n],
            scratch_norm: vec![0.0; n],
            scratch_loss: vec![0.0; n],
            standardization,
        };
        state.refresh_residuals();
        Ok(state)
    }

    pub fn coefficients(&self) -> CoefficientSet {
        let mut a = Array2::zeros((self.m, self.p));
        for l in 0..self.p {
            for j in 0..self.m {
                a[[j, l]] = self.a[l * self.m + j];
            }
        }
        CoefficientSet {
            a,
            b: Array1::from(self.b.clone()),
        }
    }

    pub fn intercept(&self, j: usize) -> f64 {
        self.b[j]
    }

    pub fn slope(&self, j: usize, l: usize) -> f64 {
        self.a[l * self.m + j]
    }

    /// Set one slope directly and refresh residual caches.
    pub fn set_slope(&mut self, j: usize, l: usize, value: f64) {
        self.a[l * self.m + j] = value;
        self.refresh_residuals();
    }

    pub fn set_intercept(&mut self, j: usize, value: f64) {
        self.b[j] = value;
        self.refresh_residuals();
    }

    /// Recompute every residual and its norm from the parameters.
    pub fn refresh_residuals(&mut self) {
        let (n, m) = (self.n, self.m);
        for i in 0..n {
            for j in 0..m {
                self.r[i * m + j] = self.y[i * m + j] - self.b[j];
            }
        }
        for l in 0..self.p {
            let col = &self.a[l * m..(l + 1) * m];
            if col.iter().all(|&v| v == 0.0) {
                continue;
            }
            let xl = &self.x[l * n..(l + 1) * n];
            for i in 0..n {
                let xi = xl[i];
                if xi == 0.0 {
                    continue;
                }
                for j in 0..m {
                    self.r[i * m + j] -= col[j] * xi;
                }
            }
        }
        for i in 0..n {
            let s = norm(&self.r[i * m..(i + 1) * m]);
            self.rnorm[i] = s;
            self.rloss[i] = self.cfg.smoothing.eval(s).0;
        }
    }

    /// Mean smoothed loss over observations.
    pub fn loss(&self) -> f64 {
        self.rloss.iter().sum::<f64>() / self.n as f64
    }

    pub fn penalty(&self) -> f64 {
        (0..self.p)
            .map(|l| self.cfg.penalties.column_value(&self.a[l * self.m..(l + 1) * self.m]))
            .sum()
    }

    pub fn objective(&self) -> f64 {
        self.loss() + self.penalty()
    }

    /// One full cycle: intercepts, then every column coordinate by coordinate.
    pub fn sweep(&mut self) {
        self.refresh_residuals();
        for j in 0..self.m {
            self.update_intercept(j);
        }
        for l in 0..self.p {
            let was_zero = self.column_is_zero(l);
            for j in 0..self.m {
                self.update_slope(j, l);
            }
            if was_zero && self.column_is_zero(l) {
                self.group_escape(l);
            }
        }
    }

    fn column_is_zero(&self, l: usize) -> bool {
        self.a[l * self.m..(l + 1) * self.m].iter().all(|&v| v == 0.0)
    }

    /// Loss-only first and second partials (mean over observations) of
    /// coordinate `j`, with chain factor taken from `block`.
    fn coordinate_partials(&self, j: usize, block: Block) -> (f64, f64) {
        let (n, m) = (self.n, self.m);
        let (mut g, mut h) = (0.0, 0.0);
        let lower = self.cfg.smoothing.lower();
        for i in 0..n {
            let s = self.rnorm[i];
            if s < lower {
                continue;
            }
            let w = self.weight(block, i);
            if w == 0.0 {
                continue;
            }
            let (d1, d2) = partials_raw(self.r[i * m + j], s, w, &self.cfg.smoothing);
            g += d1;
            h += d2;
        }
        (g / n as f64, h / n as f64)
    }

    #[inline]
    fn weight(&self, block: Block, i: usize) -> f64 {
        match block {
            Block::Intercept => 1.0,
            Block::Column(l) => self.x[l * self.n + i],
        }
    }

    /// Newton update of intercept `b_j`; returns the new value.
    pub fn update_intercept(&mut self, j: usize) -> f64 {
        let (g, h) = self.coordinate_partials(j, Block::Intercept);
        if h < MIN_CURVATURE {
            return self.b[j];
        }
        let mut dir = vec![0.0; self.m];
        dir[j] = 1.0;
        self.line_search(Block::Intercept, &dir, -g / h);
        self.b[j]
    }

    /// Newton update of slope `a_jl` honoring the lasso and group kinks;
    /// returns the new value.
    pub fn update_slope(&mut self, j: usize, l: usize) -> f64 {
        let m = self.m;
        let pen = self.cfg.penalties;
        let (g, h) = self.coordinate_partials(j, Block::Column(l));
        let col = &self.a[l * m..(l + 1) * m];
        let a_jl = col[j];
        let nrm = norm(col);
        let group_curv = if nrm >= ZERO_GROUP_TOL {
            pen.lambda_e / nrm * (1.0 - a_jl * a_jl / (nrm * nrm))
        } else {
            0.0
        };
        let hess = h + group_curv;
        let step = if a_jl == 0.0 {
            let (fwd, bwd) = directional_derivatives(g, a_jl, col, &pen);
            if fwd >= 0.0 && bwd >= 0.0 {
                return a_jl;
            }
            if hess < MIN_CURVATURE {
                return a_jl;
            }
            if fwd < 0.0 {
                -fwd / hess
            } else {
                bwd / hess
            }
        } else {
            if hess < MIN_CURVATURE {
                return a_jl;
            }
            let grad = g + pen.lambda_l * a_jl.signum() + pen.lambda_e * a_jl / nrm;
            let step = -grad / hess;
            if (a_jl + step) * a_jl < 0.0 {
                -a_jl
            } else {
                step
            }
        };
        let mut dir = vec![0.0; m];
        dir[j] = 1.0;
        self.line_search(Block::Column(l), &dir, step);
        self.a[l * m + j]
    }

    /// Joint move of a zero column when the group optimality test fails.
    fn group_escape(&mut self, l: usize) {
        let pen = self.cfg.penalties;
        if self.m < 2 || pen.lambda_e == 0.0 {
            return;
        }
        let (n, m) = (self.n, self.m);
        let grad: Vec<f64> = (0..m)
            .map(|j| self.coordinate_partials(j, Block::Column(l)).0)
            .collect();
        let soft: Vec<f64> = grad
            .iter()
            .map(|&g| g.signum() * (g.abs() - pen.lambda_l).max(0.0))
            .collect();
        let soft_norm = norm(&soft);
        if soft_norm <= pen.lambda_e {
            return;
        }
        let dir: Vec<f64> = soft.iter().map(|s| -s / soft_norm).collect();
        let slope = pen.lambda_e - soft_norm;
        let mut curv = 0.0;
        let lower = self.cfg.smoothing.lower();
        let xl = &self.x[l * n..(l + 1) * n];
        for i in 0..n {
            let s = self.rnorm[i];
            if s < lower || xl[i] == 0.0 {
                continue;
            }
            let (_, d1, d2) = self.cfg.smoothing.eval(s);
            let ru: f64 = (0..m).map(|j| self.r[i * m + j] * dir[j]).sum();
            let c2 = ru * ru / (s * s);
            curv += xl[i] * xl[i] * (d2 * c2 + d1 / s * (1.0 - c2));
        }
        curv /= n as f64;
        if curv < MIN_CURVATURE {
            return;
        }
        self.line_search(Block::Column(l), &dir, -slope / curv);
    }

    /// Try `θ_block += t · dir` for `t = step, step/2, ...` and keep the first
    /// trial that does not increase the objective. Returns whether a move
    /// was accepted.
    fn line_search(&mut self, block: Block, dir: &[f64], step: f64) -> bool {
        if step == 0.0 || !step.is_finite() {
            return false;
        }
        let (n, m) = (self.n, self.m);
        let pen = self.cfg.penalties;
        let old_col: Vec<f64> = match block {
            Block::Intercept => Vec::new(),
            Block::Column(l) => self.a[l * m..(l + 1) * m].to_vec(),
        };
        let old_pen = match block {
            Block::Intercept => 0.0,
            Block::Column(_) => pen.column_value(&old_col),
        };
        let mut row = vec![0.0; m];
        let mut new_col = old_col.clone();
        let mut t = step;
        for _ in 0..=self.cfg.max_halvings {
            let pen_change = match block {
                Block::Intercept => 0.0,
                Block::Column(_) => {
                    for j in 0..m {
                        new_col[j] = old_col[j] + t * dir[j];
                    }
                    pen.column_value(&new_col) - old_pen
                }
            };
            let mut loss_change = 0.0;
            for i in 0..n {
                let w = self.weight(block, i);
                if w == 0.0 {
                    self.scratch_norm[i] = self.rnorm[i];
                    self.scratch_loss[i] = self.rloss[i];
                    continue;
                }
                for j in 0..m {
                    row[j] = self.r[i * m + j] - t * w * dir[j];
                }
                let s = norm(&row);
                let v = self.cfg.smoothing.eval(s).0;
                self.scratch_norm[i] = s;
                self.scratch_loss[i] = v;
                loss_change += v - self.rloss[i];
            }
            let change = loss_change / n as f64 + pen_change;
            if change <= 0.0 {
                #[cfg(debug_assertions)]
                let before = self.objective();
                self.commit(block, dir, t, &new_col);
                debug_assert!(
                    self.objective() <= before + 1e-10 * before.abs().max(1.0),
                    "accepted update increased the objective"
                );
                return true;
            }
            t *= 0.5;
        }
        false
    }

    fn commit(&mut self, block: Block, dir: &[f64], t: f64, new_col: &[f64]) {
        let (n, m) = (self.n, self.m);
        match block {
            Block::Intercept => {
                for j in 0..m {
                    self.b[j] += t * dir[j];
                }
            }
            Block::Column(l) => self.a[l * m..(l + 1) * m].copy_from_slice(new_col),
        }
        for i in 0..n {
            let w = self.weight(block, i);
            if w == 0.0 {
                continue;
            }
            for j in 0..m {
                self.r[i * m + j] -= t * w * dir[j];
            }
            self.rnorm[i] = self.scratch_norm[i];
            self.rloss[i] = self.scratch_loss[i];
        }
    }

    /// Loss gradient with respect to every slope, as a `(k-1) × p` matrix.
    pub fn slope_gradient(&self) -> Array2<f64> {
        let mut g = Array2::zeros((self.m, self.p));
        for l in 0..self.p {
            for j in 0..self.m {
                g[[j, l]] = self.coordinate_partials(j, Block::Column(l)).0;
            }
        }
        g
    }

    /// Cycle intercept updates alone until the loss settles.
    pub fn fit_intercepts(&mut self, max_sweeps: usize) {
        let mut prev = self.loss();
        for _ in 0..max_sweeps {
            for j in 0..self.m {
                self.update_intercept(j);
            }
            let cur = self.loss();
            if (prev - cur).abs() <= self.cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            prev = cur;
        }
    }
}
