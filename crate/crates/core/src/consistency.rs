//! Numerical check that the ε-insensitive population risk is minimized next
//! to the vertex of the most probable class.

use std::fmt::Write as _;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, VdaError};
use crate::simplex::{default_epsilon, distance, SimplexCode};

pub const BOUNDARY_TOL: f64 = 1e-4;
pub const REFINE_ITERS: usize = 50;
const GRID_RADIUS: f64 = 2.0;
const GOLDEN_STEPS: usize = 60;
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskLandscape {
    pub k: usize,
    pub probs: Vec<f64>,
    pub epsilon: f64,
    pub minimizer: Vec<f64>,
    pub min_value: f64,
    /// 0-based vertex closest to the minimizer.
    pub nearest_vertex: usize,
    /// Distance from the minimizer to its nearest vertex.
    pub nearest_distance: f64,
    /// Within [`BOUNDARY_TOL`] of the nearest vertex's ε-sphere.
    pub on_boundary: bool,
    /// No vertex lies closer than `ε - BOUNDARY_TOL`.
    pub exterior: bool,
}

impl RiskLandscape {
    /// The minimizer is on a ball boundary or outside every ball.
    pub fn satisfies_dichotomy(&self) -> bool {
        self.on_boundary || self.exterior
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FisherCheck {
    Consistent,
    Inconsistent,
    /// The largest probability is shared, so no single Bayes class exists.
    Indeterminate,
}

impl FisherCheck {
    pub fn as_str(&self) -> &'static str {
        match self {
            FisherCheck::Consistent => "consistent",
            FisherCheck::Inconsistent => "inconsistent",
            FisherCheck::Indeterminate => "indeterminate",
        }
    }
}

pub fn validate_probs(probs: &[f64], k: usize) -> Result<()> {
    if probs.len() != k {
        return Err(VdaError::arg(format!(
            "expected {k} probabilities, got {}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(VdaError::arg("probabilities must be finite and nonnegative"));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > PROB_SUM_TOL {
        return Err(VdaError::arg(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// `Σ_j p_j max(‖v_j - z‖ - ε, 0)`.
pub fn risk(z: &[f64], probs: &[f64], code: &SimplexCode, epsilon: f64) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| p * (distance(code.vertex(j), z) - epsilon).max(0.0))
        .sum()
}

fn grid_step(k: usize) -> f64 {
    match k {
        3 => 0.01,
        4 => 0.05,
        _ => 0.2,
    }
}

fn grid_search(probs: &[f64], code: &SimplexCode, epsilon: f64, h: f64) -> (Vec<f64>, f64) {
    let m = code.dim();
    let steps = (GRID_RADIUS / h).round() as i64;
    let mut idx = vec![-steps; m];
    let mut z = vec![0.0; m];
    let mut best = (vec![0.0; m], risk(&z, probs, code, epsilon));
    loop {
        for (zi, &i) in z.iter_mut().zip(&idx) {
            *zi = i as f64 * h;
        }
        if z.iter().map(|v| v * v).sum::<f64>() <= GRID_RADIUS * GRID_RADIUS {
            let r = risk(&z, probs, code, epsilon);
            if r < best.1 {
                best = (z.clone(), r);
            }
        }
        let mut d = 0;
        while d < m && idx[d] == steps {
            idx[d] = -steps;
            d += 1;
        }
        if d == m {
            break;
        }
        idx[d] += 1;
    }
    best
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_STEPS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Gradient of the terms whose ball does not contain `z`, skipping `skip`.
fn outside_gradient(z: &[f64], probs: &[f64], code: &SimplexCode, epsilon: f64, skip: Option<usize>) -> Vec<f64> {
    let m = z.len();
    let mut g = vec![0.0; m];
    for (j, &p) in probs.iter().enumerate() {
        let v = code.vertex(j);
        let dist = distance(v, z);
        if Some(j) == skip || dist <= epsilon || dist == 0.0 {
            continue;
        }
        for i in 0..m {
            g[i] += p * (z[i] - v[i]) / dist;
        }
    }
    g
}

fn unit(mut d: Vec<f64>) -> Option<Vec<f64>> {
    let n = crate::loss::norm(&d);
    if n > 1e-14 {
        d.iter_mut().for_each(|x| *x /= n);
        Some(d)
    } else {
        None
    }
}

/// Search directions at `z`: the axes, the rays toward each vertex, steepest
/// descent, and steepest descent projected onto the tangent plane of each
/// vertex's ε-sphere.
fn directions(z: &[f64], probs: &[f64], code: &SimplexCode, epsilon: f64) -> Vec<Vec<f64>> {
    let m = z.len();
    let mut dirs: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    dirs.extend(unit(outside_gradient(z, probs, code, epsilon, None)));
    for j in 0..code.k() {
        let v = code.vertex(j);
        let Some(u) = unit((0..m).map(|i| z[i] - v[i]).collect()) else {
            continue;
        };
        let g = outside_gradient(z, probs, code, epsilon, Some(j));
        let gu: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
        dirs.extend(unit(g.iter().zip(&u).map(|(a, b)| a - gu * b).collect()));
        dirs.push(u);
    }
    dirs
}

/// Golden-section passes over [`directions`] with a shrinking bracket.
fn refine(z: &mut [f64], probs: &[f64], code: &SimplexCode, epsilon: f64, h: f64) -> f64 {
    let mut best = risk(z, probs, code, epsilon);
    let mut width = 2.0 * h;
    for _ in 0..REFINE_ITERS {
        for d in directions(z, probs, code, epsilon) {
            let along = |t: f64| {
                let p: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                risk(&p, probs, code, epsilon)
            };
            let t = golden(along, -width, width);
            let val = along(t);
            if val < best {
                best = val;
                z.iter_mut().zip(&d).for_each(|(a, b)| *a += t * b);
            }
        }
        width *= 0.8;
    }
    best
}

/// Minimize the population risk for class probabilities `probs`. `epsilon`
/// defaults to the largest value keeping ball interiors disjoint.
pub fn minimize_risk(probs: &[f64], k: usize, epsilon: Option<f64>) -> Result<RiskLandscape> {
    if !(3..=5).contains(&k) {
        return Err(VdaError::arg(format!("risk minimization supports 3 <= k <= 5, got {k}")));
    }
    validate_probs(probs, k)?;
    let epsilon = match epsilon {
        Some(e) => e,
        None => default_epsilon(k)?,
    };
    if !(epsilon > 0.0) {
        return Err(VdaError::arg(format!("epsilon must be positive, got {epsilon}")));
    }
    let code = SimplexCode::new(k)?;
    let h = grid_step(k);
    let (mut z, _) = grid_search(probs, &code, epsilon, h);
    let min_value = refine(&mut z, probs, &code, epsilon, h);
    let dists: Vec<f64> = (0..k).map(|j| distance(code.vertex(j), &z)).collect();
    let nearest_vertex = code.nearest(&z);
    let nearest_distance = dists[nearest_vertex];
    Ok(RiskLandscape {
        k,
        probs: probs.to_vec(),
        epsilon,
        minimizer: z,
        min_value,
        nearest_vertex,
        nearest_distance,
        on_boundary: (nearest_distance - epsilon).abs() <= BOUNDARY_TOL,
        exterior: dists.iter().all(|&d| d >= epsilon - BOUNDARY_TOL),
    })
}

/// Indices attaining the largest probability.
pub fn argmax_set(probs: &[f64]) -> Vec<usize> {
    let top = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..probs.len()).filter(|&j| top - probs[j] <= 1e-12).collect()
}

pub fn check_fisher(probs: &[f64], k: usize) -> Result<FisherCheck> {
    check_landscape(&minimize_risk(probs, k, None)?)
}

pub fn check_landscape(land: &RiskLandscape) -> Result<FisherCheck> {
    let top = argmax_set(&land.probs);
    Ok(if top.len() > 1 {
        FisherCheck::Indeterminate
    } else if top[0] == land.nearest_vertex {
        FisherCheck::Consistent
    } else {
        FisherCheck::Inconsistent
    })
}

/// `count` uniform draws from the probability simplex (flat Dirichlet).
pub fn random_probabilities(k: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..k)
                .map(|_| -rng.sample::<f64, _>(Open01).ln())
                .collect();
            let s: f64 = g.iter().sum();
            g.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// [`minimize_risk`] over many probability vectors, in parallel.
pub fn sweep(probs: &[Vec<f64>], k: usize, epsilon: Option<f64>) -> Result<Vec<RiskLandscape>> {
    probs.par_iter().map(|p| minimize_risk(p, k, epsilon)).collect()
}

/// Risk over a square `[-half, half]²` for k = 3, as CSV `z1,z2,risk`.
pub fn contour_grid_csv(probs: &[f64], epsilon: Option<f64>, half: f64, steps: usize) -> Result<String> {
    validate_probs(probs, 3)?;
    if steps < 2 || !(half > 0.0) {
        return Err(VdaError::arg("contour grid needs at least 2 steps and a positive extent"));
    }
    let eps = match epsilon {
        Some(e) => e,
        None => default_epsilon(3)?,
    };
    let code = SimplexCode::new(3)?;
    let mut s = String::from("z1,z2,risk\n");
    for i in 0..steps {
        let z1 = -half + 2.0 * half * i as f64 / (steps - 1) as f64;
        for j in 0..steps {
            let z2 = -half + 2.0 * half * j as f64 / (steps - 1) as f64;
            writeln!(s, "{},{},{}", z1, z2, risk(&[z1, z2], probs, &code, eps)).unwrap();
        }
    }
    Ok(s)
}
