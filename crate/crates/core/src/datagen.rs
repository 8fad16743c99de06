//! Simulated benchmark designs with known generative models.
//!
//! * `Toy`: one predictor, three balanced classes with means -4, 0, 4.
//! * `Ex1`: `k` classes on a circle of radius `d` in the first two predictors.
//! * `Ex2`: three classes with means `(±√2, ±√2)` in the first two predictors.
//! * `Ex3`/`Ex5`: three-class multi-logit model on the first eight predictors.
//! * `Ex4`/`Ex6`: three balanced classes with mean patterns on five predictors.
//!
//! `Ex5`/`Ex6` draw the first six predictors with pairwise correlation `rho`.
//! Labels are 1-based. Normal variates come from the inverse normal CDF
//! applied to open-interval uniforms of a ChaCha8 stream seeded by `seed`.

use std::f64::consts::{PI, SQRT_2};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, VdaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Toy,
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
    Ex6,
}

impl FromStr for Design {
    type Err = VdaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "toy" => Design::Toy,
            "ex1" => Design::Ex1,
            "ex2" => Design::Ex2,
            "ex3" => Design::Ex3,
            "ex4" => Design::Ex4,
            "ex5" => Design::Ex5,
            "ex6" => Design::Ex6,
            other => return Err(VdaError::arg(format!("unknown design '{other}'"))),
        })
    }
}

/// How the class-3 row of the multi-logit model is read: the literal log-odds
/// value 1, or the conventional baseline 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogitBaseline {
    #[default]
    One,
    Zero,
}

impl FromStr for LogitBaseline {
    type Err = VdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(LogitBaseline::One),
            "zero" => Ok(LogitBaseline::Zero),
            other => Err(VdaError::arg(format!("unknown logit baseline '{other}'"))),
        }
    }
}

impl LogitBaseline {
    fn value(self) -> f64 {
        match self {
            LogitBaseline::One => 1.0,
            LogitBaseline::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub design: Design,
    pub k: usize,
    pub n: usize,
    pub p: usize,
    /// Class separation for `Ex1`.
    pub d: f64,
    /// Within-block correlation for `Ex5`/`Ex6`.
    pub rho: f64,
    pub seed: u64,
    pub logit_baseline: LogitBaseline,
}

impl SimSpec {
    /// Default sizes for `design`: the toy set has 300 rows, example 1 uses
    /// `k = 4`, `n = 20k`, `p = 100`, example 2 `n = 60`, `p = 10`, and
    /// examples 3-6 `n = 200`, `p = 1000`.
    pub fn new(design: Design) -> Self {
        let (k, n, p) = match design {
            Design::Toy => (3, 300, 1),
            Design::Ex1 => (4, 80, 100),
            Design::Ex2 => (3, 60, 10),
            _ => (3, 200, 1000),
        };
        SimSpec {
            design,
            k,
            n,
            p,
            d: 3.0,
            rho: 0.8,
            seed: 0,
            logit_baseline: LogitBaseline::One,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(VdaError::arg("n must be positive"));
        }
        let min_p = match self.design {
            Design::Toy => 1,
            Design::Ex1 | Design::Ex2 => 2,
            Design::Ex3 | Design::Ex5 => 8,
            Design::Ex4 => 5,
            Design::Ex6 => 6,
        };
        if self.p < min_p {
            return Err(VdaError::arg(format!(
                "design {:?} needs at least {min_p} predictors, got {}",
                self.design, self.p
            )));
        }
        match self.design {
            Design::Ex1 if self.k < 2 => {
                return Err(VdaError::arg("example 1 needs k >= 2"));
            }
            Design::Ex1 => {}
            _ if self.k != 3 => {
                return Err(VdaError::arg(format!(
                    "design {:?} has exactly 3 classes, got k = {}",
                    self.design, self.k
                )));
            }
            _ => {}
        }
        if self.design == Design::Toy && self.p != 1 {
            return Err(VdaError::arg("the toy design has a single predictor"));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(VdaError::arg(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !self.d.is_finite() {
            return Err(VdaError::arg("d must be finite"));
        }
        Ok(())
    }

    /// Class mean on the informative predictors, for designs defined by
    /// class means. `class` is 0-based.
    pub fn class_mean(&self, class: usize) -> Option<Vec<f64>> {
        match self.design {
            Design::Toy => Some(vec![[-4.0, 0.0, 4.0][class]]),
            Design::Ex1 => {
                let ang = 2.0 * class as f64 * PI / self.k as f64;
                Some(vec![self.d * ang.cos(), self.d * ang.sin()])
            }
            Design::Ex2 => Some(
                [[SQRT_2, SQRT_2], [-SQRT_2, -SQRT_2], [SQRT_2, -SQRT_2]][class].to_vec(),
            ),
            Design::Ex4 | Design::Ex6 => Some(
                [
                    [0.5, 0.5, 1.0, 0.0, 0.0],
                    [-0.5, -0.5, 0.0, 1.0, 0.0],
                    [0.5, -0.5, 0.0, 0.0, 1.0],
                ][class]
                    .to_vec(),
            ),
            Design::Ex3 | Design::Ex5 => None,
        }
    }

    /// Published Bayes error (as a fraction) for the design, where known.
    pub fn bayes_error_reference(&self) -> Option<f64> {
        match self.design {
            Design::Ex1 => {
                let table = [
                    (4, 1.0, 36.42),
                    (4, 2.0, 14.47),
                    (4, 3.0, 3.33),
                    (8, 1.0, 64.85),
                    (8, 2.0, 43.82),
                    (8, 3.0, 25.06),
                ];
                table
                    .iter()
                    .find(|(k, d, _)| *k == self.k && *d == self.d)
                    .map(|(_, _, e)| e / 100.0)
            }
            Design::Ex2 => Some(0.1081),
            _ => None,
        }
    }

    fn logit_scores(&self, x: &[f64]) -> [f64; 3] {
        [
            -x[0] - x[1] - x[2] + x[6] + x[7],
            x[3] + x[4] + x[5] - x[6] - x[7],
            self.logit_baseline.value(),
        ]
    }

    fn balanced(&self) -> bool {
        !matches!(self.design, Design::Ex3 | Design::Ex5)
    }

    fn correlated_block(&self) -> usize {
        match self.design {
            Design::Ex5 | Design::Ex6 => 6,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub x: Array2<f64>,
    /// 1-based class labels.
    pub labels: Vec<usize>,
    pub bayes_error_reference: Option<f64>,
}

impl SimData {
    /// 0-based class indices.
    pub fn classes(&self) -> Vec<usize> {
        self.labels.iter().map(|&c| c - 1).collect()
    }
}

/// Standard normal sampler over a seeded stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, 1.0).expect("standard normal"),
        }
    }

    pub fn normal(&mut self) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        self.normal.inverse_cdf(u)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

pub fn generate(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let (n, p, k) = (spec.n, spec.p, spec.k);
    let mut stream = NormalStream::new(spec.seed);
    let mut x = Array2::<f64>::zeros((n, p));
    let mut labels = Vec::with_capacity(n);
    let block = spec.correlated_block();
    let (shared_w, own_w) = (spec.rho.sqrt(), (1.0 - spec.rho).sqrt());
    let mut row = vec![0.0; p];
    for i in 0..n {
        if block > 0 {
            let z0 = stream.normal();
            for (l, v) in row.iter_mut().enumerate() {
                let z = stream.normal();
                *v = if l < block { shared_w * z0 + own_w * z } else { z };
            }
        } else {
            for v in row.iter_mut() {
                *v = stream.normal();
            }
        }
        let class = if spec.balanced() {
            let c = i % k;
            if let Some(mean) = spec.class_mean(c) {
                for (v, m) in row.iter_mut().zip(&mean) {
                    *v += m;
                }
            }
            c
        } else {
            let probs = softmax(spec.logit_scores(&row));
            let u = stream.uniform();
            categorical(&probs, u)
        };
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        labels.push(class + 1);
    }
    Ok(SimData {
        x,
        labels,
        bayes_error_reference: spec.bayes_error_reference(),
    })
}

fn softmax(eta: [f64; 3]) -> [f64; 3] {
    let mx = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = eta.map(|v| (v - mx).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (c, &pr) in probs.iter().enumerate() {
        acc += pr;
        if u < acc {
            return c;
        }
    }
    probs.len() - 1
}

/// Bayes-optimal 1-based labels for rows of `x` under the design's true model.
pub fn bayes_classify(spec: &SimSpec, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    spec.validate()?;
    if x.ncols() != spec.p {
        return Err(VdaError::arg(format!(
            "expected {} columns, got {}",
            spec.p,
            x.ncols()
        )));
    }
    let k = spec.k;
    let rows = x.rows().into_iter();
    let out = match spec.design {
        Design::Ex3 | Design::Ex5 => rows
            .map(|r| {
                let r = r.to_vec();
                argmax(&spec.logit_scores(&r)) + 1
            })
            .collect(),
        Design::Ex6 => {
            // Equal-covariance Gaussians: linear discriminant with the inverse
            // of the equicorrelated 6-block.
            let rho = spec.rho;
            let b = 6.0;
            let shrink = rho / (1.0 - rho + b * rho);
            let means: Vec<Vec<f64>> = (0..k)
                .map(|c| {
                    let mut m = spec.class_mean(c).unwrap();
                    m.push(0.0);
                    m
                })
                .collect();
            let precision_times = |v: &[f64]| -> Vec<f64> {
                let s: f64 = v.iter().sum();
                v.iter().map(|vi| (vi - shrink * s) / (1.0 - rho)).collect()
            };
            let pm: Vec<Vec<f64>> = means.iter().map(|m| precision_times(m)).collect();
            let offsets: Vec<f64> = means
                .iter()
                .zip(&pm)
                .map(|(m, q)| 0.5 * m.iter().zip(q).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            rows.map(|r| {
                let scores: Vec<f64> = (0..k)
                    .map(|c| (0..6).map(|l| pm[c][l] * r[l]).sum::<f64>() - offsets[c])
                    .collect();
                argmax(&scores) + 1
            })
            .collect()
        }
        _ => {
            let means: Vec<Vec<f64>> = (0..k).map(|c| spec.class_mean(c).unwrap()).collect();
            rows.map(|r| {
                let scores: Vec<f64> = means
                    .iter()
                    .map(|m| -m.iter().enumerate().map(|(l, v)| (r[l] - v).powi(2)).sum::<f64>())
                    .collect();
                argmax(&scores) + 1
            })
            .collect()
        }
    };
    Ok(out)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
