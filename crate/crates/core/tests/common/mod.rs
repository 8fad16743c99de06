//! Reference implementations shared by the integration tests. None of these
//! call into the solver; they are written from the closed-form definitions.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2, Axis};
use vda::datagen::NormalStream;

/// Quartic smoothing of `max(s - eps, 0)` written in terms of
/// `u = s - eps + delta`: value, first and second derivative.
pub fn quartic(s: f64, eps: f64, delta: f64) -> (f64, f64, f64) {
    let u = s - eps + delta;
    if u <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if u >= 2.0 * delta {
        (s - eps, 1.0, 0.0)
    } else {
        let d3 = delta.powi(3);
        (
            u.powi(3) * (4.0 * delta - u) / (16.0 * d3),
            u * u * (3.0 * delta - u) / (4.0 * d3),
            3.0 * u * (2.0 * delta - u) / (4.0 * d3),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: ArrayView2<'a, f64>,
    pub eps: f64,
    pub delta: f64,
    pub lambda_l: f64,
    pub lambda_e: f64,
}

fn residuals(pb: &Problem, a: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut r = pb.y.to_owned() - pb.x.dot(&a.t());
    r -= &b.view().insert_axis(Axis(0));
    r
}

pub fn smooth_part(pb: &Problem, a: &Array2<f64>, b: &Array1<f64>) -> f64 {
    let r = residuals(pb, a, b);
    let n = r.nrows() as f64;
    r.rows()
        .into_iter()
        .map(|ri| quartic(ri.dot(&ri).sqrt(), pb.eps, pb.delta).0)
        .sum::<f64>()
        / n
}

pub fn penalty(pb: &Problem, a: &Array2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| pb.lambda_l * c.iter().map(|v| v.abs()).sum::<f64>() + pb.lambda_e * c.dot(&c).sqrt())
        .sum()
}

pub fn objective(pb: &Problem, a: &Array2<f64>, b: &Array1<f64>) -> f64 {
    smooth_part(pb, a, b) + penalty(pb, a)
}

fn gradient(pb: &Problem, a: &Array2<f64>, b: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
    let r = residuals(pb, a, b);
    let n = r.nrows() as f64;
    let mut g = Array2::zeros(r.raw_dim());
    for (i, ri) in r.rows().into_iter().enumerate() {
        let s = ri.dot(&ri).sqrt();
        let d1 = quartic(s, pb.eps, pb.delta).1;
        if d1 > 0.0 {
            g.row_mut(i).assign(&(&ri * (d1 / s)));
        }
    }
    let ga = -g.t().dot(&pb.x) / n;
    let gb = -g.sum_axis(Axis(0)) / n;
    (ga, gb)
}

/// Soft-threshold each entry, then shrink each column toward zero.
fn prox(a: &Array2<f64>, t: f64, pb: &Problem) -> Array2<f64> {
    let mut out = a.mapv(|v| v.signum() * (v.abs() - t * pb.lambda_l).max(0.0));
    for mut c in out.columns_mut() {
        let nrm = c.dot(&c).sqrt();
        let scale = if nrm > 0.0 { (1.0 - t * pb.lambda_e / nrm).max(0.0) } else { 0.0 };
        c *= scale;
    }
    out
}

/// Accelerated proximal gradient with backtracking and adaptive restart.
pub fn fista(pb: &Problem, iters: usize) -> (Array2<f64>, Array1<f64>, f64) {
    let m = pb.y.ncols();
    let p = pb.x.ncols();
    let mut a = Array2::<f64>::zeros((m, p));
    let mut b = Array1::<f64>::zeros(m);
    let (mut za, mut zb) = (a.clone(), b.clone());
    let mut tk = 1.0f64;
    let mut lip = 1.0f64;
    let mut fx = objective(pb, &a, &b);
    for _ in 0..iters {
        let (ga, gb) = gradient(pb, &za, &zb);
        let fz = smooth_part(pb, &za, &zb);
        let (na, nb) = loop {
            let step = 1.0 / lip;
            let na = prox(&(&za - &(&ga * step)), step, pb);
            let nb = &zb - &(&gb * step);
            let da = &na - &za;
            let db = &nb - &zb;
            let quad = fz
                + (&ga * &da).sum()
                + (&gb * &db).sum()
                + 0.5 * lip * ((&da * &da).sum() + (&db * &db).sum());
            if smooth_part(pb, &na, &nb) <= quad + 1e-15 {
                break (na, nb);
            }
            lip *= 2.0;
        };
        let fnew = objective(pb, &na, &nb);
        if fnew > fx {
            // restart momentum from the current iterate
            za = a.clone();
            zb = b.clone();
            tk = 1.0;
            continue;
        }
        let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        let w = (tk - 1.0) / tn;
        za = &na + &((&na - &a) * w);
        zb = &nb + &((&nb - &b) * w);
        a = na;
        b = nb;
        fx = fnew;
        tk = tn;
        lip *= 0.9;
    }
    (a, b, fx)
}

/// Least-squares regression of one-hot class indicators on `[1, x]`,
/// predicting the class with the largest fitted indicator.
pub fn indicator_regression(
    x: ArrayView2<'_, f64>,
    classes: &[usize],
    k: usize,
    x_new: ArrayView2<'_, f64>,
) -> Vec<usize> {
    let n = x.nrows();
    let q = x.ncols() + 1;
    let design = |x: ArrayView2<'_, f64>| {
        let mut d = Array2::ones((x.nrows(), q));
        d.slice_mut(ndarray::s![.., 1..]).assign(&x);
        d
    };
    let d = design(x);
    let mut y = Array2::<f64>::zeros((n, k));
    for (i, &c) in classes.iter().enumerate() {
        y[[i, c]] = 1.0;
    }
    let coef = solve(d.t().dot(&d), d.t().dot(&y));
    let fitted = design(x_new).dot(&coef);
    fitted
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for j in 1..k {
                if r[j] > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Gaussian elimination with partial pivoting for `M X = B`.
pub fn solve(mut m: Array2<f64>, mut b: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        for c in 0..n {
            m.swap([col, c], [piv, c]);
        }
        for c in 0..b.ncols() {
            b.swap([col, c], [piv, c]);
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]] / m[[col, col]];
                for c in 0..n {
                    m[[r, c]] -= f * m[[col, c]];
                }
                for c in 0..b.ncols() {
                    b[[r, c]] -= f * b[[col, c]];
                }
            }
        }
    }
    for r in 0..n {
        let d = m[[r, r]];
        b.row_mut(r).mapv_inplace(|v| v / d);
    }
    b
}

pub fn normal_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut s = NormalStream::new(seed);
    Array2::from_shape_simple_fn((n, p), || s.normal())
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median_usize(values: &[usize]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}
