//! Epsilon-insensitive loss and its twice-differentiable smoothing.
//!
//! The smoothed scalar loss `p(s)` is zero on `[0, ε-δ)`, a polynomial on
//! `[ε-δ, ε+δ]` and `s - ε` beyond. The quartic join matches value, slope
//! and curvature at both ends; the quadratic join only value and slope.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VdaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polynomial {
    Quadratic,
    #[default]
    Quartic,
}

impl std::str::FromStr for Polynomial {
    type Err = VdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Polynomial::Quadratic),
            "quartic" => Ok(Polynomial::Quartic),
            other => Err(VdaError::arg(format!("unknown polynomial '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub polynomial: Polynomial,
}

impl SmoothingConfig {
    pub fn new(epsilon: f64, delta: f64, polynomial: Polynomial) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(VdaError::arg(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < epsilon) {
            return Err(VdaError::arg(format!(
                "delta must lie in (0, epsilon) = (0, {epsilon}), got {delta}"
            )));
        }
        Ok(SmoothingConfig {
            epsilon,
            delta,
            polynomial,
        })
    }

    /// Quartic smoothing with `δ = ε / 4`.
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, epsilon / 4.0, Polynomial::Quartic)
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.epsilon - self.delta
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.epsilon + self.delta
    }

    /// Value, first and second derivative of `p` at `s`, in one pass.
    #[inline]
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let (eps, del) = (self.epsilon, self.delta);
        if s < eps - del {
            return (0.0, 0.0, 0.0);
        }
        if s > eps + del {
            return (s - eps, 1.0, 0.0);
        }
        let u = s - eps + del;
        match self.polynomial {
            Polynomial::Quadratic => (u * u / (4.0 * del), u / (2.0 * del), 1.0 / (2.0 * del)),
            Polynomial::Quartic => {
                let d3 = del * del * del;
                let w = eps + del - s;
                (
                    u * u * u * (3.0 * del - s + eps) / (16.0 * d3),
                    u * u * (2.0 * del - s + eps) / (4.0 * d3),
                    3.0 * u * w / (4.0 * d3),
                )
            }
        }
    }
}

/// `max(‖v‖ - ε, 0)`.
pub fn exact_loss(v: &[f64], epsilon: f64) -> f64 {
    (norm(v) - epsilon).max(0.0)
}

pub fn scalar_smooth(s: f64, cfg: &SmoothingConfig) -> f64 {
    cfg.eval(s).0
}

pub fn scalar_smooth_d1(s: f64, cfg: &SmoothingConfig) -> f64 {
    cfg.eval(s).1
}

pub fn scalar_smooth_d2(s: f64, cfg: &SmoothingConfig) -> f64 {
    cfg.eval(s).2
}

/// Smoothed loss of a residual vector, `p(‖v‖)`.
pub fn vector_loss(v: &[f64], cfg: &SmoothingConfig) -> f64 {
    scalar_smooth(norm(v), cfg)
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A residual `y_i - A x_i - b` with its cached Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    r: Vec<f64>,
    norm: f64,
}

impl Residual {
    pub fn new(r: Vec<f64>) -> Self {
        let norm = norm(&r);
        Residual { r, norm }
    }

    pub fn values(&self) -> &[f64] {
        &self.r
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn set(&mut self, j: usize, value: f64) {
        self.r[j] = value;
        self.norm = norm(&self.r);
    }
}

/// First and second partial derivatives of `p(‖r‖)` with respect to the
/// intercept `b_j`.
#[inline]
pub fn partials_intercept(res: &Residual, j: usize, cfg: &SmoothingConfig) -> (f64, f64) {
    partials_raw(res.r[j], res.norm, 1.0, cfg)
}

/// First and second partial derivatives of `p(‖r‖)` with respect to the
/// slope `a_jl`, where `x_il` is the predictor value of this observation.
#[inline]
pub fn partials_slope(res: &Residual, j: usize, x_il: f64, cfg: &SmoothingConfig) -> (f64, f64) {
    partials_raw(res.r[j], res.norm, x_il, cfg)
}

/// Shared kernel: `r_j` component, `s = ‖r‖`, chain-rule factor `x`.
/// Returns `(0, 0)` in the dead zone without dividing by `s`.
#[inline]
pub(crate) fn partials_raw(r_j: f64, s: f64, x: f64, cfg: &SmoothingConfig) -> (f64, f64) {
    if s < cfg.lower() {
        return (0.0, 0.0);
    }
    let (_, d1, d2) = cfg.eval(s);
    let rx = r_j * x;
    let ratio = d1 / s;
    let d1_out = -ratio * rx;
    let d2_out = d2 * rx * rx / (s * s) + ratio * (x * x - rx * rx / (s * s));
    (d1_out, d2_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quartic(eps: f64, del: f64) -> SmoothingConfig {
        SmoothingConfig::new(eps, del, Polynomial::Quartic).unwrap()
    }

    fn quadratic(eps: f64, del: f64) -> SmoothingConfig {
        SmoothingConfig::new(eps, del, Polynomial::Quadratic).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SmoothingConfig::new(0.0, 0.1, Polynomial::Quartic).is_err());
        assert!(SmoothingConfig::new(1.0, 1.0, Polynomial::Quartic).is_err());
        assert!(SmoothingConfig::new(1.0, 0.0, Polynomial::Quartic).is_err());
        let c = SmoothingConfig::with_epsilon(0.8).unwrap();
        assert_abs_diff_eq!(c.delta, 0.2);
        assert_eq!(c.polynomial, Polynomial::Quartic);
    }

    #[test]
    fn exact_loss_examples() {
        assert_eq!(exact_loss(&[0.3, 0.4], 0.866), 0.0);
        assert_abs_diff_eq!(exact_loss(&[1.866], 0.866), 1.0, epsilon = 1e-15);
        let s3 = 3f64.sqrt();
        assert_abs_diff_eq!(exact_loss(&[s3, 0.0], 0.866), s3 - 0.866, epsilon = 1e-15);
    }

    #[test]
    fn quartic_joins() {
        let cfg = quartic(0.866, 0.2);
        let (e, d) = (cfg.epsilon, cfg.delta);
        assert_abs_diff_eq!(scalar_smooth(e - d, &cfg), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scalar_smooth(e + d, &cfg), d, epsilon = 1e-15);
        assert_abs_diff_eq!(scalar_smooth(e, &cfg), 3.0 * d / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scalar_smooth_d1(e + d, &cfg), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(scalar_smooth_d2(e + d, &cfg), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(scalar_smooth_d2(e, &cfg), 3.0 / (4.0 * d), epsilon = 1e-12);
    }

    #[test]
    fn quadratic_curvature_jumps() {
        let cfg = quadratic(1.0, 0.25);
        let up = cfg.upper();
        // left limit inside the join, right limit in the linear piece
        assert_abs_diff_eq!(scalar_smooth_d2(up, &cfg), 2.0, epsilon = 1e-15);
        assert_eq!(scalar_smooth_d2(up + 1e-12, &cfg), 0.0);
        assert_abs_diff_eq!(scalar_smooth_d1(up, &cfg), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn vector_loss_regions() {
        let cfg = quartic(0.8, 0.2);
        assert_eq!(vector_loss(&[0.3, 0.2], &cfg), 0.0);
        assert_abs_diff_eq!(vector_loss(&[1.2, 0.0], &cfg), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn dead_zone_partials_are_zero() {
        let cfg = quartic(0.8, 0.2);
        let res = Residual::new(vec![0.1, -0.2]);
        assert_eq!(partials_intercept(&res, 0, &cfg), (0.0, 0.0));
        assert_eq!(partials_slope(&res, 1, 3.0, &cfg), (0.0, 0.0));
        let zero = Residual::new(vec![0.0, 0.0]);
        assert_eq!(partials_intercept(&zero, 0, &cfg), (0.0, 0.0));
    }

    #[test]
    fn linear_region_partials() {
        let cfg = quartic(0.5, 0.1);
        let res = Residual::new(vec![3.0, 4.0]);
        let (d1, d2) = partials_intercept(&res, 0, &cfg);
        assert_abs_diff_eq!(d1, -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(d2, (1.0 - 9.0 / 25.0) / 5.0, epsilon = 1e-15);
    }

    #[test]
    fn residual_norm_tracks_updates() {
        let mut r = Residual::new(vec![3.0, 4.0]);
        assert_eq!(r.norm(), 5.0);
        r.set(1, 0.0);
        assert_eq!(r.norm(), 3.0);
        assert_eq!(r.values(), &[3.0, 0.0]);
    }
}
