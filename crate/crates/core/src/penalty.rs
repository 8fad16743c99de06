//! Lasso and Euclidean (group) penalties on the slope matrix.
//!
//! The group for predictor `l` is the column `a_l` of the `(k-1) × p` slope
//! matrix, so the Euclidean term couples the `k-1` coefficients of one
//! predictor and is invariant under rotations of the code space.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VdaError};

/// Columns with norm below this are treated as zero groups.
pub const ZERO_GROUP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda_l: f64,
    pub lambda_e: f64,
}

impl PenaltyConfig {
    pub fn new(lambda_l: f64, lambda_e: f64) -> Result<Self> {
        for (name, v) in [("lambda_L", lambda_l), ("lambda_E", lambda_e)] {
            if !(v >= 0.0) || v.is_nan() {
                return Err(VdaError::arg(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(PenaltyConfig { lambda_l, lambda_e })
    }

    pub fn is_unpenalized(&self) -> bool {
        self.lambda_l == 0.0 && self.lambda_e == 0.0
    }

    /// Penalty contribution of a single column.
    pub fn column_value(&self, col: &[f64]) -> f64 {
        let l1: f64 = col.iter().map(|a| a.abs()).sum();
        self.lambda_l * l1 + self.lambda_e * crate::loss::norm(col)
    }
}

/// `λ_L Σ|a_jl| + λ_E Σ_l ‖a_l‖` for a `(k-1) × p` slope matrix.
pub fn penalty_value(a: ArrayView2<'_, f64>, cfg: &PenaltyConfig) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| {
            let l1: f64 = c.iter().map(|x| x.abs()).sum();
            let l2 = c.dot(&c).sqrt();
            cfg.lambda_l * l1 + cfg.lambda_e * l2
        })
        .sum()
}

/// First and second partials of `λ_E ‖a_l‖` in `a_jl`. Requires a nonzero
/// column; at the zero column only directional derivatives exist.
pub fn group_partials(col: &[f64], j: usize, lambda_e: f64) -> (f64, f64) {
    let nrm = crate::loss::norm(col);
    debug_assert!(nrm > 0.0, "group_partials called on a zero column");
    let a = col[j];
    let d1 = lambda_e * a / nrm;
    let d2 = lambda_e / nrm * (1.0 - a * a / (nrm * nrm));
    (d1, d2)
}

/// Forward and backward directional derivatives of the penalized objective
/// along `a_jl`, given the loss-only partial `smooth_d1`.
///
/// `col` is the current column `a_l` (containing `a_jl`). The sum of the two
/// is nonnegative by convexity.
pub fn directional_derivatives(
    smooth_d1: f64,
    a_jl: f64,
    col: &[f64],
    cfg: &PenaltyConfig,
) -> (f64, f64) {
    let nrm = crate::loss::norm(col);
    let (e_fwd, e_bwd) = if nrm < ZERO_GROUP_TOL {
        (cfg.lambda_e, cfg.lambda_e)
    } else {
        let g = cfg.lambda_e * a_jl / nrm;
        (g, -g)
    };
    let l_fwd = if a_jl < 0.0 { -cfg.lambda_l } else { cfg.lambda_l };
    let l_bwd = if a_jl > 0.0 { -cfg.lambda_l } else { cfg.lambda_l };
    (smooth_d1 + l_fwd + e_fwd, -smooth_d1 + l_bwd + e_bwd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    #[test]
    fn rejects_negative_weights() {
        assert!(PenaltyConfig::new(-1.0, 0.0).is_err());
        assert!(PenaltyConfig::new(0.0, f64::NAN).is_err());
        assert!(PenaltyConfig::new(0.0, 0.0).unwrap().is_unpenalized());
    }

    #[test]
    fn value_examples() {
        let cfg = PenaltyConfig::new(1.0, 1.0).unwrap();
        assert_eq!(penalty_value(Array2::zeros((2, 3)).view(), &cfg), 0.0);
        let mut a = Array2::zeros((2, 3));
        a[[1, 2]] = -1.5;
        assert_abs_diff_eq!(penalty_value(a.view(), &cfg), 3.0);
        let a = array![[3.0], [4.0]];
        let cfg = PenaltyConfig::new(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(penalty_value(a.view(), &cfg), 5.0);
        assert_abs_diff_eq!(cfg.column_value(&[3.0, 4.0]), 5.0);
    }

    #[test]
    fn group_partial_examples() {
        let (d1, d2) = group_partials(&[-2.0, 0.0], 0, 0.7);
        assert_abs_diff_eq!(d1, -0.7);
        assert_abs_diff_eq!(d2, 0.0);
        let (d1, d2) = group_partials(&[3.0, 4.0], 0, 1.0);
        assert_abs_diff_eq!(d1, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(d2, 0.128, epsilon = 1e-15);
    }

    #[test]
    fn directional_examples() {
        let cfg = PenaltyConfig::new(1.0, 0.0).unwrap();
        let (f, b) = directional_derivatives(0.5, 0.0, &[0.0, 0.0], &cfg);
        assert_abs_diff_eq!(f, 1.5);
        assert_abs_diff_eq!(b, 0.5);

        let cfg = PenaltyConfig::new(1.0, 0.5).unwrap();
        let (f, _) = directional_derivatives(-2.0, 0.0, &[0.0, 0.0], &cfg);
        assert_abs_diff_eq!(f, -0.5);

        let cfg = PenaltyConfig::default();
        let (f, b) = directional_derivatives(0.3, 1.2, &[1.2, 0.4], &cfg);
        assert_abs_diff_eq!(f, 0.3);
        assert_abs_diff_eq!(b, -0.3);
    }

    #[test]
    fn nonzero_group_directional_is_smooth() {
        let cfg = PenaltyConfig::new(0.0, 2.0).unwrap();
        let col = [0.0, 1.0];
        let (f, b) = directional_derivatives(0.1, 0.0, &col, &cfg);
        assert_abs_diff_eq!(f, 0.1);
        assert_abs_diff_eq!(b, -0.1);
    }
}
