//! Regular simplex class coding.
//!
//! Class `j` (0-based) is represented by the vertex `v_j` of a regular simplex
//! inscribed in the unit sphere of `R^(k-1)`. The first vertex is
//! `(k-1)^(-1/2) * 1`; the remaining ones are `c * 1 + d * e_(j-1)` with
//! `c = -(1 + sqrt(k)) / (k-1)^(3/2)` and `d = sqrt(k / (k-1))`.

use ndarray::{Array2, ArrayView1};

use crate::error::{Result, VdaError};

const TIE_TOL: f64 = 1e-12;

/// The `k` vertices of a regular simplex in `R^(k-1)`, stored one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCode {
    k: usize,
    vertices: Array2<f64>,
}

impl SimplexCode {
    pub fn new(k: usize) -> Result<Self> {
        build_simplex(k)
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension of the code space, `k - 1`.
    pub fn dim(&self) -> usize {
        self.k - 1
    }

    /// `k × (k-1)` matrix whose rows are the vertices.
    pub fn vertices(&self) -> &Array2<f64> {
        &self.vertices
    }

    pub fn vertex(&self, class: usize) -> ArrayView1<'_, f64> {
        self.vertices.row(class)
    }

    /// Returns a code whose vertices are `vertices` rows; used for rotated or
    /// permuted codes in equivariance checks.
    pub fn from_vertices(vertices: Array2<f64>) -> Result<Self> {
        let k = vertices.nrows();
        if k < 2 || vertices.ncols() != k - 1 {
            return Err(VdaError::arg(format!(
                "expected k x (k-1) vertex matrix with k >= 2, got {}x{}",
                vertices.nrows(),
                vertices.ncols()
            )));
        }
        Ok(SimplexCode { k, vertices })
    }

    /// Nearest vertex to `point`, ties resolved toward the lowest class index.
    pub fn classify(&self, point: ArrayView1<'_, f64>) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(VdaError::arg(format!(
                "point has dimension {}, code space has dimension {}",
                point.len(),
                self.dim()
            )));
        }
        let owned;
        let point = match point.as_slice() {
            Some(s) => s,
            None => {
                owned = point.to_vec();
                &owned
            }
        };
        Ok(self.nearest(point))
    }

    /// Unchecked nearest-vertex search over a slice of length `k - 1`.
    /// Squared distances within `TIE_TOL` of each other count as tied.
    pub(crate) fn nearest(&self, point: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, v) in self.vertices.rows().into_iter().enumerate() {
            let d: f64 = v.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d - TIE_TOL {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// Pairwise distance between any two distinct vertices, `sqrt(2k/(k-1))`.
    pub fn edge_length(&self) -> f64 {
        edge_length(self.k)
    }
}

fn edge_length(k: usize) -> f64 {
    let k = k as f64;
    (2.0 * k / (k - 1.0)).sqrt()
}

pub fn build_simplex(k: usize) -> Result<SimplexCode> {
    if k < 2 {
        return Err(VdaError::arg(format!("simplex needs k >= 2, got {k}")));
    }
    let m = k - 1;
    let kf = k as f64;
    let mf = m as f64;
    let c = -(1.0 + kf.sqrt()) / mf.powf(1.5);
    let d = (kf / mf).sqrt();
    let mut vertices = Array2::<f64>::from_elem((k, m), c);
    vertices.row_mut(0).fill(mf.sqrt().recip());
    for j in 1..k {
        vertices[[j, j - 1]] += d;
    }
    Ok(SimplexCode { k, vertices })
}

/// Largest dead-zone radius for which the balls around the vertices do not
/// overlap: half the edge length.
pub fn default_epsilon(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(VdaError::arg(format!("epsilon needs k >= 2, got {k}")));
    }
    Ok(0.5 * edge_length(k))
}

/// Euclidean distance between a vertex and an arbitrary point.
pub(crate) fn distance(v: ArrayView1<'_, f64>, z: &[f64]) -> f64 {
    v.iter()
        .zip(z)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
