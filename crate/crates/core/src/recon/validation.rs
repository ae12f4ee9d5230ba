//! Numerical check that the optimal pseudo-polar preconditioner is close to a
//! columnwise filter.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::ScanGeometry;
use crate::pp::{dense_materialize, DenseOperator};

/// Largest `N` for which the dense `(2N+1)^2` inverse is formed.
pub const VALIDATION_LIMIT: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreconditionerReport {
    pub n: usize,
    pub epsilon: f64,
    /// Share of the Frobenius energy of `F1 M0 F1^-1` on its main diagonal.
    pub diag_energy_fraction: f64,
    /// Correlation of the diagonal with itself shifted by `2N+1`.
    pub periodicity_score: f64,
    /// The diagonal, ordered column by column of the sinogram.
    pub diagonal: Vec<f64>,
}

/// Unitary DFT along the detector axis of every sinogram column, applied to a
/// vector in row-major sinogram order.
fn f1_apply(v: &mut [Complex64], l: usize, fft: &dyn rustfft::Fft<f64>) {
    let scale = 1.0 / (l as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for col in 0..l {
        for m in 0..l {
            buf[m] = v[m * l + col];
        }
        fft.process(&mut buf);
        for m in 0..l {
            v[m * l + col] = buf[m] * scale;
        }
    }
}

/// Form `M0 = (R R^T + eps I)^-1` for the dense pseudo-polar Radon matrix,
/// conjugate it with the columnwise DFT and measure how diagonal it is.
pub fn preconditioner_validation(n: usize, epsilon: f64) -> Result<PreconditionerReport> {
    if n > VALIDATION_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: VALIDATION_LIMIT,
        });
    }
    if !(epsilon > 0.0) {
        return Err(param("epsilon", "must be positive"));
    }
    let geom = ScanGeometry::new(n, 1);
    let r = dense_materialize(&geom, DenseOperator::Pprt)?;
    let l = 2 * n + 1;
    let dim = l * l;
    let mut gram = &r * r.transpose();
    for i in 0..dim {
        gram[(i, i)] += epsilon;
    }
    let m0 = gram
        .cholesky()
        .ok_or_else(|| Error::Format("regularized Gram matrix is not positive definite".into()))?
        .inverse();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(l);
    // X = F M0, column by column
    let mut x = DMatrix::<Complex64>::zeros(dim, dim);
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..dim {
        for (i, z) in v.iter_mut().enumerate() {
            *z = Complex64::new(m0[(i, j)], 0.0);
        }
        f1_apply(&mut v, l, fft.as_ref());
        for (i, z) in v.iter().enumerate() {
            x[(i, j)] = *z;
        }
    }
    // M1 = X F^H = (F X^H)^H
    let mut m1 = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for (j, z) in v.iter_mut().enumerate() {
            *z = x[(i, j)].conj();
        }
        f1_apply(&mut v, l, fft.as_ref());
        for (j, z) in v.iter().enumerate() {
            m1[(i, j)] = z.conj();
        }
    }

    let total: f64 = m1.iter().map(|z| z.norm_sqr()).sum();
    let diag_energy: f64 = (0..dim).map(|i| m1[(i, i)].norm_sqr()).sum();

    // storage index is k * L + col; reorder to col * L + k
    let diagonal: Vec<f64> = (0..l)
        .flat_map(|col| (0..l).map(move |k| (k, col)))
        .map(|(k, col)| m1[(k * l + col, k * l + col)].re)
        .collect();

    Ok(PreconditionerReport {
        n,
        epsilon,
        diag_energy_fraction: diag_energy / total,
        periodicity_score: lag_correlation(&diagonal, l),
        diagonal,
    })
}

/// Pearson correlation between `x[..len-lag]` and `x[lag..]`.
pub fn lag_correlation(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let a = DVector::from_column_slice(&x[..x.len() - lag]);
    let b = DVector::from_column_slice(&x[lag..]);
    let (ma, mb) = (a.mean(), b.mean());
    let a = a.add_scalar(-ma);
    let b = b.add_scalar(-mb);
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        // constant sequences repeat trivially
        return 1.0;
    }
    a.dot(&b) / denom
}
