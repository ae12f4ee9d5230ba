//! Dense matrix forms of the projection operators for small `N`.
//!
//! Column `j` of a materialized operator is the operator applied to the
//! `j`-th unit image, where images are vectorized row-major over the storage
//! array (`j = (u + N/2) * N + (v + N/2)`). Outputs are vectorized the same
//! way: PP sinograms as `(m + N) * (2N+1) + (n + N/2)`, PB sinograms as
//! `(m + N/2) * A + n`.

use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{Image, PbSinogram, PpSinogram, ScanGeometry};
use crate::recon::{precondition_m, precondition_pb, Power};
use crate::simulator::project_image;

use super::PpTransform;

/// Largest `N` accepted by the dense routines.
pub const DENSE_LIMIT: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenseOperator {
    Pprt,
    PbRadon,
}

impl FromStr for DenseOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pprt" | "pp" => Ok(DenseOperator::Pprt),
            "pb_radon" | "pb" => Ok(DenseOperator::PbRadon),
            other => Err(Error::Parameter {
                name: "which",
                reason: format!("unknown operator `{other}` (expected `pprt` or `pb_radon`)"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeSystem {
    Pp,
    Pb,
}

fn guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

fn unit_image(n: usize, j: usize, pitch: f64) -> Image {
    let mut img = Image::zeros(n, pitch);
    img.data[[j / n, j % n]] = 1.0;
    img
}

fn flatten(a: &Array2<f64>) -> impl Iterator<Item = f64> + '_ {
    a.iter().copied()
}

/// Materialize `which` for the geometry's `N` (and `A` for the PB operator).
pub fn dense_materialize(geom: &ScanGeometry, which: DenseOperator) -> Result<DMatrix<f64>> {
    geom.validate()?;
    let n = geom.n_detectors;
    guard(n)?;
    let cols = n * n;
    match which {
        DenseOperator::Pprt => {
            let op = PpTransform::new(n)?;
            let rows = (2 * n + 1) * (2 * n + 1);
            let mut m = DMatrix::zeros(rows, cols);
            for j in 0..cols {
                let s = op.forward(&unit_image(n, j, geom.detector_spacing))?;
                for (i, x) in flatten(&s.data).enumerate() {
                    m[(i, j)] = x;
                }
            }
            Ok(m)
        }
        DenseOperator::PbRadon => {
            let rows = n * geom.n_angles;
            let mut m = DMatrix::zeros(rows, cols);
            for j in 0..cols {
                let s = project_image(&unit_image(n, j, geom.detector_spacing), geom)?;
                for (i, x) in flatten(&s.data).enumerate() {
                    m[(i, j)] = x;
                }
            }
            Ok(m)
        }
    }
}

/// 2-norm condition number of a symmetric positive semi-definite matrix.
/// Returns `+inf` when the matrix is numerically singular.
pub fn condition_number(normal: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(normal.clone());
    let max = eig
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let floor = max * f64::EPSILON * normal.nrows() as f64;
    if !(max > 0.0) || min <= floor {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Condition number of the (optionally preconditioned) normal operator `A^T M A`.
///
/// For the PP system `M` is the columnwise high-pass preconditioner; for the
/// PB system it is the same construction on the length-`N` detector columns.
pub fn condition_number_probe(
    geom: &ScanGeometry,
    preconditioned: bool,
    system: ProbeSystem,
) -> Result<f64> {
    let n = geom.n_detectors;
    guard(n)?;
    let a = match system {
        ProbeSystem::Pp => dense_materialize(geom, DenseOperator::Pprt)?,
        ProbeSystem::Pb => dense_materialize(geom, DenseOperator::PbRadon)?,
    };
    let ma = if preconditioned {
        let mut ma = a.clone();
        for j in 0..a.ncols() {
            let col: Vec<f64> = a.column(j).iter().copied().collect();
            let filtered: Vec<f64> = match system {
                ProbeSystem::Pp => {
                    let l = 2 * n + 1;
                    let s = PpSinogram {
                        data: Array2::from_shape_vec((l, l), col).expect("pp shape"),
                    };
                    precondition_m(&s, Power::One)?.data.into_iter().collect()
                }
                ProbeSystem::Pb => {
                    let s = PbSinogram {
                        data: Array2::from_shape_vec(geom.pb_shape(), col).expect("pb shape"),
                    };
                    precondition_pb(&s, Power::One).data.into_iter().collect()
                }
            };
            for (i, x) in filtered.into_iter().enumerate() {
                ma[(i, j)] = x;
            }
        }
        ma
    } else {
        a.clone()
    };
    let normal = a.transpose() * ma;
    // symmetrize away round-off before the eigensolve
    let normal = (&normal + normal.transpose()) * 0.5;
    Ok(condition_number(&normal))
}
