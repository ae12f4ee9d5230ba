//! Sinogram-domain convolution and deconvolution with the kernel table.

use ndarray::{s, Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geometry::{CoefficientGrid, PbSinogram, ScanGeometry};

use super::kernel::KernelTable;

/// How the sinogram is continued past `theta = 0` and `theta = pi`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaBoundary {
    /// `p(t, theta + pi) = p(-t, theta)`: the sinogram is `2 pi`-periodic
    /// after a detector flip, and filtering is circular along `theta`.
    #[default]
    Periodic,
    /// Zeros outside `[0, pi)`.
    Zero,
}

/// Detector-flipped copy used for `theta in [pi, 2pi)`. Row `-N/2` mirrors
/// to `+N/2`, one past the last detector, and takes the edge row instead.
pub(crate) fn flipped(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::zeros(x.dim());
    for i in 0..n {
        out.row_mut(i).assign(&x.row((n - i).min(n - 1)));
    }
    out
}

fn fft2(data: &mut Array2<Complex64>, planner: &mut FftPlanner<f64>, inverse: bool) {
    let (r, c) = data.dim();
    let row_fft = if inverse {
        planner.plan_fft_inverse(c)
    } else {
        planner.plan_fft_forward(c)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(r)
    } else {
        planner.plan_fft_forward(r)
    };
    data.axis_iter_mut(Axis(0))
        .into_par_iter()
        .for_each(|mut row| {
            let mut buf: Vec<Complex64> = row.to_vec();
            row_fft.process(&mut buf);
            row.iter_mut().zip(buf).for_each(|(d, v)| *d = v);
        });
    data.axis_iter_mut(Axis(1))
        .into_par_iter()
        .for_each(|mut col| {
            let mut buf: Vec<Complex64> = col.to_vec();
            col_fft.process(&mut buf);
            col.iter_mut().zip(buf).for_each(|(d, v)| *d = v);
        });
}

/// Multiply the 2D spectrum of `x` by `gain(Q)`, where `Q` is the (real)
/// transfer function of the kernel table, and return the same-size result.
///
/// The detector axis is padded by repeating the edge detectors, so a
/// constant sinogram stays constant. Along `theta` the input is either
/// extended to its `2 pi` period or zero padded.
fn spectral_filter(
    x: &Array2<f64>,
    table: &KernelTable,
    boundary: ThetaBoundary,
    gain: impl Fn(f64) -> f64 + Sync,
) -> Array2<f64> {
    let (n, a) = x.dim();
    let (ht, ha) = (table.half_t as isize, table.half_theta as isize);
    let rows = n + 2 * table.half_t + 1;
    let cols = match boundary {
        ThetaBoundary::Periodic => 2 * a,
        ThetaBoundary::Zero => a + 2 * table.half_theta + 1,
    };

    let mut sig = Array2::<Complex64>::zeros((rows, cols));
    sig.slice_mut(s![..n, ..a])
        .assign(&x.mapv(|v| Complex64::new(v, 0.0)));
    if boundary == ThetaBoundary::Periodic {
        sig.slice_mut(s![..n, a..])
            .assign(&flipped(x).mapv(|v| Complex64::new(v, 0.0)));
    }
    // detector padding repeats the edge rows: the first half continues the
    // last detector, the second half (wrapping to row 0) the first one
    let split = n + (rows - n) / 2;
    for i in n..rows {
        let src = if i < split { n - 1 } else { 0 };
        let row = sig.row(src).to_owned();
        sig.row_mut(i).assign(&row);
    }

    let mut ker = Array2::<Complex64>::zeros((rows, cols));
    for k in -ht..=ht {
        for l in -ha..=ha {
            let (i, j) = (
                k.rem_euclid(rows as isize) as usize,
                l.rem_euclid(cols as isize) as usize,
            );
            ker[[i, j]].re += table.at(k, l);
        }
    }

    let mut planner = FftPlanner::new();
    fft2(&mut sig, &mut planner, false);
    fft2(&mut ker, &mut planner, false);
    // the table is point symmetric, so its transform is real
    sig.zip_mut_with(&ker, |s, q| *s *= gain(q.re));
    fft2(&mut sig, &mut planner, true);
    let scale = 1.0 / (rows * cols) as f64;
    sig.slice(s![..n, ..a]).mapv(|z| z.re * scale)
}

/// Project a sinogram onto the windowed subspace by convolving with `q`.
pub fn denoise(p: &PbSinogram, geom: &ScanGeometry) -> Result<PbSinogram> {
    denoise_with(p, geom, ThetaBoundary::default())
}

pub fn denoise_with(
    p: &PbSinogram,
    geom: &ScanGeometry,
    boundary: ThetaBoundary,
) -> Result<PbSinogram> {
    geom.validate()?;
    p.check(geom)?;
    let table = KernelTable::from_geometry(geom)?;
    Ok(PbSinogram {
        data: convolve_table(&p.data, &table, boundary),
    })
}

/// Same-size convolution of a sinogram-shaped array with an arbitrary table.
pub fn convolve_table(
    x: &Array2<f64>,
    table: &KernelTable,
    boundary: ThetaBoundary,
) -> Array2<f64> {
    spectral_filter(x, table, boundary, |q| q)
}

/// Tikhonov deconvolution of a sinogram-shaped array by an arbitrary table.
pub fn deconvolve_table(
    x: &Array2<f64>,
    table: &KernelTable,
    rho: f64,
    boundary: ThetaBoundary,
) -> Result<Array2<f64>> {
    if !(rho > 0.0) {
        return Err(param("ls_rho", "rho must be positive"));
    }
    let rho2 = rho * rho;
    Ok(spectral_filter(x, table, boundary, |q| q / (q * q + rho2)))
}

/// Tikhonov-regularized deconvolution `b = F^-1{ Q P / (Q^2 + rho^2) }`.
pub fn recover_coefficients(p: &PbSinogram, geom: &ScanGeometry) -> Result<CoefficientGrid> {
    recover_coefficients_with(p, geom, ThetaBoundary::default())
}

pub fn recover_coefficients_with(
    p: &PbSinogram,
    geom: &ScanGeometry,
    boundary: ThetaBoundary,
) -> Result<CoefficientGrid> {
    geom.validate()?;
    p.check(geom)?;
    let table = KernelTable::from_geometry(geom)?;
    Ok(CoefficientGrid {
        data: deconvolve_table(&p.data, &table, geom.ls_rho, boundary)?,
    })
}
