//! Pseudo-polar Fourier and Radon transforms.
//!
//! The pseudo-polar Fourier transform samples the 2D DTFT of an `N x N`
//! image on `2N+1` lines through the origin with equally spaced slopes:
//!
//! ```text
//! s[k, n] = sum_{u,v} f[u,v] exp(-2*pi*j/(2N+1) * (-s_n k u + k v)),  n in [-N/2, N/2-1], s_n = 2n/N
//! s[k, n] = sum_{u,v} f[u,v] exp(-2*pi*j/(2N+1) * (-k u + c_n k v)),  n in [ N/2, 3N/2],  c_n = 2(N-n)/N
//! ```
//!
//! with `k in [-N, N]`. The pseudo-polar Radon transform is the normalized
//! inverse DFT of each column of `s` (so that `F1^-1 F1 = I`). With the
//! image orientation documented in [`crate::geometry`], column `n` holds line
//! sums at angle `pp_grid_points()[n].angle`, detector offset `m * T_n`.
//!
//! [`PpTransform`] precomputes every FFT plan and chirp for one `N` and then
//! applies the forward and adjoint operators in `O(N^2 log N)`.

mod chirp;
pub mod dense;

use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_shape, Error, Result};
use crate::geometry::{Image, PpSinogram};

use chirp::{unit_phase, FracDft};

pub use dense::{
    condition_number, condition_number_probe, dense_materialize, DenseOperator, ProbeSystem,
};

/// Relative Frobenius threshold above which a Radon output is rejected as complex.
pub const IMAG_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Pseudo-polar spectrum `(2N+1) x (2N+1)`, indexed `[k + N][n + N/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PpSpectrum {
    pub data: Array2<Complex64>,
}

struct SlopePlans {
    fwd_h: FracDft,
    fwd_v: FracDft,
    adj_h: FracDft,
    adj_v: FracDft,
}

/// Precomputed fast pseudo-polar transforms for one image size.
pub struct PpTransform {
    n: usize,
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    plans: Vec<SlopePlans>,
}

fn check_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::Geometry(format!("image size must be even, got {n}")));
    }
    Ok(())
}

impl PpTransform {
    pub fn new(n: usize) -> Result<Self> {
        check_even(n)?;
        let len = 2 * n + 1;
        let half = (n / 2) as i64;
        let denom = (n * len) as i64;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        let plans = (-(n as i64)..=n as i64)
            .map(|k| SlopePlans {
                fwd_h: FracDft::new(&mut planner, k, denom, -half, n, -half, n),
                fwd_v: FracDft::new(&mut planner, k, denom, -half, n, -half, n + 1),
                adj_h: FracDft::new(&mut planner, -k, denom, -half, n, -half, n),
                adj_v: FracDft::new(&mut planner, -k, denom, -half, n + 1, -half, n),
            })
            .collect();
        Ok(PpTransform {
            n,
            len,
            fft,
            ifft,
            plans,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        check_shape((self.n, self.n), image.data.dim())
    }

    /// Length-`L` DFT of a centered sequence starting at logical index `lo`.
    /// Output is stored `[k + N]`. `inverse` flips the exponent sign (no scaling).
    fn dft_centered(
        &self,
        input: impl Iterator<Item = Complex64>,
        lo: i64,
        inverse: bool,
    ) -> Vec<Complex64> {
        let l = self.len as i64;
        let mut buf = vec![ZERO; self.len];
        for (i, x) in input.enumerate() {
            buf[(lo + i as i64).rem_euclid(l) as usize] = x;
        }
        if inverse {
            self.ifft.process(&mut buf);
        } else {
            self.fft.process(&mut buf);
        }
        let n = self.n as i64;
        (-n..=n).map(|k| buf[k.rem_euclid(l) as usize]).collect()
    }

    /// Evaluate `sum_k z[k] exp(sign * 2*pi*j*k*x/L)` at `x in [-N/2, N/2-1]` for `z` stored `[k + N]`.
    fn dft_eval(&self, z: impl Iterator<Item = Complex64>, positive: bool) -> Vec<Complex64> {
        let l = self.len as i64;
        let n = self.n as i64;
        let mut buf = vec![ZERO; self.len];
        for (i, x) in z.enumerate() {
            buf[(i as i64 - n).rem_euclid(l) as usize] = x;
        }
        if positive {
            self.ifft.process(&mut buf);
        } else {
            self.fft.process(&mut buf);
        }
        let half = n / 2;
        (-half..half)
            .map(|x| buf[x.rem_euclid(l) as usize])
            .collect()
    }

    /// Fast pseudo-polar Fourier transform.
    pub fn ppft(&self, image: &Image) -> Result<PpSpectrum> {
        self.check_image(image)?;
        let n = self.n;
        let half = (n / 2) as i64;
        let f = &image.data;

        // g_h[u][k] = sum_v f[u,v] e^{-2 pi j k v / L}
        let g_h: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|u| {
                self.dft_centered(
                    f.row(u).iter().map(|&x| Complex64::new(x, 0.0)),
                    -half,
                    false,
                )
            })
            .collect();
        // g_v[v][k] = sum_u f[u,v] e^{+2 pi j k u / L}
        let g_v: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|v| {
                self.dft_centered(
                    f.column(v).iter().map(|&x| Complex64::new(x, 0.0)),
                    -half,
                    true,
                )
            })
            .collect();

        let rows: Vec<Vec<Complex64>> = (0..self.len)
            .into_par_iter()
            .map(|ki| {
                let plans = &self.plans[ki];
                let mut work = Vec::with_capacity(plans.fwd_v.work_len());
                let mut row = vec![ZERO; self.len];
                let xh: Vec<Complex64> = g_h.iter().map(|r| r[ki]).collect();
                plans.fwd_h.apply(&xh, &mut row[..n], &mut work);
                let xv: Vec<Complex64> = g_v.iter().map(|r| r[ki]).collect();
                plans.fwd_v.apply(&xv, &mut row[n..], &mut work);
                row
            })
            .collect();

        let mut data = Array2::zeros((self.len, self.len));
        for (ki, row) in rows.into_iter().enumerate() {
            for (ni, x) in row.into_iter().enumerate() {
                data[[ki, ni]] = x;
            }
        }
        Ok(PpSpectrum { data })
    }

    /// Pseudo-polar Radon transform: columnwise normalized inverse DFT of the spectrum.
    pub fn forward(&self, image: &Image) -> Result<PpSinogram> {
        let spec = self.ppft(image)?;
        let l = self.len as i64;
        let n = self.n as i64;
        let scale = 1.0 / self.len as f64;
        let cols: Vec<(Vec<f64>, f64)> = spec
            .data
            .axis_iter(Axis(1))
            .into_par_iter()
            .map(|col| {
                let mut buf = vec![ZERO; self.len];
                for (ki, &x) in col.iter().enumerate() {
                    buf[(ki as i64 - n).rem_euclid(l) as usize] = x;
                }
                self.ifft.process(&mut buf);
                let mut imag = 0.0;
                let re = (-n..=n)
                    .map(|m| {
                        let z = buf[m.rem_euclid(l) as usize] * scale;
                        imag += z.im * z.im;
                        z.re
                    })
                    .collect();
                (re, imag)
            })
            .collect();
        let mut data = Array2::zeros((self.len, self.len));
        let mut imag = 0.0f64;
        for (ni, (col, im)) in cols.into_iter().enumerate() {
            imag += im;
            for (mi, x) in col.into_iter().enumerate() {
                data[[mi, ni]] = x;
            }
        }
        let real = data.iter().map(|x| x * x).sum::<f64>();
        if imag > 0.0 && imag.sqrt() > IMAG_TOLERANCE * real.sqrt().max(f64::MIN_POSITIVE) {
            return Err(Error::ComplexOutput(
                imag.sqrt() / real.sqrt().max(f64::MIN_POSITIVE),
            ));
        }
        Ok(PpSinogram { data })
    }

    /// Exact adjoint of [`PpTransform::forward`] under the real inner products.
    pub fn adjoint(&self, sino: &PpSinogram) -> Result<Image> {
        check_shape((self.len, self.len), sino.data.dim())?;
        let n = self.n;
        let ni = n as i64;
        let scale = 1.0 / self.len as f64;

        // P[k, col] = (1/L) sum_m p[m, col] e^{-2 pi j k m / L}, stored per column
        let cols: Vec<Vec<Complex64>> = sino
            .data
            .axis_iter(Axis(1))
            .into_par_iter()
            .map(|col| {
                let mut c = self.dft_centered(
                    col.iter().map(|&x| Complex64::new(x * scale, 0.0)),
                    -ni,
                    false,
                );
                c.shrink_to_fit();
                c
            })
            .collect();

        // z_h[k][u], z_v[k][v]
        let z: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..self.len)
            .into_par_iter()
            .map(|ki| {
                let plans = &self.plans[ki];
                let mut work = Vec::with_capacity(plans.adj_v.work_len());
                let xh: Vec<Complex64> = cols[..n].iter().map(|c| c[ki]).collect();
                let mut zh = vec![ZERO; plans.adj_h.out_len()];
                plans.adj_h.apply(&xh, &mut zh, &mut work);
                let xv: Vec<Complex64> = cols[n..].iter().map(|c| c[ki]).collect();
                debug_assert_eq!(xv.len(), plans.adj_v.in_len());
                let mut zv = vec![ZERO; plans.adj_v.out_len()];
                plans.adj_v.apply(&xv, &mut zv, &mut work);
                (zh, zv)
            })
            .collect();

        // horizontal family: f[u, v] += Re sum_k z_h[k][u] e^{+2 pi j k v / L}
        let rows_h: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|u| self.dft_eval(z.iter().map(|(zh, _)| zh[u]), true))
            .collect();
        // vertical family: f[u, v] += Re sum_k z_v[k][v] e^{-2 pi j k u / L}
        let cols_v: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|v| self.dft_eval(z.iter().map(|(_, zv)| zv[v]), false))
            .collect();

        let mut data = Array2::zeros((n, n));
        for u in 0..n {
            for v in 0..n {
                data[[u, v]] = rows_h[u][v].re + cols_v[v][u].re;
            }
        }
        Ok(Image {
            data,
            pixel_pitch: 1.0,
        })
    }
}

/// Direct `O(N^4)` evaluation of the pseudo-polar Fourier transform.
pub fn ppft_direct(image: &Image) -> Result<PpSpectrum> {
    let n = image.n();
    check_even(n)?;
    let len = 2 * n + 1;
    let half = (n / 2) as i64;
    let ni = n as i64;
    let denom = (n * len) as i128;
    let f = &image.data;
    let mut data = Array2::zeros((len, len));
    for (ki, k) in (-ni..=ni).enumerate() {
        for (col, nn) in (-half..=3 * half).enumerate() {
            let mut acc = ZERO;
            for (ui, u) in (-half..half).enumerate() {
                for (vi, v) in (-half..half).enumerate() {
                    // exponent numerator over N*L, so slopes 2n/N stay integral
                    let num: i128 = if nn < half {
                        -(-2 * nn * k * u + ni * k * v) as i128
                    } else {
                        -(-ni * k * u + 2 * (ni - nn) * k * v) as i128
                    };
                    acc += f[[ui, vi]] * unit_phase(num, denom);
                }
            }
            data[[ki, col]] = acc;
        }
    }
    Ok(PpSpectrum { data })
}

pub fn ppft_fast(image: &Image) -> Result<PpSpectrum> {
    PpTransform::new(image.n())?.ppft(image)
}

pub fn pprt_forward(image: &Image) -> Result<PpSinogram> {
    PpTransform::new(image.n())?.forward(image)
}

pub fn pprt_adjoint(sino: &PpSinogram) -> Result<Image> {
    let (r, c) = sino.data.dim();
    if r != c || r % 2 == 0 {
        return Err(Error::Shape {
            expected: (r | 1, r | 1),
            got: (r, c),
        });
    }
    PpTransform::new(sino.n())?.adjoint(sino)
}

#[cfg(test)]
mod tests;
