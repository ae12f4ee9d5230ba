//! Image and sinogram quality metrics.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// `20 log10(|x0| / |x - x0|)`; `+inf` when `x == x0`.
pub fn snr_db(x: &Array2<f64>, x0: &Array2<f64>) -> f64 {
    assert_eq!(x.dim(), x0.dim(), "snr_db: shape mismatch");
    let signal = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err = x
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return f64::INFINITY;
    }
    20.0 * (signal / err).log10()
}

/// PSNR with an explicit peak value.
pub fn psnr_db_with_peak(x: &Array2<f64>, x0: &Array2<f64>, peak: f64) -> f64 {
    assert_eq!(x.dim(), x0.dim(), "psnr_db: shape mismatch");
    let mse = x
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak / mse).log10()
}

/// PSNR with the peak taken as the ground-truth maximum.
pub fn psnr_db(x: &Array2<f64>, x0: &Array2<f64>) -> f64 {
    let peak = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    psnr_db_with_peak(x, x0, peak)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering with a symmetric 1D window.
fn filter_valid(img: ArrayView2<f64>, w: &[f64]) -> Array2<f64> {
    let (r, c) = img.dim();
    let k = w.len();
    let (or, oc) = (r + 1 - k, c + 1 - k);
    let mut tmp = Array2::<f64>::zeros((r, oc));
    for i in 0..r {
        for j in 0..oc {
            tmp[[i, j]] = (0..k).map(|t| w[t] * img[[i, j + t]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((or, oc));
    for i in 0..or {
        for j in 0..oc {
            out[[i, j]] = (0..k).map(|t| w[t] * tmp[[i + t, j]]).sum();
        }
    }
    out
}

/// Single-scale SSIM: 11x11 Gaussian window with sigma 1.5, `K1 = 0.01`,
/// `K2 = 0.03`, dynamic range taken from `x0`. Averaged over the valid region.
pub fn ssim(x: &Array2<f64>, x0: &Array2<f64>) -> f64 {
    assert_eq!(x.dim(), x0.dim(), "ssim: shape mismatch");
    let max = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x0.iter().copied().fold(f64::INFINITY, f64::min);
    let range = if max > min { max - min } else { 1.0 };
    ssim_with_range(x, x0, range)
}

pub fn ssim_with_range(x: &Array2<f64>, y: &Array2<f64>, range: f64) -> f64 {
    let size = 11.min(x.nrows()).min(x.ncols());
    let w = gaussian_window(size, 1.5);
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mx = filter_valid(x.view(), &w);
    let my = filter_valid(y.view(), &w);
    let xx = filter_valid((x * x).view(), &w);
    let yy = filter_valid((y * y).view(), &w);
    let xy = filter_valid((x * y).view(), &w);
    let mut acc = 0.0;
    for (((&a, &b), (&sxx, &syy)), &sxy) in mx.iter().zip(&my).zip(xx.iter().zip(&yy)).zip(&xy) {
        let vx = sxx - a * a;
        let vy = syy - b * b;
        let cov = sxy - a * b;
        acc += ((2.0 * a * b + c1) * (2.0 * cov + c2)) / ((a * a + b * b + c1) * (vx + vy + c2));
    }
    acc / mx.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub snr_db: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn compute(label: impl Into<String>, x: &Array2<f64>, x0: &Array2<f64>) -> Self {
        MetricReport {
            label: label.into(),
            snr_db: snr_db(x, x0),
            psnr_db: psnr_db(x, x0),
            ssim: ssim(x, x0),
        }
    }
}

/// Mean of each metric over several reports.
pub fn aggregate(label: impl Into<String>, reports: &[MetricReport]) -> MetricReport {
    let n = reports.len().max(1) as f64;
    MetricReport {
        label: label.into(),
        snr_db: reports.iter().map(|r| r.snr_db).sum::<f64>() / n,
        psnr_db: reports.iter().map(|r| r.psnr_db).sum::<f64>() / n,
        ssim: reports.iter().map(|r| r.ssim).sum::<f64>() / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0 + 0.5)
    }

    #[test]
    fn snr_examples() {
        let x0 = ramp(16);
        let norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut e = Array2::zeros((16, 16));
        e[[3, 4]] = norm / 10.0;
        assert!((snr_db(&(&x0 + &e), &x0) - 20.0).abs() < 1e-12);
        assert!(snr_db(&(&x0 * 2.0), &x0).abs() < 1e-12);
        assert_eq!(snr_db(&x0, &x0), f64::INFINITY);
    }

    #[test]
    fn psnr_uniform_offset() {
        let x0 = ramp(20);
        let peak = 1.5;
        let c = 0.01;
        let p = psnr_db_with_peak(&(&x0 + c), &x0, peak);
        assert!((p - 20.0 * (peak / c).log10()).abs() < 1e-9);
        // default peak is the ground-truth maximum
        let max = x0.iter().cloned().fold(0.0, f64::max);
        assert!((psnr_db(&(&x0 + c), &x0) - 20.0 * (max / c).log10()).abs() < 1e-9);
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let x0 = ramp(32);
        assert!((ssim(&x0, &x0) - 1.0).abs() < 1e-12);
        let mean = x0.mean().unwrap();
        let flipped = x0.mapv(|v| 2.0 * mean - v);
        assert!(ssim(&flipped, &x0) < 0.0);
    }

    proptest! {
        #[test]
        fn snr_scale_invariant(alpha in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], seed in 0u64..1000) {
            let x0 = Array2::from_shape_fn((8, 8), |(i, j)| ((i * 13 + j * 5 + seed as usize) % 17) as f64);
            let x = Array2::from_shape_fn((8, 8), |(i, j)| ((i * 3 + j * 11 + seed as usize) % 19) as f64);
            let a = snr_db(&x, &x0);
            let b = snr_db(&(&x * alpha), &(&x0 * alpha));
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn ssim_symmetric(seed in 0u64..1000) {
            let x0 = Array2::from_shape_fn((16, 16), |(i, j)| ((i * 13 + j * 5 + seed as usize) % 17) as f64);
            let x = Array2::from_shape_fn((16, 16), |(i, j)| ((i * 3 + j * 11 + seed as usize) % 19) as f64);
            let r = 20.0;
            prop_assert!((ssim_with_range(&x, &x0, r) - ssim_with_range(&x0, &x, r)).abs() < 1e-12);
        }
    }
}
