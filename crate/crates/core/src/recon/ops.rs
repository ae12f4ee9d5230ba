//! Element-wise operators acting on sinograms: the columnwise high-pass
//! preconditioner, statistical weights and binary decimation.

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{check_shape, Result};
use crate::geometry::{PbSinogram, PpSinogram};
use crate::simulator::RawCounts;

/// Exponent applied to an element-wise multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Power {
    One,
    Half,
}

impl Power {
    fn apply(self, x: f64) -> f64 {
        match self {
            Power::One => x,
            Power::Half => x.sqrt(),
        }
    }
}

/// Preconditioner multiplier for frequency `k` of a length-`len` column.
pub fn precondition_multiplier(k: i64, len: usize) -> f64 {
    let l = len as f64;
    if k == 0 {
        1.0 / (6.0 * l)
    } else {
        (k as f64 / l).abs()
    }
}

/// Multiply the DFT of every column by `c(k)^power`, where `k` is the signed frequency.
fn filter_columns(data: &Array2<f64>, power: Power) -> Array2<f64> {
    let len = data.nrows();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);
    let gain: Vec<f64> = (0..len)
        .map(|i| {
            let k = if i <= len / 2 {
                i as i64
            } else {
                i as i64 - len as i64
            };
            power.apply(precondition_multiplier(k, len)) / len as f64
        })
        .collect();
    let mut out = Array2::zeros(data.dim());
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (src, mut dst) in data.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        for (b, &x) in buf.iter_mut().zip(src.iter()) {
            *b = Complex64::new(x, 0.0);
        }
        fft.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(&gain) {
            *b *= g;
        }
        ifft.process(&mut buf);
        for (d, b) in dst.iter_mut().zip(&buf) {
            *d = b.re;
        }
    }
    out
}

/// Columnwise high-pass filter `F1^-1 c F1` on a pseudo-polar sinogram, with
/// `c_0 = 1/(6(2N+1))` and `c_m = |m|/(2N+1)` otherwise.
pub fn precondition_m(p: &PpSinogram, power: Power) -> Result<PpSinogram> {
    let (r, c) = p.data.dim();
    if r != c || r % 2 == 0 {
        check_shape((r | 1, r | 1), (r, c))?;
    }
    Ok(PpSinogram {
        data: filter_columns(&p.data, power),
    })
}

/// The same columnwise filter on a parallel-beam sinogram (column length `N`).
pub fn precondition_pb(p: &PbSinogram, power: Power) -> PbSinogram {
    PbSinogram {
        data: filter_columns(&p.data, power),
    }
}

/// Statistical weight `(r - eps)^2 / r`; zero for starved entries (`r <= eps`).
pub fn weight_from_counts(r: f64, eps: f64) -> f64 {
    if r <= eps || r <= 0.0 {
        0.0
    } else {
        (r - eps) * (r - eps) / r
    }
}

/// Multiplier field of the weighting operator for measured counts.
pub fn weights_w(raw: &RawCounts, power: Power) -> Array2<f64> {
    let mut w = Array2::zeros(raw.counts.dim());
    for ((i, j), x) in w.indexed_iter_mut() {
        *x = power.apply(weight_from_counts(raw.counts[[i, j]] as f64, raw.bias[i]));
    }
    w
}

/// Zero every entry outside the mask. Binary, so it is its own square root.
pub fn decimate_d(p: &Array2<f64>, mask: &Array2<bool>) -> Result<Array2<f64>> {
    check_shape(p.dim(), mask.dim())?;
    let mut out = p.clone();
    Zip::from(&mut out).and(mask).for_each(|x, &keep| {
        if !keep {
            *x = 0.0;
        }
    });
    Ok(out)
}
