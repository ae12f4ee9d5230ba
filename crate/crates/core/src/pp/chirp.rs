//! Fractional-spacing DFT by chirp convolution.
//!
//! Evaluates `y[o] = sum_i x[i] exp(j * alpha * o * i)` for consecutive integer
//! input indices `i` and output indices `o`, where
//! `alpha = 2*pi * 2*rate / denom` is a rational multiple of `2*pi`. Writing
//! `o*i = (o^2 + i^2 - (o-i)^2) / 2` turns the sum into a linear convolution
//! with a chirp, evaluated with one forward and one inverse FFT.
//!
//! All chirp phases are reduced modulo `denom` in integer arithmetic before the
//! conversion to radians, so large indices do not lose phase accuracy.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// `exp(j * 2*pi * num / denom)` with `num` reduced exactly.
pub(crate) fn unit_phase(num: i128, denom: i128) -> Complex64 {
    let r = num.rem_euclid(denom);
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / denom as f64)
}

pub(crate) struct FracDft {
    in_lo: i64,
    in_len: usize,
    out_len: usize,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel_spectrum: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl FracDft {
    /// Plan for `alpha = 2*pi * 2*rate/denom`, inputs `in_lo..in_lo+in_len`,
    /// outputs `out_lo..out_lo+out_len`.
    pub(crate) fn new(
        planner: &mut FftPlanner<f64>,
        rate: i64,
        denom: i64,
        in_lo: i64,
        in_len: usize,
        out_lo: i64,
        out_len: usize,
    ) -> Self {
        let (rate, denom) = (rate as i128, denom as i128);
        // alpha * x^2 / 2 = 2*pi * rate * x^2 / denom
        let half_chirp = |x: i64| unit_phase(rate * (x as i128) * (x as i128), denom);

        let pre: Vec<_> = (0..in_len as i64).map(|i| half_chirp(in_lo + i)).collect();
        let post: Vec<_> = (0..out_len as i64)
            .map(|o| half_chirp(out_lo + o))
            .collect();

        let span = in_len + out_len - 1;
        let len = next_pow2(span);
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);

        // h[d] = exp(-j alpha d^2 / 2) for d = o - i, stored from the smallest lag
        let d_min = out_lo - (in_lo + in_len as i64 - 1);
        let mut kernel_spectrum = vec![Complex64::new(0.0, 0.0); len];
        for (j, slot) in kernel_spectrum.iter_mut().take(span).enumerate() {
            *slot = half_chirp(d_min + j as i64).conj();
        }
        fft.process(&mut kernel_spectrum);
        let scale = 1.0 / len as f64;
        for c in kernel_spectrum.iter_mut() {
            *c *= scale;
        }

        FracDft {
            in_lo,
            in_len,
            out_len,
            pre,
            post,
            kernel_spectrum,
            fft,
            ifft,
        }
    }

    pub(crate) fn in_len(&self) -> usize {
        self.in_len
    }

    pub(crate) fn out_len(&self) -> usize {
        self.out_len
    }

    #[allow(dead_code)]
    pub(crate) fn in_lo(&self) -> i64 {
        self.in_lo
    }

    /// Scratch length required by [`FracDft::apply`].
    pub(crate) fn work_len(&self) -> usize {
        self.kernel_spectrum.len()
    }

    pub(crate) fn apply(
        &self,
        input: &[Complex64],
        output: &mut [Complex64],
        work: &mut Vec<Complex64>,
    ) {
        debug_assert_eq!(input.len(), self.in_len);
        debug_assert_eq!(output.len(), self.out_len);
        work.clear();
        work.resize(self.work_len(), Complex64::new(0.0, 0.0));
        for ((w, x), c) in work.iter_mut().zip(input).zip(&self.pre) {
            *w = x * c;
        }
        self.fft.process(work);
        for (w, h) in work.iter_mut().zip(&self.kernel_spectrum) {
            *w *= h;
        }
        self.ifft.process(work);
        let offset = self.in_len - 1;
        for (o, (y, c)) in output.iter_mut().zip(&self.post).enumerate() {
            *y = work[o + offset] * c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(
        x: &[Complex64],
        rate: i64,
        denom: i64,
        in_lo: i64,
        out_lo: i64,
        out_len: usize,
    ) -> Vec<Complex64> {
        (0..out_len as i64)
            .map(|o| {
                let o = out_lo + o;
                x.iter()
                    .enumerate()
                    .map(|(i, xi)| {
                        let i = in_lo + i as i64;
                        let ang = 2.0 * PI * 2.0 * rate as f64 * (o * i) as f64 / denom as f64;
                        xi * Complex64::from_polar(1.0, ang)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        let mut planner = FftPlanner::new();
        let cases = [
            (3i64, 8 * 17, -4i64, 8usize, -4i64, 8usize),
            (-5, 16 * 33, -8, 16, 0, 17),
            (0, 40, -2, 4, -2, 5),
            (7, 12 * 25, -6, 12, -6, 13),
        ];
        for &(rate, denom, in_lo, in_len, out_lo, out_len) in &cases {
            let plan = FracDft::new(&mut planner, rate, denom, in_lo, in_len, out_lo, out_len);
            let x: Vec<Complex64> = (0..in_len)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let mut y = vec![Complex64::new(0.0, 0.0); out_len];
            let mut work = Vec::new();
            plan.apply(&x, &mut y, &mut work);
            let want = brute(&x, rate, denom, in_lo, out_lo, out_len);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).norm() < 1e-11, "{a} vs {b}");
            }
        }
    }
}
