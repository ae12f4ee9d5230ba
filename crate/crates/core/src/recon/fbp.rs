//! Filtered backprojection baselines.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::geometry::{Image, PbSinogram, ScanGeometry};

use super::tv::tv_prox;

/// Spatial Ram-Lak kernel at integer offset `k` for detector pitch `t`.
fn ram_lak(k: i64, t: f64) -> f64 {
    if k == 0 {
        1.0 / (4.0 * t * t)
    } else if k % 2 == 0 {
        0.0
    } else {
        -1.0 / (PI * PI * (k * k) as f64 * t * t)
    }
}

/// Convolve every projection with the Ram-Lak kernel (linear, zero padded).
pub fn ramp_filter(p: &PbSinogram, detector_spacing: f64) -> Array2<f64> {
    let (nd, na) = p.data.dim();
    let len = (2 * nd).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);
    let mut kernel = vec![Complex64::new(0.0, 0.0); len];
    for k in -(nd as i64 - 1)..(nd as i64) {
        kernel[k.rem_euclid(len as i64) as usize] =
            Complex64::new(ram_lak(k, detector_spacing) * detector_spacing, 0.0);
    }
    fft.process(&mut kernel);
    let scale = 1.0 / len as f64;

    let cols: Vec<Vec<f64>> = (0..na)
        .into_par_iter()
        .map(|j| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for (b, &x) in buf.iter_mut().zip(p.data.column(j).iter()) {
                *b = Complex64::new(x, 0.0);
            }
            fft.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kernel) {
                *b *= k * scale;
            }
            ifft.process(&mut buf);
            buf[..nd].iter().map(|z| z.re).collect()
        })
        .collect();
    let mut out = Array2::zeros((nd, na));
    for (j, col) in cols.into_iter().enumerate() {
        out.column_mut(j).assign(&ndarray::Array1::from(col));
    }
    out
}

/// Ram-Lak filtered backprojection with linear interpolation along the detector.
pub fn fbp_baseline(p: &PbSinogram, geom: &ScanGeometry) -> Result<Image> {
    geom.validate()?;
    p.check(geom)?;
    let n = geom.n_detectors;
    let t = geom.detector_spacing;
    let filtered = ramp_filter(p, t);
    let half = (n / 2) as f64;
    let trig: Vec<(f64, f64)> = (0..geom.n_angles)
        .map(|j| (j as f64 * geom.angle_spacing).sin_cos())
        .collect();
    let weight = PI / geom.n_angles as f64;

    let mut data = Array2::zeros((n, n));
    data.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(r, mut row)| {
            let y = -(r as f64 - half) * t;
            for (c, px) in row.iter_mut().enumerate() {
                let x = (c as f64 - half) * t;
                let mut acc = 0.0;
                for (j, &(s, co)) in trig.iter().enumerate() {
                    let pos = (x * co + y * s) / t + half;
                    let i0 = pos.floor();
                    let w = pos - i0;
                    let i0 = i0 as isize;
                    let at = |i: isize| {
                        if i >= 0 && (i as usize) < n {
                            filtered[[i as usize, j]]
                        } else {
                            0.0
                        }
                    };
                    acc += (1.0 - w) * at(i0) + w * at(i0 + 1);
                }
                *px = acc * weight;
            }
        });
    Ok(Image {
        data,
        pixel_pitch: t,
    })
}

/// FBP followed by a TV-prox denoising pass of the given weight.
pub fn fbp_tv_baseline(
    p: &PbSinogram,
    geom: &ScanGeometry,
    tv_weight: f64,
    inner_iters: usize,
) -> Result<Image> {
    let img = fbp_baseline(p, geom)?;
    let data = tv_prox(&img.data, tv_weight, inner_iters)?;
    Ok(Image {
        data,
        pixel_pitch: img.pixel_pitch,
    })
}
