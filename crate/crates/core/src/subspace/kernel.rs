//! Subspace kernel `a(t, theta)`, Hamming window and the sampled kernel table.
//!
//! `a` is the inverse 2D Fourier transform of the indicator of
//!
//! ```text
//! Omega = { |w_t| < W, |w_theta| < B + R |w_t| }
//! ```
//!
//! (with the `1/(2 pi)` convention), which in closed form is
//!
//! ```text
//! a(t, theta) = 2/(pi theta) * sum_{e in {theta R + t, theta R - t}} sin(B theta + e W/2) sin(e W/2) / e
//! ```
//!
//! The product form replaces the textbook `cos(B theta) - cos(B theta + e W)`
//! and avoids cancellation for small arguments. `a` is even in `t` and in
//! `theta` separately.

use std::f64::consts::{PI, SQRT_2};

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geometry::ScanGeometry;

/// Relative distance to a singular line below which its limit is used.
pub const LINE_TOLERANCE: f64 = 1e-8;
/// `|theta|` below which the `theta = 0` limit is used.
pub const THETA_TOLERANCE: f64 = 1e-12;
/// Window extent along `theta`, in angle steps, relative to its extent along
/// `t` in detector steps.
pub const ANGULAR_STRETCH: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub object_radius: f64,
    pub max_freq: f64,
    pub intersect_b: f64,
    pub window_k: f64,
    pub detector_spacing: f64,
    pub angle_spacing: f64,
}

impl KernelSpec {
    pub fn from_geometry(geom: &ScanGeometry) -> Result<Self> {
        let spec = KernelSpec {
            object_radius: geom.object_radius,
            max_freq: geom.max_freq,
            intersect_b: geom.intersect_b,
            window_k: geom.window_k,
            detector_spacing: geom.detector_spacing,
            angle_spacing: geom.angle_spacing,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_freq > 0.0) {
            return Err(param("max_freq", "W must be positive"));
        }
        if !(self.object_radius > 0.0) {
            return Err(param("object_radius", "R must be positive"));
        }
        if !(self.intersect_b >= 1.0) {
            return Err(param("intersect_b", "B must be >= 1"));
        }
        if !(self.window_k >= 1.0) {
            return Err(param("window_k", "K must be >= 1"));
        }
        if !(self.detector_spacing > 0.0 && self.angle_spacing > 0.0) {
            return Err(param("spacing", "grid spacings must be positive"));
        }
        Ok(())
    }

    /// Window radius beyond which `w = 0`.
    pub fn window_cutoff(&self) -> f64 {
        SQRT_2 * self.window_k / 2.0
    }

    /// Largest integer offsets `(k, l)` along `t` and `theta` inside the window.
    pub fn support(&self) -> (usize, usize) {
        let c = self.window_cutoff();
        (c.floor() as usize, (c * ANGULAR_STRETCH).floor() as usize)
    }
}

/// `2 sin(B theta + e W/2) sin(e W/2) / e`, continuous at `e = 0`.
fn branch_term(e: f64, bt: f64, w: f64) -> f64 {
    let h = e * w / 2.0;
    let sinc = if h.abs() < 1e-8 {
        w / 2.0 * (1.0 - h * h / 6.0)
    } else {
        h.sin() / e
    };
    2.0 * (bt + h).sin() * sinc
}

/// Value at `t = theta = 0`: `(2W/pi)(B + RW/2)`.
fn origin_value(r: f64, w: f64, b: f64) -> f64 {
    2.0 * w / PI * (b + r * w / 2.0)
}

/// `theta = 0`, `t != 0`: `[2t sin(Wt)(B+RW) - 4R sin^2(Wt/2)] / (pi t^2)`.
fn theta_zero_value(t: f64, r: f64, w: f64, b: f64) -> f64 {
    let s = (w * t / 2.0).sin();
    (2.0 * t * (w * t).sin() * (b + r * w) - 4.0 * r * s * s) / (PI * t * t)
}

/// `t = theta R`: `[2 theta R W sin(B theta) + cos(B theta) - cos(theta(B+2RW))] / (2 pi theta^2 R)`.
fn line_value(theta: f64, r: f64, w: f64, b: f64) -> f64 {
    let cos_diff = 2.0 * (theta * (b + r * w)).sin() * (theta * r * w).sin();
    (2.0 * theta * r * w * (b * theta).sin() + cos_diff) / (2.0 * PI * theta * theta * r)
}

fn general_value(t: f64, theta: f64, r: f64, w: f64, b: f64) -> f64 {
    let bt = b * theta;
    let sum = branch_term(theta * r + t, bt, w) + branch_term(theta * r - t, bt, w);
    sum / (PI * theta)
}

/// The subspace kernel `a(t, theta)`, total on the plane.
pub fn kernel_a(t: f64, theta: f64, spec: &KernelSpec) -> f64 {
    let (r, w, b) = (spec.object_radius, spec.max_freq, spec.intersect_b);
    let (t, theta) = (t.abs(), theta.abs());
    if theta < THETA_TOLERANCE {
        if t < LINE_TOLERANCE * spec.detector_spacing {
            return origin_value(r, w, b);
        }
        return theta_zero_value(t, r, w, b);
    }
    let tr = theta * r;
    if (t - tr).abs() < LINE_TOLERANCE * spec.detector_spacing.max(tr) {
        return line_value(theta, r, w, b);
    }
    general_value(t, theta, r, w, b)
}

/// The general-case expression of [`kernel_a`] with no singular-locus
/// dispatch. Loses precision near `theta = 0` and `|t| = |theta| R`.
pub fn kernel_a_general(t: f64, theta: f64, spec: &KernelSpec) -> f64 {
    general_value(
        t.abs(),
        theta.abs(),
        spec.object_radius,
        spec.max_freq,
        spec.intersect_b,
    )
}

/// Radial window coordinate: detector steps along `t`, and angle steps
/// divided by [`ANGULAR_STRETCH`] along `theta`.
pub fn window_radius(t: f64, theta: f64, spec: &KernelSpec) -> f64 {
    let (x, y) = (
        t / spec.detector_spacing,
        theta / (ANGULAR_STRETCH * spec.angle_spacing),
    );
    (x * x + y * y).sqrt()
}

/// Hamming window `0.54 + 0.46 cos(2 pi r / (sqrt2 K))`, zero for `r > sqrt2 K / 2`.
pub fn window_w(t: f64, theta: f64, spec: &KernelSpec) -> f64 {
    let r = window_radius(t, theta, spec);
    if r > spec.window_cutoff() {
        return 0.0;
    }
    0.54 + 0.46 * (2.0 * PI * r / (SQRT_2 * spec.window_k)).cos()
}

/// Windowed kernel `q = a w` sampled on integer grid offsets and scaled so
/// that the samples sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    pub spec: KernelSpec,
    /// Largest integer offset along `t`.
    pub half_t: usize,
    /// Largest integer offset along `theta`.
    pub half_theta: usize,
    /// `values[[k + half_t, l + half_theta]] = q(kT, l Theta)`.
    pub values: Array2<f64>,
    /// Sum of the raw samples `a w` that the table was divided by.
    pub norm: f64,
}

impl KernelTable {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        let (half_t, half_theta) = spec.support();
        let (ht, ha) = (half_t as isize, half_theta as isize);
        let raw = Array2::from_shape_fn((2 * half_t + 1, 2 * half_theta + 1), |(i, j)| {
            let t = (i as isize - ht) as f64 * spec.detector_spacing;
            let th = (j as isize - ha) as f64 * spec.angle_spacing;
            kernel_a(t, th, &spec) * window_w(t, th, &spec)
        });
        let norm = raw.sum();
        if !(norm.is_finite() && norm.abs() > 0.0) {
            return Err(param("kernel", format!("kernel samples sum to {norm}")));
        }
        Ok(KernelTable {
            spec,
            half_t,
            half_theta,
            values: raw / norm,
            norm,
        })
    }

    pub fn from_geometry(geom: &ScanGeometry) -> Result<Self> {
        Self::new(KernelSpec::from_geometry(geom)?)
    }

    /// Normalized `q(t, theta)` at an arbitrary offset.
    pub fn eval(&self, t: f64, theta: f64) -> f64 {
        let w = window_w(t, theta, &self.spec);
        if w == 0.0 {
            return 0.0;
        }
        kernel_a(t, theta, &self.spec) * w / self.norm
    }

    /// Sample at integer offsets `(k, l)`, zero outside the table.
    pub fn at(&self, k: isize, l: isize) -> f64 {
        let (ht, ha) = (self.half_t as isize, self.half_theta as isize);
        if k.abs() > ht || l.abs() > ha {
            return 0.0;
        }
        self.values[[(k + ht) as usize, (l + ha) as usize]]
    }
}

/// Share of the sampled table's spectral energy inside the rasterized region
/// `|w_t| < W, |w_theta| < B + R |w_t|`, from a 256 x 256 zero-padded DFT.
pub fn spectral_confinement(geom: &ScanGeometry) -> Result<f64> {
    let tab = KernelTable::from_geometry(geom)?;
    let m = 256;
    let mut grid = Array2::<Complex64>::zeros((m, m));
    let (ht, ha) = (tab.half_t as isize, tab.half_theta as isize);
    for k in -ht..=ht {
        for l in -ha..=ha {
            grid[[
                k.rem_euclid(m as isize) as usize,
                l.rem_euclid(m as isize) as usize,
            ]]
            .re = tab.at(k, l);
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    for axis in [Axis(0), Axis(1)] {
        for mut lane in grid.lanes_mut(axis) {
            let mut buf = lane.to_vec();
            fft.process(&mut buf);
            lane.iter_mut().zip(buf).for_each(|(d, v)| *d = v);
        }
    }
    let freq = |i: usize, step: f64| {
        let k = if i <= m / 2 {
            i as f64
        } else {
            i as f64 - m as f64
        };
        (2.0 * PI * k / (m as f64 * step)).abs()
    };
    let (mut inside, mut total) = (0.0, 0.0);
    for ((i, j), v) in grid.indexed_iter() {
        let (wt, wa) = (freq(i, geom.detector_spacing), freq(j, geom.angle_spacing));
        let e = v.norm_sqr();
        total += e;
        if wt < geom.max_freq && wa < geom.intersect_b + geom.object_radius * wt {
            inside += e;
        }
    }
    Ok(inside / total)
}
