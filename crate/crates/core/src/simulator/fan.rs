//! Equiangular fan-beam acquisition and rebinning to parallel beams.
//!
//! The source at gantry angle `beta` sits at `D (-sin beta, cos beta)`. The
//! ray leaving it at fan angle `gamma` is the parallel-beam line
//! `t = D sin(gamma)`, `theta = beta + gamma`.

use std::f64::consts::TAU;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PbSinogram, ScanGeometry};

use super::projector::ray_integral;
use super::Phantom;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanGeometry {
    /// Source to rotation-center distance `D`.
    pub source_distance: f64,
    /// Number of fan detectors; fan angle `gamma_i = (i - (n-1)/2) * fan_spacing`.
    pub n_fan: usize,
    /// Angular detector pitch in radians.
    pub fan_spacing: f64,
    /// Number of gantry positions, equally spaced over `[0, 2 pi)`.
    pub n_views: usize,
}

impl FanGeometry {
    /// Fan covering the full detector row of `geom` with some margin.
    pub fn covering(
        geom: &ScanGeometry,
        source_distance: f64,
        n_fan: usize,
        n_views: usize,
    ) -> Self {
        let t_max = geom.n_detectors as f64 / 2.0 * geom.detector_spacing;
        let gamma_max = (t_max / source_distance).asin() * 1.05;
        FanGeometry {
            source_distance,
            n_fan,
            fan_spacing: 2.0 * gamma_max / (n_fan - 1) as f64,
            n_views,
        }
    }

    pub fn gamma(&self, i: usize) -> f64 {
        (i as f64 - (self.n_fan as f64 - 1.0) / 2.0) * self.fan_spacing
    }

    pub fn beta(&self, j: usize) -> f64 {
        j as f64 * TAU / self.n_views as f64
    }

    pub fn max_gamma(&self) -> f64 {
        (self.n_fan as f64 - 1.0) / 2.0 * self.fan_spacing
    }
}

/// Parallel-beam coordinates `(t, theta)` of the fan ray `(gamma, beta)`.
pub fn fan_to_parallel(fan: &FanGeometry, gamma: f64, beta: f64) -> (f64, f64) {
    (fan.source_distance * gamma.sin(), beta + gamma)
}

/// Fan-beam sinogram, indexed `[detector i][view j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FanSinogram {
    pub data: Array2<f64>,
}

pub fn project_fan(ph: &Phantom, fan: &FanGeometry) -> Result<FanSinogram> {
    if fan.n_fan < 2 || fan.n_views < 2 || !(fan.source_distance > 0.0) {
        return Err(Error::FanCoverage("degenerate fan geometry".into()));
    }
    let half_width = ph.n() as f64 / 2.0 * ph.image.pixel_pitch;
    if fan.source_distance <= half_width * std::f64::consts::SQRT_2 {
        return Err(Error::FanCoverage("source inside the image field".into()));
    }
    let mut data = Array2::zeros((fan.n_fan, fan.n_views));
    data.axis_iter_mut(Axis(1))
        .into_par_iter()
        .enumerate()
        .for_each(|(j, mut col)| {
            let beta = fan.beta(j);
            let mut buf = Vec::new();
            for (i, p) in col.iter_mut().enumerate() {
                let (t, theta) = fan_to_parallel(fan, fan.gamma(i), beta);
                *p = ray_integral(&ph.image, t, theta, &mut buf);
            }
        });
    Ok(FanSinogram { data })
}

/// Resample a fan-beam sinogram onto the parallel-beam grid of `geom` by
/// bilinear interpolation in `(gamma, beta)`; `beta` wraps around `2 pi`.
pub fn rebin_fan_to_pb(
    fan_sino: &FanSinogram,
    fan: &FanGeometry,
    geom: &ScanGeometry,
) -> Result<PbSinogram> {
    geom.validate()?;
    if fan_sino.data.dim() != (fan.n_fan, fan.n_views) {
        return Err(Error::Shape {
            expected: (fan.n_fan, fan.n_views),
            got: fan_sino.data.dim(),
        });
    }
    let (nd, na) = geom.pb_shape();
    let half = (nd / 2) as f64;
    let t_max = half * geom.detector_spacing;
    if t_max >= fan.source_distance {
        return Err(Error::FanCoverage(
            "detector row wider than the source distance".into(),
        ));
    }
    let need = (t_max / fan.source_distance).asin();
    if need > fan.max_gamma() + 1e-12 {
        return Err(Error::FanCoverage(format!(
            "fan half-angle {:.4} rad is below the required {:.4} rad",
            fan.max_gamma(),
            need
        )));
    }

    let f = &fan_sino.data;
    let dbeta = TAU / fan.n_views as f64;
    let g0 = fan.gamma(0);
    let mut data = Array2::zeros((nd, na));
    data.axis_iter_mut(Axis(1))
        .into_par_iter()
        .enumerate()
        .for_each(|(n, mut col)| {
            let theta = n as f64 * geom.angle_spacing;
            for (i, p) in col.iter_mut().enumerate() {
                let t = (i as f64 - half) * geom.detector_spacing;
                let gamma = (t / fan.source_distance).asin();
                let beta = (theta - gamma).rem_euclid(TAU);

                let gi = ((gamma - g0) / fan.fan_spacing).clamp(0.0, (fan.n_fan - 1) as f64);
                let i0 = (gi.floor() as usize).min(fan.n_fan - 2);
                let wg = gi - i0 as f64;

                let bj = beta / dbeta;
                let j0 = bj.floor() as usize % fan.n_views;
                let j1 = (j0 + 1) % fan.n_views;
                let wb = bj - bj.floor();

                *p = (1.0 - wg) * ((1.0 - wb) * f[[i0, j0]] + wb * f[[i0, j1]])
                    + wg * ((1.0 - wb) * f[[i0 + 1, j0]] + wb * f[[i0 + 1, j1]]);
            }
        });
    Ok(PbSinogram { data })
}
