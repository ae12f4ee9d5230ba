//! Scan geometry, grid definitions and the array types shared by every stage.
//!
//! All arrays are stored with centered logical indices shifted to zero-based
//! storage offsets:
//!
//! | array          | shape            | logical index           | storage offset  |
//! |----------------|------------------|-------------------------|-----------------|
//! | [`Image`]      | `N x N`          | `u, v in [-N/2, N/2-1]` | `u + N/2`       |
//! | [`PbSinogram`] | `N x A`          | `m in [-N/2, N/2-1]`    | `m + N/2`       |
//! |                |                  | `n in [0, A-1]`         | `n`             |
//! | [`PpSinogram`] | `(2N+1)^2`       | `m in [-N, N]`          | `m + N`         |
//! |                |                  | `n in [-N/2, 3N/2]`     | `n + N/2`       |
//!
//! Image row `u` runs along `-y` and column `v` along `+x`, so pixel `(u, v)`
//! sits at `(x, y) = (vT, -uT)`. A ray at angle `theta` and offset `t` is the
//! line `x cos(theta) + y sin(theta) = t`.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};

/// A per-detector quantity given either as one value for all detectors or one value each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerDetector {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerDetector {
    /// Value for detector storage row `row`.
    pub fn at(&self, row: usize) -> f64 {
        match self {
            PerDetector::Scalar(v) => *v,
            PerDetector::Vector(v) => v[row],
        }
    }

    pub fn len_ok(&self, n: usize) -> bool {
        match self {
            PerDetector::Scalar(_) => true,
            PerDetector::Vector(v) => v.len() == n,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            PerDetector::Scalar(v) => vec![*v],
            PerDetector::Vector(v) => v.clone(),
        }
    }
}

/// Every scalar parameter of a parallel-beam scan and of the reconstruction pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGeometry {
    pub n_detectors: usize,
    pub n_angles: usize,
    pub detector_spacing: f64,
    pub angle_spacing: f64,
    pub object_radius: f64,
    pub max_freq: f64,
    pub intersect_b: f64,
    pub window_k: f64,
    pub ls_rho: f64,
    pub tv_lambda: f64,
    pub photons: PerDetector,
    pub detector_bias: PerDetector,
}

impl ScanGeometry {
    /// Default geometry for `n` detectors and `n_angles` views over `[0, pi)`.
    ///
    /// The image spans `[-1, 1)` along each axis (`T = 2/N`), the detector row
    /// spans the same width, and the object support radius is 0.95.
    pub fn new(n: usize, n_angles: usize) -> Self {
        let t = 2.0 / n as f64;
        let mut g = ScanGeometry {
            n_detectors: n,
            n_angles,
            detector_spacing: t,
            angle_spacing: PI / n_angles as f64,
            object_radius: 0.95,
            max_freq: 0.0,
            intersect_b: 1.5,
            window_k: 6.0,
            ls_rho: DEFAULT_LS_RHO,
            tv_lambda: 0.03,
            photons: PerDetector::Scalar(1e5),
            detector_bias: PerDetector::Scalar(0.0),
        };
        g.max_freq = g.default_max_freq();
        g
    }

    /// Default band edge `W`: a fixed fraction of the largest value for which
    /// the region `|w_theta| < B + R|w_t|, |w_t| < W` stays inside both the
    /// detector Nyquist band `pi/T` and the angular Nyquist band `pi/Theta`.
    pub fn default_max_freq(&self) -> f64 {
        let detector = PI / self.detector_spacing;
        let angular = (PI / self.angle_spacing - self.intersect_b) / self.object_radius;
        DEFAULT_MAX_FREQ_FRACTION * detector.min(angular).max(f64::MIN_POSITIVE)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_detectors;
        if n < 4 || n % 2 != 0 {
            return Err(Error::Geometry(format!("N must be even and >= 4, got {n}")));
        }
        if self.n_angles < 1 {
            return Err(Error::Geometry("at least one angle is required".into()));
        }
        if !(self.detector_spacing > 0.0) {
            return Err(Error::Geometry("detector spacing must be positive".into()));
        }
        if self.angle_spacing != PI / self.n_angles as f64 {
            return Err(Error::Geometry(format!(
                "angle spacing must equal pi/A = {}, got {}",
                PI / self.n_angles as f64,
                self.angle_spacing
            )));
        }
        if !(self.object_radius > 0.0)
            || 2.0 * self.object_radius >= n as f64 * self.detector_spacing
        {
            return Err(Error::Geometry(format!(
                "support 2R = {} must be positive and below N*T = {}",
                2.0 * self.object_radius,
                n as f64 * self.detector_spacing
            )));
        }
        if !(self.max_freq > 0.0) {
            return Err(Error::Geometry("max_freq must be positive".into()));
        }
        if !(self.intersect_b >= 1.0) {
            return Err(Error::Geometry("intersect_b must be >= 1".into()));
        }
        if !(self.window_k >= 1.0) {
            return Err(Error::Geometry("window_k must be >= 1".into()));
        }
        if !self.photons.len_ok(n) || !self.detector_bias.len_ok(n) {
            return Err(Error::Geometry(
                "per-detector vectors must have N entries".into(),
            ));
        }
        Ok(())
    }

    pub fn pb_shape(&self) -> (usize, usize) {
        (self.n_detectors, self.n_angles)
    }

    pub fn pp_shape(&self) -> (usize, usize) {
        let l = 2 * self.n_detectors + 1;
        (l, l)
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.n_detectors, self.n_detectors)
    }
}

/// Fraction of the alias-free band edge used as the default `W`.
pub const DEFAULT_MAX_FREQ_FRACTION: f64 = 0.9;

/// Default Tikhonov constant for a kernel table whose entries sum to one.
pub const DEFAULT_LS_RHO: f64 = 0.03;

/// `acot(x) = pi/2 - atan(x)`, with values in `(0, pi)`.
pub fn acot(x: f64) -> f64 {
    FRAC_PI_2 - x.atan()
}

/// One column of the pseudo-polar grid: detector spacing and projection angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpColumn {
    pub n: isize,
    pub spacing: f64,
    pub angle: f64,
}

/// Line slope of pseudo-polar column `n`.
///
/// Columns `n in [-N/2, N/2-1]` are the basically-horizontal family with slope
/// `2n/N`; columns `n in [N/2, 3N/2]` are the basically-vertical family with
/// slope `2(N-n)/N`. Both slopes lie in `[-1, 1]`.
pub fn pp_slope(n_det: usize, n: isize) -> f64 {
    let nn = n_det as f64;
    if n < (n_det / 2) as isize {
        2.0 * n as f64 / nn
    } else {
        2.0 * (n_det as isize - n) as f64 / nn
    }
}

pub fn is_horizontal_family(n_det: usize, n: isize) -> bool {
    n < (n_det / 2) as isize
}

/// Detector spacing and angle of every pseudo-polar column, for `n in [-N/2, 3N/2]`.
pub fn pp_grid_points(geom: &ScanGeometry) -> Vec<PpColumn> {
    let n_det = geom.n_detectors;
    let half = (n_det / 2) as isize;
    (-half..=3 * half)
        .map(|n| {
            let s = pp_slope(n_det, n);
            let spacing = geom.detector_spacing / (1.0 + s * s).sqrt();
            let angle = if is_horizontal_family(n_det, n) {
                s.atan()
            } else {
                acot(s)
            };
            PpColumn { n, spacing, angle }
        })
        .collect()
}

/// `(t, theta)` of every parallel-beam sample, indexed `[m + N/2][n]`.
pub fn pb_grid_points(geom: &ScanGeometry) -> Array2<(f64, f64)> {
    let (nd, na) = geom.pb_shape();
    let half = (nd / 2) as isize;
    Array2::from_shape_fn((nd, na), |(i, j)| {
        let m = i as isize - half;
        (
            m as f64 * geom.detector_spacing,
            j as f64 * geom.angle_spacing,
        )
    })
}

/// `N x N` attenuation map.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub data: Array2<f64>,
    pub pixel_pitch: f64,
}

impl Image {
    pub fn zeros(n: usize, pixel_pitch: f64) -> Self {
        Image {
            data: Array2::zeros((n, n)),
            pixel_pitch,
        }
    }

    pub fn new(data: Array2<f64>, pixel_pitch: f64) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::Shape {
                expected: (r, r),
                got: (r, c),
            });
        }
        Ok(Image { data, pixel_pitch })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Value at centered indices.
    pub fn at(&self, u: isize, v: isize) -> f64 {
        let h = (self.n() / 2) as isize;
        self.data[[(u + h) as usize, (v + h) as usize]]
    }
}

/// Parallel-beam sinogram, `N` detectors by `A` angles.
#[derive(Clone, Debug, PartialEq)]
pub struct PbSinogram {
    pub data: Array2<f64>,
}

impl PbSinogram {
    pub fn zeros(geom: &ScanGeometry) -> Self {
        PbSinogram {
            data: Array2::zeros(geom.pb_shape()),
        }
    }

    pub fn check(&self, geom: &ScanGeometry) -> Result<()> {
        check_shape(geom.pb_shape(), self.data.dim())
    }
}

/// Pseudo-polar sinogram, `(2N+1) x (2N+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PpSinogram {
    pub data: Array2<f64>,
}

impl PpSinogram {
    pub fn zeros(n: usize) -> Self {
        PpSinogram {
            data: Array2::zeros((2 * n + 1, 2 * n + 1)),
        }
    }

    /// Image size `N` implied by the shape.
    pub fn n(&self) -> usize {
        (self.data.nrows() - 1) / 2
    }
}

/// Subspace expansion coefficients on the parallel-beam grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientGrid {
    pub data: Array2<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_geom(n: usize, a: usize) -> ScanGeometry {
        let mut g = ScanGeometry::new(n, a);
        g.detector_spacing = 1.0;
        g.object_radius = 0.4 * n as f64;
        g
    }

    #[test]
    fn pp_grid_examples() {
        let g = unit_geom(4, 4);
        let pts = pp_grid_points(&g);
        assert_eq!(pts.len(), 9);
        let at = |n: isize| pts.iter().find(|c| c.n == n).copied().unwrap();

        let c0 = at(0);
        assert_abs_diff_eq!(c0.spacing, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c0.angle, 0.0, epsilon = 1e-15);

        let c1 = at(1);
        assert_abs_diff_eq!(c1.spacing, 1.0 / 1.25f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c1.spacing, 0.894427, epsilon = 1e-6);
        assert_abs_diff_eq!(c1.angle, 0.463648, epsilon = 1e-6);

        // centre of the vertical family
        let cn = at(4);
        assert_abs_diff_eq!(cn.spacing, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cn.angle, FRAC_PI_2, epsilon = 1e-15);

        // seam column sits on the diagonal
        let seam = at(2);
        assert_abs_diff_eq!(seam.angle, PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(seam.spacing, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn pp_grid_monotone_and_bounded() {
        for n in [4usize, 8, 16, 64, 256] {
            let g = unit_geom(n, 10);
            let pts = pp_grid_points(&g);
            assert_eq!(pts.len(), 2 * n + 1);
            for w in pts.windows(2) {
                assert!(w[1].angle > w[0].angle, "N={n}: {:?}", w);
            }
            assert_abs_diff_eq!(pts[0].angle, -PI / 4.0, epsilon = 1e-15);
            assert_abs_diff_eq!(pts[2 * n].angle, 3.0 * PI / 4.0, epsilon = 1e-15);
            for c in &pts {
                assert!(c.spacing <= 1.0 + 1e-15 && c.spacing >= 1.0 / 2f64.sqrt() - 1e-15);
            }
        }
    }

    #[test]
    fn pb_grid_examples() {
        let g = unit_geom(4, 4);
        let pts = pb_grid_points(&g);
        assert_eq!(pts[[2, 0]], (0.0, 0.0));
        let (t, th) = pts[[3, 1]];
        assert_eq!(t, 1.0);
        assert_abs_diff_eq!(th, PI / 4.0, epsilon = 1e-15);

        let g = ScanGeometry::new(256, 60);
        let pts = pb_grid_points(&g);
        assert_abs_diff_eq!(pts[[0, 59]].1, 59.0 * PI / 60.0, epsilon = 1e-13);
    }

    #[test]
    fn validation() {
        assert!(ScanGeometry::new(256, 60).validate().is_ok());
        assert!(ScanGeometry::new(6, 3).validate().is_ok());
        assert!(ScanGeometry::new(5, 3).validate().is_err());
        assert!(ScanGeometry::new(2, 3).validate().is_err());
        let mut g = ScanGeometry::new(8, 8);
        g.object_radius = 1.0;
        assert!(g.validate().is_err());
        let mut g = ScanGeometry::new(8, 8);
        g.angle_spacing = 0.3;
        assert!(g.validate().is_err());
        let mut g = ScanGeometry::new(8, 8);
        g.intersect_b = 0.5;
        assert!(g.validate().is_err());
        let mut g = ScanGeometry::new(8, 8);
        g.photons = PerDetector::Vector(vec![1.0; 7]);
        assert!(g.validate().is_err());
    }

    #[test]
    fn json_keys_are_field_names() {
        let g = ScanGeometry::new(16, 12);
        let v = serde_json::to_value(&g).unwrap();
        let obj = v.as_object().unwrap();
        for key in [
            "n_detectors",
            "n_angles",
            "detector_spacing",
            "angle_spacing",
            "object_radius",
            "max_freq",
            "intersect_b",
            "window_k",
            "ls_rho",
            "tv_lambda",
            "photons",
            "detector_bias",
        ] {
            assert!(obj.contains_key(key), "{key}");
        }
        assert_eq!(obj.len(), 12);
        let back: ScanGeometry = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);

        let mut g = g;
        g.photons = PerDetector::Vector((0..16).map(|i| 1e4 + i as f64).collect());
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<ScanGeometry>(&s).unwrap(), g);
    }
}
