use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Image;

/// One additive ellipse of an analytic phantom. Lengths are in the same
/// units as the pixel pitch; `rotation` is in degrees, counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub axes: [f64; 2],
    pub rotation: f64,
    pub density: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.to_radians().sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let xr = c * dx + s * dy;
        let yr = -s * dx + c * dy;
        (xr / self.axes[0]).powi(2) + (yr / self.axes[1]).powi(2) <= 1.0
    }

    /// Analytic line integral along `x cos(theta) + y sin(theta) = t`.
    pub fn line_integral(&self, t: f64, theta: f64) -> f64 {
        let phi = self.rotation.to_radians();
        let (a, b) = (self.axes[0], self.axes[1]);
        let t0 = t - self.center[0] * theta.cos() - self.center[1] * theta.sin();
        let g = theta - phi;
        let r2 = (a * g.cos()).powi(2) + (b * g.sin()).powi(2);
        if t0 * t0 >= r2 {
            0.0
        } else {
            2.0 * self.density * a * b * (r2 - t0 * t0).sqrt() / r2
        }
    }

    pub fn scaled(&self, s: f64) -> Ellipse {
        Ellipse {
            center: [self.center[0] * s, self.center[1] * s],
            axes: [self.axes[0] * s, self.axes[1] * s],
            rotation: self.rotation,
            density: self.density,
        }
    }
}

/// Analytic ellipse phantom together with its rasterization.
#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub ellipses: Vec<Ellipse>,
    pub image: Image,
}

impl Phantom {
    /// Rasterize `ellipses` on an `n x n` grid with the given pitch by sampling
    /// the density at pixel centers; negative totals are clipped to zero.
    pub fn from_ellipses(ellipses: Vec<Ellipse>, n: usize, pitch: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Geometry(format!(
                "phantom size must be even and >= 4, got {n}"
            )));
        }
        let mut image = Image::zeros(n, pitch);
        let half = (n / 2) as f64;
        for ((r, c), px) in image.data.indexed_iter_mut() {
            let x = (c as f64 - half) * pitch;
            let y = -(r as f64 - half) * pitch;
            let v: f64 = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.density)
                .sum();
            *px = v.max(0.0);
        }
        Ok(Phantom { ellipses, image })
    }

    pub fn n(&self) -> usize {
        self.image.n()
    }

    /// Analytic line integral of the (unclipped) ellipse sum.
    pub fn line_integral(&self, t: f64, theta: f64) -> f64 {
        self.ellipses
            .iter()
            .map(|e| e.line_integral(t, theta))
            .sum()
    }

    pub fn ellipses_to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.ellipses)?)
    }

    pub fn ellipses_from_json(s: &str) -> Result<Vec<Ellipse>> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Modified (high-contrast) Shepp-Logan ellipses on the unit square `[-1, 1]^2`.
pub fn shepp_logan_ellipses() -> Vec<Ellipse> {
    const TABLE: [[f64; 6]; 10] = [
        // density, a, b, x0, y0, rotation (deg)
        [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
        [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
        [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
        [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
        [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
        [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
        [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
        [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
        [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
        [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
    ];
    TABLE
        .iter()
        .map(|r| Ellipse {
            center: [r[3], r[4]],
            axes: [r[1], r[2]],
            rotation: r[5],
            density: r[0],
        })
        .collect()
}

/// Shepp-Logan phantom rasterized on `n x n` pixels of pitch `2/n`.
pub fn phantom_shepp_logan(n: usize) -> Result<Phantom> {
    Phantom::from_ellipses(shepp_logan_ellipses(), n, 2.0 / n as f64)
}

/// Uniform disk of radius `radius` and the given density.
pub fn phantom_disk(n: usize, radius: f64, density: f64) -> Result<Phantom> {
    Phantom::from_ellipses(
        vec![Ellipse {
            center: [0.0, 0.0],
            axes: [radius, radius],
            rotation: 0.0,
            density,
        }],
        n,
        2.0 / n as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_and_corner() {
        let ph = phantom_shepp_logan(64).unwrap();
        assert!(ph.image.at(0, 0) > 0.0);
        assert_eq!(ph.image.at(-32, -32), 0.0);
        assert_eq!(ph.image.at(31, 31), 0.0);
        assert!(ph.image.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn resolution_consistency() {
        let a = phantom_shepp_logan(256).unwrap().image.data.sum();
        let b = phantom_shepp_logan(512).unwrap().image.data.sum();
        assert!((a - b / 4.0).abs() / a < 0.01, "{a} vs {}", b / 4.0);
    }

    #[test]
    fn odd_or_small_sizes_rejected() {
        assert!(phantom_shepp_logan(3).is_err());
        assert!(phantom_shepp_logan(2).is_err());
        assert!(phantom_shepp_logan(7).is_err());
    }

    #[test]
    fn analytic_chord_of_disk() {
        let e = Ellipse {
            center: [0.1, -0.2],
            axes: [0.5, 0.5],
            rotation: 0.0,
            density: 2.0,
        };
        // ray through the center
        let th = 0.7f64;
        let t = 0.1 * th.cos() - 0.2 * th.sin();
        assert!((e.line_integral(t, th) - 2.0 * 0.5 * 2.0).abs() < 1e-12);
        assert_eq!(e.line_integral(t + 0.6, th), 0.0);
    }

    #[test]
    fn ellipse_json_roundtrip() {
        let ph = phantom_shepp_logan(16).unwrap();
        let s = ph.ellipses_to_json().unwrap();
        assert!(s.trim_start().starts_with('['));
        assert_eq!(Phantom::ellipses_from_json(&s).unwrap(), ph.ellipses);
    }
}
