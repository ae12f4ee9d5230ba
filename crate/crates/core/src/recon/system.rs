//! Linear operators seen by the solver and the modified pseudo-polar system.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_shape, param, Error, Result};
use crate::geometry::{pp_grid_points, Image, PpSinogram, ScanGeometry};
use crate::pp::PpTransform;

use super::ops::{decimate_d, precondition_m, weight_from_counts, Power};

/// A real linear map between 2D arrays together with its adjoint.
pub trait LinearOperator: Sync {
    fn input_shape(&self) -> (usize, usize);
    fn output_shape(&self) -> (usize, usize);
    fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>>;
    fn apply_adjoint(&self, y: &Array2<f64>) -> Result<Array2<f64>>;
}

impl LinearOperator for PpTransform {
    fn input_shape(&self) -> (usize, usize) {
        (self.n(), self.n())
    }

    fn output_shape(&self) -> (usize, usize) {
        let l = 2 * self.n() + 1;
        (l, l)
    }

    fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(&Image::new(x.clone(), 1.0)?)?.data)
    }

    fn apply_adjoint(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.adjoint(&PpSinogram { data: y.clone() })?.data)
    }
}

/// Dense matrix acting on column vectors stored as `(len, 1)` arrays.
pub struct MatrixOperator(pub DMatrix<f64>);

impl LinearOperator for MatrixOperator {
    fn input_shape(&self) -> (usize, usize) {
        (self.0.ncols(), 1)
    }

    fn output_shape(&self) -> (usize, usize) {
        (self.0.nrows(), 1)
    }

    fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_shape(self.input_shape(), x.dim())?;
        let v = nalgebra::DVector::from_iterator(x.len(), x.iter().copied());
        let y = &self.0 * v;
        Ok(
            Array2::from_shape_vec(self.output_shape(), y.iter().copied().collect())
                .expect("vector shape"),
        )
    }

    fn apply_adjoint(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        check_shape(self.output_shape(), y.dim())?;
        let v = nalgebra::DVector::from_iterator(y.len(), y.iter().copied());
        let x = self.0.tr_mul(&v);
        Ok(
            Array2::from_shape_vec(self.input_shape(), x.iter().copied().collect())
                .expect("vector shape"),
        )
    }
}

/// Largest eigenvalue of `A* A` by power iteration.
///
/// Stops when the relative change of the estimate drops to `1e-4` or after
/// 100 iterations. The start vector is drawn from a fixed seed.
pub fn power_method(op: &dyn LinearOperator) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = Array2::from_shape_simple_fn(op.input_shape(), || rng.random::<f64>() - 0.25);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x /= norm;
    let mut est = 0.0;
    for _ in 0..100 {
        let y = op.apply_adjoint(&op.apply(&x)?)?;
        let next = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !next.is_finite() {
            return Err(Error::NonFinite { iteration: 0 });
        }
        if next == 0.0 {
            return Ok(0.0);
        }
        x = y / next;
        let done = (next - est).abs() <= 1e-4 * next;
        est = next;
        if done {
            break;
        }
    }
    Ok(est)
}

/// Power-method estimate of `sigma_max(A)^2` with a 1.01 safety factor.
pub fn estimate_lipschitz(op: &dyn LinearOperator) -> Result<f64> {
    Ok(1.01 * power_method(op)?)
}

/// Largest relative mismatch `|<Ax, y> - <x, A*y>| / max(|<Ax, y>|, |<x, A*y>|)`
/// over `pairs` random Gaussian pairs drawn from `seed`.
pub fn adjointness_error(op: &dyn LinearOperator, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x =
            Array2::from_shape_simple_fn(op.input_shape(), || rng.sample::<f64, _>(StandardNormal));
        let y = Array2::from_shape_simple_fn(op.output_shape(), || {
            rng.sample::<f64, _>(StandardNormal)
        });
        let ax = op.apply(&x)?;
        let aty = op.apply_adjoint(&y)?;
        let lhs = (&ax * &y).sum();
        let rhs = (&x * &aty).sum();
        let scale = lhs.abs().max(rhs.abs());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

/// `D W^1/2 M^1/2 R_pp` and its adjoint, with the transformed data `p~`.
pub struct ModifiedSystem {
    transform: Arc<PpTransform>,
    precondition: bool,
    weights_half: Option<Array2<f64>>,
    mask: Option<Array2<bool>>,
    pixel_pitch: f64,
    /// Transformed measurements `D W^1/2 M^1/2 p_hat`.
    pub data: Array2<f64>,
    /// Power-method bound on `sigma_max(A)^2`.
    pub lipschitz: f64,
}

impl ModifiedSystem {
    /// Build the system for a resampled sinogram. `weights` are the full
    /// (not square-rooted) weights on the pseudo-polar grid; `None` means
    /// identity, as does `mask = None` and `precondition = false`.
    pub fn new(
        p_hat: &PpSinogram,
        weights: Option<&Array2<f64>>,
        mask: Option<&Array2<bool>>,
        precondition: bool,
        pixel_pitch: f64,
    ) -> Result<Self> {
        let n = p_hat.n();
        Self::with_transform(
            Arc::new(PpTransform::new(n)?),
            p_hat,
            weights,
            mask,
            precondition,
            pixel_pitch,
        )
    }

    pub fn with_transform(
        transform: Arc<PpTransform>,
        p_hat: &PpSinogram,
        weights: Option<&Array2<f64>>,
        mask: Option<&Array2<bool>>,
        precondition: bool,
        pixel_pitch: f64,
    ) -> Result<Self> {
        let l = 2 * transform.n() + 1;
        check_shape((l, l), p_hat.data.dim())?;
        if let Some(w) = weights {
            check_shape((l, l), w.dim())?;
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(param("weights", "weights must be finite and nonnegative"));
            }
        }
        if let Some(m) = mask {
            check_shape((l, l), m.dim())?;
        }
        let mut sys = ModifiedSystem {
            transform,
            precondition,
            weights_half: weights.map(|w| w.mapv(f64::sqrt)),
            mask: mask.cloned(),
            pixel_pitch,
            data: Array2::zeros((l, l)),
            lipschitz: 0.0,
        };
        sys.data = sys.stack(p_hat.data.clone())?;
        sys.lipschitz = estimate_lipschitz(&sys)?;
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.transform.n()
    }

    pub fn transform(&self) -> &Arc<PpTransform> {
        &self.transform
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    /// `D W^1/2 M^1/2 y`.
    fn stack(&self, y: Array2<f64>) -> Result<Array2<f64>> {
        let mut y = if self.precondition {
            precondition_m(&PpSinogram { data: y }, Power::Half)?.data
        } else {
            y
        };
        if let Some(w) = &self.weights_half {
            y *= w;
        }
        if let Some(m) = &self.mask {
            y = decimate_d(&y, m)?;
        }
        Ok(y)
    }

    /// `M^1/2 W^1/2 D y` (each factor is self-adjoint).
    fn stack_adjoint(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        let mut y = match &self.mask {
            Some(m) => decimate_d(y, m)?,
            None => y.clone(),
        };
        if let Some(w) = &self.weights_half {
            y *= w;
        }
        if self.precondition {
            y = precondition_m(&PpSinogram { data: y }, Power::Half)?.data;
        }
        Ok(y)
    }

    pub fn forward(&self, image: &Image) -> Result<Array2<f64>> {
        self.stack(self.transform.forward(image)?.data)
    }

    pub fn adjoint(&self, y: &Array2<f64>) -> Result<Image> {
        let l = 2 * self.n() + 1;
        check_shape((l, l), y.dim())?;
        let z = self.stack_adjoint(y)?;
        let mut img = self.transform.adjoint(&PpSinogram { data: z })?;
        img.pixel_pitch = self.pixel_pitch;
        Ok(img)
    }
}

impl LinearOperator for ModifiedSystem {
    fn input_shape(&self) -> (usize, usize) {
        (self.n(), self.n())
    }

    fn output_shape(&self) -> (usize, usize) {
        let l = 2 * self.n() + 1;
        (l, l)
    }

    fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.forward(&Image::new(x.clone(), self.pixel_pitch)?)
    }

    fn apply_adjoint(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.adjoint(y)?.data)
    }
}

/// Statistical weights on the pseudo-polar grid from surrogate counts
/// `r = I exp(-p) + eps`, where `p` is the resampled sinogram converted back
/// to physical line integrals. Normalized to unit mean over the nonzero
/// entries so that the TV weight keeps its meaning across doses.
pub fn surrogate_weights(
    p_hat: &PpSinogram,
    geom: &ScanGeometry,
    photons: f64,
    bias: f64,
) -> Result<Array2<f64>> {
    check_shape(geom.pp_shape(), p_hat.data.dim())?;
    if !(photons > bias) || !(bias >= 0.0) {
        return Err(param("photons", "need photons > bias >= 0"));
    }
    let cols = pp_grid_points(geom);
    let t = geom.detector_spacing;
    let mut w = Array2::zeros(p_hat.data.dim());
    for ((i, j), x) in w.indexed_iter_mut() {
        let p = p_hat.data[[i, j]] * t * t / cols[j].spacing;
        let r = photons * (-p).exp() + bias;
        *x = weight_from_counts(r, bias);
    }
    let (sum, count) = w
        .iter()
        .filter(|&&x| x > 0.0)
        .fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
    if count > 0 {
        w /= sum / count as f64;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Identity(usize);

    impl LinearOperator for Identity {
        fn input_shape(&self) -> (usize, usize) {
            (self.0, self.0)
        }
        fn output_shape(&self) -> (usize, usize) {
            (self.0, self.0)
        }
        fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
            Ok(x.clone())
        }
        fn apply_adjoint(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
            Ok(y.clone())
        }
    }

    #[test]
    fn adjointness_error_detects_a_wrong_adjoint() {
        let a = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        assert!(adjointness_error(&MatrixOperator(a.clone()), 20, 1).unwrap() < 1e-14);

        struct Broken(DMatrix<f64>);
        impl LinearOperator for Broken {
            fn input_shape(&self) -> (usize, usize) {
                (3, 1)
            }
            fn output_shape(&self) -> (usize, usize) {
                (5, 1)
            }
            fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
                MatrixOperator(self.0.clone()).apply(x)
            }
            fn apply_adjoint(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
                Ok(MatrixOperator(self.0.clone()).apply_adjoint(y)? * 1.1)
            }
        }
        assert!(adjointness_error(&Broken(a), 20, 1).unwrap() > 1e-3);
    }

    #[test]
    fn lipschitz_identity() {
        let l = estimate_lipschitz(&Identity(7)).unwrap();
        assert!((1.0..=1.02).contains(&l), "{l}");
    }

    #[test]
    fn lipschitz_diagonal() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]));
        let op = MatrixOperator(d);
        let raw = power_method(&op).unwrap();
        assert!((raw - 25.0).abs() / 25.0 < 0.01, "{raw}");
        assert!(estimate_lipschitz(&op).unwrap() >= 25.0);
    }

    #[test]
    fn surrogate_weights_unit_mean() {
        let geom = ScanGeometry::new(8, 4);
        let p = PpSinogram {
            data: Array2::from_shape_fn((17, 17), |(i, j)| 0.1 * ((i + j) % 5) as f64),
        };
        let w = surrogate_weights(&p, &geom, 1e4, 0.0).unwrap();
        assert!((w.mean().unwrap() - 1.0).abs() < 1e-12);
        // larger line integral, fewer photons, smaller weight
        assert!(w[[0, 3]] > w[[1, 3]]);
    }
}
