//! FISTA with a TV proximal step.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::Image;

use super::system::{LinearOperator, ModifiedSystem};
use super::tv::{tv_iso, tv_prox_warm, TvDual};

/// Inner dual iterations of the TV prox per outer iteration.
pub const TV_INNER_ITERS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `fidelity + lambda * tv`.
    pub objective: f64,
    /// `|A x_k - p~|^2`.
    pub fidelity: f64,
    pub tv: f64,
    /// Wall-clock seconds spent in this iteration.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: Vec<IterationRecord>,
    pub lipschitz: f64,
    pub final_iterate: Image,
}

impl SolveReport {
    /// CSV with columns `iteration,objective,fidelity,tv,seconds`.
    pub fn to_csv(&self) -> String {
        self.csv(true)
    }

    /// Same as [`SolveReport::to_csv`] without the timing column, so the output
    /// only depends on the inputs.
    pub fn to_csv_untimed(&self) -> String {
        self.csv(false)
    }

    fn csv(&self, timed: bool) -> String {
        let mut out = String::from(if timed {
            "iteration,objective,fidelity,tv,seconds\n"
        } else {
            "iteration,objective,fidelity,tv\n"
        });
        for r in &self.iterations {
            let _ = write!(
                out,
                "{},{:e},{:e},{:e}",
                r.iteration, r.objective, r.fidelity, r.tv
            );
            if timed {
                let _ = write!(out, ",{:.6}", r.seconds);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FistaOptions {
    pub lambda: f64,
    pub max_iters: usize,
    pub tv_inner_iters: usize,
    /// Clamp the returned image to nonnegative values.
    pub clamp_output: bool,
}

impl FistaOptions {
    pub fn new(lambda: f64, max_iters: usize) -> Self {
        FistaOptions {
            lambda,
            max_iters,
            tv_inner_iters: TV_INNER_ITERS,
            clamp_output: true,
        }
    }
}

/// FISTA-TV on `min |A f - data|^2 + lambda TV(f)`.
///
/// `lipschitz` bounds `sigma_max(A)^2`. The algorithm constant is
/// `L = 2 lipschitz`, the Lipschitz constant of the gradient of the squared
/// residual, so the step `2/L` applied to `A*(A z - data)` is `1/lipschitz`
/// and the prox weight is `2 lambda / L`.
pub fn fista_tv_operator(
    op: &dyn LinearOperator,
    data: &Array2<f64>,
    lipschitz: f64,
    pixel_pitch: f64,
    opts: &FistaOptions,
) -> Result<(Image, SolveReport)> {
    if !(opts.lambda > 0.0) {
        return Err(param(
            "lambda",
            format!("must be positive, got {}", opts.lambda),
        ));
    }
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(param(
            "lipschitz",
            format!("must be positive and finite, got {lipschitz}"),
        ));
    }
    let big_l = 2.0 * lipschitz;
    let step = 2.0 / big_l;
    let prox_weight = 2.0 * opts.lambda / big_l;

    let shape = op.input_shape();
    let mut x_prev = Array2::<f64>::zeros(shape);
    let mut z = Array2::<f64>::zeros(shape);
    let mut t = 1.0f64;
    let mut dual = TvDual::zeros(shape.0, shape.1);
    let mut records = Vec::with_capacity(opts.max_iters);

    for k in 1..=opts.max_iters {
        let start = Instant::now();
        let residual = op.apply(&z)? - data;
        let grad = op.apply_adjoint(&residual)?;
        let x = tv_prox_warm(
            &(&z - &(grad * step)),
            prox_weight,
            opts.tv_inner_iters,
            &mut dual,
        )?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: k });
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &x + &((&x - &x_prev) * ((t - 1.0) / t_next));
        t = t_next;
        let seconds = start.elapsed().as_secs_f64();

        let r = op.apply(&x)? - data;
        let fidelity = r.iter().map(|v| v * v).sum::<f64>();
        let tv = tv_iso(&x);
        records.push(IterationRecord {
            iteration: k,
            objective: fidelity + opts.lambda * tv,
            fidelity,
            tv,
            seconds,
        });
        x_prev = x;
    }

    let mut out = x_prev;
    if opts.clamp_output {
        out.mapv_inplace(|v| v.max(0.0));
    }
    let image = Image {
        data: out,
        pixel_pitch,
    };
    let report = SolveReport {
        iterations: records,
        lipschitz,
        final_iterate: image.clone(),
    };
    Ok((image, report))
}

/// FISTA-TV on a [`ModifiedSystem`] with the default inner iteration count.
pub fn fista_tv(
    sys: &ModifiedSystem,
    lambda: f64,
    max_iters: usize,
) -> Result<(Image, SolveReport)> {
    fista_tv_operator(
        sys,
        &sys.data,
        sys.lipschitz,
        sys.pixel_pitch(),
        &FistaOptions::new(lambda, max_iters),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{estimate_lipschitz, MatrixOperator};
    use nalgebra::DMatrix;

    #[test]
    fn rejects_bad_parameters() {
        let op = MatrixOperator(DMatrix::identity(4, 4));
        let data = Array2::zeros((4, 1));
        assert!(fista_tv_operator(&op, &data, 1.0, 1.0, &FistaOptions::new(0.0, 5)).is_err());
        assert!(fista_tv_operator(&op, &data, 0.0, 1.0, &FistaOptions::new(0.1, 5)).is_err());
    }

    #[test]
    fn identity_operator_is_tv_denoising() {
        // with A = I the first step lands on prox(data) exactly
        let op = MatrixOperator(DMatrix::identity(6, 6));
        let data = Array2::from_shape_vec((6, 1), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let l = estimate_lipschitz(&op).unwrap();
        let mut opts = FistaOptions::new(1e-9, 30);
        opts.clamp_output = false;
        let (img, rep) = fista_tv_operator(&op, &data, l, 1.0, &opts).unwrap();
        assert_eq!(rep.iterations.len(), 30);
        assert!((&img.data - &data).mapv(f64::abs).sum() < 1e-6);
    }

    #[test]
    fn csv_layout() {
        let op = MatrixOperator(DMatrix::identity(3, 3));
        let data = Array2::from_elem((3, 1), 1.0);
        let (_, rep) =
            fista_tv_operator(&op, &data, 1.01, 1.0, &FistaOptions::new(0.1, 3)).unwrap();
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,objective,fidelity,tv,seconds");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,"));
        assert_eq!(
            rep.to_csv_untimed().lines().next().unwrap(),
            "iteration,objective,fidelity,tv"
        );
    }
}
