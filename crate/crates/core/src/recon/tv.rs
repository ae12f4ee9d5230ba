//! Isotropic total variation and its proximal operator.
//!
//! The prox of `w TV` is computed by the fast gradient projection on the
//! dual problem. Gradients are forward differences with a zero difference
//! across the image border (reflecting boundary), so `p` lives on an
//! `(N-1) x N` grid and `q` on `N x (N-1)`.

use ndarray::{s, Array2, Zip};

use crate::error::{param, Result};

/// Isotropic TV: `sum sqrt(dx^2 + dy^2)` with reflecting boundaries.
pub fn tv_iso(x: &Array2<f64>) -> f64 {
    let (r, c) = x.dim();
    let mut acc = 0.0;
    for i in 0..r {
        for j in 0..c {
            let dx = if i + 1 < r {
                x[[i, j]] - x[[i + 1, j]]
            } else {
                0.0
            };
            let dy = if j + 1 < c {
                x[[i, j]] - x[[i, j + 1]]
            } else {
                0.0
            };
            acc += (dx * dx + dy * dy).sqrt();
        }
    }
    acc
}

/// Dual variables of the TV prox, kept between calls for warm starts.
#[derive(Clone, Debug, PartialEq)]
pub struct TvDual {
    p: Array2<f64>,
    q: Array2<f64>,
}

impl TvDual {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TvDual {
            p: Array2::zeros((rows.saturating_sub(1), cols)),
            q: Array2::zeros((rows, cols.saturating_sub(1))),
        }
    }

    fn fits(&self, rows: usize, cols: usize) -> bool {
        self.p.dim() == (rows.saturating_sub(1), cols)
            && self.q.dim() == (rows, cols.saturating_sub(1))
    }
}

/// `L(p, q)`: negative divergence.
fn lin(p: &Array2<f64>, q: &Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let mut v = 0.0;
            if i + 1 < rows {
                v += p[[i, j]];
            }
            if i > 0 {
                v -= p[[i - 1, j]];
            }
            if j + 1 < cols {
                v += q[[i, j]];
            }
            if j > 0 {
                v -= q[[i, j - 1]];
            }
            out[[i, j]] = v;
        }
    }
    out
}

/// `L^T x`: forward differences.
fn lin_t(x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let p = &x.slice(s![..-1, ..]) - &x.slice(s![1.., ..]);
    let q = &x.slice(s![.., ..-1]) - &x.slice(s![.., 1..]);
    (p, q)
}

/// Project each dual pair `(p_ij, q_ij)` onto the unit disk.
fn project(p: &mut Array2<f64>, q: &mut Array2<f64>) {
    let (rows, cols) = (q.nrows(), p.ncols());
    for i in 0..rows {
        for j in 0..cols {
            let a = if i + 1 < rows { p[[i, j]] } else { 0.0 };
            let b = if j + 1 < cols { q[[i, j]] } else { 0.0 };
            let norm = (a * a + b * b).sqrt().max(1.0);
            if i + 1 < rows {
                p[[i, j]] = a / norm;
            }
            if j + 1 < cols {
                q[[i, j]] = b / norm;
            }
        }
    }
}

/// Approximate `argmin_u 1/2 |u - x|^2 + weight * TV(u)` with `iters` dual
/// fast-gradient-projection steps, starting from (and updating) `dual`.
pub fn tv_prox_warm(
    x: &Array2<f64>,
    weight: f64,
    iters: usize,
    dual: &mut TvDual,
) -> Result<Array2<f64>> {
    if !(weight >= 0.0) {
        return Err(param(
            "weight",
            format!("must be nonnegative, got {weight}"),
        ));
    }
    if weight == 0.0 {
        return Ok(x.clone());
    }
    let (rows, cols) = x.dim();
    if !dual.fits(rows, cols) {
        *dual = TvDual::zeros(rows, cols);
    }
    let step = 1.0 / (8.0 * weight);
    let mut r = dual.p.clone();
    let mut s_ = dual.q.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let u = x - &(lin(&r, &s_, rows, cols) * weight);
        let (gp, gq) = lin_t(&u);
        let mut p_new = &r + &(gp * step);
        let mut q_new = &s_ + &(gq * step);
        project(&mut p_new, &mut q_new);
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_new;
        Zip::from(&mut r)
            .and(&p_new)
            .and(&dual.p)
            .for_each(|r, &pn, &po| *r = pn + beta * (pn - po));
        Zip::from(&mut s_)
            .and(&q_new)
            .and(&dual.q)
            .for_each(|s, &qn, &qo| *s = qn + beta * (qn - qo));
        dual.p = p_new;
        dual.q = q_new;
        t = t_new;
    }
    Ok(x - &(lin(&dual.p, &dual.q, rows, cols) * weight))
}

/// Cold-started TV prox.
pub fn tv_prox(x: &Array2<f64>, weight: f64, inner_iters: usize) -> Result<Array2<f64>> {
    let mut dual = TvDual::zeros(x.nrows(), x.ncols());
    tv_prox_warm(x, weight, inner_iters, &mut dual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(u: &Array2<f64>, x: &Array2<f64>, w: f64) -> f64 {
        0.5 * (u - x).mapv(|v| v * v).sum() + w * tv_iso(u)
    }

    #[test]
    fn zero_weight_is_identity() {
        let x = Array2::from_shape_fn((5, 6), |(i, j)| (i * j) as f64);
        assert_eq!(tv_prox(&x, 0.0, 20).unwrap(), x);
        assert!(tv_prox(&x, -1.0, 20).is_err());
    }

    #[test]
    fn constant_unchanged() {
        let x = Array2::from_elem((8, 8), 3.25);
        let u = tv_prox(&x, 10.0, 20).unwrap();
        assert!(u.iter().all(|&v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn step_flattened_and_objective_decreases() {
        let x = Array2::from_shape_fn((16, 16), |(_, j)| if j < 8 { 0.0 } else { 1.0 });
        let w = 50.0;
        let u = tv_prox(&x, w, 200).unwrap();
        assert!(objective(&u, &x, w) < objective(&x, &x, w));
        let mean = x.mean().unwrap();
        let spread = u.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        assert!(spread < 0.05, "{spread}");
    }

    #[test]
    fn tv_of_ramp() {
        let x = Array2::from_shape_fn((3, 3), |(_, j)| j as f64);
        // six horizontal unit differences
        assert!((tv_iso(&x) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_reuses_dual() {
        let x = Array2::from_shape_fn((10, 10), |(i, j)| ((i * 3 + j * 7) % 5) as f64);
        let mut dual = TvDual::zeros(10, 10);
        let a = tv_prox_warm(&x, 0.5, 5, &mut dual).unwrap();
        let b = tv_prox_warm(&x, 0.5, 5, &mut dual).unwrap();
        let c = tv_prox(&x, 0.5, 10).unwrap();
        // ten warm iterations beat five cold ones
        assert!(objective(&b, &x, 0.5) <= objective(&a, &x, 0.5) + 1e-12);
        assert!(
            (objective(&b, &x, 0.5) - objective(&c, &x, 0.5)).abs() < 0.05 * objective(&c, &x, 0.5)
        );
    }

    proptest! {
        #[test]
        fn nonexpansive(seed in 0u64..200, w in 0.01f64..2.0) {
            let mut st = seed.wrapping_add(17);
            let mut next = || {
                st = st.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (st >> 11) as f64 / (1u64 << 53) as f64
            };
            let x = Array2::from_shape_simple_fn((8, 8), &mut next);
            let y = Array2::from_shape_simple_fn((8, 8), &mut next);
            let px = tv_prox(&x, w, 20).unwrap();
            let py = tv_prox(&y, w, 20).unwrap();
            let lhs = (&px - &py).mapv(|v| v * v).sum().sqrt();
            let rhs = (&x - &y).mapv(|v| v * v).sum().sqrt();
            prop_assert!(lhs <= rhs + 1e-6, "{} > {}", lhs, rhs);
        }
    }
}
