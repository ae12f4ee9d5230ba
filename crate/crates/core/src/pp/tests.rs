use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::ScanGeometry;

fn random_image(n: usize, rng: &mut ChaCha8Rng) -> Image {
    Image {
        data: Array2::from_shape_simple_fn((n, n), || rng.random::<f64>() - 0.3),
        pixel_pitch: 1.0,
    }
}

fn random_sino(n: usize, rng: &mut ChaCha8Rng) -> PpSinogram {
    let l = 2 * n + 1;
    PpSinogram {
        data: Array2::from_shape_simple_fn((l, l), || rng.random::<f64>() - 0.5),
    }
}

fn rel_err_c(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Plain floating-point evaluation of the two exponential sums.
fn naive_ppft(img: &Image) -> Array2<Complex64> {
    let n = img.n() as i64;
    let l = (2 * n + 1) as f64;
    let h = n / 2;
    let mut out = Array2::zeros((2 * n as usize + 1, 2 * n as usize + 1));
    for k in -n..=n {
        for col in -h..=3 * h {
            let mut acc = Complex64::new(0.0, 0.0);
            for u in -h..h {
                for v in -h..h {
                    let (kf, uf, vf) = (k as f64, u as f64, v as f64);
                    let e = if col < h {
                        -2.0 * col as f64 / n as f64 * kf * uf + kf * vf
                    } else {
                        -kf * uf + 2.0 * (n - col) as f64 / n as f64 * kf * vf
                    };
                    acc += img.at(u as isize, v as isize)
                        * Complex64::from_polar(1.0, -2.0 * PI * e / l);
                }
            }
            out[[(k + n) as usize, (col + h) as usize]] = acc;
        }
    }
    out
}

#[test]
fn direct_matches_naive_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let img = Image {
        data: Array2::from_shape_simple_fn((4, 4), || rng.random_range(-5i32..=9) as f64),
        pixel_pitch: 1.0,
    };
    let got = ppft_direct(&img).unwrap();
    let want = naive_ppft(&img);
    assert!(
        rel_err_c(&got.data, &want) <= 1e-12,
        "{}",
        rel_err_c(&got.data, &want)
    );
}

#[test]
fn impulse_gives_all_ones() {
    for n in [4, 8] {
        let mut img = Image::zeros(n, 1.0);
        img.data[[n / 2, n / 2]] = 1.0;
        for spec in [ppft_direct(&img).unwrap(), ppft_fast(&img).unwrap()] {
            for z in spec.data.iter() {
                assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
        // every column of the Radon transform is a unit impulse at m = 0
        let sino = pprt_forward(&img).unwrap();
        for ((m, _), &x) in sino.data.indexed_iter() {
            let want = if m == n { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_in_zero_out() {
    let img = Image::zeros(8, 1.0);
    assert!(ppft_direct(&img)
        .unwrap()
        .data
        .iter()
        .all(|z| z.norm() == 0.0));
    assert!(ppft_fast(&img)
        .unwrap()
        .data
        .iter()
        .all(|z| z.norm() == 0.0));
    assert!(pprt_forward(&img).unwrap().data.iter().all(|&x| x == 0.0));
    assert!(pprt_adjoint(&PpSinogram::zeros(8))
        .unwrap()
        .data
        .iter()
        .all(|&x| x == 0.0));
}

#[test]
fn odd_size_rejected() {
    let img = Image::zeros(5, 1.0);
    assert!(ppft_direct(&img).is_err());
    assert!(ppft_fast(&img).is_err());
}

#[test]
fn fast_matches_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [4, 8, 16] {
        let img = random_image(n, &mut rng);
        let fast = ppft_fast(&img).unwrap();
        let direct = ppft_direct(&img).unwrap();
        let e = rel_err_c(&fast.data, &direct.data);
        assert!(e <= 1e-9, "N={n}: {e}");
    }
}

#[test]
fn constant_image_dc_row() {
    let n = 64;
    let img = Image {
        data: Array2::from_elem((n, n), 1.0),
        pixel_pitch: 1.0,
    };
    let spec = ppft_fast(&img).unwrap();
    for z in spec.data.row(n).iter() {
        assert!((z - Complex64::new((n * n) as f64, 0.0)).norm() < 1e-8 * (n * n) as f64);
    }
}

#[test]
fn conjugate_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 8;
    let spec = ppft_fast(&random_image(n, &mut rng)).unwrap();
    for ki in 0..=2 * n {
        for col in 0..=2 * n {
            let a = spec.data[[ki, col]];
            let b = spec.data[[2 * n - ki, col]].conj();
            assert!((a - b).norm() < 1e-10);
        }
    }
}

#[test]
fn column_dft_of_radon_is_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 16;
    let l = 2 * n + 1;
    let img = random_image(n, &mut rng);
    let spec = ppft_fast(&img).unwrap();
    let sino = pprt_forward(&img).unwrap();
    let mut back = Array2::<Complex64>::zeros((l, l));
    for col in 0..l {
        for (ki, k) in (-(n as i64)..=n as i64).enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (mi, m) in (-(n as i64)..=n as i64).enumerate() {
                acc += sino.data[[mi, col]]
                    * Complex64::from_polar(1.0, -2.0 * PI * (k * m) as f64 / l as f64);
            }
            back[[ki, col]] = acc;
        }
    }
    assert!(rel_err_c(&back, &spec.data) <= 1e-10);
}

#[test]
fn adjoint_inner_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 8;
    let op = PpTransform::new(n).unwrap();
    for _ in 0..20 {
        let f = random_image(n, &mut rng);
        let p = random_sino(n, &mut rng);
        let lhs = dot(&op.forward(&f).unwrap().data, &p.data);
        let rhs = dot(&f.data, &op.adjoint(&p).unwrap().data);
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()),
            "{lhs} vs {rhs}"
        );
    }
}

#[test]
fn adjoint_odd_sized_rejected() {
    let p = PpSinogram {
        data: Array2::zeros((16, 16)),
    };
    assert!(pprt_adjoint(&p).is_err());
    let op = PpTransform::new(8).unwrap();
    assert!(op.adjoint(&PpSinogram::zeros(4)).is_err());
}

#[test]
fn dense_matches_fast_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 8;
    let geom = ScanGeometry::new(n, 4);
    let r = dense_materialize(&geom, DenseOperator::Pprt).unwrap();
    let op = PpTransform::new(n).unwrap();
    for _ in 0..3 {
        let f = random_image(n, &mut rng);
        let v = DVector::from_iterator(n * n, f.data.iter().copied());
        let dense = &r * v;
        let fast = op.forward(&f).unwrap();
        let dense =
            Array2::from_shape_vec(fast.data.dim(), dense.iter().copied().collect()).unwrap();
        assert!(rel_err(&fast.data, &dense) <= 1e-9);

        let p = random_sino(n, &mut rng);
        let w = DVector::from_iterator(p.data.len(), p.data.iter().copied());
        let dense_adj = r.tr_mul(&w);
        let dense_adj =
            Array2::from_shape_vec((n, n), dense_adj.iter().copied().collect()).unwrap();
        assert!(rel_err(&op.adjoint(&p).unwrap().data, &dense_adj) <= 1e-9);
    }
}

#[test]
fn dense_small_self_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let geom = ScanGeometry::new(4, 4);
    let r = dense_materialize(&geom, DenseOperator::Pprt).unwrap();
    for _ in 0..5 {
        let f = random_image(4, &mut rng);
        let v = DVector::from_iterator(16, f.data.iter().copied());
        let got: Vec<f64> = (&r * v).iter().copied().collect();
        let want = pprt_forward(&f).unwrap();
        let got = Array2::from_shape_vec(want.data.dim(), got).unwrap();
        assert!(rel_err(&got, &want.data) < 1e-12);
    }
}

#[test]
fn dense_shape_and_guards() {
    let geom = ScanGeometry::new(16, 8);
    let r = dense_materialize(&geom, DenseOperator::Pprt).unwrap();
    assert_eq!((r.nrows(), r.ncols()), (1089, 256));
    let pb = dense_materialize(&geom, DenseOperator::PbRadon).unwrap();
    assert_eq!((pb.nrows(), pb.ncols()), (16 * 8, 256));
    assert!(matches!(
        dense_materialize(&ScanGeometry::new(34, 8), DenseOperator::Pprt),
        Err(Error::TooLarge { .. })
    ));
    assert!("zero".parse::<DenseOperator>().is_err());
    assert_eq!(
        "pprt".parse::<DenseOperator>().unwrap(),
        DenseOperator::Pprt
    );
    assert_eq!(
        "pb_radon".parse::<DenseOperator>().unwrap(),
        DenseOperator::PbRadon
    );
}

#[test]
fn identity_condition_number() {
    assert!((condition_number(&DMatrix::identity(9, 9)) - 1.0).abs() < 1e-12);
    let singular = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 2.0]));
    assert_eq!(condition_number(&singular), f64::INFINITY);
}

#[test]
fn condition_ordering_small() {
    let geom = ScanGeometry::new(8, 16);
    let pp = condition_number_probe(&geom, false, ProbeSystem::Pp).unwrap();
    let pb = condition_number_probe(&geom, false, ProbeSystem::Pb).unwrap();
    let ppm = condition_number_probe(&geom, true, ProbeSystem::Pp).unwrap();
    assert!(pp < pb, "{pp} vs {pb}");
    assert!(ppm < pp, "{ppm} vs {pp}");
}

#[test]
fn linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 16;
    let op = PpTransform::new(n).unwrap();
    let f = random_image(n, &mut rng);
    let g = random_image(n, &mut rng);
    let (a, b) = (1.7, -0.4);
    let comb = Image {
        data: &f.data * a + &g.data * b,
        pixel_pitch: 1.0,
    };
    let lhs = op.forward(&comb).unwrap().data;
    let rhs = op.forward(&f).unwrap().data * a + op.forward(&g).unwrap().data * b;
    assert!(
        (&lhs - &rhs).iter().map(|x| x.abs()).fold(0.0, f64::max)
            <= 1e-12 * rhs.iter().map(|x| x.abs()).fold(0.0, f64::max)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjointness_random_sizes(half in 2usize..9, seed in 0u64..10_000) {
        let n = 2 * half;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = PpTransform::new(n).unwrap();
        let f = random_image(n, &mut rng);
        let p = random_sino(n, &mut rng);
        let lhs = dot(&op.forward(&f).unwrap().data, &p.data);
        let rhs = dot(&f.data, &op.adjoint(&p).unwrap().data);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    #[test]
    fn fast_equals_direct_random(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = random_image(6, &mut rng);
        let e = rel_err_c(&ppft_fast(&img).unwrap().data, &ppft_direct(&img).unwrap().data);
        prop_assert!(e <= 1e-9);
    }
}
