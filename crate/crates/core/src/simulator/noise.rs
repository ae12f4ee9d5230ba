//! Poisson transmission noise.
//!
//! Raw counts follow `r ~ Poisson(I exp(-p) + eps)` and the noisy line
//! integrals are recovered as `-ln((r - eps) / I)`. When a noise level is
//! requested in the sinogram domain the photon count `I` is calibrated from
//! the first-order (delta-method) variance `var(p_noisy) ~ exp(p) / I`.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::geometry::{PbSinogram, PerDetector, ScanGeometry};

/// How strong the simulated noise is.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    /// Use the photon counts and biases stored in the geometry.
    Photons,
    /// Target standard deviation as a fraction of `max p - min p`.
    Sigma(f64),
    /// Target sinogram SNR in dB (`20 log10(|p| / |noise|)`).
    SnrDb(f64),
}

/// Detector counts behind a noisy sinogram, stored like the sinogram.
#[derive(Clone, Debug, PartialEq)]
pub struct RawCounts {
    pub counts: Array2<u64>,
    /// Photons per detector row.
    pub photons: Vec<f64>,
    /// Electronic bias per detector row.
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyScan {
    pub sinogram: PbSinogram,
    pub raw: RawCounts,
    /// Number of photon-starved entries whose count was clamped to `bias + 1`.
    pub saturated: usize,
}

/// Photon count giving an RMS sinogram-domain noise of `target_std`.
pub fn calibrate_photons(p: &Array2<f64>, target_std: f64) -> f64 {
    let mean_exp = p.iter().map(|&x| x.exp()).sum::<f64>() / p.len() as f64;
    mean_exp / (target_std * target_std)
}

fn target_std(p: &Array2<f64>, level: NoiseLevel) -> Option<f64> {
    match level {
        NoiseLevel::Photons => None,
        NoiseLevel::Sigma(s) => {
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = p.iter().copied().fold(f64::INFINITY, f64::min);
            Some(s * (max - min))
        }
        NoiseLevel::SnrDb(db) => {
            let rms = (p.iter().map(|x| x * x).sum::<f64>() / p.len() as f64).sqrt();
            Some(rms * 10f64.powf(-db / 20.0))
        }
    }
}

/// Apply transmission noise to any sinogram-shaped array (rows are detectors).
pub fn add_noise_array(
    p: &Array2<f64>,
    photons: &PerDetector,
    bias: &PerDetector,
    level: NoiseLevel,
    seed: u64,
) -> Result<(Array2<f64>, RawCounts, usize)> {
    let rows = p.nrows();
    let photons: Vec<f64> = match target_std(p, level) {
        Some(s) if s > 0.0 => vec![calibrate_photons(p, s); rows],
        Some(_) => return Err(param("noise", "target noise level must be positive")),
        None => (0..rows).map(|r| photons.at(r)).collect(),
    };
    let bias: Vec<f64> = (0..rows).map(|r| bias.at(r)).collect();
    for (i, e) in photons.iter().zip(&bias) {
        if !(*e >= 0.0) || !(i > e) {
            return Err(param(
                "photons",
                format!("need photons > bias >= 0, got I = {i}, eps = {e}"),
            ));
        }
    }

    let mut counts = Array2::<u64>::zeros(p.dim());
    let mut noisy = Array2::<f64>::zeros(p.dim());
    let saturated: usize = counts
        .axis_iter_mut(Axis(1))
        .into_par_iter()
        .zip(noisy.axis_iter_mut(Axis(1)))
        .enumerate()
        .map(|(j, (mut ccol, mut ncol))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut starved = 0usize;
            for r in 0..rows {
                let (i_m, e_m) = (photons[r], bias[r]);
                let lambda = i_m * (-p[[r, j]]).exp() + e_m;
                let mut count = if lambda > 0.0 {
                    Poisson::new(lambda)
                        .map(|d| d.sample(&mut rng))
                        .unwrap_or(lambda.round())
                } else {
                    0.0
                };
                if count - e_m <= 0.0 {
                    count = e_m.floor() + 1.0;
                    starved += 1;
                }
                ccol[r] = count as u64;
                ncol[r] = -((count - e_m) / i_m).ln();
            }
            starved
        })
        .sum();

    Ok((
        noisy,
        RawCounts {
            counts,
            photons,
            bias,
        },
        saturated,
    ))
}

/// Noisy realization of a parallel-beam sinogram, reproducible for a fixed seed.
pub fn add_noise(
    p: &PbSinogram,
    geom: &ScanGeometry,
    level: NoiseLevel,
    seed: u64,
) -> Result<NoisyScan> {
    p.check(geom)?;
    let (data, raw, saturated) =
        add_noise_array(&p.data, &geom.photons, &geom.detector_bias, level, seed)?;
    Ok(NoisyScan {
        sinogram: PbSinogram { data },
        raw,
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{phantom_shepp_logan, project_pb};

    fn sl(n: usize, a: usize) -> (ScanGeometry, PbSinogram) {
        let geom = ScanGeometry::new(n, a);
        let ph = phantom_shepp_logan(n).unwrap();
        let p = project_pb(&ph, &geom).unwrap();
        (geom, p)
    }

    #[test]
    fn huge_dose_is_noiseless() {
        let (mut geom, p) = sl(64, 30);
        geom.photons = PerDetector::Scalar(1e12);
        let out = add_noise(&p, &geom, NoiseLevel::Photons, 3).unwrap();
        let err = (&out.sinogram.data - &p.data).mapv(|x| x * x).sum().sqrt();
        assert!(err / p.data.mapv(|x| x * x).sum().sqrt() <= 1e-4);
    }

    #[test]
    fn fixed_seed_reproducible() {
        let (geom, p) = sl(32, 16);
        let a = add_noise(&p, &geom, NoiseLevel::Sigma(0.02), 42).unwrap();
        let b = add_noise(&p, &geom, NoiseLevel::Sigma(0.02), 42).unwrap();
        assert_eq!(a.raw, b.raw);
        assert_eq!(a.sinogram, b.sinogram);
        let c = add_noise(&p, &geom, NoiseLevel::Sigma(0.02), 43).unwrap();
        assert_ne!(a.raw.counts, c.raw.counts);
    }

    #[test]
    fn calibrated_sigma_is_realized() {
        let (geom, p) = sl(128, 90);
        let range = p.data.iter().cloned().fold(f64::MIN, f64::max)
            - p.data.iter().cloned().fold(f64::MAX, f64::min);
        let target = 0.02 * range;
        let out = add_noise(&p, &geom, NoiseLevel::Sigma(0.02), 7).unwrap();
        let diff = &out.sinogram.data - &p.data;
        let std = (diff.mapv(|x| x * x).sum() / diff.len() as f64).sqrt();
        assert!((std - target).abs() / target < 0.2, "{std} vs {target}");
    }

    #[test]
    fn snr_target_is_realized() {
        let (geom, p) = sl(128, 90);
        let out = add_noise(&p, &geom, NoiseLevel::SnrDb(25.0), 11).unwrap();
        let snr = crate::metrics::snr_db(&out.sinogram.data, &p.data);
        assert!((snr - 25.0).abs() < 0.5, "{snr}");
    }

    #[test]
    fn starved_detectors_are_clamped() {
        let (mut geom, mut p) = sl(16, 4);
        p.data.fill(50.0);
        geom.photons = PerDetector::Scalar(10.0);
        geom.detector_bias = PerDetector::Scalar(2.0);
        let out = add_noise(&p, &geom, NoiseLevel::Photons, 1).unwrap();
        assert!(out.saturated > 0);
        assert!(out.sinogram.data.iter().all(|v| v.is_finite()));
        assert!(out.raw.counts.iter().all(|&c| c >= 3));
    }

    #[test]
    fn photons_must_exceed_bias() {
        let (mut geom, p) = sl(16, 4);
        geom.photons = PerDetector::Scalar(1.0);
        geom.detector_bias = PerDetector::Scalar(2.0);
        assert!(add_noise(&p, &geom, NoiseLevel::Photons, 1).is_err());
    }

    #[test]
    fn mean_converges_to_clean() {
        let (geom, p) = sl(32, 8);
        let runs = 200;
        let mut acc = Array2::<f64>::zeros(p.data.dim());
        let mut var = Array2::<f64>::zeros(p.data.dim());
        for s in 0..runs {
            let out = add_noise(&p, &geom, NoiseLevel::Sigma(0.02), 1000 + s).unwrap();
            let d = &out.sinogram.data - &p.data;
            var = var + d.mapv(|x| x * x);
            acc = acc + d;
        }
        let mean = acc / runs as f64;
        let rms_mean = (mean.mapv(|x| x * x).sum() / mean.len() as f64).sqrt();
        let predicted = (var.sum() / var.len() as f64 / runs as f64).sqrt() / (runs as f64).sqrt();
        assert!(rms_mean <= 3.0 * predicted, "{rms_mean} vs {predicted}");
    }
}
