//! End-to-end pipeline: simulate, resample, reconstruct, baselines, metrics.
//!
//! Every stage is a pure function of a [`PipelineConfig`] and its inputs; the
//! only randomness is the seeded noise draw.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{param, Result};
use crate::geometry::{Image, PbSinogram, PerDetector, PpSinogram, ScanGeometry};
use crate::metrics::{psnr_db, MetricReport};
use crate::recon::{
    fbp_baseline, fbp_tv_baseline, fista_tv_operator, surrogate_weights, FistaOptions,
    ModifiedSystem, SolveReport,
};
use crate::simulator::{
    add_noise_array, phantom_disk, phantom_shepp_logan, project_fan, project_pb, rebin_fan_to_pb,
    FanGeometry, NoiseLevel, Phantom,
};
use crate::subspace::{denoise, subspace_resample, to_pprt_units};

/// Scan parameters. `max_freq = None` uses [`ScanGeometry::default_max_freq`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n_detectors: usize,
    pub n_angles: usize,
    pub object_radius: f64,
    pub intersect_b: f64,
    pub window_k: f64,
    pub ls_rho: f64,
    pub tv_lambda: f64,
    pub max_freq: Option<f64>,
    pub photons: PerDetector,
    pub detector_bias: PerDetector,
}

impl GeometryConfig {
    pub fn new(n: usize, n_angles: usize) -> Self {
        let g = ScanGeometry::new(n, n_angles);
        GeometryConfig {
            n_detectors: n,
            n_angles,
            object_radius: g.object_radius,
            intersect_b: g.intersect_b,
            window_k: g.window_k,
            ls_rho: g.ls_rho,
            tv_lambda: g.tv_lambda,
            max_freq: None,
            photons: g.photons,
            detector_bias: g.detector_bias,
        }
    }

    pub fn scan_geometry(&self) -> Result<ScanGeometry> {
        let mut g = ScanGeometry::new(self.n_detectors, self.n_angles);
        g.object_radius = self.object_radius;
        g.intersect_b = self.intersect_b;
        g.window_k = self.window_k;
        g.ls_rho = self.ls_rho;
        g.tv_lambda = self.tv_lambda;
        g.photons = self.photons.clone();
        g.detector_bias = self.detector_bias.clone();
        g.max_freq = self.max_freq.unwrap_or_else(|| g.default_max_freq());
        g.validate()?;
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomConfig {
    SheppLogan,
    Disk { radius: f64, density: f64 },
}

impl PhantomConfig {
    pub fn build(&self, n: usize) -> Result<Phantom> {
        match *self {
            PhantomConfig::SheppLogan => phantom_shepp_logan(n),
            PhantomConfig::Disk { radius, density } => phantom_disk(n, radius, density),
        }
    }
}

/// Fan-beam acquisition rebinned to the parallel-beam grid before reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanConfig {
    pub source_distance: f64,
    pub n_fan: usize,
    pub n_views: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub iterations: usize,
    pub precondition: bool,
    /// Statistical weights from surrogate counts (only when noise is simulated).
    pub weighting: bool,
    pub tv_inner_iters: usize,
    pub clamp_output: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 20,
            precondition: true,
            weighting: true,
            tv_inner_iters: crate::recon::TV_INNER_ITERS,
            clamp_output: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Candidate TV weights for FBP followed by TV denoising. With a ground
    /// truth available the best one by PSNR is used, otherwise `tv_lambda`.
    pub tv_weights: Vec<f64>,
    pub tv_inner_iters: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            tv_weights: vec![0.005, 0.01, 0.02, 0.03, 0.05, 0.08, 0.12],
            tv_inner_iters: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub geometry: GeometryConfig,
    pub phantom: PhantomConfig,
    /// `None` simulates noiseless data.
    pub noise: Option<NoiseLevel>,
    pub seed: u64,
    pub fan: Option<FanConfig>,
    pub solver: SolverConfig,
    pub baseline: BaselineConfig,
    /// Not part of the config hash.
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            geometry: GeometryConfig::new(128, 60),
            phantom: PhantomConfig::SheppLogan,
            noise: Some(NoiseLevel::Sigma(0.02)),
            seed: 1,
            fan: None,
            solver: SolverConfig::default(),
            baseline: BaselineConfig::default(),
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Apply a `dotted.key=value` override. The value is parsed as JSON when
    /// possible and taken as a string otherwise; the key must already exist
    /// (an absent optional section may be set as a whole).
    pub fn apply_set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| param("set", format!("expected key=value, got `{assignment}`")))?;
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut root = serde_json::to_value(&*self)?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                param("set", format!("`{key}`: `{part}` is not inside an object"))
            })?;
            if !obj.contains_key(*part) {
                return Err(param("set", format!("unknown key `{key}`")));
            }
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj.get_mut(*part).expect("checked key");
        }
        *self = serde_json::from_value(root)
            .map_err(|e| param("set", format!("`{assignment}`: {e}")))?;
        Ok(())
    }

    /// SHA-256 of the compact JSON form with `out_dir` cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Simulated scan.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub geometry: ScanGeometry,
    pub phantom: Image,
    pub clean: PbSinogram,
    pub noisy: PbSinogram,
    /// Calibrated photon count per detector (mean), `None` without noise.
    pub photons: Option<f64>,
    pub saturated: usize,
}

pub fn simulate(cfg: &PipelineConfig) -> Result<Simulation> {
    let geom = cfg.geometry.scan_geometry()?;
    let ph = cfg.phantom.build(geom.n_detectors)?;
    let clean = project_pb(&ph, &geom)?;
    let bias = &geom.detector_bias;

    let (noisy, photons, saturated) = match &cfg.fan {
        None => match cfg.noise {
            None => (clean.clone(), None, 0),
            Some(level) => {
                let (data, raw, sat) =
                    add_noise_array(&clean.data, &geom.photons, bias, level, cfg.seed)?;
                (PbSinogram { data }, Some(mean(&raw.photons)), sat)
            }
        },
        Some(f) => {
            let fan = FanGeometry::covering(&geom, f.source_distance, f.n_fan, f.n_views);
            let fan_sino = project_fan(&ph, &fan)?;
            let (data, photons, sat) = match cfg.noise {
                None => (fan_sino.data.clone(), None, 0),
                Some(level) => {
                    let photons = match &geom.photons {
                        PerDetector::Scalar(v) => PerDetector::Scalar(*v),
                        PerDetector::Vector(_) => {
                            return Err(param("photons", "fan scans take a scalar photon count"))
                        }
                    };
                    let bias = PerDetector::Scalar(bias.at(0));
                    let (d, raw, sat) =
                        add_noise_array(&fan_sino.data, &photons, &bias, level, cfg.seed)?;
                    (d, Some(mean(&raw.photons)), sat)
                }
            };
            let noisy = rebin_fan_to_pb(&crate::simulator::FanSinogram { data }, &fan, &geom)?;
            (noisy, photons, sat)
        }
    };
    Ok(Simulation {
        geometry: geom,
        phantom: ph.image,
        clean,
        noisy,
        photons,
        saturated,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn denoise_stage(noisy: &PbSinogram, geom: &ScanGeometry) -> Result<PbSinogram> {
    denoise(noisy, geom)
}

/// Subspace resampling onto the pseudo-polar grid, in the units of the
/// pseudo-polar Radon transform.
pub fn resample_stage(noisy: &PbSinogram, geom: &ScanGeometry) -> Result<PpSinogram> {
    to_pprt_units(&subspace_resample(noisy, geom)?, geom)
}

/// Preconditioned, weighted FISTA-TV on a resampled sinogram.
///
/// `tv_lambda` is the TV prox weight per iteration: the solver runs on the
/// objective `|A f - p~|^2 + lambda L_f TV(f)`, where `L_f` is the power-method
/// bound, so the weight keeps its meaning when the data scale changes.
pub fn reconstruct_stage(
    pp: &PpSinogram,
    geom: &ScanGeometry,
    solver: &SolverConfig,
    photons: Option<f64>,
) -> Result<(Image, SolveReport)> {
    let weights = match (solver.weighting, photons) {
        (true, Some(i)) => Some(surrogate_weights(pp, geom, i, geom.detector_bias.at(0))?),
        _ => None,
    };
    let sys = ModifiedSystem::new(
        pp,
        weights.as_ref(),
        None,
        solver.precondition,
        geom.detector_spacing,
    )?;
    let opts = FistaOptions {
        lambda: geom.tv_lambda * sys.lipschitz,
        max_iters: solver.iterations,
        tv_inner_iters: solver.tv_inner_iters,
        clamp_output: solver.clamp_output,
    };
    fista_tv_operator(&sys, &sys.data, sys.lipschitz, sys.pixel_pitch(), &opts)
}

#[derive(Clone, Debug)]
pub struct Baselines {
    pub fbp: Image,
    pub fbp_tv: Image,
    pub fbp_tv_weight: f64,
}

pub fn baseline_stage(
    noisy: &PbSinogram,
    geom: &ScanGeometry,
    cfg: &BaselineConfig,
    truth: Option<&Image>,
) -> Result<Baselines> {
    let fbp = fbp_baseline(noisy, geom)?;
    let tv = |w: f64| fbp_tv_baseline(noisy, geom, w, cfg.tv_inner_iters);
    let (fbp_tv, fbp_tv_weight) = match truth {
        Some(t) if !cfg.tv_weights.is_empty() => {
            let mut best: Option<(Image, f64, f64)> = None;
            for &w in &cfg.tv_weights {
                let img = tv(w)?;
                let score = psnr_db(&img.data, &t.data);
                if best.as_ref().is_none_or(|b| score > b.2) {
                    best = Some((img, w, score));
                }
            }
            let (img, w, _) = best.expect("non-empty candidates");
            (img, w)
        }
        _ => (tv(geom.tv_lambda)?, geom.tv_lambda),
    };
    Ok(Baselines {
        fbp,
        fbp_tv,
        fbp_tv_weight,
    })
}

/// Everything produced by one run.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub simulation: Simulation,
    pub pp: PpSinogram,
    pub reconstruction: Image,
    pub report: SolveReport,
    pub baselines: Baselines,
    pub metrics: Vec<MetricReport>,
}

pub fn metrics_for(truth: &Image, images: &[(&str, &Image)]) -> Vec<MetricReport> {
    images
        .iter()
        .map(|(label, img)| MetricReport::compute(*label, &img.data, &truth.data))
        .collect()
}

pub fn run(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let sim = simulate(cfg)?;
    let geom = &sim.geometry;
    let pp = resample_stage(&sim.noisy, geom)?;
    let (image, report) = reconstruct_stage(&pp, geom, &cfg.solver, sim.photons)?;
    let baselines = baseline_stage(&sim.noisy, geom, &cfg.baseline, Some(&sim.phantom))?;
    let metrics = metrics_for(
        &sim.phantom,
        &[
            ("pp_fista_tv", &image),
            ("fbp", &baselines.fbp),
            ("fbp_tv", &baselines.fbp_tv),
        ],
    );
    Ok(PipelineRun {
        simulation: sim,
        pp,
        reconstruction: image,
        report,
        baselines,
        metrics,
    })
}

/// CSV with columns `method,snr_db,psnr_db,ssim`.
pub fn metrics_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("method,snr_db,psnr_db,ssim\n");
    for r in reports {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.label, r.snr_db, r.psnr_db, r.ssim
        ));
    }
    out
}
