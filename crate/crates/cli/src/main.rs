use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde_json::json;

use ppct::geometry::{Image, PbSinogram, PpSinogram, ScanGeometry};
use ppct::io::{read_array, write_array, write_pgm, Sidecar};
use ppct::pipeline::{
    baseline_stage, denoise_stage, metrics_csv, metrics_for, reconstruct_stage, resample_stage,
    simulate, PipelineConfig,
};
use ppct::pp::{condition_number_probe, PpTransform, ProbeSystem};
use ppct::recon::{adjointness_error, preconditioner_validation, ModifiedSystem};

#[derive(Parser)]
#[command(
    name = "ppct",
    version,
    about = "Pseudo-polar CT simulation and reconstruction"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output (and working) directory.
    #[arg(long, global = true, default_value = "ppct-out")]
    out: PathBuf,
    /// Config override `key=value` with dotted keys, e.g. `geometry.n_angles=90`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a phantom scan.
    Simulate,
    /// Project the sinogram onto the subspace.
    Denoise,
    /// Resample the sinogram onto the pseudo-polar grid.
    Resample,
    /// Reconstruct with preconditioned, weighted FISTA-TV.
    Reconstruct {
        /// Add a wall-clock column to solve.csv (makes it non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// FBP and FBP followed by TV denoising.
    BaselineFbp,
    /// Operator checks: adjointness, condition numbers, preconditioner structure.
    Validate {
        /// Grid size for the dense checks (at most 16).
        #[arg(long, default_value_t = 16)]
        n: usize,
    },
    /// Metrics of every reconstruction found in the output directory.
    Report,
}

struct Ctx {
    cfg: PipelineConfig,
    geom: ScanGeometry,
    hash: String,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => PipelineConfig::from_json(
                &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )?,
            None => PipelineConfig::default(),
        };
        for s in &common.set {
            cfg.apply_set(s)?;
        }
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        cfg.out_dir = Some(common.out.clone());
        let geom = cfg.geometry.scan_geometry()?;
        fs::create_dir_all(&common.out)
            .with_context(|| format!("creating {}", common.out.display()))?;
        let hash = cfg.hash();
        let mut resolved = cfg.clone();
        resolved.out_dir = None;
        fs::write(common.out.join("config.json"), resolved.to_json()? + "\n")?;
        Ok(Ctx {
            cfg,
            geom,
            hash,
            out: common.out.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn save(
        &self,
        name: &str,
        data: &Array2<f64>,
        origin: [i64; 2],
        axes: [&str; 2],
    ) -> Result<()> {
        let meta = Sidecar::new(data.dim(), origin, axes, &self.hash, self.cfg.seed);
        write_array(&self.path(&format!("{name}.f64")), data, &meta)?;
        write_pgm(&self.path(&format!("{name}.pgm")), data)?;
        Ok(())
    }

    /// Array written by an earlier run with the same configuration.
    fn load(&self, name: &str) -> Result<Option<Array2<f64>>> {
        let path = self.path(&format!("{name}.f64"));
        if !path.exists() {
            return Ok(None);
        }
        let (data, meta) = read_array(&path)?;
        Ok((meta.config_hash == self.hash).then_some(data))
    }

    fn save_image(&self, name: &str, img: &Image) -> Result<()> {
        let h = -(img.n() as i64 / 2);
        self.save(name, &img.data, [h, h], ["u", "v"])
    }

    fn save_pb(&self, name: &str, p: &PbSinogram) -> Result<()> {
        self.save(
            name,
            &p.data,
            [-(self.geom.n_detectors as i64 / 2), 0],
            ["m", "n"],
        )
    }

    fn save_pp(&self, name: &str, p: &PpSinogram) -> Result<()> {
        let n = self.geom.n_detectors as i64;
        self.save(name, &p.data, [-n, -n / 2], ["m", "n"])
    }

    fn truth(&self) -> Result<Image> {
        Ok(self.cfg.phantom.build(self.geom.n_detectors)?.image)
    }

    /// Noisy sinogram and photon count, from disk when available.
    fn sinogram(&self) -> Result<(PbSinogram, Option<f64>)> {
        if let (Some(data), Ok(meta)) = (
            self.load("sinogram")?,
            fs::read_to_string(self.path("simulation.json")),
        ) {
            let meta: serde_json::Value = serde_json::from_str(&meta)?;
            return Ok((PbSinogram { data }, meta["photons"].as_f64()));
        }
        self.run_simulate()
    }

    fn run_simulate(&self) -> Result<(PbSinogram, Option<f64>)> {
        let sim = simulate(&self.cfg)?;
        self.save_image("phantom", &sim.phantom)?;
        self.save_pb("sinogram_clean", &sim.clean)?;
        self.save_pb("sinogram", &sim.noisy)?;
        let summary = json!({
            "photons": sim.photons,
            "saturated": sim.saturated,
            "input_snr_db": ppct::metrics::snr_db(&sim.noisy.data, &sim.clean.data),
            "max_freq": sim.geometry.max_freq,
            "config_hash": self.hash,
        });
        write_json(&self.path("simulation.json"), &summary)?;
        Ok((sim.noisy, sim.photons))
    }

    fn pp_sinogram(&self) -> Result<(PpSinogram, Option<f64>)> {
        let (p, photons) = self.sinogram()?;
        if let Some(data) = self.load("pp_sinogram")? {
            return Ok((PpSinogram { data }, photons));
        }
        let pp = resample_stage(&p, &self.geom)?;
        self.save_pp("pp_sinogram", &pp)?;
        Ok((pp, photons))
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli.common)?;
    match cli.command {
        Command::Simulate => {
            ctx.run_simulate()?;
        }
        Command::Denoise => {
            let (p, _) = ctx.sinogram()?;
            ctx.save_pb("sinogram_denoised", &denoise_stage(&p, &ctx.geom)?)?;
        }
        Command::Resample => {
            let (p, _) = ctx.sinogram()?;
            ctx.save_pp("pp_sinogram", &resample_stage(&p, &ctx.geom)?)?;
        }
        Command::Reconstruct { timing } => {
            let (pp, photons) = ctx.pp_sinogram()?;
            let (img, report) = reconstruct_stage(&pp, &ctx.geom, &ctx.cfg.solver, photons)?;
            ctx.save_image("recon", &img)?;
            let csv = if timing {
                report.to_csv()
            } else {
                report.to_csv_untimed()
            };
            fs::write(ctx.path("solve.csv"), csv)?;
            let (p, _) = ctx.sinogram()?;
            let fbp = ppct::recon::fbp_baseline(&p, &ctx.geom)?;
            let truth = ctx.truth()?;
            let m = metrics_for(&truth, &[("pp_fista_tv", &img), ("fbp", &fbp)]);
            let csv = metrics_csv(&m);
            fs::write(ctx.path("metrics.csv"), &csv)?;
            print!("{csv}");
        }
        Command::BaselineFbp => {
            let (p, _) = ctx.sinogram()?;
            let truth = ctx.truth()?;
            let b = baseline_stage(&p, &ctx.geom, &ctx.cfg.baseline, Some(&truth))?;
            ctx.save_image("fbp", &b.fbp)?;
            ctx.save_image("fbp_tv", &b.fbp_tv)?;
            write_json(
                &ctx.path("baseline.json"),
                &json!({ "fbp_tv_weight": b.fbp_tv_weight }),
            )?;
        }
        Command::Validate { n } => {
            let report = validate(n, ctx.cfg.seed)?;
            write_json(&ctx.path("validate.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Report => {
            let truth = ctx.truth()?;
            let mut found = Vec::new();
            for name in ["recon", "fbp", "fbp_tv"] {
                if let Some(data) = ctx.load(name)? {
                    found.push((name, Image::new(data, ctx.geom.detector_spacing)?));
                }
            }
            if found.is_empty() {
                bail!(
                    "no reconstructions for this configuration in {}",
                    ctx.out.display()
                );
            }
            let label = |n: &str| if n == "recon" { "pp_fista_tv" } else { n }.to_string();
            let named: Vec<(String, &Image)> = found.iter().map(|(n, i)| (label(n), i)).collect();
            let refs: Vec<(&str, &Image)> = named.iter().map(|(n, i)| (n.as_str(), *i)).collect();
            let m = metrics_for(&truth, &refs);
            let csv = metrics_csv(&m);
            fs::write(ctx.path("metrics.csv"), &csv)?;
            write_json(&ctx.path("metrics.json"), &serde_json::to_value(&m)?)?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn validate(n: usize, seed: u64) -> Result<serde_json::Value> {
    if n > 16 {
        bail!("validate runs dense checks and needs n <= 16, got {n}");
    }
    let geom = ScanGeometry::new(n, 2 * n + 1);
    geom.validate()?;
    let tr = PpTransform::new(n)?;
    let plain = adjointness_error(&tr, 20, seed)?;
    let l = 2 * n + 1;
    let weights = Array2::from_shape_fn((l, l), |(i, j)| 0.5 + ((i * 7 + j * 3) % 5) as f64 / 4.0);
    let mask = Array2::from_shape_fn((l, l), |(i, j)| (i + 2 * j) % 7 != 0);
    let zero = PpSinogram {
        data: Array2::zeros((l, l)),
    };
    let sys = ModifiedSystem::new(
        &zero,
        Some(&weights),
        Some(&mask),
        true,
        geom.detector_spacing,
    )?;
    let stack = adjointness_error(&sys, 20, seed)?;
    let cond = |pre, sys| condition_number_probe(&geom, pre, sys);
    let pv = preconditioner_validation(n, 1e-5)?;
    Ok(json!({
        "n": n,
        "adjointness_pprt": plain,
        "adjointness_modified_system": stack,
        "cond_pp": cond(false, ProbeSystem::Pp)?,
        "cond_pp_preconditioned": cond(true, ProbeSystem::Pp)?,
        "cond_pb": cond(false, ProbeSystem::Pb)?,
        "cond_pb_preconditioned": cond(true, ProbeSystem::Pb)?,
        "diag_energy_fraction": pv.diag_energy_fraction,
        "periodicity_score": pv.periodicity_score,
    }))
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<ppct::Error>() {
        Some(ppct::Error::Geometry(_)) => "geometry",
        Some(ppct::Error::Shape { .. }) => "shape",
        Some(ppct::Error::Parameter { .. }) => "parameter",
        Some(ppct::Error::TooLarge { .. }) => "too_large",
        Some(ppct::Error::NonFinite { .. }) => "non_finite",
        Some(ppct::Error::ComplexOutput(_)) => "complex_output",
        Some(ppct::Error::FanCoverage(_)) => "fan_coverage",
        Some(ppct::Error::Io(_)) => "io",
        Some(ppct::Error::Json(_)) => "json",
        Some(ppct::Error::Format(_)) => "format",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "error",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = json!({ "error": "usage", "message": e.to_string().trim() });
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = json!({ "error": error_kind(&e), "message": format!("{e:#}") });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
