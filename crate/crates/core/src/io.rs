//! Array files: raw little-endian `f64` buffers with a JSON sidecar, plus
//! 16-bit PGM export for images.
//!
//! `name.f64` holds the row-major data and `name.f64.json` its [`Sidecar`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Crate version written into every sidecar.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub shape: [usize; 2],
    /// Logical index of storage element `[0, 0]` along each axis.
    pub index_origin: [i64; 2],
    pub dtype: String,
    pub axes: [String; 2],
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Sidecar {
    pub fn new(
        shape: (usize, usize),
        index_origin: [i64; 2],
        axes: [&str; 2],
        config_hash: &str,
        seed: u64,
    ) -> Self {
        Sidecar {
            shape: [shape.0, shape.1],
            index_origin,
            dtype: "f64".into(),
            axes: [axes[0].into(), axes[1].into()],
            config_hash: config_hash.into(),
            seed,
            version: VERSION.into(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Write `data` and its sidecar. The sidecar shape is taken from `data`.
pub fn write_array(path: &Path, data: &Array2<f64>, sidecar: &Sidecar) -> Result<()> {
    let mut meta = sidecar.clone();
    meta.shape = [data.nrows(), data.ncols()];
    let mut bytes = Vec::with_capacity(8 * data.len());
    for v in data.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, &bytes)?;
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    write_file(&sidecar_path(path), json.as_bytes())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_slice(&fs::read(sidecar_path(path))?)?)
}

pub fn read_array(path: &Path) -> Result<(Array2<f64>, Sidecar)> {
    let meta = read_sidecar(path)?;
    if meta.dtype != "f64" {
        return Err(Error::Format(format!("unsupported dtype {}", meta.dtype)));
    }
    let bytes = fs::read(path)?;
    let [r, c] = meta.shape;
    if bytes.len() != 8 * r * c {
        return Err(Error::Format(format!(
            "{}: {} bytes for shape {r} x {c}",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    let data = Array2::from_shape_vec((r, c), values).map_err(|e| Error::Format(e.to_string()))?;
    Ok((data, meta))
}

/// Plain (ASCII) 16-bit PGM with the gray levels spread over `[min, max]`.
pub fn pgm_string(data: &Array2<f64>) -> String {
    let (lo, hi) = data
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P2\n{} {}\n65535\n", data.ncols(), data.nrows());
    for row in data.rows() {
        let line: Vec<String> = row
            .iter()
            .map(|&v| {
                let g = if v.is_finite() {
                    ((v - lo) / span * 65535.0).round()
                } else {
                    0.0
                };
                (g.clamp(0.0, 65535.0) as u32).to_string()
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_pgm(path: &Path, data: &Array2<f64>) -> Result<()> {
    write_file(path, pgm_string(data).as_bytes())
}
