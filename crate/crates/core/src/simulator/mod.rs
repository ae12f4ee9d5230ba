//! Phantoms, parallel- and fan-beam projection, and transmission noise.

mod fan;
mod noise;
mod phantom;
mod projector;

pub use fan::{fan_to_parallel, project_fan, rebin_fan_to_pb, FanGeometry, FanSinogram};
pub use noise::{add_noise, add_noise_array, calibrate_photons, NoiseLevel, NoisyScan, RawCounts};
pub use phantom::{phantom_disk, phantom_shepp_logan, shepp_logan_ellipses, Ellipse, Phantom};
pub use projector::{project_image, project_pb, ray_integral};
