//! Statistical stand-in for a LIDAR obstacle tracker: geometric occlusion
//! plus zero-mean Gaussian estimation noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dovs::{Frame, ObstacleEstimate};
use crate::sim::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub position_noise_sigma: f64,
    /// Applied to the linear speed, and with the same magnitude in rad/s to
    /// the angular rate.
    pub velocity_noise_sigma: f64,
    pub heading_noise_sigma: f64,
    pub occlusion_enabled: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            position_noise_sigma: 0.03,
            velocity_noise_sigma: 0.05,
            heading_noise_sigma: 0.05,
            occlusion_enabled: true,
        }
    }
}

impl SensorConfig {
    pub fn perfect() -> Self {
        Self {
            position_noise_sigma: 0.0,
            velocity_noise_sigma: 0.0,
            heading_noise_sigma: 0.0,
            occlusion_enabled: false,
        }
    }
}

/// Whether the segment a-b passes through the disc (c, r).
pub fn segment_hits_disc(a: (f64, f64), b: (f64, f64), c: (f64, f64), r: f64) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((c.0 - a.0) * dx + (c.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (px, py) = (a.0 + t * dx, a.1 + t * dy);
    (px - c.0).hypot(py - c.1) < r
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// World-frame estimates of every obstacle, radii enlarged by the robot
/// radius. Noise is drawn for every obstacle so the stream does not depend
/// on visibility.
pub fn sense<R: Rng + ?Sized>(world: &World, cfg: &SensorConfig, rng: &mut R) -> Vec<ObstacleEstimate<f64>> {
    let eye = world.robot.pose.position();
    world
        .obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let center = o.pose.position();
            let visible = !cfg.occlusion_enabled
                || !world
                    .obstacles
                    .iter()
                    .enumerate()
                    .any(|(k, other)| k != i && segment_hits_disc(eye, center, other.pose.position(), other.radius));
            let nx = gaussian(rng, cfg.position_noise_sigma);
            let ny = gaussian(rng, cfg.position_noise_sigma);
            let nh = gaussian(rng, cfg.heading_noise_sigma);
            let nv = gaussian(rng, cfg.velocity_noise_sigma);
            let nw = gaussian(rng, cfg.velocity_noise_sigma);
            ObstacleEstimate {
                x: o.pose.x + nx,
                y: o.pose.y + ny,
                radius: o.radius + world.robot.radius,
                heading: crate::scalar::wrap_angle(o.pose.theta + nh),
                v: o.commanded.v + nv,
                w: o.commanded.w + nw,
                visible,
                frame: Frame::World,
            }
        })
        .collect()
}
