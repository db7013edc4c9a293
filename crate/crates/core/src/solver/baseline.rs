use serde::{Deserialize, Serialize};

use crate::assignment::CostCache;
use crate::optics::CameraIntrinsics;

/// How focus distances are seeded before optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitPolicy {
    Closest,
    #[default]
    Avg,
    Midrange,
}

/// Keeps a focus distance strictly beyond the focal length.
fn admissible(s: f64, intr: &CameraIntrinsics) -> f64 {
    if s > intr.focal_length {
        s
    } else {
        intr.focal_length * (1.0 + 1e-9)
    }
}

/// Nearest visible depth.
pub fn baseline_closest(depths: &[f64], intr: &CameraIntrinsics) -> Option<f64> {
    let d = depths.iter().copied().reduce(f64::min)?;
    Some(admissible(d, intr))
}

/// Mean visible depth.
pub fn baseline_avg(depths: &[f64], intr: &CameraIntrinsics) -> Option<f64> {
    if depths.is_empty() {
        return None;
    }
    let mean = depths.iter().sum::<f64>() / depths.len() as f64;
    Some(admissible(mean, intr))
}

/// Halfway between the nearest and farthest visible depth.
pub fn baseline_midrange(depths: &[f64], intr: &CameraIntrinsics) -> Option<f64> {
    let lo = depths.iter().copied().reduce(f64::min)?;
    let hi = depths.iter().copied().reduce(f64::max)?;
    Some(admissible(0.5 * (lo + hi), intr))
}

/// Depths of every sample camera `c` sees, in sample order.
pub fn visible_depths(cache: &CostCache, c: usize) -> Vec<f64> {
    cache
        .visible_samples(c)
        .iter()
        .filter_map(|&p| cache.depth(c, p as usize))
        .collect()
}

/// Per-camera focus from a single-view rule; blind cameras stay unset.
pub fn initial_focus(policy: InitPolicy, cache: &CostCache) -> Vec<Option<f64>> {
    (0..cache.num_cameras())
        .map(|c| {
            let depths = visible_depths(cache, c);
            let intr = &cache.camera(c).intrinsics;
            match policy {
                InitPolicy::Closest => baseline_closest(&depths, intr),
                InitPolicy::Avg => baseline_avg(&depths, intr),
                InitPolicy::Midrange => baseline_midrange(&depths, intr),
            }
        })
        .collect()
}
