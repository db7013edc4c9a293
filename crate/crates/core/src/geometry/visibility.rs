use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{segment_blocked_brute_force, Bvh, GeometryError, SurfaceSample, TriangleMesh};
use crate::optics::CameraView;

/// Distance (mm) the occlusion segment stops short of the sample.
pub const OCCLUSION_OFFSET: f64 = 1e-3;

/// Dense camera × sample visibility bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityTable {
    cameras: usize,
    samples: usize,
    bits: Vec<bool>,
}

/// The three independent conditions a visible sample satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VisibilityClauses {
    pub in_image: bool,
    pub front_facing: bool,
    pub unoccluded: bool,
}

impl VisibilityClauses {
    pub fn visible(&self) -> bool {
        self.in_image && self.front_facing && self.unoccluded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionBackend {
    Bvh,
    /// Test every triangle; only practical for small meshes.
    BruteForce,
}

/// Sidecar written next to an exported bitmap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityMeta {
    pub cameras: usize,
    pub samples: usize,
    pub seed: u64,
    /// Row-major (camera-major) bits, least significant bit first within each byte.
    pub layout: String,
    /// Lowercase hex SHA-256 of the bitmap file.
    pub sha256: String,
}

const LAYOUT: &str = "camera-major, lsb-first";

impl VisibilityTable {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        let cameras = rows.len();
        let samples = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == samples), "ragged visibility rows");
        Self {
            cameras,
            samples,
            bits: rows.into_iter().flatten().collect(),
        }
    }

    pub fn cameras(&self) -> usize {
        self.cameras
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn get(&self, camera: usize, sample: usize) -> bool {
        self.bits[camera * self.samples + sample]
    }

    pub fn row(&self, camera: usize) -> &[bool] {
        &self.bits[camera * self.samples..(camera + 1) * self.samples]
    }

    /// Samples seen by each camera.
    pub fn per_camera_counts(&self) -> Vec<usize> {
        (0..self.cameras)
            .map(|c| self.row(c).iter().filter(|&&b| b).count())
            .collect()
    }

    /// Cameras that see no sample at all.
    pub fn blind_cameras(&self) -> Vec<usize> {
        self.per_camera_counts()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn to_bitmap(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bitmap(bytes: &[u8], cameras: usize, samples: usize) -> Result<Self, GeometryError> {
        let n = cameras * samples;
        if bytes.len() != n.div_ceil(8) {
            return Err(GeometryError::CacheMismatch(format!(
                "expected {} bytes, found {}",
                n.div_ceil(8),
                bytes.len()
            )));
        }
        let bits = (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect();
        Ok(Self {
            cameras,
            samples,
            bits,
        })
    }

    /// Writes the packed bitmap and its JSON sidecar.
    pub fn export(&self, bin_path: &Path, json_path: &Path, seed: u64) -> Result<VisibilityMeta, GeometryError> {
        let bytes = self.to_bitmap();
        let meta = VisibilityMeta {
            cameras: self.cameras,
            samples: self.samples,
            seed,
            layout: LAYOUT.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        };
        let io = |e: std::io::Error| GeometryError::Io(e.to_string());
        fs::write(bin_path, &bytes).map_err(io)?;
        let json = serde_json::to_string_pretty(&meta).map_err(|e| GeometryError::Io(e.to_string()))?;
        fs::write(json_path, json + "\n").map_err(io)?;
        Ok(meta)
    }

    /// Reads a cached table, rejecting it if the checksum or shape disagree.
    pub fn import(bin_path: &Path, json_path: &Path) -> Result<(Self, VisibilityMeta), GeometryError> {
        let io = |e: std::io::Error| GeometryError::Io(e.to_string());
        let meta: VisibilityMeta = serde_json::from_slice(&fs::read(json_path).map_err(io)?)
            .map_err(|e| GeometryError::Parse(e.to_string()))?;
        let bytes = fs::read(bin_path).map_err(io)?;
        let digest = hex::encode(Sha256::digest(&bytes));
        if digest != meta.sha256 {
            return Err(GeometryError::CacheMismatch("checksum differs".into()));
        }
        let table = Self::from_bitmap(&bytes, meta.cameras, meta.samples)?;
        Ok((table, meta))
    }
}

/// Evaluates each visibility condition separately for one camera/sample pair.
pub fn visibility_clauses(
    sample: &SurfaceSample,
    camera: &CameraView,
    occluded: impl Fn(&nalgebra::Point3<f64>, &nalgebra::Vector3<f64>, f64) -> bool,
) -> VisibilityClauses {
    let in_image = camera.in_image(&sample.position);
    let front_facing = camera.forward.dot(&sample.normal) > 0.0;
    let seg = sample.position - camera.position;
    let len = seg.norm();
    let unoccluded = if len <= OCCLUSION_OFFSET {
        true
    } else {
        !occluded(&camera.position, &seg, 1.0 - OCCLUSION_OFFSET / len)
    };
    VisibilityClauses {
        in_image,
        front_facing,
        unoccluded,
    }
}

pub fn build_visibility(mesh: &TriangleMesh, samples: &[SurfaceSample], cameras: &[CameraView]) -> VisibilityTable {
    build_visibility_with(mesh, samples, cameras, OcclusionBackend::Bvh)
}

/// Rows are computed in parallel per camera; the result does not depend on scheduling.
pub fn build_visibility_with(
    mesh: &TriangleMesh,
    samples: &[SurfaceSample],
    cameras: &[CameraView],
    backend: OcclusionBackend,
) -> VisibilityTable {
    let bvh = match backend {
        OcclusionBackend::Bvh => Some(Bvh::build(mesh)),
        OcclusionBackend::BruteForce => None,
    };
    let rows: Vec<Vec<bool>> = cameras
        .par_iter()
        .map(|cam| {
            samples
                .iter()
                .map(|s| {
                    // Cheap clauses first so the ray query only runs when needed.
                    if !(cam.forward.dot(&s.normal) > 0.0) || !cam.in_image(&s.position) {
                        return false;
                    }
                    visibility_clauses(s, cam, |o, d, t| match &bvh {
                        Some(b) => b.segment_blocked(o, d, t),
                        None => segment_blocked_brute_force(mesh, o, d, t),
                    })
                    .visible()
                })
                .collect()
        })
        .collect();
    let table = VisibilityTable::from_rows(rows);
    let blind = table.blind_cameras();
    if !blind.is_empty() {
        log::info!("{} camera(s) see no samples: {:?}", blind.len(), blind);
    }
    table
}
