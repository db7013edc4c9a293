//! Bundled test subjects. All generators produce inward-wound meshes in mm
//! with +z up.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, Orientation, TriangleMesh};
use crate::optics::{CameraIntrinsics, CameraView, OpticsError};

/// Revolves a profile of `(radius, height)` pairs about the z axis through
/// `center`. Profile ends with zero radius become single pole vertices.
fn revolve(center: Point3<f64>, profile: &[(f64, f64)], segments: usize) -> Result<TriangleMesh, GeometryError> {
    let segments = segments.max(3);
    let mut vertices = Vec::new();
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for &(rho, z) in profile {
        if rho == 0.0 {
            rows.push(vec![vertices.len() as u32]);
            vertices.push(Point3::new(center.x, center.y, center.z + z));
        } else {
            let row = (0..segments)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / segments as f64;
                    vertices.push(Point3::new(center.x + rho * t.cos(), center.y + rho * t.sin(), center.z + z));
                    (vertices.len() - 1) as u32
                })
                .collect();
            rows.push(row);
        }
    }
    let mut triangles = Vec::new();
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for i in 0..segments {
            let j = (i + 1) % segments;
            match (a.len(), b.len()) {
                (1, 1) => {}
                (1, _) => triangles.push([a[0], b[j], b[i]]),
                (_, 1) => triangles.push([a[i], a[j], b[0]]),
                _ => {
                    triangles.push([a[i], a[j], b[j]]);
                    triangles.push([a[i], b[j], b[i]]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles, None, Orientation::Auto)
}

pub fn uv_sphere(center: Point3<f64>, radius: f64, segments: usize, rings: usize) -> Result<TriangleMesh, GeometryError> {
    let rings = rings.max(2);
    let profile: Vec<(f64, f64)> = (0..=rings)
        .map(|k| {
            let phi = PI * k as f64 / rings as f64;
            let rho = if k == 0 || k == rings { 0.0 } else { radius * phi.sin() };
            (rho, -radius * phi.cos())
        })
        .collect();
    revolve(center, &profile, segments)
}

/// Vertical capsule of total height `height` (cylinder plus two
/// hemispherical caps) centred on `center`; `rings` is per cap.
pub fn capsule(center: Point3<f64>, radius: f64, height: f64, segments: usize, rings: usize) -> Result<TriangleMesh, GeometryError> {
    let rings = rings.max(1);
    let half = (0.5 * height - radius).max(0.0);
    let mut profile = Vec::with_capacity(2 * rings + 2);
    for k in 0..=rings {
        let phi = 0.5 * PI * k as f64 / rings as f64;
        let rho = if k == 0 { 0.0 } else { radius * phi.sin() };
        profile.push((rho, -half - radius * phi.cos()));
    }
    for k in (0..=rings).rev() {
        let phi = 0.5 * PI * k as f64 / rings as f64;
        let rho = if k == 0 { 0.0 } else { radius * phi.sin() };
        profile.push((rho, half + radius * phi.cos()));
    }
    revolve(center, &profile, segments)
}

/// Closed vertical cylinder with flat caps, `stacks` bands along its side.
pub fn cylinder(center: Point3<f64>, radius: f64, height: f64, segments: usize, stacks: usize) -> Result<TriangleMesh, GeometryError> {
    let stacks = stacks.max(1);
    let mut profile = vec![(0.0, -0.5 * height)];
    profile.extend((0..=stacks).map(|k| (radius, -0.5 * height + height * k as f64 / stacks as f64)));
    profile.push((0.0, 0.5 * height));
    revolve(center, &profile, segments)
}

/// Standing figure built from capsules and a sphere: legs, torso, arms and
/// head, about 1.75 m tall with its feet at z = 0.
pub fn capsule_body() -> Result<TriangleMesh, GeometryError> {
    let (seg, rings) = (48, 8);
    let parts = [
        capsule(Point3::new(-95.0, 0.0, 430.0), 70.0, 860.0, seg, rings)?,
        capsule(Point3::new(95.0, 0.0, 430.0), 70.0, 860.0, seg, rings)?,
        capsule(Point3::new(0.0, 0.0, 1150.0), 150.0, 700.0, seg, rings)?,
        capsule(Point3::new(-240.0, 0.0, 1130.0), 45.0, 640.0, seg, rings)?,
        capsule(Point3::new(240.0, 0.0, 1130.0), 45.0, 640.0, seg, rings)?,
        uv_sphere(Point3::new(0.0, 0.0, 1640.0), 105.0, seg, 2 * rings)?,
    ];
    TriangleMesh::merge(&parts)
}

/// Axis-aligned rectangle in the plane `y = y`, facing the `-y` side (its
/// inward normal is `+y`).
pub fn wall(x: [f64; 2], z: [f64; 2], y: f64) -> Result<TriangleMesh, GeometryError> {
    let v = vec![
        Point3::new(x[0], y, z[0]),
        Point3::new(x[1], y, z[0]),
        Point3::new(x[1], y, z[1]),
        Point3::new(x[0], y, z[1]),
    ];
    // (v1 - v0) × (v2 - v0) = +x × +z = -y, so wind the other way.
    TriangleMesh::new(v, vec![[0, 2, 1], [0, 3, 2]], None, Orientation::InwardWound)
}

/// Two walls at different depths and two cameras on one axis, the second
/// 50 mm behind the first. One depth of field cannot cover both walls, so a
/// lone camera must give one of them up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapScene {
    pub near_depth: f64,
    pub far_depth: f64,
    pub setback: f64,
}

impl Default for SwapScene {
    fn default() -> Self {
        Self {
            near_depth: 600.0,
            far_depth: 1600.0,
            setback: 50.0,
        }
    }
}

impl SwapScene {
    pub fn mesh(&self) -> Result<TriangleMesh, GeometryError> {
        TriangleMesh::merge(&[
            wall([-85.0, -5.0], [-100.0, 100.0], self.near_depth)?,
            wall([5.0, 230.0], [-100.0, 100.0], self.far_depth)?,
        ])
    }

    pub fn cameras(&self, intrinsics: &CameraIntrinsics) -> Result<Vec<CameraView>, OpticsError> {
        [0.0, -self.setback]
            .iter()
            .enumerate()
            .map(|(id, &y)| CameraView::new(id as u32, Point3::new(0.0, y, 0.0), Vector3::y(), Vector3::z(), *intrinsics))
            .collect()
    }
}
