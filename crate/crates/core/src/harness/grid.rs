use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::TriangleMesh;
use crate::optics::{CameraIntrinsics, CameraView};
use crate::solver::CameraGraph;

/// Cameras on a vertical cylinder around the subject: `angular` columns by
/// `vertical` rows at `radius` mm from the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub angular: usize,
    pub vertical: usize,
    pub radius: f64,
    /// `[z_min, z_max]` in mm; `None` spans the mesh bounds plus 5%.
    #[serde(default)]
    pub extent: Option<[f64; 2]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            angular: 24,
            vertical: 7,
            radius: 750.0,
            extent: None,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.angular == 0 || self.vertical == 0 {
            return Err(HarnessError::Grid(format!("{}x{} grid has no cameras", self.vertical, self.angular)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(HarnessError::Grid(format!("radius must be positive, got {}", self.radius)));
        }
        if let Some([lo, hi]) = self.extent {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(HarnessError::Grid(format!("bad vertical extent [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn cameras(&self) -> usize {
        self.angular * self.vertical
    }

    /// Vertical range used for `mesh`.
    pub fn resolved_extent(&self, mesh: &TriangleMesh) -> [f64; 2] {
        self.extent.unwrap_or_else(|| {
            let (lo, hi) = mesh.bounding_box();
            let pad = 0.025 * (hi.z - lo.z);
            [lo.z - pad, hi.z + pad]
        })
    }

    /// Row spacing over column arc length.
    pub fn spacing_aspect(&self, extent: [f64; 2]) -> f64 {
        let dz = (extent[1] - extent[0]) / self.vertical as f64;
        let arc = 2.0 * PI * self.radius / self.angular as f64;
        dz / arc
    }
}

/// Camera `j * angular + i` sits at angle `2πi/angular` around the vertical
/// axis through the mesh's bounding-box centre, at the centre of the `j`-th
/// of `vertical` equal height bands, looking horizontally at the axis.
/// Angular neighbours wrap around; vertical neighbours do not.
pub fn generate_cylindrical_grid(
    spec: &GridSpec,
    mesh: &TriangleMesh,
    intrinsics: &CameraIntrinsics,
) -> Result<(Vec<CameraView>, CameraGraph), HarnessError> {
    spec.validate()?;
    let (lo, hi) = mesh.bounding_box();
    if !(hi.x > lo.x || hi.y > lo.y || hi.z > lo.z) {
        return Err(HarnessError::Grid("mesh bounding box is a single point".into()));
    }
    let [z_min, z_max] = spec.resolved_extent(mesh);
    let axis = (0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let (a, z) = (spec.angular, spec.vertical);
    let mut cameras = Vec::with_capacity(a * z);
    for j in 0..z {
        let height = z_min + (j as f64 + 0.5) * (z_max - z_min) / z as f64;
        for i in 0..a {
            let theta = 2.0 * PI * i as f64 / a as f64;
            let (s, c) = theta.sin_cos();
            let position = Point3::new(axis.0 + spec.radius * c, axis.1 + spec.radius * s, height);
            let forward = Vector3::new(-c, -s, 0.0);
            cameras.push(CameraView::new((j * a + i) as u32, position, forward, Vector3::z(), *intrinsics)?);
        }
    }
    let mut edges = Vec::new();
    for j in 0..z {
        for i in 0..a {
            let id = (j * a + i) as u32;
            edges.push((id, (j * a + (i + 1) % a) as u32));
            if j + 1 < z {
                edges.push((id, ((j + 1) * a + i) as u32));
            }
        }
    }
    Ok((cameras, CameraGraph::new(a * z, edges)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synthetic;

    fn body() -> TriangleMesh {
        synthetic::capsule(Point3::new(0.0, 0.0, 850.0), 150.0, 1700.0, 32, 6).unwrap()
    }

    #[test]
    fn paper_rig_has_168_cameras() {
        let (cams, graph) = generate_cylindrical_grid(&GridSpec::default(), &body(), &CameraIntrinsics::default()).unwrap();
        assert_eq!(cams.len(), 168);
        assert_eq!(graph.edges.len(), 7 * 24 + 6 * 24);
        assert!(cams.iter().enumerate().all(|(i, c)| c.id as usize == i));
    }

    #[test]
    fn single_camera_looks_at_axis_from_plus_x() {
        let spec = GridSpec {
            angular: 1,
            vertical: 1,
            radius: 750.0,
            extent: None,
        };
        let (cams, graph) = generate_cylindrical_grid(&spec, &body(), &CameraIntrinsics::default()).unwrap();
        assert_eq!(cams.len(), 1);
        assert!(graph.edges.is_empty());
        let c = &cams[0];
        assert!((c.position - Point3::new(750.0, 0.0, 850.0)).norm() < 1e-9);
        assert!((c.forward + Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn small_grid_edge_count() {
        let spec = GridSpec {
            angular: 4,
            vertical: 2,
            radius: 500.0,
            extent: Some([0.0, 100.0]),
        };
        let (cams, graph) = generate_cylindrical_grid(&spec, &body(), &CameraIntrinsics::default()).unwrap();
        assert_eq!(graph.edges.len(), 12);
        assert_eq!(cams[0].position.z, 25.0);
        assert_eq!(cams[4].position.z, 75.0);
    }

    #[test]
    fn rejects_empty_grids() {
        let spec = GridSpec {
            angular: 0,
            ..Default::default()
        };
        assert!(generate_cylindrical_grid(&spec, &body(), &CameraIntrinsics::default()).is_err());
    }

    #[test]
    fn aspect_of_paper_rig() {
        let spec = GridSpec::default();
        let a = spec.spacing_aspect([0.0, 1750.0]);
        assert!((a - 250.0 / (2.0 * PI * 750.0 / 24.0)).abs() < 1e-12);
    }
}
