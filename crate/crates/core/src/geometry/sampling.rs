use nalgebra::{Point3, Vector3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, TriangleMesh};

/// A Monte-Carlo point on the surface carrying an equal share of its area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub position: Point3<f64>,
    /// Unit inward normal of the source triangle.
    pub normal: Vector3<f64>,
    /// Area represented by this sample (mm²).
    pub weight: f64,
    pub source_triangle: u32,
}

/// Draws `count` area-uniform samples. Triangles are picked with probability
/// proportional to area and points are placed uniformly inside them using the
/// square-root barycentric map. Output order is the draw order.
pub fn sample_surface(
    mesh: &TriangleMesh,
    count: usize,
    seed: u64,
) -> Result<Vec<SurfaceSample>, GeometryError> {
    if count == 0 {
        return Err(GeometryError::NoSamples);
    }
    let picker = WeightedIndex::new(mesh.triangle_areas()).map_err(|_| GeometryError::ZeroArea)?;
    let weight = mesh.total_area() / count as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    Ok((0..count)
        .map(|_| {
            let t = picker.sample(&mut rng);
            let [a, b, c] = mesh.triangle_vertices(t);
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let su = r1.sqrt();
            let (wa, wb, wc) = (1.0 - su, su * (1.0 - r2), su * r2);
            SurfaceSample {
                position: Point3::from(a.coords * wa + b.coords * wb + c.coords * wc),
                normal: mesh.face_normals()[t],
                weight,
                source_triangle: t as u32,
            }
        })
        .collect())
}
