use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use super::GeometryError;

/// Triangles with area at or below this value (mm²) are dropped at construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Supported on-disk mesh encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

/// How triangle winding is interpreted when a mesh is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Decide by an area-weighted vote on the sign of each triangle's signed
    /// volume about the mesh centroid, then wind every triangle inward.
    Auto,
    /// Trust the winding: `(v1 - v0) × (v2 - v0)` already points into the solid.
    InwardWound,
}

/// Indexed triangle surface. Triangles are stored wound so that their
/// right-hand normal points inward.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    vertex_normals: Vec<Vector3<f64>>,
    face_normals: Vec<Vector3<f64>>,
    areas: Vec<f64>,
    total_area: f64,
    dropped_degenerate: usize,
}

impl TriangleMesh {
    /// Validates and orients raw geometry. Supplied vertex normals are only
    /// re-signed to agree with the inward faces; when absent they are
    /// area-weighted averages of the face normals.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[u32; 3]>,
        vertex_normals: Option<Vec<Vector3<f64>>>,
        orientation: Orientation,
    ) -> Result<Self, GeometryError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite { vertex: i });
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle: t,
                    index: bad as usize,
                    vertex_count: n,
                });
            }
        }

        let mut kept = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let area = wound_normal(&vertices, tri).norm() * 0.5;
            if area > DEGENERATE_AREA {
                kept.push(*tri);
                areas.push(area);
            }
        }
        let dropped_degenerate = triangles.len() - kept.len();
        if kept.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let total_area: f64 = areas.iter().sum();
        if !(total_area > 0.0) {
            return Err(GeometryError::ZeroArea);
        }

        let mut triangles = kept;
        if orientation == Orientation::Auto && outward_vote(&vertices, &triangles, &areas) > 0.0 {
            for tri in &mut triangles {
                tri.swap(1, 2);
            }
        }

        let face_normals: Vec<Vector3<f64>> = triangles
            .iter()
            .map(|tri| wound_normal(&vertices, tri).normalize())
            .collect();

        let mut accumulated = vec![Vector3::zeros(); n];
        for ((tri, normal), area) in triangles.iter().zip(&face_normals).zip(&areas) {
            for &i in tri {
                accumulated[i as usize] += normal * *area;
            }
        }
        let vertex_normals = match vertex_normals {
            Some(given) if given.len() == n => given
                .into_iter()
                .zip(&accumulated)
                .map(|(g, acc)| {
                    let g = g.try_normalize(1e-12).unwrap_or(Vector3::zeros());
                    if g.dot(acc) < 0.0 {
                        -g
                    } else {
                        g
                    }
                })
                .collect(),
            _ => accumulated
                .iter()
                .map(|acc| acc.try_normalize(1e-12).unwrap_or(Vector3::zeros()))
                .collect(),
        };

        Ok(Self {
            vertices,
            triangles,
            vertex_normals,
            face_normals,
            areas,
            total_area,
            dropped_degenerate,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Unit inward normal per vertex (zero for unreferenced vertices).
    pub fn vertex_normals(&self) -> &[Vector3<f64>] {
        &self.vertex_normals
    }

    /// Unit inward normal per triangle.
    pub fn face_normals(&self) -> &[Vector3<f64>] {
        &self.face_normals
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// Number of zero-area triangles removed during construction.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Axis-aligned bounds over referenced and unreferenced vertices alike.
    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Mesh rotated about the vertical (+z) axis through `pivot`.
    pub fn rotated_about_z(&self, angle: f64, pivot: Point3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), angle);
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v = pivot + rot * (*v - pivot);
        }
        for n in out.vertex_normals.iter_mut().chain(out.face_normals.iter_mut()) {
            *n = rot * *n;
        }
        out
    }

    /// Concatenates meshes, each keeping its own orientation.
    pub fn merge(parts: &[TriangleMesh]) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in parts {
            let offset = vertices.len() as u32;
            vertices.extend_from_slice(&part.vertices);
            triangles.extend(part.triangles.iter().map(|t| t.map(|i| i + offset)));
        }
        Self::new(vertices, triangles, None, Orientation::InwardWound)
    }
}

fn wound_normal(vertices: &[Point3<f64>], tri: &[u32; 3]) -> Vector3<f64> {
    let a = vertices[tri[0] as usize];
    let b = vertices[tri[1] as usize];
    let c = vertices[tri[2] as usize];
    (b - a).cross(&(c - a))
}

/// Positive when the current winding points away from the centroid for the
/// larger share of the surface.
fn outward_vote(vertices: &[Point3<f64>], triangles: &[[u32; 3]], areas: &[f64]) -> f64 {
    let mut centroid = Vector3::zeros();
    let mut total = 0.0;
    for (tri, area) in triangles.iter().zip(areas) {
        let c = tri
            .iter()
            .fold(Vector3::zeros(), |acc, &i| acc + vertices[i as usize].coords)
            / 3.0;
        centroid += c * *area;
        total += area;
    }
    let centroid = Point3::from(centroid / total);
    triangles
        .iter()
        .zip(areas)
        .map(|(tri, area)| {
            let a = vertices[tri[0] as usize] - centroid;
            let b = vertices[tri[1] as usize] - centroid;
            let c = vertices[tri[2] as usize] - centroid;
            let signed_volume = a.dot(&b.cross(&c));
            area * signed_volume.signum() * (signed_volume != 0.0) as u8 as f64
        })
        .sum()
}

/// Reads an OBJ or PLY file; positions are taken to be millimetres.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriangleMesh, GeometryError> {
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| GeometryError::UnknownFormat(path.display().to_string()))?;
    let (vertices, triangles, normals) = match format {
        MeshFormat::Obj => read_obj(path)?,
        MeshFormat::Ply => read_ply(path)?,
    };
    let mesh = TriangleMesh::new(vertices, triangles, normals, Orientation::Auto)?;
    if mesh.dropped_degenerate() > 0 {
        log::info!(
            "{}: dropped {} degenerate triangle(s)",
            path.display(),
            mesh.dropped_degenerate()
        );
    }
    Ok(mesh)
}

type RawMesh = (Vec<Point3<f64>>, Vec<[u32; 3]>, Option<Vec<Vector3<f64>>>);

fn read_obj(path: &Path) -> Result<RawMesh, GeometryError> {
    let options = tobj::LoadOptions {
        triangulate: true,
        ignore_points: true,
        ignore_lines: true,
        ..Default::default()
    };
    let (models, _materials) = tobj::load_obj(path, &options)
        .map_err(|e| GeometryError::Parse(format!("{}: {e}", path.display())))?;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut normals = Vec::new();
    let mut all_have_normals = true;
    for model in &models {
        let m = &model.mesh;
        let offset = vertices.len() as u32;
        vertices.extend(
            m.positions
                .chunks_exact(3)
                .map(|p| Point3::new(p[0], p[1], p[2])),
        );
        triangles.extend(
            m.indices
                .chunks_exact(3)
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        // Normals in OBJ are indexed separately; only per-position normals are usable.
        if m.normals.len() == m.positions.len() && m.normal_indices == m.indices {
            normals.extend(m.normals.chunks_exact(3).map(|n| Vector3::new(n[0], n[1], n[2])));
        } else {
            all_have_normals = false;
        }
    }
    let normals = (all_have_normals && normals.len() == vertices.len()).then_some(normals);
    Ok((vertices, triangles, normals))
}

fn read_ply(path: &Path) -> Result<RawMesh, GeometryError> {
    let file = File::open(path).map_err(|e| GeometryError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let parser = Parser::<DefaultElement>::new();
    let ply = parser
        .read_ply(&mut reader)
        .map_err(|e| GeometryError::Parse(format!("{}: {e}", path.display())))?;

    let vertex_elements = ply
        .payload
        .get("vertex")
        .ok_or_else(|| GeometryError::Parse("PLY has no vertex element".into()))?;
    let mut vertices = Vec::with_capacity(vertex_elements.len());
    let mut normals = Vec::with_capacity(vertex_elements.len());
    let mut has_normals = true;
    for v in vertex_elements {
        let coord = |key: &str| {
            v.get(key)
                .and_then(scalar)
                .ok_or_else(|| GeometryError::Parse(format!("vertex missing scalar '{key}'")))
        };
        vertices.push(Point3::new(coord("x")?, coord("y")?, coord("z")?));
        match (
            v.get("nx").and_then(scalar),
            v.get("ny").and_then(scalar),
            v.get("nz").and_then(scalar),
        ) {
            (Some(x), Some(y), Some(z)) => normals.push(Vector3::new(x, y, z)),
            _ => has_normals = false,
        }
    }

    let faces = ply
        .payload
        .get("face")
        .ok_or_else(|| GeometryError::Parse("PLY has no face element".into()))?;
    let mut triangles = Vec::with_capacity(faces.len());
    for f in faces {
        let indices = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(index_list)
            .ok_or_else(|| GeometryError::Parse("face missing vertex index list".into()))?;
        if indices.len() < 3 {
            return Err(GeometryError::Parse(format!("face with {} vertices", indices.len())));
        }
        // Fan-triangulate polygons.
        for i in 1..indices.len() - 1 {
            triangles.push([indices[0], indices[i], indices[i + 1]]);
        }
    }
    Ok((vertices, triangles, has_normals.then_some(normals)))
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<u32>> {
    fn conv<T: Copy + TryInto<u32>>(v: &[T]) -> Option<Vec<u32>> {
        v.iter().map(|&x| x.try_into().ok()).collect()
    }
    match p {
        Property::ListChar(v) => conv(v),
        Property::ListUChar(v) => conv(v),
        Property::ListShort(v) => conv(v),
        Property::ListUShort(v) => conv(v),
        Property::ListInt(v) => conv(v),
        Property::ListUInt(v) => conv(v),
        _ => None,
    }
}
