use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::Point3;
use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType, ScalarType,
};
use ply_rs::writer::Writer;

use super::HarnessError;
use crate::geometry::SurfaceSample;
use crate::optics::CameraView;

/// Linear blue (0) to red (1) ramp.
pub fn cost_color(cost: f64) -> [u8; 3] {
    let t = cost.clamp(0.0, 1.0);
    [(255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8]
}

fn scalar(name: &str, ty: ScalarType) -> PropertyDef {
    PropertyDef::new(name.to_string(), PropertyType::Scalar(ty))
}

fn write_vertices(path: &Path, properties: Vec<PropertyDef>, vertices: Vec<DefaultElement>) -> Result<(), HarnessError> {
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = Encoding::BinaryLittleEndian;
    let mut element = ElementDef::new("vertex".to_string());
    for p in properties {
        element.properties.add(p);
    }
    ply.header.elements.add(element);
    ply.payload.insert("vertex".to_string(), vertices);
    ply.make_consistent()
        .map_err(|e| HarnessError::Config(format!("inconsistent PLY: {e:?}")))?;
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    Writer::new()
        .write_ply(&mut out, &mut ply)
        .map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

fn position_properties() -> Vec<PropertyDef> {
    vec![
        scalar("x", ScalarType::Double),
        scalar("y", ScalarType::Double),
        scalar("z", ScalarType::Double),
        scalar("red", ScalarType::UChar),
        scalar("green", ScalarType::UChar),
        scalar("blue", ScalarType::UChar),
    ]
}

fn vertex(p: &Point3<f64>, rgb: [u8; 3]) -> DefaultElement {
    let mut v = DefaultElement::new();
    v.insert("x".into(), Property::Double(p.x));
    v.insert("y".into(), Property::Double(p.y));
    v.insert("z".into(), Property::Double(p.z));
    v.insert("red".into(), Property::UChar(rgb[0]));
    v.insert("green".into(), Property::UChar(rgb[1]));
    v.insert("blue".into(), Property::UChar(rgb[2]));
    v
}

/// Sample positions coloured by cost, with the exact cost as a `cost`
/// double property.
pub fn export_cost_pointcloud(samples: &[SurfaceSample], costs: &[f64], path: &Path) -> Result<(), HarnessError> {
    if samples.len() != costs.len() {
        return Err(HarnessError::Config(format!("{} samples but {} costs", samples.len(), costs.len())));
    }
    if let Some(c) = costs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(HarnessError::Config(format!("cost {c} outside [0, 1]")));
    }
    let mut properties = position_properties();
    properties.push(scalar("cost", ScalarType::Double));
    let vertices = samples
        .iter()
        .zip(costs)
        .map(|(s, &c)| {
            let mut v = vertex(&s.position, cost_color(c));
            v.insert("cost".into(), Property::Double(c));
            v
        })
        .collect();
    write_vertices(path, properties, vertices)
}

/// Positions and costs from a file written by [`export_cost_pointcloud`].
pub fn read_cost_pointcloud(path: &Path) -> Result<(Vec<Point3<f64>>, Vec<f64>), HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let ply = Parser::<DefaultElement>::new()
        .read_ply(&mut BufReader::new(file))
        .map_err(|e| HarnessError::io(path, e))?;
    let bad = || HarnessError::Config(format!("{} is not a cost point cloud", path.display()));
    let get = |v: &DefaultElement, key: &str| match v.get(key) {
        Some(Property::Double(x)) => Some(*x),
        _ => None,
    };
    let mut points = Vec::new();
    let mut costs = Vec::new();
    for v in ply.payload.get("vertex").ok_or_else(bad)? {
        points.push(Point3::new(
            get(v, "x").ok_or_else(bad)?,
            get(v, "y").ok_or_else(bad)?,
            get(v, "z").ok_or_else(bad)?,
        ));
        costs.push(get(v, "cost").ok_or_else(bad)?);
    }
    Ok((points, costs))
}

/// One black point per focused camera, placed on its optical axis at the
/// focus distance, with the camera id and focus distance as properties.
pub fn export_camera_pointcloud(cameras: &[CameraView], focus: &[Option<f64>], path: &Path) -> Result<(), HarnessError> {
    let mut properties = position_properties();
    properties.push(scalar("camera", ScalarType::UInt));
    properties.push(scalar("focus", ScalarType::Double));
    let vertices = cameras
        .iter()
        .zip(focus)
        .filter_map(|(cam, s)| {
            let s = (*s)?;
            let mut v = vertex(&(cam.position + cam.forward * s), [0, 0, 0]);
            v.insert("camera".into(), Property::UInt(cam.id));
            v.insert("focus".into(), Property::Double(s));
            Some(v)
        })
        .collect();
    write_vertices(path, properties, vertices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn samples(n: usize) -> Vec<SurfaceSample> {
        (0..n)
            .map(|i| SurfaceSample {
                position: Point3::new(i as f64 * 0.1, -(i as f64), 1e-7 * i as f64),
                normal: Vector3::z(),
                weight: 1.0,
                source_triangle: i as u32,
            })
            .collect()
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(cost_color(0.0), [0, 0, 255]);
        assert_eq!(cost_color(1.0), [255, 0, 0]);
    }

    #[test]
    fn costs_survive_a_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cost.ply");
        let s = samples(50);
        let costs: Vec<f64> = (0..50).map(|i| (i as f64 / 49.0).powf(1.7) / 3.0 + 0.1875).collect();
        export_cost_pointcloud(&s, &costs, &path).unwrap();
        let (points, back) = read_cost_pointcloud(&path).unwrap();
        assert_eq!(back, costs);
        assert!(points.iter().zip(&s).all(|(p, s)| *p == s.position));
    }

    #[test]
    fn uniform_costs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.ply");
        export_cost_pointcloud(&samples(5), &[0.0; 5], &path).unwrap();
        assert_eq!(read_cost_pointcloud(&path).unwrap().1, vec![0.0; 5]);
        assert!(export_cost_pointcloud(&samples(2), &[0.5, 1.5], &path).is_err());
    }
}
