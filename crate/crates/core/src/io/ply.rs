//! ASCII PLY point clouds with `x`, `y`, `z` vertex properties.
//!
//! Coordinates are written as 32-bit `float` properties using the shortest
//! representation that parses back to the same `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::scalar::Real;

pub fn encode<T: Real>(cloud: &PointCloud<T>) -> Vec<u8> {
    let mut out = String::with_capacity(96 + cloud.len() * 30);
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in cloud.points() {
        let [x, y, z] = [p.x, p.y, p.z].map(|v| v.to_f64_lossy() as f32);
        out.push_str(&format!("{x} {y} {z}\n"));
    }
    out.into_bytes()
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<PointCloud<T>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::format("PLY", "not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::format("PLY", "missing magic"));
    }

    let mut vertices = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::format("PLY", "missing end_header"))?
            .trim();
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                if words.next() != Some("ascii") {
                    return Err(Error::format("PLY", "only ascii format is supported"));
                }
            }
            Some("element") => {
                in_vertex = words.next() == Some("vertex");
                if in_vertex {
                    let n: usize = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| Error::format("PLY", "bad vertex count"))?;
                    vertices = Some(n);
                } else if vertices.is_none() {
                    return Err(Error::format("PLY", "vertex element must come first"));
                }
            }
            Some("property") if in_vertex => {
                let name = words.last().unwrap_or_default();
                props.push(name.to_string());
            }
            Some("end_header") => break,
            _ => {}
        }
    }

    let n = vertices.ok_or_else(|| Error::format("PLY", "no vertex element"))?;
    let index = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::format("PLY", format!("missing property {name}")))
    };
    let (ix, iy, iz) = (index("x")?, index("y")?, index("z")?);

    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::format("PLY", format!("expected {n} vertices, got {i}")))?;
        let values: Vec<&str> = line.split_whitespace().collect();
        let get = |k: usize| -> Result<T> {
            let v: f64 = values
                .get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format("PLY", format!("bad vertex line {line:?}")))?;
            Ok(T::lit(v))
        };
        points.push(Point3::new(get(ix)?, get(iy)?, get(iz)?));
    }
    Ok(PointCloud::from_points(points))
}

pub fn read<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    decode(&fs::read(path)?)
}

pub fn write<T: Real>(path: &Path, cloud: &PointCloud<T>) -> Result<()> {
    fs::File::create(path)?.write_all(&encode(cloud))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_at_f32() {
        let cloud = PointCloud::from_points(vec![
            Point3::new(0.1f32, -2.5, 3.000_001),
            Point3::new(1e-7, 4.0, 0.33),
        ]);
        let back: PointCloud<f32> = decode(&encode(&cloud)).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn extra_properties_and_elements() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 1\nproperty uchar red\n\
                    property double z\nproperty double y\nproperty double x\nelement face 0\n\
                    property list uchar int vertex_indices\nend_header\n9 3 2 1\n";
        let cloud: PointCloud<f64> = decode(text.as_bytes()).unwrap();
        assert_eq!(cloud.points(), &[Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn rejects_binary_and_short_files() {
        let bin = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(decode::<f64>(bin.as_bytes()).is_err());
        let short = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n\
                     property float y\nproperty float z\nend_header\n1 2 3\n";
        assert!(decode::<f64>(short.as_bytes()).is_err());
    }
}
