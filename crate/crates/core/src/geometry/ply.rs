//! PLY reader/writer for point clouds.
//!
//! Accepts ASCII and binary-little-endian files with at least x/y/z vertex
//! properties; nx/ny/nz are picked up as normals when present. Non-vertex
//! elements (faces, edges) are skipped. The writer emits ASCII with full
//! `f64` round-trip precision.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 => 4,
            ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { name: String, count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    /// 1-based line number of `end_header`.
    end_line: usize,
    /// Byte offset just past the `end_header` line terminator.
    data_offset: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::PlyParse {
        line,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut elements: Vec<Element> = Vec::new();
    let mut format = None;
    let mut offset = 0usize;
    let mut line_no = 0usize;

    loop {
        if offset >= bytes.len() {
            return Err(parse_err(line_no, "missing end_header"));
        }
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .unwrap_or(bytes.len());
        let raw = &bytes[offset..end];
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_err(line_no, "header is not valid UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        let next_offset = (end + 1).min(bytes.len() + 1);

        if line_no == 1 {
            if line != "ply" {
                return Err(parse_err(1, "file does not start with 'ply'"));
            }
            offset = next_offset;
            continue;
        }

        let mut tokens = line.split_ascii_whitespace();
        match tokens.next() {
            Some("format") => {
                let kind = tokens.next().unwrap_or("");
                format = Some(match kind {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLittleEndian,
                    other => {
                        return Err(parse_err(line_no, format!("unsupported format '{other}'")))
                    }
                });
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "element without a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(line_no, "element without a valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before any element"))?;
                let first = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "property without a type"))?;
                if first == "list" {
                    let count = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| parse_err(line_no, "bad list count type"))?;
                    let item = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| parse_err(line_no, "bad list item type"))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "list property without a name"))?;
                    element.properties.push(Property::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
                } else {
                    let ty = ScalarType::parse(first)
                        .ok_or_else(|| parse_err(line_no, format!("unknown type '{first}'")))?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "property without a name"))?;
                    element.properties.push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => {
                let format =
                    format.ok_or_else(|| parse_err(line_no, "end_header before format line"))?;
                return Ok(Header {
                    format,
                    elements,
                    end_line: line_no,
                    data_offset: next_offset,
                });
            }
            Some(other) => {
                return Err(parse_err(line_no, format!("unknown header keyword '{other}'")))
            }
            None => {} // blank line
        }
        offset = next_offset;
    }
}

/// Column positions of x/y/z (and optionally nx/ny/nz) among an element's
/// properties.
struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
}

fn vertex_layout(element: &Element) -> Result<VertexLayout> {
    let find = |name: &str| {
        element.properties.iter().position(|p| match p {
            Property::Scalar { name: n, .. } => n == name,
            Property::List { .. } => false,
        })
    };
    let (x, y, z) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => {
            return Err(Error::PlySchema {
                message: "vertex element lacks scalar x/y/z properties".into(),
            })
        }
    };
    let normal = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    Ok(VertexLayout { xyz: [x, y, z], normal })
}

/// Loads a point cloud from an ASCII or binary-little-endian PLY file.
pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes)?;

    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::PlySchema {
            message: "no vertex element".into(),
        })?;
    if vertex.count == 0 {
        return Err(Error::PlySchema {
            message: "vertex element declares zero vertices".into(),
        });
    }
    let layout = vertex_layout(vertex)?;

    let rows = match header.format {
        Format::Ascii => read_ascii_rows(&bytes[header.data_offset..], &header)?,
        Format::BinaryLittleEndian => read_binary_rows(&bytes[header.data_offset..], &header)?,
    };

    let mut points = Vec::with_capacity(vertex.count);
    let mut normals = layout.normal.map(|_| Vec::with_capacity(vertex.count));
    for row in &rows {
        points.push(Point3::new(row[layout.xyz[0]], row[layout.xyz[1]], row[layout.xyz[2]]));
        if let (Some(ns), Some(idx)) = (normals.as_mut(), layout.normal) {
            let v = Vector3::new(row[idx[0]], row[idx[1]], row[idx[2]]);
            let norm = v.norm();
            if norm <= f64::EPSILON || !norm.is_finite() {
                return Err(Error::PlySchema {
                    message: format!("vertex {} has a zero or non-finite normal", ns.len()),
                });
            }
            ns.push(v / norm);
        }
    }

    match normals {
        Some(ns) => PointCloud::with_normals(points, ns),
        None => PointCloud::new(points),
    }
}

/// Per-vertex scalar rows (list properties are skipped, not stored).
fn read_ascii_rows(data: &[u8], header: &Header) -> Result<Vec<Vec<f64>>> {
    let text = std::str::from_utf8(data)
        .map_err(|_| parse_err(header.end_line + 1, "ascii body is not valid UTF-8"))?;
    let mut tokens = text.split_ascii_whitespace();
    let mut next_value = |what: &str| -> Result<f64> {
        tokens
            .next()
            .ok_or_else(|| parse_err(header.end_line, format!("unexpected end of data reading {what}")))?
            .parse::<f64>()
            .map_err(|_| parse_err(header.end_line, format!("non-numeric token reading {what}")))
    };

    let mut vertex_rows = Vec::new();
    for element in &header.elements {
        for _ in 0..element.count {
            let mut row = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop {
                    Property::Scalar { name, .. } => row.push(next_value(name)?),
                    Property::List { name, .. } => {
                        let n = next_value(name)? as usize;
                        for _ in 0..n {
                            next_value(name)?;
                        }
                        row.push(f64::NAN); // placeholder, never addressed
                    }
                }
            }
            if element.name == "vertex" {
                vertex_rows.push(row);
            }
        }
    }
    Ok(vertex_rows)
}

fn read_binary_rows(data: &[u8], header: &Header) -> Result<Vec<Vec<f64>>> {
    let mut offset = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if offset + n > data.len() {
            return Err(parse_err(
                header.end_line,
                format!("binary body truncated at byte {offset} reading {what}"),
            ));
        }
        let slice = &data[offset..offset + n];
        offset += n;
        Ok(slice)
    };

    let mut vertex_rows = Vec::new();
    for element in &header.elements {
        for _ in 0..element.count {
            let mut row = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop {
                    Property::Scalar { name, ty } => {
                        row.push(ty.read_le(take(ty.size(), name)?));
                    }
                    Property::List { name, count, item } => {
                        let n = count.read_le(take(count.size(), name)?) as usize;
                        take(n * item.size(), name)?;
                        row.push(f64::NAN);
                    }
                }
            }
            if element.name == "vertex" {
                vertex_rows.push(row);
            }
        }
    }
    Ok(vertex_rows)
}

/// Writes an ASCII PLY reproducing coordinates at full `f64` precision.
pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);

    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals().is_some() {
        out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    out.push_str("end_header\n");

    match cloud.normals() {
        Some(normals) => {
            for (p, n) in cloud.points().iter().zip(normals) {
                out.push_str(&format!("{} {} {} {} {} {}\n", p.x, p.y, p.z, n.x, n.y, n.z));
            }
        }
        None => {
            for p in cloud.points() {
                out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
            }
        }
    }

    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(out.as_bytes()).map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn write_temp(content: &[u8]) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn reads_ascii_vertices_in_file_order() {
        let f = write_temp(
            b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n",
        );
        let cloud = load_ply(f.path()).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.point(0), Point3::new(0.0, 0.0, 0.0));
        assert_eq!(cloud.point(1), Point3::new(1.0, 0.0, 0.0));
        assert_eq!(cloud.point(2), Point3::new(0.0, 1.0, 0.0));
        assert!(cloud.normals().is_none());
    }

    #[test]
    fn reads_normals_and_renormalizes() {
        let f = write_temp(
            b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\n0 0 0 2 0 0\n1 1 1 0 0 -3\n",
        );
        let cloud = load_ply(f.path()).unwrap();
        let normals = cloud.normals().unwrap();
        for n in normals {
            assert!((n.norm() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(normals[0], Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(normals[1], Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn reads_binary_little_endian() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, -4.5, 0.25, 100.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let f = write_temp(&bytes);
        let cloud = load_ply(f.path()).unwrap();
        assert_eq!(cloud.point(0), Point3::new(1.0, 2.0, 3.0));
        assert_eq!(cloud.point(1), Point3::new(-4.5, 0.25, 100.0));
    }

    #[test]
    fn skips_face_elements() {
        let f = write_temp(
            b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n",
        );
        let cloud = load_ply(f.path()).unwrap();
        assert_eq!(cloud.len(), 3);
    }

    #[test]
    fn malformed_header_reports_line() {
        let f = write_temp(b"ply\nformat ascii 1.0\nelement vertex\nend_header\n");
        match load_ply(f.path()) {
            Err(Error::PlyParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_coordinate_is_schema_error() {
        let f = write_temp(
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n",
        );
        assert!(matches!(load_ply(f.path()), Err(Error::PlySchema { .. })));
    }

    #[test]
    fn writer_declares_six_properties_with_normals() {
        let cloud = PointCloud::with_normals(
            vec![Point3::new(1.0, 2.0, 3.0)],
            vec![Vector3::new(0.0, 1.0, 0.0)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.ply");
        save_ply(&cloud, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("element vertex 1"));
        assert_eq!(text.matches("property double").count(), 6);
    }

    #[test]
    fn roundtrip_preserves_coordinates() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                )
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.ply");
        save_ply(&cloud, &path).unwrap();
        let back = load_ply(&path).unwrap();
        assert_eq!(back.len(), cloud.len());
        for (a, b) in cloud.points().iter().zip(back.points()) {
            assert!((a - b).norm() <= 1e-6);
        }
    }
}
