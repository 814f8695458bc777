//! Binary little-endian PLY with one `vertex` element of scalar properties.
//!
//! The reader accepts any scalar type for any property and ignores
//! properties it does not know. Elements declared after `vertex` are skipped
//! (their payload follows the vertex payload). List properties on the vertex
//! element are rejected since they make records variable-length.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::{read_bytes, write_atomic};
use crate::change::{ChangeEntry, ChangeLabel, ChangeMap, Origin};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Scalar::I8 => "char",
            Scalar::U8 => "uchar",
            Scalar::I16 => "short",
            Scalar::U16 => "ushort",
            Scalar::I32 => "int",
            Scalar::U32 => "uint",
            Scalar::F32 => "float",
            Scalar::F64 => "double",
        }
    }

    /// Every supported type converts to f64 exactly.
    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    ty: Scalar,
    offset: usize,
}

#[derive(Debug)]
struct Header {
    count: usize,
    props: Vec<Property>,
    stride: usize,
    body: usize,
    more_elements: bool,
}

impl Header {
    fn find(&self, name: &str) -> Option<&Property> {
        self.props.iter().find(|p| p.name == name)
    }
}

fn parse_error(path: &Path, offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg: msg.into(),
    }
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut pos = 0;
    let mut lines = 0;
    let mut vertex: Option<(usize, Vec<Property>)> = None;
    let mut in_vertex = false;
    let mut more_elements = false;
    let mut stride = 0;
    loop {
        let start = pos;
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(parse_error(path, start, "header ends without end_header"));
        };
        pos += len + 1;
        let raw = &bytes[start..start + len];
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_error(path, start, "header line is not UTF-8"))?
            .trim_end_matches('\r');
        let words: Vec<&str> = line.split_whitespace().collect();
        lines += 1;
        if lines == 1 {
            if line != "ply" {
                return Err(parse_error(path, 0, "missing 'ply' magic"));
            }
            continue;
        }
        match words.as_slice() {
            ["format", fmt, version] => {
                if *fmt != "binary_little_endian" || *version != "1.0" {
                    return Err(parse_error(
                        path,
                        start,
                        format!("unsupported format {fmt} {version} (expected binary_little_endian 1.0)"),
                    ));
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_error(path, start, format!("bad element count {count:?}")))?;
                if *name == "vertex" && vertex.is_none() && !more_elements {
                    vertex = Some((count, Vec::new()));
                    in_vertex = true;
                } else if vertex.is_some() {
                    in_vertex = false;
                    more_elements = true;
                } else {
                    return Err(parse_error(path, start, format!("element {name} precedes vertex")));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(parse_error(path, start, "list properties are not supported on vertex"));
            }
            ["property", ty, name] if in_vertex => {
                let ty = Scalar::parse(ty).ok_or_else(|| parse_error(path, start, format!("unknown property type {ty:?}")))?;
                let props = &mut vertex.as_mut().unwrap().1;
                if props.iter().any(|p| p.name == *name) {
                    return Err(parse_error(path, start, format!("duplicate property {name}")));
                }
                props.push(Property {
                    name: name.to_string(),
                    ty,
                    offset: stride,
                });
                stride += ty.size();
            }
            ["property", ..] if more_elements => {}
            ["end_header"] => break,
            _ => return Err(parse_error(path, start, format!("unexpected header line {line:?}"))),
        }
    }
    let Some((count, props)) = vertex else {
        return Err(parse_error(path, pos, "no vertex element"));
    };
    Ok(Header {
        count,
        props,
        stride,
        body: pos,
        more_elements,
    })
}

/// Everything a point file can carry.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyPoints {
    pub cloud: PointCloud<f64>,
    pub responses: Option<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
    pub origins: Option<Vec<u8>>,
}

/// Parse a point file held in memory; `path` only labels errors.
pub fn decode_points(bytes: &[u8], path: &Path) -> Result<PlyPoints> {
    decode(bytes, path, true).map(|(p, _)| p)
}

/// With `unique_ids` unset, file ids are returned on the side instead of
/// being attached to the cloud, which requires them to be distinct.
fn decode(bytes: &[u8], path: &Path, unique_ids: bool) -> Result<(PlyPoints, Option<Vec<u32>>)> {
    let h = parse_header(bytes, path)?;
    let payload = h.count.checked_mul(h.stride).filter(|n| h.body.checked_add(*n).is_some());
    let available = bytes.len() - h.body;
    match payload {
        Some(n) if n <= available => {
            if n < available && !h.more_elements {
                return Err(parse_error(path, h.body + n, format!("{} trailing bytes", available - n)));
            }
        }
        _ => {
            let complete = available.checked_div(h.stride).unwrap_or(0);
            return Err(parse_error(
                path,
                h.body + complete * h.stride,
                format!("truncated payload: {complete} of {} records complete", h.count),
            ));
        }
    }

    let column = |p: &Property| -> Vec<f64> {
        (0..h.count)
            .map(|i| p.ty.read(&bytes[h.body + i * h.stride + p.offset..]))
            .collect()
    };
    let record_offset = |i: usize| h.body + i * h.stride;
    let integral = |p: &Property, max: f64| -> Result<Vec<f64>> {
        let col = column(p);
        if let Some(i) = col.iter().position(|v| !(v.fract() == 0.0 && *v >= 0.0 && *v <= max)) {
            return Err(parse_error(
                path,
                record_offset(i) + p.offset,
                format!("{} = {} is not an integer in [0, {max}]", p.name, col[i]),
            ));
        }
        Ok(col)
    };

    let mut xyz = Vec::with_capacity(3);
    for name in ["x", "y", "z"] {
        let p = h
            .find(name)
            .ok_or_else(|| parse_error(path, h.body, format!("missing required property {name}")))?;
        xyz.push(column(p));
    }
    let points = (0..h.count).map(|i| Point3::new(xyz[0][i], xyz[1][i], xyz[2][i])).collect();
    let mut cloud = PointCloud::new(points);

    let mut side_ids = None;
    if let Some(p) = h.find("id") {
        let ids: Vec<u32> = integral(p, u32::MAX as f64)?.into_iter().map(|v| v as u32).collect();
        if !unique_ids {
            side_ids = Some(ids);
        } else {
            let mut seen = HashSet::with_capacity(ids.len());
        if let Some(i) = ids.iter().position(|id| !seen.insert(*id)) {
                return Err(parse_error(path, record_offset(i) + p.offset, format!("duplicate id {}", ids[i])));
            }
            cloud = cloud.with_ids(ids)?;
        }
    }
    if let Some(p) = h.find("track_len").or_else(|| h.find("track_length")) {
        let tracks = integral(p, u16::MAX as f64)?.into_iter().map(|v| v as u16).collect();
        cloud = cloud.with_track_lengths(tracks)?;
    }
    let normal_props: Vec<_> = ["nx", "ny", "nz"].iter().filter_map(|n| h.find(n)).collect();
    match normal_props.len() {
        0 => {}
        3 => {
            let cols: Vec<Vec<f64>> = normal_props.iter().map(|p| column(p)).collect();
            let normals = (0..h.count).map(|i| unit_normal(cols[0][i], cols[1][i], cols[2][i])).collect();
            cloud = cloud.with_normals(normals)?;
        }
        _ => return Err(parse_error(path, h.body, "normals need all of nx, ny, nz")),
    }
    let responses = h.find("response").map(column);
    let labels = h
        .find("label")
        .map(|p| integral(p, u8::MAX as f64).map(|c| c.into_iter().map(|v| v as u8).collect()))
        .transpose()?;
    let origins = h
        .find("origin")
        .map(|p| integral(p, u8::MAX as f64).map(|c| c.into_iter().map(|v| v as u8).collect()))
        .transpose()?;
    Ok((
        PlyPoints {
            cloud,
            responses,
            labels,
            origins,
        },
        side_ids,
    ))
}

/// Stored normals are float32, so unit vectors come back within a few ulps
/// of unit length; anything further off is renormalized, and NaN or zero
/// marks a missing normal.
fn unit_normal(x: f64, y: f64, z: f64) -> Option<Vector3<f64>> {
    let n = Vector3::new(x, y, z);
    let len = n.norm();
    if !len.is_finite() || len == 0.0 {
        None
    } else if (len - 1.0).abs() <= 1e-6 {
        Some(n)
    } else {
        Some(n / len)
    }
}

pub fn read_cloud(path: &Path) -> Result<PointCloud<f64>> {
    Ok(decode_points(&read_bytes(path)?, path)?.cloud)
}

/// A point file with `label` and `origin` properties as a change map.
pub fn read_changes(path: &Path) -> Result<ChangeMap<f64>> {
    let bytes = read_bytes(path)?;
    let (pts, ids) = decode(&bytes, path, false)?;
    let ids = ids.unwrap_or_else(|| pts.cloud.ids().to_vec());
    let missing = |name: &str| parse_error(path, 0, format!("change file lacks property {name}"));
    let labels = pts.labels.ok_or_else(|| missing("label"))?;
    let origins = pts.origins.ok_or_else(|| missing("origin"))?;
    let n = pts.cloud.len();
    let responses = pts.responses.unwrap_or_else(|| vec![0.0; n]);
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let label = ChangeLabel::from_code(labels[i])
            .ok_or_else(|| parse_error(path, 0, format!("record {i}: unknown label code {}", labels[i])))?;
        let origin = Origin::from_code(origins[i])
            .ok_or_else(|| parse_error(path, 0, format!("record {i}: unknown origin code {}", origins[i])))?;
        entries.push(ChangeEntry {
            origin,
            id: ids[i],
            position: pts.cloud.points()[i],
            response: responses[i],
            label,
        });
    }
    Ok(ChangeMap { entries })
}

struct Encoder {
    header: String,
    body: Vec<u8>,
}

impl Encoder {
    fn new(count: usize, props: &[(&str, Scalar)]) -> Self {
        let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {count}\n");
        for (name, ty) in props {
            header += &format!("property {} {name}\n", ty.name());
        }
        header += "end_header\n";
        let stride: usize = props.iter().map(|(_, t)| t.size()).sum();
        Self {
            header,
            body: Vec::with_capacity(count * stride),
        }
    }

    fn finish(self) -> Vec<u8> {
        let mut out = self.header.into_bytes();
        out.extend(self.body);
        out
    }
}

pub fn encode_cloud(cloud: &PointCloud<f64>) -> Vec<u8> {
    let mut props = vec![("x", Scalar::F64), ("y", Scalar::F64), ("z", Scalar::F64)];
    if cloud.track_lengths().is_some() {
        props.push(("track_len", Scalar::U16));
    }
    if cloud.normals().is_some() {
        props.extend([("nx", Scalar::F32), ("ny", Scalar::F32), ("nz", Scalar::F32)]);
    }
    props.push(("id", Scalar::U32));
    let mut enc = Encoder::new(cloud.len(), &props);
    let b = &mut enc.body;
    for i in 0..cloud.len() {
        for c in cloud.points()[i].coords.iter() {
            b.extend(c.to_le_bytes());
        }
        if let Some(t) = cloud.track_lengths() {
            b.extend(t[i].to_le_bytes());
        }
        if let Some(n) = cloud.normals() {
            let v = n[i].map_or([f32::NAN; 3], |v| [v.x as f32, v.y as f32, v.z as f32]);
            for c in v {
                b.extend(c.to_le_bytes());
            }
        }
        b.extend(cloud.ids()[i].to_le_bytes());
    }
    enc.finish()
}

pub fn encode_changes(map: &ChangeMap<f64>) -> Vec<u8> {
    let props = [
        ("x", Scalar::F64),
        ("y", Scalar::F64),
        ("z", Scalar::F64),
        ("response", Scalar::F32),
        ("label", Scalar::U8),
        ("origin", Scalar::U8),
        ("id", Scalar::U32),
    ];
    let mut enc = Encoder::new(map.len(), &props);
    let b = &mut enc.body;
    for e in &map.entries {
        for c in e.position.coords.iter() {
            b.extend(c.to_le_bytes());
        }
        b.extend((e.response as f32).to_le_bytes());
        b.push(e.label.code());
        b.push(e.origin.code());
        b.extend(e.id.to_le_bytes());
    }
    enc.finish()
}

pub fn write_cloud(cloud: &PointCloud<f64>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_cloud(cloud))
}

pub fn write_changes(map: &ChangeMap<f64>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_changes(map))
}
