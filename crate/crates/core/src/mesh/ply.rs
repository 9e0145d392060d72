//! PLY reader (ASCII and binary little-endian) and ASCII writer.
//!
//! Only the `vertex` element's `x`, `y`, `z` properties and the `face`
//! element's `vertex_indices` (or `vertex_index`) list are used; every other
//! element and property is parsed and discarded. Polygons with more than three
//! corners are fan-triangulated as `(0, i, i + 1)`.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use log::debug;

use super::{Triangle, TriangleMesh};
use crate::error::{Error, Result};
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

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
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
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

    fn decode(self, b: &[u8]) -> f64 {
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
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    /// Byte offset of the first body byte.
    body_start: usize,
    /// Number of header lines, for ASCII line numbering.
    lines: usize,
}

/// Reads a PLY file from disk.
pub fn load_ply(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

/// Parses an in-memory PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let header = parse_header(bytes)?;
    let vertex_el = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format("header", "missing `vertex` element"))?;
    let xyz = ["x", "y", "z"].map(|axis| {
        header.elements[vertex_el]
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
    });
    let [Some(xi), Some(yi), Some(zi)] = xyz else {
        return Err(Error::format("header", "vertex element lacks scalar x, y or z"));
    };
    let face_el = header.elements.iter().position(|e| e.name == "face");
    let face_prop = match face_el {
        // Ordinal among the element's list properties.
        Some(fe) => Some(
            header.elements[fe]
                .properties
                .iter()
                .filter(|p| matches!(p, Property::List { .. }))
                .position(|p| p.name() == "vertex_indices" || p.name() == "vertex_index")
                .ok_or_else(|| Error::format("header", "face element lacks a vertex_indices list"))?,
        ),
        None => None,
    };

    let mut sink = Sink {
        vertex_el,
        xyz: [xi, yi, zi],
        face_el,
        face_prop,
        vertices: Vec::with_capacity(header.elements[vertex_el].count),
        polygons: Vec::new(),
    };
    match header.encoding {
        Encoding::Ascii => read_ascii(bytes, &header, &mut sink)?,
        Encoding::BinaryLittleEndian => read_binary(bytes, &header, &mut sink)?,
    }
    sink.into_mesh()
}

/// Values of one record. List properties hold a NaN placeholder in `scalars`
/// and their items in `lists`, in declaration order.
struct Record {
    scalars: Vec<f64>,
    lists: Vec<Vec<f64>>,
}

struct Sink {
    vertex_el: usize,
    xyz: [usize; 3],
    face_el: Option<usize>,
    face_prop: Option<usize>,
    vertices: Vec<Point3>,
    polygons: Vec<(Vec<f64>, String)>,
}

impl Sink {
    fn accept(&mut self, element: usize, record: Record, location: impl FnOnce() -> String) {
        if element == self.vertex_el {
            let [x, y, z] = self.xyz.map(|i| record.scalars[i]);
            self.vertices.push(Point3::new(x, y, z));
        } else if Some(element) == self.face_el {
            let mut lists = record.lists;
            let idx = self.face_prop.unwrap_or(0);
            self.polygons.push((std::mem::take(&mut lists[idx]), location()));
        }
    }

    fn into_mesh(self) -> Result<TriangleMesh> {
        let n = self.vertices.len();
        let mut triangles = Vec::with_capacity(self.polygons.len());
        let mut skipped = 0usize;
        for (poly, location) in &self.polygons {
            if poly.len() < 3 {
                return Err(Error::format(
                    location.as_str(),
                    format!("face has {} corners, need at least 3", poly.len()),
                ));
            }
            let mut idx = Vec::with_capacity(poly.len());
            for &v in poly {
                if v < 0.0 || v.fract() != 0.0 || v >= n as f64 {
                    return Err(Error::format(
                        location.as_str(),
                        format!("face index {v} out of range for {n} vertices"),
                    ));
                }
                idx.push(v as usize);
            }
            for i in 1..idx.len() - 1 {
                let t = Triangle::new(idx[0], idx[i], idx[i + 1]);
                if t.is_valid(n) {
                    triangles.push(t);
                } else {
                    skipped += 1;
                }
            }
        }
        if skipped > 0 {
            debug!("skipped {skipped} triangles with repeated vertex indices");
        }
        TriangleMesh::new(self.vertices, triangles)
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut next_line = |pos: &mut usize| -> Option<(usize, String)> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |e| *pos + e);
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = (end + 1).min(bytes.len());
        line_no += 1;
        Some((line_no, line))
    };

    match next_line(&mut pos) {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::format("line 1", "missing `ply` magic")),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some((n, line)) = next_line(&mut pos) else {
            return Err(Error::format("header", "missing end_header"));
        };
        let loc = || format!("line {n}");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    other => {
                        return Err(Error::format(loc(), format!("unsupported format `{other}`")))
                    }
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::format(loc(), format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format(loc(), "property before any element"))?;
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(Error::format(loc(), "unknown list property type"));
                };
                el.properties.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format(loc(), "property before any element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::format(loc(), format!("unknown property type `{ty}`")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["end_header"] => break,
            _ => return Err(Error::format(loc(), format!("unrecognized header line `{line}`"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::format("header", "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_start: pos,
        lines: line_no,
    })
}

fn read_ascii(bytes: &[u8], header: &Header, sink: &mut Sink) -> Result<()> {
    let body = std::str::from_utf8(&bytes[header.body_start..])
        .map_err(|e| Error::format("body", format!("invalid UTF-8 in ASCII body: {e}")))?;
    let mut lines = body
        .lines()
        .enumerate()
        .map(|(i, l)| (header.lines + i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    for (ei, el) in header.elements.iter().enumerate() {
        for k in 0..el.count {
            let Some((n, line)) = lines.next() else {
                return Err(Error::format(
                    "end of file",
                    format!("expected {} `{}` records, found {k}", el.count, el.name),
                ));
            };
            let loc = || format!("line {n}");
            let mut tokens = line.split_whitespace();
            let mut take = |what: &str| -> Result<f64> {
                let tok = tokens
                    .next()
                    .ok_or_else(|| Error::format(loc(), format!("missing value for `{what}`")))?;
                tok.parse::<f64>()
                    .map_err(|_| Error::format(loc(), format!("bad number `{tok}` for `{what}`")))
            };
            let mut record = Record {
                scalars: Vec::with_capacity(el.properties.len()),
                lists: Vec::new(),
            };
            for p in &el.properties {
                match p {
                    Property::Scalar { name, .. } => record.scalars.push(take(name)?),
                    Property::List { name, .. } => {
                        let len = take(name)?;
                        if len < 0.0 || len.fract() != 0.0 {
                            return Err(Error::format(loc(), format!("bad list length {len}")));
                        }
                        let items = (0..len as usize).map(|_| take(name)).collect::<Result<Vec<_>>>()?;
                        record.scalars.push(f64::NAN);
                        record.lists.push(items);
                    }
                }
            }
            if let Some(extra) = tokens.next() {
                return Err(Error::format(
                    loc(),
                    format!("unexpected trailing value `{extra}` in `{}` record", el.name),
                ));
            }
            sink.accept(ei, record, loc);
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(Error::format(format!("line {n}"), "data after the last declared element"));
    }
    Ok(())
}

fn read_binary(bytes: &[u8], header: &Header, sink: &mut Sink) -> Result<()> {
    let mut pos = header.body_start;
    let read = |ty: Scalar, pos: &mut usize| -> Result<f64> {
        let end = *pos + ty.size();
        if end > bytes.len() {
            return Err(Error::format(
                format!("byte offset {}", *pos),
                "unexpected end of binary data",
            ));
        }
        let v = ty.decode(&bytes[*pos..end]);
        *pos = end;
        Ok(v)
    };
    for (ei, el) in header.elements.iter().enumerate() {
        for _ in 0..el.count {
            let start = pos;
            let mut record = Record {
                scalars: Vec::with_capacity(el.properties.len()),
                lists: Vec::new(),
            };
            for p in &el.properties {
                match *p {
                    Property::Scalar { ty, .. } => record.scalars.push(read(ty, &mut pos)?),
                    Property::List { count, item, .. } => {
                        let len = read(count, &mut pos)?;
                        if len < 0.0 {
                            return Err(Error::format(
                                format!("byte offset {start}"),
                                "negative list length",
                            ));
                        }
                        let items = (0..len as usize)
                            .map(|_| read(item, &mut pos))
                            .collect::<Result<Vec<_>>>()?;
                        record.scalars.push(f64::NAN);
                        record.lists.push(items);
                    }
                }
            }
            sink.accept(ei, record, || format!("byte offset {start}"));
        }
    }
    if pos != bytes.len() {
        debug!("{} trailing bytes after binary PLY body", bytes.len() - pos);
    }
    Ok(())
}

/// Writes `mesh` as an ASCII PLY with double-precision coordinates.
pub fn write_ply(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply_to(mesh, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes `mesh` as an ASCII PLY to any writer.
pub fn write_ply_to(mesh: &TriangleMesh, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element face {}", mesh.triangle_count())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.0;
        writeln!(w, "3 {a} {b} {c}")?;
    }
    Ok(())
}
