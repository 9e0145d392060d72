//! Descriptor files.
//!
//! One record per keypoint: keypoint index, keypoint coordinates and `D`
//! descriptor values. `D` is 96 for HGND but any dimension is accepted so
//! externally computed descriptors can be matched through the same pipeline.
//!
//! CSV layout, one record per line, no header (lines starting with `#` are
//! ignored):
//!
//! ```text
//! index,x,y,z,v0,v1,...,v{D-1}
//! ```
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic    5 bytes  "HGND1"
//! dim      u32      D
//! count    u64      N
//! records  N x { index: u64, x, y, z: f64, values: D x f64 }
//! ```

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Point3;

pub const BINARY_MAGIC: &[u8; 5] = b"HGND1";

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorRecord {
    pub index: u64,
    pub keypoint: Point3,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Binary,
}

impl FileFormat {
    /// `.bin` and `.hgnd` extensions select the binary layout; anything else is CSV.
    pub fn from_path(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("hgnd") => FileFormat::Binary,
            _ => FileFormat::Csv,
        }
    }
}

fn check_dims(records: &[DescriptorRecord]) -> Result<usize> {
    let dim = records.first().map_or(0, |r| r.values.len());
    if let Some(r) = records.iter().find(|r| r.values.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: r.values.len(),
        });
    }
    Ok(dim)
}

pub fn write_csv_to(records: &[DescriptorRecord], w: &mut impl Write) -> io::Result<()> {
    for r in records {
        write!(w, "{},{},{},{}", r.index, r.keypoint.x, r.keypoint.y, r.keypoint.z)?;
        for v in &r.values {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<DescriptorRecord>> {
    let mut records = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("line {}", i + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(Error::format(loc(), "need an index, 3 coordinates and at least one value"));
        }
        let index = fields[0]
            .parse::<u64>()
            .map_err(|_| Error::format(loc(), format!("bad keypoint index `{}`", fields[0])))?;
        let nums = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::format(loc(), format!("bad number `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let d = nums.len() - 3;
        if *dim.get_or_insert(d) != d {
            return Err(Error::format(
                loc(),
                format!("record has {d} values, earlier records have {}", dim.unwrap()),
            ));
        }
        records.push(DescriptorRecord {
            index,
            keypoint: Point3::new(nums[0], nums[1], nums[2]),
            values: nums[3..].to_vec(),
        });
    }
    Ok(records)
}

pub fn write_binary_to(records: &[DescriptorRecord], w: &mut impl Write) -> Result<()> {
    let dim = check_dims(records)?;
    let io = |e| Error::io("<binary writer>", e);
    w.write_all(BINARY_MAGIC).map_err(io)?;
    w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(records.len() as u64).to_le_bytes()).map_err(io)?;
    for r in records {
        w.write_all(&r.index.to_le_bytes()).map_err(io)?;
        for v in r.keypoint.iter().chain(&r.values) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn parse_binary(bytes: &[u8]) -> Result<Vec<DescriptorRecord>> {
    if bytes.len() < 17 || &bytes[..5] != BINARY_MAGIC {
        return Err(Error::format("byte offset 0", "missing HGND1 header"));
    }
    let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[9..17].try_into().unwrap()) as usize;
    let record_len = 8 * (4 + dim);
    let expected = record_len
        .checked_mul(count)
        .and_then(|n| n.checked_add(17))
        .ok_or_else(|| Error::format("byte offset 5", "record count overflows"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            format!("byte offset {}", bytes.len().min(expected)),
            format!("expected {expected} bytes for {count} records of dimension {dim}, found {}", bytes.len()),
        ));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    Ok((0..count)
        .map(|k| {
            let o = 17 + k * record_len;
            DescriptorRecord {
                index: u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()),
                keypoint: Point3::new(f64_at(o + 8), f64_at(o + 16), f64_at(o + 24)),
                values: (0..dim).map(|j| f64_at(o + 32 + 8 * j)).collect(),
            }
        })
        .collect())
}

/// Writes records in the layout chosen by the file extension.
pub fn write_descriptors(path: impl AsRef<Path>, records: &[DescriptorRecord]) -> Result<()> {
    let path = path.as_ref();
    check_dims(records)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match FileFormat::from_path(path) {
        FileFormat::Csv => write_csv_to(records, &mut w).map_err(|e| Error::io(path, e))?,
        FileFormat::Binary => write_binary_to(records, &mut w)?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a descriptor file; the binary layout is recognized by its magic.
pub fn read_descriptors(path: impl AsRef<Path>) -> Result<Vec<DescriptorRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::format("byte offset 0", format!("not UTF-8 text: {e}")))?;
        parse_csv(text)
    }
}
