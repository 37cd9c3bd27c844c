//! PCD v0.7 reader and writer (ascii and binary `DATA` sections).

use std::fmt::Write as _;
use std::path::Path;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcdDataMode {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Float,
    Signed,
    Unsigned,
}

#[derive(Debug, Clone)]
struct Field {
    name: String,
    size: usize,
    kind: Kind,
    count: usize,
}

impl Field {
    fn decode(&self, b: &[u8]) -> Option<f64> {
        Some(match (self.kind, self.size) {
            (Kind::Float, 4) => f32::from_le_bytes(b.try_into().ok()?) as f64,
            (Kind::Float, 8) => f64::from_le_bytes(b.try_into().ok()?),
            (Kind::Signed, 1) => b[0] as i8 as f64,
            (Kind::Signed, 2) => i16::from_le_bytes(b.try_into().ok()?) as f64,
            (Kind::Signed, 4) => i32::from_le_bytes(b.try_into().ok()?) as f64,
            (Kind::Signed, 8) => i64::from_le_bytes(b.try_into().ok()?) as f64,
            (Kind::Unsigned, 1) => b[0] as f64,
            (Kind::Unsigned, 2) => u16::from_le_bytes(b.try_into().ok()?) as f64,
            (Kind::Unsigned, 4) => u32::from_le_bytes(b.try_into().ok()?) as f64,
            (Kind::Unsigned, 8) => u64::from_le_bytes(b.try_into().ok()?) as f64,
            _ => return None,
        })
    }
}

#[derive(Debug)]
struct Header {
    fields: Vec<Field>,
    points: usize,
    mode: PcdDataMode,
    /// Byte offset of the first data byte.
    data_start: usize,
}

fn header_err(line: &str, reason: impl Into<String>) -> Error {
    Error::PcdHeader { line: line.to_string(), reason: reason.into() }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut names: Option<(String, Vec<String>)> = None;
    let mut sizes: Option<(String, Vec<usize>)> = None;
    let mut types: Option<(String, Vec<Kind>)> = None;
    let mut counts: Option<(String, Vec<usize>)> = None;
    let mut width: Option<usize> = None;
    let mut height: Option<usize> = None;
    let mut points: Option<(String, usize)> = None;

    loop {
        if pos >= bytes.len() {
            return Err(header_err("<eof>", "header ended before DATA"));
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| pos + i);
        let raw = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| header_err("<binary>", "header is not valid UTF-8"))?;
        let line = raw.trim();
        pos = (end + 1).min(bytes.len());
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default().to_ascii_uppercase();
        let values: Vec<&str> = tokens.collect();
        let parse_usizes = |values: &[&str]| -> Result<Vec<usize>> {
            values
                .iter()
                .map(|v| v.parse::<usize>().map_err(|_| header_err(line, format!("`{v}` is not an integer"))))
                .collect()
        };
        match key.as_str() {
            "VERSION" | "VIEWPOINT" => {}
            "FIELDS" | "COLUMNS" => {
                names = Some((line.to_string(), values.iter().map(|v| v.to_ascii_lowercase()).collect()))
            }
            "SIZE" => sizes = Some((line.to_string(), parse_usizes(&values)?)),
            "TYPE" => {
                let kinds = values
                    .iter()
                    .map(|v| match v.to_ascii_uppercase().as_str() {
                        "F" => Ok(Kind::Float),
                        "I" => Ok(Kind::Signed),
                        "U" => Ok(Kind::Unsigned),
                        other => Err(header_err(line, format!("unknown TYPE `{other}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                types = Some((line.to_string(), kinds));
            }
            "COUNT" => counts = Some((line.to_string(), parse_usizes(&values)?)),
            "WIDTH" => width = parse_usizes(&values)?.first().copied(),
            "HEIGHT" => height = parse_usizes(&values)?.first().copied(),
            "POINTS" => points = parse_usizes(&values)?.first().map(|&n| (line.to_string(), n)),
            "DATA" => {
                let mode = match values.first().map(|m| m.to_ascii_lowercase()).as_deref() {
                    Some("ascii") => PcdDataMode::Ascii,
                    Some("binary") => PcdDataMode::Binary,
                    other => return Err(Error::UnsupportedDataMode(other.unwrap_or("").to_string())),
                };
                let (names_line, names) = names.ok_or_else(|| header_err(line, "DATA before FIELDS"))?;
                let field_count = names.len();
                let check = |what: &str, found: Option<(String, usize)>| -> Result<()> {
                    match found {
                        Some((l, n)) if n != field_count => Err(header_err(
                            &l,
                            format!("{what} has {n} entries but FIELDS has {field_count}"),
                        )),
                        None => Err(header_err(&names_line, format!("missing {what} line"))),
                        _ => Ok(()),
                    }
                };
                check("SIZE", sizes.as_ref().map(|(l, v)| (l.clone(), v.len())))?;
                check("TYPE", types.as_ref().map(|(l, v)| (l.clone(), v.len())))?;
                if counts.is_some() {
                    check("COUNT", counts.as_ref().map(|(l, v)| (l.clone(), v.len())))?;
                }
                let sizes = sizes.unwrap().1;
                let types = types.unwrap().1;
                let counts = counts.map(|c| c.1).unwrap_or_else(|| vec![1; field_count]);
                let width = width.ok_or_else(|| header_err(line, "missing WIDTH line"))?;
                let height = height.unwrap_or(1);
                let n = match points {
                    Some((l, n)) if n != width * height => {
                        return Err(header_err(&l, format!("POINTS {n} != WIDTH*HEIGHT {}", width * height)))
                    }
                    Some((_, n)) => n,
                    None => width * height,
                };
                let mut fields = Vec::with_capacity(field_count);
                for (((name, size), kind), count) in names.into_iter().zip(sizes).zip(types).zip(counts) {
                    let ok = matches!((kind, size), (Kind::Float, 4 | 8) | (Kind::Signed | Kind::Unsigned, 1 | 2 | 4 | 8));
                    if !ok {
                        return Err(header_err(line, format!("field `{name}` has unsupported size {size}")));
                    }
                    fields.push(Field { name, size, kind, count });
                }
                return Ok(Header { fields, points: n, mode, data_start: pos });
            }
            _ => return Err(header_err(line, "unknown header key")),
        }
    }
}

pub fn read_pcd(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_pcd_bytes(&std::fs::read(path)?)
}

/// Points come out in file order; rows holding NaN coordinates (organized
/// clouds use them for missing returns) are skipped.
pub fn read_pcd_bytes(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let locate = |axis: &str| -> Result<usize> {
        header
            .fields
            .iter()
            .position(|f| f.name == axis)
            .ok_or_else(|| Error::PcdData(format!("no `{axis}` field")))
    };
    let axes = [locate("x")?, locate("y")?, locate("z")?];
    let data = &bytes[header.data_start..];
    let mut points = Vec::with_capacity(header.points);

    match header.mode {
        PcdDataMode::Ascii => {
            // column index of each field's first element
            let mut starts = Vec::with_capacity(header.fields.len());
            let mut acc = 0;
            for f in &header.fields {
                starts.push(acc);
                acc += f.count;
            }
            let text = std::str::from_utf8(data).map_err(|_| Error::PcdData("ascii data is not UTF-8".into()))?;
            let mut rows = text.lines().map(str::trim).filter(|l| !l.is_empty());
            for i in 0..header.points {
                let row = rows.next().ok_or_else(|| Error::PcdData(format!("expected {} points, found {i}", header.points)))?;
                let cells: Vec<&str> = row.split_whitespace().collect();
                if cells.len() != acc {
                    return Err(Error::PcdData(format!("point {i} has {} values, expected {acc}", cells.len())));
                }
                let mut xyz = [0.0; 3];
                for (slot, &a) in xyz.iter_mut().zip(&axes) {
                    let cell = cells[starts[a]];
                    *slot = cell.parse::<f64>().or_else(|_| {
                        if cell.eq_ignore_ascii_case("nan") { Ok(f64::NAN) } else { Err(()) }
                    }).map_err(|_| Error::PcdData(format!("point {i}: `{cell}` is not a number")))?;
                }
                let p = Point3::new(xyz[0], xyz[1], xyz[2]);
                if p.is_finite() {
                    points.push(p);
                }
            }
        }
        PcdDataMode::Binary => {
            let mut offsets = Vec::with_capacity(header.fields.len());
            let mut stride = 0;
            for f in &header.fields {
                offsets.push(stride);
                stride += f.size * f.count;
            }
            let needed = stride * header.points;
            if data.len() < needed {
                return Err(Error::PcdData(format!("binary data has {} bytes, expected {needed}", data.len())));
            }
            for rec in data[..needed].chunks_exact(stride.max(1)) {
                let mut xyz = [0.0; 3];
                for (slot, &a) in xyz.iter_mut().zip(&axes) {
                    let f = &header.fields[a];
                    let at = offsets[a];
                    *slot = f.decode(&rec[at..at + f.size]).unwrap_or(f64::NAN);
                }
                let p = Point3::new(xyz[0], xyz[1], xyz[2]);
                if p.is_finite() {
                    points.push(p);
                }
            }
        }
    }
    let mut cloud = PointCloud::new(points);
    cloud.raw_size_bytes = bytes.len() as u64;
    Ok(cloud)
}

/// Writes `x y z` as 8-byte floats so a re-read is bit-exact.
pub fn write_pcd_bytes(cloud: &PointCloud, mode: PcdDataMode) -> Vec<u8> {
    let n = cloud.len();
    let mut header = String::new();
    header.push_str("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\n");
    let _ = writeln!(header, "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}");
    let mut out = header.into_bytes();
    match mode {
        PcdDataMode::Ascii => {
            out.extend_from_slice(b"DATA ascii\n");
            let mut body = String::with_capacity(n * 48);
            for p in &cloud.points {
                // `{:?}` prints the shortest representation that parses back exactly
                let _ = writeln!(body, "{:?} {:?} {:?}", p.x, p.y, p.z);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PcdDataMode::Binary => {
            out.extend_from_slice(b"DATA binary\n");
            out.reserve(n * 24);
            for p in &cloud.points {
                for v in p.to_array() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn write_pcd(cloud: &PointCloud, path: impl AsRef<Path>, mode: PcdDataMode) -> Result<()> {
    std::fs::write(path, write_pcd_bytes(cloud, mode))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const ASCII_TWO: &str = "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH 2\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS 2\nDATA ascii\n1 2 3\n4.5 -5 6\n";

    #[test]
    fn ascii_two_points_in_order() {
        let cloud = read_pcd_bytes(ASCII_TWO.as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.5, -5.0, 6.0)]);
    }

    #[test]
    fn binary_matches_ascii() {
        let ascii = read_pcd_bytes(ASCII_TWO.as_bytes()).unwrap();
        let binary = read_pcd_bytes(&write_pcd_bytes(&ascii, PcdDataMode::Binary)).unwrap();
        assert_eq!(binary.points, ascii.points);
    }

    #[test]
    fn float32_binary_with_extra_fields() {
        let mut bytes = b"VERSION .7\nFIELDS x y z intensity\nSIZE 4 4 4 1\nTYPE F F F U\nWIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA binary\n".to_vec();
        for (p, i) in [([1.5f32, 2.0, -3.0], 7u8), ([f32::NAN, 0.0, 0.0], 1)] {
            for v in p {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            bytes.push(i);
        }
        let cloud = read_pcd_bytes(&bytes).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.5, 2.0, -3.0)]);
    }

    #[test]
    fn unsupported_data_mode() {
        let text = ASCII_TWO.replace("DATA ascii", "DATA compressed_foo");
        match read_pcd_bytes(text.as_bytes()) {
            Err(e @ Error::UnsupportedDataMode(_)) => assert!(e.to_string().contains("unsupported DATA mode")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_header_names_offending_line() {
        let text = ASCII_TWO.replace("SIZE 4 4 4", "SIZE 4 4");
        match read_pcd_bytes(text.as_bytes()) {
            Err(Error::PcdHeader { line, .. }) => assert_eq!(line, "SIZE 4 4"),
            other => panic!("{other:?}"),
        }
        let text = ASCII_TWO.replace("POINTS 2", "POINTS 3");
        match read_pcd_bytes(text.as_bytes()) {
            Err(Error::PcdHeader { line, .. }) => assert_eq!(line, "POINTS 3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ascii_writer_is_lossless() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let points: Vec<_> = (0..500)
            .map(|_| Point3::new(rng.random_range(-1e3..1e3), rng.random::<f64>() * 1e-7, rng.random_range(-5.0..5.0)))
            .collect();
        let cloud = PointCloud::new(points);
        let back = read_pcd_bytes(&write_pcd_bytes(&cloud, PcdDataMode::Ascii)).unwrap();
        assert_eq!(back.points, cloud.points);
    }
}
