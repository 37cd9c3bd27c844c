//! `x,y,z` text files, header row optional.

use std::io::Read;
use std::path::Path;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

pub fn read_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_csv_from(std::fs::File::open(path)?)
}

/// Rows and columns in errors are 1-based and count data rows only. With a
/// header, the `x`, `y` and `z` columns are located by name (a trailing
/// `:0`/`:1`/`:2` component suffix, as written by some viewers, also works);
/// without one the first three columns are used.
pub fn read_csv_from(reader: impl Read) -> Result<PointCloud> {
    let mut counting = CountingReader { inner: reader, count: 0 };
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(&mut counting);

    let mut columns = [0usize, 1, 2];
    let mut points = Vec::new();
    let mut data_row = 0usize;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv { row: data_row + 1, column: 0, reason: e.to_string() })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if i == 0 && record.iter().all(|c| c.is_empty() || c.parse::<f64>().is_err()) {
            columns = header_columns(&record)?;
            continue;
        }
        data_row += 1;
        let mut xyz = [0.0; 3];
        for (slot, &col) in xyz.iter_mut().zip(&columns) {
            let cell = record.get(col).ok_or_else(|| Error::Csv {
                row: data_row,
                column: col + 1,
                reason: "missing cell".into(),
            })?;
            *slot = cell.parse::<f64>().map_err(|_| Error::Csv {
                row: data_row,
                column: col + 1,
                reason: format!("`{cell}` is not a number"),
            })?;
        }
        let p = Point3::new(xyz[0], xyz[1], xyz[2]);
        if p.is_finite() {
            points.push(p);
        }
    }
    drop(rdr);
    let mut cloud = PointCloud::new(points);
    cloud.raw_size_bytes = counting.count;
    Ok(cloud)
}

fn header_columns(header: &::csv::StringRecord) -> Result<[usize; 3]> {
    let names: Vec<String> = header.iter().map(|h| h.trim_matches('"').to_ascii_lowercase()).collect();
    let find = |axis: &str, suffix: &str| {
        names.iter().position(|n| n == axis).or_else(|| {
            names.iter().position(|n| n.ends_with(suffix) && n.contains("xyz"))
        })
    };
    match (find("x", ":0"), find("y", ":1"), find("z", ":2")) {
        (Some(x), Some(y), Some(z)) => Ok([x, y, z]),
        _ => Err(Error::Csv { row: 0, column: 0, reason: "header lacks x, y and z columns".into() }),
    }
}

struct CountingReader<R> {
    inner: R,
    count: u64,
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.count += n as u64;
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_single_row() {
        let cloud = read_csv_from("x,y,z\n1,2,3".as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
        assert_eq!(cloud.raw_size_bytes, 11);
    }

    #[test]
    fn headerless_rows() {
        let cloud = read_csv_from("1,2,3\n4.5, -6, 7e-1\n".as_bytes()).unwrap();
        assert_eq!(cloud.points[1], Point3::new(4.5, -6.0, 0.7));
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        match read_csv_from("1,foo,3".as_bytes()) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("{other:?}"),
        }
        match read_csv_from("x,y,z\n1,2,3\n4,5,bar".as_bytes()) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (2, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn named_columns_in_any_order() {
        let text = "intensity,Points_m_XYZ:0,Points_m_XYZ:1,Points_m_XYZ:2\n9,1,2,3\n";
        let cloud = read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
        let cloud = read_csv_from("z,x,y\n3,1,2\n".as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn missing_cell() {
        assert!(matches!(read_csv_from("1,2\n".as_bytes()), Err(Error::Csv { row: 1, column: 3, .. })));
    }
}
