use std::path::Path;

use crate::bench::FrameRow;
use crate::error::{Error, Result};
use crate::metrics::{format_float, CSV_HEADER};

pub const AGGREGATE_HEADER: [&str; 9] =
    ["codec", "frames", "failed", "mean_rate", "mean_bpp", "mean_psnr_db", "mean_enc_s", "mean_dec_s", "total_points"];

pub const SCATTER_HEADER: [&str; 3] = ["codec", "bpp", "psnr_db"];

/// Per-codec means over the frames that succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub codec: String,
    pub frames: usize,
    pub failed: usize,
    pub mean_rate: f64,
    pub mean_bpp: f64,
    pub mean_psnr_db: f64,
    pub mean_encode_seconds: f64,
    pub mean_decode_seconds: f64,
    pub total_points: u64,
}

impl AggregateRow {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.codec.clone(),
            self.frames.to_string(),
            self.failed.to_string(),
            format_float(self.mean_rate),
            format_float(self.mean_bpp),
            format_float(self.mean_psnr_db),
            format_float(self.mean_encode_seconds),
            format_float(self.mean_decode_seconds),
            self.total_points.to_string(),
        ]
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Groups rows by codec in first-appearance order.
pub fn aggregate(rows: &[FrameRow]) -> Vec<AggregateRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.codec.as_str()) {
            order.push(&r.codec);
        }
    }
    order
        .into_iter()
        .map(|codec| {
            let all: Vec<&FrameRow> = rows.iter().filter(|r| r.codec == codec).collect();
            let ok: Vec<_> = all.iter().filter_map(|r| r.result.as_ref().ok()).collect();
            AggregateRow {
                codec: codec.to_string(),
                frames: ok.len(),
                failed: all.len() - ok.len(),
                mean_rate: mean(ok.iter().map(|m| m.compression_rate)),
                mean_bpp: mean(ok.iter().map(|m| m.bpp)),
                mean_psnr_db: mean(ok.iter().map(|m| m.psnr_db)),
                mean_encode_seconds: mean(ok.iter().map(|m| m.encode_seconds)),
                mean_decode_seconds: mean(ok.iter().map(|m| m.decode_seconds)),
                total_points: ok.iter().map(|m| m.points).sum(),
            }
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes `frames.csv`, `aggregate.csv`, `psnr_vs_bpp.csv` and
/// `failures.csv` into `dir`. Failed rows keep codec and frame and leave the
/// numeric fields empty.
pub fn write_outputs(dir: &Path, rows: &[FrameRow], aggregates: &[AggregateRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = writer(&dir.join("frames.csv"))?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let record = match &r.result {
            Ok(m) => m.csv_record(),
            Err(_) => {
                let mut v = vec![r.codec.clone(), r.frame_id.to_string()];
                v.resize(CSV_HEADER.len(), String::new());
                v
            }
        };
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("aggregate.csv"))?;
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for a in aggregates {
        w.write_record(a.csv_record()).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("psnr_vs_bpp.csv"))?;
    w.write_record(SCATTER_HEADER).map_err(csv_err)?;
    for a in aggregates.iter().filter(|a| a.frames > 0) {
        w.write_record([a.codec.clone(), format_float(a.mean_bpp), format_float(a.mean_psnr_db)]).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("failures.csv"))?;
    w.write_record(["codec", "frame", "reason"]).map_err(csv_err)?;
    for r in rows {
        if let Err(reason) = &r.result {
            w.write_record([r.codec.clone(), r.frame_id.to_string(), reason.clone()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{parse_float, MetricsReport};

    fn row(codec: &str, frame: u64, comp: u64, psnr: f64) -> FrameRow {
        FrameRow {
            codec: codec.into(),
            frame_id: frame,
            result: Ok(MetricsReport::new(codec, frame, 100, 1000, comp, psnr, 0.01, 0.005).unwrap()),
        }
    }

    #[test]
    fn means_match_rows() {
        let rows = vec![
            row("a", 0, 100, 90.0),
            row("b", 0, 300, 50.0),
            row("a", 1, 200, 110.0),
            FrameRow { codec: "a".into(), frame_id: 2, result: Err("boom".into()) },
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].codec, "a");
        assert_eq!(agg[0].frames, 2);
        assert_eq!(agg[0].failed, 1);
        assert!((agg[0].mean_rate - 0.85).abs() < 1e-12);
        assert!((agg[0].mean_bpp - 1.5).abs() < 1e-12);
        assert_eq!(agg[0].mean_psnr_db, 100.0);
        assert_eq!(agg[1].total_points, 100);
    }

    #[test]
    fn files_are_strict_csv() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row("a", 0, 100, f64::INFINITY),
            FrameRow { codec: "a".into(), frame_id: 1, result: Err("decoded file missing, \"x\"".into()) },
        ];
        let agg = aggregate(&rows);
        write_outputs(dir.path(), &rows, &agg).unwrap();
        let mut r = csv::Reader::from_path(dir.path().join("frames.csv")).unwrap();
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
        let recs: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(&recs[0][7], "inf");
        assert_eq!(&recs[1][0], "a");
        assert_eq!(&recs[1][5], "");
        let mut r = csv::Reader::from_path(dir.path().join("failures.csv")).unwrap();
        let f: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(&f[0][2], "decoded file missing, \"x\"");
        let mut r = csv::Reader::from_path(dir.path().join("psnr_vs_bpp.csv")).unwrap();
        let s: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(parse_float(&s[0][1]), Some(1.0));
        assert_eq!(parse_float(&s[0][2]), Some(f64::INFINITY));
    }

    #[test]
    fn empty_run_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &[], &[]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("frames.csv")).unwrap();
        assert_eq!(text, format!("{}\n", CSV_HEADER.join(",")));
    }
}
