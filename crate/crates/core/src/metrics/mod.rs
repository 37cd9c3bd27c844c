//! Compression rate, bytes per point, point-to-plane PSNR and timing.

pub mod kdtree;
pub mod normals;
pub mod psnr;
pub mod timing;

pub use kdtree::{KdTree, Neighbor};
pub use normals::{estimate_normal, NormalEstimate, DEFAULT_K};
pub use psnr::{psnr_point_to_plane, psnr_report, PsnrReport};
pub use timing::{timed, timed_median};

use crate::error::{Error, Result};

/// `1 - compressed / raw`; negative when the codec expanded the data.
pub fn compression_rate(compressed_bytes: u64, raw_bytes: u64) -> Result<f64> {
    if raw_bytes == 0 {
        return Err(Error::Metric("raw size is zero".into()));
    }
    Ok(1.0 - compressed_bytes as f64 / raw_bytes as f64)
}

/// Compressed bytes per reconstructed point.
pub fn bpp(compressed_bytes: u64, point_count: u64) -> Result<f64> {
    if point_count == 0 {
        return Err(Error::Metric("no points to divide by".into()));
    }
    Ok(compressed_bytes as f64 / point_count as f64)
}

pub const CSV_HEADER: [&str; 10] =
    ["codec", "frame", "points", "raw_bytes", "comp_bytes", "rate", "bpp", "psnr_db", "enc_s", "dec_s"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub codec: String,
    pub frame_id: u64,
    /// Points in the reconstructed cloud.
    pub points: u64,
    pub raw_bytes: u64,
    pub compressed_bytes: u64,
    pub compression_rate: f64,
    pub bpp: f64,
    /// `+inf` for a lossless reconstruction.
    pub psnr_db: f64,
    pub encode_seconds: f64,
    pub decode_seconds: f64,
}

pub fn format_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

impl MetricsReport {
    pub fn new(
        codec: impl Into<String>,
        frame_id: u64,
        points: u64,
        raw_bytes: u64,
        compressed_bytes: u64,
        psnr_db: f64,
        encode_seconds: f64,
        decode_seconds: f64,
    ) -> Result<Self> {
        Ok(MetricsReport {
            codec: codec.into(),
            frame_id,
            points,
            raw_bytes,
            compressed_bytes,
            compression_rate: compression_rate(compressed_bytes, raw_bytes)?,
            bpp: bpp(compressed_bytes, points)?,
            psnr_db,
            encode_seconds,
            decode_seconds,
        })
    }

    /// One CSV row in [`CSV_HEADER`] order.
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.codec.clone(),
            self.frame_id.to_string(),
            self.points.to_string(),
            self.raw_bytes.to_string(),
            self.compressed_bytes.to_string(),
            format_float(self.compression_rate),
            format_float(self.bpp),
            format_float(self.psnr_db),
            format_float(self.encode_seconds),
            format_float(self.decode_seconds),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_and_bpp() {
        assert_eq!(compression_rate(50, 50).unwrap(), 0.0);
        assert_eq!(compression_rate(0, 50).unwrap(), 1.0);
        assert_eq!(compression_rate(75, 50).unwrap(), -0.5);
        assert!(compression_rate(1, 0).is_err());
        assert_eq!(bpp(100, 100).unwrap(), 1.0);
        assert!(bpp(100, 0).is_err());
    }

    #[test]
    fn rate_and_bpp_are_consistent() {
        for (s, n, raw) in [(123u64, 40u64, 1000u64), (7, 7, 7), (5000, 33, 900)] {
            let r = compression_rate(s, raw).unwrap();
            let b = bpp(s, n).unwrap();
            assert!((r - (1.0 - b * n as f64 / raw as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_rate_formats() {
        // 98.74 % rate as reported for an external geometry codec
        let r = MetricsReport::new("external:gpcc", 0, 10_000, 1_000_000, 12_600, f64::INFINITY, 0.0, 0.0).unwrap();
        assert!((r.compression_rate - 0.9874).abs() < 1e-12);
        let row = r.csv_record();
        assert_eq!(row.len(), CSV_HEADER.len());
        assert_eq!(row[7], "inf");
        assert_eq!(parse_float(&row[5]).unwrap(), r.compression_rate);
    }

    #[test]
    fn golden_header() {
        assert_eq!(CSV_HEADER.join(","), "codec,frame,points,raw_bytes,comp_bytes,rate,bpp,psnr_db,enc_s,dec_s");
    }
}
