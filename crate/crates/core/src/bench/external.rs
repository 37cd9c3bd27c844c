use std::path::Path;

use crate::bench::FrameRow;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::ingest::read_pcd;
use crate::metrics::{psnr_point_to_plane, MetricsReport};

/// Reads `frame,bytes` pairs. A header line is allowed.
pub fn read_sizes_csv(path: impl AsRef<Path>) -> Result<Vec<(u64, u64)>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut sizes = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if rec.len() < 2 {
            return Err(Error::Config(format!("{}: line {}: expected frame,bytes", path.display(), n + 1)));
        }
        match (rec[0].parse::<u64>(), rec[1].parse::<u64>()) {
            (Ok(f), Ok(b)) => sizes.push((f, b)),
            _ if n == 0 => continue,
            _ => {
                return Err(Error::Config(format!(
                    "{}: line {}: bad size row `{},{}`",
                    path.display(),
                    n + 1,
                    &rec[0],
                    &rec[1]
                )))
            }
        }
    }
    Ok(sizes)
}

/// Scores an externally encoded run. `decoded_dir` holds `<frame>.pcd` per
/// entry in `sizes`; `originals` are matched by frame id.
pub fn import_external(
    sizes: &[(u64, u64)],
    decoded_dir: &Path,
    originals: &[PointCloud],
    name: &str,
    k: usize,
) -> Result<Vec<FrameRow>> {
    if sizes.len() != originals.len() {
        return Err(Error::InvalidArgument(format!(
            "{} sizes for {} original frames",
            sizes.len(),
            originals.len()
        )));
    }
    let label = format!("external:{name}");
    let mut rows = Vec::with_capacity(sizes.len());
    for &(frame, bytes) in sizes {
        let original = originals
            .iter()
            .find(|c| c.frame_id == frame)
            .ok_or_else(|| Error::InvalidArgument(format!("no original frame {frame}")))?;
        let path = decoded_dir.join(format!("{frame}.pcd"));
        let result = if path.is_file() {
            read_pcd(&path).and_then(|rec| {
                let psnr = psnr_point_to_plane(original, &rec, k)?;
                MetricsReport::new(&label, frame, rec.len() as u64, original.raw_size_bytes, bytes, psnr, 0.0, 0.0)
            })
        } else {
            Err(Error::InvalidArgument(format!("decoded file {} is missing", path.display())))
        };
        rows.push(FrameRow { codec: label.clone(), frame_id: frame, result: result.map_err(|e| e.to_string()) });
    }
    Ok(rows)
}
