use std::path::Path;

use crate::bench::output::{aggregate, write_outputs, AggregateRow};
use crate::bench::{BenchConfig, CodecSpec, InputFormat};
use crate::cloud::PointCloud;
use crate::codec::{dictionary_decode, dictionary_encode, predictive_decode, predictive_encode, CompressedBlob};
use crate::error::{Error, Result};
use crate::ingest::{parse_velodyne_pcap, read_csv, read_pcd, CaptureStream, ParseDiagnostics};
use crate::metrics::{psnr_point_to_plane, timed_median, MetricsReport};
use crate::octree::{octree_decode, octree_encode};
use crate::projection::{project, unproject, GridLayout, ProjectOptions, RangeImage};
use crate::video::{interframe_decode, interframe_encode, intraframe_decode, intraframe_encode, FrameSequence};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub codec: String,
    pub frame_id: u64,
    /// Metrics, or the reason the frame failed.
    pub result: std::result::Result<MetricsReport, String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<FrameRow>,
    pub aggregates: Vec<AggregateRow>,
    pub diagnostics: Option<ParseDiagnostics>,
}

impl RunOutcome {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Reads every input into frames, in input order.
pub fn load_frames(config: &BenchConfig) -> Result<(Vec<PointCloud>, Option<ParseDiagnostics>)> {
    let files = config.input_files()?;
    let mut frames = Vec::new();
    let mut diagnostics = None;
    for f in &files {
        match config.format {
            InputFormat::Pcap => {
                let parsed = parse_velodyne_pcap(&CaptureStream::from_path(f, config.sensor, config.rpm)?)?;
                let d: &mut ParseDiagnostics = diagnostics.get_or_insert_with(ParseDiagnostics::default);
                d.packets_decoded += parsed.diagnostics.packets_decoded;
                d.skipped_packets += parsed.diagnostics.skipped_packets;
                d.truncated_packets += parsed.diagnostics.truncated_packets;
                d.ignored_packets += parsed.diagnostics.ignored_packets;
                d.incomplete_frames += parsed.diagnostics.incomplete_frames;
                frames.extend(parsed.frames);
            }
            InputFormat::Pcd => frames.push(read_pcd(f)?),
            InputFormat::Csv => frames.push(read_csv(f)?),
        }
    }
    for (i, f) in frames.iter_mut().enumerate() {
        f.frame_id = i as u64;
    }
    if let Some(max) = config.max_frames {
        frames.truncate(max);
    }
    Ok((frames, diagnostics))
}

/// Loads the inputs, runs the matrix and writes the CSV files to `out_dir`.
pub fn run(config: &BenchConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (frames, diagnostics) = load_frames(config)?;
    let rows = run_frames(config, &frames);
    let aggregates = aggregate(&rows);
    write_outputs(Path::new(&config.out_dir), &rows, &aggregates)?;
    Ok(RunOutcome { rows, aggregates, diagnostics })
}

fn grid_for(config: &BenchConfig) -> GridLayout {
    GridLayout::for_sensor(config.sensor, config.rpm)
}

fn project_frame(config: &BenchConfig, cloud: &PointCloud) -> Result<Vec<RangeImage>> {
    Ok(project(cloud, &grid_for(config), config.layout, config.bit_depth, ProjectOptions::default())?.images)
}

/// One single-frame codec: returns (compressed bytes, reconstruction,
/// median encode seconds, median decode seconds).
pub fn encode_decode(spec: &CodecSpec, config: &BenchConfig, cloud: &PointCloud) -> Result<(u64, PointCloud, f64, f64)> {
    let repeat = config.repeat;
    match spec {
        CodecSpec::PngLike | CodecSpec::JlsLike => {
            let png = *spec == CodecSpec::PngLike;
            let (blobs, enc) = timed_median(repeat, || -> Result<Vec<CompressedBlob>> {
                project_frame(config, cloud)?
                    .iter()
                    .map(|img| if png { dictionary_encode(img) } else { predictive_encode(img) })
                    .collect()
            });
            let blobs = blobs?;
            let (decoded, dec) = timed_median(repeat, || -> Result<PointCloud> {
                let images = blobs
                    .iter()
                    .map(|b| if png { dictionary_decode(b) } else { predictive_decode(b) })
                    .collect::<Result<Vec<_>>>()?;
                unproject(&images)
            });
            Ok((blobs.iter().map(|b| b.len() as u64).sum(), decoded?, enc, dec))
        }
        CodecSpec::Octree { resolution, .. } => {
            let (bytes, enc) = timed_median(repeat, || octree_encode(cloud, *resolution, config.octree_deflate));
            let bytes = bytes?;
            let (decoded, dec) = timed_median(repeat, || octree_decode(&bytes));
            Ok((bytes.len() as u64, decoded?, enc, dec))
        }
        CodecSpec::VideoInter | CodecSpec::VideoIntra => {
            let mut rows = video_window(spec, config, std::slice::from_ref(cloud))?;
            let (bytes, rec, enc, dec) = rows.remove(0);
            Ok((bytes, rec, enc, dec))
        }
    }
}

/// Encodes a window of frames as sequences (one per image of the layout)
/// and splits sizes and times evenly across the frames.
fn video_window(spec: &CodecSpec, config: &BenchConfig, window: &[PointCloud]) -> Result<Vec<(u64, PointCloud, f64, f64)>> {
    let inter = *spec == CodecSpec::VideoInter;
    let repeat = config.repeat;
    let (blobs, enc) = timed_median(repeat, || -> Result<Vec<CompressedBlob>> {
        let projected = window.iter().map(|c| project_frame(config, c)).collect::<Result<Vec<_>>>()?;
        let per_frame = projected[0].len();
        (0..per_frame)
            .map(|j| {
                let seq = FrameSequence::new(projected.iter().map(|imgs| imgs[j].clone()).collect())?;
                if inter { interframe_encode(&seq) } else { intraframe_encode(&seq) }
            })
            .collect()
    });
    let blobs = blobs?;
    let (decoded, dec) = timed_median(repeat, || -> Result<Vec<PointCloud>> {
        let seqs = blobs
            .iter()
            .map(|b| if inter { interframe_decode(b) } else { intraframe_decode(b) })
            .collect::<Result<Vec<_>>>()?;
        (0..window.len())
            .map(|i| {
                let images: Vec<RangeImage> = seqs.iter().map(|s| s.frames()[i].clone()).collect();
                unproject(&images)
            })
            .collect()
    });
    let decoded = decoded?;
    let total: u64 = blobs.iter().map(|b| b.len() as u64).sum();
    let n = window.len() as u64;
    Ok(decoded
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            let i = i as u64;
            let share = total * (i + 1) / n - total * i / n;
            (share, rec, enc / n as f64, dec / n as f64)
        })
        .collect())
}

fn report(
    label: &str,
    config: &BenchConfig,
    original: &PointCloud,
    outcome: Result<(u64, PointCloud, f64, f64)>,
) -> FrameRow {
    let result = outcome.and_then(|(bytes, rec, enc, dec)| {
        if original.raw_size_bytes == 0 {
            return Err(Error::Metric("frame has no raw size".into()));
        }
        let psnr = psnr_point_to_plane(original, &rec, config.k)?;
        MetricsReport::new(label, original.frame_id, rec.len() as u64, original.raw_size_bytes, bytes, psnr, enc, dec)
    });
    FrameRow { codec: label.to_string(), frame_id: original.frame_id, result: result.map_err(|e| e.to_string()) }
}

/// Runs every codec over every frame. Failures become failed rows.
pub fn run_frames(config: &BenchConfig, frames: &[PointCloud]) -> Vec<FrameRow> {
    let mut rows = Vec::new();
    for spec in &config.codecs {
        let label = spec.label(config.layout, config.bit_depth);
        match spec {
            CodecSpec::VideoInter | CodecSpec::VideoIntra => {
                for window in frames.chunks(config.window) {
                    match video_window(spec, config, window) {
                        Ok(results) => {
                            for (orig, r) in window.iter().zip(results) {
                                rows.push(report(&label, config, orig, Ok(r)));
                            }
                        }
                        Err(e) => {
                            for orig in window {
                                rows.push(FrameRow { codec: label.clone(), frame_id: orig.frame_id, result: Err(e.to_string()) });
                            }
                        }
                    }
                }
            }
            _ => {
                for f in frames {
                    rows.push(report(&label, config, f, encode_decode(spec, config, f)));
                }
            }
        }
    }
    rows
}
