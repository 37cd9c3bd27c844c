//! Benchmark harness: runs codec matrices over captures and writes CSV reports.

mod external;
mod output;
mod run;

pub use external::{import_external, read_sizes_csv};
pub use output::{aggregate, write_outputs, AggregateRow, AGGREGATE_HEADER, SCATTER_HEADER};
pub use run::{encode_decode, load_frames, run, run_frames, FrameRow, RunOutcome};

use std::path::{Path, PathBuf};

use crate::cloud::BitDepth;
use crate::error::{Error, Result};
use crate::ingest::SensorModel;
use crate::octree::{profile_resolution, Profile};
use crate::projection::ImageLayout;

#[derive(Debug, Clone, PartialEq)]
pub enum CodecSpec {
    /// Dictionary image codec.
    PngLike,
    /// Predictive image codec.
    JlsLike,
    Octree { label: String, resolution: f64 },
    VideoInter,
    VideoIntra,
}

impl CodecSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "png-like" | "png" => CodecSpec::PngLike,
            "jls-like" | "jls" => CodecSpec::JlsLike,
            "video-inter" => CodecSpec::VideoInter,
            "video-intra" => CodecSpec::VideoIntra,
            _ => {
                let Some(arg) = s.strip_prefix("octree:") else {
                    return Err(Error::Config(format!("unknown codec `{s}`")));
                };
                match Profile::parse(arg) {
                    Ok(p) => CodecSpec::Octree { label: p.name().into(), resolution: profile_resolution(p) },
                    Err(_) => {
                        let r: f64 = arg.parse().map_err(|_| Error::Config(format!("bad octree profile `{arg}`")))?;
                        if !(r > 0.0 && r.is_finite()) {
                            return Err(Error::Config(format!("octree resolution must be positive, got {arg}")));
                        }
                        CodecSpec::Octree { label: arg.into(), resolution: r }
                    }
                }
            }
        })
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(Self::parse).collect()
    }

    /// Name used in the `codec` column.
    pub fn label(&self, layout: ImageLayout, bit_depth: BitDepth) -> String {
        match self {
            CodecSpec::PngLike => format!("png-like/{}/{}", layout.name(), bit_depth.bits()),
            CodecSpec::JlsLike => format!("jls-like/{}/{}", layout.name(), bit_depth.bits()),
            CodecSpec::Octree { label, .. } => format!("octree:{label}"),
            CodecSpec::VideoInter => format!("video-inter/{}/8", layout.name()),
            CodecSpec::VideoIntra => format!("video-intra/{}/8", layout.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Pcap,
    Pcd,
    Csv,
}

impl InputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pcap" => Ok(InputFormat::Pcap),
            "pcd" => Ok(InputFormat::Pcd),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::Config(format!("unknown input format `{other}`"))),
        }
    }

    fn extension(self) -> &'static str {
        match self {
            InputFormat::Pcap => "pcap",
            InputFormat::Pcd => "pcd",
            InputFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Files, or directories scanned for files of the input format.
    pub inputs: Vec<PathBuf>,
    pub format: InputFormat,
    pub sensor: SensorModel,
    pub rpm: u32,
    pub codecs: Vec<CodecSpec>,
    pub bit_depth: BitDepth,
    pub layout: ImageLayout,
    /// Neighbours for normal estimation.
    pub k: usize,
    /// Frames per video sequence.
    pub window: usize,
    pub out_dir: PathBuf,
    /// Timed runs per measurement, after one discarded warm-up run.
    pub repeat: usize,
    pub max_frames: Option<usize>,
    /// DEFLATE the octree occupancy bytes.
    pub octree_deflate: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            inputs: Vec::new(),
            format: InputFormat::Pcap,
            sensor: SensorModel::Vlp16,
            rpm: 600,
            codecs: vec![
                CodecSpec::PngLike,
                CodecSpec::JlsLike,
                CodecSpec::parse("octree:low").unwrap(),
                CodecSpec::parse("octree:med").unwrap(),
                CodecSpec::parse("octree:high").unwrap(),
                CodecSpec::VideoInter,
                CodecSpec::VideoIntra,
            ],
            bit_depth: BitDepth::Sixteen,
            layout: ImageLayout::Spherical,
            k: crate::metrics::DEFAULT_K,
            window: 10,
            out_dir: PathBuf::from("bench-out"),
            repeat: 3,
            max_frames: None,
            octree_deflate: false,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("`{key}` expects a number, got `{v}`")))
}

impl BenchConfig {
    /// Applies one `key=value` setting; keys match the long CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "input" => self.inputs = v.split(',').map(|s| PathBuf::from(s.trim())).collect(),
            "format" => self.format = InputFormat::parse(v)?,
            "sensor" => self.sensor = SensorModel::parse(v).map_err(|e| Error::Config(e.to_string()))?,
            "rpm" => self.rpm = parse_num(key, v)?,
            "codecs" => self.codecs = CodecSpec::parse_list(v)?,
            "bit-depth" => {
                self.bit_depth = BitDepth::from_bits(parse_num(key, v)?).map_err(|e| Error::Config(e.to_string()))?
            }
            "layout" => self.layout = ImageLayout::parse(v).map_err(|e| Error::Config(e.to_string()))?,
            "k" => self.k = parse_num(key, v)?,
            "window" => self.window = parse_num(key, v)?,
            "out" => self.out_dir = PathBuf::from(v),
            "repeat" => self.repeat = parse_num(key, v)?,
            "max-frames" => self.max_frames = Some(parse_num(key, v)?),
            "octree-deflate" => self.octree_deflate = parse_bool(v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.apply_config_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.codecs.is_empty() {
            return Err(Error::Config("at least one codec is required".into()));
        }
        if self.repeat == 0 {
            return Err(Error::Config("repeat must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.k < 3 {
            return Err(Error::Config("k must be at least 3".into()));
        }
        Ok(())
    }

    /// Input files, with directories expanded to their sorted matching files.
    pub fn input_files(&self) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for p in &self.inputs {
            if p.is_dir() {
                let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case(self.format.extension())))
                    .collect();
                found.sort();
                files.extend(found);
            } else {
                files.push(p.clone());
            }
        }
        Ok(files)
    }
}
