use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lidarpress::bench::{self, BenchConfig, FrameRow};
use lidarpress::ingest::SensorModel;
use lidarpress::synth::{generate_pcap, SynthConfig};

#[derive(Parser)]
#[command(name = "bench", version, about = "LiDAR point-cloud codec benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a codec matrix over captures and write CSV reports.
    Run(RunArgs),
    /// Score sizes and decoded clouds produced by an external codec.
    ImportExternal(ImportArgs),
    /// Write a synthetic street-scene capture as a PCAP file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Input file or directory; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    input: Vec<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    sensor: Option<String>,
    #[arg(long)]
    rpm: Option<u32>,
    /// e.g. png-like,jls-like,octree:low,octree:med,octree:high,video-inter,video-intra
    #[arg(long)]
    codecs: Option<String>,
    #[arg(long)]
    bit_depth: Option<u32>,
    /// spherical, cartesian-tri or cartesian-single
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    repeat: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    max_frames: Option<usize>,
    #[arg(long)]
    octree_deflate: bool,
    /// key=value file; its settings override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    /// CSV of `frame,bytes`.
    #[arg(long)]
    sizes: PathBuf,
    /// Directory holding `<frame>.pcd` decoded clouds.
    #[arg(long)]
    decoded: PathBuf,
    /// Original capture(s) the external codec was run on.
    #[arg(long, value_delimiter = ',', required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value = "pcap")]
    format: String,
    #[arg(long, default_value = "vlp16")]
    sensor: String,
    #[arg(long, default_value_t = 600)]
    rpm: u32,
    #[arg(long, default_value = "external")]
    name: String,
    #[arg(long, default_value_t = lidarpress::metrics::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "vlp16")]
    sensor: String,
    #[arg(long, default_value_t = 600)]
    rpm: u32,
}

fn run_config(a: &RunArgs) -> lidarpress::Result<BenchConfig> {
    let mut c = BenchConfig::default();
    if !a.input.is_empty() {
        c.inputs = a.input.clone();
    }
    let flags: [(&str, Option<String>); 12] = [
        ("format", a.format.clone()),
        ("sensor", a.sensor.clone()),
        ("rpm", a.rpm.map(|v| v.to_string())),
        ("codecs", a.codecs.clone()),
        ("bit-depth", a.bit_depth.map(|v| v.to_string())),
        ("layout", a.layout.clone()),
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
        ("repeat", a.repeat.map(|v| v.to_string())),
        ("k", a.k.map(|v| v.to_string())),
        ("window", a.window.map(|v| v.to_string())),
        ("max-frames", a.max_frames.map(|v| v.to_string())),
        ("octree-deflate", a.octree_deflate.then(|| "true".to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            c.set(key, &v)?;
        }
    }
    if let Some(path) = &a.config {
        c.apply_config_file(path)?;
    }
    Ok(c)
}

fn print_failures(rows: &[FrameRow]) -> usize {
    let mut failed = 0;
    for r in rows {
        if let Err(reason) = &r.result {
            eprintln!("failed: {} frame {}: {reason}", r.codec, r.frame_id);
            failed += 1;
        }
    }
    failed
}

fn print_aggregates(aggs: &[bench::AggregateRow]) {
    println!("{}", bench::AGGREGATE_HEADER.join(","));
    for a in aggs {
        println!("{}", a.csv_record().join(","));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run_config(&args).and_then(|c| {
            let out = bench::run(&c)?;
            if let Some(d) = &out.diagnostics {
                eprintln!(
                    "packets: {} decoded, {} skipped, {} truncated, {} ignored; {} incomplete frames dropped",
                    d.packets_decoded, d.skipped_packets, d.truncated_packets, d.ignored_packets, d.incomplete_frames
                );
            }
            print_aggregates(&out.aggregates);
            Ok(print_failures(&out.rows))
        }),
        Command::ImportExternal(args) => (|| {
            let mut c = BenchConfig::default();
            c.inputs = args.input.clone();
            c.set("format", &args.format)?;
            c.set("sensor", &args.sensor)?;
            c.rpm = args.rpm;
            c.k = args.k;
            let (originals, _) = bench::load_frames(&c)?;
            let sizes = bench::read_sizes_csv(&args.sizes)?;
            let rows = bench::import_external(&sizes, &args.decoded, &originals, &args.name, args.k)?;
            let aggs = bench::aggregate(&rows);
            bench::write_outputs(&args.out, &rows, &aggs)?;
            print_aggregates(&aggs);
            Ok(print_failures(&rows))
        })(),
        Command::Synth(args) => (|| {
            let cfg = SynthConfig {
                sensor: SensorModel::parse(&args.sensor)?,
                rpm: args.rpm,
                frames: args.frames,
                seed: args.seed,
                ..Default::default()
            };
            std::fs::write(&args.out, generate_pcap(&cfg))?;
            Ok(0)
        })(),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
