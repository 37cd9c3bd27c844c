//! Capture and interchange-format readers.

pub mod csv;
pub mod pcap;
pub mod pcd;
pub mod velodyne;

pub use self::csv::{read_csv, read_csv_from};
pub use pcd::{read_pcd, read_pcd_bytes, write_pcd, write_pcd_bytes, PcdDataMode};
pub use velodyne::{parse_velodyne_pcap, CaptureStream, ParseDiagnostics, ParsedCapture, SensorModel};
