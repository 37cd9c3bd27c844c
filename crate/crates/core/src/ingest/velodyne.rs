//! Velodyne VLP-16 / HDL-32 single-return data packets.
//!
//! A 1206-byte payload holds 12 data blocks followed by a 4-byte timestamp
//! and 2 factory bytes. Each block is a `0xFF 0xEE` flag, a little-endian
//! azimuth in hundredths of a degree and 32 returns of (distance in 2 mm
//! units, reflectivity). The VLP-16 packs two 16-laser firing sequences in a
//! block; the HDL-32 packs one 32-laser firing.

use std::f64::consts::PI;

use crate::cloud::{to_cartesian, Point3, PointCloud, Provenance, SphericalPoint};
use crate::error::{Error, Result};
use crate::ingest::pcap::{udp_payload, Next, PcapReader};
use crate::projection::GridLayout;

pub const PAYLOAD_LEN: usize = 1206;
pub const BLOCKS_PER_PACKET: usize = 12;
pub const RETURNS_PER_BLOCK: usize = 32;
pub const BLOCK_LEN: usize = 4 + RETURNS_PER_BLOCK * 3;
pub const DEFAULT_DATA_PORT: u16 = 2368;
/// Meters per distance unit.
pub const DISTANCE_UNIT: f64 = 0.002;

const BLOCK_FLAG: [u8; 2] = [0xFF, 0xEE];

const VLP16_ELEVATIONS_DEG: [f64; 16] =
    [-15.0, 1.0, -13.0, 3.0, -11.0, 5.0, -9.0, 7.0, -7.0, 9.0, -5.0, 11.0, -3.0, 13.0, -1.0, 15.0];

const HDL32_ELEVATIONS_DEG: [f64; 32] = [
    -30.67, -9.33, -29.33, -8.00, -28.00, -6.67, -26.67, -5.33, -25.33, -4.00, -24.00, -2.67,
    -22.67, -1.33, -21.33, 0.00, -20.00, 1.33, -18.67, 2.67, -17.33, 4.00, -16.00, 5.33, -14.67,
    6.67, -13.33, 8.00, -12.00, 9.33, -10.67, 10.67,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorModel {
    Vlp16,
    Hdl32,
}

impl SensorModel {
    pub fn laser_count(self) -> usize {
        match self {
            SensorModel::Vlp16 => 16,
            SensorModel::Hdl32 => 32,
        }
    }

    /// Firing sequences carried by one data block.
    pub fn firings_per_block(self) -> usize {
        RETURNS_PER_BLOCK / self.laser_count()
    }

    pub fn elevation_deg(self, laser: usize) -> f64 {
        match self {
            SensorModel::Vlp16 => VLP16_ELEVATIONS_DEG[laser],
            SensorModel::Hdl32 => HDL32_ELEVATIONS_DEG[laser],
        }
    }

    pub fn elevations_rad(self) -> Vec<f64> {
        (0..self.laser_count()).map(|l| self.elevation_deg(l).to_radians()).collect()
    }

    /// Firing sequences per revolution at `rpm`, which is also the default
    /// number of azimuth columns.
    pub fn firings_per_rotation(self, rpm: u32) -> usize {
        let base = match self {
            SensorModel::Vlp16 => 1800.0,
            SensorModel::Hdl32 => 2160.0,
        };
        ((base * 600.0 / rpm.max(1) as f64).round() as usize).max(1)
    }

    pub fn max_range(self) -> f64 {
        match self {
            SensorModel::Vlp16 => 100.0,
            SensorModel::Hdl32 => 100.0,
        }
    }

    fn factory_byte(self) -> u8 {
        match self {
            SensorModel::Vlp16 => 0x22,
            SensorModel::Hdl32 => 0x21,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "vlp16" => Ok(SensorModel::Vlp16),
            "hdl32" | "hdl32e" => Ok(SensorModel::Hdl32),
            other => Err(Error::InvalidArgument(format!("unknown sensor model `{other}`"))),
        }
    }
}

/// Maps the sensor's clockwise-from-+y azimuth (degrees) to the
/// counter-clockwise-from-+x azimuth used by [`crate::cloud::to_spherical`].
pub fn sensor_azimuth_to_phi(azimuth_deg: f64) -> f64 {
    let mut phi = (90.0 - azimuth_deg).to_radians();
    while phi <= -PI {
        phi += 2.0 * PI;
    }
    while phi > PI {
        phi -= 2.0 * PI;
    }
    phi
}

/// The point a single return describes.
pub fn return_to_point(model: SensorModel, laser: usize, azimuth_cdeg: f64, distance: u16) -> Point3 {
    to_cartesian(SphericalPoint {
        rho: distance as f64 * DISTANCE_UNIT,
        theta: model.elevation_deg(laser).to_radians(),
        phi: sensor_azimuth_to_phi(azimuth_cdeg / 100.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataBlock {
    pub azimuth: u16,
    /// (distance in 2 mm units, reflectivity)
    pub returns: [(u16, u8); RETURNS_PER_BLOCK],
}

impl Default for DataBlock {
    fn default() -> Self {
        DataBlock { azimuth: 0, returns: [(0, 0); RETURNS_PER_BLOCK] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub blocks: [DataBlock; BLOCKS_PER_PACKET],
    pub timestamp_us: u32,
}

impl DataPacket {
    pub fn encode(&self, model: SensorModel) -> [u8; PAYLOAD_LEN] {
        let mut out = [0u8; PAYLOAD_LEN];
        for (b, block) in self.blocks.iter().enumerate() {
            let base = b * BLOCK_LEN;
            out[base..base + 2].copy_from_slice(&BLOCK_FLAG);
            out[base + 2..base + 4].copy_from_slice(&block.azimuth.to_le_bytes());
            for (i, &(dist, refl)) in block.returns.iter().enumerate() {
                let at = base + 4 + i * 3;
                out[at..at + 2].copy_from_slice(&dist.to_le_bytes());
                out[at + 2] = refl;
            }
        }
        let tail = BLOCKS_PER_PACKET * BLOCK_LEN;
        out[tail..tail + 4].copy_from_slice(&self.timestamp_us.to_le_bytes());
        out[tail + 4] = 0x37;
        out[tail + 5] = model.factory_byte();
        out
    }

    pub fn decode(payload: &[u8]) -> Result<Self> {
        if payload.len() != PAYLOAD_LEN {
            return Err(Error::InvalidArgument(format!(
                "payload is {} bytes, expected {PAYLOAD_LEN}",
                payload.len()
            )));
        }
        let mut blocks = [DataBlock::default(); BLOCKS_PER_PACKET];
        for (b, block) in blocks.iter_mut().enumerate() {
            let raw = &payload[b * BLOCK_LEN..(b + 1) * BLOCK_LEN];
            if raw[..2] != BLOCK_FLAG {
                return Err(Error::InvalidArgument(format!("block {b} has a bad flag")));
            }
            block.azimuth = u16::from_le_bytes([raw[2], raw[3]]);
            if block.azimuth >= 36000 {
                return Err(Error::InvalidArgument(format!(
                    "block {b} azimuth {} out of range",
                    block.azimuth
                )));
            }
            for (i, r) in block.returns.iter_mut().enumerate() {
                let at = 4 + i * 3;
                *r = (u16::from_le_bytes([raw[at], raw[at + 1]]), raw[at + 2]);
            }
        }
        let tail = BLOCKS_PER_PACKET * BLOCK_LEN;
        let timestamp_us = u32::from_le_bytes(payload[tail..tail + 4].try_into().unwrap());
        Ok(DataPacket { blocks, timestamp_us })
    }
}

/// Azimuth (hundredths of a degree, in [0, 36000)) of every firing sequence
/// in a packet. The second VLP-16 sequence of a block sits halfway to the
/// next block's azimuth; the last block reuses the previous step.
pub fn firing_azimuths(model: SensorModel, block_azimuths: &[u16; BLOCKS_PER_PACKET]) -> Vec<f64> {
    let per_block = model.firings_per_block();
    let step = |a: u16, b: u16| ((b as u32 + 36000 - a as u32) % 36000) as f64;
    let mut out = Vec::with_capacity(BLOCKS_PER_PACKET * per_block);
    for (i, &az) in block_azimuths.iter().enumerate() {
        out.push(az as f64);
        if per_block == 2 {
            let delta = if i + 1 < BLOCKS_PER_PACKET {
                step(az, block_azimuths[i + 1])
            } else {
                step(block_azimuths[i - 1], az)
            };
            out.push((az as f64 + delta / 2.0) % 36000.0);
        }
    }
    out
}

/// Input to [`parse_velodyne_pcap`].
#[derive(Debug, Clone)]
pub struct CaptureStream {
    pub data: Vec<u8>,
    pub sensor_model: SensorModel,
    pub rotation_rpm: u32,
    pub data_port: u16,
}

impl CaptureStream {
    pub fn new(data: Vec<u8>, sensor_model: SensorModel, rotation_rpm: u32) -> Self {
        CaptureStream { data, sensor_model, rotation_rpm, data_port: DEFAULT_DATA_PORT }
    }

    pub fn from_path(path: impl AsRef<std::path::Path>, sensor_model: SensorModel, rotation_rpm: u32) -> Result<Self> {
        Ok(Self::new(std::fs::read(path)?, sensor_model, rotation_rpm))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseDiagnostics {
    pub packets_decoded: usize,
    /// Data-port packets dropped for a wrong length, flag or azimuth.
    pub skipped_packets: usize,
    /// Records cut short by the end of the file.
    pub truncated_packets: usize,
    /// Non-UDP traffic or UDP on other ports (GPS/position packets).
    pub ignored_packets: usize,
    /// Rotation segments (leading or trailing) too short to be a full frame.
    pub incomplete_frames: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedCapture {
    pub frames: Vec<PointCloud>,
    pub diagnostics: ParseDiagnostics,
}

/// Accumulates firings and splits them into rotations at each azimuth wrap.
#[derive(Debug)]
pub struct FrameAssembly {
    model: SensorModel,
    grid: GridLayout,
    points: Vec<Point3>,
    provenance: Vec<Provenance>,
    raw_bytes: u64,
    last_azimuth: Option<f64>,
    swept: f64,
    next_id: u64,
    incomplete: usize,
    frames: Vec<PointCloud>,
}

impl FrameAssembly {
    pub fn new(model: SensorModel, rpm: u32) -> Self {
        FrameAssembly {
            model,
            grid: GridLayout::for_sensor(model, rpm),
            points: Vec::new(),
            provenance: Vec::new(),
            raw_bytes: 0,
            last_azimuth: None,
            swept: 0.0,
            next_id: 0,
            incomplete: 0,
            frames: Vec::new(),
        }
    }

    /// Ends the current segment; it becomes a frame only if it swept (close
    /// to) a full turn, otherwise it is counted as incomplete and dropped.
    fn close(&mut self) {
        let bin_cdeg = 36000.0 / self.grid.cols() as f64;
        if self.swept + 2.0 * bin_cdeg >= 36000.0 - 1e-9 {
            self.frames.push(PointCloud {
                points: std::mem::take(&mut self.points),
                provenance: Some(std::mem::take(&mut self.provenance)),
                frame_id: self.next_id,
                raw_size_bytes: std::mem::take(&mut self.raw_bytes),
            });
            self.next_id += 1;
        } else {
            self.points.clear();
            self.provenance.clear();
            self.raw_bytes = 0;
            self.incomplete += 1;
        }
        self.swept = 0.0;
    }

    /// Adds one firing sequence. `lasers` holds (laser index, distance units).
    pub fn push_firing(&mut self, azimuth_cdeg: f64, lasers: impl Iterator<Item = (usize, u16)>, raw_bytes: u64) {
        if let Some(last) = self.last_azimuth {
            if azimuth_cdeg < last {
                self.close();
            } else {
                self.swept += azimuth_cdeg - last;
            }
        }
        self.last_azimuth = Some(azimuth_cdeg);
        self.raw_bytes += raw_bytes;
        let bin = self.grid.column_of(sensor_azimuth_to_phi(azimuth_cdeg / 100.0)) as u32;
        for (laser, distance) in lasers {
            if distance == 0 {
                continue;
            }
            self.points.push(return_to_point(self.model, laser, azimuth_cdeg, distance));
            self.provenance.push(Provenance { laser_id: laser as u16, azimuth_bin: bin });
        }
    }

    /// Closes the trailing segment under the same full-turn rule.
    pub fn finish(mut self, diagnostics: &mut ParseDiagnostics) -> Vec<PointCloud> {
        if self.last_azimuth.is_some() {
            self.close();
        }
        diagnostics.incomplete_frames += self.incomplete;
        self.frames
    }
}

/// Decodes every data packet of a capture and groups returns into full
/// rotations. Zero-distance returns are dropped.
pub fn parse_velodyne_pcap(stream: &CaptureStream) -> Result<ParsedCapture> {
    let mut reader = PcapReader::new(&stream.data)?;
    let model = stream.sensor_model;
    let mut diagnostics = ParseDiagnostics::default();
    let mut assembly = FrameAssembly::new(model, stream.rotation_rpm);
    let lasers = model.laser_count();

    while let Some(next) = reader.next_record() {
        let record = match next {
            Next::Record(r) => r,
            Next::Truncated { .. } => {
                diagnostics.truncated_packets += 1;
                continue;
            }
        };
        let Some(udp) = udp_payload(reader.link_type, record.data) else {
            diagnostics.ignored_packets += 1;
            continue;
        };
        if udp.dst_port != stream.data_port {
            diagnostics.ignored_packets += 1;
            continue;
        }
        let Ok(packet) = DataPacket::decode(udp.payload) else {
            diagnostics.skipped_packets += 1;
            continue;
        };
        diagnostics.packets_decoded += 1;

        let block_az: [u16; BLOCKS_PER_PACKET] = std::array::from_fn(|b| packet.blocks[b].azimuth);
        let azimuths = firing_azimuths(model, &block_az);
        let per_block = model.firings_per_block();
        let total = record.record_len as u64;
        let firings = azimuths.len() as u64;
        for (f, &az) in azimuths.iter().enumerate() {
            let share = total * (f as u64 + 1) / firings - total * f as u64 / firings;
            let block = &packet.blocks[f / per_block];
            let seq = f % per_block;
            let returns = &block.returns[seq * lasers..(seq + 1) * lasers];
            assembly.push_firing(az, returns.iter().enumerate().map(|(l, r)| (l, r.0)), share);
        }
    }
    let frames = assembly.finish(&mut diagnostics);
    Ok(ParsedCapture { frames, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::to_spherical;
    use crate::ingest::pcap::{PcapWriter, RECORD_HEADER_LEN, UDP_FRAME_OVERHEAD};

    fn packet_with(azimuth0: u16, step: u16, fill: impl Fn(usize, usize) -> u16) -> DataPacket {
        let mut blocks = [DataBlock::default(); BLOCKS_PER_PACKET];
        for (b, block) in blocks.iter_mut().enumerate() {
            block.azimuth = ((azimuth0 as u32 + b as u32 * step as u32) % 36000) as u16;
            for (i, r) in block.returns.iter_mut().enumerate() {
                *r = (fill(b, i), 100);
            }
        }
        DataPacket { blocks, timestamp_us: 0 }
    }

    #[test]
    fn packet_encode_decode() {
        let p = packet_with(100, 40, |b, i| (b * 32 + i) as u16);
        let bytes = p.encode(SensorModel::Vlp16);
        assert_eq!(bytes.len(), PAYLOAD_LEN);
        assert_eq!(&bytes[0..2], &[0xFF, 0xEE]);
        assert_eq!(DataPacket::decode(&bytes).unwrap(), p);
        assert!(DataPacket::decode(&bytes[..1205]).is_err());
    }

    #[test]
    fn vlp16_second_firing_is_interpolated() {
        let az: [u16; 12] = std::array::from_fn(|b| 35800 + b as u16 * 40 - if b >= 5 { 36000 } else { 0 });
        let firings = firing_azimuths(SensorModel::Vlp16, &az);
        assert_eq!(firings.len(), 24);
        assert_eq!(firings[0], 35800.0);
        assert_eq!(firings[1], 35820.0);
        // block 4 is at 35960, block 5 wraps to 0
        assert_eq!(firings[9], 35980.0);
        assert_eq!(firings[10], 0.0);
        assert_eq!(firings[23], az[11] as f64 + 20.0);
        assert_eq!(firing_azimuths(SensorModel::Hdl32, &az).len(), 12);
    }

    #[test]
    fn return_geometry_matches_sensor_convention() {
        // azimuth 0 looks along +y, azimuth 90 along +x
        let p = return_to_point(SensorModel::Vlp16, 1, 0.0, 5000);
        let e = 1f64.to_radians();
        assert!((p.x).abs() < 1e-12);
        assert!((p.y - 10.0 * e.cos()).abs() < 1e-12);
        assert!((p.z - 10.0 * e.sin()).abs() < 1e-12);
        let p = return_to_point(SensorModel::Vlp16, 0, 9000.0, 5000);
        assert!(p.x > 9.0 && p.y.abs() < 1e-12 && p.z < 0.0);
    }

    fn capture(packets: &[DataPacket], model: SensorModel) -> Vec<u8> {
        let mut w = PcapWriter::new();
        for (i, p) in packets.iter().enumerate() {
            w.push_udp(i as u64 * 1327, DEFAULT_DATA_PORT, &p.encode(model));
        }
        w.into_bytes()
    }

    #[test]
    fn all_zero_distances_give_empty_frames() {
        let packets: Vec<_> = (0..75).map(|k| packet_with((k * 480) as u16, 40, |_, _| 0)).collect();
        let parsed = parse_velodyne_pcap(&CaptureStream::new(capture(&packets, SensorModel::Vlp16), SensorModel::Vlp16, 600)).unwrap();
        assert_eq!(parsed.frames.len(), 1);
        assert!(parsed.frames[0].is_empty());
        assert_eq!(parsed.diagnostics.packets_decoded, 75);
    }

    #[test]
    fn single_laser_rotation_at_ten_meters() {
        // laser 1 (+1 deg) returns 10.0 m = 5000 units on both firings
        let packets: Vec<_> = (0..75)
            .map(|k| packet_with((k * 480) as u16, 40, |_, i| if i % 16 == 1 { 5000 } else { 0 }))
            .collect();
        let bytes = capture(&packets, SensorModel::Vlp16);
        let parsed = parse_velodyne_pcap(&CaptureStream::new(bytes, SensorModel::Vlp16, 600)).unwrap();
        assert_eq!(parsed.frames.len(), 1);
        let frame = &parsed.frames[0];
        assert_eq!(frame.len(), 1800);
        for p in &frame.points {
            let s = to_spherical(*p);
            assert!((s.rho - 10.0).abs() < DISTANCE_UNIT);
            assert!((s.theta - 1f64.to_radians()).abs() < 1e-12);
        }
        let prov = frame.provenance.as_ref().unwrap();
        assert!(prov.iter().all(|p| p.laser_id == 1));
        let mut bins: Vec<_> = prov.iter().map(|p| p.azimuth_bin).collect();
        bins.sort_unstable();
        bins.dedup();
        assert_eq!(bins.len(), 1800);
        let record = (RECORD_HEADER_LEN + UDP_FRAME_OVERHEAD + PAYLOAD_LEN) as u64;
        assert_eq!(frame.raw_size_bytes, 75 * record);
    }

    #[test]
    fn wraps_split_frames_and_partial_tail_is_dropped() {
        let mut packets = Vec::new();
        for _rotation in 0..3 {
            packets.extend((0..75).map(|k| packet_with((k * 480) as u16, 40, |_, _| 1000)));
        }
        packets.extend((0..10).map(|k| packet_with((k * 480) as u16, 40, |_, _| 1000)));
        let bytes = capture(&packets, SensorModel::Vlp16);
        let parsed = parse_velodyne_pcap(&CaptureStream::new(bytes, SensorModel::Vlp16, 600)).unwrap();
        assert_eq!(parsed.frames.len(), 3);
        assert_eq!(parsed.diagnostics.incomplete_frames, 1);
        for (i, f) in parsed.frames.iter().enumerate() {
            assert_eq!(f.frame_id, i as u64);
            assert_eq!(f.len(), 1800 * 16);
        }
    }

    #[test]
    fn wrong_payload_length_is_skipped_and_counted() {
        let mut w = PcapWriter::new();
        w.push_udp(0, DEFAULT_DATA_PORT, &[0u8; 1000]);
        w.push_udp(0, 8308, &[0u8; 512]);
        let parsed = parse_velodyne_pcap(&CaptureStream::new(w.into_bytes(), SensorModel::Vlp16, 600)).unwrap();
        assert_eq!(parsed.diagnostics.skipped_packets, 1);
        assert_eq!(parsed.diagnostics.ignored_packets, 1);
        assert!(parsed.frames.is_empty());
    }

    #[test]
    fn truncated_record_is_counted() {
        let packets: Vec<_> = (0..2).map(|k| packet_with((k * 480) as u16, 40, |_, _| 1000)).collect();
        let mut bytes = capture(&packets, SensorModel::Vlp16);
        bytes.truncate(bytes.len() - 100);
        let parsed = parse_velodyne_pcap(&CaptureStream::new(bytes, SensorModel::Vlp16, 600)).unwrap();
        assert_eq!(parsed.diagnostics.truncated_packets, 1);
        assert_eq!(parsed.diagnostics.packets_decoded, 1);
    }

    #[test]
    fn hdl32_uses_all_returns_per_block() {
        let packets: Vec<_> = (0..180).map(|k| packet_with((k * 200) as u16, 16, |_, _| 2500)).collect();
        let bytes = capture(&packets, SensorModel::Hdl32);
        let parsed = parse_velodyne_pcap(&CaptureStream::new(bytes, SensorModel::Hdl32, 600)).unwrap();
        assert_eq!(parsed.frames.len(), 1);
        let f = &parsed.frames[0];
        assert_eq!(f.len(), 180 * 12 * 32);
        let lasers: std::collections::BTreeSet<_> =
            f.provenance.as_ref().unwrap().iter().map(|p| p.laser_id).collect();
        assert_eq!(lasers.len(), 32);
    }
}
