//! Synthetic Velodyne captures of a street scene.
//!
//! A sensor drives along a street lined with buildings, parked cars and
//! poles, with large structures far down the road. Each firing is ray-cast
//! against the scene, perturbed with Gaussian range noise, quantized to the
//! sensor's 2 mm units and packed into data packets inside a PCAP capture, so
//! the result goes through exactly the same parsing path as a real recording.
//! A few isolated spurious returns per rotation (dust, birds) stand in for the
//! sparse outliers that real captures contain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::{to_cartesian, Point3, SphericalPoint};
use crate::ingest::pcap::PcapWriter;
use crate::ingest::velodyne::{
    firing_azimuths, sensor_azimuth_to_phi, CaptureStream, DataBlock, DataPacket, SensorModel, BLOCKS_PER_PACKET,
    DEFAULT_DATA_PORT, DISTANCE_UNIT,
};

const GROUND_Z: f64 = -1.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sensor: SensorModel,
    pub rpm: u32,
    pub frames: usize,
    pub seed: u64,
    /// Standard deviation of the range noise, meters.
    pub range_noise: f64,
    /// Sensor travel per rotation along +x, meters.
    pub speed: f64,
    pub spurious_per_frame: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sensor: SensorModel::Vlp16,
            rpm: 600,
            frames: 20,
            seed: 1,
            range_noise: 0.01,
            speed: 0.5,
            spurious_per_frame: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Aabb {
    min: Point3,
    max: Point3,
}

impl Aabb {
    /// Entry distance of a ray, if it hits in front of the origin.
    fn hit(&self, o: &Point3, d: &Point3) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let (oa, da) = (o.axis(a), d.axis(a));
            let (lo, hi) = (self.min.axis(a), self.max.axis(a));
            if da.abs() < 1e-12 {
                if oa < lo || oa > hi {
                    return None;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo - oa) / da, (hi - oa) / da);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        (t0 > 0.0).then_some(t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pole {
    x: f64,
    y: f64,
    radius: f64,
    top: f64,
}

impl Pole {
    fn hit(&self, o: &Point3, d: &Point3) -> Option<f64> {
        let (fx, fy) = (o.x - self.x, o.y - self.y);
        let a = d.x * d.x + d.y * d.y;
        if a < 1e-12 {
            return None;
        }
        let b = 2.0 * (fx * d.x + fy * d.y);
        let c = fx * fx + fy * fy - self.radius * self.radius;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let t = (-b - disc.sqrt()) / (2.0 * a);
        let z = o.z + t * d.z;
        (t > 0.0 && (GROUND_Z..=self.top).contains(&z)).then_some(t)
    }
}

/// Static street geometry in world coordinates (sensor height is z = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    boxes: Vec<Aabb>,
    poles: Vec<Pole>,
}

impl Scene {
    pub fn street(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5CE7E);
        let mut boxes = Vec::new();
        let mut poles = Vec::new();
        for side in [-1.0f64, 1.0] {
            // building fronts with gaps
            let mut x = -160.0;
            while x < 160.0 {
                let len = rng.random_range(8.0..25.0);
                let front = rng.random_range(8.0..11.0);
                let depth = rng.random_range(6.0..14.0);
                let height = rng.random_range(4.0..16.0);
                let (y0, y1) = if side > 0.0 { (front, front + depth) } else { (-front - depth, -front) };
                boxes.push(Aabb {
                    min: Point3::new(x, y0, GROUND_Z),
                    max: Point3::new(x + len, y1, GROUND_Z + height),
                });
                x += len + rng.random_range(2.0..9.0);
            }
            // parked cars
            let mut x = -150.0;
            while x < 150.0 {
                x += rng.random_range(5.0..18.0);
                let y = side * rng.random_range(4.6..5.6);
                boxes.push(Aabb {
                    min: Point3::new(x, y - 0.9, GROUND_Z + 0.15),
                    max: Point3::new(x + 4.4, y + 0.9, GROUND_Z + 1.5),
                });
                x += 4.4;
            }
            // poles
            let mut x = -150.0 + rng.random_range(0.0..10.0);
            while x < 150.0 {
                poles.push(Pole { x, y: side * 7.0, radius: 0.12, top: GROUND_Z + rng.random_range(4.0..8.0) });
                x += rng.random_range(18.0..30.0);
            }
        }
        // large structures far down the road in both directions
        for dir in [-1.0f64, 1.0] {
            let x0 = dir * rng.random_range(85.0..95.0);
            boxes.push(Aabb {
                min: Point3::new(x0.min(x0 + dir * 20.0), -30.0, GROUND_Z),
                max: Point3::new(x0.max(x0 + dir * 20.0), 30.0, GROUND_Z + rng.random_range(10.0..25.0)),
            });
        }
        Scene { boxes, poles }
    }

    /// Distance to the first surface along unit direction `d` from `o`.
    pub fn cast(&self, o: &Point3, d: &Point3, max_range: f64) -> Option<f64> {
        let mut best = f64::INFINITY;
        if d.z < -1e-9 {
            best = (GROUND_Z - o.z) / d.z;
        }
        for b in &self.boxes {
            if let Some(t) = b.hit(o, d) {
                best = best.min(t);
            }
        }
        for p in &self.poles {
            if let Some(t) = p.hit(o, d) {
                best = best.min(t);
            }
        }
        (best <= max_range).then_some(best)
    }
}

/// Nominal block azimuths (centidegrees) are spaced evenly over a rotation;
/// each gets a small non-negative jitter, as a real spinning head does.
fn block_azimuth(blocks_per_rotation: usize, slot: usize, jitter: u16) -> u16 {
    let nominal = (slot as f64 * 36000.0 / blocks_per_rotation as f64).round() as u32;
    ((nominal + jitter as u32) % 36000) as u16
}

/// PCAP bytes of `cfg.frames` full rotations starting at azimuth 0.
pub fn generate_pcap(cfg: &SynthConfig) -> Vec<u8> {
    let scene = Scene::street(cfg.seed);
    let model = cfg.sensor;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.range_noise.max(0.0)).expect("finite noise");
    let lasers = model.laser_count();
    let per_block = model.firings_per_block();
    let firings_per_rotation = model.firings_per_rotation(cfg.rpm);
    let blocks_per_rotation = firings_per_rotation / per_block;
    let packets_per_rotation = blocks_per_rotation.div_ceil(BLOCKS_PER_PACKET);
    let elevations = model.elevations_rad();
    let rotation_us = 60_000_000.0 / cfg.rpm.max(1) as f64;
    let max_jitter = (36000 / blocks_per_rotation / 8).max(1) as u16;

    let mut writer = PcapWriter::new();
    for frame in 0..cfg.frames {
        let mut packets = Vec::with_capacity(packets_per_rotation);
        let mut sky_slots = Vec::new();
        for p in 0..packets_per_rotation {
            let block_az: [u16; BLOCKS_PER_PACKET] = std::array::from_fn(|b| {
                let slot = (p * BLOCKS_PER_PACKET + b).min(blocks_per_rotation - 1);
                block_azimuth(blocks_per_rotation, slot, rng.random_range(0..=max_jitter))
            });
            let azimuths = firing_azimuths(model, &block_az);
            let mut blocks = [DataBlock::default(); BLOCKS_PER_PACKET];
            for (b, block) in blocks.iter_mut().enumerate() {
                block.azimuth = block_az[b];
                for seq in 0..per_block {
                    let f = b * per_block + seq;
                    let az_cdeg = azimuths[f];
                    let progress = (frame as f64) + az_cdeg / 36000.0;
                    let origin = Point3::new(cfg.speed * progress, 0.0, 0.0);
                    let phi = sensor_azimuth_to_phi(az_cdeg / 100.0);
                    for (laser, &theta) in elevations.iter().enumerate() {
                        let dir = to_cartesian(SphericalPoint { rho: 1.0, theta, phi });
                        let slot = seq * lasers + laser;
                        let distance = match scene.cast(&origin, &dir, model.max_range()) {
                            Some(t) => {
                                let r = (t + noise.sample(&mut rng)).max(DISTANCE_UNIT);
                                (r / DISTANCE_UNIT).round().min(u16::MAX as f64) as u16
                            }
                            None => {
                                sky_slots.push((p, b, slot));
                                0
                            }
                        };
                        block.returns[slot] = (distance, rng.random_range(0..=100));
                    }
                }
            }
            packets.push(DataPacket { blocks, timestamp_us: 0 });
        }
        for _ in 0..cfg.spurious_per_frame.min(sky_slots.len()) {
            let (p, b, slot) = sky_slots[rng.random_range(0..sky_slots.len())];
            let r = rng.random_range(40.0..95.0);
            packets[p].blocks[b].returns[slot].0 = (r / DISTANCE_UNIT) as u16;
        }
        for (p, mut packet) in packets.into_iter().enumerate() {
            let ts = frame as f64 * rotation_us + p as f64 * rotation_us / packets_per_rotation as f64;
            packet.timestamp_us = (ts as u64 % 3_600_000_000) as u32;
            writer.push_udp(ts as u64, DEFAULT_DATA_PORT, &packet.encode(model));
        }
    }
    writer.into_bytes()
}

pub fn generate_capture(cfg: &SynthConfig) -> CaptureStream {
    CaptureStream::new(generate_pcap(cfg), cfg.sensor, cfg.rpm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_velodyne_pcap;
    use crate::projection::{project, GridLayout, ImageLayout, ProjectOptions};
    use crate::BitDepth;

    #[test]
    fn ray_hits() {
        let b = Aabb { min: Point3::new(5.0, -1.0, -1.0), max: Point3::new(6.0, 1.0, 1.0) };
        assert_eq!(b.hit(&Point3::ORIGIN, &Point3::new(1.0, 0.0, 0.0)), Some(5.0));
        assert_eq!(b.hit(&Point3::ORIGIN, &Point3::new(-1.0, 0.0, 0.0)), None);
        let p = Pole { x: 10.0, y: 0.0, radius: 0.5, top: 3.0 };
        assert!((p.hit(&Point3::ORIGIN, &Point3::new(1.0, 0.0, 0.0)).unwrap() - 9.5).abs() < 1e-12);
        let scene = Scene { boxes: vec![], poles: vec![] };
        let down = Point3::new(0.0, 0.0, -1.0);
        assert!((scene.cast(&Point3::ORIGIN, &down, 100.0).unwrap() - 1.8).abs() < 1e-12);
        assert_eq!(scene.cast(&Point3::ORIGIN, &Point3::new(0.0, 0.0, 1.0), 100.0), None);
    }

    #[test]
    fn capture_parses_into_full_frames_without_collisions() {
        let cfg = SynthConfig { frames: 3, ..Default::default() };
        let parsed = parse_velodyne_pcap(&generate_capture(&cfg)).unwrap();
        assert_eq!(parsed.frames.len(), 3);
        assert_eq!(parsed.diagnostics.skipped_packets, 0);
        assert_eq!(parsed.diagnostics.incomplete_frames, 0);
        let grid = GridLayout::for_sensor(cfg.sensor, cfg.rpm);
        for f in &parsed.frames {
            assert!(f.len() > 16 * 1800 / 2, "{} points", f.len());
            assert!(f.len() < 16 * 1800);
            let proj = project(f, &grid, ImageLayout::Spherical, BitDepth::Sixteen, ProjectOptions::default()).unwrap();
            assert_eq!(proj.collisions, 0);
            assert_eq!(proj.images[0].valid_cells(), f.len());
            // 75 packets of 1206 + 42 + 16 bytes
            assert_eq!(f.raw_size_bytes, 75 * 1264);
        }
    }

    #[test]
    fn hdl32_capture() {
        let cfg = SynthConfig { sensor: SensorModel::Hdl32, frames: 2, ..Default::default() };
        let parsed = parse_velodyne_pcap(&generate_capture(&cfg)).unwrap();
        assert_eq!(parsed.frames.len(), 2);
        let grid = GridLayout::for_sensor(cfg.sensor, cfg.rpm);
        let proj =
            project(&parsed.frames[0], &grid, ImageLayout::Spherical, BitDepth::Sixteen, ProjectOptions::default()).unwrap();
        assert_eq!(proj.collisions, 0);
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig { frames: 1, ..Default::default() };
        assert_eq!(generate_pcap(&cfg), generate_pcap(&cfg));
        let other = SynthConfig { seed: 2, ..cfg.clone() };
        assert_ne!(generate_pcap(&cfg), generate_pcap(&other));
    }
}
