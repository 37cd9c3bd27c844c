//! Occupancy-octree codec.
//!
//! The cube is anchored on the resolution lattice (`origin = floor(min / r) * r`
//! per axis) and padded to `r * 2^depth`. Each internal node is one byte whose
//! bit `i` marks octant `i = (x >= mid) * 4 + (y >= mid) * 2 + (z >= mid)`;
//! bytes are written breadth-first. Decoding emits leaf centres.
//!
//! # Container layout
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LPZO"
//! 4       1     version (1)
//! 5       1     flags (bit 0: payload is DEFLATE-compressed)
//! 6       24    cube min corner, 3 x f64 LE
//! 30      24    cube max corner, 3 x f64 LE
//! 54      8     leaf resolution, f64 LE
//! 62      ..    payload
//! ```

use std::collections::BTreeMap;

use crate::cloud::{Point3, PointCloud};
use crate::codec::deflate;
use crate::error::{Error, Result};

pub const OCTREE_MAGIC: [u8; 4] = *b"LPZO";
pub const OCTREE_VERSION: u8 = 1;
const CONTAINER_HEADER_LEN: usize = 62;
const FLAG_DEFLATE: u8 = 1;
const MAX_DEPTH: u32 = 31;
/// Child slot value marking an occupied leaf below the last internal level.
const LEAF: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    Low,
    Medium,
    High,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Low, Profile::Medium, Profile::High];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Profile::Low),
            "med" | "medium" => Ok(Profile::Medium),
            "high" => Ok(Profile::High),
            other => Err(Error::InvalidArgument(format!("unknown octree profile `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Low => "low",
            Profile::Medium => "med",
            Profile::High => "high",
        }
    }
}

/// Leaf edge length in meters.
pub fn profile_resolution(p: Profile) -> f64 {
    match p {
        Profile::Low => 0.01,
        Profile::Medium => 0.005,
        Profile::High => 0.001,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Octree {
    origin: Point3,
    resolution: f64,
    depth: u32,
    /// Internal nodes; node 0 is the root. Child slots hold 0 (empty), a node
    /// index, or [`LEAF`] on the last internal level.
    nodes: Vec<[u32; 8]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OctreeCode {
    pub origin: Point3,
    pub edge: f64,
    pub resolution: f64,
    pub depth: u32,
    /// Occupancy bytes in breadth-first order.
    pub bytes: Vec<u8>,
}

fn lattice(p: &Point3, origin: &Point3, resolution: f64) -> [u64; 3] {
    let idx = |v: f64, o: f64| ((v - o) / resolution).floor().max(0.0) as u64;
    [idx(p.x, origin.x), idx(p.y, origin.y), idx(p.z, origin.z)]
}

impl Octree {
    pub fn build(cloud: &PointCloud, resolution: f64) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!("resolution must be positive, got {resolution}")));
        }
        cloud.validate()?;
        let mut min = [f64::INFINITY; 3];
        for p in &cloud.points {
            for (a, m) in min.iter_mut().enumerate() {
                *m = m.min(p.axis(a));
            }
        }
        let origin = Point3::new(
            (min[0] / resolution).floor() * resolution,
            (min[1] / resolution).floor() * resolution,
            (min[2] / resolution).floor() * resolution,
        );
        let cells: Vec<[u64; 3]> = cloud.points.iter().map(|p| lattice(p, &origin, resolution)).collect();
        let max_index = cells.iter().flat_map(|c| c.iter().copied()).max().unwrap_or(0);
        let span = max_index + 1;
        let depth = 64 - (span - 1).leading_zeros();
        if depth > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "cloud extent needs depth {depth} at resolution {resolution}, limit is {MAX_DEPTH}"
            )));
        }
        let mut tree = Octree { origin, resolution, depth, nodes: Vec::new() };
        if depth > 0 {
            tree.nodes.push([0; 8]);
            for c in &cells {
                tree.insert(*c);
            }
        }
        Ok(tree)
    }

    fn insert(&mut self, c: [u64; 3]) {
        let mut node = 0usize;
        for level in 0..self.depth {
            let shift = self.depth - 1 - level;
            let oct = (((c[0] >> shift) & 1) << 2 | ((c[1] >> shift) & 1) << 1 | ((c[2] >> shift) & 1)) as usize;
            if level + 1 == self.depth {
                self.nodes[node][oct] = LEAF;
            } else {
                let mut child = self.nodes[node][oct];
                if child == 0 {
                    child = self.nodes.len() as u32;
                    self.nodes.push([0; 8]);
                    self.nodes[node][oct] = child;
                }
                node = child as usize;
            }
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn edge(&self) -> f64 {
        self.resolution * (1u64 << self.depth) as f64
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn serialize(&self) -> OctreeCode {
        let mut bytes = Vec::with_capacity(self.nodes.len());
        if self.depth > 0 {
            let mut level = vec![0u32];
            for l in 0..self.depth {
                let mut next = Vec::with_capacity(level.len() * 2);
                for &n in &level {
                    let slots = &self.nodes[n as usize];
                    let mut byte = 0u8;
                    for (i, &child) in slots.iter().enumerate() {
                        if child != 0 {
                            byte |= 1 << i;
                            if l + 1 < self.depth {
                                next.push(child);
                            }
                        }
                    }
                    bytes.push(byte);
                }
                level = next;
            }
        }
        OctreeCode { origin: self.origin, edge: self.edge(), resolution: self.resolution, depth: self.depth, bytes }
    }
}

impl OctreeCode {
    /// Leaf centres in breadth-first order.
    pub fn decode(&self) -> Result<PointCloud> {
        let mut level: Vec<[u32; 3]> = vec![[0, 0, 0]];
        let mut pos = 0usize;
        for _ in 0..self.depth {
            let mut next = Vec::with_capacity(level.len() * 2);
            for c in &level {
                let &byte = self
                    .bytes
                    .get(pos)
                    .ok_or_else(|| Error::corrupt("occupancy stream ends before the traversal does"))?;
                pos += 1;
                if byte == 0 {
                    return Err(Error::corrupt("zero occupancy byte"));
                }
                for i in 0..8u32 {
                    if byte & (1 << i) != 0 {
                        next.push([c[0] * 2 + (i >> 2), c[1] * 2 + ((i >> 1) & 1), c[2] * 2 + (i & 1)]);
                    }
                }
            }
            level = next;
        }
        if pos != self.bytes.len() {
            return Err(Error::corrupt(format!("{} occupancy bytes left after the traversal", self.bytes.len() - pos)));
        }
        let r = self.resolution;
        let o = self.origin;
        let points = level
            .iter()
            .map(|c| {
                Point3::new(
                    o.x + (c[0] as f64 + 0.5) * r,
                    o.y + (c[1] as f64 + 0.5) * r,
                    o.z + (c[2] as f64 + 0.5) * r,
                )
            })
            .collect();
        Ok(PointCloud::new(points))
    }

    pub fn to_bytes(&self, deflate_payload: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(CONTAINER_HEADER_LEN + self.bytes.len());
        out.extend_from_slice(&OCTREE_MAGIC);
        out.push(OCTREE_VERSION);
        out.push(if deflate_payload { FLAG_DEFLATE } else { 0 });
        let o = self.origin;
        for v in [o.x, o.y, o.z, o.x + self.edge, o.y + self.edge, o.z + self.edge, self.resolution] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if deflate_payload {
            out.extend_from_slice(&deflate::compress(&self.bytes));
        } else {
            out.extend_from_slice(&self.bytes);
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < CONTAINER_HEADER_LEN {
            return Err(Error::corrupt("octree container shorter than its header"));
        }
        if data[..4] != OCTREE_MAGIC {
            return Err(Error::corrupt("bad octree magic"));
        }
        if data[4] != OCTREE_VERSION {
            return Err(Error::corrupt(format!("unsupported octree version {}", data[4])));
        }
        let flags = data[5];
        if flags & !FLAG_DEFLATE != 0 {
            return Err(Error::corrupt(format!("unknown octree flags {flags:#04x}")));
        }
        let f = |i: usize| f64::from_le_bytes(data[6 + 8 * i..14 + 8 * i].try_into().unwrap());
        let origin = Point3::new(f(0), f(1), f(2));
        let edge = f(3) - origin.x;
        let resolution = f(6);
        if !(resolution > 0.0 && resolution.is_finite() && edge.is_finite() && origin.is_finite()) {
            return Err(Error::corrupt("non-finite or non-positive octree geometry"));
        }
        let ratio = edge / resolution;
        let depth = ratio.log2().round();
        if !(0.0..=MAX_DEPTH as f64).contains(&depth) || ((depth.exp2() - ratio) / ratio).abs() > 1e-9 {
            return Err(Error::corrupt("cube edge is not a power-of-two multiple of the resolution"));
        }
        let payload = &data[CONTAINER_HEADER_LEN..];
        let bytes = if flags & FLAG_DEFLATE != 0 { deflate::decompress(payload, payload.len() * 4)? } else { payload.to_vec() };
        Ok(OctreeCode { origin, edge, resolution, depth: depth as u32, bytes })
    }
}

/// Builds, serializes and wraps a cloud in the octree container.
pub fn octree_encode(cloud: &PointCloud, resolution: f64, deflate_payload: bool) -> Result<Vec<u8>> {
    Ok(Octree::build(cloud, resolution)?.serialize().to_bytes(deflate_payload))
}

pub fn octree_decode(container: &[u8]) -> Result<PointCloud> {
    OctreeCode::from_bytes(container)?.decode()
}

/// Replaces the points of each `leaf`-sized voxel by their centroid.
/// Output is ordered by voxel index.
pub fn voxel_grid(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0 && leaf.is_finite()) {
        return Err(Error::InvalidArgument(format!("voxel size must be positive, got {leaf}")));
    }
    let mut cells: BTreeMap<[i64; 3], (Point3, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let key = [(p.x / leaf).floor() as i64, (p.y / leaf).floor() as i64, (p.z / leaf).floor() as i64];
        let e = cells.entry(key).or_insert((Point3::ORIGIN, 0));
        e.0 = e.0 + *p;
        e.1 += 1;
    }
    let points = cells.into_values().map(|(sum, n)| sum * (1.0 / n as f64)).collect();
    Ok(PointCloud { points, provenance: None, frame_id: cloud.frame_id, raw_size_bytes: cloud.raw_size_bytes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    fn brute_directed_hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
        a.points
            .iter()
            .map(|p| b.points.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_point_is_depth_zero() {
        let c = cloud(&[[0.3, -0.2, 5.0]]);
        let tree = Octree::build(&c, 1.0).unwrap();
        assert_eq!(tree.depth(), 0);
        let code = tree.serialize();
        assert!(code.bytes.is_empty());
        let back = code.decode().unwrap();
        assert_eq!(back.len(), 1);
        assert!(back.points[0].distance(&c.points[0]) <= 3f64.sqrt() / 2.0);
    }

    #[test]
    fn one_point_per_octant_gives_full_root() {
        let mut pts = Vec::new();
        for i in 0..8 {
            let f = |b: i32| if i & b != 0 { 0.75 } else { 0.25 };
            pts.push([f(4), f(2), f(1)]);
        }
        let tree = Octree::build(&cloud(&pts), 0.5).unwrap();
        assert_eq!(tree.depth(), 1);
        let code = tree.serialize();
        assert_eq!(code.bytes, vec![0xFF]);
        let back = code.decode().unwrap();
        // leaf centres coincide with the inputs, in octant order
        let expected: Vec<Point3> = pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
        assert_eq!(back.points, expected);
    }

    #[test]
    fn octant_zero_only() {
        let code = OctreeCode { origin: Point3::ORIGIN, edge: 2.0, resolution: 1.0, depth: 1, bytes: vec![0x01] };
        assert_eq!(code.decode().unwrap().points, vec![Point3::new(0.5, 0.5, 0.5)]);
        let code = OctreeCode { bytes: vec![0x80], ..code };
        assert_eq!(code.decode().unwrap().points, vec![Point3::new(1.5, 1.5, 1.5)]);
    }

    #[test]
    fn duplicates_do_not_change_the_tree() {
        let a = cloud(&[[1.0, 2.0, 3.0], [1.5, 2.5, 3.01]]);
        let b = cloud(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.5, 2.5, 3.01]]);
        assert_eq!(Octree::build(&a, 0.01).unwrap().serialize(), Octree::build(&b, 0.01).unwrap().serialize());
    }

    #[test]
    fn malformed_codes_are_rejected() {
        let base = OctreeCode { origin: Point3::ORIGIN, edge: 4.0, resolution: 1.0, depth: 2, bytes: vec![0x03, 0x01] };
        assert!(base.decode().is_err(), "second child's byte is missing");
        let long = OctreeCode { bytes: vec![0x01, 0x01, 0x01], ..base.clone() };
        assert!(long.decode().is_err());
        let zero = OctreeCode { bytes: vec![0x01, 0x00], ..base.clone() };
        assert!(zero.decode().is_err());
        let ok = OctreeCode { bytes: vec![0x03, 0x01, 0x80], ..base };
        assert_eq!(ok.decode().unwrap().len(), 2);
    }

    #[test]
    fn fixpoint_and_bounds_on_random_clouds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for trial in 0..20 {
            let n = rng.random_range(1..300);
            let scale = rng.random_range(0.05..30.0);
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-1.0..1.0)])
                .collect();
            let c = cloud(&pts);
            for res in [0.01, 0.1, 0.37] {
                let code = Octree::build(&c, res).unwrap().serialize();
                assert!(code.bytes.iter().all(|&b| b != 0));
                assert_eq!(code.bytes.len(), Octree::build(&c, res).unwrap().internal_nodes());
                let decoded = code.decode().unwrap();
                let bound = 3f64.sqrt() / 2.0 * res;
                assert!(brute_directed_hausdorff(&c, &decoded) <= bound, "trial {trial} res {res}");
                assert!(brute_directed_hausdorff(&decoded, &c) <= bound, "trial {trial} res {res}");
                let again = Octree::build(&decoded, res).unwrap().serialize();
                assert_eq!(again, code, "trial {trial} res {res}");
            }
        }
    }

    #[test]
    fn container_roundtrip_and_golden_header() {
        let c = cloud(&[[0.25, 0.25, 0.25], [0.75, 0.25, 0.25]]);
        let code = Octree::build(&c, 0.5).unwrap().serialize();
        let bytes = code.to_bytes(false);
        let mut expected = b"LPZO\x01\x00".to_vec();
        for v in [0.0f64, 0.0, 0.0, 1.0, 1.0, 1.0, 0.5] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        expected.push(0x11);
        assert_eq!(bytes, expected);
        assert_eq!(OctreeCode::from_bytes(&bytes).unwrap(), code);
        let packed = code.to_bytes(true);
        assert_eq!(packed[5], 1);
        assert_eq!(OctreeCode::from_bytes(&packed).unwrap(), code);
        assert!(OctreeCode::from_bytes(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(OctreeCode::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[5] = 0x80;
        assert!(OctreeCode::from_bytes(&bad).is_err());
    }

    #[test]
    fn profiles_are_ordered() {
        let r: Vec<f64> = Profile::ALL.iter().map(|&p| profile_resolution(p)).collect();
        assert_eq!(r, vec![0.01, 0.005, 0.001]);
        assert!(r[2] < r[1] && r[1] < r[0]);
        assert_eq!(Profile::parse("MED").unwrap(), Profile::Medium);
        assert!(Profile::parse("ultra").is_err());
    }

    #[test]
    fn voxel_grid_centroids() {
        let c = cloud(&[[0.1, 0.1, 0.1], [0.3, 0.3, 0.3], [1.5, 0.0, 0.0]]);
        let v = voxel_grid(&c, 1.0).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.points[0].distance(&Point3::new(0.2, 0.2, 0.2)) < 1e-12);
        assert_eq!(v.points[1], Point3::new(1.5, 0.0, 0.0));
        assert!(voxel_grid(&c, 0.0).is_err());
    }

    #[test]
    fn empty_and_bad_resolution() {
        assert!(matches!(Octree::build(&PointCloud::new(vec![]), 0.1), Err(Error::EmptyInput)));
        assert!(Octree::build(&cloud(&[[0.0, 0.0, 0.0]]), 0.0).is_err());
        assert!(Octree::build(&cloud(&[[0.0, 0.0, 0.0]]), f64::NAN).is_err());
    }
}
