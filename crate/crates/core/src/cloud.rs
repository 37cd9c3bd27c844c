//! Geometric primitives, Cartesian/spherical conversion and the min-max
//! integer quantizer shared by every codec.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Squared Euclidean distance. Every nearest-neighbour routine in the
    /// crate goes through this one expression so tie-breaking is consistent.
    #[inline]
    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, rhs: f64) -> Point3 {
        Point3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

/// Radial distance `rho`, elevation `theta` in [-pi/2, pi/2] and azimuth
/// `phi` in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphericalPoint {
    pub rho: f64,
    pub theta: f64,
    pub phi: f64,
}

/// The origin maps to (0, 0, 0). Azimuth uses the two-argument arctangent so
/// the mapping is invertible in every quadrant.
pub fn to_spherical(p: Point3) -> SphericalPoint {
    let planar2 = p.x * p.x + p.y * p.y;
    let planar = planar2.sqrt();
    let rho = (planar2 + p.z * p.z).sqrt();
    if rho == 0.0 {
        return SphericalPoint::default();
    }
    let theta = p.z.atan2(planar);
    let mut phi = p.y.atan2(p.x);
    if phi == -PI {
        phi = PI;
    }
    SphericalPoint { rho, theta, phi }
}

pub fn to_cartesian(s: SphericalPoint) -> Point3 {
    if s.rho == 0.0 {
        return Point3::ORIGIN;
    }
    let (sin_t, cos_t) = s.theta.sin_cos();
    let (sin_p, cos_p) = s.phi.sin_cos();
    Point3::new(s.rho * cos_t * cos_p, s.rho * cos_t * sin_p, s.rho * sin_t)
}

/// Which laser produced a point and which azimuth column it fell in under the
/// sensor's default grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub laser_id: u16,
    pub azimuth_bin: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub provenance: Option<Vec<Provenance>>,
    pub frame_id: u64,
    /// Size in bytes of the raw capture segment the frame was decoded from.
    pub raw_size_bytes: u64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud { points, ..Default::default() }
    }

    pub fn with_provenance(points: Vec<Point3>, provenance: Vec<Provenance>) -> Result<Self> {
        if points.len() != provenance.len() {
            return Err(Error::InvalidArgument(format!(
                "provenance has {} entries for {} points",
                provenance.len(),
                points.len()
            )));
        }
        Ok(PointCloud { points, provenance: Some(provenance), ..Default::default() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(prov) = &self.provenance {
            if prov.len() != self.points.len() {
                return Err(Error::InvalidArgument("provenance length mismatch".into()));
            }
        }
        if let Some(i) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("point {i} is not finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_code(self) -> u32 {
        (1u32 << self.bits()) - 1
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::InvalidArgument(format!("bit depth must be 8 or 16, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationMeta {
    pub min_value: f64,
    pub max_value: f64,
    pub bit_depth: BitDepth,
}

impl QuantizationMeta {
    pub fn new(min_value: f64, max_value: f64, bit_depth: BitDepth) -> Result<Self> {
        if !(min_value.is_finite() && max_value.is_finite()) || max_value < min_value {
            return Err(Error::InvalidArgument(format!(
                "invalid quantization range [{min_value}, {max_value}]"
            )));
        }
        Ok(QuantizationMeta { min_value, max_value, bit_depth })
    }

    /// Range covering `values`. Empty input is rejected.
    pub fn fit(values: &[f64], bit_depth: BitDepth) -> Result<Self> {
        let mut iter = values.iter().copied();
        let first = iter.next().ok_or(Error::EmptyInput)?;
        let (mut lo, mut hi) = (first, first);
        for v in iter {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Self::new(lo, hi, bit_depth)
    }

    /// Largest reconstruction error for any value inside the range.
    pub fn half_step(&self) -> f64 {
        (self.max_value - self.min_value) / (2.0 * self.bit_depth.max_code() as f64)
    }

    /// `round((v - min) / (max - min) * (2^n - 1))`, rounding half away from
    /// zero and clamped to the code range.
    pub fn quantize_value(&self, value: f64) -> u16 {
        let span = self.max_value - self.min_value;
        if span <= 0.0 {
            return 0;
        }
        let max_code = self.bit_depth.max_code();
        let scaled = (value - self.min_value) / span * max_code as f64;
        if scaled >= max_code as f64 {
            return max_code as u16;
        }
        if !(scaled > 0.0) {
            return 0;
        }
        // scaled is in (0, 65535), so the truncation and the fraction are exact
        let whole = scaled as u32;
        (whole + (scaled - whole as f64 >= 0.5) as u32) as u16
    }

    pub fn dequantize_value(&self, code: u16) -> f64 {
        let span = self.max_value - self.min_value;
        if span <= 0.0 {
            return self.min_value;
        }
        self.min_value + code as f64 / self.bit_depth.max_code() as f64 * span
    }
}

/// Quantizes `values` to `bit_depth`-bit unsigned integers over their own
/// min/max range.
pub fn quantize(values: &[f64], bit_depth: BitDepth) -> Result<(Vec<u16>, QuantizationMeta)> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("cannot quantize non-finite value {v}")));
    }
    let meta = QuantizationMeta::fit(values, bit_depth)?;
    Ok((values.iter().map(|&v| meta.quantize_value(v)).collect(), meta))
}

pub fn dequantize(codes: &[u16], meta: &QuantizationMeta) -> Result<Vec<f64>> {
    let max = meta.bit_depth.max_code();
    if let Some(&c) = codes.iter().find(|&&c| c as u32 > max) {
        return Err(Error::CodeOutOfRange { value: c as u32, bits: meta.bit_depth.bits() });
    }
    Ok(codes.iter().map(|&c| meta.dequantize_value(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn spherical_axis_and_origin() {
        let s = to_spherical(Point3::new(1.0, 0.0, 0.0));
        assert_eq!((s.rho, s.theta, s.phi), (1.0, 0.0, 0.0));
        assert_eq!(to_spherical(Point3::ORIGIN), SphericalPoint::default());
    }

    #[test]
    fn spherical_diagonal() {
        let s = to_spherical(Point3::new(1.0, 1.0, 1.0));
        assert_abs_diff_eq!(s.rho, 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.theta, (1.0 / 2f64.sqrt()).atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.theta, 0.6154797086703874, epsilon = 1e-12);
        assert_abs_diff_eq!(s.phi, PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn spherical_uses_full_quadrant() {
        let s = to_spherical(Point3::new(-1.0, -1.0, 0.0));
        assert_abs_diff_eq!(s.phi, -3.0 * PI / 4.0, epsilon = 1e-15);
        let s = to_spherical(Point3::new(-1.0, 0.0, 0.0));
        assert_eq!(s.phi, PI);
    }

    #[test]
    fn cartesian_examples() {
        let p = to_cartesian(SphericalPoint { rho: 1.0, theta: 0.0, phi: 0.0 });
        assert_eq!(p, Point3::new(1.0, 0.0, 0.0));
        let p = to_cartesian(SphericalPoint { rho: 0.0, theta: 0.3, phi: -2.0 });
        assert_eq!(p, Point3::ORIGIN);
        let p = to_cartesian(SphericalPoint {
            rho: 3f64.sqrt(),
            theta: (1.0 / 2f64.sqrt()).atan(),
            phi: PI / 4.0,
        });
        for c in p.to_array() {
            assert_abs_diff_eq!(c, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn quantize_examples() {
        let (codes, meta) = quantize(&[5.0, 5.0, 5.0], BitDepth::Sixteen).unwrap();
        assert_eq!(codes, vec![0, 0, 0]);
        assert_eq!((meta.min_value, meta.max_value), (5.0, 5.0));
        assert_eq!(dequantize(&codes, &meta).unwrap(), vec![5.0; 3]);

        let (codes, _) = quantize(&[0.0, 1.0], BitDepth::Sixteen).unwrap();
        assert_eq!(codes, vec![0, 65535]);
        // 0.5 * 65535 = 32767.5 rounds half-up.
        let (codes, _) = quantize(&[0.0, 0.5, 1.0], BitDepth::Sixteen).unwrap();
        assert_eq!(codes, vec![0, 32768, 65535]);
    }

    #[test]
    fn quantize_rejects_empty_and_non_finite() {
        assert!(matches!(quantize(&[], BitDepth::Eight), Err(Error::EmptyInput)));
        assert!(quantize(&[1.0, f64::NAN], BitDepth::Eight).is_err());
    }

    #[test]
    fn dequantize_examples() {
        let meta = QuantizationMeta::new(0.0, 1.0, BitDepth::Sixteen).unwrap();
        assert_eq!(dequantize(&[0, 65535], &meta).unwrap(), vec![0.0, 1.0]);
        let v = dequantize(&[32768], &meta).unwrap()[0];
        assert_abs_diff_eq!(v, 32768.0 / 65535.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.5000076295109483, epsilon = 1e-12);

        let meta8 = QuantizationMeta::new(0.0, 1.0, BitDepth::Eight).unwrap();
        assert!(matches!(
            dequantize(&[256], &meta8),
            Err(Error::CodeOutOfRange { value: 256, bits: 8 })
        ));
    }

    #[test]
    fn quantizer_never_exceeds_code_range_near_max() {
        let max = 1.0 + f64::EPSILON;
        let meta = QuantizationMeta::new(0.0, 1.0, BitDepth::Sixteen).unwrap();
        assert_eq!(meta.quantize_value(max), 65535);
        assert_eq!(meta.quantize_value(1.0), 65535);
        assert_eq!(meta.quantize_value(f64::MAX), 65535);
        let tiny = QuantizationMeta::new(1e300, f64::MAX, BitDepth::Eight).unwrap();
        assert_eq!(tiny.quantize_value(f64::MAX), 255);
    }

    fn depth() -> impl Strategy<Value = BitDepth> {
        prop_oneof![Just(BitDepth::Eight), Just(BitDepth::Sixteen)]
    }

    proptest! {
        #[test]
        fn quantize_roundtrip_within_half_step(
            values in prop::collection::vec(0.0f64..100.0, 1..200),
            bd in depth(),
        ) {
            let (codes, meta) = quantize(&values, bd).unwrap();
            let back = dequantize(&codes, &meta).unwrap();
            let bound = meta.half_step() * (1.0 + 1e-9);
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() <= bound);
                prop_assert!((a - b).abs() <= 100.0 / (2.0 * bd.max_code() as f64) + 1e-12);
            }
        }

        #[test]
        fn quantize_is_monotone(mut values in prop::collection::vec(-1e3f64..1e3, 2..100), bd in depth()) {
            values.sort_by(f64::total_cmp);
            let (codes, _) = quantize(&values, bd).unwrap();
            prop_assert!(codes.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(codes.iter().all(|&c| c as u32 <= bd.max_code()));
        }

        #[test]
        fn spherical_roundtrip(
            rho in 0.1f64..120.0,
            theta in -1.5f64..1.5,
            phi in -PI..PI,
        ) {
            let p = to_cartesian(SphericalPoint { rho, theta, phi });
            let q = to_cartesian(to_spherical(p));
            prop_assert!(p.distance(&q) <= 1e-9 * rho);
            let s = to_spherical(p);
            prop_assert!((s.rho - rho).abs() <= 1e-9 * rho);
            prop_assert!((s.theta - theta).abs() <= 1e-9);
            prop_assert!((s.phi - phi).abs() <= 1e-9);
        }
    }
}
