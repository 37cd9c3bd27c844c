//! Range-image representations of a rotating-LiDAR scan.
//!
//! Rows index laser elevation (row 0 is the highest beam), columns index
//! azimuth bins. Three representations are supported:
//!
//! * [`ImageLayout::CartesianTri`]: one image whose three channels hold the
//!   quantized x, y and z of the point in each cell.
//! * [`ImageLayout::CartesianSingle`]: three one-channel images, one per axis.
//! * [`ImageLayout::Spherical`]: one image holding the quantized range and the
//!   azimuth residual inside the cell's bin. Elevation is implied by the row.
//!   A range-only variant drops the residual channel.
//!
//! Cells without a return are marked invalid in a validity mask and hold 0.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use crate::cloud::{to_cartesian, to_spherical, BitDepth, Point3, PointCloud, Provenance, QuantizationMeta, SphericalPoint};
use crate::error::{Error, Result};
use crate::ingest::SensorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImageLayout {
    CartesianSingle,
    CartesianTri,
    Spherical,
}

impl ImageLayout {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cartesian-single" => Ok(ImageLayout::CartesianSingle),
            "cartesian-tri" => Ok(ImageLayout::CartesianTri),
            "spherical" => Ok(ImageLayout::Spherical),
            other => Err(Error::InvalidArgument(format!("unknown layout `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImageLayout::CartesianSingle => "cartesian-single",
            ImageLayout::CartesianTri => "cartesian-tri",
            ImageLayout::Spherical => "spherical",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ImageLayout::CartesianSingle => 0,
            ImageLayout::CartesianTri => 1,
            ImageLayout::Spherical => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ImageLayout::CartesianSingle),
            1 => Ok(ImageLayout::CartesianTri),
            2 => Ok(ImageLayout::Spherical),
            c => Err(Error::corrupt(format!("unknown layout code {c}"))),
        }
    }
}

/// What a channel stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    X,
    Y,
    Z,
    Range,
    /// Azimuth offset (radians) from the centre of the cell's bin.
    AzimuthResidual,
}

impl ChannelKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            ChannelKind::X => 0,
            ChannelKind::Y => 1,
            ChannelKind::Z => 2,
            ChannelKind::Range => 3,
            ChannelKind::AzimuthResidual => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => ChannelKind::X,
            1 => ChannelKind::Y,
            2 => ChannelKind::Z,
            3 => ChannelKind::Range,
            4 => ChannelKind::AzimuthResidual,
            c => return Err(Error::corrupt(format!("unknown channel code {c}"))),
        })
    }
}

/// Laser elevations per row and the azimuth binning.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    elevations: Vec<f64>,
    /// `laser_rows[laser_id]` is the row that laser feeds; empty when unknown.
    laser_rows: Vec<u16>,
    cols: usize,
}

impl GridLayout {
    /// `elevations` (radians, one per row) must be strictly monotone.
    pub fn new(elevations: Vec<f64>, cols: usize) -> Result<Self> {
        if elevations.is_empty() || cols == 0 {
            return Err(Error::InvalidArgument("grid needs at least one row and one column".into()));
        }
        if elevations.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("non-finite elevation".into()));
        }
        let increasing = elevations.windows(2).all(|w| w[0] < w[1]);
        let decreasing = elevations.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidArgument("elevations must be strictly ordered".into()));
        }
        Ok(GridLayout { elevations, laser_rows: Vec::new(), cols })
    }

    /// Rows ordered from the highest to the lowest beam; one column per
    /// firing sequence (VLP-16 at 600 rpm: 16 x 1800, 0.2 degree bins).
    pub fn for_sensor(model: SensorModel, rpm: u32) -> Self {
        Self::for_elevations(&model.elevations_rad(), model.firings_per_rotation(rpm))
    }

    /// Grid over a laser table given in hardware order.
    pub fn for_elevations(laser_elevations: &[f64], cols: usize) -> Self {
        let mut order: Vec<usize> = (0..laser_elevations.len()).collect();
        order.sort_by(|&a, &b| laser_elevations[b].total_cmp(&laser_elevations[a]));
        let mut laser_rows = vec![0u16; laser_elevations.len()];
        for (row, &laser) in order.iter().enumerate() {
            laser_rows[laser] = row as u16;
        }
        GridLayout {
            elevations: order.iter().map(|&l| laser_elevations[l]).collect(),
            laser_rows,
            cols: cols.max(1),
        }
    }

    pub(crate) fn from_parts(elevations: Vec<f64>, laser_rows: Vec<u16>, cols: usize) -> Result<Self> {
        let mut grid = Self::new(elevations, cols)?;
        if laser_rows.iter().any(|&r| r as usize >= grid.rows()) {
            return Err(Error::corrupt("laser row mapping out of range"));
        }
        grid.laser_rows = laser_rows;
        Ok(grid)
    }

    pub fn rows(&self) -> usize {
        self.elevations.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> usize {
        self.rows() * self.cols
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn laser_rows(&self) -> &[u16] {
        &self.laser_rows
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.cols as f64
    }

    pub fn row_of_laser(&self, laser: u16) -> Option<usize> {
        self.laser_rows.get(laser as usize).map(|&r| r as usize)
    }

    pub fn laser_of_row(&self, row: usize) -> Option<u16> {
        self.laser_rows.iter().position(|&r| r as usize == row).map(|l| l as u16)
    }

    /// Nearest row, provided `theta` is within half a row spacing of it.
    pub fn row_of_elevation(&self, theta: f64) -> Option<usize> {
        let (row, dist) = self
            .elevations
            .iter()
            .enumerate()
            .map(|(i, e)| (i, (e - theta).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        let tolerance = if self.rows() == 1 {
            f64::INFINITY
        } else {
            let below = row.checked_sub(1).map(|r| (self.elevations[r] - self.elevations[row]).abs());
            let above = self.elevations.get(row + 1).map(|e| (e - self.elevations[row]).abs());
            0.5 * below.into_iter().chain(above).fold(f64::INFINITY, f64::min) + 1e-12
        };
        (dist <= tolerance).then_some(row)
    }

    /// Column whose bin centre is nearest to `phi`. Bin `c` is centred on
    /// azimuth `c * bin_width`.
    pub fn column_of(&self, phi: f64) -> usize {
        let turns = unit_turn(phi) / self.bin_width();
        // round half up; exact since turns is non-negative and small
        let whole = turns as usize;
        (whole + (turns - whole as f64 >= 0.5) as usize) % self.cols
    }

    pub fn column_azimuth(&self, col: usize) -> f64 {
        wrap_angle(col as f64 * self.bin_width())
    }
}

/// `a` reduced to [0, 2pi).
#[inline]
fn unit_turn(a: f64) -> f64 {
    if (0.0..TAU).contains(&a) {
        a
    } else if (-TAU..0.0).contains(&a) && a + TAU < TAU {
        a + TAU
    } else {
        a.rem_euclid(TAU)
    }
}

/// Wraps to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = unit_turn(a);
    if w > PI {
        w -= TAU;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    pub grid: GridLayout,
    pub layout: ImageLayout,
    pub bit_depth: BitDepth,
    pub kinds: Vec<ChannelKind>,
    /// Planar, row-major, one plane per channel.
    pub channels: Vec<Vec<u16>>,
    pub metas: Vec<QuantizationMeta>,
    pub validity: Vec<bool>,
}

impl RangeImage {
    pub fn rows(&self) -> usize {
        self.grid.rows()
    }

    pub fn cols(&self) -> usize {
        self.grid.cols()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn valid_cells(&self) -> usize {
        self.validity.iter().filter(|&&v| v).count()
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.grid.cells();
        let n = self.channels.len();
        if n == 0 || n > 3 {
            return Err(Error::Projection(format!("{n} channels, expected 1 to 3")));
        }
        if self.metas.len() != n || self.kinds.len() != n {
            return Err(Error::Projection(format!(
                "{n} channels but {} metas and {} channel kinds",
                self.metas.len(),
                self.kinds.len()
            )));
        }
        if self.validity.len() != cells || self.channels.iter().any(|c| c.len() != cells) {
            return Err(Error::Projection("plane size does not match the grid".into()));
        }
        let max = self.bit_depth.max_code();
        if self.channels.iter().flatten().any(|&v| v as u32 > max) {
            return Err(Error::Projection(format!("pixel exceeds {}-bit range", self.bit_depth.bits())));
        }
        if self.metas.iter().any(|m| m.bit_depth != self.bit_depth) {
            return Err(Error::Projection("channel meta bit depth differs from image".into()));
        }
        Ok(())
    }

    /// Raw size of the pixel planes in bytes.
    pub fn plane_bytes(&self) -> usize {
        let bytes_per_sample = if self.bit_depth == BitDepth::Eight { 1 } else { 2 };
        self.channels.len() * self.grid.cells() * bytes_per_sample
    }

    /// Keeps the high byte of every 16-bit sample. Equivalent to quantizing
    /// the same range at 8 bits, up to one rounding step.
    pub fn to_eight_bit(&self) -> RangeImage {
        if self.bit_depth == BitDepth::Eight {
            return self.clone();
        }
        RangeImage {
            bit_depth: BitDepth::Eight,
            channels: self.channels.iter().map(|c| c.iter().map(|&v| v >> 8).collect()).collect(),
            metas: self.metas.iter().map(|m| QuantizationMeta { bit_depth: BitDepth::Eight, ..*m }).collect(),
            ..self.clone()
        }
    }

    /// Binary 16-bit PGM of one channel.
    pub fn to_pgm(&self, channel: usize) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.cols(), self.rows()).into_bytes();
        let shift = if self.bit_depth == BitDepth::Eight { 8 } else { 0 };
        for &v in &self.channels[channel] {
            out.extend_from_slice(&(v << shift).to_be_bytes());
        }
        out
    }

    /// Writes `<stem>_c<i>.pgm` per channel for visual inspection.
    pub fn export_pgm(&self, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<std::path::PathBuf>> {
        let mut paths = Vec::new();
        for c in 0..self.channels.len() {
            let path = dir.as_ref().join(format!("{stem}_c{c}.pgm"));
            std::fs::File::create(&path)?.write_all(&self.to_pgm(c))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProjectOptions {
    /// Spherical images carry only the range channel; azimuth is rebuilt from
    /// the bin centre.
    pub radius_only: bool,
}

#[derive(Debug, Clone)]
pub struct Projection {
    /// One image, or three for [`ImageLayout::CartesianSingle`].
    pub images: Vec<RangeImage>,
    /// Points that lost their cell to a nearer return.
    pub collisions: usize,
}

struct Claimed {
    cell_point: Vec<u32>,
    rho: Vec<f64>,
    /// Azimuth offset of each point from the centre of its column.
    residual: Vec<f64>,
    collisions: usize,
}

fn claim_cells(cloud: &PointCloud, grid: &GridLayout) -> Result<Claimed> {
    let mut cell_point = vec![u32::MAX; grid.cells()];
    let mut rho = Vec::with_capacity(cloud.len());
    let mut residual = Vec::with_capacity(cloud.len());
    let mut collisions = 0;
    let provenance = cloud.provenance.as_deref();
    for (i, p) in cloud.points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::Projection(format!("point {i} is not finite")));
        }
        let r = p.norm();
        rho.push(r);
        let row = match provenance.and_then(|prov: &[Provenance]| grid.row_of_laser(prov[i].laser_id)) {
            Some(row) => row,
            None => {
                let theta = to_spherical(*p).theta;
                grid.row_of_elevation(theta).ok_or_else(|| {
                    Error::Projection(format!(
                        "point {i} has no provenance and elevation {:.4} deg matches no row",
                        theta.to_degrees()
                    ))
                })?
            }
        };
        let phi = if r == 0.0 { 0.0 } else { wrap_angle(p.y.atan2(p.x)) };
        let col = grid.column_of(phi);
        residual.push(wrap_angle(phi - grid.column_azimuth(col)));
        let cell = row * grid.cols() + col;
        let slot = &mut cell_point[cell];
        if *slot == u32::MAX {
            *slot = i as u32;
        } else {
            collisions += 1;
            if r < rho[*slot as usize] {
                *slot = i as u32;
            }
        }
    }
    Ok(Claimed { cell_point, rho, residual, collisions })
}

fn quantize_plane(
    cell_point: &[u32],
    value: impl Fn(usize) -> f64,
    bit_depth: BitDepth,
) -> Result<(Vec<u16>, QuantizationMeta)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in cell_point.iter().filter(|&&i| i != u32::MAX) {
        let v = value(i as usize);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let meta = if lo > hi {
        QuantizationMeta::new(0.0, 0.0, bit_depth)?
    } else {
        QuantizationMeta::new(lo, hi, bit_depth)?
    };
    let plane = cell_point
        .iter()
        .map(|&i| if i == u32::MAX { 0 } else { meta.quantize_value(value(i as usize)) })
        .collect();
    Ok((plane, meta))
}

/// Projects `cloud` onto `grid`. Rows come from provenance when the cloud
/// has it, otherwise from the nearest laser elevation. When two points land
/// in one cell the nearer one is kept.
pub fn project(
    cloud: &PointCloud,
    grid: &GridLayout,
    layout: ImageLayout,
    bit_depth: BitDepth,
    options: ProjectOptions,
) -> Result<Projection> {
    cloud.validate()?;
    let claimed = claim_cells(cloud, grid)?;
    let validity: Vec<bool> = claimed.cell_point.iter().map(|&i| i != u32::MAX).collect();
    let pts = &cloud.points;
    let cp = &claimed.cell_point;

    let plane_for = |kind: ChannelKind| -> Result<(Vec<u16>, QuantizationMeta)> {
        match kind {
            ChannelKind::X => quantize_plane(cp, |i| pts[i].x, bit_depth),
            ChannelKind::Y => quantize_plane(cp, |i| pts[i].y, bit_depth),
            ChannelKind::Z => quantize_plane(cp, |i| pts[i].z, bit_depth),
            ChannelKind::Range => quantize_plane(cp, |i| claimed.rho[i], bit_depth),
            ChannelKind::AzimuthResidual => quantize_plane(cp, |i| claimed.residual[i], bit_depth),
        }
    };
    let make = |kinds: Vec<ChannelKind>| -> Result<RangeImage> {
        let mut channels = Vec::with_capacity(kinds.len());
        let mut metas = Vec::with_capacity(kinds.len());
        for &k in &kinds {
            let (plane, meta) = plane_for(k)?;
            channels.push(plane);
            metas.push(meta);
        }
        Ok(RangeImage {
            grid: grid.clone(),
            layout,
            bit_depth,
            kinds,
            channels,
            metas,
            validity: validity.clone(),
        })
    };

    let images = match layout {
        ImageLayout::CartesianTri => vec![make(vec![ChannelKind::X, ChannelKind::Y, ChannelKind::Z])?],
        ImageLayout::CartesianSingle => vec![
            make(vec![ChannelKind::X])?,
            make(vec![ChannelKind::Y])?,
            make(vec![ChannelKind::Z])?,
        ],
        ImageLayout::Spherical if options.radius_only => vec![make(vec![ChannelKind::Range])?],
        ImageLayout::Spherical => vec![make(vec![ChannelKind::Range, ChannelKind::AzimuthResidual])?],
    };
    Ok(Projection { images, collisions: claimed.collisions })
}

/// Rebuilds one point per valid cell, in row-major cell order.
pub fn unproject(images: &[RangeImage]) -> Result<PointCloud> {
    let first = images.first().ok_or_else(|| Error::Projection("no images to unproject".into()))?;
    for img in images {
        img.validate()?;
        if img.grid != first.grid || img.validity != first.validity || img.layout != first.layout {
            return Err(Error::Projection("images disagree on grid, layout or validity".into()));
        }
    }
    let grid = &first.grid;
    let lookup = |kind: ChannelKind| -> Option<(&[u16], &QuantizationMeta)> {
        images.iter().find_map(|img| {
            img.kinds.iter().position(|&k| k == kind).map(|c| (img.channels[c].as_slice(), &img.metas[c]))
        })
    };
    let channel_count: usize = images.iter().map(|i| i.channel_count()).sum();
    let expected = match first.layout {
        ImageLayout::CartesianTri | ImageLayout::CartesianSingle => 3,
        ImageLayout::Spherical => channel_count.clamp(1, 2),
    };
    if channel_count != expected {
        return Err(Error::Projection(format!(
            "{} layout needs {expected} channels, got {channel_count}",
            first.layout.name()
        )));
    }

    let row_lasers: Vec<Option<u16>> = (0..grid.rows()).map(|r| grid.laser_of_row(r)).collect();
    let with_provenance = row_lasers.iter().all(Option::is_some);
    let mut points = Vec::with_capacity(first.valid_cells());
    let mut provenance = Vec::new();

    let rebuild: Box<dyn Fn(usize, usize, usize) -> Point3> = match first.layout {
        ImageLayout::CartesianTri | ImageLayout::CartesianSingle => {
            let (x, mx) = lookup(ChannelKind::X).ok_or_else(|| Error::Projection("missing x channel".into()))?;
            let (y, my) = lookup(ChannelKind::Y).ok_or_else(|| Error::Projection("missing y channel".into()))?;
            let (z, mz) = lookup(ChannelKind::Z).ok_or_else(|| Error::Projection("missing z channel".into()))?;
            Box::new(move |cell, _, _| {
                Point3::new(mx.dequantize_value(x[cell]), my.dequantize_value(y[cell]), mz.dequantize_value(z[cell]))
            })
        }
        ImageLayout::Spherical => {
            let (rho, mr) =
                lookup(ChannelKind::Range).ok_or_else(|| Error::Projection("missing range channel".into()))?;
            let residual = lookup(ChannelKind::AzimuthResidual);
            Box::new(move |cell, row, col| {
                let offset = residual.map_or(0.0, |(r, m)| m.dequantize_value(r[cell]));
                to_cartesian(SphericalPoint {
                    rho: mr.dequantize_value(rho[cell]),
                    theta: grid.elevations()[row],
                    phi: wrap_angle(grid.column_azimuth(col) + offset),
                })
            })
        }
    };

    for row in 0..grid.rows() {
        for col in 0..grid.cols() {
            let cell = row * grid.cols() + col;
            if !first.validity[cell] {
                continue;
            }
            points.push(rebuild(cell, row, col));
            if with_provenance {
                provenance.push(Provenance { laser_id: row_lasers[row].unwrap(), azimuth_bin: col as u32 });
            }
        }
    }
    Ok(PointCloud {
        points,
        provenance: with_provenance.then_some(provenance),
        frame_id: 0,
        raw_size_bytes: 0,
    })
}
