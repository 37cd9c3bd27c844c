//! C ABI over the lidarpress codecs and metrics.
//!
//! Every function returns an [`LpStatus`]. On failure a message describing
//! the error is kept per thread and can be read with
//! [`lp_last_error_message`]. Objects are opaque handles released with their
//! `_free` function; passing NULL to a `_free` function is a no-op.
//!
//! Image encodings may hold several blobs (one per image of the layout). The
//! buffer is then a sequence of `u32` little-endian lengths each followed by
//! that many blob bytes.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lidarpress::codec::{dictionary_decode, dictionary_encode, predictive_decode, predictive_encode};
use lidarpress::ingest::{read_csv, read_pcd, write_pcd, PcdDataMode, SensorModel};
use lidarpress::metrics::{bpp, compression_rate, psnr_point_to_plane};
use lidarpress::octree::{octree_decode, octree_encode};
use lidarpress::projection::{project, unproject, GridLayout, ImageLayout, ProjectOptions};
use lidarpress::{BitDepth, CodecId, CompressedBlob, Error, Point3, PointCloud};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Corrupt = 3,
    Io = 4,
    Parse = 5,
    Metric = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpSensor {
    Vlp16 = 0,
    Hdl32 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpImageCodec {
    /// DEFLATE-style dictionary codec.
    Dictionary = 0,
    /// Median predictor with Golomb-Rice coding.
    Predictive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpLayout {
    Spherical = 0,
    CartesianTri = 1,
    CartesianSingle = 2,
}

/// A point cloud.
pub struct LpCloud(PointCloud);

/// An owned byte buffer.
pub struct LpBuffer(Vec<u8>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> LpStatus {
    match e {
        Error::Corrupt(_) => LpStatus::Corrupt,
        Error::Io(_) => LpStatus::Io,
        Error::Pcap { .. }
        | Error::PcdHeader { .. }
        | Error::UnsupportedDataMode(_)
        | Error::PcdData(_)
        | Error::Csv { .. } => LpStatus::Parse,
        Error::Metric(_) => LpStatus::Metric,
        _ => LpStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (LpStatus, String)>) -> LpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LpStatus::Panic
        }
    }
}

fn lift<T>(r: lidarpress::Result<T>) -> Result<T, (LpStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LpStatus, String) {
    (LpStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn path_arg(path: *const c_char) -> Result<String, (LpStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (LpStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn bytes_arg<'a>(data: *const u8, len: usize) -> Result<&'a [u8], (LpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("data"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn cloud_arg<'a>(cloud: *const LpCloud, what: &str) -> Result<&'a PointCloud, (LpStatus, String)> {
    cloud.as_ref().map(|c| &c.0).ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a cloud from `count` interleaved x, y, z doubles.
#[no_mangle]
pub unsafe extern "C" fn lp_cloud_from_xyz(xyz: *const f64, count: usize, out: *mut *mut LpCloud) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if count > 0 && xyz.is_null() {
            return Err(null("xyz"));
        }
        let coords = if count == 0 { &[][..] } else { std::slice::from_raw_parts(xyz, count * 3) };
        let points: Vec<Point3> = coords.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err((LpStatus::InvalidArgument, format!("point {i} is not finite")));
        }
        put(out, LpCloud(PointCloud::new(points)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_cloud_read_pcd(path: *const c_char, out: *mut *mut LpCloud) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cloud = lift(read_pcd(path_arg(path)?))?;
        put(out, LpCloud(cloud));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_cloud_read_csv(path: *const c_char, out: *mut *mut LpCloud) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cloud = lift(read_csv(path_arg(path)?))?;
        put(out, LpCloud(cloud));
        Ok(())
    })
}

/// Writes a binary PCD file.
#[no_mangle]
pub unsafe extern "C" fn lp_cloud_write_pcd(cloud: *const LpCloud, path: *const c_char) -> LpStatus {
    guard(|| {
        let cloud = cloud_arg(cloud, "cloud")?;
        lift(write_pcd(cloud, path_arg(path)?, PcdDataMode::Binary))
    })
}

/// Number of points, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn lp_cloud_len(cloud: *const LpCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Copies the points as interleaved x, y, z into `xyz`, which must hold
/// `capacity` points.
#[no_mangle]
pub unsafe extern "C" fn lp_cloud_copy_xyz(cloud: *const LpCloud, xyz: *mut f64, capacity: usize) -> LpStatus {
    guard(|| {
        let cloud = cloud_arg(cloud, "cloud")?;
        if cloud.len() > capacity {
            return Err((LpStatus::BufferTooSmall, format!("need room for {} points, got {capacity}", cloud.len())));
        }
        if cloud.is_empty() {
            return Ok(());
        }
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let dst = std::slice::from_raw_parts_mut(xyz, cloud.len() * 3);
        for (d, p) in dst.chunks_exact_mut(3).zip(&cloud.points) {
            d.copy_from_slice(&p.to_array());
        }
        Ok(())
    })
}

/// Uncompressed size recorded for the cloud (capture bytes), or 0.
#[no_mangle]
pub unsafe extern "C" fn lp_cloud_raw_size(cloud: *const LpCloud) -> u64 {
    cloud.as_ref().map_or(0, |c| c.0.raw_size_bytes)
}

#[no_mangle]
pub unsafe extern "C" fn lp_cloud_free(cloud: *mut LpCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lp_buffer_data(buffer: *const LpBuffer) -> *const u8 {
    buffer.as_ref().map_or(ptr::null(), |b| b.0.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn lp_buffer_len(buffer: *const LpBuffer) -> usize {
    buffer.as_ref().map_or(0, |b| b.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn lp_buffer_free(buffer: *mut LpBuffer) {
    if !buffer.is_null() {
        drop(Box::from_raw(buffer));
    }
}

/// Projects `cloud` onto the sensor's range-image grid and encodes every
/// image. `bit_depth` is 8 or 16.
#[no_mangle]
pub unsafe extern "C" fn lp_image_encode(
    cloud: *const LpCloud,
    sensor: LpSensor,
    rpm: u32,
    codec: LpImageCodec,
    layout: LpLayout,
    bit_depth: u32,
    out: *mut *mut LpBuffer,
) -> LpStatus {
    guard(|| {
        let cloud = cloud_arg(cloud, "cloud")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let bits = lift(BitDepth::from_bits(bit_depth))?;
        if rpm == 0 {
            return Err((LpStatus::InvalidArgument, "rpm must be positive".into()));
        }
        let sensor = match sensor {
            LpSensor::Vlp16 => SensorModel::Vlp16,
            LpSensor::Hdl32 => SensorModel::Hdl32,
        };
        let layout = match layout {
            LpLayout::Spherical => ImageLayout::Spherical,
            LpLayout::CartesianTri => ImageLayout::CartesianTri,
            LpLayout::CartesianSingle => ImageLayout::CartesianSingle,
        };
        let grid = GridLayout::for_sensor(sensor, rpm);
        let images = lift(project(cloud, &grid, layout, bits, ProjectOptions::default()))?.images;
        let mut buf = Vec::new();
        for img in &images {
            let blob = lift(match codec {
                LpImageCodec::Dictionary => dictionary_encode(img),
                LpImageCodec::Predictive => predictive_encode(img),
            })?
            .to_bytes();
            buf.extend_from_slice(&(blob.len() as u32).to_le_bytes());
            buf.extend_from_slice(&blob);
        }
        put(out, LpBuffer(buf));
        Ok(())
    })
}

/// Decodes a buffer produced by [`lp_image_encode`] back to points.
#[no_mangle]
pub unsafe extern "C" fn lp_image_decode(data: *const u8, len: usize, out: *mut *mut LpCloud) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut rest = bytes_arg(data, len)?;
        let corrupt = |m: &str| (LpStatus::Corrupt, m.to_string());
        let mut images = Vec::new();
        while !rest.is_empty() {
            if rest.len() < 4 {
                return Err(corrupt("truncated blob length"));
            }
            let n = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
            rest = &rest[4..];
            if rest.len() < n {
                return Err(corrupt("truncated blob"));
            }
            let blob = lift(CompressedBlob::from_bytes(&rest[..n]))?;
            rest = &rest[n..];
            images.push(lift(match blob.codec_id {
                CodecId::Dictionary => dictionary_decode(&blob),
                CodecId::Predictive => predictive_decode(&blob),
                other => Err(Error::Corrupt(format!("{other:?} is not an image codec"))),
            })?);
        }
        if images.is_empty() {
            return Err(corrupt("no blobs in buffer"));
        }
        put(out, LpCloud(lift(unproject(&images))?));
        Ok(())
    })
}

/// Occupancy-octree encoding at leaf size `resolution` meters.
#[no_mangle]
pub unsafe extern "C" fn lp_octree_encode(
    cloud: *const LpCloud,
    resolution: f64,
    deflate_payload: bool,
    out: *mut *mut LpBuffer,
) -> LpStatus {
    guard(|| {
        let cloud = cloud_arg(cloud, "cloud")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, LpBuffer(lift(octree_encode(cloud, resolution, deflate_payload))?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_octree_decode(data: *const u8, len: usize, out: *mut *mut LpCloud) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, LpCloud(lift(octree_decode(bytes_arg(data, len)?))?));
        Ok(())
    })
}

/// Symmetric point-to-plane PSNR in dB; `+inf` for identical clouds.
#[no_mangle]
pub unsafe extern "C" fn lp_psnr(
    original: *const LpCloud,
    decoded: *const LpCloud,
    k: usize,
    out_db: *mut f64,
) -> LpStatus {
    guard(|| {
        let a = cloud_arg(original, "original")?;
        let b = cloud_arg(decoded, "decoded")?;
        if out_db.is_null() {
            return Err(null("out_db"));
        }
        *out_db = lift(psnr_point_to_plane(a, b, k))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_compression_rate(compressed_bytes: u64, raw_bytes: u64, out: *mut f64) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(compression_rate(compressed_bytes, raw_bytes))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lp_bpp(compressed_bytes: u64, point_count: u64, out: *mut f64) -> LpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(bpp(compressed_bytes, point_count))?;
        Ok(())
    })
}
