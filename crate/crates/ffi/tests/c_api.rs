use std::ffi::{CStr, CString};
use std::ptr;

use lidarpress_ffi::*;

fn cloud(points: &[[f64; 3]]) -> *mut LpCloud {
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lp_cloud_from_xyz(flat.as_ptr(), points.len(), &mut out) }, LpStatus::Ok);
    out
}

fn ring() -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    for laser in 0..16 {
        let elev = (-15.0 + 2.0 * laser as f64).to_radians();
        for i in 0..1800 {
            let az = (i as f64 * 0.2).to_radians();
            let r = 10.0 + (i % 7) as f64 * 0.01;
            pts.push([r * elev.cos() * az.cos(), r * elev.cos() * az.sin(), r * elev.sin()]);
        }
    }
    pts
}

fn xyz(c: *const LpCloud) -> Vec<f64> {
    let n = unsafe { lp_cloud_len(c) };
    let mut v = vec![0.0; n * 3];
    assert_eq!(unsafe { lp_cloud_copy_xyz(c, v.as_mut_ptr(), n) }, LpStatus::Ok);
    v
}

fn buffer_bytes(b: *const LpBuffer) -> Vec<u8> {
    unsafe { std::slice::from_raw_parts(lp_buffer_data(b), lp_buffer_len(b)).to_vec() }
}

#[test]
fn cloud_copy_roundtrip() {
    let c = cloud(&[[1.0, 2.0, 3.0], [-4.0, 5.5, 6.25]]);
    assert_eq!(xyz(c), vec![1.0, 2.0, 3.0, -4.0, 5.5, 6.25]);
    let mut small = [0.0; 3];
    assert_eq!(unsafe { lp_cloud_copy_xyz(c, small.as_mut_ptr(), 1) }, LpStatus::BufferTooSmall);
    unsafe { lp_cloud_free(c) };
}

#[test]
fn non_finite_and_null_arguments() {
    let bad = [1.0, f64::NAN, 0.0];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lp_cloud_from_xyz(bad.as_ptr(), 1, &mut out) }, LpStatus::InvalidArgument);
    assert!(out.is_null());
    let msg = unsafe { CStr::from_ptr(lp_last_error_message()) }.to_str().unwrap();
    assert!(msg.contains("finite"), "{msg}");
    assert_eq!(unsafe { lp_cloud_from_xyz(ptr::null(), 3, &mut out) }, LpStatus::NullPointer);
    let mut db = 0.0;
    assert_eq!(unsafe { lp_psnr(ptr::null(), ptr::null(), 8, &mut db) }, LpStatus::NullPointer);
    unsafe {
        lp_cloud_free(ptr::null_mut());
        lp_buffer_free(ptr::null_mut());
    }
}

#[test]
fn image_roundtrip_both_codecs() {
    let pts = ring();
    let c = cloud(&pts);
    for codec in [LpImageCodec::Dictionary, LpImageCodec::Predictive] {
        let mut buf = ptr::null_mut();
        let s = unsafe { lp_image_encode(c, LpSensor::Vlp16, 600, codec, LpLayout::Spherical, 16, &mut buf) };
        assert_eq!(s, LpStatus::Ok);
        let bytes = buffer_bytes(buf);
        let mut dec = ptr::null_mut();
        assert_eq!(unsafe { lp_image_decode(bytes.as_ptr(), bytes.len(), &mut dec) }, LpStatus::Ok);
        assert_eq!(unsafe { lp_cloud_len(dec) }, pts.len());
        let mut db = 0.0;
        assert_eq!(unsafe { lp_psnr(c, dec, 8, &mut db) }, LpStatus::Ok);
        assert!(db > 60.0, "{db}");
        unsafe {
            lp_cloud_free(dec);
            lp_buffer_free(buf);
        }
    }
    unsafe { lp_cloud_free(c) };
}

#[test]
fn bad_bit_depth_and_corrupt_buffer() {
    let c = cloud(&ring());
    let mut buf = ptr::null_mut();
    let s = unsafe { lp_image_encode(c, LpSensor::Vlp16, 600, LpImageCodec::Dictionary, LpLayout::Spherical, 12, &mut buf) };
    assert_eq!(s, LpStatus::InvalidArgument);
    let junk = [9u8, 0, 0, 0, 1, 2, 3];
    let mut dec = ptr::null_mut();
    assert_eq!(unsafe { lp_image_decode(junk.as_ptr(), junk.len(), &mut dec) }, LpStatus::Corrupt);
    assert_eq!(unsafe { lp_octree_decode(junk.as_ptr(), junk.len(), &mut dec) }, LpStatus::Corrupt);
    unsafe { lp_cloud_free(c) };
}

#[test]
fn octree_error_within_half_diagonal() {
    let pts = ring();
    let c = cloud(&pts);
    let mut buf = ptr::null_mut();
    assert_eq!(unsafe { lp_octree_encode(c, 0.01, false, &mut buf) }, LpStatus::Ok);
    let bytes = buffer_bytes(buf);
    let mut dec = ptr::null_mut();
    assert_eq!(unsafe { lp_octree_decode(bytes.as_ptr(), bytes.len(), &mut dec) }, LpStatus::Ok);
    let out = xyz(dec);
    let bound = 0.01 * 3f64.sqrt() / 2.0 + 1e-9;
    for p in &pts {
        let best = out
            .chunks_exact(3)
            .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(best <= bound);
    }
    unsafe {
        lp_cloud_free(dec);
        lp_buffer_free(buf);
        lp_cloud_free(c);
    }
}

#[test]
fn pcd_file_roundtrip_and_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.pcd").to_str().unwrap()).unwrap();
    let c = cloud(&[[0.5, 0.25, -1.0], [3.0, 2.0, 1.0]]);
    assert_eq!(unsafe { lp_cloud_write_pcd(c, path.as_ptr()) }, LpStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { lp_cloud_read_pcd(path.as_ptr(), &mut back) }, LpStatus::Ok);
    assert_eq!(xyz(back), xyz(c));
    let missing = CString::new(dir.path().join("none.pcd").to_str().unwrap()).unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { lp_cloud_read_pcd(missing.as_ptr(), &mut none) }, LpStatus::Io);
    unsafe {
        lp_cloud_free(back);
        lp_cloud_free(c);
    }
}

#[test]
fn rate_and_bpp() {
    let mut v = 0.0;
    assert_eq!(unsafe { lp_compression_rate(25, 100, &mut v) }, LpStatus::Ok);
    assert_eq!(v, 0.75);
    assert_eq!(unsafe { lp_bpp(3, 8, &mut v) }, LpStatus::Ok);
    assert_eq!(v, 0.375);
    assert_eq!(unsafe { lp_bpp(3, 0, &mut v) }, LpStatus::Metric);
    let ver = unsafe { CStr::from_ptr(lp_version()) }.to_str().unwrap();
    assert_eq!(ver, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lidarpress.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!(" {name}(")) || header.contains(&format!("*{name}(")), "{name}");
    }
}
