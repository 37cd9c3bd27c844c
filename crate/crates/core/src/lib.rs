//! Compression pipelines for rotating-LiDAR point clouds.
//!
//! Two families of codecs are provided and benchmarked against each other:
//!
//! * 2D pipelines project a scan onto a range image ([`projection`]) and
//!   compress it with an image codec ([`codec::dictionary`], a DEFLATE-style
//!   LZ77 + Huffman coder, or [`codec::predictive`], a median-predictor +
//!   Golomb-Rice coder) or with a sequence codec ([`video`]).
//! * The 3D pipeline encodes the cloud as a breadth-first occupancy octree
//!   ([`octree`]).
//!
//! [`metrics`] implements compression rate, bytes per point and the
//! point-to-plane PSNR used to compare them; [`bench`] drives whole codec
//! matrices over captures read by [`ingest`].

pub mod bench;
pub mod cloud;
pub mod codec;
mod error;
pub mod ingest;
pub mod metrics;
pub mod octree;
pub mod projection;
pub mod synth;
pub mod video;

pub use cloud::{BitDepth, Point3, PointCloud, Provenance, QuantizationMeta, SphericalPoint};
pub use codec::{CodecId, CompressedBlob};
pub use error::{Error, Result};
pub use projection::{GridLayout, ImageLayout, RangeImage};
