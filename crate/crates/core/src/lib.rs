//! Compression and delivery toolkit for low-bandwidth imagery.
//!
//! The crate is organised by stage of the delivery chain:
//!
//! * [`raster`]: 8-bit images, PNM I/O, annotations and synthetic scenes.
//! * [`metrics`]: MSE, PSNR, SSIM, compression ratio and bitrate.
//! * [`codecs`]: Huffman, lossless predictive and DCT transform codecs behind
//!   a self-describing blob container.
//! * [`autoencoder`]: a from-scratch convolutional autoencoder used as a
//!   neural codec, with training and block-count ablation.
//! * [`payloads`]: cutouts, captions and packaged images with exact byte
//!   accounting.
//! * [`delivery`]: hierarchical transmission planning over a simulated link.

pub mod autoencoder;
pub mod codecs;
pub mod delivery;
pub mod error;
pub mod metrics;
pub mod payloads;
pub mod raster;

pub use error::{Error, Result};
pub use raster::{Annotation, BoundingBox, Image};
