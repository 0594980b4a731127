//! Geometry engine for panoramic novel-view synthesis.
//!
//! A panorama and its depth are forward-warped to nearby viewpoints ([`warp`]), the
//! resulting holes are filled progressively on cubemap faces ([`pnvi`], [`cubemap`],
//! [`inpaint`]), and the clean panoramas are sliced into posed pinhole views with a
//! depth-lifted point cloud for reconstruction ([`mvp`]). [`dataset`] builds inpainting
//! training data from the same warp masks.

pub mod cubemap;
pub mod dataset;
pub mod error;
pub mod geom;
pub mod inpaint;
pub mod io;
pub mod mvp;
pub mod pinhole;
pub mod pnvi;
pub mod raster;
pub mod sphere;
pub mod warp;

pub use error::{Error, Result};
pub use geom::{Mat3, Quat, Vec3};
pub use raster::{DepthMap, EquirectImage, HoleMask};
pub use sphere::{CameraPose, SphericalCoord};
