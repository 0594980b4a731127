//! Pinhole rendering out of an equirectangular panorama.
//!
//! Camera frame: +x right, +y down, +z forward. A rotation maps camera axes to scene axes,
//! i.e. its columns are the scene-space right, down and forward vectors.

use image::RgbImage;
use rayon::prelude::*;

use crate::geom::{Mat3, Vec3};
use crate::raster::{sample_equirect_bilinear, EquirectImage};
use crate::sphere::direction_to_pixel;

/// Focal length in pixels of a square `size` view with horizontal field of view `fov_deg`.
///
/// A 90° view gets exactly `size / 2`, so cube faces built from a field of view coincide
/// bit-for-bit with faces built from the cube geometry.
pub fn focal_from_fov(size: usize, fov_deg: f64) -> f64 {
    let half = size as f64 / 2.0;
    if fov_deg == 90.0 {
        half
    } else {
        half / (fov_deg.to_radians() / 2.0).tan()
    }
}

/// Scene-space ray (not normalized) through the center of pixel `(j, k)`.
#[inline]
pub fn pixel_ray(rotation: &Mat3, focal: f64, size: usize, j: usize, k: usize) -> Vec3 {
    let c = size as f64 / 2.0;
    let cam = Vec3::new(
        (j as f64 + 0.5 - c) / focal,
        (k as f64 + 0.5 - c) / focal,
        1.0,
    );
    *rotation * cam
}

/// Renders a `size`×`size` view by bilinear sampling of the panorama along each pixel ray.
pub fn render(pano: &EquirectImage, rotation: &Mat3, focal: f64, size: usize) -> RgbImage {
    let (w, h) = pano.dims();
    let src = pano.as_rgb();
    let mut out = vec![0u8; size * size * 3];
    out.par_chunks_mut(size * 3).enumerate().for_each(|(k, row)| {
        for j in 0..size {
            let ray = pixel_ray(rotation, focal, size, j, k);
            let (x, y) = direction_to_pixel(ray, w, h);
            row[j * 3..j * 3 + 3].copy_from_slice(&sample_equirect_bilinear(src, x, y));
        }
    });
    RgbImage::from_raw(size as u32, size as u32, out).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focal_for_common_fovs() {
        assert_eq!(focal_from_fov(512, 90.0), 256.0);
        assert!((focal_from_fov(512, 60.0) - 256.0 * 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn center_ray_is_forward() {
        let r = Mat3::IDENTITY;
        let ray = pixel_ray(&r, 2.0, 4, 1, 1);
        assert_eq!(ray, Vec3::new(-0.25, -0.25, 1.0));
    }
}
