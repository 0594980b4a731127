//! Coarse view synthesis: forward-warp a panorama and its depth to a translated viewpoint.
//!
//! Every source pixel is lifted to 3D, re-expressed relative to the new camera center and
//! splatted into the nearest target pixel. Collisions keep the smallest new depth; exact
//! depth ties keep the lowest row-major source index. Target pixels that receive nothing
//! become holes (color 255, depth 0, mask 1).
//!
//! Longitude wraps, and the panorama covers the whole sphere, so every reprojected
//! direction lands in-domain; only unreached targets are holes.

use std::sync::atomic::{AtomicU64, Ordering};

use image::RgbImage;
use rayon::prelude::*;

use crate::error::Result;
use crate::geom::Vec3;
use crate::raster::{check_dims, DepthMap, EquirectImage, HoleMask};
use crate::sphere::{column_longitude, direction_to_pixel, row_latitude, CameraPose};

/// Value written to every channel of a hole pixel.
pub const HOLE_VALUE: u8 = 255;

const EMPTY: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub image: EquirectImage,
    pub depth: DepthMap,
    pub mask: HoleMask,
}

impl WarpResult {
    pub fn hole_ratio(&self) -> f64 {
        hole_ratio(&self.mask)
    }
}

struct Splatter {
    w: usize,
    h: usize,
    rows: Vec<(f64, f64)>,
    cols: Vec<(f64, f64)>,
    origin: Vec3,
}

impl Splatter {
    fn new(w: usize, h: usize, pose: CameraPose) -> Self {
        Splatter {
            w,
            h,
            rows: (0..h).map(|y| row_latitude(y as f64, h).sin_cos()).collect(),
            cols: (0..w).map(|x| column_longitude(x as f64, w).sin_cos()).collect(),
            origin: pose.as_vec(),
        }
    }

    /// z-buffer key (new depth bits, source index) and target index for one source pixel.
    #[inline]
    fn splat(&self, x: usize, y: usize, depth: f32) -> Option<(usize, u64)> {
        let (st, ct) = self.rows[y];
        let (sp, cp) = self.cols[x];
        let d = depth as f64;
        let lifted = Vec3::new(ct * cp * d, st * d, -ct * sp * d);
        let rel = lifted - self.origin;
        let dn = rel.norm();
        let dn32 = dn as f32;
        if !(dn32 > 0.0) {
            return None;
        }
        let (xn, yn) = direction_to_pixel(rel.scale(1.0 / dn), self.w, self.h);
        let tx = (xn.round() as i64).rem_euclid(self.w as i64) as usize;
        let ty = (yn.round() as i64).clamp(0, self.h as i64 - 1) as usize;
        let src = (y * self.w + x) as u64;
        Some((ty * self.w + tx, (u64::from(dn32.to_bits()) << 32) | src))
    }
}

fn validate(src: &EquirectImage, depth: &DepthMap) -> Result<()> {
    check_dims("depth map", depth.dims(), src.dims())?;
    depth.validate_positive()
}

/// Forward-warps `src` to `pose`, parallel over source rows.
pub fn cvs_warp(src: &EquirectImage, depth: &DepthMap, pose: CameraPose) -> Result<WarpResult> {
    validate(src, depth)?;
    let (w, h) = src.dims();
    let splatter = Splatter::new(w, h, pose);
    let zbuf: Vec<AtomicU64> = (0..w * h).map(|_| AtomicU64::new(EMPTY)).collect();
    let dvals = depth.data();
    (0..h).into_par_iter().for_each(|y| {
        for x in 0..w {
            if let Some((t, key)) = splatter.splat(x, y, dvals[y * w + x]) {
                zbuf[t].fetch_min(key, Ordering::Relaxed);
            }
        }
    });
    let keys: Vec<u64> = zbuf.into_iter().map(AtomicU64::into_inner).collect();
    Ok(resolve(src, &keys))
}

/// Single-threaded reference path; produces exactly what [`cvs_warp`] produces.
pub fn cvs_warp_sequential(
    src: &EquirectImage,
    depth: &DepthMap,
    pose: CameraPose,
) -> Result<WarpResult> {
    validate(src, depth)?;
    let (w, h) = src.dims();
    let splatter = Splatter::new(w, h, pose);
    let mut keys = vec![EMPTY; w * h];
    let dvals = depth.data();
    for y in 0..h {
        for x in 0..w {
            if let Some((t, key)) = splatter.splat(x, y, dvals[y * w + x]) {
                if key < keys[t] {
                    keys[t] = key;
                }
            }
        }
    }
    Ok(resolve(src, &keys))
}

fn resolve(src: &EquirectImage, keys: &[u64]) -> WarpResult {
    let (w, h) = src.dims();
    let raw = src.as_rgb().as_raw();
    let mut color = vec![0u8; w * h * 3];
    let mut depth = vec![0f32; w * h];
    let mut mask = vec![0u8; w * h];
    color
        .par_chunks_mut(w * 3)
        .zip(depth.par_chunks_mut(w))
        .zip(mask.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((crow, drow), mrow))| {
            for x in 0..w {
                let key = keys[y * w + x];
                if key == EMPTY {
                    crow[x * 3..x * 3 + 3].fill(HOLE_VALUE);
                    mrow[x] = 1;
                } else {
                    let s = (key & 0xffff_ffff) as usize;
                    crow[x * 3..x * 3 + 3].copy_from_slice(&raw[s * 3..s * 3 + 3]);
                    drow[x] = f32::from_bits((key >> 32) as u32);
                }
            }
        });
    WarpResult {
        image: EquirectImage::new(
            RgbImage::from_raw(w as u32, h as u32, color).expect("sized by construction"),
        )
        .expect("same shape as source"),
        depth: DepthMap::new(w, h, depth).expect("sized by construction"),
        mask: HoleMask::new(w, h, mask).expect("binary by construction"),
    }
}

/// Fraction of pixels marked as holes.
pub fn hole_ratio(mask: &HoleMask) -> f64 {
    let total = mask.width() * mask.height();
    if total == 0 {
        return 0.0;
    }
    mask.hole_count() as f64 / total as f64
}

/// Keeps warped pixels where the mask is 0 and takes `inpainted` where it is 1.
pub fn composite_replace(inpainted: &EquirectImage, warped: &WarpResult) -> Result<EquirectImage> {
    check_dims("inpainted panorama", inpainted.dims(), warped.image.dims())?;
    let mask = warped.mask.data();
    let mut out = warped.image.as_rgb().clone();
    let fill = inpainted.as_rgb().as_raw();
    for (i, px) in out.chunks_exact_mut(3).enumerate() {
        if mask[i] != 0 {
            px.copy_from_slice(&fill[i * 3..i * 3 + 3]);
        }
    }
    EquirectImage::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn gradient(w: usize, h: usize) -> EquirectImage {
        EquirectImage::from_fn(w, h, |x, y| {
            image::Rgb([(x * 255 / w as u32) as u8, (y * 255 / h as u32) as u8, 40])
        })
        .unwrap()
    }

    #[test]
    fn identity_pose_is_exact_copy() {
        let src = gradient(256, 128);
        let depth = DepthMap::from_fn(256, 128, |x, y| 1.0 + (x as f32 * 0.01) + y as f32 * 0.003).unwrap();
        let r = cvs_warp(&src, &depth, CameraPose::ORIGIN).unwrap();
        assert_eq!(r.image, src);
        assert_eq!(r.depth, depth);
        assert_eq!(r.mask.hole_count(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let src = gradient(64, 32);
        let small = DepthMap::filled(32, 16, 1.0).unwrap();
        assert!(matches!(
            cvs_warp(&src, &small, CameraPose::ORIGIN),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut data = vec![1.0; 64 * 32];
        data[100] = -1.0;
        let bad = DepthMap::new(64, 32, data).unwrap();
        assert!(matches!(
            cvs_warp(&src, &bad, CameraPose::ORIGIN),
            Err(Error::InvalidDepth { .. })
        ));
    }

    #[test]
    fn holes_are_consistent() {
        let src = gradient(256, 128);
        let depth = DepthMap::filled(256, 128, 2.0).unwrap();
        let r = cvs_warp(&src, &depth, CameraPose::new(0.1, 0.0, 0.05).unwrap()).unwrap();
        assert!(r.mask.hole_count() > 0);
        for y in 0..128 {
            for x in 0..256 {
                let hole = r.mask.is_hole(x, y);
                assert_eq!(hole, r.depth.get(x, y) == 0.0);
                if hole {
                    assert_eq!(r.image.pixel(x, y), [HOLE_VALUE; 3]);
                }
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let src = gradient(256, 128);
        let depth = DepthMap::from_fn(256, 128, |x, y| 0.8 + ((x * 7 + y * 3) % 17) as f32 * 0.1).unwrap();
        let pose = CameraPose::new(0.07, -0.03, 0.12).unwrap();
        assert_eq!(
            cvs_warp(&src, &depth, pose).unwrap(),
            cvs_warp_sequential(&src, &depth, pose).unwrap()
        );
    }

    #[test]
    fn hole_ratio_extremes() {
        assert_eq!(hole_ratio(&HoleMask::zeros(8, 4)), 0.0);
        assert_eq!(hole_ratio(&HoleMask::ones(8, 4)), 1.0);
    }

    #[test]
    fn composite_selects_by_mask() {
        let warped_img = gradient(64, 32);
        let inpainted = EquirectImage::filled(64, 32, [1, 2, 3]).unwrap();
        let mask = HoleMask::from_fn(64, 32, |x, y| (x * 31 + y * 17) % 5 == 0);
        let warped = WarpResult {
            image: warped_img.clone(),
            depth: DepthMap::filled(64, 32, 1.0).unwrap(),
            mask: mask.clone(),
        };
        let out = composite_replace(&inpainted, &warped).unwrap();
        for y in 0..32 {
            for x in 0..64 {
                let want = if mask.is_hole(x, y) {
                    [1, 2, 3]
                } else {
                    warped_img.pixel(x, y)
                };
                assert_eq!(out.pixel(x, y), want);
            }
        }
        let all_known = WarpResult {
            mask: HoleMask::zeros(64, 32),
            ..warped.clone()
        };
        assert_eq!(composite_replace(&inpainted, &all_known).unwrap(), warped_img);
        let all_holes = WarpResult {
            mask: HoleMask::ones(64, 32),
            ..warped
        };
        assert_eq!(composite_replace(&inpainted, &all_holes).unwrap(), inpainted);
    }
}
