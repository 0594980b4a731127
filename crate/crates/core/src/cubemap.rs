//! Equirectangular ↔ cubemap conversion.
//!
//! Face order is `[front(+X), right(−Z), back(−X), left(+Z), up(+Y), down(−Y)]`.
//! Each face is a 90° pinhole view. Side faces keep +Y as their image-down direction, the
//! `+Y` face has the front face along its top edge and the `−Y` face has the front face
//! along its bottom edge. Because latitude grows with the panorama row, the `+Y` face holds
//! the panorama's bottom cap.
//!
//! Color faces are sampled bilinearly. Mask faces are binary and hole-wins: a face pixel
//! is a hole if its nearest pano pixel is, and also if it is the face pixel that
//! [`c2e_mask`] will read for some hole pano pixel. So a mask round trip never loses a hole.

use image::RgbImage;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::pinhole::{pixel_ray, render};
use crate::raster::{check_dims, sample_clamped_bilinear, EquirectImage, HoleMask};
use crate::sphere::{direction_to_pixel, pixel_to_spherical, spherical_to_cartesian};

/// Face resolution used when no other is given.
pub const DEFAULT_FACE_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CubeFace {
    Front,
    Right,
    Back,
    Left,
    Up,
    Down,
}

impl CubeFace {
    /// Storage order, which is also the tie-break priority of the dominant-axis rule.
    pub const ALL: [CubeFace; 6] = [
        CubeFace::Front,
        CubeFace::Right,
        CubeFace::Back,
        CubeFace::Left,
        CubeFace::Up,
        CubeFace::Down,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CubeFace::Front => "front",
            CubeFace::Right => "right",
            CubeFace::Back => "back",
            CubeFace::Left => "left",
            CubeFace::Up => "up",
            CubeFace::Down => "down",
        }
    }

    pub fn from_name(name: &str) -> Option<CubeFace> {
        CubeFace::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Scene-space (right, down, forward) of the face's image plane.
    pub fn basis(self) -> (Vec3, Vec3, Vec3) {
        let x = Vec3::X;
        let y = Vec3::Y;
        let z = Vec3::Z;
        match self {
            CubeFace::Front => (-z, y, x),
            CubeFace::Right => (-x, y, -z),
            CubeFace::Back => (z, y, -x),
            CubeFace::Left => (x, y, z),
            CubeFace::Up => (-z, -x, y),
            CubeFace::Down => (-z, x, -y),
        }
    }

    /// Camera-to-scene rotation of the face (columns: right, down, forward).
    pub fn rotation(self) -> Mat3 {
        let (r, d, f) = self.basis();
        Mat3::from_columns(r, d, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubemapSet<F> {
    face_size: usize,
    faces: [F; 6],
}

impl<F> CubemapSet<F> {
    pub fn face_size(&self) -> usize {
        self.face_size
    }

    pub fn face(&self, face: CubeFace) -> &F {
        &self.faces[face.index()]
    }

    pub fn faces(&self) -> &[F; 6] {
        &self.faces
    }

    pub fn into_faces(self) -> [F; 6] {
        self.faces
    }

    pub fn iter(&self) -> impl Iterator<Item = (CubeFace, &F)> {
        CubeFace::ALL.into_iter().zip(self.faces.iter())
    }
}

impl CubemapSet<RgbImage> {
    pub fn new(faces: [RgbImage; 6]) -> Result<Self> {
        let n = faces[0].width() as usize;
        for (face, img) in CubeFace::ALL.iter().zip(&faces) {
            if img.width() as usize != n || img.height() as usize != n || n == 0 {
                return Err(Error::ContractViolation(format!(
                    "cube face {} is {}x{}, expected {n}x{n}",
                    face.name(),
                    img.width(),
                    img.height()
                )));
            }
        }
        Ok(CubemapSet {
            face_size: n,
            faces,
        })
    }
}

impl CubemapSet<HoleMask> {
    pub fn new_masks(faces: [HoleMask; 6]) -> Result<Self> {
        let n = faces[0].width();
        for (face, m) in CubeFace::ALL.iter().zip(&faces) {
            if m.dims() != (n, n) || n == 0 {
                return Err(Error::ContractViolation(format!(
                    "mask face {} is {}x{}, expected {n}x{n}",
                    face.name(),
                    m.width(),
                    m.height()
                )));
            }
        }
        Ok(CubemapSet {
            face_size: n,
            faces,
        })
    }
}

/// Face hit by a direction under the dominant-axis rule, plus continuous face coordinates.
#[inline]
pub fn face_coords(dir: Vec3, n: usize) -> (CubeFace, f64, f64) {
    let mut best = CubeFace::Front;
    let mut best_t = f64::NEG_INFINITY;
    for face in CubeFace::ALL {
        let t = dir.dot(face.basis().2);
        if t > best_t {
            best = face;
            best_t = t;
        }
    }
    let (right, down, _) = best.basis();
    let half = n as f64 / 2.0;
    let u = (dir.dot(right) / best_t + 1.0) * half - 0.5;
    let v = (dir.dot(down) / best_t + 1.0) * half - 0.5;
    (best, u, v)
}

#[inline]
fn nearest_face_pixel(dir: Vec3, n: usize) -> (CubeFace, usize, usize) {
    let (face, u, v) = face_coords(dir, n);
    let clamp = |c: f64| (c.round().max(0.0) as usize).min(n - 1);
    (face, clamp(u), clamp(v))
}

fn check_face_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::ContractViolation("face size must be positive".into()));
    }
    Ok(())
}

fn check_pano_size(w: usize, h: usize) -> Result<()> {
    if h == 0 || w != 2 * h {
        return Err(Error::ContractViolation(format!(
            "panorama must be 2:1 and non-empty, got {w}x{h}"
        )));
    }
    Ok(())
}

pub fn e2c(pano: &EquirectImage, face_size: usize) -> Result<CubemapSet<RgbImage>> {
    check_face_size(face_size)?;
    let half = face_size as f64 / 2.0;
    let faces: Vec<RgbImage> = CubeFace::ALL
        .par_iter()
        .map(|f| render(pano, &f.rotation(), half, face_size))
        .collect();
    CubemapSet::new(faces.try_into().expect("six faces"))
}

/// Nearest-neighbor mask faces. Every panorama hole also marks the face pixel it lands on,
/// so [`c2e_mask`] never loses a hole.
pub fn e2c_mask(mask: &HoleMask, face_size: usize) -> Result<CubemapSet<HoleMask>> {
    let (w, h) = mask.dims();
    MaskResampler::new(w, h, face_size)?.e2c(mask)
}

/// Precomputed nearest-pixel correspondences between a `w`×`h` panorama and its cube
/// faces, for converting many masks of one size. Same results as [`e2c_mask`] and
/// [`c2e_mask`].
#[derive(Debug, Clone)]
pub struct MaskResampler {
    w: usize,
    h: usize,
    n: usize,
    /// Pano pixel sampled by each face pixel, faces concatenated.
    face_to_pano: Vec<u32>,
    /// Face pixel (same indexing) read by each pano pixel.
    pano_to_face: Vec<u32>,
}

impl MaskResampler {
    pub fn new(w: usize, h: usize, face_size: usize) -> Result<Self> {
        check_face_size(face_size)?;
        check_pano_size(w, h)?;
        let n = face_size;
        if 6 * n * n > u32::MAX as usize || w * h > u32::MAX as usize {
            return Err(Error::ContractViolation(format!("{w}x{h} with face {n} is too large")));
        }
        let half = n as f64 / 2.0;
        let face_to_pano = CubeFace::ALL
            .par_iter()
            .flat_map_iter(|f| {
                let rot = f.rotation();
                (0..n * n).map(move |i| {
                    let (x, y) = direction_to_pixel(pixel_ray(&rot, half, n, i % n, i / n), w, h);
                    let xi = (x.round() as i64).rem_euclid(w as i64) as usize;
                    let yi = (y.round().max(0.0) as usize).min(h - 1);
                    (yi * w + xi) as u32
                })
            })
            .collect();
        let pano_to_face = (0..h)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..w).map(move |x| {
                    let (face, u, v) = nearest_face_pixel(pano_direction(x, y, w, h), n);
                    (face.index() * n * n + v * n + u) as u32
                })
            })
            .collect();
        Ok(MaskResampler {
            w,
            h,
            n,
            face_to_pano,
            pano_to_face,
        })
    }

    pub fn face_size(&self) -> usize {
        self.n
    }

    pub fn pano_dims(&self) -> (usize, usize) {
        (self.w, self.h)
    }

    pub fn e2c(&self, mask: &HoleMask) -> Result<CubemapSet<HoleMask>> {
        check_dims("mask", mask.dims(), (self.w, self.h))?;
        let src = mask.data();
        let mut all: Vec<u8> = self.face_to_pano.iter().map(|&p| src[p as usize]).collect();
        for (p, &v) in src.iter().enumerate() {
            if v == 1 {
                all[self.pano_to_face[p] as usize] = 1;
            }
        }
        let nn = self.n * self.n;
        let faces: Vec<HoleMask> = all
            .chunks_exact(nn)
            .map(|d| HoleMask::new(self.n, self.n, d.to_vec()).expect("binary by construction"))
            .collect();
        CubemapSet::new_masks(faces.try_into().expect("six faces"))
    }

    pub fn c2e(&self, cube: &CubemapSet<HoleMask>) -> Result<HoleMask> {
        if cube.face_size() != self.n {
            return Err(Error::ContractViolation(format!(
                "cube faces are {0}x{0}, resampler expects {1}x{1}",
                cube.face_size(),
                self.n
            )));
        }
        let nn = self.n * self.n;
        let out = self
            .pano_to_face
            .iter()
            .map(|&i| cube.faces()[i as usize / nn].data()[i as usize % nn])
            .collect();
        HoleMask::new(self.w, self.h, out)
    }
}

/// Like [`e2c_mask`], but a face pixel is also a hole when any pixel of its bilinear
/// footprint is, matching which face pixels of [`e2c`] carry hole colors.
pub(crate) fn e2c_mask_footprint(mask: &HoleMask, face_size: usize) -> Result<CubemapSet<HoleMask>> {
    check_face_size(face_size)?;
    let (w, h) = mask.dims();
    check_pano_size(w, h)?;
    let n = face_size;
    let half = n as f64 / 2.0;
    let mut faces: Vec<Vec<u8>> = CubeFace::ALL
        .par_iter()
        .map(|f| {
            let rot = f.rotation();
            let mut data = vec![0u8; n * n];
            for k in 0..n {
                for j in 0..n {
                    let (x, y) = direction_to_pixel(pixel_ray(&rot, half, n, j, k), w, h);
                    data[k * n + j] = footprint_has_hole(mask, x, y) as u8;
                }
            }
            data
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            if mask.is_hole(x, y) {
                let (face, u, v) = nearest_face_pixel(pano_direction(x, y, w, h), n);
                faces[face.index()][v * n + u] = 1;
            }
        }
    }
    let faces: Vec<HoleMask> = faces
        .into_iter()
        .map(|d| HoleMask::new(n, n, d).expect("binary by construction"))
        .collect();
    CubemapSet::new_masks(faces.try_into().expect("six faces"))
}

#[inline]
fn footprint_has_hole(mask: &HoleMask, x: f64, y: f64) -> bool {
    let (w, h) = mask.dims();
    let xf = x.floor();
    let x0 = (xf as i64).rem_euclid(w as i64) as usize;
    let x1 = (x0 + 1) % w;
    let yc = y.clamp(0.0, (h - 1) as f64);
    let y0 = yc.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    mask.is_hole(x0, y0) || mask.is_hole(x1, y0) || mask.is_hole(x0, y1) || mask.is_hole(x1, y1)
}

#[inline]
fn pano_direction(x: usize, y: usize, w: usize, h: usize) -> Vec3 {
    spherical_to_cartesian(pixel_to_spherical(x, y, w, h).expect("in range"))
}

pub fn c2e(cube: &CubemapSet<RgbImage>, w: usize, h: usize) -> Result<EquirectImage> {
    check_pano_size(w, h)?;
    let n = cube.face_size();
    let mut out = vec![0u8; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let (face, u, v) = face_coords(pano_direction(x, y, w, h), n);
            let px = sample_clamped_bilinear(cube.face(face), u, v);
            row[x * 3..x * 3 + 3].copy_from_slice(&px);
        }
    });
    EquirectImage::new(RgbImage::from_raw(w as u32, h as u32, out).expect("sized"))
}

pub fn c2e_mask(cube: &CubemapSet<HoleMask>, w: usize, h: usize) -> Result<HoleMask> {
    check_pano_size(w, h)?;
    let n = cube.face_size();
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, cell) in row.iter_mut().enumerate() {
            let (face, u, v) = nearest_face_pixel(pano_direction(x, y, w, h), n);
            *cell = cube.face(face).is_hole(u, v) as u8;
        }
    });
    HoleMask::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    use crate::sphere::cartesian_to_spherical;

    #[test]
    fn bases_are_proper_rotations() {
        for f in CubeFace::ALL {
            let r = f.rotation();
            assert!(r.orthonormality_error() < 1e-15, "{f:?}");
            assert_eq!(r.det(), 1.0, "{f:?}");
        }
    }

    #[test]
    fn face_centers_hit_their_own_face() {
        for f in CubeFace::ALL {
            let (hit, u, v) = face_coords(f.basis().2, 64);
            assert_eq!(hit, f);
            assert_eq!((u, v), (31.5, 31.5));
        }
    }

    #[test]
    fn ties_follow_priority() {
        // front/right edge
        assert_eq!(face_coords(Vec3::new(1.0, 0.0, -1.0), 8).0, CubeFace::Front);
        // right/back edge
        assert_eq!(face_coords(Vec3::new(-1.0, 0.0, -1.0), 8).0, CubeFace::Right);
        // back/left edge
        assert_eq!(face_coords(Vec3::new(-1.0, 0.0, 1.0), 8).0, CubeFace::Back);
        // left/up edge
        assert_eq!(face_coords(Vec3::new(0.0, 1.0, 1.0), 8).0, CubeFace::Left);
        // up/down cannot tie; corner of front, left and up
        assert_eq!(face_coords(Vec3::new(1.0, 1.0, 1.0), 8).0, CubeFace::Front);
    }

    #[test]
    fn adjacent_faces_share_edges() {
        // the right edge of front is the left edge of right
        let (_, u, _) = face_coords(Vec3::new(1.0, 0.2, -0.999_999), 100);
        assert!((u - 99.5).abs() < 1e-3);
        let (f, u, _) = face_coords(Vec3::new(0.999_999, 0.2, -1.0), 100);
        assert_eq!(f, CubeFace::Right);
        assert!((u + 0.5).abs() < 1e-3);
        // the top edge of up touches front; the bottom edge of down touches front
        let (f, _, v) = face_coords(Vec3::new(0.999_999, 1.0, 0.1), 100);
        assert_eq!(f, CubeFace::Up);
        assert!((v + 0.5).abs() < 1e-3);
        let (f, _, v) = face_coords(Vec3::new(0.999_999, -1.0, 0.1), 100);
        assert_eq!(f, CubeFace::Down);
        assert!((v - 99.5).abs() < 1e-3);
    }

    #[test]
    fn constant_panorama_round_trip_is_exact() {
        let pano = EquirectImage::filled(128, 64, [10, 200, 77]).unwrap();
        let cube = e2c(&pano, 32).unwrap();
        for (_, face) in cube.iter() {
            assert!(face.pixels().all(|p| p.0 == [10, 200, 77]));
        }
        assert_eq!(c2e(&cube, 128, 64).unwrap(), pano);
    }

    #[test]
    fn front_face_looks_at_zero_longitude() {
        // color by longitude band: red near phi = 0, blue elsewhere
        let (w, h) = (256, 128);
        let pano = EquirectImage::from_fn(w, h, |x, _| {
            let phi = TAU * (x as f64 + 0.5) / w as f64;
            let near_zero = phi < PI / 8.0 || phi > TAU - PI / 8.0;
            image::Rgb(if near_zero { [255, 0, 0] } else { [0, 0, 255] })
        })
        .unwrap();
        let cube = e2c(&pano, 64).unwrap();
        let front = cube.face(CubeFace::Front);
        assert_eq!(front.get_pixel(32, 32).0, [255, 0, 0]);
        assert_eq!(front.get_pixel(2, 32).0, [0, 0, 255]);
        let back = cube.face(CubeFace::Back);
        assert_eq!(back.get_pixel(32, 32).0, [0, 0, 255]);
        // the front face's right edge looks toward larger longitude (toward -Z)
        let ray = pixel_ray(&CubeFace::Front.rotation(), 32.0, 64, 63, 32);
        let s = cartesian_to_spherical(ray).unwrap();
        assert!(s.phi > 0.7 && s.phi < 0.8);
    }

    #[test]
    fn up_face_holds_bottom_cap() {
        let (w, h) = (128, 64);
        let pano = EquirectImage::from_fn(w, h, |_, y| {
            image::Rgb(if y >= h as u32 - 8 { [0, 255, 0] } else { [0, 0, 0] })
        })
        .unwrap();
        let cube = e2c(&pano, 32).unwrap();
        assert_eq!(cube.face(CubeFace::Up).get_pixel(16, 16).0, [0, 255, 0]);
        assert_eq!(cube.face(CubeFace::Down).get_pixel(16, 16).0, [0, 0, 0]);
    }

    #[test]
    fn mask_faces_are_binary_and_keep_holes() {
        let (w, h) = (256, 128);
        let mask = HoleMask::from_fn(w, h, |x, y| (x / 5 + y / 7) % 4 == 0 || (x == 3 && y == 1));
        let cube = e2c_mask(&mask, 64).unwrap();
        for (_, f) in cube.iter() {
            assert!(f.data().iter().all(|v| *v <= 1));
        }
        let back = c2e_mask(&cube, w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                if mask.is_hole(x, y) {
                    assert!(back.is_hole(x, y), "lost hole at ({x}, {y})");
                }
            }
        }
    }

    #[test]
    fn resampler_agrees_with_direct_conversion() {
        let (w, h) = (128, 64);
        let mask = HoleMask::from_fn(w, h, |x, y| (x * 7 + y * 3) % 11 == 0);
        let r = MaskResampler::new(w, h, 24).unwrap();
        let cube = r.e2c(&mask).unwrap();
        assert_eq!(r.c2e(&cube).unwrap(), c2e_mask(&cube, w, h).unwrap());
        let wide = e2c_mask_footprint(&mask, 24).unwrap();
        for ((_, a), (_, b)) in cube.iter().zip(wide.iter()) {
            assert!(a.data().iter().zip(b.data()).all(|(a, b)| a <= b));
        }
        assert!(r.e2c(&HoleMask::zeros(64, 32)).is_err());
    }

    #[test]
    fn empty_and_full_masks() {
        let cube = e2c_mask(&HoleMask::zeros(64, 32), 16).unwrap();
        assert!(cube.iter().all(|(_, f)| f.hole_count() == 0));
        let cube = e2c_mask(&HoleMask::ones(64, 32), 16).unwrap();
        assert!(cube.iter().all(|(_, f)| f.hole_count() == 16 * 16));
    }

    #[test]
    fn validation() {
        let pano = EquirectImage::filled(64, 32, [0; 3]).unwrap();
        assert!(e2c(&pano, 0).is_err());
        let cube = e2c(&pano, 8).unwrap();
        assert!(c2e(&cube, 100, 30).is_err());
        let mut faces = cube.into_faces();
        faces[3] = RgbImage::new(8, 9);
        assert!(CubemapSet::new(faces).is_err());
    }
}
