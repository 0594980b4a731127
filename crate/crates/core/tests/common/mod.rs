//! Analytic scenes and brute-force references shared by the integration tests.
#![allow(dead_code)]

use image::{Rgb, RgbImage};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use panowarp_core::cubemap::CubeFace;
use panowarp_core::inpaint::{InpaintContext, InpaintRequest, InpaintTarget, Inpainter};
use panowarp_core::pinhole::pixel_ray;
use panowarp_core::sphere::{cartesian_to_spherical, lift_to_3d, pixel_to_spherical, spherical_to_pixel};
use panowarp_core::warp::{WarpResult, HOLE_VALUE};
use panowarp_core::{CameraPose, DepthMap, EquirectImage, HoleMask, Result, Vec3};

#[derive(Debug, Clone, Copy)]
pub enum Room {
    Sphere { radius: f64 },
    /// Axis-aligned box centered at the origin.
    Box { half: [f64; 3] },
}

/// A closed room with optional spherical objects, textured by smooth sinusoids of the hit
/// point so every surface point has a well-defined color.
#[derive(Debug, Clone)]
pub struct Scene {
    pub room: Room,
    pub objects: Vec<(Vec3, f64)>,
    waves: [(Vec3, f64); 3],
}

impl Scene {
    pub fn new(room: Room, objects: Vec<(Vec3, f64)>, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut wave = || {
            let f = Vec3::new(
                rng.random_range(-2.5..2.5),
                rng.random_range(-2.5..2.5),
                rng.random_range(-2.5..2.5),
            );
            (f, rng.random_range(0.0..std::f64::consts::TAU))
        };
        let waves = [wave(), wave(), wave()];
        Scene { room, objects, waves }
    }

    /// The constant-depth room used throughout: radius 2 m around the origin.
    pub fn sphere_room() -> Self {
        Scene::new(Room::Sphere { radius: 2.0 }, vec![], 7)
    }

    pub fn color_at(&self, p: Vec3) -> [u8; 3] {
        self.waves.map(|(f, phase)| (128.0 + 100.0 * (f.dot(p) + phase).sin()).round() as u8)
    }

    /// Distance along the unit ray `dir` from `origin` to the first surface.
    pub fn hit(&self, origin: Vec3, dir: Vec3) -> f64 {
        let mut t = match self.room {
            Room::Sphere { radius } => {
                let b = origin.dot(dir);
                -b + (b * b - origin.dot(origin) + radius * radius).sqrt()
            }
            Room::Box { half } => {
                let o = origin.to_array();
                let d = dir.to_array();
                (0..3)
                    .filter(|&i| d[i] != 0.0)
                    .map(|i| (half[i].copysign(d[i]) - o[i]) / d[i])
                    .fold(f64::INFINITY, f64::min)
            }
        };
        for (c, r) in &self.objects {
            let oc = origin - *c;
            let b = oc.dot(dir);
            let disc = b * b - oc.dot(oc) + r * r;
            if disc >= 0.0 {
                let t0 = -b - disc.sqrt();
                if t0 > 1e-9 && t0 < t {
                    t = t0;
                }
            }
        }
        t
    }

    pub fn shade(&self, origin: Vec3, dir: Vec3) -> ([u8; 3], f64) {
        let t = self.hit(origin, dir);
        (self.color_at(origin + dir.scale(t)), t)
    }

    /// Ground-truth panorama and depth seen from `pose`.
    pub fn render(&self, w: usize, h: usize, pose: CameraPose) -> (EquirectImage, DepthMap) {
        let mut img = RgbImage::new(w as u32, h as u32);
        let mut depth = vec![0f32; w * h];
        let o = pose.as_vec();
        for y in 0..h {
            for x in 0..w {
                let dir = lift_to_3d(pixel_to_spherical(x, y, w, h).unwrap(), 1.0).unwrap();
                let (c, t) = self.shade(o, dir);
                img.put_pixel(x as u32, y as u32, Rgb(c));
                depth[y * w + x] = t as f32;
            }
        }
        (EquirectImage::new(img).unwrap(), DepthMap::new(w, h, depth).unwrap())
    }

    /// Ground-truth cube face seen from `pose`.
    pub fn render_face(&self, face: CubeFace, n: usize, pose: CameraPose) -> RgbImage {
        let rot = face.rotation();
        let o = pose.as_vec();
        RgbImage::from_fn(n as u32, n as u32, |j, k| {
            let ray = pixel_ray(&rot, n as f64 / 2.0, n, j as usize, k as usize).normalized();
            Rgb(self.shade(o, ray).0)
        })
    }
}

/// Ten scenes with varied geometry, textures and target poses.
pub fn oracle_scenes() -> Vec<(Scene, CameraPose)> {
    let p = |x, y, z| CameraPose::new(x, y, z).unwrap();
    let v = Vec3::new;
    vec![
        (Scene::sphere_room(), p(0.02, 0.0, 0.0)),
        (Scene::new(Room::Sphere { radius: 2.0 }, vec![], 1), p(0.0, 0.0, -0.08)),
        (Scene::new(Room::Sphere { radius: 3.0 }, vec![], 2), p(-0.05, 0.03, 0.1)),
        (Scene::new(Room::Box { half: [2.0, 1.4, 2.5] }, vec![], 3), p(0.1, 0.0, 0.0)),
        (Scene::new(Room::Box { half: [3.0, 1.5, 2.0] }, vec![], 4), p(0.0, -0.2, 0.15)),
        (Scene::new(Room::Sphere { radius: 2.5 }, vec![(v(1.2, 0.0, 0.0), 0.3)], 5), p(0.0, 0.0, 0.2)),
        (
            Scene::new(Room::Box { half: [2.5, 1.5, 2.5] }, vec![(v(-1.0, -0.5, 1.0), 0.4), (v(0.8, 0.3, -1.2), 0.25)], 6),
            p(0.15, 0.05, -0.1),
        ),
        (Scene::new(Room::Sphere { radius: 1.5 }, vec![(v(0.0, 0.9, 0.0), 0.2)], 8), p(0.33, 0.0, 0.0)),
        (Scene::new(Room::Box { half: [1.8, 1.2, 1.8] }, vec![(v(0.0, 0.0, -1.0), 0.35)], 9), p(-0.04, 0.0, 0.04)),
        (
            Scene::new(Room::Sphere { radius: 4.0 }, vec![(v(1.5, 0.2, 1.5), 0.5), (v(-2.0, -0.4, 0.3), 0.6)], 10),
            p(0.3, -0.1, 0.3),
        ),
    ]
}

/// Scalar forward warp written directly from the lifting / translation / reprojection
/// equations: keep, per target pixel, the closest splat (ties: lowest source index).
pub fn oracle_warp(src: &EquirectImage, depth: &DepthMap, pose: CameraPose) -> WarpResult {
    let (w, h) = src.dims();
    let mut best: Vec<Option<(f32, usize)>> = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let s = pixel_to_spherical(x, y, w, h).unwrap();
            let c = lift_to_3d(s, depth.get(x, y) as f64).unwrap();
            let rel = c - pose.as_vec();
            let dn = rel.norm();
            let sn = cartesian_to_spherical(rel.scale(1.0 / dn)).unwrap();
            let (xn, yn) = spherical_to_pixel(sn, w, h);
            let tx = (xn.round() as i64).rem_euclid(w as i64) as usize;
            let ty = (yn.round() as i64).clamp(0, h as i64 - 1) as usize;
            let t = ty * w + tx;
            let cand = (dn as f32, y * w + x);
            // visiting sources in index order makes "strictly closer" the tie rule
            if best[t].is_none_or(|b| cand.0 < b.0) {
                best[t] = Some(cand);
            }
        }
    }
    let mut img = RgbImage::new(w as u32, h as u32);
    let mut d = vec![0f32; w * h];
    let mut m = vec![0u8; w * h];
    for (t, b) in best.iter().enumerate() {
        let (tx, ty) = ((t % w) as u32, (t / w) as u32);
        match b {
            Some((dn, s)) => {
                img.put_pixel(tx, ty, Rgb(src.pixel(s % w, s / w)));
                d[t] = *dn;
            }
            None => {
                img.put_pixel(tx, ty, Rgb([HOLE_VALUE; 3]));
                m[t] = 1;
            }
        }
    }
    WarpResult {
        image: EquirectImage::new(img).unwrap(),
        depth: DepthMap::new(w, h, d).unwrap(),
        mask: HoleMask::new(w, h, m).unwrap(),
    }
}

/// Fills holes from the analytic scene rendered at the request's pose.
pub struct OracleInpainter {
    pub scene: Scene,
}

impl Inpainter for OracleInpainter {
    fn fill(&self, req: &InpaintRequest, ctx: &InpaintContext) -> Result<RgbImage> {
        let (w, h) = (req.image.width() as usize, req.image.height() as usize);
        Ok(match ctx.target {
            InpaintTarget::Face { face } => self.scene.render_face(face, w, ctx.pose),
            InpaintTarget::Panorama | InpaintTarget::Image => self.scene.render(w, h, ctx.pose).0.into_rgb(),
        })
    }

    fn needs_known_pixels(&self) -> bool {
        false
    }
}

/// Smooth low-frequency panorama defined on the sphere (no seam, no pole singularity).
pub fn smooth_panorama(w: usize, h: usize, seed: u64) -> EquirectImage {
    let mut rng = StdRng::seed_from_u64(seed);
    let waves: Vec<(Vec3, f64)> = (0..3)
        .map(|_| {
            let f = Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            (f, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    EquirectImage::from_fn(w, h, |x, y| {
        let u = lift_to_3d(pixel_to_spherical(x as usize, y as usize, w, h).unwrap(), 1.0).unwrap();
        Rgb([0, 1, 2].map(|c| {
            let (f, ph) = waves[c];
            (128.0 + 90.0 * (f.dot(u) + ph).sin()).round() as u8
        }))
    })
    .unwrap()
}

pub fn mean_abs_error(a: &RgbImage, b: &RgbImage) -> f64 {
    assert_eq!(a.dimensions(), b.dimensions());
    let sum: u64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(x, y)| (*x as i32 - *y as i32).unsigned_abs() as u64)
        .sum();
    sum as f64 / a.as_raw().len() as f64
}

pub fn psnr(a: &RgbImage, b: &RgbImage) -> f64 {
    assert_eq!(a.dimensions(), b.dimensions());
    let mse: f64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        / a.as_raw().len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// Writes an executable shell script and returns its path.
pub fn script(dir: &std::path::Path, name: &str, body: &str) -> std::path::PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

/// Scene frame to export frame, written out from the front camera's axes
/// (right = -Z, down = +Y, forward = +X).
pub fn export_from_scene(v: Vec3) -> Vec3 {
    Vec3::new(-v.z, v.y, v.x)
}

pub fn scene_from_export(v: Vec3) -> Vec3 {
    Vec3::new(v.z, v.y, -v.x)
}

/// Plain COLMAP projection: quaternion (w, x, y, z) and translation map world to camera,
/// then PINHOLE `fx, fy, cx, cy`.
pub fn colmap_project(q: [f64; 4], t: [f64; 3], params: &[f64], p: [f64; 3]) -> Option<[f64; 2]> {
    let [w, x, y, z] = q;
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let c: Vec<f64> = (0..3).map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i]).collect();
    if c[2] <= 0.0 {
        return None;
    }
    Some([params[0] * c[0] / c[2] + params[2], params[1] * c[1] / c[2] + params[3]])
}

/// Center of the view pixel whose ray points closest to `p`, by exhaustive search.
pub fn brute_force_pixel(cam: &panowarp_core::mvp::PerspectiveCamera, p: Vec3) -> [f64; 2] {
    let d = (p - cam.center.as_vec()).normalized();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for k in 0..cam.size {
        for j in 0..cam.size {
            let c = pixel_ray(&cam.rotation, cam.focal(), cam.size, j, k).normalized().dot(d);
            if c > best.0 {
                best = (c, j, k);
            }
        }
    }
    [best.1 as f64 + 0.5, best.2 as f64 + 0.5]
}

/// Reprojection error of every observation of a read-back model against the scene: each
/// 3D point is projected through its exported pose and compared with the view pixel that
/// actually looks at it.
pub fn reprojection_errors(
    model: &panowarp_core::mvp::SparseModel,
    cameras: &std::collections::HashMap<String, panowarp_core::mvp::PerspectiveCamera>,
    max_obs: usize,
) -> Vec<f64> {
    let mut errs = Vec::new();
    for pt in model.points.iter().step_by((model.points.len() / max_obs.max(1)).max(1)) {
        let scene_p = scene_from_export(Vec3::from(pt.xyz));
        for (image_id, _) in &pt.track {
            let img = model.images.iter().find(|i| i.id == *image_id).unwrap();
            let cam = model.cameras.iter().find(|c| c.id == img.camera_id).unwrap();
            let got = colmap_project(img.qvec, img.tvec, &cam.params, pt.xyz).unwrap();
            let want = brute_force_pixel(&cameras[&img.name], scene_p);
            errs.push(((got[0] - want[0]).powi(2) + (got[1] - want[1]).powi(2)).sqrt());
        }
    }
    errs
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}
