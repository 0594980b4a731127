mod common;

use common::{oracle_warp, Room, Scene};
use image::RgbImage;
use panowarp_core::cubemap::{c2e_mask, e2c_mask, face_coords, CubeFace};
use panowarp_core::inpaint::{inpaint, Backend, InpaintContext, InpaintRequest, InpaintTarget};
use panowarp_core::warp::{cvs_warp, HOLE_VALUE};
use panowarp_core::{CameraPose, DepthMap, EquirectImage, HoleMask, Vec3};
use proptest::prelude::*;

fn pose_strategy() -> impl Strategy<Value = CameraPose> {
    (-0.4..0.4f64, -0.4..0.4f64, -0.4..0.4f64).prop_map(|(x, y, z)| CameraPose::new(x, y, z).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn warp_outputs_are_consistent_and_match_the_oracle(
        pose in pose_strategy(),
        seed in 0u64..1000,
        half in (1.2..3.0f64, 1.0..2.0f64, 1.2..3.0f64),
    ) {
        let scene = Scene::new(Room::Box { half: [half.0, half.1, half.2] }, vec![(Vec3::new(0.6, 0.1, -0.5), 0.25)], seed);
        let (img, depth) = scene.render(96, 48, CameraPose::ORIGIN);
        let r = cvs_warp(&img, &depth, pose).unwrap();
        for (i, m) in r.mask.data().iter().enumerate() {
            let (x, y) = (i % 96, i / 96);
            let d = r.depth.get(x, y);
            prop_assert_eq!(*m == 1, d == 0.0);
            if *m == 1 {
                prop_assert_eq!(r.image.pixel(x, y), [HOLE_VALUE; 3]);
            }
        }
        prop_assert_eq!(&r, &oracle_warp(&img, &depth, pose));
        prop_assert_eq!(&r, &cvs_warp(&img, &depth, pose).unwrap());
    }

    #[test]
    fn random_depth_identity_is_exact(seed in 0u64..10_000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let img = EquirectImage::from_fn(64, 32, |_, _| image::Rgb(rng.random())).unwrap();
        let depth = DepthMap::from_fn(64, 32, |_, _| rng.random_range(0.1f32..50.0)).unwrap();
        let r = cvs_warp(&img, &depth, CameraPose::ORIGIN).unwrap();
        prop_assert_eq!(r.image, img);
        prop_assert_eq!(r.mask.hole_count(), 0);
    }

    #[test]
    fn mask_round_trip_is_binary_and_keeps_holes(bits in prop::collection::vec(0u8..8, 64 * 32), n in 4usize..40) {
        let mask = HoleMask::new(64, 32, bits.iter().map(|b| (*b == 0) as u8).collect()).unwrap();
        let cube = e2c_mask(&mask, n).unwrap();
        for (_, f) in cube.iter() {
            prop_assert!(f.data().iter().all(|v| *v <= 1));
        }
        let back = c2e_mask(&cube, 64, 32).unwrap();
        prop_assert!(mask.data().iter().zip(back.data()).all(|(a, b)| a <= b));
    }

    #[test]
    fn every_direction_has_one_dominant_face(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
        let v = Vec3::new(x, y, z);
        prop_assume!(v.norm() > 1e-6);
        let (face, _, _) = face_coords(v, 16);
        let best = CubeFace::ALL.iter().map(|f| v.dot(f.basis().2)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(v.dot(face.basis().2), best);
        let first = CubeFace::ALL.into_iter().find(|f| v.dot(f.basis().2) == best).unwrap();
        prop_assert_eq!(face, first);
    }

    #[test]
    fn built_in_backends_keep_known_pixels(
        w in 2u32..40,
        h in 2u32..40,
        seed in 0u64..1000,
        density in 0.05..0.95f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let image = RgbImage::from_fn(w, h, |_, _| image::Rgb(rng.random()));
        let mut mask = HoleMask::from_fn(w as usize, h as usize, |_, _| rng.random_bool(density));
        if mask.hole_count() == mask.data().len() {
            mask = HoleMask::from_fn(w as usize, h as usize, |x, y| x + y > 0);
        }
        let req = InpaintRequest { image: image.clone(), mask: mask.clone() };
        let ctx = InpaintContext { pose: CameraPose::ORIGIN, target: InpaintTarget::Image };
        for backend in [Backend::Constant, Backend::PullPush] {
            let out = inpaint(&req, &backend, &ctx).unwrap();
            for (i, (a, b)) in image.pixels().zip(out.pixels()).enumerate() {
                if mask.data()[i] == 0 {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
