mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scatterstereo::grid::{Grid, Mask, MaskIndex};
use scatterstereo::kernel::SparseKernel;
use scatterstereo::pipeline::mean_angular_error;
use scatterstereo::reconstruct::{
    components, integrate_normals, median_filter_masked, remove_backscatter, remove_forward_scatter, shading_weight,
    solve_normals, subtract_backscatter,
};
use scatterstereo::render::render_stack;
use scatterstereo::scene::{
    geometry_at_point, make_sphere_scene, normals_from_depth, ring_lights, Camera, ImageStack, LightSource, Medium,
    Scene, Vec3,
};
use scatterstereo::solver::{dense_solve, BiCgStabParams};
use scatterstereo::Error;

use common::tables;

fn sphere(size: usize) -> (Camera, Scene) {
    let camera = Camera::centered(size, size, size as f64 * 2.6).unwrap();
    let scene = make_sphere_scene(&camera, Vec3::new(0.0, 0.0, 400.0), 60.0, 0.8).unwrap();
    (camera, scene)
}

fn lights() -> Vec<LightSource> {
    ring_lights(8, 100.0, 1e6).unwrap()
}

/// Reflected radiance under the linearized shading model.
fn linear_model_stack(scene: &Scene, camera: &Camera, medium: &Medium, lights: &[LightSource]) -> ImageStack {
    let g = &tables().g;
    let images = lights
        .iter()
        .map(|light| {
            Grid::from_fn(camera.width, camera.height, |x, y| {
                if !*scene.mask.get(x, y) {
                    return 0.0;
                }
                let p = scene.point(camera, x, y);
                let geom = geometry_at_point(&p, light, medium);
                let w = shading_weight(geom.t_sp, geom.d_sp, medium, g);
                scene.albedo.get(x, y) * light.intensity * w * scene.normals.get(x, y).dot(&geom.l_sp).max(0.0)
            })
        })
        .collect();
    ImageStack::new(images, lights.to_vec(), scene.mask.clone()).unwrap()
}

#[test]
fn self_subtraction_is_zero_and_misalignment_is_rejected() {
    let (camera, scene) = sphere(16);
    let m = Medium::new(0.0, 5e-3).unwrap();
    let out = render_stack(&scene, &lights(), &m, &camera, tables(), 1200.0, None).unwrap();
    let zero = remove_backscatter(&out.observed, &out.observed).unwrap();
    assert!(zero.images.iter().all(|g| g.as_slice().iter().all(|&v| v == 0.0)));

    let fewer = ImageStack::new(
        out.no_object.images[..7].to_vec(),
        out.no_object.lights[..7].to_vec(),
        scene.mask.clone(),
    )
    .unwrap();
    assert!(matches!(subtract_backscatter(&out.observed, &fewer), Err(Error::Dimension(_))));
    let mut other_mask = scene.mask.clone();
    other_mask.set(0, 0, !*other_mask.get(0, 0));
    let shifted = ImageStack::new(out.no_object.images.clone(), out.no_object.lights.clone(), other_mask).unwrap();
    assert!(matches!(subtract_backscatter(&out.observed, &shifted), Err(Error::Dimension(_))));
}

#[test]
fn subtraction_leaves_signal_plus_the_far_plane_residual() {
    let (camera, scene) = sphere(20);
    let m = Medium::new(0.0, 5e-3).unwrap();
    let out = render_stack(&scene, &lights(), &m, &camera, tables(), 1200.0, None).unwrap();
    let diff = subtract_backscatter(&out.observed, &out.no_object).unwrap();
    for (k, comp) in out.components.iter().enumerate() {
        for y in 0..20 {
            for x in 0..20 {
                let got = *diff.images[k].get(x, y);
                if !*scene.mask.get(x, y) {
                    assert_eq!(got, 0.0);
                    continue;
                }
                // Backscatter behind the object is in the reference but not in the observation.
                let residual = comp.backscatter.get(x, y) - out.no_object.images[k].get(x, y);
                assert!(residual < 0.0);
                let want = (comp.attenuated.get(x, y) + comp.forward.get(x, y) + residual).max(0.0);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-12), "({x}, {y})");
            }
        }
    }
}

#[test]
fn median_filter_basics() {
    let mask = Grid::from_fn(9, 7, |x, y| (x, y) != (0, 0));
    let constant = Grid::from_fn(9, 7, |x, y| if *mask.get(x, y) { 2.5 } else { 0.0 });
    assert_eq!(median_filter_masked(&constant, &mask), constant);

    let mut spike = constant.clone();
    spike.set(4, 3, 100.0);
    assert_eq!(median_filter_masked(&spike, &mask), constant);

    // A straight step edge is a fixed point.
    let step = Grid::from_fn(9, 7, |x, y| if !*mask.get(x, y) { 0.0 } else if x < 4 { 1.0 } else { 0.0 });
    assert_eq!(median_filter_masked(&step, &mask), step);
}

#[test]
fn median_filter_is_not_idempotent_on_binary_stripes() {
    // One-pixel stripes flip on every pass: a 3x3 window over alternating
    // columns holds six of the opposite value in the interior.
    let mask = Grid::filled(8, 8, true);
    let stripes = Grid::from_fn(8, 8, |x, _| (x % 2) as f64);
    let once = median_filter_masked(&stripes, &mask);
    let twice = median_filter_masked(&once, &mask);
    assert_ne!(once, twice);
    assert_eq!(*once.get(3, 3), 0.0);
    assert_eq!(*once.get(4, 3), 1.0);
    // Output values stay binary.
    for img in [&once, &twice] {
        assert!(img.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

#[test]
fn forward_scatter_removal_without_scattering_undoes_attenuation() {
    let (camera, scene) = sphere(16);
    let m = Medium::new(3e-3, 0.0).unwrap();
    let kernel = SparseKernel::build(&scene, &camera, &m, &tables().f, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let lp = Grid::from_fn(16, 16, |x, y| if *scene.mask.get(x, y) { rng.gen_range(0.1..1.0) } else { 0.0 });
    let stack = ImageStack::new(vec![lp.clone()], lights()[..1].to_vec(), scene.mask.clone()).unwrap();
    let out = remove_forward_scatter(&stack, &kernel, &BiCgStabParams::default()).unwrap();
    for y in 0..16 {
        for x in 0..16 {
            if *scene.mask.get(x, y) {
                let want = lp.get(x, y) * (3e-3 * scene.point(&camera, x, y).norm()).exp();
                assert!((out.reflected.images[0].get(x, y) - want).abs() <= 1e-7 * want);
            }
        }
    }
    assert_eq!(out.corrections, vec![0.0]);
}

#[test]
fn forward_scatter_removal_matches_the_direct_solve() {
    let (camera, scene) = sphere(20);
    let m = Medium::new(0.0, 5e-3).unwrap();
    let kernel = SparseKernel::build(&scene, &camera, &m, &tables().f, 39).unwrap();
    let out = render_stack(&scene, &lights()[..2], &m, &camera, tables(), 1200.0, None).unwrap();
    let lp: Vec<Grid<f64>> = out
        .components
        .iter()
        .map(|c| Grid::from_fn(20, 20, |x, y| c.attenuated.get(x, y) + c.forward.get(x, y)))
        .collect();
    let stack = ImageStack::new(lp.clone(), lights()[..2].to_vec(), scene.mask.clone()).unwrap();
    let params = BiCgStabParams {
        tolerance: 1e-10,
        max_iterations: 2000,
    };
    let removal = remove_forward_scatter(&stack, &kernel, &params).unwrap();
    let index = MaskIndex::new(&scene.mask);
    let dense = kernel.augmented_dense().unwrap();
    for k in 0..2 {
        let mut rhs = index.gather(&lp[k]);
        rhs.push(0.0);
        let direct = dense_solve(&dense, &rhs).unwrap();
        let got = index.gather(&removal.reflected.images[k]);
        assert!(common::rel_l2(&got, &direct[..index.len()]) < 1e-6);
        assert!((removal.corrections[k] - direct[index.len()]).abs() <= 1e-6 * direct[index.len()].abs());
        assert!(removal.reports[k].converged);
    }

    let wrong = Grid::filled(20, 20, true);
    let bad = ImageStack::new(lp, lights()[..2].to_vec(), wrong).unwrap();
    assert!(matches!(remove_forward_scatter(&bad, &kernel, &params), Err(Error::Dimension(_))));
}

#[test]
fn vacuum_photometric_stereo_is_exact() {
    let (camera, scene) = sphere(32);
    let out = render_stack(&scene, &lights(), &Medium::vacuum(), &camera, tables(), 1200.0, None).unwrap();
    let flat = scene.mask.map(|&m| if m { Vec3::new(0.0, 0.0, -1.0) } else { Vec3::zeros() });
    let res = solve_normals(&out.observed, &scene.depth, &camera, &Medium::vacuum(), &tables().g, &flat).unwrap();
    let err = mean_angular_error(&res.normals, &scene.normals, &scene.mask).unwrap();
    assert!(err < 0.5, "{err}");
    assert!(err < 1e-6, "{err}");
}

#[test]
fn linearized_model_is_inverted_exactly_and_scales_homogeneously() {
    let (camera, scene) = sphere(32);
    let m = Medium::new(1e-3, 4e-3).unwrap();
    let stack = linear_model_stack(&scene, &camera, &m, &lights());
    let flat = scene.mask.map(|&v| if v { Vec3::new(0.0, 0.0, -1.0) } else { Vec3::zeros() });
    let res = solve_normals(&stack, &scene.depth, &camera, &m, &tables().g, &flat).unwrap();
    for (x, y) in MaskIndex::new(&scene.mask).pixels().iter().copied() {
        if *res.flagged.get(x, y) {
            continue;
        }
        let gap = scatterstereo::scene::angle_between(res.normals.get(x, y), scene.normals.get(x, y));
        assert!(gap.to_degrees() < 1e-6, "({x}, {y}) off by {} deg", gap.to_degrees());
        assert!((res.albedo.get(x, y) - 0.8).abs() < 1e-9);
    }
    assert!(res.flagged_count() < scene.mask.count() / 20);

    let scaled = ImageStack::new(
        stack.images.iter().map(|g| g.map(|v| v * 3.0)).collect(),
        stack.lights.clone(),
        stack.mask.clone(),
    )
    .unwrap();
    let res3 = solve_normals(&scaled, &scene.depth, &camera, &m, &tables().g, &flat).unwrap();
    for (x, y) in MaskIndex::new(&scene.mask).pixels().iter().copied() {
        assert!((res3.normals.get(x, y) - res.normals.get(x, y)).norm() < 1e-12);
        assert!((res3.albedo.get(x, y) - 3.0 * res.albedo.get(x, y)).abs() < 1e-9);
    }
}

#[test]
fn normals_face_the_camera_or_are_flagged() {
    let (camera, scene) = sphere(24);
    let m = Medium::new(0.0, 5e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let images = (0..8)
        .map(|_| Grid::from_fn(24, 24, |x, y| if *scene.mask.get(x, y) { rng.gen_range(0.0..1e-3) } else { 0.0 }))
        .collect();
    let stack = ImageStack::new(images, lights(), scene.mask.clone()).unwrap();
    let prev = scene.normals.clone();
    let res = solve_normals(&stack, &scene.depth, &camera, &m, &tables().g, &prev).unwrap();
    for (x, y) in MaskIndex::new(&scene.mask).pixels().iter().copied() {
        let n = res.normals.get(x, y);
        if *res.flagged.get(x, y) {
            assert_eq!(n, prev.get(x, y));
        } else {
            assert!((n.norm() - 1.0).abs() < 1e-6);
            assert!(n.dot(&scene.point(&camera, x, y)) < 0.0);
            assert!(*res.albedo.get(x, y) >= 0.0);
        }
    }
}

#[test]
fn fewer_than_three_lights_flags_every_pixel() {
    let (camera, scene) = sphere(16);
    let m = Medium::vacuum();
    let two = &lights()[..2];
    let out = render_stack(&scene, two, &m, &camera, tables(), 1200.0, None).unwrap();
    let prev = scene.mask.map(|&v| if v { Vec3::new(0.0, 0.0, -1.0) } else { Vec3::zeros() });
    let res = solve_normals(&out.observed, &scene.depth, &camera, &m, &tables().g, &prev).unwrap();
    assert_eq!(res.flagged, scene.mask);
    assert_eq!(res.normals, prev);
    assert!(matches!(
        solve_normals(&out.observed, &Grid::filled(3, 3, 1.0), &camera, &m, &tables().g, &prev),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn flat_normals_integrate_to_a_plane_per_component() {
    let camera = Camera::centered(20, 12, 50.0).unwrap();
    let mask: Mask = Grid::from_fn(20, 12, |x, y| (2..8).contains(&x) && (2..10).contains(&y) || (12..18).contains(&x) && (3..6).contains(&y));
    assert_eq!(components(&mask).len(), 2);
    let normals = mask.map(|&m| if m { Vec3::new(0.0, 0.0, -1.0) } else { Vec3::zeros() });
    let depth = integrate_normals(&normals, &mask, &camera, 250.0).unwrap();
    for y in 0..12 {
        for x in 0..20 {
            let d = *depth.get(x, y);
            if *mask.get(x, y) {
                assert!((d - 250.0).abs() < 1e-6, "({x}, {y}) {d}");
            } else {
                assert_eq!(d, 0.0);
            }
        }
    }
    let mut bent = normals.clone();
    bent.set(3, 3, Vec3::new(0.0, 0.0, -2.0));
    assert!(matches!(integrate_normals(&bent, &mask, &camera, 250.0), Err(Error::InvalidParameter(_))));
    assert!(integrate_normals(&normals, &mask, &camera, 0.0).is_err());
}

#[test]
fn sphere_normals_integrate_to_the_sphere() {
    let (camera, scene) = sphere(64);
    let index = MaskIndex::new(&scene.mask);
    let anchor = index.gather(&scene.depth).iter().sum::<f64>() / index.len() as f64;
    let depth = integrate_normals(&scene.normals, &scene.mask, &camera, anchor).unwrap();
    let got = index.gather(&depth);
    let want = index.gather(&scene.depth);
    assert!(common::rel_l2(&got, &want) < 0.01);

    let back = normals_from_depth(&depth, &scene.mask, &camera);
    let interior = Grid::from_fn(64, 64, |x, y| {
        *scene.mask.get(x, y)
            && (x.saturating_sub(1)..=(x + 1).min(63))
                .all(|qx| (y.saturating_sub(1)..=(y + 1).min(63)).all(|qy| *scene.mask.get(qx, qy)))
    });
    let gap = mean_angular_error(&back.normals, &scene.normals, &interior).unwrap();
    assert!(gap < 1.0, "{gap}");
}
