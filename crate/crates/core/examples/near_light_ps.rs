//! Near-light photometric stereo on a sphere rendered without scattering: the
//! normals come back exactly once the per-pixel light directions are used.

use scatterstereo::pipeline::mean_angular_error;
use scatterstereo::reconstruct::solve_normals;
use scatterstereo::render::render_stack;
use scatterstereo::scene::{make_sphere_scene, ring_lights, Camera, Medium, Vec3};
use scatterstereo::tables::Tables;

fn main() -> scatterstereo::Result<()> {
    let camera = Camera::centered(64, 64, 165.0)?;
    let scene = make_sphere_scene(&camera, Vec3::new(0.0, 0.0, 400.0), 60.0, 0.6)?;
    let tables = Tables::build_default()?;
    let flat = scene.mask.map(|&m| if m { Vec3::new(0.0, 0.0, -1.0) } else { Vec3::zeros() });
    for medium in [Medium::vacuum(), Medium::new(2e-3, 0.0)?] {
        let rendered = render_stack(&scene, &ring_lights(8, 100.0, 1e6)?, &medium, &camera, &tables, 1200.0, None)?;
        // Surface radiance before camera-side attenuation.
        let reflected = rendered.components.iter().map(|c| c.reflected.clone()).collect();
        let stack = scatterstereo::scene::ImageStack::new(reflected, rendered.observed.lights.clone(), scene.mask.clone())?;
        let res = solve_normals(&stack, &scene.depth, &camera, &medium, &tables.g, &flat)?;
        let err = mean_angular_error(&res.normals, &scene.normals, &scene.mask)?;
        let albedo = res.albedo.as_slice().iter().zip(scene.mask.as_slice()).filter(|(_, &m)| m).map(|(a, _)| *a);
        let (sum, n) = albedo.fold((0.0, 0), |(s, n), a| (s + a, n + 1));
        println!(
            "absorption {:.0e}: mean error {err:.2e} deg, mean albedo {:.6}, flagged {}",
            medium.absorption(),
            sum / n as f64,
            res.flagged_count()
        );
    }
    Ok(())
}
