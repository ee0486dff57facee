//! Integrates a sphere's analytic normal field into depth and compares the
//! result with the ray-traced depth map.

use scatterstereo::grid::MaskIndex;
use scatterstereo::pipeline::mean_angular_error;
use scatterstereo::reconstruct::integrate_normals;
use scatterstereo::scene::{make_sphere_scene, normals_from_depth, Camera, Vec3};

fn main() -> scatterstereo::Result<()> {
    let camera = Camera::centered(96, 96, 250.0)?;
    let scene = make_sphere_scene(&camera, Vec3::new(0.0, 0.0, 400.0), 60.0, 1.0)?;
    let index = MaskIndex::new(&scene.mask);
    let truth = index.gather(&scene.depth);
    let anchor = truth.iter().sum::<f64>() / truth.len() as f64;
    let depth = integrate_normals(&scene.normals, &scene.mask, &camera, anchor)?;
    let got = index.gather(&depth);
    let rms = (got.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / got.len() as f64).sqrt();
    let worst = got.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("depth rms {rms:.4} mm, worst {worst:.4} mm over {} pixels", got.len());
    let back = normals_from_depth(&depth, &scene.mask, &camera);
    println!(
        "normals from integrated depth: mean error {:.3} deg",
        mean_angular_error(&back.normals, &scene.normals, &back.valid)?
    );
    Ok(())
}
