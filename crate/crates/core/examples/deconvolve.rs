//! Forward-scatter removal on a rendered sphere with the true shape: blur with
//! the dense model, then undo it with the sparse kernel and BiCGStab.

use scatterstereo::grid::{Grid, MaskIndex};
use scatterstereo::kernel::SparseKernel;
use scatterstereo::reconstruct::remove_forward_scatter;
use scatterstereo::render::render_stack;
use scatterstereo::scene::{make_sphere_scene, ring_lights, Camera, ImageStack, Medium, Vec3};
use scatterstereo::solver::BiCgStabParams;
use scatterstereo::tables::Tables;

fn main() -> scatterstereo::Result<()> {
    let camera = Camera::centered(48, 48, 123.75)?;
    let scene = make_sphere_scene(&camera, Vec3::new(0.0, 0.0, 400.0), 60.0, 1.0)?;
    let medium = Medium::new(0.0, 5e-3)?;
    let lights = ring_lights(2, 100.0, 1e6)?;
    let tables = Tables::build_default()?;
    let rendered = render_stack(&scene, &lights, &medium, &camera, &tables, 1200.0, None)?;
    let lprime: Vec<Grid<f64>> = rendered
        .components
        .iter()
        .map(|c| Grid::from_fn(48, 48, |x, y| c.attenuated.get(x, y) + c.forward.get(x, y)))
        .collect();
    let stack = ImageStack::new(lprime, lights, scene.mask.clone())?;
    let index = MaskIndex::new(&scene.mask);

    for support in [5, 15, 45, 95] {
        let kernel = SparseKernel::build(&scene, &camera, &medium, &tables.f, support)?;
        let out = remove_forward_scatter(&stack, &kernel, &BiCgStabParams::default())?;
        let got = index.gather(&out.reflected.images[0]);
        let want = index.gather(&rendered.components[0].reflected);
        let num: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = want.iter().map(|b| b * b).sum();
        println!(
            "support {support:>3}: relative error {:.3e}, epsilon {:.3e}, C {:.3e}, {} iterations",
            (num / den).sqrt(),
            kernel.epsilon(),
            out.corrections[0],
            out.reports[0].iterations
        );
    }
    Ok(())
}
