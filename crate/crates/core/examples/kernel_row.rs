//! Builds the forward-scatter kernel for a sphere and writes one pixel's row
//! as a PFM image, alongside the stored sparse row's coverage.
//!
//! ```text
//! cargo run --release --example kernel_row -- [x] [y] [out.pfm]
//! ```

use std::path::PathBuf;

use scatterstereo::kernel::{kernel_row_image, SparseKernel};
use scatterstereo::pfm::write_scalar;
use scatterstereo::scene::{make_sphere_scene, Camera, Medium, Vec3};
use scatterstereo::tables::TableF;

fn main() -> scatterstereo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let x: usize = args.first().map_or(32, |s| s.parse().expect("x"));
    let y: usize = args.get(1).map_or(32, |s| s.parse().expect("y"));
    let out = PathBuf::from(args.get(2).cloned().unwrap_or_else(|| "kernel_row.pfm".into()));

    let camera = Camera::centered(64, 64, 165.0)?;
    let scene = make_sphere_scene(&camera, Vec3::new(0.0, 0.0, 400.0), 60.0, 1.0)?;
    let medium = Medium::new(0.0, 5e-3)?;
    let table = TableF::build_default()?;

    let row = kernel_row_image((x, y), &scene, &camera, &medium, &table)?;
    write_scalar(&out, &row)?;
    let total: f64 = row.as_slice().iter().sum();
    let diag = *row.get(x, y);
    println!("row sum {total:.6e}, diagonal {diag:.6e}, off-diagonal share {:.3e}", (total - diag) / total);

    let kernel = SparseKernel::build(&scene, &camera, &medium, &table, 21)?;
    let p = kernel.index().index_of(x, y).expect("pixel is on the sphere");
    let kept: f64 = kernel.row(p).map(|(_, k)| k).sum();
    println!(
        "21x21 window keeps {:.1}% of the off-diagonal mass, epsilon {:.3e}, nnz {}",
        100.0 * kept / (total - diag),
        kernel.epsilon(),
        kernel.nnz()
    );
    println!("wrote {}", out.display());
    Ok(())
}
