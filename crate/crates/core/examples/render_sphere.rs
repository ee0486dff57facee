//! Renders the preset sphere at low resolution and prints how each light's
//! centre-pixel radiance splits into its components.
//!
//! ```text
//! cargo run --release --example render_sphere -- [out_dir]
//! ```

use std::path::PathBuf;

use scatterstereo::config::RunConfig;
use scatterstereo::dataset::{Dataset, GroundTruth};
use scatterstereo::pipeline::render_sphere;
use scatterstereo::tables::Tables;

fn main() -> scatterstereo::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_out".into()));
    let mut cfg = RunConfig::default();
    cfg.camera.width = 48;
    cfg.camera.height = 48;
    cfg.camera.focal = 330.0 * 48.0 / 128.0;
    let tables = Tables::build_default()?;
    let (truth, camera, rendered) = render_sphere(&cfg, &tables)?;
    let (x, y) = (24, 24);
    println!("light  observed     direct       backscatter  forward");
    for (k, c) in rendered.components.iter().enumerate() {
        println!(
            "{k:>5}  {:.5e}  {:.5e}  {:.5e}  {:.5e}",
            rendered.observed.images[k].get(x, y),
            c.attenuated.get(x, y),
            c.backscatter.get(x, y),
            c.forward.get(x, y)
        );
    }
    let dataset = Dataset {
        observed: rendered.observed,
        no_object: rendered.no_object,
        camera,
        medium: cfg.medium,
        d_max: cfg.render.d_max,
        ground_truth: Some(GroundTruth {
            normals: truth.normals,
            depth: truth.depth,
        }),
    };
    println!("wrote {}", dataset.save(&out)?.display());
    Ok(())
}
