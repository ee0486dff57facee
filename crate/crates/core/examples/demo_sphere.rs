//! End-to-end synthetic run: render a sphere in a scattering medium,
//! reconstruct it from a plane and print the per-iteration error table.
//!
//! ```text
//! cargo run --release --example demo_sphere -- [tables.bin] [support]
//! ```

use std::path::PathBuf;

use scatterstereo::config::RunConfig;
use scatterstereo::pipeline::demo_sphere;
use scatterstereo::tables::Tables;

fn main() -> scatterstereo::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let tables_path = PathBuf::from(args.next().unwrap_or_else(|| "tables.bin".into()));
    let mut cfg = RunConfig::default();
    if let Some(r) = args.next() {
        cfg.kernel.support = r.parse().expect("support must be an odd integer");
    }
    let tables = Tables::load_or_build(&tables_path)?;
    let demo = demo_sphere(&cfg, &tables, None)?;
    print!("{}", demo.metrics_table());
    Ok(())
}
