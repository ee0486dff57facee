//! Builds (or loads) the scattering lookup tables and prints a few values.
//!
//! ```text
//! cargo run --release --example lookup_tables -- [tables.bin]
//! ```

use std::path::PathBuf;

use scatterstereo::tables::{f_difference_direct, Tables};

fn main() -> scatterstereo::Result<()> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "tables.bin".into()));
    let tables = Tables::load_or_build(&path)?;
    println!("F(u, v):");
    for u in [0.0, 0.5, 2.0, 8.0] {
        let row: Vec<String> = [0.2, 0.7, 1.2, 1.5]
            .iter()
            .map(|&v| format!("{:.6}", tables.f.lookup(u, v).unwrap()))
            .collect();
        println!("  u = {u:<4} {}", row.join("  "));
    }
    let (u, hi, lo) = (3.0, 1.5, 1.1);
    println!(
        "F(3, 1.5) - F(3, 1.1): table {:.8e}, direct {:.8e}",
        tables.f.eval(u, hi) - tables.f.eval(u, lo),
        f_difference_direct(u, hi, lo)
    );
    println!("G(T, mu):");
    for t in [0.1, 1.0, 5.0] {
        let row: Vec<String> = [-0.5, 0.0, 0.5, 1.0].iter().map(|&mu| format!("{:.5}", tables.g.lookup(t, mu))).collect();
        println!("  T = {t:<4} {}", row.join("  "));
    }
    Ok(())
}
