//! Regenerate the committed demo assets (network config, weight files, and
//! benchmark scene specs) under `assets/demo/`:
//!
//!     cargo run -p evnet-cli --example gen_demo_assets [out_dir]

use std::path::PathBuf;

fn main() -> anyhow::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("assets/demo"));
    evnet_core::demo::write_demo_assets(&dir)?;
    println!("wrote demo assets under {}", dir.display());
    Ok(())
}
