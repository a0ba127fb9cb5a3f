//! SVG small multiples of a 40-filter triangular bank.
//!
//!     cargo run --example plot_filters -- bank.svg

use fbank_egl::melbank::triangular_filterbank;
use fbank_egl::report::{export_filters, ExportFormat, GridLayout};

fn main() -> fbank_egl::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "triangular_40.svg".into());
    let bank = triangular_filterbank(40, 8000, 8000, 0.0, 4000.0)?;
    let svg = export_filters(&bank, ExportFormat::Svg, GridLayout { rows: 5, cols: 8 })?;
    std::fs::write(&path, &svg).map_err(|e| fbank_egl::Error::Io { context: path.clone(), source: e })?;
    println!("{} bytes -> {path}", svg.len());
    Ok(())
}
