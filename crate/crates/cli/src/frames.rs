//! Grayscale frame export: one binary PGM (P5) per tick of a tensor-valued
//! property series, min-max scaled per frame. Frames are numbered in tick
//! order so external tools can assemble them into a time-lapse.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chainsight_core::distributions::render_frame_values;
use chainsight_core::properties::PropertySeries;

/// Write every tick of `series` as `<index>_<time>.pgm` under `dir`.
/// Returns the written paths in tick order.
pub fn export_frames(series: &PropertySeries, dir: &Path) -> Result<Vec<PathBuf>, std::io::Error> {
    fs::create_dir_all(dir)?;
    let (rows, cols) = series.shape;
    let mut written = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        let pixels = render_frame_values(series.tick_values(i));
        let path = dir.join(format!("{i:05}_{}.pgm", series.times[i]));
        let mut out = BufWriter::new(File::create(&path)?);
        write!(out, "P5\n{cols} {rows}\n255\n")?;
        out.write_all(&pixels)?;
        out.flush()?;
        written.push(path);
    }
    Ok(written)
}
