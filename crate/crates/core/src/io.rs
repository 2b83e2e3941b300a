//! Artifact output: CSV tables, raw float64 grid blobs with JSON sidecars,
//! and JSON-lines path exports.
//!
//! CSV floats are written with Rust's shortest round-trip formatting, so a
//! fixed seed reproduces files byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::grid::GridData;

/// Write a labeled CSV table.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Format a float for CSV output (shortest round-trip representation).
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Grid dump as CSV rows (coordinates, value).
pub fn grid_csv(path: &Path, data: &GridData) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if data.grid.dim == 1 {
        writeln!(out, "x,value")?;
        for (i, v) in data.values.iter().enumerate() {
            writeln!(out, "{},{}", fmt(data.grid.point(i).get(0)), fmt(*v))?;
        }
    } else {
        writeln!(out, "x,y,value")?;
        for (i, v) in data.values.iter().enumerate() {
            let p = data.grid.point(i);
            writeln!(out, "{},{},{}", fmt(p.get(0)), fmt(p.get(1)), fmt(*v))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Sidecar metadata for binary grid blobs.
#[derive(Serialize)]
pub struct BlobSidecar<'a> {
    pub t: f64,
    pub alpha: f64,
    pub dim: usize,
    pub n: usize,
    pub box_halfwidth: f64,
    pub layout: &'a str,
}

/// Write a grid as a row-major little-endian f64 blob plus a JSON sidecar
/// (`<prefix>.f64` and `<prefix>.json`).
pub fn grid_blob(prefix: &Path, data: &GridData, t: f64, alpha: f64) -> Result<()> {
    let mut bin = BufWriter::new(File::create(prefix.with_extension("f64"))?);
    for v in &data.values {
        bin.write_all(&v.to_le_bytes())?;
    }
    bin.flush()?;
    let sidecar = BlobSidecar {
        t,
        alpha,
        dim: data.grid.dim,
        n: data.grid.n,
        box_halfwidth: data.grid.half,
        layout: "row-major",
    };
    let f = File::create(prefix.with_extension("json"))?;
    serde_json::to_writer_pretty(f, &sidecar)?;
    Ok(())
}

/// Read back a grid blob written by [`grid_blob`].
pub fn read_grid_blob(prefix: &Path) -> Result<(GridData, f64, f64)> {
    let sidecar: serde_json::Value =
        serde_json::from_reader(File::open(prefix.with_extension("json"))?)?;
    let dim = sidecar["dim"].as_u64().unwrap_or(1) as usize;
    let n = sidecar["n"].as_u64().unwrap_or(0) as usize;
    let half = sidecar["box_halfwidth"].as_f64().unwrap_or(0.0);
    let grid = crate::grid::Grid::new(dim, n, half)?;
    let bytes = std::fs::read(prefix.with_extension("f64"))?;
    let mut values = Vec::with_capacity(bytes.len() / 8);
    for chunk in bytes.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    if values.len() != grid.len() {
        return Err(crate::error::Error::invalid("blob length does not match grid"));
    }
    let t = sidecar["t"].as_f64().unwrap_or(0.0);
    let alpha = sidecar["alpha"].as_f64().unwrap_or(0.0);
    Ok((GridData { grid, values }, t, alpha))
}

/// Serialize any value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path)?;
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn blob_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1, 16, 2.0).unwrap();
        let data = GridData::from_fn(g, |p| p.get(0).cos());
        let prefix = dir.path().join("density_t05");
        grid_blob(&prefix, &data, 0.5, 1.8).unwrap();
        let (back, t, alpha) = read_grid_blob(&prefix).unwrap();
        assert_eq!(back.values, data.values);
        assert_eq!(t, 0.5);
        assert_eq!(alpha, 1.8);
    }
}
