//! Radial-table and grid file formats.
//!
//! Radial tables are CSV with header `r,value`. Grids are CSV `x,y,value` on
//! a uniform square lattice, or the little-endian binary layout
//!
//! ```text
//! b"PWC2" | nx: u32 | ny: u32 | origin: f64 | spacing: f64 | nx·ny f64 values
//! ```
//!
//! where `origin` is the first coordinate on both axes and values are
//! row-major with rows along y.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::{Grid2D, RadialTable};
use crate::error::{Error, Result};

pub const PWC2_MAGIC: &[u8; 4] = b"PWC2";

#[derive(Deserialize)]
struct TableRow {
    r: f64,
    value: f64,
}

#[derive(Deserialize)]
struct GridRow {
    x: f64,
    y: f64,
    value: f64,
}

pub fn read_radial_table(path: &Path) -> Result<RadialTable> {
    let mut rdr = csv::Reader::from_path(path)?;
    let (mut r, mut f) = (Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: TableRow = row?;
        r.push(row.r);
        f.push(row.value);
    }
    RadialTable::new(r, f)
}

pub fn write_radial_table(path: &Path, t: &RadialTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "value"])?;
    for (r, v) in t.r().iter().zip(t.values()) {
        w.write_record([r.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a grid from CSV or PWC2, chosen by the magic bytes.
pub fn read_grid(path: &Path) -> Result<Grid2D> {
    let mut head = [0u8; 4];
    let is_binary = {
        let mut f = File::open(path)?;
        f.read(&mut head)? == 4 && &head == PWC2_MAGIC
    };
    if is_binary {
        read_grid_binary(path)
    } else {
        read_grid_csv(path)
    }
}

fn key(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

pub fn read_grid_csv(path: &Path) -> Result<Grid2D> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut points: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    let mut xs: BTreeMap<i64, f64> = BTreeMap::new();
    let mut ys: BTreeMap<i64, f64> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: GridRow = row?;
        xs.insert(key(row.x), row.x);
        ys.insert(key(row.y), row.y);
        if points.insert((key(row.x), key(row.y)), row.value).is_some() {
            return Err(Error::Grid(format!("duplicate grid point ({}, {})", row.x, row.y)));
        }
    }
    let xv: Vec<f64> = xs.values().copied().collect();
    let yv: Vec<f64> = ys.values().copied().collect();
    if xv.len() < 2 || yv.len() < 2 {
        return Err(Error::Grid("grid needs at least two distinct x and y values".into()));
    }
    let d = xv[1] - xv[0];
    let uniform = |v: &[f64]| v.windows(2).all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d.abs().max(1.0));
    if !uniform(&xv) || !uniform(&yv) {
        return Err(Error::Grid("grid spacing is not uniform and equal on both axes".into()));
    }
    if points.len() != xv.len() * yv.len() {
        return Err(Error::Grid(format!(
            "grid has {} points, expected {}x{}",
            points.len(),
            xv.len(),
            yv.len()
        )));
    }
    let mut values = Vec::with_capacity(points.len());
    for y in &yv {
        for x in &xv {
            values.push(points[&(key(*x), key(*y))]);
        }
    }
    Grid2D::new(xv.len(), yv.len(), xv[0], yv[0], d, values)
}

pub fn write_grid_csv(path: &Path, g: &Grid2D) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "value"])?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            w.write_record([g.x(i).to_string(), g.y(j).to_string(), g.at(i, j).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_binary(path: &Path) -> Result<Grid2D> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    if buf.len() < 28 || &buf[0..4] != PWC2_MAGIC {
        return Err(Error::Grid("missing PWC2 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let (nx, ny) = (u32_at(4), u32_at(8));
    let (origin, spacing) = (f64_at(12), f64_at(20));
    let expected = 28 + 8 * nx * ny;
    if buf.len() != expected {
        return Err(Error::Grid(format!("PWC2 payload is {} bytes, expected {expected}", buf.len())));
    }
    let values = (0..nx * ny).map(|k| f64_at(28 + 8 * k)).collect();
    Grid2D::new(nx, ny, origin, origin, spacing, values)
}

pub fn write_grid_binary(path: &Path, g: &Grid2D) -> Result<()> {
    if g.x0 != g.y0 {
        return Err(Error::Grid("PWC2 stores one origin; x0 and y0 differ".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(PWC2_MAGIC)?;
    w.write_all(&(g.nx as u32).to_le_bytes())?;
    w.write_all(&(g.ny as u32).to_le_bytes())?;
    w.write_all(&g.x0.to_le_bytes())?;
    w.write_all(&g.spacing.to_le_bytes())?;
    for v in &g.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Grid2D {
        Grid2D::centered(6, 1.5, |x, y| x * 10.0 + y).unwrap()
    }

    #[test]
    fn grid_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = sample();
        let bin = dir.path().join("g.pwc2");
        write_grid_binary(&bin, &g).unwrap();
        assert_eq!(read_grid(&bin).unwrap(), g);
        let csv_path = dir.path().join("g.csv");
        write_grid_csv(&csv_path, &g).unwrap();
        let back = read_grid(&csv_path).unwrap();
        for (a, b) in back.values.iter().zip(&g.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn table_round_trips_and_rejects_unsorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = RadialTable::new(vec![0.0, 0.5, 2.0], vec![3.0, 2.0, 1.0]).unwrap();
        write_radial_table(&path, &t).unwrap();
        assert_eq!(read_radial_table(&path).unwrap().values(), t.values());
        std::fs::write(&path, "r,value\n1,1\n0.5,2\n").unwrap();
        assert!(read_radial_table(&path).is_err());
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pwc2");
        std::fs::write(&path, b"PWC2\x02\x00\x00\x00").unwrap();
        assert!(read_grid(&path).is_err());
    }
}
