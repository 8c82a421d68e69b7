//! Readers and writers for the on-disk result formats.
//!
//! * 2D grids: a `#`-prefixed metadata header followed by one
//!   `omega_a omega_b re im` line per grid point, row-major over the
//!   excitation axis.  A binary twin (64-byte header + little-endian f64
//!   blocks) exists for bulk consumption.
//! * 1D spectra: three-column CSV.
//! * Trajectories: one row per sample, labeled columns for every tracked
//!   component.
//!
//! Writers emit full double precision so files round-trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::engine::{component_table, Trajectory, N_COMPONENTS};
use crate::error::{CoreError, Result};
use crate::spectra::SpectrumGrid;

/// Magic bytes opening every binary grid file.
pub const GRID_MAGIC: &[u8; 8] = b"PSPECGRD";
/// Binary grid format version.
pub const GRID_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> CoreError {
    CoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, what: &str) -> CoreError {
    CoreError::InvalidSpectrum(format!("{}: {what}", path.display()))
}

/// Write a grid as a self-describing text table.
pub fn write_grid_text(path: &Path, grid: &SpectrumGrid) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "# kind: {}", grid.kind)?;
        writeln!(w, "# rows_axis1: {}", grid.axis1.len())?;
        writeln!(w, "# cols_axis3: {}", grid.axis3.len())?;
        writeln!(w, "# normalization: {:.16e}", grid.normalization)?;
        for (k, v) in &grid.metadata {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "# columns: omega_a omega_b re im")?;
        for (i1, &a) in grid.axis1.iter().enumerate() {
            for (i3, &b) in grid.axis3.iter().enumerate() {
                let v = grid.values[i1 * grid.axis3.len() + i3];
                writeln!(w, "{a:.16e} {b:.16e} {:.16e} {:.16e}", v.re, v.im)?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

/// Read back a text grid written by [`write_grid_text`].
pub fn read_grid_text(path: &Path) -> Result<SpectrumGrid> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);

    let mut kind = String::new();
    let mut normalization = 1.0_f64;
    let mut metadata = std::collections::BTreeMap::new();
    let mut axis1: Vec<f64> = Vec::new();
    let mut axis3: Vec<f64> = Vec::new();
    let mut rows: Vec<(f64, f64, C64)> = Vec::new();

    for line in reader.lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once(':') {
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "kind" => kind = value.to_string(),
                    "normalization" => {
                        normalization = value
                            .parse()
                            .map_err(|_| malformed(path, "bad normalization"))?
                    }
                    "rows_axis1" | "cols_axis3" | "columns" => {}
                    _ => {
                        metadata.insert(key.to_string(), value.to_string());
                    }
                }
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut next = || -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| malformed(path, "short data row"))?
                .parse()
                .map_err(|_| malformed(path, "non-numeric data row"))
        };
        let (a, b, re, im) = (next()?, next()?, next()?, next()?);
        if axis1.last().map_or(true, |&last| a != last) {
            axis1.push(a);
        }
        if axis1.len() == 1 {
            axis3.push(b);
        }
        rows.push((a, b, C64::new(re, im)));
    }

    if axis1.is_empty() || axis3.is_empty() {
        return Err(malformed(path, "no data rows"));
    }
    if rows.len() != axis1.len() * axis3.len() {
        return Err(malformed(path, "row count does not tile the axes"));
    }
    let values = rows.into_iter().map(|(_, _, v)| v).collect();
    Ok(SpectrumGrid {
        kind,
        axis1,
        axis3,
        values,
        normalization,
        metadata,
    })
}

/// Write a grid as 64-byte header + little-endian f64 blocks
/// (axis1, axis3, then interleaved re/im values, row-major).
pub fn write_grid_binary(path: &Path, grid: &SpectrumGrid) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        let mut header = [0u8; 64];
        header[..8].copy_from_slice(GRID_MAGIC);
        header[8..12].copy_from_slice(&GRID_VERSION.to_le_bytes());
        header[16..24].copy_from_slice(&(grid.axis1.len() as u64).to_le_bytes());
        header[24..32].copy_from_slice(&(grid.axis3.len() as u64).to_le_bytes());
        header[32..40].copy_from_slice(&grid.normalization.to_le_bytes());
        w.write_all(&header)?;
        for &a in &grid.axis1 {
            w.write_all(&a.to_le_bytes())?;
        }
        for &b in &grid.axis3 {
            w.write_all(&b.to_le_bytes())?;
        }
        for v in &grid.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

/// Read back a binary grid written by [`write_grid_binary`].
pub fn read_grid_binary(path: &Path) -> Result<SpectrumGrid> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 64];
    r.read_exact(&mut header).map_err(|e| io_err(path, e))?;
    if &header[..8] != GRID_MAGIC {
        return Err(malformed(path, "bad magic"));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != GRID_VERSION {
        return Err(malformed(path, "unsupported version"));
    }
    let n1 = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let n3 = u64::from_le_bytes(header[24..32].try_into().unwrap()) as usize;
    let normalization = f64::from_le_bytes(header[32..40].try_into().unwrap());

    let mut read_f64 = |path: &Path| -> Result<f64> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut axis1 = Vec::with_capacity(n1);
    for _ in 0..n1 {
        axis1.push(read_f64(path)?);
    }
    let mut axis3 = Vec::with_capacity(n3);
    for _ in 0..n3 {
        axis3.push(read_f64(path)?);
    }
    let mut values = Vec::with_capacity(n1 * n3);
    for _ in 0..n1 * n3 {
        let re = read_f64(path)?;
        let im = read_f64(path)?;
        values.push(C64::new(re, im));
    }
    Ok(SpectrumGrid {
        kind: String::new(),
        axis1,
        axis3,
        values,
        normalization,
        metadata: std::collections::BTreeMap::new(),
    })
}

/// Write a three-column CSV spectrum: axis value plus a complex quantity.
pub fn write_csv3(path: &Path, headers: [&str; 3], axis: &[f64], values: &[C64]) -> Result<()> {
    assert_eq!(axis.len(), values.len());
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "{}, {}, {}", headers[0], headers[1], headers[2])?;
        for (&x, v) in axis.iter().zip(values) {
            writeln!(w, "{x:.16e}, {:.16e}, {:.16e}", v.re, v.im)?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

/// Read back a CSV written by [`write_csv3`], returning (axis, values).
pub fn read_csv3(path: &Path) -> Result<(Vec<f64>, Vec<C64>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut axis = Vec::new();
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if i == 0 || line.trim().is_empty() {
            continue; // header
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(malformed(path, "expected three columns"));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| malformed(path, "non-numeric column"))
        };
        axis.push(parse(cols[0])?);
        values.push(C64::new(parse(cols[1])?, parse(cols[2])?));
    }
    Ok((axis, values))
}

/// Write a full recorded trajectory: time column plus re/im pairs for every
/// tracked component, labeled in the header.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let table = component_table();
    let res: std::io::Result<()> = (|| {
        write!(w, "# t_ps")?;
        for info in table {
            write!(w, " re_{} im_{}", info.name, info.name)?;
        }
        writeln!(w)?;
        for (t, state) in traj.times.iter().zip(&traj.states) {
            write!(w, "{t:.9e}")?;
            for c in 0..N_COMPONENTS {
                write!(w, " {:.9e} {:.9e}", state[c].re, state[c].im)?;
            }
            writeln!(w)?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}
