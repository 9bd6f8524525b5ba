//! Field serialization.
//!
//! Binary layout (all little-endian): magic `CSF1`, `u32` dimension,
//! `u32` resolution per axis, `f64` period per axis, `u32` field rank
//! (0 scalar, 1 covector, 2 symmetric tensor), then the node-major `f64`
//! values. The differentiation scheme is not part of the file; readers
//! supply it.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{sym_len, CovectorField, MetricField, ScalarField, SymTensorField};
use crate::grid::{DiffScheme, Grid};

pub const MAGIC: &[u8; 4] = b"CSF1";

/// A field type that can be written to and read from the binary format.
pub trait GridField: Sized {
    const RANK: u32;
    fn grid(&self) -> &Arc<Grid>;
    fn raw_values(&self) -> &[f64];
    fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self>;
    fn component_names(dim: usize) -> Vec<String>;
}

impl GridField for ScalarField {
    const RANK: u32 = 0;
    fn grid(&self) -> &Arc<Grid> {
        ScalarField::grid(self)
    }
    fn raw_values(&self) -> &[f64] {
        self.values()
    }
    fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        ScalarField::new(grid, values)
    }
    fn component_names(_: usize) -> Vec<String> {
        vec!["value".into()]
    }
}

impl GridField for CovectorField {
    const RANK: u32 = 1;
    fn grid(&self) -> &Arc<Grid> {
        CovectorField::grid(self)
    }
    fn raw_values(&self) -> &[f64] {
        self.values()
    }
    fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        CovectorField::new(grid, values)
    }
    fn component_names(dim: usize) -> Vec<String> {
        (0..dim).map(|i| format!("c{i}")).collect()
    }
}

impl GridField for SymTensorField {
    const RANK: u32 = 2;
    fn grid(&self) -> &Arc<Grid> {
        SymTensorField::grid(self)
    }
    fn raw_values(&self) -> &[f64] {
        self.values()
    }
    fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        SymTensorField::new(grid, values)
    }
    fn component_names(dim: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(sym_len(dim));
        for i in 0..dim {
            for j in i..dim {
                names.push(format!("t{i}{j}"));
            }
        }
        names
    }
}

pub fn write_field<W: Write, F: GridField>(mut w: W, field: &F) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &n in grid.resolution() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &l in grid.period() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&F::RANK.to_le_bytes())?;
    for v in field.raw_values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read, F: GridField>(mut r: R, scheme: DiffScheme) -> Result<F> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let dim = read_u32(&mut r)? as usize;
    if !(3..=16).contains(&dim) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let resolution = (0..dim)
        .map(|_| read_u32(&mut r).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let period = (0..dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let rank = read_u32(&mut r)?;
    if rank != F::RANK {
        return Err(Error::Format(format!("expected rank {}, found {rank}", F::RANK)));
    }
    let grid = Grid::new(resolution, period, scheme)?;
    let count = grid.len() * F::component_names(dim).len();
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    F::from_parts(grid, values)
}

pub fn write_metric<W: Write>(w: W, g: &MetricField) -> Result<()> {
    write_field(w, g.tensor())
}

pub fn read_metric<R: Read>(r: R, scheme: DiffScheme) -> Result<MetricField> {
    MetricField::new(read_field(r, scheme)?)
}

/// CSV with node coordinates followed by field components.
pub fn write_field_csv<W: Write, F: GridField>(mut w: W, field: &F) -> Result<()> {
    let grid = field.grid();
    let dim = grid.dim();
    let names = F::component_names(dim);
    let header: Vec<String> = (0..dim)
        .map(|a| format!("x{a}"))
        .chain(names.iter().cloned())
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let m = names.len();
    for p in 0..grid.len() {
        let row: Vec<String> = grid
            .coordinates(p)
            .into_iter()
            .chain(field.raw_values()[p * m..(p + 1) * m].iter().copied())
            .map(|v| format!("{v:.17e}"))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
