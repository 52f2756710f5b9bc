//! Flat binary container: one ASCII header line, then row-major little-endian f64.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};

use super::field::Field;
use super::grid::{Axis, Basis, Boundary, Grid};
use crate::error::{Error, Result};

const FIELD_MAGIC: &str = "NSFIELD";
const SNAP_MAGIC: &str = "NSSNAP";

fn join<T, F: Fn(&T) -> String>(xs: &[T], f: F) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(",")
}

pub fn write_field<W: Write>(w: &mut W, f: &Field) -> Result<()> {
    let g = f.grid();
    writeln!(
        w,
        "{FIELD_MAGIC} 1 dim={} n={} length={} boundary={} basis={}",
        g.dim(),
        join(g.axes(), |a| a.n.to_string()),
        join(g.axes(), |a| format!("{:?}", a.length)),
        join(g.axes(), |a| a.boundary.name().to_string()),
        join(f.basis(), |b| b.name().to_string()),
    )?;
    let mut buf = Vec::with_capacity(8 * f.data().len());
    for v in f.data().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    let n = r.read_line(&mut line)?;
    if n == 0 {
        return Err(Error::Format("unexpected end of file".into()));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

fn key<'a>(tokens: &'a [&'a str], name: &str) -> Result<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::Format(format!("header lacks {name}")))
}

fn list<T, F: Fn(&str) -> Option<T>>(s: &str, f: F, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| f(p).ok_or_else(|| Error::Format(format!("bad {what} entry '{p}'"))))
        .collect()
}

/// Read one field; reuses `grid` when it matches the header.
pub fn read_field<R: BufRead>(r: &mut R, grid: Option<&Arc<Grid>>) -> Result<Field> {
    let header = read_line(r)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 2 || tokens[0] != FIELD_MAGIC || tokens[1] != "1" {
        return Err(Error::Format(format!("not a field header: '{header}'")));
    }
    let dim: usize = key(&tokens, "dim")?
        .parse()
        .map_err(|_| Error::Format("bad dim".into()))?;
    let ns = list(key(&tokens, "n")?, |p| p.parse::<usize>().ok(), "n")?;
    let ls = list(key(&tokens, "length")?, |p| p.parse::<f64>().ok(), "length")?;
    let bs = list(key(&tokens, "boundary")?, Boundary::parse, "boundary")?;
    let basis = list(key(&tokens, "basis")?, Basis::parse, "basis")?;
    if ns.len() != dim || ls.len() != dim || bs.len() != dim || basis.len() != dim {
        return Err(Error::Format("header lists disagree with dim".into()));
    }
    let axes: Vec<Axis> = (0..dim).map(|a| Axis::new(ns[a], ls[a], bs[a])).collect();
    let grid = match grid {
        Some(g) if g.axes() == axes.as_slice() => g.clone(),
        _ => Grid::new(axes)?,
    };
    let count = grid.len();
    let mut raw = vec![0u8; 8 * count];
    r.read_exact(&mut raw)
        .map_err(|_| Error::Format("truncated sample block".into()))?;
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let data = ArrayD::from_shape_vec(IxDyn(grid.shape()), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    Field::new(grid, data, basis)
}

pub fn save_field(path: &Path, f: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<Field> {
    let mut r = BufReader::new(File::open(path)?);
    read_field(&mut r, None)
}

/// Named fields at one time instant.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub fields: Vec<(String, Field)>,
}

impl Snapshot {
    pub fn get(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }
}

pub fn write_snapshot<W: Write>(w: &mut W, s: &Snapshot) -> Result<()> {
    let names: Vec<&str> = s.fields.iter().map(|(n, _)| n.as_str()).collect();
    writeln!(
        w,
        "{SNAP_MAGIC} 1 step={} t={:?} fields={}",
        s.step,
        s.t,
        names.join(",")
    )?;
    for (_, f) in &s.fields {
        write_field(w, f)?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: &mut R, grid: Option<&Arc<Grid>>) -> Result<Snapshot> {
    let header = read_line(r)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 2 || tokens[0] != SNAP_MAGIC || tokens[1] != "1" {
        return Err(Error::Format(format!("not a snapshot header: '{header}'")));
    }
    let step = key(&tokens, "step")?
        .parse()
        .map_err(|_| Error::Format("bad step".into()))?;
    let t = key(&tokens, "t")?
        .parse()
        .map_err(|_| Error::Format("bad t".into()))?;
    let names: Vec<String> = key(&tokens, "fields")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut fields = Vec::with_capacity(names.len());
    let mut shared = grid.cloned();
    for n in names {
        let f = read_field(r, shared.as_ref())?;
        shared = Some(f.grid().clone());
        fields.push((n, f));
    }
    Ok(Snapshot { step, t, fields })
}

pub fn save_snapshot(path: &Path, s: &Snapshot) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, s)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path, grid: Option<&Arc<Grid>>) -> Result<Snapshot> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingSnapshot(path.display().to_string())
        } else {
            Error::Io(e)
        }
    })?;
    read_snapshot(&mut BufReader::new(file), grid)
}
