//! The QFLD1 binary field format and CSV density output.
//!
//! Layout: the line `QFLD1`, then ASCII lines `n <n>`, `q <q>`, `m <m>`,
//! `dims <d1> ...`, `origin <o1> ...`, `h <h>`, then the values as
//! little-endian f64, node-major, sheet-major, coordinate-minor.

use std::io::{BufRead, Write};

use super::grid::Grid;
use super::qfield::QField;
use crate::error::{Error, Result};

const MAGIC: &str = "QFLD1";

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_qfld<W: Write>(u: &QField, mut w: W) -> Result<()> {
    let g = u.grid();
    write!(
        w,
        "{MAGIC}\nn {}\nq {}\nm {}\ndims {}\norigin {}\nh {}\n",
        g.n(),
        u.q(),
        u.m(),
        join(g.dims()),
        join(g.origin()),
        g.h()
    )?;
    let mut buf = Vec::with_capacity(u.data().len() * 8);
    for x in u.data() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn header_line<R: BufRead>(r: &mut R, key: &str) -> Result<Vec<String>> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some(k) if k == key => Ok(parts.map(str::to_owned).collect()),
        _ => Err(Error::Format(format!("expected header line `{key}`, found {:?}", line.trim_end()))),
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("cannot parse {s:?}")))
}

fn single<T: std::str::FromStr>(v: Vec<String>) -> Result<T> {
    match v.as_slice() {
        [s] => parse(s),
        _ => Err(Error::Format("expected one value".into())),
    }
}

pub fn read_qfld<R: BufRead>(mut r: R) -> Result<QField> {
    let mut magic = String::new();
    r.read_line(&mut magic)?;
    if magic != format!("{MAGIC}\n") {
        return Err(Error::Format("missing QFLD1 magic".into()));
    }
    let n: usize = single(header_line(&mut r, "n")?)?;
    let q: usize = single(header_line(&mut r, "q")?)?;
    let m: usize = single(header_line(&mut r, "m")?)?;
    let dims = header_line(&mut r, "dims")?.iter().map(|s| parse(s)).collect::<Result<Vec<usize>>>()?;
    let origin = header_line(&mut r, "origin")?.iter().map(|s| parse(s)).collect::<Result<Vec<f64>>>()?;
    let h: f64 = single(header_line(&mut r, "h")?)?;
    if dims.len() != n || origin.len() != n {
        return Err(Error::Format("dims and origin must have n entries".into()));
    }
    let grid = Grid::new(origin, dims, h)?;
    let count = grid.len() * q * m;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated value block".into()))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after value block".into()));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    QField::from_data(grid, q, m, data)
}

/// CSV with columns `x, y[, z], value`, one row per node.
pub fn write_density_csv<W: Write>(grid: &Grid, values: &[f64], mut w: W) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::ShapeMismatch("one value per node required".into()));
    }
    let names = ["x", "y", "z"];
    writeln!(w, "{},value", names[..grid.n()].join(","))?;
    let mut x = vec![0.0; grid.n()];
    for (node, v) in values.iter().enumerate() {
        grid.coords(node, &mut x);
        writeln!(w, "{},{}", join(&x).replace(' ', ","), v)?;
    }
    Ok(())
}
