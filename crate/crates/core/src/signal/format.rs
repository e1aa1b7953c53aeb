//! Columnar text format for signals and measurement stacks.
//!
//! ```text
//! # optional comment lines
//! n,T
//! k,i,j,re,im        (measurements: 1-based, one row per stored entry with i < j)
//! k,i,re,im          (signals: 1-based, one row per entry)
//! ```
//!
//! Measurement entries that are not listed are zero; the lower triangle is
//! filled in by Hermitian completion on load. Floats are written in Rust's
//! shortest round-trip form, so a write/read cycle is bit-exact.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use super::{MeasurementStack, StackedSignal, UnitSignal};
use crate::{Error, Result, C64};

pub fn write_measurements<W: Write>(mut w: W, a: &MeasurementStack) -> Result<()> {
    writeln!(w, "{},{}", a.n(), a.t())?;
    for (k, block) in a.blocks().iter().enumerate() {
        for i in 0..a.n() {
            for j in (i + 1)..a.n() {
                let v = block[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    writeln!(w, "{},{},{},{},{}", k + 1, i + 1, j + 1, v.re, v.im)?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_measurements<R: BufRead>(r: R) -> Result<MeasurementStack> {
    let mut lines = data_lines(r);
    let (n, t) = read_header(&mut lines)?;
    let mut blocks = vec![DMatrix::from_element(n, n, C64::new(0.0, 0.0)); t];
    for item in lines {
        let (line, fields) = item?;
        if fields.len() != 5 {
            return Err(parse_err(line, "expected k,i,j,re,im"));
        }
        let k = index(line, &fields[0], t)?;
        let i = index(line, &fields[1], n)?;
        let j = index(line, &fields[2], n)?;
        if i >= j {
            return Err(parse_err(line, "measurement rows must have i < j"));
        }
        let v = C64::new(float(line, &fields[3])?, float(line, &fields[4])?);
        blocks[k][(i, j)] = v;
        blocks[k][(j, i)] = v.conj();
    }
    MeasurementStack::new(blocks)
}

pub fn write_signal<W: Write>(mut w: W, g: &StackedSignal) -> Result<()> {
    writeln!(w, "{},{}", g.n(), g.t())?;
    for (k, block) in g.blocks().iter().enumerate() {
        for (i, v) in block.values().iter().enumerate() {
            writeln!(w, "{},{},{},{}", k + 1, i + 1, v.re, v.im)?;
        }
    }
    Ok(())
}

/// Reads a signal; entries are re-normalized onto the unit circle.
pub fn read_signal<R: BufRead>(r: R) -> Result<StackedSignal> {
    let mut lines = data_lines(r);
    let (n, t) = read_header(&mut lines)?;
    let mut values = vec![vec![None; n]; t];
    for item in lines {
        let (line, fields) = item?;
        if fields.len() != 4 {
            return Err(parse_err(line, "expected k,i,re,im"));
        }
        let k = index(line, &fields[0], t)?;
        let i = index(line, &fields[1], n)?;
        values[k][i] = Some(C64::new(float(line, &fields[2])?, float(line, &fields[3])?));
    }
    let blocks = values
        .into_iter()
        .enumerate()
        .map(|(k, block)| {
            let entries = block
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    v.ok_or_else(|| Error::InvalidArgument(format!("missing entry k={}, i={}", k + 1, i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            UnitSignal::normalized(entries)
        })
        .collect::<Result<Vec<_>>>()?;
    StackedSignal::new(blocks)
}

type Line = (usize, Vec<String>);

fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = Result<Line>> {
    r.lines().enumerate().filter_map(|(idx, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(s) => {
            let s = s.trim();
            if s.is_empty() || s.starts_with('#') {
                None
            } else {
                Some(Ok((idx + 1, s.split(',').map(|f| f.trim().to_string()).collect())))
            }
        }
    })
}

fn read_header(lines: &mut impl Iterator<Item = Result<Line>>) -> Result<(usize, usize)> {
    let (line, fields) = lines
        .next()
        .ok_or_else(|| parse_err(0, "missing n,T header"))??;
    if fields.len() != 2 {
        return Err(parse_err(line, "header must be n,T"));
    }
    let n: usize = fields[0].parse().map_err(|_| parse_err(line, "bad n"))?;
    let t: usize = fields[1].parse().map_err(|_| parse_err(line, "bad T"))?;
    if n == 0 || t == 0 {
        return Err(parse_err(line, "n and T must be positive"));
    }
    Ok((n, t))
}

fn index(line: usize, field: &str, bound: usize) -> Result<usize> {
    let v: usize = field.parse().map_err(|_| parse_err(line, "bad index"))?;
    if v == 0 || v > bound {
        return Err(parse_err(line, &format!("index {v} outside 1..={bound}")));
    }
    Ok(v - 1)
}

fn float(line: usize, field: &str) -> Result<f64> {
    field.parse().map_err(|_| parse_err(line, "bad number"))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_round_trip_is_exact() {
        let g = [C64::new(1.0, 0.0), C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -2.1)];
        let block = DMatrix::from_fn(3, 3, |i, j| if i == j { C64::new(0.0, 0.0) } else { g[i] * g[j].conj() });
        let mut sparse = block.clone();
        sparse[(0, 2)] = C64::new(0.0, 0.0);
        sparse[(2, 0)] = C64::new(0.0, 0.0);
        let a = MeasurementStack::new(vec![block, sparse]).unwrap();
        let mut buf = Vec::new();
        write_measurements(&mut buf, &a).unwrap();
        let back = read_measurements(buf.as_slice()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn signal_round_trip_is_exact() {
        let g = StackedSignal::new(vec![
            UnitSignal::anchored(&[C64::from_polar(1.0, 0.7)]).unwrap(),
            UnitSignal::anchored(&[C64::from_polar(1.0, -1.3)]).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_signal(&mut buf, &g).unwrap();
        assert_eq!(read_signal(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn rejects_lower_triangle_rows_and_bad_indices() {
        let err = read_measurements("2,1\n1,2,1,0.5,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_measurements("2,1\n2,1,2,0.5,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn signal_ingestion_renormalizes() {
        let g = read_signal("# truth\n2,1\n1,1,1,0\n1,2,0,1.0000000001\n".as_bytes()).unwrap();
        assert_eq!(g.block(0).values()[1], C64::new(0.0, 1.0));
    }
}
