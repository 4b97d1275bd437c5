//! Field persistence.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic  b"PZFD"   4 bytes
//! version u32      currently 1
//! N       u32      dimension
//! n       u32      points per dimension
//! L       f64      half box length
//! values  n^N × f64, row-major
//! ```
//!
//! The CSV form has a header row and one row per grid point: `x,value` for
//! `N = 1`, `x,y,value` for `N = 2`. Floats use the shortest round-trip
//! representation.

use std::io::{BufRead, BufReader, Read, Write};

use super::{Field, Grid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PZFD";
const VERSION: u32 = 1;

pub fn write_field<W: Write>(mut w: W, u: &Field) -> Result<()> {
    let g = u.grid();
    let mut buf = Vec::with_capacity(24 + 8 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.n() as u32).to_le_bytes());
    buf.extend_from_slice(&g.half_len().to_le_bytes());
    for v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut head = [0u8; 24];
    r.read_exact(&mut head)?;
    if &head[0..4] != MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported field file version {version}")));
    }
    let dim = word(8) as usize;
    let n = word(12) as usize;
    let half_len = f64::from_le_bytes(head[16..24].try_into().unwrap());
    let grid = Grid::new(dim, half_len, n).map_err(|e| Error::Format(format!("invalid header: {e}")))?;
    let mut raw = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Format(format!("truncated field payload: {e}")))?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(grid, values)
}

pub fn write_field_csv<W: Write>(mut w: W, u: &Field) -> Result<()> {
    let g = u.grid();
    let mut out = String::new();
    if g.dim() == 1 {
        out.push_str("x,value\n");
    } else {
        out.push_str("x,y,value\n");
    }
    for (idx, v) in u.values().iter().enumerate() {
        let [x, y] = g.point(idx);
        if g.dim() == 1 {
            out.push_str(&format!("{x},{v}\n"));
        } else {
            out.push_str(&format!("{x},{y},{v}\n"));
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads the CSV form; the grid is inferred from the row count and the first coordinate.
pub fn read_field_csv<R: Read>(r: R) -> Result<Field> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))??;
    let dim = match header.trim() {
        "x,value" => 1,
        "x,y,value" => 2,
        other => return Err(Error::Format(format!("unexpected CSV header {other:?}"))),
    };
    let mut first = None;
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
        if cols.len() != dim + 1 {
            return Err(Error::Format(format!(
                "line {}: expected {} columns",
                lineno + 2,
                dim + 1
            )));
        }
        first.get_or_insert(cols[0]);
        values.push(cols[dim]);
    }
    let n = if dim == 1 {
        values.len()
    } else {
        (values.len() as f64).sqrt().round() as usize
    };
    let x0 = first.ok_or_else(|| Error::Format("CSV has no rows".into()))?;
    let grid = Grid::new(dim, -x0, n).map_err(|e| Error::Format(format!("inconsistent CSV grid: {e}")))?;
    Field::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_header_layout() {
        let g = Grid::new(2, 1.5, 4).unwrap();
        let u = Field::from_fn(g, |[x, y]| x - 2.0 * y);
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 16);
        assert_eq!(&buf[0..4], b"PZFD");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 1.5);
        assert_eq!(read_field(&buf[..]).unwrap(), u);
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(matches!(
            read_field(&b"XXXXxxxxxxxxxxxxxxxxxxxx"[..]),
            Err(Error::Format(_))
        ));
        let g = Grid::new(1, 1.0, 8).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &Field::zeros(g)).unwrap();
        buf.truncate(40);
        assert!(matches!(read_field(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_columns() {
        let g = Grid::new(1, 2.0, 4).unwrap();
        let u = Field::from_fn(g, |[x, _]| x * x);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next(), Some("x,value"));
        assert_eq!(text.lines().nth(1), Some("-2,4"));
        assert_eq!(read_field_csv(&buf[..]).unwrap(), u);
    }
}
