//! Plain-text formats.
//!
//! * Matrices: a `rows,cols` header line followed by one comma-separated line
//!   per row.
//! * Martingale witnesses: a `n m levels` header line followed by one line per
//!   level holding its flat table (`2ⁿ·m` floats, row-major). Optionally a
//!   `signs n` line follows, then one line per `ε_k` with its `2^(k-1)`
//!   prefix values.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::dyadic::DyadicTable;
use crate::error::{DclabError, Result};
use crate::martingale::{PredictableSigns, WalshPaleyMartingale};

pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "{},{}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn matrix_to_string(m: &DMatrix<f64>) -> String {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn parse_floats(line: &str, sep: char) -> Result<Vec<f64>> {
    line.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| DclabError::Parse(format!("invalid number {s:?}")))
        })
        .collect()
}

fn next_line<I: Iterator<Item = std::io::Result<String>>>(lines: &mut I, what: &str) -> Result<String> {
    loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                let t = line.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    return Ok(t.to_string());
                }
            }
            None => return Err(DclabError::Parse(format!("unexpected end of input, expected {what}"))),
        }
    }
}

pub(crate) fn read_matrix_lines<I: Iterator<Item = std::io::Result<String>>>(lines: &mut I) -> Result<DMatrix<f64>> {
    let header = next_line(lines, "matrix header")?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| DclabError::Parse(format!("invalid matrix header {header:?}")))?;
    let [rows, cols] = dims[..] else {
        return Err(DclabError::Parse(format!("matrix header {header:?} must be rows,cols")));
    };
    let mut entries = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let row = parse_floats(&next_line(lines, "matrix row")?, ',')?;
        if row.len() != cols {
            return Err(DclabError::Parse(format!("row {i} has {} entries, expected {cols}", row.len())));
        }
        entries.extend(row);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &entries))
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    read_matrix_lines(&mut r.lines())
}

/// Every matrix in a file holding several, in order; `#` lines are comments.
pub fn read_matrices<R: BufRead>(r: R) -> Result<Vec<DMatrix<f64>>> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::new();
    let mut rest = lines.into_iter().map(Ok).peekable();
    loop {
        while rest.next_if(|l: &std::io::Result<String>| l.as_ref().is_ok_and(|t| t.trim().is_empty() || t.trim().starts_with('#'))).is_some() {}
        if rest.peek().is_none() {
            return Ok(out);
        }
        out.push(read_matrix_lines(&mut rest)?);
    }
}

pub fn parse_matrix(s: &str) -> Result<DMatrix<f64>> {
    read_matrix(s.as_bytes())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}

/// A martingale together with optional transform signs.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub martingale: WalshPaleyMartingale,
    pub signs: Option<PredictableSigns>,
}

pub fn write_witness<W: Write>(w: &mut W, witness: &Witness) -> Result<()> {
    let mart = &witness.martingale;
    writeln!(w, "{} {} {}", mart.depth(), mart.dim(), mart.levels().len())?;
    for level in mart.levels() {
        writeln!(w, "{}", join(level.values()))?;
    }
    if let Some(signs) = &witness.signs {
        writeln!(w, "signs {}", signs.depth())?;
        for level in signs.levels() {
            writeln!(w, "{}", join(level))?;
        }
    }
    Ok(())
}

pub fn read_witness<R: BufRead>(r: R) -> Result<Witness> {
    let mut lines = r.lines();
    let header = next_line(&mut lines, "witness header")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| DclabError::Parse(format!("invalid witness header {header:?}")))?;
    let [n, m, count] = dims[..] else {
        return Err(DclabError::Parse(format!("witness header {header:?} must be `n m levels`")));
    };
    let mut levels = Vec::with_capacity(count);
    for _ in 0..count {
        let values = parse_floats(&next_line(&mut lines, "level")?, ' ')?;
        levels.push(DyadicTable::new(n, m, values)?);
    }
    let martingale = WalshPaleyMartingale::from_levels(levels)?;
    let signs = match lines.next() {
        Some(line) => {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                None
            } else {
                let depth: usize = t
                    .strip_prefix("signs ")
                    .and_then(|d| d.trim().parse().ok())
                    .ok_or_else(|| DclabError::Parse(format!("expected `signs n`, got {t:?}")))?;
                let levels = (0..depth)
                    .map(|_| parse_floats(&next_line(&mut lines, "sign level")?, ' '))
                    .collect::<Result<_>>()?;
                Some(PredictableSigns::new(levels)?)
            }
        }
        None => None,
    };
    Ok(Witness { martingale, signs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_text_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 1.0 / 3.0, 2e-17, 0.0, 7.25]);
        let s = matrix_to_string(&m);
        assert!(s.starts_with("2,3\n"));
        assert_eq!(parse_matrix(&s).unwrap(), m);
        assert!(parse_matrix("2,2\n1,2\n3\n").is_err());
        assert!(parse_matrix("2\n").is_err());
    }

    #[test]
    fn several_matrices() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[3.0, -4.0]);
        let text = format!("# A\n{}\n# B\n{}", matrix_to_string(&a), matrix_to_string(&b));
        assert_eq!(read_matrices(text.as_bytes()).unwrap(), vec![a, b]);
        assert!(read_matrices("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn witness_round_trip() {
        let t = DyadicTable::new(2, 2, vec![0.1, 1.0, 2.0, -3.0, 1.0 / 7.0, 4.0, 5.5, 6.0]).unwrap();
        let witness = Witness {
            martingale: WalshPaleyMartingale::from_terminal(t),
            signs: Some(PredictableSigns::new(vec![vec![-1.0], vec![1.0, -1.0]]).unwrap()),
        };
        let mut buf = Vec::new();
        write_witness(&mut buf, &witness).unwrap();
        assert_eq!(read_witness(buf.as_slice()).unwrap(), witness);
    }
}
