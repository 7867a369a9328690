//! Columnar text format for grid fields:
//!
//! ```text
//! # torus-field dim=<d> n=<n> t=<time>
//! <i> [<j>] <value>
//! ```

use std::fmt::Write as _;

use super::grid::PeriodicGrid;
use crate::error::{Error, Result};

/// Float formatting used for every artifact: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_field(grid: &PeriodicGrid, t: f64, values: &[f64]) -> String {
    let mut out = format!("# torus-field dim={} n={} t={}\n", grid.dim(), grid.n(), fmt_f64(t));
    for (idx, v) in values.iter().enumerate() {
        let [i, j] = grid.multi_index(idx);
        if grid.dim() == 1 {
            let _ = writeln!(out, "{i} {}", fmt_f64(*v));
        } else {
            let _ = writeln!(out, "{i} {j} {}", fmt_f64(*v));
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses a field written by [`write_field`]; returns `(grid, t, values)`.
pub fn read_field(text: &str) -> Result<(PeriodicGrid, f64, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let rest = header
        .strip_prefix("# torus-field")
        .ok_or_else(|| parse_err(1, "missing torus-field header"))?;
    let (mut dim, mut n, mut t) = (None, None, None);
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(1, format!("bad token {kv}")))?;
        match k {
            "dim" => dim = v.parse::<usize>().ok(),
            "n" => n = v.parse::<usize>().ok(),
            "t" => t = v.parse::<f64>().ok(),
            _ => return Err(parse_err(1, format!("unknown header key {k}"))),
        }
    }
    let (dim, n, t) = match (dim, n, t) {
        (Some(d), Some(n), Some(t)) => (d, n, t),
        _ => return Err(parse_err(1, "header needs dim, n and t")),
    };
    let grid = PeriodicGrid::new(dim, n)?;
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = 0;
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != dim + 1 {
            return Err(parse_err(ln + 1, format!("expected {} columns", dim + 1)));
        }
        let mut mi = [0usize; 2];
        for a in 0..dim {
            mi[a] = tok[a]
                .parse()
                .map_err(|_| parse_err(ln + 1, format!("bad index {}", tok[a])))?;
            if mi[a] >= n {
                return Err(parse_err(ln + 1, "index out of range"));
            }
        }
        let v: f64 = tok[dim]
            .parse()
            .map_err(|_| parse_err(ln + 1, format!("bad value {}", tok[dim])))?;
        values[grid.flat_index(mi)] = v;
        seen += 1;
    }
    if seen != grid.len() {
        return Err(Error::Cardinality(seen, grid.len()));
    }
    Ok((grid, t, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        let vals: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let s = write_field(&grid, 0.125, &vals);
        let (g, t, back) = read_field(&s).unwrap();
        assert_eq!(g, grid);
        assert_eq!(t, 0.125);
        assert_eq!(back, vals);
    }

    #[test]
    fn missing_rows_are_an_error() {
        let s = "# torus-field dim=1 n=8 t=0\n0 1.0\n";
        assert!(read_field(s).is_err());
    }
}
