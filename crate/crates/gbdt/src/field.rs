//! Sampled matrix-valued fields over 1-D and 2-D grids, with CSV export.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::matcore::{c64, CMat, GridSpec, C64};

/// A matrix field sampled on a grid; sample `(ix, it)` lives at index
/// `it * nx + ix`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionGrid {
    pub system: String,
    pub grid: GridSpec,
    rows: usize,
    cols: usize,
    values: Vec<CMat>,
    flags: Vec<bool>,
    extras: Vec<(String, Vec<f64>)>,
}

impl SolutionGrid {
    pub fn new(system: impl Into<String>, grid: GridSpec, values: Vec<CMat>) -> Result<Self> {
        let total = grid.nx * grid.nt_or_one();
        if values.len() != total {
            return invalid(format!("expected {total} samples, got {}", values.len()));
        }
        let (rows, cols) = values.first().map(CMat::shape).unwrap_or((0, 0));
        if values.iter().any(|v| v.shape() != (rows, cols)) {
            return invalid("samples have inconsistent shapes");
        }
        Ok(Self { system: system.into(), grid, rows, cols, values, flags: vec![false; total], extras: Vec::new() })
    }

    /// Field of zero matrices.
    pub fn zeros(system: impl Into<String>, grid: GridSpec, rows: usize, cols: usize) -> Self {
        let total = grid.nx * grid.nt_or_one();
        Self::new(system, grid, vec![CMat::zeros(rows, cols); total]).expect("consistent shapes")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, ix: usize, it: usize) -> usize {
        it * self.grid.nx + ix
    }

    pub fn at(&self, ix: usize, it: usize) -> &CMat {
        &self.values[self.index(ix, it)]
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [CMat] {
        &mut self.values
    }

    /// Scalar field from the `(0, 0)` entries.
    pub fn scalar(&self, ix: usize, it: usize) -> C64 {
        self.at(ix, it)[(0, 0)]
    }

    /// Marks a sample as invalid, e.g. where `S` is singular.
    pub fn flag(&mut self, i: usize) {
        self.flags[i] = true;
    }

    pub fn is_flagged(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Attaches an extra real column, one value per sample.
    pub fn add_extra(&mut self, name: impl Into<String>, column: Vec<f64>) -> Result<()> {
        if column.len() != self.values.len() {
            return invalid("extra column has the wrong length");
        }
        self.extras.push((name.into(), column));
        Ok(())
    }

    pub fn extra(&self, name: &str) -> Option<&[f64]> {
        self.extras.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Largest entrywise distance to another field on the same grid,
    /// skipping samples flagged in either.
    pub fn max_dist(&self, other: &SolutionGrid) -> Result<f64> {
        if self.values.len() != other.values.len() || self.shape() != other.shape() {
            return invalid("fields have different layouts");
        }
        Ok((0..self.values.len())
            .filter(|&i| !self.flags[i] && !other.flags[i])
            .map(|i| (&self.values[i] - &other.values[i]).max_abs())
            .fold(0.0, f64::max))
    }

    /// CSV with columns `x[,t]`, extras, then `re_i_j,im_i_j` (1-based)
    /// for every entry. Flagged samples are written as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["x".to_string()];
        if self.grid.has_t() {
            header.push("t".into());
        }
        header.extend(self.extras.iter().map(|(n, _)| n.clone()));
        for i in 0..self.rows {
            for j in 0..self.cols {
                header.push(format!("re_{}_{}", i + 1, j + 1));
                header.push(format!("im_{}_{}", i + 1, j + 1));
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for it in 0..self.grid.nt_or_one() {
            for ix in 0..self.grid.nx {
                let k = self.index(ix, it);
                let _ = write!(out, "{}", self.grid.x(ix));
                if self.grid.has_t() {
                    let _ = write!(out, ",{}", self.grid.t(it));
                }
                for (_, col) in &self.extras {
                    let _ = write!(out, ",{}", col[k]);
                }
                for z in self.values[k].as_slice() {
                    if self.flags[k] {
                        out.push_str(",NaN,NaN");
                    } else {
                        let _ = write!(out, ",{},{}", z.re, z.im);
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses the output of [`SolutionGrid::to_csv`]. Rows with `NaN`
    /// entries come back flagged.
    pub fn from_csv(system: impl Into<String>, text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidInput(format!("CSV: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty input".into()))?.split(',').collect();
        if header.first() != Some(&"x") {
            return Err(bad("first column must be x".into()));
        }
        let has_t = header.get(1) == Some(&"t");
        let mut entry_cols = Vec::new();
        let mut extra_cols = Vec::new();
        for (c, name) in header.iter().enumerate().skip(if has_t { 2 } else { 1 }) {
            if let Some(rest) = name.strip_prefix("re_") {
                let mut it = rest.split('_').map(|p| p.parse::<usize>());
                match (it.next(), it.next()) {
                    (Some(Ok(i)), Some(Ok(j))) if i > 0 && j > 0 => entry_cols.push((i - 1, j - 1, c)),
                    _ => return Err(bad(format!("bad column name {name}"))),
                }
            } else if !name.starts_with("im_") {
                extra_cols.push((name.to_string(), c));
            }
        }
        let rows = entry_cols.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let cols = entry_cols.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        let mut values = Vec::new();
        let mut flags = Vec::new();
        let mut extras: Vec<Vec<f64>> = vec![Vec::new(); extra_cols.len()];
        for (ln, line) in lines.enumerate() {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", ln + 2)))?;
            if fields.len() != header.len() {
                return Err(bad(format!("line {} has {} fields", ln + 2, fields.len())));
            }
            xs.push(fields[0]);
            if has_t {
                ts.push(fields[1]);
            }
            let mut m = CMat::zeros(rows, cols);
            let mut flagged = false;
            for &(i, j, c) in &entry_cols {
                let z = c64(fields[c], fields[c + 1]);
                flagged |= !(z.re.is_finite() && z.im.is_finite());
                m[(i, j)] = z;
            }
            if flagged {
                m = CMat::zeros(rows, cols);
            }
            values.push(m);
            flags.push(flagged);
            for (k, (_, c)) in extra_cols.iter().enumerate() {
                extras[k].push(fields[*c]);
            }
        }
        let total = xs.len();
        let nt = if has_t { distinct(&ts) } else { 1 };
        if nt == 0 || total % nt != 0 {
            return Err(bad("rows do not form a grid".into()));
        }
        let nx = total / nt;
        let grid = if has_t {
            GridSpec::new_2d(xs[0], xs[nx - 1], nx, ts[0], ts[total - 1], nt)?
        } else {
            GridSpec::new(xs[0], xs[nx - 1], nx)?
        };
        let mut out = Self::new(system, grid, values)?;
        out.flags = flags;
        for ((name, _), col) in extra_cols.into_iter().zip(extras) {
            out.extras.push((name, col));
        }
        Ok(out)
    }
}

fn distinct(v: &[f64]) -> usize {
    let mut n = 0;
    let mut last = None;
    for &t in v {
        if last != Some(t) {
            n += 1;
            last = Some(t);
        }
    }
    n
}
