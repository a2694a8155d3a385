//! ℂ^k-valued fields, solved one coordinate at a time.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::calculus::sup_seminorm;
use crate::domain::{DomainGeometry, Exhaustion, Grid};
use crate::error::{arg, Error, Result};
use crate::field::ScalarField;
use crate::mittag_leffler::{global_solve, MlSettings, MlState};
use crate::weights::WeightFamily;

/// k ≥ 1 scalar components on one grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return arg("a vector field needs at least one component");
        };
        if components.iter().any(|c| c.grid != first.grid) {
            return arg("components must share one grid");
        }
        Ok(Self { components })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.components[0].grid
    }

    /// max over components of |F_i|_{n,m}, the coordinate-wise system of seminorms.
    pub fn sup_seminorm(&self, w: &WeightFamily, exh: &Exhaustion, n: usize, m: usize) -> Result<f64> {
        self.components
            .iter()
            .map(|c| sup_seminorm(c, w, exh, n, m).map(|s| s.value))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }

    /// CSV rows `re_z,im_z,re_f1,im_f1,…,re_fk,im_fk`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "re_z,im_z")?;
        for i in 1..=self.k() {
            write!(w, ",re_f{i},im_f{i}")?;
        }
        writeln!(w)?;
        for idx in 0..self.grid().len() {
            let z = self.grid().node_at(idx);
            write!(w, "{:e},{:e}", z.re, z.im)?;
            for c in &self.components {
                write!(w, ",{:e},{:e}", c.values[idx].re, c.values[idx].im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a field written by [`VectorField::write_csv`]; k is taken from the header.
    pub fn read_csv<R: BufRead>(grid: Grid, r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Argument("empty CSV".into()))?
            .map_err(|e| Error::Argument(e.to_string()))?;
        let ncols = header.split(',').count();
        if ncols < 4 || ncols % 2 != 0 {
            return arg(format!("header has {ncols} columns"));
        }
        let k = (ncols - 2) / 2;
        let mut values = vec![Vec::with_capacity(grid.len()); k];
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Argument(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Argument(format!("line {}: {e}", lineno + 2)))?;
            if cols.len() != ncols {
                return arg(format!("line {}: expected {ncols} columns", lineno + 2));
            }
            for (i, v) in values.iter_mut().enumerate() {
                v.push(Complex64::new(cols[2 + 2 * i], cols[3 + 2 * i]));
            }
        }
        let components = values
            .into_iter()
            .map(|v| ScalarField::new(grid.clone(), v))
            .collect::<Result<_>>()?;
        Self::new(components)
    }
}

/// Applies `solve` to every component; the first failure aborts with its index.
pub fn solve_componentwise<R>(
    f: &VectorField,
    mut solve: impl FnMut(&ScalarField) -> Result<(ScalarField, R)>,
) -> Result<(VectorField, Vec<R>)> {
    let mut out = Vec::with_capacity(f.k());
    let mut reports = Vec::with_capacity(f.k());
    for (index, c) in f.components.iter().enumerate() {
        let (u, r) = solve(c).map_err(|e| Error::Component {
            index,
            source: Box::new(e),
        })?;
        out.push(u);
        reports.push(r);
    }
    Ok((VectorField::new(out)?, reports))
}

/// The gluing pipeline per component.
pub fn ml_componentwise(
    f: &VectorField,
    w: &WeightFamily,
    geom: &DomainGeometry,
    settings: &MlSettings,
) -> Result<(VectorField, Vec<MlState>)> {
    solve_componentwise(f, |c| global_solve(c, w, geom, settings))
}

/// max over nodes of |b - c·a| relative to max |c·a|.
pub fn linearity_discrepancy(a: &ScalarField, b: &ScalarField, c: Complex64) -> Result<f64> {
    if a.grid != b.grid {
        return arg("fields live on different grids");
    }
    let scale = a.values.iter().map(|v| (v * c).norm()).fold(0.0, f64::max);
    let diff = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (y - x * c).norm())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, Rect};

    fn grid() -> Grid {
        build_grid(Rect::centered_square(1.0).unwrap(), 0.25).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let g = grid();
        let a = ScalarField::from_fn(g.clone(), |z| z * 2.0).unwrap();
        let b = ScalarField::from_fn(g.clone(), |z| z.conj()).unwrap();
        let v = VectorField::new(vec![a, b]).unwrap();
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        let back = VectorField::read_csv(g, buf.as_slice()).unwrap();
        assert_eq!(back.k(), 2);
        for (x, y) in v.components.iter().zip(&back.components) {
            assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn component_failure_carries_its_index() {
        let g = grid();
        let v = VectorField::new(vec![ScalarField::zeros(g.clone()), ScalarField::zeros(g)]).unwrap();
        let mut calls = 0;
        let r = solve_componentwise(&v, |c| {
            calls += 1;
            if calls == 2 {
                Err(Error::Argument("boom".into()))
            } else {
                Ok((c.clone(), ()))
            }
        });
        assert!(matches!(r, Err(Error::Component { index: 1, .. })));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = ScalarField::zeros(grid());
        let b = ScalarField::zeros(build_grid(Rect::centered_square(1.0).unwrap(), 0.5).unwrap());
        assert!(VectorField::new(vec![a, b]).is_err());
        assert!(VectorField::new(vec![]).is_err());
    }
}
