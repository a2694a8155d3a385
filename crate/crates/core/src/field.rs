//! Complex-valued fields sampled on a [`Grid`], with optional analytic oracles.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{build_grid, ComplexPoint, Grid, Rect};
use crate::error::{arg, Error, Result};

/// Multi-index β = (β₁, β₂) for ∂^β = ∂₁^{β₁} ∂₂^{β₂}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub b1: usize,
    pub b2: usize,
}

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex { b1: 0, b2: 0 };

    pub fn new(b1: usize, b2: usize) -> Self {
        Self { b1, b2 }
    }

    pub fn order(&self) -> usize {
        self.b1 + self.b2
    }

    /// All multi-indices with |β| ≤ m, ordered by total order then by β₂.
    pub fn up_to(m: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for k in 0..=m {
            for b2 in 0..=k {
                out.push(MultiIndex::new(k - b2, b2));
            }
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.b1, self.b2)
    }
}

/// A closed-form function with (some of) its partial derivatives.
pub trait AnalyticField: Send + Sync {
    fn value(&self, z: Complex64) -> Complex64;

    /// ∂^β f(z), when available in closed form.
    fn partial(&self, beta: MultiIndex, z: Complex64) -> Option<Complex64> {
        if beta == MultiIndex::ZERO {
            Some(self.value(z))
        } else {
            None
        }
    }

    fn name(&self) -> String;
}

/// Function values on the nodes of a grid.
#[derive(Clone)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub analytic: Option<Arc<dyn AnalyticField>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("len", &self.values.len())
            .field("analytic", &self.analytic.as_ref().map(|a| a.name()))
            .finish()
    }
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return arg(format!("field has {} values for {} nodes", values.len(), grid.len()));
        }
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            let z = grid.node_at(k);
            return Err(Error::NonFinite { re: z.re, im: z.im });
        }
        Ok(Self {
            grid,
            values,
            analytic: None,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            analytic: None,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    /// Samples an analytic field and keeps it as the oracle.
    pub fn from_analytic(grid: Grid, a: Arc<dyn AnalyticField>) -> Result<Self> {
        let mut f = Self::from_fn(grid, |z| a.value(z))?;
        f.analytic = Some(a);
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return arg("fields live on different grids");
        }
        Ok(())
    }

    /// Pointwise map; drops the oracle.
    pub fn map(&self, f: impl Fn(Complex64, Complex64) -> Complex64) -> ScalarField {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.grid.node_at(k), v))
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
            analytic: None,
        }
    }

    pub fn scale(&self, c: Complex64) -> ScalarField {
        self.map(|_, v| c * v)
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<ScalarField> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField {
            grid: self.grid.clone(),
            values,
            analytic: None,
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest node discrepancy to another field on the same grid.
    pub fn max_diff(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Restriction to a sub-lattice `target` of the same spacing.
    pub fn restrict(&self, target: &Grid) -> Result<ScalarField> {
        if !self.grid.same_lattice(target) {
            return arg("target grid is not on the field's lattice");
        }
        let h = self.grid.h;
        let di = ((target.rect.lo.re - self.grid.rect.lo.re) / h).round() as isize;
        let dj = ((target.rect.lo.im - self.grid.rect.lo.im) / h).round() as isize;
        if di < 0 || dj < 0 || di as usize + target.nx > self.grid.nx || dj as usize + target.ny > self.grid.ny {
            return arg("target grid is not contained in the field's grid");
        }
        let mut values = Vec::with_capacity(target.len());
        for j in 0..target.ny {
            for i in 0..target.nx {
                values.push(self.values[self.grid.index(i + di as usize, j + dj as usize)]);
            }
        }
        Ok(ScalarField {
            grid: target.clone(),
            values,
            analytic: self.analytic.clone(),
        })
    }

    /// CSV rows `re_z,im_z,re_f,im_f`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re_z,im_z,re_f,im_f")?;
        for (k, v) in self.values.iter().enumerate() {
            let z = self.grid.node_at(k);
            writeln!(w, "{:e},{:e},{:e},{:e}", z.re, z.im, v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads a field written by [`ScalarField::write_csv`] onto `grid`.
    pub fn read_csv<R: BufRead>(grid: Grid, r: R) -> Result<ScalarField> {
        let mut values = Vec::with_capacity(grid.len());
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Argument(e.to_string()))?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Argument(format!("line {}: {e}", lineno + 1)))?;
            if cols.len() != 4 {
                return arg(format!("line {}: expected 4 columns", lineno + 1));
            }
            values.push(Complex64::new(cols[2], cols[3]));
        }
        ScalarField::new(grid, values)
    }

    /// Binary layout: magic `DBF1`, rect (4 × f64), h (f64), nx, ny (u64), then
    /// row-major (re, im) pairs; all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.grid;
        w.write_all(b"DBF1")?;
        for x in [g.rect.lo.re, g.rect.lo.im, g.rect.hi.re, g.rect.hi.im, g.h] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(g.nx as u64).to_le_bytes())?;
        w.write_all(&(g.ny as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<ScalarField> {
        let io = |e: std::io::Error| Error::Argument(format!("binary field: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != b"DBF1" {
            return arg("binary field: bad magic");
        }
        let mut f8 = [0u8; 8];
        let mut head = [0.0f64; 5];
        for x in head.iter_mut() {
            r.read_exact(&mut f8).map_err(io)?;
            *x = f64::from_le_bytes(f8);
        }
        r.read_exact(&mut f8).map_err(io)?;
        let nx = u64::from_le_bytes(f8) as usize;
        r.read_exact(&mut f8).map_err(io)?;
        let ny = u64::from_le_bytes(f8) as usize;
        let rect = Rect::new(ComplexPoint::new(head[0], head[1])?, ComplexPoint::new(head[2], head[3])?)?;
        let grid = build_grid(rect, head[4])?;
        if grid.nx != nx || grid.ny != ny {
            return arg("binary field: node counts do not match the header rectangle");
        }
        let mut values = Vec::with_capacity(nx * ny);
        for _ in 0..nx * ny {
            r.read_exact(&mut f8).map_err(io)?;
            let re = f64::from_le_bytes(f8);
            r.read_exact(&mut f8).map_err(io)?;
            values.push(Complex64::new(re, f64::from_le_bytes(f8)));
        }
        ScalarField::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        build_grid(Rect::from_bounds(-1.0, -0.5, 1.0, 0.5).unwrap(), 0.25).unwrap()
    }

    #[test]
    fn multi_index_enumeration() {
        let all = MultiIndex::up_to(2);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], MultiIndex::ZERO);
        assert!(all.iter().all(|b| b.order() <= 2));
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = grid();
        let mut v = vec![Complex64::new(0.0, 0.0); g.len()];
        v[3] = Complex64::new(f64::NAN, 0.0);
        assert!(ScalarField::new(g, v).is_err());
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let f = ScalarField::from_fn(grid(), |z| z * z + Complex64::new(0.1, -1.0 / 3.0)).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 5 * 8 + 16 + 16 * f.len());
        let g = ScalarField::read_binary(&buf[..]).unwrap();
        assert_eq!(g.grid, f.grid);
        assert_eq!(g.values, f.values);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = ScalarField::from_fn(grid(), |z| z.exp()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = ScalarField::read_csv(f.grid.clone(), &buf[..]).unwrap();
        assert_eq!(g.values, f.values);
    }

    #[test]
    fn restriction_picks_matching_nodes() {
        let f = ScalarField::from_fn(grid(), |z| z).unwrap();
        let sub = build_grid(Rect::from_bounds(-0.5, -0.25, 0.5, 0.25).unwrap(), 0.25).unwrap();
        let r = f.restrict(&sub).unwrap();
        for (k, v) in r.values.iter().enumerate() {
            assert!((v - sub.node_at(k)).norm() < 1e-15);
        }
    }
}
