//! Finite-difference partials, ∂̄ and Δ, weighted seminorms and the inequality probes.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::{build_grid, ComplexPoint, Exhaustion, Grid, Rect};
use crate::error::{arg, Error, Result};
use crate::field::{AnalyticField, MultiIndex, ScalarField};
use crate::weights::{check_omega2, IndexMaps, WeightFamily};

/// Default cap on derivative orders in seminorms.
pub const DERIVATIVE_CAP: usize = 4;

/// Seminorms only use nodes at least this many cells from the grid edge, so
/// every derivative up to [`DERIVATIVE_CAP`] is taken with a central stencil.
pub const SEMINORM_MARGIN: usize = DERIVATIVE_CAP.div_ceil(2);

/// How a partial derivative was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativePath {
    FiniteDifference,
    Analytic,
}

/// Finite-difference weights for derivatives of order 0..=m at `x0` from samples at `xs`.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil (start offset, weights) for the k-th derivative at position i of n unit-spaced points.
fn stencil(i: usize, n: usize, k: usize) -> (usize, Vec<f64>) {
    let p = k.div_ceil(2);
    let (start, len) = if i >= p && i + p < n {
        (i - p, 2 * p + 1)
    } else if i < p {
        (0, k + 2)
    } else {
        (n - (k + 2), k + 2)
    };
    let xs: Vec<f64> = (start..start + len).map(|t| t as f64).collect();
    let w = fornberg(i as f64, &xs, k);
    (start, w[k].clone())
}

fn axis_derivative(values: &[Complex64], grid: &Grid, axis: usize, k: usize) -> Result<Vec<Complex64>> {
    if k == 0 {
        return Ok(values.to_vec());
    }
    let (n, other) = if axis == 0 { (grid.nx, grid.ny) } else { (grid.ny, grid.nx) };
    if n < k + 2 {
        return arg(format!("need at least {} nodes along axis {axis} for order {k}, have {n}", k + 2));
    }
    let scale = grid.h.powi(k as i32);
    let stencils: Vec<(usize, Vec<f64>)> = (0..n).map(|i| stencil(i, n, k)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    for o in 0..other {
        for (i, (start, w)) in stencils.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &wt) in w.iter().enumerate() {
                let idx = if axis == 0 {
                    o * grid.nx + start + t
                } else {
                    (start + t) * grid.nx + o
                };
                acc += values[idx] * wt;
            }
            let idx = if axis == 0 { o * grid.nx + i } else { i * grid.nx + o };
            out[idx] = acc / scale;
        }
    }
    Ok(out)
}

/// ∂^β f by finite differences only, ignoring any oracle.
pub fn fd_partial_numeric(f: &ScalarField, beta: MultiIndex) -> Result<ScalarField> {
    let dx = axis_derivative(&f.values, &f.grid, 0, beta.b1)?;
    let dxy = axis_derivative(&dx, &f.grid, 1, beta.b2)?;
    Ok(ScalarField {
        grid: f.grid.clone(),
        values: dxy,
        analytic: None,
    })
}

/// ∂^β f, from the analytic oracle when it provides this partial, else by finite differences.
pub fn fd_partial(f: &ScalarField, beta: MultiIndex) -> Result<(ScalarField, DerivativePath)> {
    if let Some(a) = &f.analytic {
        let z0 = f.grid.node_at(0);
        if a.partial(beta, z0).is_some() {
            let values = f.grid.nodes().map(|z| a.partial(beta, z).unwrap_or_default()).collect();
            return Ok((ScalarField::new(f.grid.clone(), values)?, DerivativePath::Analytic));
        }
    }
    Ok((fd_partial_numeric(f, beta)?, DerivativePath::FiniteDifference))
}

/// ∂̄f = ½(∂₁f + i∂₂f).
pub fn dbar(f: &ScalarField) -> Result<ScalarField> {
    let (fx, _) = fd_partial(f, MultiIndex::new(1, 0))?;
    let (fy, _) = fd_partial(f, MultiIndex::new(0, 1))?;
    fx.zip(&fy, |a, b| 0.5 * (a + Complex64::i() * b))
}

/// ∂̄f by finite differences only.
pub fn dbar_numeric(f: &ScalarField) -> Result<ScalarField> {
    let fx = fd_partial_numeric(f, MultiIndex::new(1, 0))?;
    let fy = fd_partial_numeric(f, MultiIndex::new(0, 1))?;
    fx.zip(&fy, |a, b| 0.5 * (a + Complex64::i() * b))
}

/// Δf; the interior stencil is the 5-point Laplacian.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    let fxx = fd_partial_numeric(f, MultiIndex::new(2, 0))?;
    let fyy = fd_partial_numeric(f, MultiIndex::new(0, 2))?;
    fxx.add(&fyy)
}

/// All partials ∂^β f with |β| ≤ m.
#[derive(Debug, Clone)]
pub struct DerivativeTable {
    pub m: usize,
    pub entries: Vec<(MultiIndex, ScalarField)>,
}

impl DerivativeTable {
    pub fn new(f: &ScalarField, m: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for beta in MultiIndex::up_to(m) {
            entries.push((beta, fd_partial(f, beta)?.0));
        }
        Ok(Self { m, entries })
    }

    /// Finite-difference table, ignoring any oracle.
    pub fn numeric(f: &ScalarField, m: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for beta in MultiIndex::up_to(m) {
            entries.push((beta, fd_partial_numeric(f, beta)?));
        }
        Ok(Self { m, entries })
    }

    pub fn grid(&self) -> &Grid {
        &self.entries[0].1.grid
    }
}

/// Value of a weighted seminorm; `q == None` is the sup seminorm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeminormValue {
    pub n: usize,
    pub m: usize,
    pub q: Option<usize>,
    pub value: f64,
    pub witness: Option<ComplexPoint>,
    pub beta: Option<MultiIndex>,
}

/// Nodes of Ω_n used by every seminorm on this grid.
pub fn seminorm_nodes(exh: &Exhaustion, n: usize, grid: &Grid) -> Result<Vec<usize>> {
    let mask = exh.mask(n, grid)?;
    let nodes: Vec<usize> = (0..grid.len())
        .filter(|&k| mask[k] && grid.is_interior(k, SEMINORM_MARGIN))
        .collect();
    if nodes.is_empty() {
        return Err(Error::EmptySample(format!("no interior grid node lies in Ω_{n}")));
    }
    Ok(nodes)
}

/// |f|_{n,m} = max over Ω_n nodes and |β| ≤ m of |∂^β f|·ν_n.
pub fn sup_seminorm_table(t: &DerivativeTable, w: &WeightFamily, exh: &Exhaustion, n: usize, m: usize) -> Result<SeminormValue> {
    if m > t.m {
        return arg(format!("derivative table only reaches order {}", t.m));
    }
    let grid = t.grid();
    let nodes = seminorm_nodes(exh, n, grid)?;
    let weights: Vec<f64> = nodes.iter().map(|&k| w.eval(n, grid.node_at(k))).collect();
    let mut best = SeminormValue {
        n,
        m,
        q: None,
        value: 0.0,
        witness: None,
        beta: None,
    };
    for (beta, d) in t.entries.iter().filter(|(b, _)| b.order() <= m) {
        for (&k, &nu) in nodes.iter().zip(&weights) {
            let v = d.values[k].norm() * nu;
            if v > best.value || best.witness.is_none() {
                let z = grid.node_at(k);
                best.value = v;
                best.witness = Some(ComplexPoint { re: z.re, im: z.im });
                best.beta = Some(*beta);
            }
        }
    }
    Ok(best)
}

/// ‖f‖_{n,m,q} = max over |α| ≤ m of (Σ_{Ω_n} |∂^α f|^q ν_n^q h²)^{1/q}.
pub fn lq_seminorm_table(
    t: &DerivativeTable,
    w: &WeightFamily,
    exh: &Exhaustion,
    n: usize,
    m: usize,
    q: usize,
) -> Result<SeminormValue> {
    if q == 0 {
        return arg("q must be at least 1");
    }
    if m > t.m {
        return arg(format!("derivative table only reaches order {}", t.m));
    }
    let grid = t.grid();
    let nodes = seminorm_nodes(exh, n, grid)?;
    let weights: Vec<f64> = nodes.iter().map(|&k| w.eval(n, grid.node_at(k))).collect();
    let area = grid.cell_area();
    let mut best = SeminormValue {
        n,
        m,
        q: Some(q),
        value: 0.0,
        witness: None,
        beta: None,
    };
    for (beta, d) in t.entries.iter().filter(|(b, _)| b.order() <= m) {
        let s: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&k, &nu)| (d.values[k].norm() * nu).powi(q as i32))
            .sum();
        let v = (s * area).powf(1.0 / q as f64);
        if v > best.value || best.beta.is_none() {
            best.value = v;
            best.beta = Some(*beta);
        }
    }
    Ok(best)
}

pub fn sup_seminorm(f: &ScalarField, w: &WeightFamily, exh: &Exhaustion, n: usize, m: usize) -> Result<SeminormValue> {
    sup_seminorm_table(&DerivativeTable::new(f, m)?, w, exh, n, m)
}

pub fn lq_seminorm(f: &ScalarField, w: &WeightFamily, exh: &Exhaustion, n: usize, m: usize, q: usize) -> Result<SeminormValue> {
    lq_seminorm_table(&DerivativeTable::new(f, m)?, w, exh, n, m, q)
}

/// One instance of ‖f‖_{n,m,q} ≤ C₂(n)·‖ψ‖_{L^q(Ω_n)}·|f|_{J₂(n),m}.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRow {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub lhs: f64,
    pub c2: f64,
    pub psi_lq: f64,
    pub sup_j2: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Empirical ratio |f|_{n,l} / ‖f‖_{2J₁₁(n),l+2,q}.
#[derive(Debug, Clone, Serialize)]
pub struct ReverseRow {
    pub n: usize,
    pub l: usize,
    pub q: usize,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub reverse: Vec<ReverseRow>,
    pub pass: bool,
}

/// Checks the forward seminorm inequality over `levels × ms × qs` and records reverse ratios.
///
/// Levels whose J₂ or 2J₁₁ image has no interior node on the grid are skipped.
pub fn equivalence_probe(
    t: &DerivativeTable,
    w: &WeightFamily,
    exh: &Exhaustion,
    maps: &IndexMaps,
    levels: &[usize],
    ms: &[usize],
    qs: &[usize],
) -> Result<EquivalenceReport> {
    let grid = t.grid().clone();
    let mut rows = Vec::new();
    let mut reverse = Vec::new();
    for &q in qs {
        let wq = WeightFamily { kind: w.kind.clone(), q };
        for &n in levels {
            let om2 = check_omega2(&wq, exh, maps, n, Some(n), &grid)?;
            let c2 = om2.constant("C2").unwrap_or(f64::INFINITY);
            let psi_lq = om2.constant("psi_Lq").unwrap_or(f64::INFINITY);
            for &m in ms {
                let lhs = lq_seminorm_table(t, w, exh, n, m, q)?.value;
                let sup_j2 = sup_seminorm_table(t, w, exh, maps.j2(n), m)?.value;
                let rhs = c2 * psi_lq * sup_j2;
                rows.push(EquivalenceRow {
                    n,
                    m,
                    q,
                    lhs,
                    c2,
                    psi_lq,
                    sup_j2,
                    rhs,
                    pass: lhs <= rhs * (1.0 + 1e-12),
                });
            }
            let deep = 2 * maps.j11(n);
            for l in 0..=t.m.saturating_sub(2) {
                let num = sup_seminorm_table(t, w, exh, n, l)?.value;
                let den = lq_seminorm_table(t, w, exh, deep, l + 2, q)?.value;
                reverse.push(ReverseRow {
                    n,
                    l,
                    q,
                    ratio: (den > 0.0).then(|| num / den),
                });
            }
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(EquivalenceReport { rows, reverse, pass })
}

/// Differential operator used by the hypoelliptic probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Dbar,
    Laplacian,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypoellipticRow {
    pub field: String,
    pub l: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypoellipticReport {
    /// Lower estimate of the constant: the largest observed ratio.
    pub constant: f64,
    pub rows: Vec<HypoellipticRow>,
    pub excluded: Vec<String>,
}

/// Estimates the constant of ‖∂^α f‖_{Q_{r0}} ≤ C(‖f‖_{L^q(Q_{r1})} + max_{|β|≤l} ‖∂^β P f‖_{L^q(Q_{r1})}).
#[allow(clippy::too_many_arguments)]
pub fn hypoelliptic_probe(
    suite: &[Arc<dyn AnalyticField>],
    op: Operator,
    r0: f64,
    r1: f64,
    r2: f64,
    q: usize,
    m: usize,
    l_cap: usize,
    h: f64,
) -> Result<HypoellipticReport> {
    if !(0.0 < r0 && r0 < r1 && r1 < r2) {
        return arg(format!("radii must satisfy 0 < r0 < r1 < r2, got {r0}, {r1}, {r2}"));
    }
    if q == 0 {
        return arg("q must be at least 1");
    }
    let grid = build_grid(Rect::centered_square(r2)?, h)?;
    let in_q = |k: usize, r: f64| {
        let z = grid.node_at(k);
        z.re.abs() <= r + 1e-12 && z.im.abs() <= r + 1e-12 && grid.is_interior(k, SEMINORM_MARGIN)
    };
    let inner: Vec<usize> = (0..grid.len()).filter(|&k| in_q(k, r0)).collect();
    let middle: Vec<usize> = (0..grid.len()).filter(|&k| in_q(k, r1)).collect();
    if inner.is_empty() {
        return Err(Error::EmptySample("no node in the inner square".into()));
    }
    let lq = |f: &ScalarField| -> f64 {
        let s: f64 = middle.iter().map(|&k| f.values[k].norm().powi(q as i32)).sum();
        (s * grid.cell_area()).powf(1.0 / q as f64)
    };
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut constant: f64 = 0.0;
    for a in suite {
        let f = ScalarField::from_analytic(grid.clone(), a.clone())?;
        let table = DerivativeTable::new(&f, m)?;
        let lhs = table
            .entries
            .iter()
            .flat_map(|(_, d)| inner.iter().map(move |&k| d.values[k].norm()))
            .fold(0.0, f64::max);
        let pf = match op {
            Operator::Dbar => dbar_numeric(&f)?,
            Operator::Laplacian => laplacian(&f)?,
        };
        let pf_table = DerivativeTable::numeric(&pf, l_cap)?;
        let base = lq(&f);
        for l in 0..=l_cap {
            let extra = pf_table
                .entries
                .iter()
                .filter(|(b, _)| b.order() <= l)
                .map(|(_, d)| lq(d))
                .fold(0.0, f64::max);
            let rhs = base + extra;
            if rhs == 0.0 {
                if l == 0 {
                    excluded.push(a.name());
                }
                continue;
            }
            let ratio = lhs / rhs;
            constant = constant.max(ratio);
            rows.push(HypoellipticRow {
                field: a.name(),
                l,
                lhs,
                rhs,
                ratio,
            });
        }
    }
    Ok(HypoellipticReport {
        constant,
        rows,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;

    fn grid(h: f64) -> Grid {
        build_grid(Rect::from_bounds(-1.0, -1.0, 1.0, 1.5).unwrap(), h).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fornberg_reproduces_classic_weights() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        let w = fornberg(0.0, &[0.0, 1.0, 2.0], 1);
        assert!((w[1][0] + 1.5).abs() < 1e-15 && (w[1][1] - 2.0).abs() < 1e-15 && (w[1][2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn low_degree_exactness() {
        let g = grid(0.1);
        let f = ScalarField::from_fn(g.clone(), |z| z).unwrap();
        let dx = fd_partial_numeric(&f, MultiIndex::new(1, 0)).unwrap();
        let dy = fd_partial_numeric(&f, MultiIndex::new(0, 1)).unwrap();
        assert!(dx.values.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
        assert!(dy.values.iter().all(|v| (v - c(0.0, 1.0)).norm() < 1e-12));
        let q = ScalarField::from_fn(g, |z| c(z.re * z.re, 0.0)).unwrap();
        let dxx = fd_partial_numeric(&q, MultiIndex::new(2, 0)).unwrap();
        assert!(dxx.values.iter().all(|v| (v - c(2.0, 0.0)).norm() < 1e-9));
    }

    #[test]
    fn dbar_examples() {
        let g = grid(0.05);
        let zbar = ScalarField::from_fn(g.clone(), |z| z.conj()).unwrap();
        assert!(dbar(&zbar).unwrap().values.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
        let z2 = ScalarField::from_fn(g.clone(), |z| z * z).unwrap();
        assert!(dbar(&z2).unwrap().max_abs() < 1e-10);
        let zzbar = ScalarField::from_fn(g.clone(), |z| z * z.conj()).unwrap();
        let d = dbar(&zzbar).unwrap();
        for (k, v) in d.values.iter().enumerate() {
            assert!((v - g.node_at(k)).norm() < 1e-10);
        }
    }

    #[test]
    fn laplacian_examples() {
        let g = grid(0.05);
        let a = ScalarField::from_fn(g.clone(), |z| c(z.norm_sqr(), 0.0)).unwrap();
        assert!(laplacian(&a).unwrap().values.iter().all(|v| (v - c(4.0, 0.0)).norm() < 1e-9));
        let h = ScalarField::from_fn(g, |z| c((z * z).re, 0.0)).unwrap();
        assert!(laplacian(&h).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn grid_too_small_is_rejected() {
        let g = build_grid(Rect::from_bounds(0.0, 0.0, 1.0, 1.0).unwrap(), 0.5).unwrap();
        let f = ScalarField::from_fn(g, |z| z).unwrap();
        assert!(fd_partial_numeric(&f, MultiIndex::new(2, 0)).is_err());
    }
}
