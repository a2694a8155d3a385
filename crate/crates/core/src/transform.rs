//! Cutoffs, the Cauchy–Pompeiu transform T_E ∗ ψ, the lattice sum S_h and the local ∂̄ solve.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::{dbar_numeric, fd_partial_numeric, seminorm_nodes, sup_seminorm};
use crate::domain::{distance_transform, DomainGeometry, Exhaustion, Grid, Rect};
use crate::error::{arg, Error, Result};
use crate::fft::Convolver;
use crate::field::{AnalyticField, MultiIndex, ScalarField};
use crate::fundsol::FundamentalSolution;
use crate::oracle::Bump;
use crate::quadrature::{gauss_interval, polar_cell_integral, singular_cell, POLAR_ANGULAR, POLAR_RADIAL};
use crate::weights::WeightFamily;

/// A set in the plane, used as the inner or outer set of a cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetDescriptor {
    /// Ω_n, or its closure when `closed`.
    Level { n: usize, closed: bool },
    Rect { rect: Rect },
    Disk { re: f64, im: f64, radius: f64 },
}

impl SetDescriptor {
    pub fn contains(&self, exh: &Exhaustion, z: Complex64) -> bool {
        match *self {
            SetDescriptor::Level { n, closed: true } => exh.closure_contains(n, z),
            SetDescriptor::Level { n, closed: false } => exh.membership(n, z).unwrap_or(false),
            SetDescriptor::Rect { rect } => {
                z.re >= rect.lo.re && z.re <= rect.hi.re && z.im >= rect.lo.im && z.im <= rect.hi.im
            }
            SetDescriptor::Disk { re, im, radius } => (z - Complex64::new(re, im)).norm() <= radius,
        }
    }

    fn mask(&self, exh: &Exhaustion, grid: &Grid) -> Vec<bool> {
        grid.nodes().map(|z| self.contains(exh, z)).collect()
    }
}

/// dist(inner, outer^C) with its resolution; closed forms where available, else an EDT estimate.
fn separation(inner: &SetDescriptor, outer: &SetDescriptor, exh: &Exhaustion, grid: &Grid) -> Result<(f64, f64)> {
    use SetDescriptor as S;
    match (*inner, *outer) {
        (S::Level { n, .. }, S::Level { n: k, .. }) => {
            if k <= n {
                return Ok((0.0, 0.0));
            }
            let d = exh.distance_table(n, k)?;
            Ok((d.value, d.resolution))
        }
        (S::Rect { rect: a }, S::Rect { rect: b }) => Ok((
            (a.lo.re - b.lo.re)
                .min(b.hi.re - a.hi.re)
                .min(a.lo.im - b.lo.im)
                .min(b.hi.im - a.hi.im),
            0.0,
        )),
        (S::Disk { re, im, radius: r }, S::Disk { re: re2, im: im2, radius: r2 }) => {
            Ok((r2 - r - (Complex64::new(re, im) - Complex64::new(re2, im2)).norm(), 0.0))
        }
        _ => {
            let inner_mask = inner.mask(exh, grid);
            let outside: Vec<bool> = grid.nodes().map(|z| !outer.contains(exh, z)).collect();
            let d = distance_transform(grid, &inner_mask);
            let min = d
                .iter()
                .zip(&outside)
                .filter(|(_, &o)| o)
                .map(|(&v, _)| v)
                .fold(f64::INFINITY, f64::min);
            // node distances overestimate set distances by at most one cell diagonal
            Ok(((min - 2f64.sqrt()) * grid.h, grid.h))
        }
    }
}

/// Smooth φ with φ = 1 on the inner set, φ = 0 off the outer set and 0 ≤ φ ≤ 1.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub field: ScalarField,
    pub inner: SetDescriptor,
    pub outer: SetDescriptor,
    /// Transition width D = dist(inner, outer^C).
    pub width: f64,
    /// c_α = 4^{|α|}‖∂^α ρ₁‖_{L¹} for the unit-mass bump ρ₁, |α| ≤ 2.
    pub c_table: Vec<(MultiIndex, f64)>,
    /// max |∂^α φ|·D^{|α|} over the grid, by finite differences.
    pub observed: Vec<(MultiIndex, f64)>,
    pub resolution: f64,
}

impl Cutoff {
    /// Real values of φ.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.field.values.iter().map(|v| v.re)
    }

    /// Whether every observed constant is within the table, up to relative `slack`.
    pub fn within_table(&self, slack: f64) -> bool {
        self.observed
            .iter()
            .zip(&self.c_table)
            .all(|((_, o), (_, c))| *o <= c * (1.0 + slack))
    }
}

/// ‖∂^α ρ₁‖_{L¹} for |α| ≤ 2, ρ₁ the unit-mass bump on the unit disk.
pub fn bump_derivative_norms() -> Vec<(MultiIndex, f64)> {
    let bump = Bump::unit();
    let radial = gauss_interval(0.0, 1.0, 64);
    let angular = gauss_interval(0.0, 2.0 * PI, 64);
    let integrate = |g: &dyn Fn(Complex64) -> f64| -> f64 {
        let mut acc = 0.0;
        for &(r, wr) in &radial {
            for &(t, wt) in &angular {
                acc += g(Complex64::from_polar(r, t)) * r * wr * wt;
            }
        }
        acc
    };
    let mass = integrate(&|z| bump.value(z).re);
    MultiIndex::up_to(2)
        .into_iter()
        .map(|a| {
            let norm = integrate(&|z| bump.partial(a, z).unwrap_or_default().norm());
            (a, 4f64.powi(a.order() as i32) * norm / mass)
        })
        .collect()
}

/// Mollified indicator of the D/2-neighbourhood of `inner`, with a bump of radius D/4.
pub fn build_cutoff(inner: SetDescriptor, outer: SetDescriptor, geom: &DomainGeometry, grid: &Grid) -> Result<Cutoff> {
    let exh = &geom.exhaustion;
    let (width, res) = separation(&inner, &outer, exh, grid)?;
    if width <= 0.0 {
        return arg(format!("inner set is not separated from the outer complement (D = {width})"));
    }
    if width <= 4.0 * grid.h {
        return Err(Error::Resolution(format!(
            "transition width D = {width} is not above 4h = {}",
            4.0 * grid.h
        )));
    }
    let inner_mask = inner.mask(exh, grid);
    let dist = distance_transform(grid, &inner_mask);
    let half = 0.5 * width / grid.h;
    let chi: Vec<bool> = dist.iter().map(|&d| d <= half).collect();

    let eps = 0.25 * width;
    let reach = (eps / grid.h).ceil() as isize;
    let bump = Bump::unit();
    let mut window = Vec::new();
    for b in -reach..=reach {
        for a in -reach..=reach {
            let z = Complex64::new(a as f64, b as f64) * (grid.h / eps);
            let v = bump.value(z).re;
            if v > 0.0 {
                window.push((a, b, v));
            }
        }
    }
    let total: f64 = window.iter().map(|w| w.2).sum();
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            let mut hits = 0usize;
            for &(a, b, v) in &window {
                // χ is extended beyond the grid by its nearest edge value
                let ii = (i + a).clamp(0, nx - 1) as usize;
                let jj = (j + b).clamp(0, ny - 1) as usize;
                if chi[grid.index(ii, jj)] {
                    acc += v;
                    hits += 1;
                }
            }
            let phi = if hits == window.len() {
                1.0
            } else if hits == 0 {
                0.0
            } else {
                (acc / total).clamp(0.0, 1.0)
            };
            values.push(Complex64::new(phi, 0.0));
        }
    }
    let field = ScalarField::new(grid.clone(), values)?;
    let c_table = bump_derivative_norms();
    let mut observed = Vec::new();
    for &(a, _) in &c_table {
        let d = if a.order() == 0 {
            field.clone()
        } else {
            fd_partial_numeric(&field, a)?
        };
        observed.push((a, d.max_abs() * width.powi(a.order() as i32)));
    }
    Ok(Cutoff {
        field,
        inner,
        outer,
        width,
        c_table,
        observed,
        resolution: res.max(grid.h),
    })
}

/// 1-D quadratic Lagrange basis on the nodes -1, 0, 1.
fn lagrange(d: isize, t: f64) -> f64 {
    match d {
        -1 => 0.5 * t * (t - 1.0),
        0 => 1.0 - t * t,
        _ => 0.5 * t * (t + 1.0),
    }
}

/// ∫_{cell(0)} E(y) L_d(y/h) dy for d ∈ {-1, 0, 1}², the singular-cell weights.
fn singular_weights(fs: &FundamentalSolution, h: f64) -> [[Complex64; 3]; 3] {
    let mut w = [[Complex64::new(0.0, 0.0); 3]; 3];
    let origin = Complex64::new(0.0, 0.0);
    for (bj, row) in w.iter_mut().enumerate() {
        for (ai, cell) in row.iter_mut().enumerate() {
            let (a, b) = (ai as isize - 1, bj as isize - 1);
            *cell = singular_cell(
                |y| fs.e(y) * lagrange(a, y.re / h) * lagrange(b, y.im / h),
                origin,
                h,
                origin,
            );
        }
    }
    w
}

/// T_E ∗ ψ on a fixed grid, with the kernel table transformed once.
///
/// Off the singular cell the rule is the node (midpoint) sum; on the cell around
/// y = 0, ψ(x - y) is replaced by its 3 × 3 quadratic interpolant and the product
/// with E is integrated by the singular-cell rule.
pub struct CauchyTransform {
    pub fs: FundamentalSolution,
    pub grid: Grid,
    conv: Convolver,
}

impl CauchyTransform {
    pub fn new(fs: FundamentalSolution, grid: Grid) -> Self {
        let h = grid.h;
        let sw = singular_weights(&fs, h);
        let kernel = |di: isize, dj: isize| -> Complex64 {
            let mut k = if di == 0 && dj == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                fs.e(Complex64::new(di as f64 * h, dj as f64 * h)) * (h * h)
            };
            if di.abs() <= 1 && dj.abs() <= 1 {
                k += sw[(dj + 1) as usize][(di + 1) as usize];
            }
            k
        };
        let conv = Convolver::new(grid.nx, grid.ny, kernel);
        Self { fs, grid, conv }
    }

    pub fn apply(&self, psi: &ScalarField) -> Result<ScalarField> {
        if psi.grid != self.grid {
            return arg("density grid differs from the transform grid");
        }
        ScalarField::new(self.grid.clone(), self.conv.apply(&psi.values))
    }
}

/// (T_E ∗ ψ)(x) = ∫ E(y) ψ(x - y) dy at the nodes of `out_grid`.
///
/// On the lattice of ψ the transform is a discrete convolution; other output
/// nodes are summed directly with the singular cell integrated around x.
pub fn cauchy_transform(fs: &FundamentalSolution, psi: &ScalarField, out_grid: &Grid) -> Result<ScalarField> {
    if *out_grid == psi.grid {
        return CauchyTransform::new(*fs, psi.grid.clone()).apply(psi);
    }
    if psi.grid.same_lattice(out_grid) && out_grid.len() * 8 > psi.grid.len() {
        let full = CauchyTransform::new(*fs, psi.grid.clone()).apply(psi)?;
        if let Ok(r) = full.restrict(out_grid) {
            return Ok(r);
        }
    }
    let g = &psi.grid;
    let h = g.h;
    let mut out = Vec::with_capacity(out_grid.len());
    for x in out_grid.nodes() {
        let mut acc = Complex64::new(0.0, 0.0);
        let near = g.nearest(x).filter(|&(i, j)| {
            let d = x - g.node(i, j);
            d.re.abs() <= 0.5 * h && d.im.abs() <= 0.5 * h
        });
        for (k, y) in g.nodes().enumerate() {
            let v = psi.values[k];
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            if near.is_some_and(|(i, j)| g.index(i, j) == k) {
                continue;
            }
            acc += fs.e(x - y) * v * (h * h);
        }
        if let Some((i, j)) = near {
            let yc = g.node(i, j);
            // quadratic interpolant of ψ around the node whose cell holds x
            let (ci, cj) = (i.clamp(1, g.nx - 2), j.clamp(1, g.ny - 2));
            let base = g.node(ci, cj);
            let interp = |y: Complex64| -> Complex64 {
                let t = (y - base) / h;
                let mut s = Complex64::new(0.0, 0.0);
                for b in -1..=1isize {
                    for a in -1..=1isize {
                        let idx = g.index((ci as isize + a) as usize, (cj as isize + b) as usize);
                        s += psi.values[idx] * lagrange(a, t.re) * lagrange(b, t.im);
                    }
                }
                s
            };
            let half = Complex64::new(0.5 * h, 0.5 * h);
            acc += polar_cell_integral(
                |y| fs.e(x - y) * interp(y),
                yc - half,
                yc + half,
                x,
                POLAR_ANGULAR,
                POLAR_RADIAL,
            );
        }
        out.push(acc);
    }
    ScalarField::new(out_grid.clone(), out)
}

/// S_h(ψ)(y) = Σ_m E(y - mh) ψ(mh) h² over the lattice hℤ² ∩ rect(ψ), with y = mh skipped.
///
/// Lattice values come from ψ's analytic form when present, else ψ's grid must
/// be the lattice hℤ² itself.
pub fn riemann_sum_sh(fs: &FundamentalSolution, psi: &ScalarField, h: f64, out_grid: &Grid) -> Result<ScalarField> {
    if !(h > 0.0 && h.is_finite()) {
        return arg("lattice spacing must be positive");
    }
    let r = &psi.grid.rect;
    let (m0, m1) = ((r.lo.re / h - 1e-9).ceil() as i64, (r.hi.re / h + 1e-9).floor() as i64);
    let (k0, k1) = ((r.lo.im / h - 1e-9).ceil() as i64, (r.hi.im / h + 1e-9).floor() as i64);
    let mut lattice = Vec::new();
    for k in k0..=k1 {
        for m in m0..=m1 {
            let p = Complex64::new(m as f64 * h, k as f64 * h);
            let v = match &psi.analytic {
                Some(a) => a.value(p),
                None => {
                    let g = &psi.grid;
                    let (i, j) = g
                        .nearest(p)
                        .ok_or_else(|| Error::Argument("lattice point outside the density grid".into()))?;
                    if (g.node(i, j) - p).norm() > 1e-9 * h {
                        return arg("density grid is not the lattice hZ² and has no analytic form");
                    }
                    psi.values[g.index(i, j)]
                }
            };
            if v.re != 0.0 || v.im != 0.0 {
                lattice.push((p, v));
            }
        }
    }
    let mut out = Vec::with_capacity(out_grid.len());
    for y in out_grid.nodes() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(p, v) in &lattice {
            let d = y - p;
            // E(0)ψ(mh) := 0
            if d.norm() > 1e-12 * h {
                acc += fs.e(d) * v;
            }
        }
        out.push(acc * (h * h));
    }
    ScalarField::new(out_grid.clone(), out)
}

/// Diagnostics of one local solve.
#[derive(Debug, Clone, Serialize)]
pub struct LocalSolveReport {
    pub n: usize,
    pub outer_level: usize,
    /// sup over Ω_n of |∂̄u - f|·ν_n.
    pub residual: f64,
    /// (m, |u|_{n,m}/|f|_{I₄(n),m}) for m ≤ 2.
    pub a5_ratios: Vec<(usize, f64)>,
    pub cutoff_width: f64,
    pub resolution: f64,
}

/// sup over Ω_n of |∂̄u - f|·ν_n at the seminorm nodes.
pub fn weighted_residual(u: &ScalarField, f: &ScalarField, w: &WeightFamily, exh: &Exhaustion, n: usize) -> Result<f64> {
    let du = dbar_numeric(u)?;
    let nodes = seminorm_nodes(exh, n, &u.grid)?;
    if nodes.is_empty() {
        return Err(Error::EmptySample(format!("no seminorm node in Ω_{n}")));
    }
    Ok(nodes
        .iter()
        .map(|&k| (du.values[k] - f.values[k]).norm() * w.eval(n, u.grid.node_at(k)))
        .fold(0.0, f64::max))
}

/// u = T_E ∗ (φf) with φ cutting off from closure(Ω_n) to Ω_{I₄(n)}, so ∂̄u = f on Ω_n.
pub fn local_solve(
    f: &ScalarField,
    n: usize,
    w: &WeightFamily,
    geom: &DomainGeometry,
    fs: &FundamentalSolution,
) -> Result<(ScalarField, LocalSolveReport)> {
    local_solve_with(f, n, w, geom, &CauchyTransform::new(*fs, f.grid.clone()))
}

/// [`local_solve`] with a prepared transform on the grid of `f`.
pub fn local_solve_with(
    f: &ScalarField,
    n: usize,
    w: &WeightFamily,
    geom: &DomainGeometry,
    transform: &CauchyTransform,
) -> Result<(ScalarField, LocalSolveReport)> {
    let outer_level = geom.maps.i4(n);
    let cutoff = build_cutoff(
        SetDescriptor::Level { n, closed: true },
        SetDescriptor::Level {
            n: outer_level,
            closed: false,
        },
        geom,
        &f.grid,
    )?;
    let psi = ScalarField::new(
        f.grid.clone(),
        f.values.iter().zip(&cutoff.field.values).map(|(a, b)| a * b.re).collect(),
    )?;
    let u = transform.apply(&psi)?;
    let exh = &geom.exhaustion;
    let residual = weighted_residual(&u, f, w, exh, n)?;
    let mut a5_ratios = Vec::new();
    for m in 0..=2 {
        let num = sup_seminorm(&u, w, exh, n, m)?.value;
        let den = sup_seminorm(f, w, exh, outer_level, m)?.value;
        a5_ratios.push((m, if den > 0.0 { num / den } else { f64::NAN }));
    }
    let report = LocalSolveReport {
        n,
        outer_level,
        residual,
        a5_ratios,
        cutoff_width: cutoff.width,
        resolution: f.grid.h,
    };
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BaseDomain};
    use crate::fundsol::Damping;
    use crate::weights::IndexMaps;

    fn plane_geom() -> DomainGeometry {
        DomainGeometry::new(
            Exhaustion::compact_balls(BaseDomain::Plane, 1).unwrap(),
            IndexMaps::doubling(),
        )
    }

    #[test]
    fn equal_sets_are_rejected() {
        let g = build_grid(Rect::centered_square(2.0).unwrap(), 0.05).unwrap();
        let s = SetDescriptor::Rect {
            rect: Rect::centered_square(0.5).unwrap(),
        };
        assert!(matches!(build_cutoff(s, s, &plane_geom(), &g), Err(Error::Argument(_))));
    }

    #[test]
    fn narrow_transition_is_a_resolution_error() {
        let g = build_grid(Rect::centered_square(2.0).unwrap(), 0.1).unwrap();
        let a = SetDescriptor::Rect {
            rect: Rect::centered_square(0.5).unwrap(),
        };
        let b = SetDescriptor::Rect {
            rect: Rect::centered_square(0.8).unwrap(),
        };
        assert!(matches!(build_cutoff(a, b, &plane_geom(), &g), Err(Error::Resolution(_))));
    }

    #[test]
    fn concentric_squares() {
        let g = build_grid(Rect::centered_square(2.0).unwrap(), 0.05).unwrap();
        let inner = Rect::centered_square(0.5).unwrap();
        let outer = Rect::centered_square(1.5).unwrap();
        let c = build_cutoff(
            SetDescriptor::Rect { rect: inner },
            SetDescriptor::Rect { rect: outer },
            &plane_geom(),
            &g,
        )
        .unwrap();
        for (k, z) in g.nodes().enumerate() {
            let v = c.field.values[k].re;
            if inner.contains(z) {
                assert_eq!(v, 1.0);
            }
            if !outer.contains(z) {
                assert_eq!(v, 0.0);
            }
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn transform_of_dbar_bump_recovers_bump() {
        let chi = Bump::new(Complex64::new(0.1, -0.05), 0.8);
        let mut errs = Vec::new();
        for h in [0.04, 0.02] {
            let g = build_grid(Rect::centered_square(1.2).unwrap(), h).unwrap();
            let psi = ScalarField::from_fn(g.clone(), |z| chi.dbar(z)).unwrap();
            let fs = FundamentalSolution::unbound(Damping::One, 1);
            let u = cauchy_transform(&fs, &psi, &g).unwrap();
            let exact = ScalarField::from_fn(g.clone(), |z| chi.value(z)).unwrap();
            errs.push(u.max_diff(&exact).unwrap());
        }
        assert!(errs[1] < errs[0] && errs[1] < 1e-3, "{errs:?}");
    }

    #[test]
    fn off_lattice_output_matches_on_lattice() {
        let chi = Bump::new(Complex64::new(0.0, 0.0), 0.7);
        let g = build_grid(Rect::centered_square(1.0).unwrap(), 0.05).unwrap();
        let psi = ScalarField::from_fn(g.clone(), |z| chi.dbar(z)).unwrap();
        let fs = FundamentalSolution::unbound(Damping::Gaussian, 1);
        let on = cauchy_transform(&fs, &psi, &g).unwrap();
        let small = build_grid(Rect::from_bounds(-0.2, -0.2, 0.2, 0.2).unwrap(), 0.05).unwrap();
        let off = cauchy_transform(&fs, &psi, &build_grid(Rect::from_bounds(-0.19, -0.21, 0.21, 0.19).unwrap(), 0.1).unwrap()).unwrap();
        let on_small = on.restrict(&small).unwrap();
        // both paths against the exact χ, since the shifted nodes are not lattice nodes
        for (k, z) in off.grid.nodes().enumerate() {
            assert!((off.values[k] - chi.value(z)).norm() < 2e-3);
        }
        for (k, z) in small.nodes().enumerate() {
            assert!((on_small.values[k] - chi.value(z)).norm() < 2e-3);
        }
    }

    #[test]
    fn zero_density_gives_zero() {
        let g = build_grid(Rect::centered_square(1.0).unwrap(), 0.1).unwrap();
        let fs = FundamentalSolution::unbound(Damping::One, 1);
        let z = ScalarField::zeros(g.clone());
        assert_eq!(cauchy_transform(&fs, &z, &g).unwrap().max_abs(), 0.0);
        assert_eq!(riemann_sum_sh(&fs, &z, 0.1, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bump_norm_table_is_positive() {
        let t = bump_derivative_norms();
        assert_eq!(t.len(), 6);
        assert!((t[0].1 - 1.0).abs() < 1e-10);
        assert!(t.iter().all(|(_, v)| *v > 0.0));
    }
}
