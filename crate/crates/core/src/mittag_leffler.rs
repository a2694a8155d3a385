//! Gluing level-wise solutions into a global one with holomorphic corrections.
//!
//! g₁ = u_{I₁₄(1)}; then v = u_{I₂₁₄(n)} - g_n is holomorphic on Ω_{I₁₄(n)}, a
//! polynomial h_{n+1} approximates v in |·|_{n,m*}, and g_{n+1} = u_{I₂₁₄(n)} - h_{n+1}.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::{dbar_numeric, fd_partial_numeric, seminorm_nodes, sup_seminorm, DERIVATIVE_CAP};
use crate::domain::{DomainGeometry, Exhaustion};
use crate::error::{arg, Error, Result};
use crate::field::{MultiIndex, ScalarField};
use crate::fundsol::{Damping, FundamentalSolution};
use crate::hormander::{minimal_norm_solve, WeightedL2Problem};
use crate::transform::{local_solve_with, weighted_residual, CauchyTransform};
use crate::weights::{check_subharmonic, WeightFamily};

/// Default polynomial degree cap of the corrections.
pub const DEFAULT_DEGREE_CAP: usize = 12;

/// Polynomial basis orthonormalised on sample points by Arnoldi, evaluable elsewhere.
struct ArnoldiBasis {
    h: DMatrix<Complex64>,
    degree: usize,
}

impl ArnoldiBasis {
    /// Returns the basis and its values at the samples (columns).
    fn fit(samples: &[Complex64], degree: usize) -> Self {
        let m = samples.len();
        let mut q = DMatrix::<Complex64>::zeros(m, degree + 1);
        let mut h = DMatrix::<Complex64>::zeros(degree + 2, degree + 1);
        q.column_mut(0).fill(Complex64::new(1.0, 0.0));
        for k in 0..degree {
            let mut v = DVector::from_iterator(m, samples.iter().enumerate().map(|(i, z)| z * q[(i, k)]));
            // two Gram–Schmidt passes keep the columns orthogonal to rounding
            for _ in 0..2 {
                for j in 0..=k {
                    let c = q.column(j).dotc(&v) / m as f64;
                    h[(j, k)] += c;
                    v -= q.column(j) * c;
                }
            }
            let nrm = v.norm() / (m as f64).sqrt();
            h[(k + 1, k)] = Complex64::new(nrm, 0.0);
            q.set_column(k + 1, &(v / Complex64::new(nrm.max(f64::MIN_POSITIVE), 0.0)));
        }
        Self { h, degree }
    }

    /// Values of all basis functions at `points`, one column each.
    fn eval(&self, points: &[Complex64]) -> DMatrix<Complex64> {
        let m = points.len();
        let mut w = DMatrix::<Complex64>::zeros(m, self.degree + 1);
        w.column_mut(0).fill(Complex64::new(1.0, 0.0));
        for k in 0..self.degree {
            let mut v = DVector::from_iterator(m, points.iter().enumerate().map(|(i, z)| z * w[(i, k)]));
            for j in 0..=k {
                v -= w.column(j) * self.h[(j, k)];
            }
            let d = self.h[(k + 1, k)].re.max(f64::MIN_POSITIVE);
            w.set_column(k + 1, &(v / Complex64::new(d, 0.0)));
        }
        w
    }
}

/// Outcome of one holomorphic correction.
#[derive(Debug, Clone, Serialize)]
pub struct Correction {
    pub n: usize,
    pub degree: usize,
    /// |v - h|_{n,m*}.
    pub achieved: f64,
    pub target: f64,
    pub m_star: usize,
    /// sup over the check level of |∂̄v|·ν_n; v should be holomorphic there.
    pub closedness: f64,
    pub poles: usize,
}

/// Options of [`holo_correct`].
#[derive(Debug, Clone)]
pub struct CorrectionOptions {
    pub degree_cap: usize,
    pub derivative_cap: usize,
    /// Poles of the opt-in rational part; (z - p)^{-1} and (z - p)^{-2} join the basis.
    pub poles: Vec<Complex64>,
    /// Level on which ∂̄v is checked, usually I₁₄(n).
    pub check_level: Option<usize>,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            degree_cap: DEFAULT_DEGREE_CAP,
            derivative_cap: DERIVATIVE_CAP,
            poles: Vec::new(),
            check_level: None,
        }
    }
}

/// Weighted least-squares polynomial h ≈ v in the derivatives up to m* = min(n, cap) on Ω_n.
///
/// The degree grows from 0 until the sup-seminorm |v - h|_{n,m*} meets `target`.
pub fn holo_correct(
    v: &ScalarField,
    n: usize,
    w: &WeightFamily,
    exh: &Exhaustion,
    target: f64,
    opts: &CorrectionOptions,
) -> Result<(ScalarField, Correction)> {
    let g = &v.grid;
    let m_star = n.min(opts.derivative_cap);
    let nodes = seminorm_nodes(exh, n, g)?;
    if nodes.is_empty() {
        return Err(Error::EmptySample(format!("no seminorm node in Ω_{n}")));
    }
    let closedness = match opts.check_level {
        Some(l) => {
            let dv = dbar_numeric(v)?;
            seminorm_nodes(exh, l, g)?
                .iter()
                .map(|&k| dv.values[k].norm() * w.eval(n, g.node_at(k)))
                .fold(0.0, f64::max)
        }
        None => f64::NAN,
    };
    let betas = MultiIndex::up_to(m_star);
    let samples: Vec<Complex64> = nodes.iter().map(|&k| g.node_at(k)).collect();
    let all: Vec<Complex64> = g.nodes().collect();
    let basis = ArnoldiBasis::fit(&samples, opts.degree_cap);
    let on_grid = basis.eval(&all);
    // basis columns on the grid, then the rational columns
    let mut columns: Vec<ScalarField> = (0..=opts.degree_cap)
        .map(|c| ScalarField::new(g.clone(), on_grid.column(c).iter().copied().collect()))
        .collect::<Result<_>>()?;
    for p in &opts.poles {
        for e in 1..=2u32 {
            columns.push(ScalarField::new(
                g.clone(),
                all.iter().map(|z| (z - p).powu(e).inv()).collect(),
            )?);
        }
    }
    let derivs = |f: &ScalarField| -> Result<Vec<ScalarField>> {
        betas
            .iter()
            .map(|&b| if b.order() == 0 { Ok(f.clone()) } else { fd_partial_numeric(f, b) })
            .collect()
    };
    let col_d: Vec<Vec<ScalarField>> = columns.iter().map(derivs).collect::<Result<_>>()?;
    let v_d = derivs(v)?;
    let nu: Vec<f64> = samples.iter().map(|&z| w.eval(n, z)).collect();
    let rows = nodes.len() * betas.len();
    let n_rat = 2 * opts.poles.len();
    let mut best: Option<(ScalarField, Correction)> = None;
    for deg in 0..=opts.degree_cap {
        let cols: Vec<usize> = (0..=deg).chain(opts.degree_cap + 1..opts.degree_cap + 1 + n_rat).collect();
        let mut a = DMatrix::<Complex64>::zeros(rows, cols.len());
        let mut b = DVector::<Complex64>::zeros(rows);
        for (bi, _) in betas.iter().enumerate() {
            for (si, &k) in nodes.iter().enumerate() {
                let r = bi * nodes.len() + si;
                for (ci, &c) in cols.iter().enumerate() {
                    a[(r, ci)] = col_d[c][bi].values[k] * nu[si];
                }
                b[r] = v_d[bi].values[k] * nu[si];
            }
        }
        let coef = least_squares(a, b)?;
        let hvals: Vec<Complex64> = (0..g.len())
            .map(|k| cols.iter().zip(coef.iter()).map(|(&c, x)| columns[c].values[k] * x).sum())
            .collect();
        let h = ScalarField::new(g.clone(), hvals)?;
        let achieved = sup_seminorm(&v.sub(&h)?, w, exh, n, m_star)?.value;
        let corr = Correction {
            n,
            degree: deg,
            achieved,
            target,
            m_star,
            closedness,
            poles: opts.poles.len(),
        };
        let better = best.as_ref().is_none_or(|(_, c)| achieved < c.achieved);
        if achieved <= target {
            return Ok((h, corr));
        }
        if better {
            best = Some((h, corr));
        }
    }
    let (_, c) = best.expect("at least one degree is tried");
    Err(Error::CorrectionFailure {
        level: n,
        achieved: c.achieved,
        target,
        degree: c.degree,
    })
}

/// min ‖Ax - b‖ by Householder QR.
fn least_squares(a: DMatrix<Complex64>, b: DVector<Complex64>) -> Result<DVector<Complex64>> {
    let cols = a.ncols();
    if a.nrows() < cols {
        return arg("fewer samples than basis functions");
    }
    let (q, r) = a.qr().unpack();
    let qb = q.adjoint() * b;
    // drop numerically null directions instead of dividing by them
    let rmax = (0..cols).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    let mut x = DVector::<Complex64>::zeros(cols);
    for i in (0..cols).rev() {
        if r[(i, i)].norm() <= 1e-13 * rmax {
            continue;
        }
        let mut s = qb[i];
        for j in i + 1..cols {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    Ok(x)
}

/// How the level-wise particular solutions u_l are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMethod {
    /// Cutoff transform from closure(Ω_l) to Ω_{I₄(l)}.
    Local,
    /// Minimal-norm weighted L² solution.
    Hormander,
}

/// Settings of [`global_solve`].
#[derive(Debug, Clone)]
pub struct MlSettings {
    pub levels: usize,
    pub damping: Damping,
    pub hormander_degree: usize,
    pub correction: CorrectionOptions,
    pub residual_tolerance: f64,
    /// Skip the subharmonicity precheck (for families known to be admissible).
    pub skip_precheck: bool,
}

impl Default for MlSettings {
    fn default() -> Self {
        Self {
            levels: 3,
            damping: Damping::Gaussian,
            hormander_degree: 8,
            correction: CorrectionOptions::default(),
            residual_tolerance: 5e-2,
            skip_precheck: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRecord {
    /// Stage j of |g_j - g_{j-1}|_{j-1,m*}.
    pub j: usize,
    pub gap: f64,
    pub bound: f64,
    pub m_star: usize,
    pub degree: usize,
    pub closedness: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRecord {
    /// Stage j; the residual of g_j is measured on Ω_{I₁₄(j)} with ν_{I₁₄(j)}.
    pub j: usize,
    pub level: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TelescopeRow {
    pub p: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// History of the gluing iteration.
#[derive(Debug, Clone, Serialize)]
pub struct MlState {
    pub levels: usize,
    pub method: LevelMethod,
    pub derivative_cap: usize,
    pub gaps: Vec<GapRecord>,
    pub residuals: Vec<ResidualRecord>,
    pub telescope: Vec<TelescopeRow>,
    /// sup over Ω_N of |∂̄g - f|·ν_N.
    pub final_residual: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Produces u_l with ∂̄u_l = f on Ω_l, sharing one transform across levels.
pub struct LevelSolver<'a> {
    pub f: &'a ScalarField,
    pub w: &'a WeightFamily,
    pub geom: &'a DomainGeometry,
    pub method: LevelMethod,
    pub hormander_degree: usize,
    transform: CauchyTransform,
}

impl<'a> LevelSolver<'a> {
    pub fn new(f: &'a ScalarField, w: &'a WeightFamily, geom: &'a DomainGeometry, damping: Damping, hormander_degree: usize) -> Self {
        let method = if w.is_constant() {
            LevelMethod::Local
        } else {
            LevelMethod::Hormander
        };
        Self {
            f,
            w,
            geom,
            method,
            hormander_degree,
            transform: CauchyTransform::new(FundamentalSolution::unbound(damping, 1), f.grid.clone()),
        }
    }

    pub fn solve(&self, l: usize) -> Result<ScalarField> {
        match self.method {
            LevelMethod::Local => Ok(local_solve_with(self.f, l, self.w, self.geom, &self.transform)?.0),
            LevelMethod::Hormander => {
                let p = WeightedL2Problem::new(
                    l,
                    self.w.clone(),
                    self.geom.exhaustion.clone(),
                    &self.geom.maps,
                    self.hormander_degree,
                )?;
                Ok(minimal_norm_solve(&p, self.f, self.geom, &self.transform)?.0)
            }
        }
    }
}

/// Runs the gluing iteration up to stage N and returns g_N with its history.
pub fn global_solve(
    f: &ScalarField,
    w: &WeightFamily,
    geom: &DomainGeometry,
    settings: &MlSettings,
) -> Result<(ScalarField, MlState)> {
    let big_n = settings.levels;
    if big_n == 0 {
        return arg("at least one level is required");
    }
    let exh = &geom.exhaustion;
    let maps = &geom.maps;
    let mut notes = Vec::new();
    if !settings.skip_precheck {
        for l in 1..=maps.hormander_level(big_n) {
            if l < exh.n0 {
                continue;
            }
            let rep = check_subharmonic(w, l, &f.grid, 1.0)?;
            if !rep.pass {
                return Err(Error::Admissibility(format!("-ln ν_{l} is not subharmonic on the grid")));
            }
        }
    }
    let solver = LevelSolver::new(f, w, geom, settings.damping, settings.hormander_degree);
    let cap = settings.correction.derivative_cap;
    let mut history: Vec<ScalarField> = Vec::with_capacity(big_n);
    let mut gaps = Vec::new();
    let mut residuals = Vec::new();
    let record_residual = |j: usize, g: &ScalarField, residuals: &mut Vec<ResidualRecord>| -> Result<()> {
        let level = maps.i14(j);
        let r = weighted_residual(g, f, w, exh, level)?;
        residuals.push(ResidualRecord {
            j,
            level,
            residual: r,
            tolerance: settings.residual_tolerance,
            pass: r <= settings.residual_tolerance,
        });
        Ok(())
    };
    let g1 = solver.solve(maps.i14(1))?;
    record_residual(1, &g1, &mut residuals)?;
    history.push(g1);
    for n in 1..big_n {
        let u = solver.solve(maps.i214(n))?;
        let gn = &history[n - 1];
        let v = u.sub(gn)?;
        let target = 0.5f64.powi(n as i32 + 1);
        let opts = CorrectionOptions {
            check_level: Some(maps.i14(n)),
            ..settings.correction.clone()
        };
        let (h, corr) = holo_correct(&v, n, w, exh, target, &opts)?;
        let next = u.sub(&h)?;
        let m_star = n.min(cap);
        let gap = sup_seminorm(&next.sub(gn)?, w, exh, n, m_star)?.value;
        gaps.push(GapRecord {
            j: n + 1,
            gap,
            bound: target,
            m_star,
            degree: corr.degree,
            closedness: corr.closedness,
            pass: gap <= target,
        });
        record_residual(n + 1, &next, &mut residuals)?;
        history.push(next);
    }
    let mut telescope = Vec::new();
    for k in 1..=big_n {
        for p in k + 1..=big_n {
            let diff = history[p - 1].sub(&history[k - 1])?;
            for l in exh.n0.max(1)..=k {
                for m in 0..=k.min(cap) {
                    let value = sup_seminorm(&diff, w, exh, l, m)?.value;
                    let bound = 0.5f64.powi(k as i32);
                    telescope.push(TelescopeRow {
                        p,
                        k,
                        l,
                        m,
                        value,
                        bound,
                        pass: value < bound,
                    });
                }
            }
        }
    }
    let g = history.pop().expect("history is never empty");
    let final_residual = weighted_residual(&g, f, w, exh, big_n)?;
    if cap < big_n {
        notes.push(format!("gap seminorm depth capped at {cap}"));
    }
    let pass = gaps.iter().all(|r| r.pass)
        && residuals.iter().all(|r| r.pass)
        && telescope.iter().all(|r| r.pass)
        && final_residual <= settings.residual_tolerance;
    let state = MlState {
        levels: big_n,
        method: solver.method,
        derivative_cap: cap,
        gaps,
        residuals,
        telescope,
        final_residual,
        pass,
        notes,
    };
    Ok((g, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BaseDomain, Rect};
    use crate::weights::{IndexMap, IndexMaps};

    #[test]
    fn arnoldi_reproduces_polynomials() {
        let g = build_grid(Rect::centered_square(2.0).unwrap(), 0.1).unwrap();
        let exh = Exhaustion::compact_balls(BaseDomain::Plane, 1).unwrap();
        let w = WeightFamily::constant_one(2).unwrap();
        let v = ScalarField::from_fn(g, |z| z * z * z - z * Complex64::new(0.0, 2.0) + 1.0).unwrap();
        let opts = CorrectionOptions {
            degree_cap: 6,
            ..Default::default()
        };
        let (h, c) = holo_correct(&v, 1, &w, &exh, 1e-8, &opts).unwrap();
        assert!(c.degree <= 3, "{c:?}");
        assert!(c.achieved < 1e-8);
        assert!(h.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn zero_needs_no_correction() {
        let g = build_grid(Rect::centered_square(2.0).unwrap(), 0.1).unwrap();
        let exh = Exhaustion::compact_balls(BaseDomain::Plane, 1).unwrap();
        let w = WeightFamily::constant_one(2).unwrap();
        let (h, c) = holo_correct(&ScalarField::zeros(g), 1, &w, &exh, 0.0, &Default::default()).unwrap();
        assert_eq!(h.max_abs(), 0.0);
        assert_eq!(c.degree, 0);
    }

    #[test]
    fn unreachable_target_is_a_typed_failure() {
        let g = build_grid(Rect::centered_square(2.0).unwrap(), 0.1).unwrap();
        let exh = Exhaustion::compact_balls(BaseDomain::Plane, 1).unwrap();
        let w = WeightFamily::constant_one(2).unwrap();
        // z̄ is not holomorphic, so no polynomial gets close
        let v = ScalarField::from_fn(g, |z| z.conj()).unwrap();
        let opts = CorrectionOptions {
            degree_cap: 3,
            ..Default::default()
        };
        match holo_correct(&v, 1, &w, &exh, 1e-3, &opts) {
            Err(Error::CorrectionFailure { level, achieved, .. }) => {
                assert_eq!(level, 1);
                assert!(achieved > 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let maps = IndexMaps::uniform(IndexMap::Affine { scale: 1, offset: 1 });
        let exh = Exhaustion::compact_balls(BaseDomain::Plane, 1).unwrap();
        let geom = DomainGeometry::new(exh, maps);
        let w = WeightFamily::constant_one(2).unwrap();
        let g = build_grid(Rect::centered_square(7.0).unwrap(), 0.1).unwrap();
        let f = ScalarField::zeros(g);
        let (u, st) = global_solve(&f, &w, &geom, &MlSettings::default()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(st.gaps.iter().all(|r| r.gap == 0.0));
        assert!(st.pass);
    }
}
