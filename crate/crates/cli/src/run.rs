//! Task orchestration and artifact emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use dbar_core::domain::{build_grid, collar_check, CollarReport, DomainGeometry, Grid, Rect};
use dbar_core::field::{MultiIndex, ScalarField};
use dbar_core::fundsol::{
    a3_bound, b_bound, cauchy_estimate_check, weak_delta_residual, BoundReport, Damping, FundamentalSolution, Pairing,
};
use dbar_core::hormander::{
    hormander_inequality_check, minimal_norm_solve, omega2_chain_check, ChainReport, HormanderReport, SolveReport,
    WeightedL2Problem,
};
use dbar_core::mittag_leffler::{global_solve, CorrectionOptions, MlSettings, MlState};
use dbar_core::oracle::Bump;
use dbar_core::transform::{
    cauchy_transform, local_solve_with, riemann_sum_sh, weighted_residual, CauchyTransform, LocalSolveReport,
};
use dbar_core::vecvalued::{linearity_discrepancy, ml_componentwise, VectorField};
use dbar_core::weights::{
    check_monotone, check_omega1, check_omega2, check_ru, check_subharmonic, ConditionReport, RuReport, WeightKind,
};

use crate::config::{FieldError, RunConfig, Validated};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    CheckWeights,
    DeltaTest,
    Convergence,
    Solve,
    MlSolve,
    VecSolve,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::CheckWeights => "check-weights",
            Task::DeltaTest => "delta-test",
            Task::Convergence => "convergence",
            Task::Solve => "solve",
            Task::MlSolve => "ml-solve",
            Task::VecSolve => "vec-solve",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration")]
    Config(Vec<FieldError>),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Core(#[from] dbar_core::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Where a run wrote its artifacts and whether every check passed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: PathBuf,
    pub pass: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Options beyond the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Halvings of h; for convergence, the number of halvings in the study.
    pub refine: Option<u32>,
}

/// First 12 hex digits of SHA-256 over the task name and the canonical config JSON.
pub fn config_hash(task: Task, cfg: &RunConfig, opts: &RunOptions) -> String {
    let mut hasher = Sha256::new();
    hasher.update(task.name().as_bytes());
    hasher.update(serde_json::to_vec(cfg).expect("config serialises"));
    hasher.update(format!("refine={:?}", opts.refine).as_bytes());
    hasher.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn write_field(dir: &Path, stem: &str, f: &ScalarField) -> Result<(), RunError> {
    f.write_csv(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?))?;
    f.write_binary(BufWriter::new(File::create(dir.join(format!("{stem}.bin")))?))?;
    Ok(())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Serialize)]
struct Meta<'a> {
    task: &'a str,
    config_hash: &'a str,
    version: &'a str,
    started_unix: f64,
    finished_unix: f64,
    pass: bool,
}

/// Validates, runs `task`, and writes `<out>/<task>-<hash>/{report.json, meta.json, …}`.
pub fn run(task: Task, cfg: &RunConfig, out: &Path, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let started = unix_now();
    let v = cfg.validate().map_err(RunError::Config)?;
    let hash = config_hash(task, cfg, opts);
    let dir = out.join(format!("{}-{hash}", task.name()));
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    let report = dir.join("report.json");
    let pass = match task {
        Task::CheckWeights => {
            let r = check_weights(cfg, &v, opts)?;
            write_json(&report, &r)?;
            r.pass
        }
        Task::DeltaTest => {
            let r = delta_test(cfg, opts)?;
            write_json(&report, &r)?;
            r.pass
        }
        Task::Convergence => {
            let r = convergence(cfg, &v, opts)?;
            write_convergence_csv(&dir.join("convergence.csv"), &r)?;
            write_json(&report, &r)?;
            r.pass
        }
        Task::Solve => {
            let (u, r) = solve(cfg, &v, opts)?;
            write_field(&dir, "u", &u)?;
            write_json(&report, &r)?;
            r.pass
        }
        Task::MlSolve => {
            let (g, st) = ml_solve(cfg, &v, opts)?;
            write_field(&dir, "g", &g)?;
            write_json(&report, &st)?;
            st.pass
        }
        Task::VecSolve => {
            let (u, r) = vec_solve(cfg, &v, opts)?;
            u.write_csv(BufWriter::new(File::create(dir.join("u.csv"))?))?;
            write_json(&report, &r)?;
            r.pass
        }
    };
    let meta = Meta {
        task: task.name(),
        config_hash: &hash,
        version: env!("CARGO_PKG_VERSION"),
        started_unix: started,
        finished_unix: unix_now(),
        pass,
    };
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(RunOutcome { dir, report, pass })
}

fn spacing(cfg: &RunConfig, opts: &RunOptions) -> f64 {
    cfg.grid.h / 2f64.powi(opts.refine.unwrap_or(0) as i32)
}

fn main_grid(cfg: &RunConfig, v: &Validated, opts: &RunOptions) -> Result<Grid, RunError> {
    Ok(build_grid(v.rect, spacing(cfg, opts))?)
}

fn source_field(cfg: &RunConfig, grid: &Grid) -> Result<ScalarField, RunError> {
    Ok(ScalarField::from_fn(grid.clone(), |z| cfg.source.eval(z))?)
}

fn geometry(v: &Validated) -> DomainGeometry {
    DomainGeometry::new(v.exhaustion.clone(), v.maps.clone())
}

fn ml_settings(cfg: &RunConfig, v: &Validated) -> MlSettings {
    let s = &cfg.solver;
    MlSettings {
        levels: s.levels,
        damping: s.damping,
        hormander_degree: s.hormander_degree,
        correction: CorrectionOptions {
            degree_cap: s.degree_cap,
            derivative_cap: s.derivative_cap,
            poles: v.poles.clone(),
            check_level: None,
        },
        residual_tolerance: s.tolerances.residual,
        skip_precheck: false,
    }
}

/// Least-squares slope of ln y against ln x; None with fewer than two usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

// ---------------------------------------------------------------- check-weights

#[derive(Debug, Serialize)]
pub struct LevelChecks {
    pub n: usize,
    pub omega1: ConditionReport,
    pub omega2: ConditionReport,
    pub ru: RuReport,
    pub subharmonic: ConditionReport,
    pub bounds: Vec<BoundReport>,
}

#[derive(Debug, Serialize)]
pub struct CheckWeightsReport {
    pub condition_damping: Damping,
    pub levels: Vec<LevelChecks>,
    pub monotone: ConditionReport,
    pub collar: Option<CollarReport>,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// A node of Ω_{I₂(n)} near the origin and a point of X_{I₂(n)} at least d_X away.
fn cauchy_sample(geom: &DomainGeometry, n: usize, grid: &Grid) -> Option<(Complex64, Complex64)> {
    let exh = &geom.exhaustion;
    let i2 = geom.maps.i2(n);
    let z = grid
        .nodes()
        .filter(|&z| exh.membership(i2, z).unwrap_or(false))
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    let x_in = exh.x_region(&geom.maps, n).ok()?;
    let dx = geom.d_x(n).ok()?;
    for t in (1..4000).map(|k| k as f64 * 0.01) {
        for dir in [Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)] {
            let x = z + dir * t;
            if x_in(x) && (x - z).norm() >= dx {
                return Some((z, x));
            }
        }
    }
    None
}

pub fn check_weights(cfg: &RunConfig, v: &Validated, opts: &RunOptions) -> Result<CheckWeightsReport, RunError> {
    let grid = main_grid(cfg, v, opts)?;
    let geom = geometry(v);
    let w = &v.weights;
    let exh = &v.exhaustion;
    let maps = &v.maps;
    let mut notes = Vec::new();
    // exponential weights are checked with g = exp(-z²), whose closed-form bounds they need
    let damping = match w.kind {
        WeightKind::ExpPower { .. } => {
            notes.push("integral conditions checked with Gaussian damping".into());
            Damping::Gaussian
        }
        _ => cfg.solver.damping,
    };
    let coarse_h = (4.0 * grid.h).max(0.2);
    let coarse = build_grid(v.rect, coarse_h.min(v.rect.width().min(v.rect.height())))?;
    // the direct double sum of condition b) is quadratic in the node count
    // x samples and cell size of the K-integral sup; its cost is |x| · |K| / hq²
    let a3_x = build_grid(v.rect, 0.5f64.min(v.rect.width().min(v.rect.height())))?;
    let a3_hq = (2.0 * grid.h).max(0.1);
    let b_grid = build_grid(v.rect, (4.0 * grid.h).max(0.2))?;
    let mut levels = Vec::new();
    let top = cfg.solver.levels.max(exh.n0);
    for n in exh.n0..=top {
        let omega1 = check_omega1(w, &geom, n, None, &coarse)?;
        let omega2 = check_omega2(w, exh, maps, n, None, &grid)?;
        let ru = check_ru(w, exh, maps, n, (-1.0f64).exp(), &grid)?;
        let subharmonic = check_subharmonic(w, n, &grid, 1.0)?;
        let mut bounds = Vec::new();
        let fs = FundamentalSolution::for_level(damping, &geom, n)?;
        if let Some((z, x)) = cauchy_sample(&geom, n, &grid) {
            for k in 0..=3 {
                let mut r = cauchy_estimate_check(fs_ref(&fs), w, maps, x, MultiIndex::new(k, 0), MultiIndex::ZERO, z, 0.0)?;
                r.notes.push(format!("order {k} at z = {z}, x = {x}"));
                bounds.push(r);
            }
        } else {
            notes.push(format!("level {n}: no (z, x) sample pair inside the grid"));
        }
        let k_rect = ru
            .k_rect
            .or_else(|| exh.bounding_rect(n))
            .unwrap_or_else(|| Rect::centered_square(1.0).expect("unit square"));
        bounds.push(a3_bound(damping, w, exh, n, &k_rect, &a3_x, a3_hq)?);
        for pairing in [Pairing::Shallow, Pairing::Deep] {
            let mut r = b_bound(damping, w, exh, maps, n, pairing, &b_grid, 8)?;
            r.id = format!("A4/{pairing:?}").to_lowercase();
            bounds.push(r);
        }
        levels.push(LevelChecks {
            n,
            omega1,
            omega2,
            ru,
            subharmonic,
            bounds,
        });
    }
    let monotone = check_monotone(w, exh.n0..=top, &coarse);
    let collar = match exh.base() {
        Some(_) => Some(collar_check(exh, maps, exh.n0, v.rect, coarse.h)?),
        None => None,
    };
    let pass = levels.iter().all(|l| {
        l.omega1.pass && l.omega2.pass && l.ru.report.pass && l.subharmonic.pass && l.bounds.iter().all(|b| b.pass)
    }) && monotone.pass
        && collar.as_ref().is_none_or(|c| c.pass);
    Ok(CheckWeightsReport {
        condition_damping: damping,
        levels,
        monotone,
        collar,
        pass,
        notes,
    })
}

fn fs_ref(fs: &FundamentalSolution) -> &FundamentalSolution {
    fs
}

// ---------------------------------------------------------------- delta-test

#[derive(Debug, Serialize)]
pub struct DeltaRow {
    pub h: f64,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct DeltaReport {
    pub damping: Damping,
    pub rows: Vec<DeltaRow>,
    pub monotone: bool,
    pub slope: Option<f64>,
    pub min_pairwise_slope: Option<f64>,
    pub pass: bool,
}

/// Spacings of a study: the refinement list, or h·2^{-i} for i ≤ refine.
fn study_spacings(cfg: &RunConfig, opts: &RunOptions, default: &[f64]) -> Vec<f64> {
    match opts.refine {
        Some(k) => (0..=k).map(|i| cfg.grid.h / 2f64.powi(i as i32)).collect(),
        None if !cfg.grid.refinement.is_empty() => cfg.grid.refinement.clone(),
        None => default.to_vec(),
    }
}

/// Weak-delta residual of the unit bump (φ(0) = e⁻¹) on [-2, 2]² across spacings.
pub fn delta_test(cfg: &RunConfig, opts: &RunOptions) -> Result<DeltaReport, RunError> {
    let hs = match opts.refine {
        Some(_) => study_spacings(cfg, opts, &[]),
        None => vec![0.1, 0.05, 0.025],
    };
    let fs = FundamentalSolution::unbound(cfg.solver.damping, 1);
    let rect = Rect::centered_square(2.0)?;
    let mut rows = Vec::new();
    for &h in &hs {
        let g = build_grid(rect, h)?;
        let residual = weak_delta_residual(&fs, &Bump::unit(), Complex64::new(0.0, 0.0), &g)?;
        rows.push(DeltaRow { h, residual });
    }
    let monotone = rows.windows(2).all(|p| p[1].residual < p[0].residual);
    let xs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let slope = loglog_slope(&xs, &ys);
    let min_pairwise_slope = rows
        .windows(2)
        .filter_map(|p| loglog_slope(&[p[0].h, p[1].h], &[p[0].residual, p[1].residual]))
        .reduce(f64::min);
    let last = rows.last().map_or(f64::INFINITY, |r| r.residual);
    let pass = monotone
        && min_pairwise_slope.is_some_and(|s| s >= 0.9)
        && last < cfg.solver.tolerances.residual;
    Ok(DeltaReport {
        damping: cfg.solver.damping,
        rows,
        monotone,
        slope,
        min_pairwise_slope,
        pass,
    })
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub residual: f64,
    pub sh_error: f64,
}

#[derive(Debug, Serialize)]
pub struct ConvergenceReport {
    pub level: usize,
    pub rows: Vec<ConvergenceRow>,
    pub residual_slope: Option<f64>,
    pub sh_slope: Option<f64>,
    pub slope_window: [f64; 2],
    pub reference_h: f64,
    pub residual_pass: bool,
    pub sh_pass: bool,
    pub pass: bool,
}

/// S_h of a fixed bump against a fine-grid transform, at 5 × 5 nodes off its support.
pub fn sh_error(damping: Damping, h: f64, reference: &ScalarField, out: &Grid) -> Result<f64, RunError> {
    let (chi, support) = sh_density();
    let fs = FundamentalSolution::unbound(damping, 1);
    let lattice = build_grid(support, h.min(support.width()))?;
    let psi = ScalarField::from_analytic(lattice, std::sync::Arc::new(chi))?;
    let s = riemann_sum_sh(&fs, &psi, h, out)?;
    Ok(s.max_diff(reference)?)
}

/// The density of the S_h study and a rectangle holding its support.
pub fn sh_density() -> (Bump, Rect) {
    let chi = Bump::new(Complex64::new(0.3, -0.2), 1.5);
    (chi, Rect::from_bounds(-1.25, -1.75, 1.85, 1.35).expect("valid rectangle"))
}

/// Output nodes of the S_h study, 1.2 to 2.2 units off the support.
pub fn sh_out_grid() -> Grid {
    build_grid(Rect::from_bounds(3.0, -0.7, 4.0, 0.3).expect("valid rectangle"), 0.25).expect("valid grid")
}

/// T_E ∗ ψ for the S_h density on a grid of spacing `h_ref`.
pub fn sh_reference(damping: Damping, h_ref: f64, out: &Grid) -> Result<ScalarField, RunError> {
    let (chi, support) = sh_density();
    let fine = build_grid(support, h_ref)?;
    let psi = ScalarField::from_fn(fine, |z| dbar_core::field::AnalyticField::value(&chi, z))?;
    Ok(cauchy_transform(&FundamentalSolution::unbound(damping, 1), &psi, out)?)
}

pub fn convergence(cfg: &RunConfig, v: &Validated, opts: &RunOptions) -> Result<ConvergenceReport, RunError> {
    let hs = study_spacings(cfg, opts, &[0.2, 0.1, 0.05]);
    let geom = geometry(v);
    let n = cfg.solver.level;
    let out = sh_out_grid();
    let h_min = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let reference_h = h_min / 4.0;
    let reference = sh_reference(cfg.solver.damping, reference_h, &out)?;
    let mut rows = Vec::new();
    for &h in &hs {
        let g = build_grid(v.rect, h)?;
        let f = source_field(cfg, &g)?;
        let ct = CauchyTransform::new(FundamentalSolution::unbound(cfg.solver.damping, n), g.clone());
        let (_, rep) = local_solve_with(&f, n, &v.weights, &geom, &ct)?;
        rows.push(ConvergenceRow {
            h,
            residual: rep.residual,
            sh_error: sh_error(cfg.solver.damping, h, &reference, &out)?,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let residual_slope = loglog_slope(&xs, &rows.iter().map(|r| r.residual).collect::<Vec<_>>());
    let sh_slope = loglog_slope(&xs, &rows.iter().map(|r| r.sh_error).collect::<Vec<_>>());
    let window = cfg.solver.tolerances.slope_window;
    let residual_pass = rows.iter().all(|r| r.residual <= cfg.solver.tolerances.residual);
    let sh_pass = sh_slope.is_some_and(|s| s >= window[0] && s <= window[1]);
    Ok(ConvergenceReport {
        level: n,
        rows,
        residual_slope,
        sh_slope,
        slope_window: window,
        reference_h,
        residual_pass,
        sh_pass,
        pass: residual_pass && sh_pass,
    })
}

fn write_convergence_csv(path: &Path, r: &ConvergenceReport) -> Result<(), RunError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "h,residual,Sh_error,residual_slope,Sh_slope")?;
    for (i, row) in r.rows.iter().enumerate() {
        let pair = |a: f64, b: f64, c: f64, d: f64| {
            loglog_slope(&[a, b], &[c, d]).map_or(String::new(), |s| format!("{s:.6}"))
        };
        let (rs, ss) = if i == 0 {
            (String::new(), String::new())
        } else {
            let p = &r.rows[i - 1];
            (
                pair(p.h, row.h, p.residual, row.residual),
                pair(p.h, row.h, p.sh_error, row.sh_error),
            )
        };
        writeln!(w, "{},{:e},{:e},{rs},{ss}", row.h, row.residual, row.sh_error)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Serialize)]
pub struct SolveTaskReport {
    pub level: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub local: Option<LocalSolveReport>,
    pub hormander_solve: Option<SolveReport>,
    pub hormander: Option<HormanderReport>,
    pub chain: Option<ChainReport>,
    pub pass: bool,
}

pub fn solve(cfg: &RunConfig, v: &Validated, opts: &RunOptions) -> Result<(ScalarField, SolveTaskReport), RunError> {
    let grid = main_grid(cfg, v, opts)?;
    let f = source_field(cfg, &grid)?;
    let geom = geometry(v);
    let n = cfg.solver.level;
    let ct = CauchyTransform::new(FundamentalSolution::unbound(cfg.solver.damping, n), grid.clone());
    let tol = cfg.solver.tolerances.residual;
    if v.weights.is_constant() {
        let (u, rep) = local_solve_with(&f, n, &v.weights, &geom, &ct)?;
        let report = SolveTaskReport {
            level: n,
            residual: rep.residual,
            tolerance: tol,
            pass: rep.residual <= tol,
            local: Some(rep),
            hormander_solve: None,
            hormander: None,
            chain: None,
        };
        return Ok((u, report));
    }
    let problem = WeightedL2Problem::new(
        n,
        v.weights.clone(),
        v.exhaustion.clone(),
        &v.maps,
        cfg.solver.hormander_degree,
    )?;
    let (u, srep) = minimal_norm_solve(&problem, &f, &geom, &ct)?;
    let slack = cfg.solver.tolerances.hormander_slack;
    let h = hormander_inequality_check(&u, &f, &problem, Some(&srep), slack)?;
    let chain = omega2_chain_check(&u, &f, &problem, &v.maps, slack)?;
    let residual = weighted_residual(&u, &f, &v.weights, &v.exhaustion, n)?;
    let report = SolveTaskReport {
        level: n,
        residual,
        tolerance: tol,
        pass: residual <= tol && h.pass && chain.pass,
        local: None,
        hormander_solve: Some(srep),
        hormander: Some(h),
        chain: Some(chain),
    };
    Ok((u, report))
}

// ---------------------------------------------------------------- ml-solve

pub fn ml_solve(cfg: &RunConfig, v: &Validated, opts: &RunOptions) -> Result<(ScalarField, MlState), RunError> {
    let grid = main_grid(cfg, v, opts)?;
    let f = source_field(cfg, &grid)?;
    Ok(global_solve(&f, &v.weights, &geometry(v), &ml_settings(cfg, v))?)
}

// ---------------------------------------------------------------- vec-solve

#[derive(Debug, Serialize)]
pub struct LinearityRow {
    pub component: usize,
    pub reference: usize,
    pub factor: [f64; 2],
    pub relative_discrepancy: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct VecSolveReport {
    pub k: usize,
    pub states: Vec<MlState>,
    pub linearity: Vec<LinearityRow>,
    pub pass: bool,
}

/// Relative tolerance of the componentwise linearity law.
pub const LINEARITY_TOLERANCE: f64 = 1e-9;

pub fn vec_solve(cfg: &RunConfig, v: &Validated, opts: &RunOptions) -> Result<(VectorField, VecSolveReport), RunError> {
    let grid = main_grid(cfg, v, opts)?;
    let specs = cfg.vector_sources();
    let comps = specs
        .iter()
        .map(|s| ScalarField::from_fn(grid.clone(), |z| s.eval(z)))
        .collect::<Result<Vec<_>, _>>()?;
    let field = VectorField::new(comps)?;
    let (u, states) = ml_componentwise(&field, &v.weights, &geometry(v), &ml_settings(cfg, v))?;
    let mut linearity = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        // pair each component with the first earlier one of the same kind
        let Some(j) = (0..i).find(|&j| specs[j].kind == s.kind && specs[j].sigma2 == s.sigma2) else {
            continue;
        };
        let base = specs[j].scale();
        if base.norm() == 0.0 {
            continue;
        }
        let c = s.scale() / base;
        let d = linearity_discrepancy(&u.components[j], &u.components[i], c)?;
        linearity.push(LinearityRow {
            component: i,
            reference: j,
            factor: [c.re, c.im],
            relative_discrepancy: d,
            pass: d < LINEARITY_TOLERANCE,
        });
    }
    let pass = states.iter().all(|s| s.pass) && linearity.iter().all(|r| r.pass);
    let report = VecSolveReport {
        k: u.k(),
        states,
        linearity,
        pass,
    };
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[0.1], &[1.0]).is_none());
    }

    #[test]
    fn hash_depends_on_task_and_config() {
        let a = crate::presets::ex48a();
        let b = crate::presets::ex48b();
        let o = RunOptions::default();
        assert_ne!(config_hash(Task::Solve, &a, &o), config_hash(Task::Solve, &b, &o));
        assert_ne!(config_hash(Task::Solve, &a, &o), config_hash(Task::MlSolve, &a, &o));
        assert_eq!(config_hash(Task::Solve, &a, &o).len(), 12);
    }
}
