//! Acceptance criteria; prints one PASS/FAIL line per criterion and fails if any criterion does.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use dbar_cli::config::{RunConfig, SourceKind, SourceSpec};
use dbar_cli::presets::{ex48a, ex48b};
use dbar_cli::run::{self, loglog_slope, RunOptions, Task};
use dbar_core::calculus::{equivalence_probe, DerivativeTable};
use dbar_core::domain::{build_grid, DomainGeometry, Grid};
use dbar_core::field::{AnalyticField, ScalarField};
use dbar_core::fundsol::{a3_bound, Damping, FundamentalSolution};
use dbar_core::hormander::{hormander_inequality_check, minimal_norm_solve, WeightedL2Problem};
use dbar_core::oracle::{holomorphic_suite, test_field_suite, Elementary};
use dbar_core::transform::{weighted_residual, CauchyTransform};
use dbar_core::weights::{check_ru, WeightKind};

fn report(k: usize, pass: bool, elapsed: Duration, budget: Duration, detail: String) -> bool {
    let ok = pass && elapsed <= budget;
    println!(
        "criterion {k}: {} ({detail}; {:.1}s of {:.0}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    ok
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn sample(grid: &Grid, f: Arc<dyn AnalyticField>) -> ScalarField {
    // plain node values, so no oracle partials leak into the residuals
    let values = ScalarField::from_analytic(grid.clone(), f).unwrap().values;
    ScalarField::new(grid.clone(), values).unwrap()
}

fn criterion_1_weak_delta() -> bool {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for damping in [Damping::Gaussian, Damping::One] {
        let mut cfg = ex48b();
        cfg.solver.damping = damping;
        cfg.solver.tolerances.residual = 5e-2;
        let r = run::delta_test(&cfg, &RunOptions::default()).unwrap();
        let hs: Vec<f64> = r.rows.iter().map(|r| r.h).collect();
        assert_eq!(hs, vec![0.1, 0.05, 0.025]);
        pass &= r.pass;
        detail.push(format!(
            "{damping:?}: residuals {:?}, min slope {:.2}",
            r.rows.iter().map(|r| format!("{:.2e}", r.residual)).collect::<Vec<_>>(),
            r.min_pairwise_slope.unwrap_or(f64::NAN)
        ));
    }
    report(1, pass, t.elapsed(), secs(30), detail.join("; "))
}

fn criterion_2_exact_solution_oracles() -> bool {
    let t = Instant::now();
    let cfg = ex48b();
    let v = cfg.validate().unwrap();
    let grid = build_grid(v.rect, 0.05).unwrap();
    let zero = ScalarField::zeros(grid.clone());
    let n = 2;
    // the weighted ∂̄ residual of exactly holomorphic fields is pure discretisation error
    let floor = holomorphic_suite()
        .into_iter()
        .map(|p| weighted_residual(&sample(&grid, p), &zero, &v.weights, &v.exhaustion, n).unwrap())
        .fold(0.0, f64::max);
    let mut pass = true;
    let mut detail = vec![format!("floor {floor:.2e}")];
    for (kind, exact) in [(SourceKind::One, Elementary::Conj), (SourceKind::Z, Elementary::AbsSquared)] {
        let mut c = cfg.clone();
        c.solver.levels = n;
        c.source = SourceSpec::new(kind);
        let (u, state) = run::ml_solve(&c, &v, &RunOptions::default()).unwrap();
        let d = u.sub(&sample(&grid, Arc::new(exact))).unwrap();
        let r = weighted_residual(&d, &zero, &v.weights, &v.exhaustion, n).unwrap();
        pass &= state.pass && r < 10.0 * floor;
        detail.push(format!("u - {}: {r:.2e}", exact.name()));
    }
    report(2, pass, t.elapsed(), secs(60), detail.join(", "))
}

fn criterion_3_sh_rate() -> bool {
    let t = Instant::now();
    let hs = [0.2, 0.1, 0.05, 0.025];
    let out = run::sh_out_grid();
    let reference = run::sh_reference(Damping::One, 0.025 / 4.0, &out).unwrap();
    let errors: Vec<f64> = hs
        .iter()
        .map(|&h| run::sh_error(Damping::One, h, &reference, &out).unwrap())
        .collect();
    let slope = loglog_slope(&hs, &errors).unwrap();
    let pass = (0.8..=1.2).contains(&slope);
    let detail = format!(
        "errors {:?}, slope {slope:.2}, window [0.8, 1.2]",
        errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
    );
    report(3, pass, t.elapsed(), secs(60), detail)
}

fn criterion_4_hormander_inequality() -> bool {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, cfg) in [("ex48a", ex48a()), ("ex48b", ex48b())] {
        let v = cfg.validate().unwrap();
        let grid = build_grid(v.rect, cfg.grid.h).unwrap();
        let f = ScalarField::from_fn(grid.clone(), |z| cfg.source.eval(z)).unwrap();
        let geom = DomainGeometry::new(v.exhaustion.clone(), v.maps.clone());
        let problem = WeightedL2Problem::new(1, v.weights.clone(), v.exhaustion.clone(), &v.maps, 8).unwrap();
        let ct = CauchyTransform::new(FundamentalSolution::unbound(cfg.solver.damping, 1), grid);
        let (u, solve) = minimal_norm_solve(&problem, &f, &geom, &ct).unwrap();
        let h = hormander_inequality_check(&u, &f, &problem, Some(&solve), 0.1).unwrap();
        pass &= h.degree == 8 && h.lhs <= h.rhs * 1.1;
        detail.push(format!("{name}: lhs {:.3} rhs {:.3} degree {}", h.lhs, h.rhs, h.degree));
    }
    report(4, pass, t.elapsed(), secs(60), detail.join(", "))
}

fn criterion_5_mittag_leffler_schedule() -> bool {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, mut cfg) in [("ex48a", ex48a()), ("ex48b", ex48b())] {
        cfg.solver.levels = 3;
        cfg.solver.tolerances.residual = 5e-2;
        let v = cfg.validate().unwrap();
        let (_, st) = run::ml_solve(&cfg, &v, &RunOptions::default()).unwrap();
        let gaps_ok = st.gaps.iter().all(|g| g.gap <= 0.5f64.powi(g.j as i32));
        let tele_ok = !st.telescope.is_empty() && st.telescope.iter().all(|r| r.value < 0.5f64.powi(r.k as i32));
        pass &= gaps_ok && tele_ok && st.final_residual < 5e-2;
        detail.push(format!(
            "{name}: gaps {:?}, final {:.2e}, {} telescope pairs",
            st.gaps.iter().map(|g| format!("{:.1e}", g.gap)).collect::<Vec<_>>(),
            st.final_residual,
            st.telescope.len()
        ));
    }
    report(5, pass, t.elapsed(), secs(300), detail.join("; "))
}

fn criterion_6_closed_forms() -> bool {
    let t = Instant::now();
    let cfg = ex48a();
    let v = cfg.validate().unwrap();
    let grid = build_grid(v.rect, 0.05).unwrap();
    let x_grid = build_grid(v.rect, 0.5).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    let WeightKind::ExpPower { a, gamma } = &v.weights.kind else {
        panic!("ex48a has exponential weights")
    };
    for n in 1..=2 {
        let ru = check_ru(&v.weights, &v.exhaustion, &v.maps, n, (-1.0f64).exp(), &grid).unwrap();
        // (ln ε / (a_n - a_{n+1}))^{1/γ} + n with ε = e⁻¹, a_n = -1/n
        let a_n = -1.0 / n as f64;
        let a_next = -1.0 / (n + 1) as f64;
        assert_eq!(a.a(n), a_n);
        let expected = (-1.0 / (a_n - a_next)).powf(1.0 / gamma) + n as f64;
        let hw = ru.half_width.unwrap();
        pass &= (hw - expected).abs() <= 1e-12 * expected;
        if n == 1 {
            pass &= hw == 3.0;
        }
        detail.push(format!("half-width(n={n}) {hw}"));
        let k = ru.k_rect.unwrap();
        for damping in [Damping::One, Damping::Gaussian] {
            let b = a3_bound(damping, &v.weights, &v.exhaustion, n, &k, &x_grid, 0.1).unwrap();
            pass &= b.slack == 0.0 && b.numeric <= b.analytic;
            detail.push(format!("A3 {damping:?} n={n}: {:.3e} <= {:.3e}", b.numeric, b.analytic));
        }
    }
    report(6, pass, t.elapsed(), secs(30), detail.join(", "))
}

fn criterion_7_seminorm_equivalence() -> bool {
    let t = Instant::now();
    let mut pass = true;
    let mut rows = 0;
    let mut worst: f64 = 0.0;
    for cfg in [ex48a(), ex48b()] {
        let v = cfg.validate().unwrap();
        let grid = build_grid(v.rect, 0.1).unwrap();
        for f in test_field_suite() {
            let table = DerivativeTable::new(&ScalarField::from_analytic(grid.clone(), f).unwrap(), 2).unwrap();
            let r = equivalence_probe(&table, &v.weights, &v.exhaustion, &v.maps, &[1, 2, 3], &[0, 1, 2], &[1, 2]).unwrap();
            pass &= r.pass && r.rows.len() == 18;
            rows += r.rows.len();
            worst = r.rows.iter().map(|row| row.lhs / row.rhs).fold(worst, f64::max);
        }
    }
    report(7, pass, t.elapsed(), secs(60), format!("{rows} rows, max lhs/rhs {worst:.3e}"))
}

fn criterion_8_vector_consistency() -> bool {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, cfg) in [("ex48a", ex48a()), ("ex48b", ex48b())] {
        let v = cfg.validate().unwrap();
        let (u, r) = run::vec_solve(&cfg, &v, &RunOptions::default()).unwrap();
        let worst = r.linearity.iter().map(|l| l.relative_discrepancy).fold(0.0, f64::max);
        pass &= u.k() == 2 && r.linearity.len() == 1 && worst < 1e-9;
        detail.push(format!("{name}: {worst:.1e}"));
    }
    report(8, pass, t.elapsed(), secs(120), detail.join(", "))
}

fn criterion_9_determinism() -> bool {
    let t = Instant::now();
    let cfg: RunConfig = ex48b();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run::run(Task::MlSolve, &cfg, a.path(), &RunOptions::default()).unwrap();
    let rb = run::run(Task::MlSolve, &cfg, b.path(), &RunOptions::default()).unwrap();
    let bytes_a = std::fs::read(&ra.report).unwrap();
    let bytes_b = std::fs::read(&rb.report).unwrap();
    let same_name = ra.dir.file_name() == rb.dir.file_name();
    let pass = same_name && !bytes_a.is_empty() && bytes_a == bytes_b;
    report(9, pass, t.elapsed(), secs(120), format!("{} report bytes", bytes_a.len()))
}

fn main() {
    let z = Complex64::new(0.7, -1.3);
    assert_eq!(SourceSpec::new(SourceKind::One).eval(z), Complex64::new(1.0, 0.0));
    assert_eq!(SourceSpec::new(SourceKind::Z).eval(z), z);
    let criteria: [fn() -> bool; 9] = [
        criterion_1_weak_delta,
        criterion_2_exact_solution_oracles,
        criterion_3_sh_rate,
        criterion_4_hormander_inequality,
        criterion_5_mittag_leffler_schedule,
        criterion_6_closed_forms,
        criterion_7_seminorm_equivalence,
        criterion_8_vector_consistency,
        criterion_9_determinism,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
