//! Weight families ν_n, the auxiliary ψ, index maps, and the weight-condition checkers.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::{ComplexPoint, DomainGeometry, Exhaustion, Grid, Rect};
use crate::error::{arg, Error, Result};

/// One index map n ↦ J(n) or n ↦ I(n).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IndexMap {
    /// n ↦ 2n.
    Doubling,
    /// n ↦ scale·n + offset.
    Affine { scale: usize, offset: usize },
    /// n ↦ table[n - 1]; past the end the last value is continued with slope one.
    Table(Vec<usize>),
}

impl IndexMap {
    pub fn apply(&self, n: usize) -> usize {
        match self {
            IndexMap::Doubling => 2 * n,
            IndexMap::Affine { scale, offset } => scale * n + offset,
            IndexMap::Table(t) => {
                if n >= 1 && n <= t.len() {
                    t[n - 1]
                } else if n == 0 {
                    t.first().copied().unwrap_or(1).saturating_sub(1)
                } else {
                    t[t.len() - 1] + (n - t.len())
                }
            }
        }
    }
}

/// The maps J₁, J₂ of the weight condition and I₁, I₂, I₄ of the support condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexMaps {
    pub j1: IndexMap,
    pub j2: IndexMap,
    pub i1: IndexMap,
    pub i2: IndexMap,
    pub i4: IndexMap,
}

/// Range of n over which the index-map hypotheses are sampled.
pub const INDEX_CHECK_RANGE: usize = 64;

impl IndexMaps {
    pub fn doubling() -> Self {
        Self::uniform(IndexMap::Doubling)
    }

    pub fn uniform(map: IndexMap) -> Self {
        Self {
            j1: map.clone(),
            j2: map.clone(),
            i1: map.clone(),
            i2: map.clone(),
            i4: map,
        }
    }

    /// Checks J(n) ≥ n, I(n) > n and I₂₁₄(n) ≥ I₁₄(n+1) for n ≤ [`INDEX_CHECK_RANGE`].
    pub fn validate(&self) -> Result<()> {
        for n in 1..=INDEX_CHECK_RANGE {
            for (name, m) in [("J1", &self.j1), ("J2", &self.j2)] {
                if m.apply(n) < n {
                    return arg(format!("{name}({n}) = {} < {n}", m.apply(n)));
                }
            }
            for (name, m) in [("I1", &self.i1), ("I2", &self.i2), ("I4", &self.i4)] {
                if m.apply(n) <= n {
                    return arg(format!("{name}({n}) = {} must exceed {n}", m.apply(n)));
                }
            }
            if self.i214(n) < self.i14(n + 1) {
                return arg(format!(
                    "I214({n}) = {} < I14({}) = {}",
                    self.i214(n),
                    n + 1,
                    self.i14(n + 1)
                ));
            }
        }
        Ok(())
    }

    pub fn j1(&self, n: usize) -> usize {
        self.j1.apply(n)
    }
    pub fn j2(&self, n: usize) -> usize {
        self.j2.apply(n)
    }
    pub fn i1(&self, n: usize) -> usize {
        self.i1.apply(n)
    }
    pub fn i2(&self, n: usize) -> usize {
        self.i2.apply(n)
    }
    pub fn i4(&self, n: usize) -> usize {
        self.i4.apply(n)
    }
    /// J₁₁ = J₁ ∘ J₁.
    pub fn j11(&self, n: usize) -> usize {
        self.j1(self.j1(n))
    }
    /// I₁₄ = I₁ ∘ I₄.
    pub fn i14(&self, n: usize) -> usize {
        self.i1(self.i4(n))
    }
    /// I₂₁₄ = I₂ ∘ I₁₄.
    pub fn i214(&self, n: usize) -> usize {
        self.i2(self.i14(n))
    }
    /// Level of the weighted L² problem attached to n: J₂(2·J₁₁(n)).
    pub fn hormander_level(&self, n: usize) -> usize {
        self.j2(2 * self.j11(n))
    }
}

/// Coefficients a_n of an exponential weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    /// a_n = -1/n.
    NegReciprocal,
    /// a_n = list[n - 1]; the last value is held past the end.
    Explicit(Vec<f64>),
}

impl Coefficients {
    pub fn a(&self, n: usize) -> f64 {
        match self {
            Coefficients::NegReciprocal => -1.0 / n.max(1) as f64,
            Coefficients::Explicit(v) => v[(n.max(1) - 1).min(v.len() - 1)],
        }
    }
}

/// Evaluator `(n, z) ↦ ln ν_n(z)` for weights outside the built-in families.
pub type LogWeightFn = Arc<dyn Fn(usize, Complex64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum WeightKind {
    /// ν_n(z) = exp(a_n |z|^γ).
    ExpPower { a: Coefficients, gamma: f64 },
    /// ν_n ≡ 1.
    ConstantOne,
    /// Arbitrary positive weight given through its logarithm.
    Custom { name: String, log_weight: LogWeightFn },
}

impl fmt::Debug for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::ExpPower { a, gamma } => f
                .debug_struct("ExpPower")
                .field("a", a)
                .field("gamma", gamma)
                .finish(),
            WeightKind::ConstantOne => f.write_str("ConstantOne"),
            WeightKind::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish_non_exhaustive(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightFamily {
    pub kind: WeightKind,
    /// Integrability exponent of the (ω.2)^q condition.
    pub q: usize,
}

impl WeightFamily {
    pub fn exp_power(a: Coefficients, gamma: f64, q: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Admissibility(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if let Coefficients::Explicit(v) = &a {
            if v.is_empty() {
                return Err(Error::Admissibility("coefficient list is empty".into()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Admissibility("coefficients must be finite".into()));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Admissibility("coefficients must be strictly increasing".into()));
            }
            let all_nonpos = v.iter().all(|&x| x <= 0.0);
            let all_nonneg = v.iter().all(|&x| x >= 0.0);
            if !(all_nonpos || all_nonneg) {
                return Err(Error::Admissibility("coefficients must not change sign".into()));
            }
        }
        Self::with_q(WeightKind::ExpPower { a, gamma }, q)
    }

    pub fn constant_one(q: usize) -> Result<Self> {
        Self::with_q(WeightKind::ConstantOne, q)
    }

    pub fn custom(name: impl Into<String>, log_weight: LogWeightFn, q: usize) -> Result<Self> {
        Self::with_q(
            WeightKind::Custom {
                name: name.into(),
                log_weight,
            },
            q,
        )
    }

    fn with_q(kind: WeightKind, q: usize) -> Result<Self> {
        if q == 0 {
            return arg("q must be at least 1");
        }
        Ok(Self { kind, q })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, WeightKind::ConstantOne)
    }

    /// ln ν_n(z), computed without forming ν_n.
    pub fn ln_weight(&self, n: usize, z: Complex64) -> f64 {
        match &self.kind {
            WeightKind::ExpPower { a, gamma } => a.a(n) * z.norm().powf(*gamma),
            WeightKind::ConstantOne => 0.0,
            WeightKind::Custom { log_weight, .. } => log_weight(n, z),
        }
    }

    /// ν_n(z).
    pub fn eval(&self, n: usize, z: Complex64) -> f64 {
        self.ln_weight(n, z).exp()
    }
}

/// ν_n(z) at a checked point.
pub fn eval_weight(w: &WeightFamily, n: usize, z: ComplexPoint) -> Result<f64> {
    if n == 0 {
        return arg("weight index must be at least 1");
    }
    Ok(w.eval(n, z.to_c64()))
}

/// ψ(z) = (1 + |z|²)^(-2).
pub fn psi(z: Complex64) -> f64 {
    let s = 1.0 + z.norm_sqr();
    1.0 / (s * s)
}

/// A named scalar in a report; kept as an ordered list for byte-stable output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// Outcome of one condition check. `pass == false` always carries a witness.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub n: usize,
    pub pass: bool,
    pub constants: Vec<NamedValue>,
    pub witnesses: Vec<ComplexPoint>,
    pub resolution: f64,
    pub notes: Vec<String>,
}

const MAX_WITNESSES: usize = 16;

impl ConditionReport {
    fn new(condition: &str, n: usize, resolution: f64) -> Self {
        Self {
            condition: condition.to_string(),
            n,
            pass: true,
            constants: Vec::new(),
            witnesses: Vec::new(),
            resolution,
            notes: Vec::new(),
        }
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    fn set(&mut self, name: &str, value: f64) {
        self.constants.push(NamedValue {
            name: name.to_string(),
            value,
        });
    }

    fn fail_at(&mut self, z: Complex64) {
        self.pass = false;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(ComplexPoint { re: z.re, im: z.im });
        }
    }
}

/// Sub-grid refinement inside each ρ-ball of the (ω.1) check.
pub const OMEGA1_REFINEMENT: usize = 4;

/// sup ν_n / inf ν_{J₁(n)} over the ‖·‖∞-ball of radius `rho` around `x`.
pub fn omega1_ratio(w: &WeightFamily, maps: &IndexMaps, n: usize, x: Complex64, rho: f64, refinement: usize) -> f64 {
    let j = maps.j1(n);
    let steps = refinement as isize;
    let dh = rho / refinement as f64;
    let mut sup_ln = f64::NEG_INFINITY;
    let mut inf_ln = f64::INFINITY;
    for a in -steps..=steps {
        for b in -steps..=steps {
            let z = x + Complex64::new(a as f64 * dh, b as f64 * dh);
            sup_ln = sup_ln.max(w.ln_weight(n, z));
            inf_ln = inf_ln.min(w.ln_weight(j, z));
        }
    }
    (sup_ln - inf_ln).exp()
}

/// (ω.1): estimates C₁(n) over the Ω_k nodes of `grid` (k defaults to n).
pub fn check_omega1(
    w: &WeightFamily,
    geom: &DomainGeometry,
    n: usize,
    k: Option<usize>,
    grid: &Grid,
) -> Result<ConditionReport> {
    let k = k.unwrap_or(n);
    let exh = &geom.exhaustion;
    let mask = exh.mask(k, grid)?;
    let rho = geom.rho(k)?;
    let mut rep = ConditionReport::new("omega1", n, rho / OMEGA1_REFINEMENT as f64);
    let mut c1: f64 = 0.0;
    let mut count = 0usize;
    let mut argmax = Complex64::new(0.0, 0.0);
    for (idx, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        count += 1;
        let x = grid.node_at(idx);
        let r = omega1_ratio(w, &geom.maps, n, x, rho, OMEGA1_REFINEMENT);
        if !r.is_finite() {
            rep.fail_at(x);
        } else if r > c1 {
            c1 = r;
            argmax = x;
        }
    }
    if count == 0 {
        return Err(Error::EmptySample(format!("no grid node lies in Ω_{k}")));
    }
    rep.set("C1", c1);
    rep.set("rho", rho);
    rep.set("k", k as f64);
    rep.notes.push(format!("C1 attained at ({:.6}, {:.6})", argmax.re, argmax.im));
    Ok(rep)
}

/// Whether sup over the unsampled part of Ω_k of ν_n / (ψ ν_{J₂(n)}) is finite.
fn omega2_tail_finite(w: &WeightFamily, exh: &Exhaustion, maps: &IndexMaps, n: usize) -> Option<bool> {
    if exh.levels_bounded() {
        return Some(true);
    }
    match &w.kind {
        WeightKind::ConstantOne => Some(false),
        // exp((a_n - a_J)|z|^γ)(1+|z|²)² is bounded iff a_n < a_J
        WeightKind::ExpPower { a, .. } => Some(a.a(n) < a.a(maps.j2(n))),
        WeightKind::Custom { .. } => None,
    }
}

/// (ω.2)^q: estimates C₂(n) as the sup of ν_n/(ψ ν_{J₂(n)}) over the Ω_k nodes.
pub fn check_omega2(
    w: &WeightFamily,
    exh: &Exhaustion,
    maps: &IndexMaps,
    n: usize,
    k: Option<usize>,
    grid: &Grid,
) -> Result<ConditionReport> {
    let k = k.unwrap_or(n);
    let q = w.q as i32;
    let mask = exh.mask(k, grid)?;
    let j = maps.j2(n);
    let mut rep = ConditionReport::new("omega2", n, grid.h);
    let mut c2: f64 = 0.0;
    let mut psi_q = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut count = 0usize;
    for (idx, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        count += 1;
        let z = grid.node_at(idx);
        let ratio = (w.ln_weight(n, z) - w.ln_weight(j, z)).exp() / psi(z);
        if !ratio.is_finite() {
            rep.fail_at(z);
        }
        c2 = c2.max(ratio);
        psi_q += psi(z).powi(q);
        max_abs = max_abs.max(z.norm());
    }
    if count == 0 {
        return Err(Error::EmptySample(format!("no grid node lies in Ω_{k}")));
    }
    let psi_norm = (psi_q * grid.cell_area()).powf(1.0 / q as f64);
    rep.set("C2", c2);
    rep.set("psi_Lq", psi_norm);
    rep.set("psi_Lq_plane", (std::f64::consts::PI / (2 * w.q - 1) as f64).powf(1.0 / q as f64));
    rep.set("k", k as f64);
    if w.is_constant() {
        let s = 1.0 + max_abs * max_abs;
        rep.set("C2_sampled_closed_form", s * s);
    }
    match omega2_tail_finite(w, exh, maps, n) {
        Some(true) => {}
        Some(false) => {
            // a far point of Ω_k on the real axis demonstrates growth of the ratio
            let far = Complex64::new(grid.rect.hi.re.abs().max(grid.rect.lo.re.abs()) * 4.0 + 1.0, 0.0);
            rep.notes.push("ratio unbounded on the unsampled part of Ω_k".into());
            rep.fail_at(far);
        }
        None => rep.notes.push("tail of Ω_k outside the grid not analysed for custom weights".into()),
    }
    Ok(rep)
}

/// The compact set K of condition a)(i) together with its check.
#[derive(Debug, Clone, Serialize)]
pub struct RuReport {
    pub report: ConditionReport,
    /// |Re z| bound of K for exponential weights.
    pub half_width: Option<f64>,
    /// Bounding rectangle of K, when K is compact.
    pub k_rect: Option<Rect>,
}

/// Half-width max(0, ln ε / (a_n - a_{I₁(n)}))^{1/γ} + n of the explicit K.
pub fn ru_half_width(a_n: f64, a_i: f64, gamma: f64, eps: f64, n: usize) -> f64 {
    let t = (eps.ln() / (a_n - a_i)).max(0.0);
    t.powf(1.0 / gamma) + n as f64
}

/// Condition a)(i): ν_n ≤ ε ν_{I₁(n)} on Ω_n \ K.
pub fn check_ru(
    w: &WeightFamily,
    exh: &Exhaustion,
    maps: &IndexMaps,
    n: usize,
    eps: f64,
    grid: &Grid,
) -> Result<RuReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return arg(format!("epsilon must be positive, got {eps}"));
    }
    let mask = exh.mask(n, grid)?;
    let i1 = maps.i1(n);
    let mut rep = ConditionReport::new("ru", n, grid.h);
    let bbox = exh.bounding_rect(n);
    let (half_width, k_rect, in_k): (Option<f64>, Option<Rect>, Box<dyn Fn(Complex64) -> bool>) = match &w.kind {
        WeightKind::ExpPower { a, gamma } => {
            let (an, ai) = (a.a(n), a.a(i1));
            if an >= ai {
                rep.notes.push(format!("a_n = {an} is not below a_I1(n) = {ai}"));
            }
            let hw = ru_half_width(an, ai, *gamma, eps, n);
            let ext = bbox.map(|b| b.hi.im.abs().max(b.lo.im.abs())).unwrap_or(n as f64);
            let rect = Rect::from_bounds(-hw, -ext, hw, ext).ok();
            (Some(hw), rect, Box::new(move |z: Complex64| z.re.abs() <= hw))
        }
        _ => match bbox {
            Some(b) => (None, Some(b), Box::new(|_| true)),
            None => (None, None, Box::new(|_| false)),
        },
    };
    if let Some(hw) = half_width {
        rep.set("half_width", hw);
    }
    let mut worst: f64 = 0.0;
    for (idx, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let z = grid.node_at(idx);
        if in_k(z) {
            continue;
        }
        let ratio = (w.ln_weight(n, z) - w.ln_weight(i1, z)).exp();
        worst = worst.max(ratio);
        if ratio > eps * (1.0 + 1e-12) {
            rep.fail_at(z);
        }
    }
    rep.set("max_ratio_outside_K", worst);
    if k_rect.is_none() {
        // unbounded Ω_n with a weight ratio that does not decay: no compact K exists
        let far = Complex64::new(grid.rect.hi.re.abs().max(grid.rect.lo.re.abs()) * 4.0 + 1.0, 0.0);
        rep.notes.push("Ω_n is unbounded and the weight ratio does not decay".into());
        rep.fail_at(far);
    }
    Ok(RuReport {
        report: rep,
        half_width,
        k_rect,
    })
}

/// Subharmonicity of -ln ν_n via the 5-point Laplacian; tolerance is `tau·h²`.
pub fn check_subharmonic(w: &WeightFamily, n: usize, grid: &Grid, tau: f64) -> Result<ConditionReport> {
    if grid.nx < 3 || grid.ny < 3 {
        return Err(Error::EmptySample("grid has no interior nodes".into()));
    }
    let h = grid.h;
    let tol = tau * h * h;
    let mut rep = ConditionReport::new("subharmonic", n, h);
    let phi: Vec<f64> = grid.nodes().map(|z| -w.ln_weight(n, z)).collect();
    let mut min_lap = f64::INFINITY;
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let c = grid.index(i, j);
            let lap = (phi[c - 1] + phi[c + 1] + phi[c - grid.nx] + phi[c + grid.nx] - 4.0 * phi[c]) / (h * h);
            min_lap = min_lap.min(lap);
            if lap < -tol {
                rep.fail_at(grid.node(i, j));
            }
        }
    }
    rep.set("min_laplacian", min_lap);
    rep.set("tolerance", tol);
    Ok(rep)
}

/// ν_n ≤ ν_{n+1} at every grid node for n in `levels`.
pub fn check_monotone(w: &WeightFamily, levels: std::ops::RangeInclusive<usize>, grid: &Grid) -> ConditionReport {
    let mut rep = ConditionReport::new("monotone", *levels.start(), grid.h);
    for n in levels {
        for z in grid.nodes() {
            if w.ln_weight(n, z) > w.ln_weight(n + 1, z) + 1e-14 {
                rep.fail_at(z);
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, BaseDomain};

    fn expw() -> WeightFamily {
        WeightFamily::exp_power(Coefficients::NegReciprocal, 1.0, 2).unwrap()
    }

    #[test]
    fn eval_examples() {
        let w = expw();
        assert_eq!(eval_weight(&w, 2, ComplexPoint { re: 0.0, im: 0.0 }).unwrap(), 1.0);
        let v = eval_weight(&w, 1, ComplexPoint { re: 3.0, im: 4.0 }).unwrap();
        assert!((v - (-5.0f64).exp()).abs() < 1e-16);
        let c = WeightFamily::constant_one(2).unwrap();
        assert_eq!(eval_weight(&c, 7, ComplexPoint { re: -9.0, im: 2.0 }).unwrap(), 1.0);
    }

    #[test]
    fn index_map_defaults() {
        let m = IndexMaps::doubling();
        assert_eq!((m.i14(1), m.i214(1), m.i14(2)), (4, 8, 8));
        m.validate().unwrap();
        let shift = IndexMaps::uniform(IndexMap::Affine { scale: 1, offset: 1 });
        shift.validate().unwrap();
        assert_eq!(shift.i214(3), shift.i14(4));
        let bad = IndexMaps::uniform(IndexMap::Affine { scale: 1, offset: 0 });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_inadmissible_coefficients() {
        assert!(WeightFamily::exp_power(Coefficients::Explicit(vec![-1.0, -2.0]), 1.0, 2).is_err());
        assert!(WeightFamily::exp_power(Coefficients::Explicit(vec![-1.0, 0.5]), 1.0, 2).is_err());
        assert!(WeightFamily::exp_power(Coefficients::NegReciprocal, 1.5, 2).is_err());
    }

    #[test]
    fn ru_half_width_closed_form() {
        let w = ru_half_width(-1.0, -0.5, 1.0, (-1.0f64).exp(), 1);
        assert!((w - 3.0).abs() < 1e-14);
        assert_eq!(ru_half_width(-0.5, -0.25, 1.0, 2.0, 2), 2.0);
    }

    #[test]
    fn omega2_constant_one_on_balls() {
        let exh = Exhaustion::compact_balls(BaseDomain::Plane, 1).unwrap();
        let grid = build_grid(Rect::centered_square(3.0).unwrap(), 0.1).unwrap();
        let w = WeightFamily::constant_one(2).unwrap();
        let rep = check_omega2(&w, &exh, &IndexMaps::doubling(), 2, None, &grid).unwrap();
        let c2 = rep.constant("C2").unwrap();
        assert!(c2 <= 25.0 && c2 > 0.9 * 25.0, "{c2}");
        assert!((c2 - rep.constant("C2_sampled_closed_form").unwrap()).abs() < 1e-9 * c2);
        assert!(rep.pass);
    }

    #[test]
    fn omega2_constant_one_fails_on_strip() {
        let exh = Exhaustion::whole_plane(1).unwrap();
        let grid = build_grid(Rect::centered_square(3.0).unwrap(), 0.1).unwrap();
        let w = WeightFamily::constant_one(2).unwrap();
        let rep = check_omega2(&w, &exh, &IndexMaps::doubling(), 1, None, &grid).unwrap();
        assert!(!rep.pass && !rep.witnesses.is_empty());
    }

    #[test]
    fn subharmonic_cases() {
        let grid = build_grid(Rect::centered_square(2.0).unwrap(), 0.1).unwrap();
        assert!(check_subharmonic(&expw(), 1, &grid, 1.0).unwrap().pass);
        assert!(check_subharmonic(&WeightFamily::constant_one(2).unwrap(), 1, &grid, 1.0).unwrap().pass);
        let bad = WeightFamily::custom("exp(|z|^2)", Arc::new(|_, z: Complex64| z.norm_sqr()), 2).unwrap();
        let rep = check_subharmonic(&bad, 1, &grid, 1.0).unwrap();
        assert!(!rep.pass && !rep.witnesses.is_empty());
        assert!((rep.constant("min_laplacian").unwrap() + 4.0).abs() < 1e-9);
    }
}
