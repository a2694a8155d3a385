//! Run configuration: JSON schema, defaults and semantic validation.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use dbar_core::domain::{BaseDomain, ComplexPoint, Exhaustion, Rect};
use dbar_core::fundsol::Damping;
use dbar_core::weights::{Coefficients, IndexMap, IndexMaps, WeightFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionKindSpec {
    Strip,
    CompactBalls,
    WholePlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustionSpec {
    pub kind: ExhaustionKindSpec,
    #[serde(default = "plane")]
    pub omega: BaseDomain,
    #[serde(default = "one")]
    pub n0: usize,
}

fn plane() -> BaseDomain {
    BaseDomain::Plane
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKindSpec {
    ExpPower,
    ConstantOne,
}

/// `"neg_reciprocal"` or an explicit list a_1, a_2, ….
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Named(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub kind: WeightKindSpec,
    #[serde(default)]
    pub a: Option<CoefficientSpec>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "two")]
    pub q: usize,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexMapSpec {
    Doubling,
    Affine { scale: usize, offset: usize },
    Table { table: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// [re0, im0, re1, im1].
    pub rect: [f64; 4],
    pub h: f64,
    /// Spacings of the convergence study.
    #[serde(default)]
    pub refinement: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_residual")]
    pub residual: f64,
    #[serde(default = "default_window")]
    pub slope_window: [f64; 2],
    #[serde(default = "default_slack")]
    pub hormander_slack: f64,
}

fn default_residual() -> f64 {
    5e-2
}

fn default_window() -> [f64; 2] {
    [0.8, 1.2]
}

fn default_slack() -> f64 {
    0.1
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: default_residual(),
            slope_window: default_window(),
            hormander_slack: default_slack(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_damping")]
    pub damping: Damping,
    #[serde(default = "default_degree_cap")]
    pub degree_cap: usize,
    #[serde(default = "default_hormander_degree")]
    pub hormander_degree: usize,
    /// Number of gluing stages N.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Level of single-level tasks.
    #[serde(default = "one")]
    pub level: usize,
    #[serde(default = "default_derivative_cap")]
    pub derivative_cap: usize,
    /// Poles [re, im] of the opt-in rational correction basis.
    #[serde(default)]
    pub rational_poles: Vec<[f64; 2]>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_damping() -> Damping {
    Damping::Gaussian
}

fn default_degree_cap() -> usize {
    12
}

fn default_hormander_degree() -> usize {
    8
}

fn default_levels() -> usize {
    3
}

fn default_derivative_cap() -> usize {
    4
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            damping: default_damping(),
            degree_cap: default_degree_cap(),
            hormander_degree: default_hormander_degree(),
            levels: default_levels(),
            level: 1,
            derivative_cap: default_derivative_cap(),
            rational_poles: Vec::new(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    One,
    Z,
    Zero,
    DampedWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    #[serde(default)]
    pub sigma2: Option<f64>,
    /// Complex multiplier [re, im].
    #[serde(default = "unit_scale")]
    pub scale: [f64; 2],
}

fn unit_scale() -> [f64; 2] {
    [1.0, 0.0]
}

impl SourceSpec {
    pub fn new(kind: SourceKind) -> Self {
        Self {
            kind,
            sigma2: None,
            scale: unit_scale(),
        }
    }

    pub fn scale(&self) -> Complex64 {
        Complex64::new(self.scale[0], self.scale[1])
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let v = match self.kind {
            SourceKind::One => Complex64::new(1.0, 0.0),
            SourceKind::Z => z,
            SourceKind::Zero => Complex64::new(0.0, 0.0),
            SourceKind::DampedWave => {
                let s = self.sigma2.unwrap_or(4.0);
                Complex64::from_polar((-z.norm_sqr() / s).exp(), z.re)
            }
        };
        v * self.scale()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub exhaustion: ExhaustionSpec,
    pub weights: WeightSpec,
    #[serde(default = "default_maps")]
    pub index_maps: IndexMapSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_source")]
    pub source: SourceSpec,
    /// Components of vec-solve; defaults to (f, 2f).
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
}

fn default_maps() -> IndexMapSpec {
    IndexMapSpec::Doubling
}

fn default_source() -> SourceSpec {
    SourceSpec::new(SourceKind::One)
}

/// A single validation failure, addressed by its JSON path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// The core objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Validated {
    pub exhaustion: Exhaustion,
    pub weights: WeightFamily,
    pub maps: IndexMaps,
    pub rect: Rect,
    pub poles: Vec<Complex64>,
}

impl RunConfig {
    /// Parses JSON; syntax and schema errors come back as one field error.
    pub fn from_json(text: &str) -> Result<Self, Vec<FieldError>> {
        serde_json::from_str(text).map_err(|e| {
            vec![FieldError {
                path: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            }]
        })
    }

    pub fn index_maps(&self) -> IndexMaps {
        match &self.index_maps {
            IndexMapSpec::Doubling => IndexMaps::doubling(),
            IndexMapSpec::Affine { scale, offset } => IndexMaps::uniform(IndexMap::Affine {
                scale: *scale,
                offset: *offset,
            }),
            IndexMapSpec::Table { table } => IndexMaps::uniform(IndexMap::Table(table.clone())),
        }
    }

    /// Sources of vec-solve.
    pub fn vector_sources(&self) -> Vec<SourceSpec> {
        if self.sources.is_empty() {
            let mut double = self.source.clone();
            double.scale = [2.0 * self.source.scale[0], 2.0 * self.source.scale[1]];
            vec![self.source.clone(), double]
        } else {
            self.sources.clone()
        }
    }

    /// Checks every field and builds the core objects, or lists all problems found.
    pub fn validate(&self) -> Result<Validated, Vec<FieldError>> {
        let mut errs = Vec::new();
        let mut err = |path: &str, message: String| {
            errs.push(FieldError {
                path: path.to_string(),
                message,
            })
        };

        let base = self.exhaustion.omega;
        let exhaustion = match self.exhaustion.kind {
            ExhaustionKindSpec::Strip => Exhaustion::strip(base, self.exhaustion.n0),
            ExhaustionKindSpec::CompactBalls => Exhaustion::compact_balls(base, self.exhaustion.n0),
            ExhaustionKindSpec::WholePlane => {
                if base != BaseDomain::Plane {
                    err("exhaustion.omega", "whole_plane requires omega = plane".into());
                }
                Exhaustion::whole_plane(self.exhaustion.n0)
            }
        };
        let exhaustion = exhaustion.map_err(|e| err("exhaustion", e.to_string())).ok();

        let q = self.weights.q;
        let weights = match self.weights.kind {
            WeightKindSpec::ConstantOne => {
                if self.weights.a.is_some() {
                    err("weights.a", "constant_one takes no coefficients".into());
                }
                WeightFamily::constant_one(q)
            }
            WeightKindSpec::ExpPower => {
                let a = match &self.weights.a {
                    None => Some(Coefficients::NegReciprocal),
                    Some(CoefficientSpec::Named(s)) if s == "neg_reciprocal" => Some(Coefficients::NegReciprocal),
                    Some(CoefficientSpec::Named(s)) => {
                        err("weights.a", format!("unknown coefficient family '{s}'"));
                        None
                    }
                    Some(CoefficientSpec::List(v)) => Some(Coefficients::Explicit(v.clone())),
                };
                match a {
                    Some(a) => WeightFamily::exp_power(a, self.weights.gamma.unwrap_or(1.0), q),
                    None => WeightFamily::constant_one(q),
                }
            }
        };
        let weights = weights.map_err(|e| err("weights", e.to_string())).ok();

        let maps = self.index_maps();
        if let Err(e) = maps.validate() {
            err("index_maps", e.to_string());
        }

        let [x0, y0, x1, y1] = self.grid.rect;
        let rect = Rect::new(
            ComplexPoint { re: x0, im: y0 },
            ComplexPoint { re: x1, im: y1 },
        )
        .map_err(|e| err("grid.rect", e.to_string()))
        .ok();
        let h = self.grid.h;
        if !(h > 0.0 && h.is_finite()) {
            err("grid.h", format!("spacing must be positive, got {h}"));
        } else if let Some(r) = rect {
            if h > r.width().min(r.height()) {
                err("grid.h", format!("spacing {h} exceeds the smaller extent of the rectangle"));
            }
        }
        for (i, &r) in self.grid.refinement.iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                err(&format!("grid.refinement[{i}]"), format!("spacing must be positive, got {r}"));
            }
        }

        let s = &self.solver;
        if s.levels == 0 {
            err("solver.levels", "at least one level is required".into());
        }
        if s.level < self.exhaustion.n0 {
            err("solver.level", format!("level {} is below n0 = {}", s.level, self.exhaustion.n0));
        }
        if s.derivative_cap > dbar_core::calculus::DERIVATIVE_CAP {
            err(
                "solver.derivative_cap",
                format!("at most {} is supported", dbar_core::calculus::DERIVATIVE_CAP),
            );
        }
        let t = &s.tolerances;
        if !(t.residual > 0.0) {
            err("solver.tolerances.residual", "must be positive".into());
        }
        if !(t.slope_window[0] < t.slope_window[1]) {
            err("solver.tolerances.slope_window", "lower end must be below the upper end".into());
        }
        if !(t.hormander_slack >= 0.0) {
            err("solver.tolerances.hormander_slack", "must be non-negative".into());
        }
        let poles: Vec<Complex64> = s.rational_poles.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        for (i, p) in poles.iter().enumerate() {
            if !p.is_finite() {
                err(&format!("solver.rational_poles[{i}]"), "pole must be finite".into());
            }
        }

        let mut check_source = |path: &str, src: &SourceSpec| {
            if let Some(s2) = src.sigma2 {
                if !(s2 > 0.0 && s2.is_finite()) {
                    err(&format!("{path}.sigma2"), "must be positive".into());
                }
                if src.kind != SourceKind::DampedWave {
                    err(&format!("{path}.sigma2"), "only damped_wave takes sigma2".into());
                }
            }
            if !src.scale.iter().all(|v| v.is_finite()) {
                err(&format!("{path}.scale"), "must be finite".into());
            }
        };
        check_source("source", &self.source);
        for (i, src) in self.sources.iter().enumerate() {
            check_source(&format!("sources[{i}]"), src);
        }

        match (exhaustion, weights, rect) {
            (Some(exhaustion), Some(weights), Some(rect)) if errs.is_empty() => Ok(Validated {
                exhaustion,
                weights,
                maps,
                rect,
                poles,
            }),
            _ => Err(errs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "exhaustion": {"kind": "compact_balls"},
        "weights": {"kind": "constant_one"},
        "grid": {"rect": [-2, -2, 2, 2], "h": 0.1}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.solver.tolerances.residual, 5e-2);
        assert_eq!(c.solver.tolerances.slope_window, [0.8, 1.2]);
        assert_eq!(c.solver.tolerances.hormander_slack, 0.1);
        assert_eq!(c.solver.degree_cap, 12);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = MINIMAL.replace("\"h\": 0.1", "\"h\": 0.1, \"spacing\": 2");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn semantic_errors_are_collected() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.grid.h = -1.0;
        c.solver.levels = 0;
        c.weights.q = 0;
        let errs = c.validate().unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        assert!(paths.contains(&"grid.h"));
        assert!(paths.contains(&"solver.levels"));
        assert!(paths.contains(&"weights"));
    }

    #[test]
    fn vector_sources_default_to_f_and_2f() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        let s = c.vector_sources();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].scale, [2.0, 0.0]);
    }
}
