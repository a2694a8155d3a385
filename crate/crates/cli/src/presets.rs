//! Shipped configurations for the two worked weight families.

use dbar_core::domain::BaseDomain;
use dbar_core::fundsol::Damping;

use crate::config::{
    CoefficientSpec, ExhaustionKindSpec, ExhaustionSpec, GridSpec, IndexMapSpec, RunConfig, SolverSpec, SourceKind,
    SourceSpec, WeightKindSpec, WeightSpec,
};

pub const PRESET_NAMES: [&str; 2] = ["ex48a", "ex48b"];

fn solver() -> SolverSpec {
    SolverSpec {
        damping: Damping::One,
        ..SolverSpec::default()
    }
}

/// Horizontal strips |Im z| < n of ℂ with ν_n = exp(-|z|/n) and a damped wave source.
///
/// With h = 0.05 the grid cannot hold a strip over a domain with boundary (the
/// boundary collars are 1/(n(n+1)) wide), so Ω = ℂ. The damping is g ≡ 1 since
/// exp(-z²) grows like exp((Im z)²) across the strips.
pub fn ex48a() -> RunConfig {
    RunConfig {
        exhaustion: ExhaustionSpec {
            kind: ExhaustionKindSpec::WholePlane,
            omega: BaseDomain::Plane,
            n0: 1,
        },
        weights: WeightSpec {
            kind: WeightKindSpec::ExpPower,
            a: Some(CoefficientSpec::Named("neg_reciprocal".into())),
            gamma: Some(1.0),
            q: 2,
        },
        index_maps: IndexMapSpec::Affine { scale: 1, offset: 1 },
        grid: GridSpec {
            rect: [-8.0, -6.5, 8.0, 6.5],
            h: 0.05,
            refinement: vec![0.2, 0.1, 0.05],
        },
        solver: solver(),
        source: SourceSpec {
            kind: SourceKind::DampedWave,
            sigma2: Some(4.0),
            scale: [1.0, 0.0],
        },
        sources: Vec::new(),
    }
}

/// Disks |z| < n of ℂ with constant weights and f ≡ 1.
pub fn ex48b() -> RunConfig {
    RunConfig {
        exhaustion: ExhaustionSpec {
            kind: ExhaustionKindSpec::CompactBalls,
            omega: BaseDomain::Plane,
            n0: 1,
        },
        weights: WeightSpec {
            kind: WeightKindSpec::ConstantOne,
            a: None,
            gamma: None,
            q: 2,
        },
        index_maps: IndexMapSpec::Affine { scale: 1, offset: 1 },
        grid: GridSpec {
            rect: [-8.5, -8.5, 8.5, 8.5],
            h: 0.05,
            refinement: vec![0.2, 0.1, 0.05],
        },
        solver: solver(),
        source: SourceSpec::new(SourceKind::One),
        sources: Vec::new(),
    }
}

pub fn preset(name: &str) -> Option<RunConfig> {
    match name {
        "ex48a" => Some(ex48a()),
        "ex48b" => Some(ex48b()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            assert!(c.validate().is_ok(), "{name}");
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        }
        assert!(preset("ex49").is_none());
    }
}
