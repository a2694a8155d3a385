//! Closed-form fields with exact partials, used as test oracles and sources.

use std::sync::Arc;

use num_complex::Complex64;

use crate::field::{AnalyticField, MultiIndex};

fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Entire or meromorphic functions with known complex derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Holomorphic {
    Constant(Complex64),
    /// z^k.
    Monomial(u32),
    /// exp(z).
    Exp,
    /// 1/(z - c).
    Pole(Complex64),
}

impl Holomorphic {
    /// k-th complex derivative.
    pub fn derivative(&self, k: usize, z: Complex64) -> Complex64 {
        match *self {
            Holomorphic::Constant(c) => {
                if k == 0 {
                    c
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Holomorphic::Monomial(p) => {
                let p = p as usize;
                if k > p {
                    return Complex64::new(0.0, 0.0);
                }
                let coef: f64 = ((p - k + 1)..=p).map(|t| t as f64).product();
                z.powu((p - k) as u32) * coef
            }
            Holomorphic::Exp => z.exp(),
            Holomorphic::Pole(c) => {
                let fact: f64 = (1..=k).map(|t| t as f64).product();
                let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * fact / (z - c).powu(k as u32 + 1)
            }
        }
    }
}

impl AnalyticField for Holomorphic {
    fn value(&self, z: Complex64) -> Complex64 {
        self.derivative(0, z)
    }

    // ∂^β f = i^{β₂} f^{(|β|)} for holomorphic f
    fn partial(&self, beta: MultiIndex, z: Complex64) -> Option<Complex64> {
        Some(i_pow(beta.b2) * self.derivative(beta.order(), z))
    }

    fn name(&self) -> String {
        match self {
            Holomorphic::Constant(c) => format!("const({},{})", c.re, c.im),
            Holomorphic::Monomial(k) => format!("z^{k}"),
            Holomorphic::Exp => "exp(z)".into(),
            Holomorphic::Pole(c) => format!("1/(z-({},{}))", c.re, c.im),
        }
    }
}

/// Polynomials in z and z̄ of low degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementary {
    /// z̄.
    Conj,
    /// z·z̄ = |z|².
    AbsSquared,
    /// (Re z)².
    ReSquared,
    /// Re z.
    Re,
}

impl AnalyticField for Elementary {
    fn value(&self, z: Complex64) -> Complex64 {
        match self {
            Elementary::Conj => z.conj(),
            Elementary::AbsSquared => Complex64::new(z.norm_sqr(), 0.0),
            Elementary::ReSquared => Complex64::new(z.re * z.re, 0.0),
            Elementary::Re => Complex64::new(z.re, 0.0),
        }
    }

    fn partial(&self, beta: MultiIndex, z: Complex64) -> Option<Complex64> {
        let r = |x: f64| Some(Complex64::new(x, 0.0));
        let zero = r(0.0);
        match (self, beta.b1, beta.b2) {
            (_, 0, 0) => Some(self.value(z)),
            (Elementary::Conj, 1, 0) => r(1.0),
            (Elementary::Conj, 0, 1) => Some(Complex64::new(0.0, -1.0)),
            (Elementary::Conj, _, _) => zero,
            (Elementary::AbsSquared, 1, 0) => r(2.0 * z.re),
            (Elementary::AbsSquared, 0, 1) => r(2.0 * z.im),
            (Elementary::AbsSquared, 2, 0) | (Elementary::AbsSquared, 0, 2) => r(2.0),
            (Elementary::AbsSquared, _, _) => zero,
            (Elementary::ReSquared, 1, 0) => r(2.0 * z.re),
            (Elementary::ReSquared, 2, 0) => r(2.0),
            (Elementary::ReSquared, _, _) => zero,
            (Elementary::Re, 1, 0) => r(1.0),
            (Elementary::Re, _, _) => zero,
        }
    }

    fn name(&self) -> String {
        match self {
            Elementary::Conj => "conj(z)",
            Elementary::AbsSquared => "|z|^2",
            Elementary::ReSquared => "re(z)^2",
            Elementary::Re => "re(z)",
        }
        .into()
    }
}

/// exp(-1/(1 - |z - c|²/r²)) inside the disk B_r(c), zero outside; value e⁻¹ at c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: Complex64,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn unit() -> Self {
        Self {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
            amplitude: 1.0,
        }
    }

    pub fn new(center: Complex64, radius: f64) -> Self {
        Self {
            center,
            radius,
            amplitude: 1.0,
        }
    }

    /// (φ(s), φ'(s), φ''(s)) with s = |z - c|²/r², or zeros outside the support.
    fn profile(&self, z: Complex64) -> Option<(f64, f64, f64, f64, f64)> {
        let d = z - self.center;
        let r2 = self.radius * self.radius;
        let s = d.norm_sqr() / r2;
        if s >= 1.0 {
            return None;
        }
        let u = 1.0 - s;
        let p = self.amplitude * (-1.0 / u).exp();
        let p1 = -p / (u * u);
        let p2 = p / u.powi(4) - 2.0 * p / u.powi(3);
        Some((p, p1, p2, 2.0 * d.re / r2, 2.0 * d.im / r2))
    }

    /// ∂̄φ(z).
    pub fn dbar(&self, z: Complex64) -> Complex64 {
        let fx = self.partial(MultiIndex::new(1, 0), z).unwrap_or_default();
        let fy = self.partial(MultiIndex::new(0, 1), z).unwrap_or_default();
        0.5 * (fx + Complex64::i() * fy)
    }

    /// Radius of the closed support around the centre.
    pub fn support_radius(&self) -> f64 {
        self.radius
    }
}

impl AnalyticField for Bump {
    fn value(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.profile(z).map_or(0.0, |p| p.0), 0.0)
    }

    fn partial(&self, beta: MultiIndex, z: Complex64) -> Option<Complex64> {
        if beta.order() > 2 {
            return None;
        }
        let Some((p, p1, p2, sx, sy)) = self.profile(z) else {
            return Some(Complex64::new(0.0, 0.0));
        };
        let r2 = self.radius * self.radius;
        let v = match (beta.b1, beta.b2) {
            (0, 0) => p,
            (1, 0) => p1 * sx,
            (0, 1) => p1 * sy,
            (2, 0) => p2 * sx * sx + p1 * 2.0 / r2,
            (0, 2) => p2 * sy * sy + p1 * 2.0 / r2,
            _ => p2 * sx * sy,
        };
        Some(Complex64::new(v, 0.0))
    }

    fn name(&self) -> String {
        format!("bump(c=({},{}), r={})", self.center.re, self.center.im, self.radius)
    }
}

/// exp(i·Re z)·exp(-|z|²/σ²): an oscillating source with Gaussian envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedWave {
    pub sigma2: f64,
}

impl AnalyticField for DampedWave {
    fn value(&self, z: Complex64) -> Complex64 {
        Complex64::from_polar((-z.norm_sqr() / self.sigma2).exp(), z.re)
    }

    fn partial(&self, beta: MultiIndex, z: Complex64) -> Option<Complex64> {
        let v = self.value(z);
        let s = self.sigma2;
        match (beta.b1, beta.b2) {
            (0, 0) => Some(v),
            (1, 0) => Some(v * Complex64::new(-2.0 * z.re / s, 1.0)),
            (0, 1) => Some(v * (-2.0 * z.im / s)),
            _ => None,
        }
    }

    fn name(&self) -> String {
        format!("damped_wave(sigma2={})", self.sigma2)
    }
}

/// The holomorphic suite {1, z, z², exp(z)} used for noise floors.
pub fn holomorphic_suite() -> Vec<Arc<dyn AnalyticField>> {
    vec![
        Arc::new(Holomorphic::Constant(Complex64::new(1.0, 0.0))),
        Arc::new(Holomorphic::Monomial(1)),
        Arc::new(Holomorphic::Monomial(2)),
        Arc::new(Holomorphic::Exp),
    ]
}

/// Mixed suite used by the seminorm-equivalence checks.
pub fn test_field_suite() -> Vec<Arc<dyn AnalyticField>> {
    let mut v = holomorphic_suite();
    v.push(Arc::new(Elementary::Conj));
    v.push(Arc::new(Elementary::AbsSquared));
    v.push(Arc::new(Bump::new(Complex64::new(0.3, -0.2), 1.5)));
    v.push(Arc::new(DampedWave { sigma2: 4.0 }));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &dyn AnalyticField, beta: MultiIndex, z: Complex64) -> Complex64 {
        // nested central differences with a step well above rounding
        let h = 1e-3;
        let g = |z: Complex64, b: MultiIndex| -> Complex64 {
            match (b.b1, b.b2) {
                (1, 0) => (f.value(z + h) - f.value(z - h)) / (2.0 * h),
                (0, 1) => {
                    let dh = Complex64::new(0.0, h);
                    (f.value(z + dh) - f.value(z - dh)) / (2.0 * h)
                }
                (2, 0) => (f.value(z + h) - 2.0 * f.value(z) + f.value(z - h)) / (h * h),
                (0, 2) => {
                    let dh = Complex64::new(0.0, h);
                    (f.value(z + dh) - 2.0 * f.value(z) + f.value(z - dh)) / (h * h)
                }
                _ => {
                    let a = Complex64::new(h, h);
                    let b = Complex64::new(h, -h);
                    (f.value(z + a) - f.value(z + b) - f.value(z - b) + f.value(z - a)) / (4.0 * h * h)
                }
            }
        };
        g(z, beta)
    }

    #[test]
    fn analytic_partials_match_differences() {
        let fields: Vec<Box<dyn AnalyticField>> = vec![
            Box::new(Holomorphic::Monomial(3)),
            Box::new(Holomorphic::Exp),
            Box::new(Holomorphic::Pole(Complex64::new(2.0, 1.0))),
            Box::new(Elementary::AbsSquared),
            Box::new(Elementary::Conj),
            Box::new(Bump::new(Complex64::new(0.1, 0.0), 0.9)),
            Box::new(DampedWave { sigma2: 4.0 }),
        ];
        let z = Complex64::new(0.3, -0.25);
        for f in &fields {
            for beta in MultiIndex::up_to(2).into_iter().skip(1) {
                if let Some(exact) = f.partial(beta, z) {
                    let approx = fd(f.as_ref(), beta, z);
                    assert!(
                        (exact - approx).norm() < 1e-4 * (1.0 + exact.norm()),
                        "{} {beta}: {exact} vs {approx}",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn bump_value_at_centre() {
        assert!((Bump::unit().value(Complex64::new(0.0, 0.0)).re - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(Bump::unit().value(Complex64::new(1.0, 0.0)).re, 0.0);
    }
}
