//! Gauss–Legendre rules and the polar rule for cells containing a 1/|y| singularity.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Gauss points along each edge of the singular-cell rule (four triangles per cell).
pub const POLAR_ANGULAR: usize = 16;
/// Gauss points from the singular point to each edge.
pub const POLAR_RADIAL: usize = 16;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss rule mapped to [a, b].
pub fn gauss_interval(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(&w).map(|(&t, &wt)| (mid + half * t, half * wt)).collect()
}

/// Tensor Gauss rule on the rectangle [lo, hi].
pub fn gauss_rect(f: impl Fn(Complex64) -> Complex64, lo: Complex64, hi: Complex64, n: usize) -> Complex64 {
    let gx = gauss_interval(lo.re, hi.re, n);
    let gy = gauss_interval(lo.im, hi.im, n);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(y, wy) in &gy {
        for &(x, wx) in &gx {
            acc += f(Complex64::new(x, y)) * (wx * wy);
        }
    }
    acc
}

/// ∫ over the rectangle [lo, hi] of `f`, where `f` may behave like 1/|y - p| at a
/// point `p` of the closed rectangle.
///
/// The cell is split into the four triangles spanned by `p` and the edges. Each
/// triangle is mapped from the unit square by (s, u) -> p + u·(a + s(b - a)), whose
/// Jacobian u·|a × (b - a)| cancels the singularity.
pub fn polar_cell_integral(
    f: impl Fn(Complex64) -> Complex64,
    lo: Complex64,
    hi: Complex64,
    p: Complex64,
    n_ang: usize,
    n_rad: usize,
) -> Complex64 {
    let corners = [
        lo,
        Complex64::new(hi.re, lo.im),
        hi,
        Complex64::new(lo.re, hi.im),
    ];
    let radial = gauss_interval(0.0, 1.0, n_rad);
    let along = gauss_interval(0.0, 1.0, n_ang);
    let mut acc = Complex64::new(0.0, 0.0);
    for e in 0..4 {
        let a = corners[e] - p;
        let b = corners[(e + 1) % 4] - p;
        let edge = b - a;
        let jac = (a.re * edge.im - a.im * edge.re).abs();
        // p on the edge: the triangle is degenerate
        if jac < 1e-14 * edge.norm_sqr() {
            continue;
        }
        for &(s, ws) in &along {
            let q = a + edge * s;
            for &(u, wu) in &radial {
                acc += f(p + q * u) * (u * jac * ws * wu);
            }
        }
    }
    acc
}

/// Node-centred cell rule at the default resolution.
pub fn singular_cell(f: impl Fn(Complex64) -> Complex64, center: Complex64, h: f64, p: Complex64) -> Complex64 {
    let half = Complex64::new(0.5 * h, 0.5 * h);
    polar_cell_integral(f, center - half, center + half, p, POLAR_ANGULAR, POLAR_RADIAL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(&t, &wt)| wt * t.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} deg={deg}: {s} vs {exact}");
            }
        }
    }

    #[test]
    fn inverse_distance_over_square() {
        // ∫_{[-1,1]²} 1/|y| dy = 8 asinh(1)
        let v = polar_cell_integral(
            |y| Complex64::new(1.0 / y.norm(), 0.0),
            Complex64::new(-1.0, -1.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 0.0),
            POLAR_ANGULAR,
            POLAR_RADIAL,
        );
        assert!((v.re - 8.0 * 1.0f64.asinh()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn singular_point_on_a_corner() {
        // ∫_{[0,1]²} 1/|y| dy = 2 asinh(1)
        let v = polar_cell_integral(
            |y| Complex64::new(1.0 / y.norm(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 0.0),
            POLAR_ANGULAR,
            POLAR_RADIAL,
        );
        assert!((v.re - 2.0 * 1.0f64.asinh()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn smooth_integrand_area() {
        let v = polar_cell_integral(
            |y| Complex64::new(y.re * y.re, 0.0),
            Complex64::new(-0.5, 0.0),
            Complex64::new(1.5, 1.0),
            Complex64::new(0.2, 0.7),
            POLAR_ANGULAR,
            POLAR_RADIAL,
        );
        let exact = (1.5f64.powi(3) + 0.5f64.powi(3)) / 3.0;
        assert!((v.re - exact).abs() < 1e-12, "{}", v.re - exact);
    }
}
