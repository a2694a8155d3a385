//! Linear 2-D convolution of grid data with a translation-invariant kernel table.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Smallest 2·3·5-smooth integer ≥ n.
pub(crate) fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Computes out[i, j] = Σ K[i - i', j - j'] in[i', j'] on an nx × ny grid.
pub(crate) struct Convolver {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    kernel_hat: Vec<Complex64>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Convolver {
    /// `kernel(di, dj)` is evaluated for |di| < nx, |dj| < ny.
    pub(crate) fn new(nx: usize, ny: usize, kernel: impl Fn(isize, isize) -> Complex64) -> Self {
        let px = smooth_size(2 * nx - 1);
        let py = smooth_size(2 * ny - 1);
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let inv_x = planner.plan_fft_inverse(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_y = planner.plan_fft_inverse(py);
        let mut k = vec![Complex64::new(0.0, 0.0); px * py];
        let (nxi, nyi) = (nx as isize, ny as isize);
        for dj in -(nyi - 1)..nyi {
            let row = dj.rem_euclid(py as isize) as usize;
            for di in -(nxi - 1)..nxi {
                let col = di.rem_euclid(px as isize) as usize;
                k[row * px + col] = kernel(di, dj);
            }
        }
        let mut conv = Self {
            nx,
            ny,
            px,
            py,
            kernel_hat: Vec::new(),
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
        };
        conv.transform(&mut k, true);
        conv.kernel_hat = k;
        conv
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let (fx, fy) = if forward {
            (&self.fwd_x, &self.fwd_y)
        } else {
            (&self.inv_x, &self.inv_y)
        };
        for row in data.chunks_exact_mut(self.px) {
            fx.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.py];
        for i in 0..self.px {
            for (j, c) in col.iter_mut().enumerate() {
                *c = data[j * self.px + i];
            }
            fy.process(&mut col);
            for (j, c) in col.iter().enumerate() {
                data[j * self.px + i] = *c;
            }
        }
    }

    pub(crate) fn apply(&self, input: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(input.len(), self.nx * self.ny);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.px * self.py];
        for j in 0..self.ny {
            buf[j * self.px..j * self.px + self.nx].copy_from_slice(&input[j * self.nx..(j + 1) * self.nx]);
        }
        self.transform(&mut buf, true);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.transform(&mut buf, false);
        let scale = 1.0 / (self.px * self.py) as f64;
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            out.extend(buf[j * self.px..j * self.px + self.nx].iter().map(|v| v * scale));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(641), 648);
        assert_eq!(smooth_size(521), 540);
        assert_eq!(smooth_size(1), 1);
    }

    #[test]
    fn matches_direct_sum() {
        let (nx, ny) = (7, 5);
        let kern = |di: isize, dj: isize| Complex64::new(1.0 / (1.0 + (di * di + 2 * dj * dj) as f64), di as f64 * 0.1 - dj as f64);
        let conv = Convolver::new(nx, ny, kern);
        let input: Vec<Complex64> = (0..nx * ny)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let out = conv.apply(&input);
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = Complex64::new(0.0, 0.0);
                for jj in 0..ny {
                    for ii in 0..nx {
                        acc += kern(i as isize - ii as isize, j as isize - jj as isize) * input[jj * nx + ii];
                    }
                }
                assert!((acc - out[j * nx + i]).norm() < 1e-12);
            }
        }
    }
}
