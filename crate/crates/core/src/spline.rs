//! Interpolation of grid data on the sphere: periodic bicubic B-splines and
//! trigonometric (band-limited) interpolation.
//!
//! A field on the half-offset grid extends to the doubled torus
//! θ ∈ [0, 2π) × φ ∈ [0, 2π) through (θ, φ) ~ (2π − θ, φ + π), on which it is
//! smooth and periodic, so a tensor-product periodic spline applies.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::grid::{Grid, Parity};

#[derive(Clone, Debug)]
pub struct PeriodicSpline2D {
    rows: usize,
    cols: usize,
    coef: Vec<f64>,
}

impl PeriodicSpline2D {
    pub fn new(grid: &Grid, f: &[f64], parity: Parity) -> Self {
        assert_eq!(f.len(), grid.len());
        let (rows, np) = (2 * grid.n_theta, grid.n_phi);
        let mut buf = doubled(grid, f, parity);
        let mut planner = FftPlanner::new();
        fft2(&mut planner, &mut buf, rows, np, false);
        let sym = |k: usize, n: usize| (4.0 + 2.0 * (2.0 * PI * k as f64 / n as f64).cos()) / 6.0;
        for i in 0..rows {
            for j in 0..np {
                buf[i * np + j] /= sym(i, rows) * sym(j, np);
            }
        }
        fft2(&mut planner, &mut buf, rows, np, true);
        let scale = 1.0 / (rows * np) as f64;
        Self { rows, cols: np, coef: buf.iter().map(|c| c.re * scale).collect() }
    }

    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        self.eval_grad(theta, phi).0
    }

    /// Value and first derivatives (∂θ, ∂φ).
    pub fn eval_grad(&self, theta: f64, phi: f64) -> (f64, f64, f64) {
        let ht = PI / (self.rows / 2) as f64;
        let hp = 2.0 * PI / self.cols as f64;
        let u = theta / ht - 0.5;
        let v = phi / hp;
        let (iu, tu) = (u.floor(), u - u.floor());
        let (iv, tv) = (v.floor(), v - v.floor());
        let (bu, du) = basis(tu);
        let (bv, dv) = basis(tv);
        let (mut f, mut ft, mut fp) = (0.0, 0.0, 0.0);
        for a in 0..4 {
            let r = (iu as isize + a as isize - 1).rem_euclid(self.rows as isize) as usize;
            let (mut s, mut sd) = (0.0, 0.0);
            for b in 0..4 {
                let c = (iv as isize + b as isize - 1).rem_euclid(self.cols as isize) as usize;
                let w = self.coef[r * self.cols + c];
                s += w * bv[b];
                sd += w * dv[b];
            }
            f += bu[a] * s;
            ft += du[a] * s;
            fp += bu[a] * sd;
        }
        (f, ft / ht, fp / hp)
    }
}

/// Values on the doubled torus, row-major with 2·n_theta rows.
fn doubled(grid: &Grid, f: &[f64], parity: Parity) -> Vec<Complex<f64>> {
    let (nt, np) = (grid.n_theta, grid.n_phi);
    let sign = if parity == Parity::Odd { -1.0 } else { 1.0 };
    (0..2 * nt * np)
        .map(|k| {
            let (i, j) = (k / np, k % np);
            let v = if i < nt { f[grid.idx(i, j)] } else { sign * f[grid.idx(2 * nt - 1 - i, (j + np / 2) % np)] };
            Complex::new(v, 0.0)
        })
        .collect()
}

/// Signed frequency of FFT bin `k` of `n`; the Nyquist bin is reported as
/// n/2 and handled as a cosine.
fn freq(k: usize, n: usize) -> f64 {
    if 2 * k <= n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Band-limited interpolant of the doubled-torus extension. Exact for
/// trigonometric polynomials the grid resolves, such as restrictions of
/// low-degree polynomials in the direction vector. Evaluation costs
/// O(grid size) per point.
#[derive(Clone, Debug)]
pub struct TrigInterp2D {
    rows: usize,
    cols: usize,
    /// Fourier coefficients with the half-cell θ offset folded in.
    coef: Vec<Complex<f64>>,
}

impl TrigInterp2D {
    pub fn new(grid: &Grid, f: &[f64], parity: Parity) -> Self {
        assert_eq!(f.len(), grid.len());
        let (rows, cols) = (2 * grid.n_theta, grid.n_phi);
        let mut buf = doubled(grid, f, parity);
        let mut planner = FftPlanner::new();
        fft2(&mut planner, &mut buf, rows, cols, false);
        let ht = PI / grid.n_theta as f64;
        let scale = 1.0 / (rows * cols) as f64;
        for i in 0..rows {
            let shift = Complex::from_polar(scale, -freq(i, rows) * 0.5 * ht);
            for j in 0..cols {
                buf[i * cols + j] *= shift;
            }
        }
        Self { rows, cols, coef: buf }
    }

    /// Σ over bins of c·e^{i(pθ + qφ)} with Nyquist bins taken as cosines;
    /// returns value and (∂θ, ∂φ).
    pub fn eval_grad(&self, theta: f64, phi: f64) -> (f64, f64, f64) {
        let wave = |n: usize, x: f64| -> Vec<(Complex<f64>, Complex<f64>)> {
            (0..n)
                .map(|k| {
                    let w = freq(k, n);
                    if 2 * k == n {
                        let (s, c) = (w * x).sin_cos();
                        (Complex::new(c, 0.0), Complex::new(-w * s, 0.0))
                    } else {
                        let e = Complex::from_polar(1.0, w * x);
                        (e, e * Complex::new(0.0, w))
                    }
                })
                .collect()
        };
        let wt = wave(self.rows, theta);
        let wp = wave(self.cols, phi);
        let (mut f, mut ft, mut fp) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        for (i, (et, dt)) in wt.iter().enumerate() {
            let row = &self.coef[i * self.cols..(i + 1) * self.cols];
            let (mut s, mut sd) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
            for (c, (ep, dp)) in row.iter().zip(&wp) {
                s += c * ep;
                sd += c * dp;
            }
            f += et * s;
            ft += dt * s;
            fp += et * sd;
        }
        (f.re, ft.re, fp.re)
    }

    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        self.eval_grad(theta, phi).0
    }
}

/// Grids up to this size are interpolated spectrally, larger ones by splines.
pub const SPECTRAL_MAX_NODES: usize = 4608;

/// The more accurate interpolant the grid size affords.
#[derive(Clone, Debug)]
pub enum Interpolant {
    Spline(PeriodicSpline2D),
    Trig(TrigInterp2D),
}

impl Interpolant {
    pub fn new(grid: &Grid, f: &[f64], parity: Parity) -> Self {
        if grid.len() <= SPECTRAL_MAX_NODES {
            Self::Trig(TrigInterp2D::new(grid, f, parity))
        } else {
            Self::Spline(PeriodicSpline2D::new(grid, f, parity))
        }
    }

    pub fn eval_grad(&self, theta: f64, phi: f64) -> (f64, f64, f64) {
        match self {
            Self::Spline(s) => s.eval_grad(theta, phi),
            Self::Trig(s) => s.eval_grad(theta, phi),
        }
    }

    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        self.eval_grad(theta, phi).0
    }
}

fn basis(t: f64) -> ([f64; 4], [f64; 4]) {
    let s = 1.0 - t;
    (
        [
            s * s * s / 6.0,
            (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
            (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
            t * t * t / 6.0,
        ],
        [-s * s / 2.0, (3.0 * t * t - 4.0 * t) / 2.0, (-3.0 * t * t + 2.0 * t + 1.0) / 2.0, t * t / 2.0],
    )
}

fn fft2(planner: &mut FftPlanner<f64>, buf: &mut [Complex<f64>], rows: usize, cols: usize, inverse: bool) {
    let row_fft = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    for r in buf.chunks_mut(cols) {
        row_fft.process(r);
    }
    let col_fft = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
    let mut col = vec![Complex::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = buf[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            buf[r * cols + c] = col[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::direction;

    fn sample(g: &Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..g.len()).map(|k| {
            let (i, j) = g.ij(k);
            f(g.theta(i), g.phi(j))
        }).collect()
    }

    #[test]
    fn interpolates_nodes() {
        let g = Grid::new(10, 20).unwrap();
        let f = sample(&g, |t, p| direction(t, p)[0].exp() + direction(t, p)[2]);
        let s = PeriodicSpline2D::new(&g, &f, Parity::Even);
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            assert!((s.eval(g.theta(i), g.phi(j)) - f[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_off_grid() {
        let f = |t: f64, p: f64| {
            let d = direction(t, p);
            (d[0] + 0.5 * d[1] * d[2]).sin()
        };
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = Grid::new(n, 2 * n).unwrap();
            let s = PeriodicSpline2D::new(&g, &sample(&g, f), Parity::Even);
            let mut e = 0.0f64;
            for a in 0..37 {
                for b in 0..23 {
                    let (t, p) = (PI * (a as f64 + 0.31) / 37.0, 2.0 * PI * (b as f64 + 0.77) / 23.0);
                    e = e.max((s.eval(t, p) - f(t, p)).abs());
                }
            }
            errs.push(e);
        }
        assert!(crate::grid::convergence_order(&errs) > 3.5, "{errs:?}");
    }

    #[test]
    fn trig_interpolation_is_exact_for_polynomials() {
        let g = Grid::new(12, 24).unwrap();
        let f = |t: f64, p: f64| {
            let d = direction(t, p);
            1.0 + 0.3 * d[0] * d[1] * d[2] - 0.2 * d[2].powi(4) + d[1]
        };
        let s = TrigInterp2D::new(&g, &sample(&g, f), Parity::Even);
        let h = 1e-6;
        for (t, p) in [(0.01, 0.3), (1.1, 2.0), (2.9, 5.5), (PI / 2.0, 0.0)] {
            let (v, dt, dp) = s.eval_grad(t, p);
            assert!((v - f(t, p)).abs() < 1e-13);
            assert!((dt - (f(t + h, p) - f(t - h, p)) / (2.0 * h)).abs() < 1e-8);
            assert!((dp - (f(t, p + h) - f(t, p - h)) / (2.0 * h)).abs() < 1e-8);
        }
        let odd = TrigInterp2D::new(&g, &sample(&g, |t, _| -t.sin()), Parity::Odd);
        assert!((odd.eval(0.7, 1.0) + 0.7f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn derivatives_and_odd_parity() {
        let g = Grid::new(48, 96).unwrap();
        // ∂θ of z = cos θ is −sin θ, odd across the poles
        let f = sample(&g, |t, _| -t.sin() * 1.0);
        let s = PeriodicSpline2D::new(&g, &f, Parity::Odd);
        for t in [0.01, 0.5, 2.0, 3.13] {
            assert!((s.eval(t, 1.0) + t.sin()).abs() < 1e-6);
            let (_, dt, dp) = s.eval_grad(t, 1.0);
            assert!((dt + t.cos()).abs() < 1e-5);
            assert!(dp.abs() < 1e-8);
        }
    }
}
