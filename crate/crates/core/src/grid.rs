//! Latitude–longitude grid over S² with half-offset latitudes, ghost rows
//! across the poles, eighth-order centered stencils and Fejér quadrature.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Behaviour of a chart component under the pole reflection
/// (θ, φ) ↦ (−θ, φ + π): components carrying an odd number of θ indices
/// change sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    #[inline]
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Non-zero taps of the eighth-order central first derivative, in units of 1/(840h).
pub const TAPS: usize = 8;
const STENCIL: [(isize, f64); TAPS] =
    [(-4, 3.0), (-3, -32.0), (-2, 168.0), (-1, -672.0), (1, 672.0), (2, -168.0), (3, 32.0), (4, -3.0)];

/// Forward-biased seventh-order first derivative on offsets −3..=4, in units
/// of 1/(420h). Mirrored (o, c) ↦ (−o, −c) it is backward-biased. Unlike
/// centered stencils neither annihilates the alternating mode (−1)^j.
const BIASED: [(isize, f64); TAPS] =
    [(-3, -4.0), (-2, 42.0), (-1, -252.0), (0, -105.0), (1, 420.0), (2, -126.0), (3, 28.0), (4, -3.0)];

/// Forward-biased ninth-order first derivative on offsets −4..=5, in units
/// of 1/(2520h).
pub const WIDE_TAPS: usize = 10;
const WIDE_BIASED: [(isize, f64); WIDE_TAPS] = [
    (-4, 5.0),
    (-3, -60.0),
    (-2, 360.0),
    (-1, -1680.0),
    (0, -504.0),
    (1, 2520.0),
    (2, -840.0),
    (3, 240.0),
    (4, -45.0),
    (5, 4.0),
];

fn mirrored<const N: usize>(st: [(isize, f64); N], forward: bool) -> [(isize, f64); N] {
    if forward {
        st
    } else {
        st.map(|(o, c)| (-o, -c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Grid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 4 || n_phi < 8 || n_phi % 2 != 0 {
            return Err(Error::Format(format!(
                "grid {n_theta}×{n_phi} unsupported: need n_theta ≥ 4 and even n_phi ≥ 8"
            )));
        }
        Ok(Self { n_theta, n_phi })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.n_phi, k % self.n_phi)
    }

    #[inline]
    pub fn h_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    #[inline]
    pub fn h_phi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        PI * (i as f64 + 0.5) / self.n_theta as f64
    }

    #[inline]
    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn dir(&self, i: usize, j: usize) -> Vector3<f64> {
        direction(self.theta(i), self.phi(j))
    }

    /// Unit vectors ∂θ dir and ∂φ dir / sin θ at node (i, j).
    pub fn sphere_frame(&self, i: usize, j: usize) -> (Vector3<f64>, Vector3<f64>) {
        let (t, p) = (self.theta(i), self.phi(j));
        (
            Vector3::new(t.cos() * p.cos(), t.cos() * p.sin(), -t.sin()),
            Vector3::new(-p.sin(), p.cos(), 0.0),
        )
    }

    /// Resolves a possibly out-of-range (row, column) to a stored node and the
    /// sign picked up by an odd component.
    #[inline]
    pub fn wrap(&self, r: isize, c: isize) -> (usize, f64) {
        let nt = self.n_theta as isize;
        let np = self.n_phi as isize;
        let (row, col, s) = if r < 0 {
            (-r - 1, c + np / 2, -1.0)
        } else if r >= nt {
            (2 * nt - r - 1, c + np / 2, -1.0)
        } else {
            (r, c, 1.0)
        };
        (self.idx(row as usize, col.rem_euclid(np) as usize), s)
    }

    /// The non-zero taps of ∂θ at node k as (node, weight).
    pub fn stencil_theta(&self, k: usize, parity: Parity) -> [(usize, f64); TAPS] {
        let (i, j) = self.ij(k);
        let w = 1.0 / (840.0 * self.h_theta());
        STENCIL.map(|(o, c)| {
            let (n, s) = self.wrap(i as isize + o, j as isize);
            let s = if s < 0.0 { parity.sign() } else { 1.0 };
            (n, c * w * s)
        })
    }

    /// The non-zero taps of ∂φ at node k.
    pub fn stencil_phi(&self, k: usize) -> [(usize, f64); TAPS] {
        let (i, j) = self.ij(k);
        let w = 1.0 / (840.0 * self.h_phi());
        STENCIL.map(|(o, c)| (self.wrap(i as isize, j as isize + o).0, c * w))
    }

    fn along_theta<const N: usize>(&self, k: usize, parity: Parity, st: [(isize, f64); N], w: f64) -> [(usize, f64); N] {
        let (i, j) = self.ij(k);
        st.map(|(o, c)| {
            let (n, s) = self.wrap(i as isize + o, j as isize);
            let s = if s < 0.0 { parity.sign() } else { 1.0 };
            (n, c * w * s)
        })
    }

    fn along_phi<const N: usize>(&self, k: usize, st: [(isize, f64); N], w: f64) -> [(usize, f64); N] {
        let (i, j) = self.ij(k);
        st.map(|(o, c)| (self.wrap(i as isize, j as isize + o).0, c * w))
    }

    /// Biased variant of `stencil_theta`.
    pub fn biased_theta(&self, k: usize, parity: Parity, forward: bool) -> [(usize, f64); TAPS] {
        self.along_theta(k, parity, mirrored(BIASED, forward), 1.0 / (420.0 * self.h_theta()))
    }

    /// Biased variant of `stencil_phi`.
    pub fn biased_phi(&self, k: usize, forward: bool) -> [(usize, f64); TAPS] {
        self.along_phi(k, mirrored(BIASED, forward), 1.0 / (420.0 * self.h_phi()))
    }

    /// Ninth-order biased ∂θ.
    pub fn wide_biased_theta(&self, k: usize, parity: Parity, forward: bool) -> [(usize, f64); WIDE_TAPS] {
        self.along_theta(k, parity, mirrored(WIDE_BIASED, forward), 1.0 / (2520.0 * self.h_theta()))
    }

    /// Ninth-order biased ∂φ.
    pub fn wide_biased_phi(&self, k: usize, forward: bool) -> [(usize, f64); WIDE_TAPS] {
        self.along_phi(k, mirrored(WIDE_BIASED, forward), 1.0 / (2520.0 * self.h_phi()))
    }

    pub fn d_theta<T: Field>(&self, f: &[T], parity: Parity) -> Vec<T> {
        assert_eq!(f.len(), self.len());
        (0..self.len())
            .map(|k| apply(&self.stencil_theta(k, parity), f))
            .collect()
    }

    pub fn d_phi<T: Field>(&self, f: &[T]) -> Vec<T> {
        assert_eq!(f.len(), self.len());
        (0..self.len()).map(|k| apply(&self.stencil_phi(k), f)).collect()
    }

    /// Fejér first-rule weights in θ (for ∫ g(θ) sin θ dθ) times the φ spacing,
    /// so that Σ w_k f_k ≈ ∫_{S²} f dA.
    pub fn quad_weights(&self) -> Vec<f64> {
        let n = self.n_theta;
        let wt: Vec<f64> = (0..n)
            .map(|i| {
                let t = self.theta(i);
                let s: f64 = (1..=n / 2)
                    .map(|k| (2.0 * k as f64 * t).cos() / (4.0 * (k * k) as f64 - 1.0))
                    .sum();
                2.0 / n as f64 * (1.0 - 2.0 * s)
            })
            .collect();
        let hp = self.h_phi();
        (0..self.len()).map(|k| wt[k / self.n_phi] * hp).collect()
    }

    /// Same grid with both sizes doubled.
    pub fn refined(&self) -> Self {
        Self { n_theta: 2 * self.n_theta, n_phi: 2 * self.n_phi }
    }
}

pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Values that finite-difference stencils can act on.
pub trait Field: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl<const R: usize, const C: usize> Field for nalgebra::SMatrix<f64, R, C> {
    fn zero() -> Self {
        Self::zeros()
    }
}

#[inline]
fn apply<T: Field>(st: &[(usize, f64); TAPS], f: &[T]) -> T {
    st.iter().fold(T::zero(), |acc, &(n, w)| acc + f[n] * w)
}

/// Σ w_k f_k with a fixed pairwise order.
pub fn integrate(w: &[f64], f: &[f64]) -> f64 {
    let prod: Vec<f64> = w.iter().zip(f).map(|(a, b)| a * b).collect();
    pairwise_sum(&prod)
}

pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let m = v.len() / 2;
    pairwise_sum(&v[..m]) + pairwise_sum(&v[m..])
}

/// Least-squares slope of log(err) against log(h) over successive refinements
/// (each halving h).
pub fn convergence_order(errs: &[f64]) -> f64 {
    let n = errs.len();
    if n < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = (0..n).map(|i| -(i as f64) * 2f64.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
