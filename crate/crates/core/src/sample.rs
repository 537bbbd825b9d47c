//! Smooth test functions on S²: polynomials in (x, y, z) restricted to the
//! unit sphere, with exact derivatives in the (θ, φ) chart.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{direction, Grid};

/// Value and chart derivatives of a function at one point:
/// (f, f_θ, f_φ, f_θθ, f_θφ, f_φφ).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub f: f64,
    pub t: f64,
    pub p: f64,
    pub tt: f64,
    pub tp: f64,
    pub pp: f64,
}

impl Jet {
    pub fn constant(c: f64) -> Self {
        Self { f: c, ..Default::default() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { f: self.f * s, t: self.t * s, p: self.p * s, tt: self.tt * s, tp: self.tp * s, pp: self.pp * s }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { f: self.f + o.f, t: self.t + o.t, p: self.p + o.p, tt: self.tt + o.tt, tp: self.tp + o.tp, pp: self.pp + o.pp }
    }
}

/// A smooth function on S² with exact chart derivatives.
pub trait SphereFn {
    fn jet(&self, theta: f64, phi: f64) -> Jet;

    fn value(&self, theta: f64, phi: f64) -> f64 {
        self.jet(theta, phi).f
    }

    fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len())
            .map(|k| {
                let (i, j) = grid.ij(k);
                self.value(grid.theta(i), grid.phi(j))
            })
            .collect()
    }
}

/// Sum of monomials c·x^a y^b z^c.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly3 {
    pub terms: Vec<(f64, [u32; 3])>,
}

fn pw(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

impl Poly3 {
    pub fn zero() -> Self {
        Self { terms: vec![] }
    }

    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        self.terms.iter().map(|(c, e)| c * pw(p[0], e[0]) * pw(p[1], e[1]) * pw(p[2], e[2])).sum()
    }

    pub fn grad(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let mut g = Vector3::zeros();
        for (c, e) in &self.terms {
            for a in 0..3 {
                if e[a] == 0 {
                    continue;
                }
                let mut m = *c * e[a] as f64;
                for b in 0..3 {
                    let k = if a == b { e[b] - 1 } else { e[b] };
                    m *= pw(p[b], k);
                }
                g[a] += m;
            }
        }
        g
    }

    pub fn hessian(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        let mut h = Matrix3::zeros();
        for (c, e) in &self.terms {
            for a in 0..3 {
                for b in 0..3 {
                    let mut k = *e;
                    let mut m = *c;
                    for d in [a, b] {
                        if k[d] == 0 {
                            m = 0.0;
                            break;
                        }
                        m *= k[d] as f64;
                        k[d] -= 1;
                    }
                    if m != 0.0 {
                        h[(a, b)] += m * pw(p[0], k[0]) * pw(p[1], k[1]) * pw(p[2], k[2]);
                    }
                }
            }
        }
        h
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|(c, e)| (c * s, *e)).collect() }
    }

    /// Random polynomial with monomials of degree 1..=`max_deg` and
    /// coefficients shrinking geometrically with the degree.
    pub fn random<R: Rng>(rng: &mut R, max_deg: u32) -> Self {
        let mut terms = vec![];
        for deg in 1..=max_deg {
            let decay = 0.6f64.powi(deg as i32 - 1);
            for a in 0..=deg {
                for b in 0..=deg - a {
                    let c = deg - a - b;
                    terms.push((rng.gen_range(-1.0..1.0) * decay, [a, b, c]));
                }
            }
        }
        Self { terms }
    }

    /// Maximum of |p| over a dense latitude–longitude sample of S².
    pub fn sup_on_sphere(&self) -> f64 {
        let g = Grid { n_theta: 96, n_phi: 192 };
        (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                self.eval(&g.dir(i, j)).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl SphereFn for Poly3 {
    fn jet(&self, theta: f64, phi: f64) -> Jet {
        let d = direction(theta, phi);
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        let dt = Vector3::new(ct * cp, ct * sp, -st);
        let dp = Vector3::new(-st * sp, st * cp, 0.0);
        let dtt = -d;
        let dtp = Vector3::new(-ct * sp, ct * cp, 0.0);
        let dpp = Vector3::new(-st * cp, -st * sp, 0.0);
        let g = self.grad(&d);
        let h = self.hessian(&d);
        Jet {
            f: self.eval(&d),
            t: g.dot(&dt),
            p: g.dot(&dp),
            tt: dt.dot(&(h * dt)) + g.dot(&dtt),
            tp: dt.dot(&(h * dp)) + g.dot(&dtp),
            pp: dp.dot(&(h * dp)) + g.dot(&dpp),
        }
    }
}

/// Radius function ρ = base + p(d) of a star-shaped surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialFn {
    pub base: f64,
    pub pert: Poly3,
}

impl RadialFn {
    pub fn sphere(rho: f64) -> Self {
        Self { base: rho, pert: Poly3::zero() }
    }

    /// ρ = base + p with p a random polynomial of degree ≤ `max_deg`
    /// normalized to sup-norm `amp` on the sphere.
    pub fn random<R: Rng>(rng: &mut R, base: f64, amp: f64, max_deg: u32) -> Self {
        let p = Poly3::random(rng, max_deg);
        let s = p.sup_on_sphere();
        Self { base, pert: p.scaled(amp / s) }
    }
}

impl SphereFn for RadialFn {
    fn jet(&self, theta: f64, phi: f64) -> Jet {
        self.pert.jet(theta, phi).add(&Jet::constant(self.base))
    }
}

/// A vector of polynomial components evaluated on S²; used for smooth
/// random vector and tensor fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyField {
    pub comps: Vec<Poly3>,
}

impl PolyField {
    /// `n` random components of degree ≤ `max_deg`, each scaled to sup-norm 1.
    pub fn random<R: Rng>(rng: &mut R, n: usize, max_deg: u32) -> Self {
        let comps = (0..n)
            .map(|_| {
                let p = Poly3::random(rng, max_deg);
                let s = p.sup_on_sphere();
                p.scaled(1.0 / s)
            })
            .collect();
        Self { comps }
    }

    pub fn eval(&self, d: &Vector3<f64>) -> Vec<f64> {
        self.comps.iter().map(|p| p.eval(d)).collect()
    }

    /// Values at every grid node.
    pub fn sample(&self, grid: &Grid) -> Vec<Vec<f64>> {
        (0..grid.len())
            .map(|k| {
                let (i, j) = grid.ij(k);
                self.eval(&grid.dir(i, j))
            })
            .collect()
    }
}
