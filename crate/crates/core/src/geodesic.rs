//! Closed geodesics of a Riemannian metric on S², found as critical points
//! of a discrete energy on closed polygons.
//!
//! The metric is carried as a smooth ambient tensor G(p) = H + (tr H / 2) ppᵀ,
//! where H is the metric extended by zero along the normal; G is constant for
//! round metrics. A chord p → q has length |q − p|_G(m) · α / (2 sin(α/2)),
//! with m the normalized midpoint and α the angle between p and q, which is
//! exact for round metrics.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Parity;
use crate::spline::PeriodicSpline2D;
use crate::surface::FormField;

#[derive(Clone, Debug)]
pub struct GeodesicOptions {
    pub points: usize,
    pub random_seeds: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Convergence threshold on |∇E| relative to E.
    pub tol: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self { points: 64, random_seeds: 10, seed: 7, max_iter: 200, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedGeodesic {
    pub length: f64,
    /// Final |∇E| / E.
    pub residual: f64,
    pub converged: bool,
    pub seed_index: usize,
    pub iterations: usize,
    #[serde(skip)]
    pub curve: Vec<Vector3<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicReport {
    /// Sorted by (length, seed index).
    pub geodesics: Vec<ClosedGeodesic>,
}

impl GeodesicReport {
    pub fn shortest(&self) -> Option<&ClosedGeodesic> {
        self.geodesics.iter().find(|g| g.converged)
    }
}

/// The metric as a smooth field of symmetric 3×3 matrices over S².
pub struct AmbientMetric {
    comps: Vec<PeriodicSpline2D>,
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl AmbientMetric {
    pub fn new(metric: &FormField) -> Result<Self> {
        let g = metric.grid;
        if let Some(k) = metric.first_indefinite() {
            let (i, j) = g.ij(k);
            return Err(Error::Precondition(format!("metric is not positive definite at node ({i}, {j})")));
        }
        let mut vals = vec![vec![0.0; g.len()]; 6];
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            let (et, ep) = g.sphere_frame(i, j);
            let s = g.theta(i).sin();
            let h = metric.m[k];
            let mut t = et * et.transpose() * h[(0, 0)]
                + (et * ep.transpose() + ep * et.transpose()) * (h[(0, 1)] / s)
                + ep * ep.transpose() * (h[(1, 1)] / (s * s));
            let p = g.dir(i, j);
            t += p * p.transpose() * (t.trace() / 2.0);
            for (c, &(a, b)) in PAIRS.iter().enumerate() {
                vals[c][k] = t[(a, b)];
            }
        }
        Ok(Self { comps: vals.iter().map(|v| PeriodicSpline2D::new(&g, v, Parity::Even)).collect() })
    }

    pub fn eval(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        let t = p[2].clamp(-1.0, 1.0).acos();
        let f = p[1].atan2(p[0]);
        let mut m = Matrix3::zeros();
        for (c, &(a, b)) in PAIRS.iter().enumerate() {
            let v = self.comps[c].eval(t, f);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
        m
    }

    /// Length of the chord from p to q (unit vectors).
    pub fn chord(&self, p: &Vector3<f64>, q: &Vector3<f64>) -> f64 {
        let d = q - p;
        let m = (p + q).normalize();
        let c = d.norm();
        let alpha = 2.0 * (c / 2.0).min(1.0).asin();
        let factor = if alpha < 1e-8 { 1.0 } else { alpha / (2.0 * (alpha / 2.0).sin()) };
        d.dot(&(self.eval(&m) * d)).max(0.0).sqrt() * factor
    }

    pub fn length(&self, curve: &[Vector3<f64>]) -> f64 {
        let n = curve.len();
        (0..n).map(|k| self.chord(&curve[k], &curve[(k + 1) % n])).sum()
    }

    fn energy(&self, curve: &[Vector3<f64>]) -> f64 {
        let n = curve.len();
        (0..n).map(|k| self.chord(&curve[k], &curve[(k + 1) % n]).powi(2)).sum()
    }
}

fn tangent_basis(p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = if p[0].abs() < 0.8 { Vector3::x() } else { Vector3::y() };
    let u = (a - p * p.dot(&a)).normalize();
    (u, p.cross(&u))
}

fn great_circle(n: usize, axis: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let (u, w) = tangent_basis(&axis.normalize());
    (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            u * t.cos() + w * t.sin()
        })
        .collect()
}

struct Segment<'a> {
    metric: &'a AmbientMetric,
    p: Vector3<f64>,
    q: Vector3<f64>,
    bp: (Vector3<f64>, Vector3<f64>),
    bq: (Vector3<f64>, Vector3<f64>),
}

impl Segment<'_> {
    fn energy(&self, x: &[f64; 4]) -> f64 {
        let p = (self.p + self.bp.0 * x[0] + self.bp.1 * x[1]).normalize();
        let q = (self.q + self.bq.0 * x[2] + self.bq.1 * x[3]).normalize();
        self.metric.chord(&p, &q).powi(2)
    }

    fn grad_hess(&self) -> ([f64; 4], [[f64; 4]; 4]) {
        let eg = 1e-6;
        let eh = 1e-4;
        let at = |i: usize, s: f64, j: usize, t: f64| {
            let mut x = [0.0; 4];
            x[i] += s;
            x[j] += t;
            self.energy(&x)
        };
        let e0 = self.energy(&[0.0; 4]);
        let mut g = [0.0; 4];
        let mut h = [[0.0; 4]; 4];
        for i in 0..4 {
            g[i] = (at(i, eg, i, 0.0) - at(i, -eg, i, 0.0)) / (2.0 * eg);
            h[i][i] = (at(i, eh, i, 0.0) - 2.0 * e0 + at(i, -eh, i, 0.0)) / (eh * eh);
            for j in 0..i {
                let v = (at(i, eh, j, eh) - at(i, eh, j, -eh) - at(i, -eh, j, eh) + at(i, -eh, j, -eh)) / (4.0 * eh * eh);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        (g, h)
    }
}

fn refine(metric: &AmbientMetric, mut curve: Vec<Vector3<f64>>, opts: &GeodesicOptions, seed_index: usize) -> ClosedGeodesic {
    let n = curve.len();
    let mut mu = 1e-6;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let assemble = |curve: &[Vector3<f64>]| {
        let basis: Vec<_> = curve.iter().map(tangent_basis).collect();
        let mut g = DVector::<f64>::zeros(2 * n);
        let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for k in 0..n {
            let k2 = (k + 1) % n;
            let seg = Segment { metric, p: curve[k], q: curve[k2], bp: basis[k], bq: basis[k2] };
            let (sg, sh) = seg.grad_hess();
            let idx = [2 * k, 2 * k + 1, 2 * k2, 2 * k2 + 1];
            for a in 0..4 {
                g[idx[a]] += sg[a];
                for b in 0..4 {
                    h[(idx[a], idx[b])] += sh[a][b];
                }
            }
        }
        (basis, g, h)
    };
    let mut energy = metric.energy(&curve);
    let (mut basis, mut g, mut h) = assemble(&curve);
    while iterations < opts.max_iter {
        residual = g.norm() / energy;
        if residual < opts.tol {
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..30 {
            let lhs = &h * &h + DMatrix::identity(2 * n, 2 * n) * (mu * h.norm_squared().max(1e-300) / (2 * n) as f64);
            let rhs = -(&h * &g);
            let Some(step) = lhs.cholesky().map(|c| c.solve(&rhs)) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<Vector3<f64>> = (0..n)
                .map(|k| (curve[k] + basis[k].0 * step[2 * k] + basis[k].1 * step[2 * k + 1]).normalize())
                .collect();
            let (tb, tg, th) = assemble(&trial);
            if tg.norm() < g.norm() {
                curve = trial;
                energy = metric.energy(&curve);
                basis = tb;
                g = tg;
                h = th;
                mu = (mu / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    residual = residual.min(g.norm() / energy);
    ClosedGeodesic {
        length: metric.length(&curve),
        residual,
        converged: residual < opts.tol,
        seed_index,
        iterations,
        curve,
    }
}

/// Searches for short closed geodesics from the three coordinate great
/// circles and `opts.random_seeds` random ones.
pub fn shortest_closed_geodesic(metric: &FormField, opts: &GeodesicOptions) -> Result<GeodesicReport> {
    let am = AmbientMetric::new(metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut axes = vec![Vector3::x(), Vector3::y(), Vector3::z()];
    while axes.len() < 3 + opts.random_seeds {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            axes.push(v.normalize());
        }
    }
    let mut found: Vec<ClosedGeodesic> = axes
        .iter()
        .enumerate()
        .map(|(s, a)| refine(&am, great_circle(opts.points, a), opts, s))
        .collect();
    found.sort_by(|a, b| a.length.total_cmp(&b.length).then(a.seed_index.cmp(&b.seed_index)));
    Ok(GeodesicReport { geodesics: found })
}
