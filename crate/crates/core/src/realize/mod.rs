//! Realization of a prescribed metric on S² as the induced metric, or the
//! third fundamental form, of a convex surface in H³.
//!
//! Unknowns are the positions at the grid nodes in the chart of the target.
//! A metric of the target chart is matched up to ambient isometry, which the
//! solver leaves to a small Tikhonov term. The residual compares the target
//! with the metric of forward- and of backward-biased difference tangents,
//! stacked, so that grid-scale oscillations are not near-solutions of the
//! linearized system.

mod gauge;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dual::{admissibility_i, admissibility_iii, dualize, Verdict};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicOptions;
use crate::grid::{Grid, Parity};
use crate::lorentz::{minkowski_inner, KillingElement, LorentzVec};
use crate::sample::RadialFn;
use crate::sparse::{pcg, Sparse, SparseCholesky};
use crate::surface::{
    embed, fundamental_forms, radial_resample, Ambient, FormField, Forms, FrameField, RadialSurface,
};

pub use gauge::{align_points, align_to_surface, gauge_align, Alignment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Target {
    /// The target is the induced metric.
    #[serde(rename = "I")]
    Metric,
    /// The target is the third fundamental form.
    #[serde(rename = "III")]
    ThirdForm,
}

#[derive(Clone, Debug)]
pub struct RealizeOptions {
    /// Required ‖form − h‖∞ / ‖h‖∞ of the result.
    pub tol: f64,
    pub max_iter: usize,
    /// Tikhonov weight relative to the largest diagonal entry of JᵀJ.
    pub tikhonov: f64,
    /// When set, the initial surface is moved by a random isometry and
    /// perturbed by a random radial bump drawn from this seed.
    pub seed: Option<u64>,
    pub geodesic: GeodesicOptions,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 60, tikhonov: 1e-12, seed: None, geodesic: GeodesicOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizeReport {
    pub target: Target,
    /// Stacked residual norm after each accepted step, starting with the
    /// initial surface.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    /// ‖form − h‖∞ / ‖h‖∞ with the form computed by the standard pipeline.
    pub form_residual: f64,
    pub converged: bool,
    /// Why the iteration ended.
    pub stop: String,
    pub min_principal_curvature: f64,
    pub max_principal_curvature: f64,
    /// Hyperbolic distance from the origin to the normalized centroid of the
    /// nodes; the solver does not fix this gauge.
    pub centroid_offset: f64,
    pub admissibility: Verdict,
}

#[derive(Clone, Debug)]
pub struct Realization {
    /// The surface re-sampled as a radial graph.
    pub surface: RadialSurface,
    /// The surface in the chart of the target.
    pub frame: FrameField,
    pub report: RealizeReport,
}

/// Nodewise least-squares problem ‖I(x) − h‖ in the unit sphere frame.
struct Problem {
    grid: Grid,
    ambient: Ambient,
    target: Vec<[f64; 3]>,
    scale: Vec<[f64; 3]>,
}

impl Problem {
    fn new(h: &FormField, ambient: Ambient) -> Self {
        let g = h.grid;
        let scale: Vec<[f64; 3]> = (0..g.len())
            .map(|k| {
                let s = g.theta(g.ij(k).0).sin();
                [1.0, std::f64::consts::SQRT_2 / s, 1.0 / (s * s)]
            })
            .collect();
        let target = (0..g.len())
            .map(|k| {
                let m = &h.m[k];
                let c = &scale[k];
                [m[(0, 0)] * c[0], m[(0, 1)] * c[1], m[(1, 1)] * c[2]]
            })
            .collect();
        Self { grid: g, ambient, target, scale }
    }

    fn quadric(&self) -> f64 {
        if self.ambient == Ambient::DeSitter {
            1.0
        } else {
            -1.0
        }
    }

    fn tangents(&self, x: &[LorentzVec], forward: bool) -> (Vec<LorentzVec>, Vec<LorentzVec>) {
        let g = &self.grid;
        let apply = |st: &[(usize, f64)]| st.iter().fold(LorentzVec::zeros(), |acc, &(m, w)| acc + x[m] * w);
        (0..g.len())
            .map(|k| (apply(&g.wide_biased_theta(k, Parity::Even, forward)), apply(&g.wide_biased_phi(k, forward))))
            .unzip()
    }

    fn residual(&self, x: &[LorentzVec]) -> DVector<f64> {
        let n = self.grid.len();
        let mut r = DVector::zeros(6 * n);
        for (side, forward) in [true, false].into_iter().enumerate() {
            let (tt, tp) = self.tangents(x, forward);
            for k in 0..n {
                let c = &self.scale[k];
                let h = &self.target[k];
                let o = 3 * (side * n + k);
                r[o] = minkowski_inner(&tt[k], &tt[k]) * c[0] - h[0];
                r[o + 1] = minkowski_inner(&tt[k], &tp[k]) * c[1] - h[1];
                r[o + 2] = minkowski_inner(&tp[k], &tp[k]) * c[2] - h[2];
            }
        }
        r
    }

    /// Basis of the tangent space of the quadric at x: three of the
    /// projected coordinate vectors, leaving out the one along which x is
    /// largest.
    fn basis(&self, x: &LorentzVec) -> [LorentzVec; 3] {
        let q = minkowski_inner(x, x);
        let drop = (0..4).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap();
        let mut out = [LorentzVec::zeros(); 3];
        for (slot, i) in (0..4).filter(|&i| i != drop).enumerate() {
            let e = LorentzVec::ith(i, 1.0);
            out[slot] = e - x * (minkowski_inner(&e, x) / q);
        }
        out
    }

    fn jacobian(&self, x: &[LorentzVec], basis: &[[LorentzVec; 3]]) -> Sparse {
        let g = &self.grid;
        let n = g.len();
        let mut rows = Vec::with_capacity(6 * n);
        for forward in [true, false] {
            let (tt, tp) = self.tangents(x, forward);
            for k in 0..n {
                let c = &self.scale[k];
                let st = g.wide_biased_theta(k, Parity::Even, forward);
                let sp = g.wide_biased_phi(k, forward);
                let mut r = [Vec::with_capacity(30), Vec::with_capacity(60), Vec::with_capacity(30)];
                for &(l, w) in &st {
                    for (m, b) in basis[l].iter().enumerate() {
                        r[0].push((3 * l + m, 2.0 * w * minkowski_inner(b, &tt[k]) * c[0]));
                        r[1].push((3 * l + m, w * minkowski_inner(b, &tp[k]) * c[1]));
                    }
                }
                for &(l, w) in &sp {
                    for (m, b) in basis[l].iter().enumerate() {
                        r[1].push((3 * l + m, w * minkowski_inner(b, &tt[k]) * c[1]));
                        r[2].push((3 * l + m, 2.0 * w * minkowski_inner(b, &tp[k]) * c[2]));
                    }
                }
                rows.extend(r);
            }
        }
        Sparse::from_rows(3 * n, rows)
    }

    fn retract(&self, x: &[LorentzVec], basis: &[[LorentzVec; 3]], step: &DVector<f64>) -> Vec<LorentzVec> {
        let q = self.quadric();
        x.iter()
            .enumerate()
            .map(|(k, p)| {
                let v = (0..3).fold(*p, |acc, m| acc + basis[k][m] * step[3 * k + m]);
                let s = (minkowski_inner(&v, &v) * q).sqrt();
                v / s
            })
            .collect()
    }

    fn convex(&self, x: &[LorentzVec]) -> Option<Forms> {
        let f = FrameField::from_positions(self.grid, self.ambient, x.to_vec()).ok()?;
        let forms = fundamental_forms(&f).ok()?;
        forms.nonconvex.is_empty().then_some(forms)
    }
}

fn add_diagonal(a: &mut Sparse, d: &[f64]) {
    for (i, row) in a.rows.iter_mut().enumerate() {
        match row.binary_search_by_key(&i, |e| e.0) {
            Ok(p) => row[p].1 += d[i],
            Err(p) => row.insert(p, (i, d[i])),
        }
    }
}

struct Solve {
    x: Vec<LorentzVec>,
    history: Vec<f64>,
    iterations: usize,
    stop: String,
}

/// Levenberg–Marquardt with Armijo acceptance; every accepted iterate is
/// convex and strictly decreases the residual.
fn solve(p: &Problem, mut x: Vec<LorentzVec>, opts: &RealizeOptions) -> Result<Solve> {
    if p.convex(&x).is_none() {
        return Err(Error::Precondition("initial surface is not strictly convex".into()));
    }
    let mut r = p.residual(&x);
    let mut history = vec![r.norm()];
    let mut lambda = 1e-6;
    let mut stop = format!("iteration limit {}", opts.max_iter);
    let mut iterations = 0;
    // A factorization from an earlier iterate preconditions later solves;
    // it is refreshed when conjugate gradients stop converging quickly.
    let mut factor: Option<SparseCholesky> = None;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let basis: Vec<[LorentzVec; 3]> = x.iter().map(|v| p.basis(v)).collect();
        let j = p.jacobian(&x, &basis);
        let jtj = j.normal(0.0);
        let diag: Vec<f64> = (0..jtj.nrows).map(|i| jtj.rows[i].iter().find(|e| e.0 == i).map_or(0.0, |e| e.1)).collect();
        let floor = opts.tikhonov * jtj.max_diag();
        let grad = -j.transpose().mul_vec(&r);
        let cost = r.norm_squared();
        let mut accepted = None;
        while lambda <= 1e10 {
            let mut a = jtj.clone();
            add_diagonal(&mut a, &diag.iter().map(|d| lambda * d + floor).collect::<Vec<_>>());
            let mut step = None;
            if let Some(f) = &factor {
                let (s, ok) = pcg(&a, |v| f.solve_vec(v), &grad, 1e-10, 15)?;
                step = ok.then_some(s);
            }
            let step = match step {
                Some(s) => s,
                None => {
                    let f = SparseCholesky::new(&a)?;
                    let s = f.solve_vec(&grad)?;
                    factor = Some(f);
                    s
                }
            };
            let predicted = 2.0 * grad.dot(&step) - j.mul_vec(&step).norm_squared();
            let cand = p.retract(&x, &basis, &step);
            let rc = p.residual(&cand);
            let gain = cost - rc.norm_squared();
            if gain > 1e-4 * predicted && gain > 0.0 && p.convex(&cand).is_some() {
                accepted = Some((cand, rc, gain, step.amax()));
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
        }
        let Some((cand, rc, gain, size)) = accepted else {
            stop = "line search found no decrease".into();
            break;
        };
        x = cand;
        r = rc;
        history.push(r.norm());
        if gain <= 1e-13 * cost || size < 1e-13 {
            stop = "stationary".into();
            break;
        }
    }
    Ok(Solve { x, history, iterations, stop })
}

/// The starting positions: `init`, or the round sphere with the area of h
/// (as surface for I, as dual surface for III), optionally moved and
/// perturbed.
fn initial_positions(h: &FormField, target: Target, init: Option<&RadialSurface>, seed: Option<u64>) -> Result<Vec<LorentzVec>> {
    let g = h.grid;
    let ratio = h.area() / (4.0 * std::f64::consts::PI);
    let mut s = match init {
        Some(s) if s.grid != g => return Err(Error::Format("initial surface and target use different grids".into())),
        Some(s) => s.clone(),
        None => {
            let rho = match target {
                Target::Metric => ratio.sqrt().asinh(),
                Target::ThirdForm if ratio > 1.0 => ratio.sqrt().acosh(),
                Target::ThirdForm => {
                    return Err(Error::Inadmissible(format!("area {} is not above 4π", h.area())));
                }
            };
            RadialSurface::sphere(g, rho)
        }
    };
    let mut iso = nalgebra::Matrix4::identity();
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = s.rho.iter().sum::<f64>() / s.rho.len() as f64;
        let bump = RadialSurface::from_fn(g, &RadialFn::random(&mut rng, base, 0.02 * base, 3))?;
        s = RadialSurface::new(g, s.rho.iter().zip(&bump.rho).map(|(a, b)| a + b - base).collect())?;
        iso = KillingElement::random(&mut rng, 0.1).flow(1.0);
    }
    let f = embed(&s)?;
    let x = match target {
        Target::Metric => f.x,
        Target::ThirdForm => dualize(&f)?.x,
    };
    Ok(x.iter().map(|p| iso * p).collect())
}

fn centroid_offset(x: &[LorentzVec]) -> f64 {
    let c = x.iter().fold(LorentzVec::zeros(), |a, p| a + p);
    let q = -minkowski_inner(&c, &c);
    if q > 0.0 {
        (c[0] / q.sqrt()).max(1.0).acosh()
    } else {
        f64::INFINITY
    }
}

fn realize(h: &FormField, target: Target, init: Option<&RadialSurface>, opts: &RealizeOptions) -> Result<Realization> {
    let admissibility = match target {
        Target::Metric => admissibility_i(h)?,
        Target::ThirdForm => admissibility_iii(h, &opts.geodesic)?,
    };
    if !admissibility.admissible {
        return Err(Error::Inadmissible(admissibility.reasons.join("; ")));
    }
    let ambient = match target {
        Target::Metric => Ambient::Hyperbolic,
        Target::ThirdForm => Ambient::DeSitter,
    };
    let problem = Problem::new(h, ambient);
    let x0 = initial_positions(h, target, init, opts.seed)?;
    let sol = solve(&problem, x0, opts)?;
    let solved = FrameField::from_positions(h.grid, ambient, sol.x)?;
    let frame = match target {
        Target::Metric => solved,
        Target::ThirdForm => dualize(&solved)?,
    };
    let forms = fundamental_forms(&frame)?;
    let form = match target {
        Target::Metric => &forms.i,
        Target::ThirdForm => &forms.iii,
    };
    let form_residual = form.rel_diff(h);
    let surface = radial_resample(h.grid, &frame.x)?;
    let report = RealizeReport {
        target,
        residual_history: sol.history,
        iterations: sol.iterations,
        form_residual,
        converged: form_residual <= opts.tol,
        stop: sol.stop,
        min_principal_curvature: forms.b.min_curvature(),
        max_principal_curvature: forms.b.max_curvature(),
        centroid_offset: centroid_offset(&frame.x),
        admissibility,
    };
    Ok(Realization { surface, frame, report })
}

/// A convex surface whose induced metric is h. A run that ends above
/// `opts.tol` returns its best iterate with `report.converged` false.
pub fn realize_metric(h: &FormField, init: Option<&RadialSurface>, opts: &RealizeOptions) -> Result<Realization> {
    realize(h, Target::Metric, init, opts)
}

/// A convex surface whose third fundamental form is h, found as the dual of
/// a surface in de Sitter space with induced metric h.
pub fn realize_third_form(h: &FormField, init: Option<&RadialSurface>, opts: &RealizeOptions) -> Result<Realization> {
    realize(h, Target::ThirdForm, init, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{analytic_forms, FormKind};
    use rand::Rng;

    fn perturbed() -> RadialFn {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        RadialFn::random(&mut rng, 1.0, 0.1, 3)
    }

    #[test]
    fn jacobian_matches_differences() {
        let g = Grid::new(8, 16).unwrap();
        let h = FormField::round(g, FormKind::Target, 1.0);
        for ambient in [Ambient::Hyperbolic, Ambient::DeSitter] {
            let p = Problem::new(&h, ambient);
            let s = RadialSurface::from_fn(g, &perturbed()).unwrap();
            let f = embed(&s).unwrap();
            let x = if ambient == Ambient::Hyperbolic { f.x } else { dualize(&f).unwrap().x };
            let basis: Vec<_> = x.iter().map(|v| p.basis(v)).collect();
            let j = p.jacobian(&x, &basis);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let d = DVector::from_fn(3 * g.len(), |_, _| rng.gen_range(-1.0..1.0));
            let eps = 1e-6;
            let fd = (p.residual(&p.retract(&x, &basis, &(&d * eps))) - p.residual(&p.retract(&x, &basis, &(&d * -eps))))
                / (2.0 * eps);
            let lin = j.mul_vec(&d);
            assert!((&fd - &lin).amax() < 1e-6 * lin.amax(), "{}", (&fd - &lin).amax() / lin.amax());
        }
    }

    #[test]
    fn round_targets() {
        let g = Grid::new(16, 32).unwrap();
        let opts = RealizeOptions::default();
        let init = RadialSurface::sphere(g, 1.2);
        let h = FormField::round(g, FormKind::Target, 1f64.sinh().powi(2));
        let r = realize_metric(&h, Some(&init), &opts).unwrap();
        assert!(r.report.converged, "{:?}", r.report);
        let al = align_to_surface(&r.frame.x, &RadialSurface::sphere(g, 1.0)).unwrap();
        assert!(al.mismatch < 1e-8, "{}", al.mismatch);
        assert!(r.report.residual_history.windows(2).all(|w| w[1] < w[0]));

        let h = FormField::round(g, FormKind::Target, 1f64.cosh().powi(2));
        let r = realize_third_form(&h, None, &opts).unwrap();
        assert!(r.report.converged, "{:?}", r.report);
        assert!(r.surface.rho.iter().all(|x| (x - 1.0).abs() < 1e-8));
    }

    #[test]
    fn rejects_inadmissible_targets() {
        let g = Grid::new(12, 24).unwrap();
        let opts = RealizeOptions::default();
        let h = FormField::round(g, FormKind::Target, 0.25);
        assert!(matches!(realize_third_form(&h, None, &opts), Err(Error::Inadmissible(_))));
        let mut m = FormField::round(g, FormKind::Target, 1.0);
        // a hyperbolic cap of curvature −4 near the north pole
        for k in 0..g.len() {
            let (i, _) = g.ij(k);
            let t = g.theta(i);
            if t < 0.5 {
                m.m[k][(1, 1)] = (2.0 * t).sinh().powi(2) / 4.0;
            }
        }
        assert!(matches!(realize_metric(&m, None, &opts), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn round_trip_of_a_perturbed_sphere() {
        let g = Grid::new(16, 32).unwrap();
        let r = perturbed();
        let truth = RadialSurface::from_fn(g, &r).unwrap();
        let forms = analytic_forms(g, &r).unwrap();
        let opts = RealizeOptions { tol: 1e-4, ..Default::default() };
        let out = realize_metric(&forms.i, None, &opts).unwrap();
        assert!(out.report.converged, "{:?}", out.report);
        let al = align_points(&out.frame.x, &truth.positions()).unwrap();
        assert!(al.mismatch < 1e-4, "{}", al.mismatch);
    }
}
