//! Alignment of surfaces modulo the isometries of H³.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Parity;
use crate::lorentz::{minkowski_inner, spatial, KillingElement, LorentzVec};
use crate::spline::Interpolant;
use crate::surface::{radial_resample, RadialSurface};

#[derive(Clone, Debug, Serialize)]
pub struct Alignment {
    /// The isometry applied, as a 4×4 matrix acting on R⁴₁.
    #[serde(skip)]
    pub transform: Matrix4<f64>,
    #[serde(skip)]
    pub points: Vec<LorentzVec>,
    /// Largest remaining mismatch, in units of hyperbolic distance.
    pub mismatch: f64,
    pub iterations: usize,
}

/// Levenberg–Marquardt over exp(so(3,1)) with a central-difference Jacobian
/// in the six generator directions.
fn minimize(x: &[LorentzVec], residual: impl Fn(&[LorentzVec]) -> DVector<f64>) -> (Matrix4<f64>, usize) {
    let gens = KillingElement::basis();
    let moved = |a: &Matrix4<f64>| x.iter().map(|p| a * p).collect::<Vec<_>>();
    let mut a = Matrix4::identity();
    let mut r = residual(&moved(&a));
    let mut lambda = 1e-6;
    let eps = 1e-6;
    let mut iterations = 0;
    for _ in 0..60 {
        iterations += 1;
        let mut j = DMatrix::zeros(r.len(), 6);
        for (c, g) in gens.iter().enumerate() {
            let plus = residual(&moved(&(g.flow(eps) * a)));
            let minus = residual(&moved(&(g.flow(-eps) * a)));
            j.set_column(c, &((plus - minus) / (2.0 * eps)));
        }
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * &r;
        let cost = r.norm_squared();
        let mut accepted = None;
        while lambda < 1e12 {
            let mut m = jtj.clone();
            for i in 0..6 {
                m[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = m.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let k = gens.iter().zip(step.iter()).fold(KillingElement::zero(), |acc, (g, s)| acc.add(&g.scaled(*s)));
            let cand = k.flow(1.0) * a;
            let rc = residual(&moved(&cand));
            if rc.norm_squared() <= cost {
                accepted = Some((cand, rc, step.amax()));
                lambda = (lambda / 10.0).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }
        let Some((cand, rc, size)) = accepted else { break };
        let gain = cost - rc.norm_squared();
        a = cand;
        r = rc;
        if size < 1e-14 || gain <= 1e-28 + 1e-15 * cost {
            break;
        }
    }
    (a, iterations)
}

/// Hyperbolic distance from the chord, accurate for nearby points.
fn h_dist(a: &LorentzVec, b: &LorentzVec) -> f64 {
    let d = a - b;
    2.0 * (minkowski_inner(&d, &d).max(0.0).sqrt() / 2.0).asinh()
}

fn check_points(x: &[LorentzVec]) -> Result<()> {
    match x.iter().position(|p| !((minkowski_inner(p, p) + 1.0).abs() < 1e-8 && p[0] > 0.0)) {
        None => Ok(()),
        Some(k) => Err(Error::OffQuadric(format!("point {k} is not in H³"))),
    }
}

/// The isometry best matching `x` to `reference` node by node, in the
/// least-squares sense on R⁴. The mismatch is the largest hyperbolic
/// distance between matched nodes.
pub fn align_points(x: &[LorentzVec], reference: &[LorentzVec]) -> Result<Alignment> {
    if x.len() != reference.len() {
        return Err(Error::Format(format!("cannot match {} points to {}", x.len(), reference.len())));
    }
    check_points(x)?;
    check_points(reference)?;
    let residual = |y: &[LorentzVec]| {
        DVector::from_iterator(4 * y.len(), y.iter().zip(reference).flat_map(|(p, q)| (p - q).iter().copied().collect::<Vec<_>>()))
    };
    let (transform, iterations) = minimize(x, residual);
    let points: Vec<LorentzVec> = x.iter().map(|p| transform * p).collect();
    let mismatch = points.iter().zip(reference).map(|(p, q)| h_dist(p, q)).fold(0.0, f64::max);
    Ok(Alignment { transform, points, mismatch, iterations })
}

/// The isometry moving the points `x` onto the radial graph `reference`,
/// with no correspondence assumed. The mismatch is the largest radial gap.
pub fn align_to_surface(x: &[LorentzVec], reference: &RadialSurface) -> Result<Alignment> {
    check_points(x)?;
    let rho = Interpolant::new(&reference.grid, &reference.rho, Parity::Even);
    let gap = |p: &LorentzVec| {
        let v = spatial(p);
        let r = v.norm();
        let d = v / r;
        let theta = d[2].clamp(-1.0, 1.0).acos();
        let phi = d[1].atan2(d[0]).rem_euclid(std::f64::consts::TAU);
        r.asinh() - rho.eval(theta, phi)
    };
    let residual = |y: &[LorentzVec]| DVector::from_iterator(y.len(), y.iter().map(gap));
    let (transform, iterations) = minimize(x, residual);
    let points: Vec<LorentzVec> = x.iter().map(|p| transform * p).collect();
    let mismatch = points.iter().map(|p| gap(p).abs()).fold(0.0, f64::max);
    Ok(Alignment { transform, points, mismatch, iterations })
}

/// `s` moved by the isometry that best fits it onto `reference`, then
/// re-sampled on its own grid.
pub fn gauge_align(s: &RadialSurface, reference: &RadialSurface) -> Result<RadialSurface> {
    let al = align_to_surface(&s.positions(), reference)?;
    radial_resample(s.grid, &al.points)
}
