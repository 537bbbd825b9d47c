//! Re-expressing a sampled surface of H³ as a radial graph over the grid
//! directions.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::grid::{Grid, Parity};
use crate::lorentz::{spatial, LorentzVec};
use crate::spline::Interpolant;

use super::RadialSurface;

/// Interpolant of the sampled positions (θ, φ) ↦ p.
struct DirectionMap {
    comps: Vec<Interpolant>,
}

impl DirectionMap {
    fn new(grid: &Grid, p: &[Vector3<f64>]) -> Self {
        let comps = (0..3)
            .map(|c| Interpolant::new(grid, &p.iter().map(|v| v[c]).collect::<Vec<_>>(), Parity::Even))
            .collect();
        Self { comps }
    }

    /// p, ∂θp, ∂φp.
    fn eval(&self, t: f64, ph: f64) -> [Vector3<f64>; 3] {
        let mut out = [Vector3::zeros(); 3];
        for (c, s) in self.comps.iter().enumerate() {
            let (v, dt, dp) = s.eval_grad(t, ph);
            out[0][c] = v;
            out[1][c] = dt;
            out[2][c] = dp;
        }
        out
    }

    /// Parameters whose image points in direction `d`, by damped Newton
    /// from (t, ph) in the tangent plane of d.
    fn invert(&self, d: &Vector3<f64>, mut t: f64, mut ph: f64) -> Option<(f64, f64, Vector3<f64>)> {
        let a1 = if d[2].abs() < 0.9 { Vector3::z().cross(d) } else { Vector3::x().cross(d) }.normalize();
        let a2 = d.cross(&a1);
        for _ in 0..40 {
            let [p, pt, pp] = self.eval(t, ph);
            let r = p.norm();
            let u = p / r;
            if u.dot(d) <= 0.0 {
                return None;
            }
            let res = Vector2::new((u - d).dot(&a1), (u - d).dot(&a2));
            if res.norm() < 1e-15 {
                return Some((t, ph, p));
            }
            let ut = (pt - u * u.dot(&pt)) / r;
            let up = (pp - u * u.dot(&pp)) / r;
            let j = Matrix2::new(ut.dot(&a1), up.dot(&a1), ut.dot(&a2), up.dot(&a2));
            let mut step = j.try_inverse()? * (-res);
            let len = step.norm();
            if len > 0.25 {
                step *= 0.25 / len;
            }
            t += step[0];
            ph += step[1];
        }
        let [p, ..] = self.eval(t, ph);
        ((p / p.norm() - d).norm() < 1e-12).then_some((t, ph, p))
    }
}

/// Resamples positions in H³ as ρ over the grid directions. Fails when the
/// direction map of the positions is not an orientation-preserving
/// bijection near some node.
pub fn radial_resample(grid: Grid, x: &[LorentzVec]) -> Result<RadialSurface> {
    let p: Vec<Vector3<f64>> = x.iter().map(spatial).collect();
    let u: Vec<Vector3<f64>> = p.iter().map(|v| v / v.norm()).collect();
    let ut = grid.d_theta(&u, Parity::Even);
    let up = grid.d_phi(&u);
    let bad: Vec<usize> =
        (0..grid.len()).filter(|&k| !(ut[k].cross(&up[k]).dot(&u[k]) > 0.0 && p[k].norm() > 0.0)).collect();
    if let Some(&k) = bad.first() {
        let (i, j) = grid.ij(k);
        return Err(Error::Precondition(format!(
            "surface is not a radial graph: direction map folds at {} nodes, first at row {i}, column {j}",
            bad.len()
        )));
    }
    let map = DirectionMap::new(&grid, &p);
    let mut rho = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        let d = grid.dir(i, j);
        let found = map.invert(&d, grid.theta(i), grid.phi(j)).or_else(|| {
            let near = (0..grid.len()).max_by(|&a, &b| u[a].dot(&d).total_cmp(&u[b].dot(&d)))?;
            let (a, b) = grid.ij(near);
            map.invert(&d, grid.theta(a), grid.phi(b))
        });
        let Some((_, _, q)) = found else {
            return Err(Error::Precondition(format!("surface is not a radial graph near row {i}, column {j}")));
        };
        rho.push(q.norm().asinh());
    }
    RadialSurface::new(grid, rho)
}

/// Interpolates ρ onto another grid.
pub fn regrid(s: &RadialSurface, grid: Grid) -> Result<RadialSurface> {
    if grid == s.grid {
        return Ok(s.clone());
    }
    let f = Interpolant::new(&s.grid, &s.rho, Parity::Even);
    let rho = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            f.eval(grid.theta(i), grid.phi(j))
        })
        .collect();
    RadialSurface::new(grid, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::radial_point;

    #[test]
    fn recovers_a_shifted_parameterization() {
        let g = Grid::new(24, 48).unwrap();
        let truth = |d: &Vector3<f64>| 1.0 + 0.1 * d[0] * d[1] + 0.05 * d[2];
        // sample at directions rotated away from the grid
        let rot = nalgebra::Rotation3::from_euler_angles(0.1, -0.05, 0.2);
        let x: Vec<LorentzVec> = (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                let d = rot * g.dir(i, j);
                radial_point(truth(&d), &d)
            })
            .collect();
        let s = radial_resample(g, &x).unwrap();
        let err = (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                (s.rho[k] - truth(&g.dir(i, j))).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn regrid_of_a_low_degree_surface() {
        let truth = |d: &Vector3<f64>| 1.0 + 0.1 * d[0] * d[1] + 0.05 * d[2];
        let sample = |g: Grid| {
            let rho = (0..g.len()).map(|k| truth(&g.dir(g.ij(k).0, g.ij(k).1))).collect();
            RadialSurface::new(g, rho).unwrap()
        };
        let fine = Grid::new(24, 48).unwrap();
        let s = regrid(&sample(Grid::new(16, 32).unwrap()), fine).unwrap();
        let err = s.rho.iter().zip(&sample(fine).rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }
}
