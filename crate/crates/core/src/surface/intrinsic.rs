//! Intrinsic quantities of forms on the sphere grid: Gaussian curvature,
//! the Codazzi residual and the connections ∇ (of I), ∇̃ (of III) and
//! ∇̄ (of II).
//!
//! Computations run in three charts: the polar (θ, φ) chart on the band
//! π/4 ≤ θ ≤ 3π/4 and azimuthal charts (θ cos φ, θ sin φ) around each pole,
//! where polar components are singular.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use super::{Ambient, FormField, Forms, ShapeField};
use crate::error::Result;
use crate::grid::{Grid, Parity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    North,
    Polar,
    South,
}

const CHARTS: [Chart; 3] = [Chart::North, Chart::Polar, Chart::South];

/// Christoffel symbols, indexed as gamma[c][(a, b)] = Γ^c_ab.
pub type Christoffel = [Matrix2<f64>; 2];

pub struct Atlas {
    grid: Grid,
    north: Vec<Matrix2<f64>>,
    south: Vec<Matrix2<f64>>,
}

/// Christoffel data of the three connections at one node, in the chart
/// that covers the node.
#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub chart: Chart,
    pub gamma: Christoffel,
    pub gamma_tilde: Christoffel,
    pub gamma_bar: Christoffel,
}

/// Per-node residuals of the identities satisfied by ∇, ∇̃ and ∇̄.
#[derive(Clone, Debug)]
pub struct ConnectionResiduals {
    pub torsion_tilde: Vec<f64>,
    pub torsion_bar: Vec<f64>,
    /// ∇̃ III.
    pub compat_tilde: Vec<f64>,
    /// ∇̄ II.
    pub compat_bar: Vec<f64>,
    /// X.II(Y,Z) − II(∇_X Y, Z) − II(Y, ∇̃_X Z).
    pub mixed: Vec<f64>,
}

impl ConnectionResiduals {
    pub fn max(&self) -> f64 {
        [&self.torsion_tilde, &self.torsion_bar, &self.compat_tilde, &self.compat_bar, &self.mixed]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |a, &b| a.max(b))
    }
}

fn vmax(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

impl Atlas {
    pub fn new(grid: Grid) -> Self {
        let mut north = Vec::with_capacity(grid.len());
        let mut south = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let (i, j) = grid.ij(k);
            let (t, p) = (grid.theta(i), grid.phi(j));
            let (s, c) = (p.sin(), p.cos());
            north.push(Matrix2::new(c, s, -s / t, c / t));
            let tp = PI - t;
            south.push(Matrix2::new(-c, -s, -s / tp, c / tp));
        }
        Self { grid, north, south }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn chart_of(&self, k: usize) -> Chart {
        let t = self.grid.theta(self.grid.ij(k).0);
        if t < PI / 4.0 {
            Chart::North
        } else if t > 3.0 * PI / 4.0 {
            Chart::South
        } else {
            Chart::Polar
        }
    }

    /// ∂(θ, φ)/∂(chart coordinates) at node k.
    pub fn jac(&self, c: Chart, k: usize) -> Matrix2<f64> {
        match c {
            Chart::North => self.north[k],
            Chart::South => self.south[k],
            Chart::Polar => Matrix2::identity(),
        }
    }

    pub fn metric_in(&self, c: Chart, m: &[Matrix2<f64>]) -> Vec<Matrix2<f64>> {
        if c == Chart::Polar {
            return m.to_vec();
        }
        (0..m.len()).map(|k| {
            let j = self.jac(c, k);
            j.transpose() * m[k] * j
        }).collect()
    }

    pub fn endo_in(&self, c: Chart, m: &[Matrix2<f64>]) -> Vec<Matrix2<f64>> {
        if c == Chart::Polar {
            return m.to_vec();
        }
        (0..m.len()).map(|k| {
            let j = self.jac(c, k);
            j.try_inverse().unwrap_or_else(Matrix2::zeros) * m[k] * j
        }).collect()
    }

    fn parity(c: Chart, a: usize, b: usize) -> Parity {
        if c == Chart::Polar && ((a == 0) ^ (b == 0)) {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// Chart gradient of a scalar component field and the parities of the
    /// two partial derivatives.
    pub fn grad(&self, c: Chart, f: &[f64], par: Parity) -> ([Vec<f64>; 2], [Parity; 2]) {
        let g = &self.grid;
        if c == Chart::Polar {
            return ([g.d_theta(f, par), g.d_phi(f)], [par.flip(), par]);
        }
        let ft = g.d_theta(f, Parity::Even);
        let fp = g.d_phi(f);
        let mut u = vec![0.0; f.len()];
        let mut v = vec![0.0; f.len()];
        for k in 0..f.len() {
            let j = self.jac(c, k);
            u[k] = j[(0, 0)] * ft[k] + j[(1, 0)] * fp[k];
            v[k] = j[(0, 1)] * ft[k] + j[(1, 1)] * fp[k];
        }
        ([u, v], [Parity::Even, Parity::Even])
    }

    /// Partial derivatives [∂₁M, ∂₂M] of a chart tensor field.
    pub fn grad_tensor(&self, c: Chart, m: &[Matrix2<f64>]) -> [Vec<Matrix2<f64>>; 2] {
        let n = m.len();
        let mut out = [vec![Matrix2::zeros(); n], vec![Matrix2::zeros(); n]];
        for a in 0..2 {
            for b in 0..2 {
                let comp: Vec<f64> = m.iter().map(|x| x[(a, b)]).collect();
                let (d, _) = self.grad(c, &comp, Self::parity(c, a, b));
                for (dir, dv) in d.iter().enumerate() {
                    for k in 0..n {
                        out[dir][k][(a, b)] = dv[k];
                    }
                }
            }
        }
        out
    }

    fn nodes_of(&self, c: Chart) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len()).filter(move |&k| self.chart_of(k) == c)
    }

    /// Gaussian curvature of a metric by the Brioschi formula.
    pub fn gauss_curvature(&self, g: &FormField) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for c in CHARTS {
            let gc = self.metric_in(c, &g.m);
            let comp = |a: usize, b: usize| -> Vec<f64> { gc.iter().map(|x| x[(a, b)]).collect() };
            let (e, f, gg) = (comp(0, 0), comp(0, 1), comp(1, 1));
            let (de, pe) = self.grad(c, &e, Self::parity(c, 0, 0));
            let (df, pf) = self.grad(c, &f, Self::parity(c, 0, 1));
            let (dg, pg) = self.grad(c, &gg, Self::parity(c, 1, 1));
            let evv = self.grad(c, &de[1], pe[1]).0[1].clone();
            let guu = self.grad(c, &dg[0], pg[0]).0[0].clone();
            let fuv = self.grad(c, &df[0], pf[0]).0[1].clone();
            for k in self.nodes_of(c) {
                let (e, f, g) = (e[k], f[k], gg[k]);
                let (eu, ev, fu, fv, gu, gv) = (de[0][k], de[1][k], df[0][k], df[1][k], dg[0][k], dg[1][k]);
                let m1 = nalgebra::Matrix3::new(
                    -0.5 * evv[k] + fuv[k] - 0.5 * guu[k], 0.5 * eu, fu - 0.5 * ev,
                    fv - 0.5 * gu, e, f,
                    0.5 * gv, f, g,
                );
                let m2 = nalgebra::Matrix3::new(0.0, 0.5 * ev, 0.5 * gu, 0.5 * ev, e, f, 0.5 * gu, f, g);
                let det = e * g - f * f;
                out[k] = (m1.determinant() - m2.determinant()) / (det * det);
            }
        }
        out
    }

    fn christoffel(g: &Matrix2<f64>, dg: [&Matrix2<f64>; 2]) -> Christoffel {
        let gi = g.try_inverse().unwrap_or_else(Matrix2::zeros);
        let mut low = [Matrix2::zeros(); 2];
        for (d, l) in low.iter_mut().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    l[(a, b)] = 0.5 * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]);
                }
            }
        }
        let mut out = [Matrix2::zeros(); 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = low[0] * gi[(c, 0)] + low[1] * gi[(c, 1)];
        }
        out
    }

    /// |(∇_1 B)∂₂ − (∇_2 B)∂₁|_I / √det I at every node.
    pub fn codazzi(&self, i: &FormField, b: &ShapeField) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for c in CHARTS {
            let gc = self.metric_in(c, &i.m);
            let bc = self.endo_in(c, &b.b);
            let dg = self.grad_tensor(c, &gc);
            let db = self.grad_tensor(c, &bc);
            for k in self.nodes_of(c) {
                let gam = Self::christoffel(&gc[k], [&dg[0][k], &dg[1][k]]);
                let bk = &bc[k];
                let mut r = Vector2::zeros();
                for cc in 0..2 {
                    let mut v = db[0][k][(cc, 1)] - db[1][k][(cc, 0)];
                    for d in 0..2 {
                        v += gam[cc][(0, d)] * bk[(d, 1)] - gam[cc][(1, d)] * bk[(d, 0)];
                    }
                    r[cc] = v;
                }
                out[k] = (r.dot(&(gc[k] * r))).max(0.0).sqrt() / gc[k].determinant().sqrt();
            }
        }
        out
    }

    fn connection_chart(&self, c: Chart, forms: &Forms) -> ChartConnection {
        let gc = self.metric_in(c, &forms.i.m);
        let bc = self.endo_in(c, &forms.b.b);
        let dg = self.grad_tensor(c, &gc);
        let db = self.grad_tensor(c, &bc);
        ChartConnection { gc, bc, dg, db }
    }

    /// Christoffel symbols of ∇, ∇̃ = B⁻¹∇(B·) and ∇̄ = ½(∇ + ∇̃).
    pub fn connections(&self, forms: &Forms) -> Vec<ConnectionData> {
        let mut out: Vec<Option<ConnectionData>> = vec![None; self.grid.len()];
        for c in CHARTS {
            let cc = self.connection_chart(c, forms);
            for k in self.nodes_of(c) {
                out[k] = Some(cc.data(c, k));
            }
        }
        out.into_iter().map(|d| d.expect("every node has a chart")).collect()
    }

    pub fn connection_residuals(&self, forms: &Forms) -> ConnectionResiduals {
        let n = self.grid.len();
        let mut res = ConnectionResiduals {
            torsion_tilde: vec![0.0; n],
            torsion_bar: vec![0.0; n],
            compat_tilde: vec![0.0; n],
            compat_bar: vec![0.0; n],
            mixed: vec![0.0; n],
        };
        for c in CHARTS {
            let cc = self.connection_chart(c, forms);
            let ii = self.metric_in(c, &forms.ii.m);
            let iii = self.metric_in(c, &forms.iii.m);
            let dii = self.grad_tensor(c, &ii);
            let diii = self.grad_tensor(c, &iii);
            for k in self.nodes_of(c) {
                let d = cc.data(c, k);
                let g = &cc.gc[k];
                let gi = g.try_inverse().unwrap_or_else(Matrix2::zeros);
                let tors = |gam: &Christoffel| {
                    let t = Vector2::new(gam[0][(0, 1)] - gam[0][(1, 0)], gam[1][(0, 1)] - gam[1][(1, 0)]);
                    t.dot(&(g * t)).max(0.0).sqrt() / g.determinant().sqrt()
                };
                res.torsion_tilde[k] = tors(&d.gamma_tilde);
                res.torsion_bar[k] = tors(&d.gamma_bar);
                let deriv = |dm: &[Vec<Matrix2<f64>>; 2], m: &Matrix2<f64>, g1: &Christoffel, g2: &Christoffel| {
                    let mut r = [[[0.0; 2]; 2]; 2];
                    for a in 0..2 {
                        for b in 0..2 {
                            for cc in 0..2 {
                                let mut v = dm[a][k][(b, cc)];
                                for dd in 0..2 {
                                    v -= g1[dd][(a, b)] * m[(dd, cc)] + g2[dd][(a, cc)] * m[(b, dd)];
                                }
                                r[a][b][cc] = v;
                            }
                        }
                    }
                    norm3(&r, &gi)
                };
                res.compat_tilde[k] = deriv(&diii, &iii[k], &d.gamma_tilde, &d.gamma_tilde);
                res.compat_bar[k] = deriv(&dii, &ii[k], &d.gamma_bar, &d.gamma_bar);
                res.mixed[k] = deriv(&dii, &ii[k], &d.gamma, &d.gamma_tilde);
            }
        }
        res
    }
}

struct ChartConnection {
    gc: Vec<Matrix2<f64>>,
    bc: Vec<Matrix2<f64>>,
    dg: [Vec<Matrix2<f64>>; 2],
    db: [Vec<Matrix2<f64>>; 2],
}

impl ChartConnection {
    fn data(&self, c: Chart, k: usize) -> ConnectionData {
        let gamma = Atlas::christoffel(&self.gc[k], [&self.dg[0][k], &self.dg[1][k]]);
        let b = &self.bc[k];
        let binv = b.try_inverse().unwrap_or_else(Matrix2::zeros);
        let mut gamma_tilde = gamma;
        for a in 0..2 {
            // (∇_a B)^d_b
            let mut nb = self.db[a][k];
            for d in 0..2 {
                for bb in 0..2 {
                    for e in 0..2 {
                        nb[(d, bb)] += gamma[d][(a, e)] * b[(e, bb)] - gamma[e][(a, bb)] * b[(d, e)];
                    }
                }
            }
            let corr = binv * nb;
            for cc in 0..2 {
                for bb in 0..2 {
                    gamma_tilde[cc][(a, bb)] += corr[(cc, bb)];
                }
            }
        }
        let gamma_bar = [(gamma[0] + gamma_tilde[0]) * 0.5, (gamma[1] + gamma_tilde[1]) * 0.5];
        ConnectionData { chart: c, gamma, gamma_tilde, gamma_bar }
    }
}

fn norm3(r: &[[[f64; 2]; 2]; 2], gi: &Matrix2<f64>) -> f64 {
    let mut s = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for a2 in 0..2 {
                    for b2 in 0..2 {
                        for c2 in 0..2 {
                            s += gi[(a, a2)] * gi[(b, b2)] * gi[(c, c2)] * r[a][b][c] * r[a2][b2][c2];
                        }
                    }
                }
            }
        }
    }
    s.max(0.0).sqrt()
}

/// Gauss residual det B − (K + 1) (adapted to the ambient space) and the
/// Codazzi residual at every node.
pub fn gauss_codazzi_residuals(forms: &Forms, ambient: Ambient) -> (Vec<f64>, Vec<f64>) {
    let atlas = Atlas::new(forms.grid());
    let k = atlas.gauss_curvature(&forms.i);
    let gauss = (0..k.len()).map(|n| ambient.gauss_residual(forms.b.b[n].determinant(), k[n])).collect();
    (gauss, atlas.codazzi(&forms.i, &forms.b))
}

/// Largest absolute entries of the Gauss and Codazzi residuals.
pub fn gauss_codazzi_max(forms: &Forms, ambient: Ambient) -> (f64, f64) {
    let (g, c) = gauss_codazzi_residuals(forms, ambient);
    (vmax(&g), vmax(&c))
}

/// Curvature of ∇̃, the Levi-Civita connection of III.
pub fn curvature_tilde(forms: &Forms) -> Result<Vec<f64>> {
    forms.ensure_convex()?;
    Ok(Atlas::new(forms.grid()).gauss_curvature(&forms.iii))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::convergence_order;
    use crate::sample::RadialFn;
    use crate::surface::{analytic_forms, embed, fundamental_forms, FormKind, RadialSurface};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_metric_curvature() {
        let g = Grid::new(48, 96).unwrap();
        let atlas = Atlas::new(g);
        for c in [0.5, 2.0] {
            let k = atlas.gauss_curvature(&FormField::round(g, FormKind::I, c * c));
            assert!(k.iter().all(|&x| (x * c * c - 1.0).abs() < 1e-4));
        }
    }

    #[test]
    fn sphere_gauss_codazzi() {
        let g = Grid::new(48, 96).unwrap();
        for rho in [0.5, 1.0, 2.0] {
            let forms = analytic_forms(g, &RadialFn::sphere(rho)).unwrap();
            let det = forms.b.b[7].determinant();
            assert!((det - 1.0 / rho.tanh().powi(2)).abs() < 1e-12);
            let (gs, cz) = gauss_codazzi_max(&forms, Ambient::Hyperbolic);
            assert!(gs < 1e-4 * det && cz < 1e-8, "{gs} {cz}");
        }
    }

    #[test]
    fn random_surface_residuals_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = RadialFn::random(&mut rng, 1.0, 0.1, 4);
        let (mut ge, mut ce) = (vec![], vec![]);
        for n in [16, 32, 64] {
            let g = Grid::new(n, 2 * n).unwrap();
            let forms = fundamental_forms(&embed(&RadialSurface::from_fn(g, &r).unwrap()).unwrap()).unwrap();
            let (a, b) = gauss_codazzi_max(&forms, Ambient::Hyperbolic);
            ge.push(a);
            ce.push(b);
        }
        assert!(convergence_order(&ge) > 1.8, "{ge:?}");
        assert!(convergence_order(&ce) > 1.8, "{ce:?}");
    }

    #[test]
    fn connections_on_sphere_coincide() {
        let g = Grid::new(16, 32).unwrap();
        let forms = analytic_forms(g, &RadialFn::sphere(1.0)).unwrap();
        let atlas = Atlas::new(g);
        for d in atlas.connections(&forms) {
            for c in 0..2 {
                assert!((d.gamma[c] - d.gamma_tilde[c]).amax() < 1e-9);
                assert!((d.gamma[c] - d.gamma_bar[c]).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn connection_identities_and_third_form_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = RadialFn::random(&mut rng, 1.0, 0.1, 4);
        let mut errs = vec![];
        let mut kerr = vec![];
        for n in [16, 32, 64] {
            let g = Grid::new(n, 2 * n).unwrap();
            let forms = analytic_forms(g, &r).unwrap();
            let atlas = Atlas::new(g);
            errs.push(atlas.connection_residuals(&forms).max());
            let k = atlas.gauss_curvature(&forms.i);
            let kt = curvature_tilde(&forms).unwrap();
            kerr.push((0..g.len()).map(|i| (kt[i] - k[i] / (k[i] + 1.0)).abs()).fold(0.0, f64::max));
        }
        assert!(convergence_order(&errs) > 1.8, "{errs:?}");
        assert!(convergence_order(&kerr) > 1.8, "{kerr:?}");
    }
}
