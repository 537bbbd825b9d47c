//! Connections of I and III along a sampled surface, the operators ∂̄_I and
//! ∂̄_III, exterior covariant derivatives and the adjointness pairing.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use crate::error::Result;
use crate::grid::{integrate, Parity};
use crate::lorentz::LorentzVec;
use crate::sample::PolyField;
use crate::surface::{fundamental_forms, Forms, FrameField};

const E: Matrix2<f64> = Matrix2::new(0.0, -1.0, 1.0, 0.0);

/// Rotation by π/2 for a positive form g, in chart components.
pub fn rotation(g: &Matrix2<f64>) -> Matrix2<f64> {
    g.try_inverse().unwrap_or_else(Matrix2::zeros) * E * g.determinant().max(0.0).sqrt()
}

/// Per-node endomorphisms that anticommute with the rotation J̄ of II,
/// equivalently trace-free and II-self-adjoint.
#[derive(Clone, Debug)]
pub struct AntiholSection {
    pub h: Vec<Matrix2<f64>>,
}

impl AntiholSection {
    pub fn zero(n: usize) -> Self {
        Self { h: vec![Matrix2::zeros(); n] }
    }

    /// Orthogonal projection of arbitrary endomorphisms onto sections.
    pub fn project(ii: &[Matrix2<f64>], m: &[Matrix2<f64>]) -> Self {
        let h = ii
            .iter()
            .zip(m)
            .map(|(g, a)| {
                let ginv = g.try_inverse().unwrap_or_else(Matrix2::zeros);
                let s = g * a;
                let s = (s + s.transpose()) * 0.5;
                let s = s - g * (0.5 * (ginv * s).trace());
                ginv * s
            })
            .collect();
        Self { h }
    }

    /// Projection of a random smooth symmetric ambient tensor restricted to the tangent planes.
    pub fn random<R: Rng>(f: &FrameField, ii: &[Matrix2<f64>], rng: &mut R, max_deg: u32) -> Self {
        let p = PolyField::random(rng, 10, max_deg);
        let m: Vec<Matrix2<f64>> = (0..f.grid.len())
            .map(|k| {
                let (i, j) = f.grid.ij(k);
                let c = p.eval(&f.grid.dir(i, j));
                let s = nalgebra::Matrix4::new(
                    c[0], c[1], c[2], c[3], c[1], c[4], c[5], c[6], c[2], c[5], c[7], c[8], c[3], c[6], c[8], c[9],
                );
                let t = [f.xt[k], f.xp[k]];
                let q = |a: usize, b: usize| (t[a].transpose() * s * t[b])[0];
                Matrix2::new(q(0, 0), q(0, 1), q(1, 0), q(1, 1))
            })
            .collect();
        let ginv: Vec<Matrix2<f64>> = ii.iter().map(|g| g.try_inverse().unwrap_or_else(Matrix2::zeros)).collect();
        let m: Vec<Matrix2<f64>> = m.iter().zip(&ginv).map(|(a, gi)| gi * a).collect();
        Self::project(ii, &m)
    }

    /// Largest |tr h| and largest ‖II·h − (II·h)ᵀ‖ relative to ‖II‖·‖h‖.
    pub fn residuals(&self, ii: &[Matrix2<f64>]) -> (f64, f64) {
        let mut tr = 0.0f64;
        let mut sa = 0.0f64;
        for (g, h) in ii.iter().zip(&self.h) {
            let scale = (g.norm() * h.norm()).max(f64::MIN_POSITIVE);
            tr = tr.max(h.trace().abs() / h.norm().max(f64::MIN_POSITIVE));
            let gh = g * h;
            sa = sa.max((gh - gh.transpose()).norm() / scale);
        }
        (tr, sa)
    }

    /// Largest ‖J̄h + hJ̄‖ relative to ‖h‖.
    pub fn anticommutation(&self, ii: &[Matrix2<f64>]) -> f64 {
        ii.iter()
            .zip(&self.h)
            .map(|(g, h)| {
                let j = rotation(g);
                (j * h + h * j).norm() / h.norm().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    /// det h from the II-orthonormal components, −(a² + b²) ≤ 0.
    pub fn det_field(&self, ii: &[Matrix2<f64>]) -> Vec<f64> {
        ii.iter()
            .zip(&self.h)
            .map(|(g, h)| {
                let Some(l) = g.cholesky().map(|c| c.l()) else { return f64::NAN };
                let Some(li) = l.try_inverse() else { return f64::NAN };
                let o = l.transpose() * h * li.transpose();
                let a = 0.5 * (o[(0, 0)] - o[(1, 1)]);
                let b = 0.5 * (o[(0, 1)] + o[(1, 0)]);
                -(a * a + b * b)
            })
            .collect()
    }
}

/// Which Levi-Civita connection a derivative uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connection {
    /// ∇ of the induced metric I.
    First,
    /// ∇̃ of the third fundamental form.
    Third,
}

/// Differential calculus along a strictly convex sampled surface.
pub struct Calculus<'a> {
    pub f: &'a FrameField,
    pub forms: Forms,
    pub binv: Vec<Matrix2<f64>>,
    /// Rotation by π/2 for II.
    pub jbar: Vec<Matrix2<f64>>,
    /// Rotation by π/2 for I.
    pub j: Vec<Matrix2<f64>>,
}

impl<'a> Calculus<'a> {
    pub fn new(f: &'a FrameField) -> Result<Self> {
        let forms = fundamental_forms(f)?;
        forms.ensure_convex()?;
        let binv = forms.b.inverse()?.b;
        let jbar = forms.ii.m.iter().map(rotation).collect();
        let j = forms.i.m.iter().map(rotation).collect();
        Ok(Self { f, forms, binv, jbar, j })
    }

    fn lift(&self, v: &[Vector2<f64>]) -> Vec<LorentzVec> {
        v.iter().enumerate().map(|(k, c)| self.f.from_chart(k, c)).collect()
    }

    /// (∇v)^a_b = (∇_b v)^a.
    pub fn nabla(&self, v: &[Vector2<f64>]) -> Vec<Matrix2<f64>> {
        let a = self.lift(v);
        let g = self.f.grid;
        let (dt, dp) = (g.d_theta(&a, Parity::Even), g.d_phi(&a));
        (0..g.len())
            .map(|k| {
                let (c0, c1) = (self.f.to_chart(k, &dt[k]), self.f.to_chart(k, &dp[k]));
                Matrix2::new(c0[0], c1[0], c0[1], c1[1])
            })
            .collect()
    }

    /// ∇̃v = B⁻¹·∇(Bv).
    pub fn nabla_third(&self, v: &[Vector2<f64>]) -> Vec<Matrix2<f64>> {
        let bv: Vec<Vector2<f64>> = v.iter().zip(&self.forms.b.b).map(|(v, b)| b * v).collect();
        self.nabla(&bv).iter().zip(&self.binv).map(|(m, bi)| bi * m).collect()
    }

    fn dbar(&self, m: Vec<Matrix2<f64>>) -> AntiholSection {
        let h = m.iter().zip(&self.jbar).map(|(m, j)| m + j * m * j).collect();
        AntiholSection { h }
    }

    /// (∂̄_I v)(X) = ∇_X v + J̄∇_{J̄X} v.
    pub fn dbar_i(&self, v: &[Vector2<f64>]) -> AntiholSection {
        self.dbar(self.nabla(v))
    }

    /// Same with the connection of III.
    pub fn dbar_iii(&self, v: &[Vector2<f64>]) -> AntiholSection {
        self.dbar(self.nabla_third(v))
    }

    /// d^∇T(∂θ, ∂φ) for a vector-valued 1-form T (column b is T(∂_b)).
    pub fn d_nabla(&self, t: &[Matrix2<f64>]) -> Vec<Vector2<f64>> {
        let g = self.f.grid;
        let te: Vec<LorentzVec> = (0..g.len()).map(|k| self.f.from_chart(k, &t[k].column(0).into())).collect();
        let tp: Vec<LorentzVec> = (0..g.len()).map(|k| self.f.from_chart(k, &t[k].column(1).into())).collect();
        let a = g.d_theta(&tp, Parity::Even);
        let b = g.d_phi(&te);
        (0..g.len()).map(|k| self.f.to_chart(k, &(a[k] - b[k]))).collect()
    }

    /// d^∇̃T = B⁻¹·d^∇(B·T).
    pub fn d_nabla_third(&self, t: &[Matrix2<f64>]) -> Vec<Vector2<f64>> {
        let bt: Vec<Matrix2<f64>> = t.iter().zip(&self.forms.b.b).map(|(t, b)| b * t).collect();
        self.d_nabla(&bt).iter().zip(&self.binv).map(|(v, bi)| bi * v).collect()
    }

    pub fn d_nabla_with(&self, c: Connection, t: &[Matrix2<f64>]) -> Vec<Vector2<f64>> {
        match c {
            Connection::First => self.d_nabla(t),
            Connection::Third => self.d_nabla_third(t),
        }
    }

    /// Weights turning a dθ∧dφ density into a quadrature sum.
    fn chart_weights(&self) -> Vec<f64> {
        let g = self.f.grid;
        let w = g.quad_weights();
        (0..g.len()).map(|k| w[k] / g.theta(g.ij(k).0).sin()).collect()
    }

    fn sqrt_det_ii(&self, k: usize) -> f64 {
        self.forms.ii.m[k].determinant().max(0.0).sqrt()
    }

    /// ⟨a, h⟩_II = ½ tr(a* h), with a* the II-adjoint.
    pub fn section_inner(&self, k: usize, a: &Matrix2<f64>, h: &Matrix2<f64>) -> f64 {
        let g = &self.forms.ii.m[k];
        let gi = g.try_inverse().unwrap_or_else(Matrix2::zeros);
        0.5 * (gi * a.transpose() * g * h).trace()
    }

    /// L² norm of a tangent field for II and da_II.
    pub fn vector_norm(&self, v: &[Vector2<f64>]) -> f64 {
        let w = self.chart_weights();
        let d: Vec<f64> =
            (0..v.len()).map(|k| (v[k].transpose() * self.forms.ii.m[k] * v[k])[0] * self.sqrt_det_ii(k)).collect();
        integrate(&w, &d).max(0.0).sqrt()
    }

    pub fn section_norm(&self, h: &AntiholSection) -> f64 {
        let w = self.chart_weights();
        let d: Vec<f64> = (0..h.h.len()).map(|k| self.section_inner(k, &h.h[k], &h.h[k]) * self.sqrt_det_ii(k)).collect();
        integrate(&w, &d).max(0.0).sqrt()
    }

    /// ∫⟨J̄∂̄v, h⟩_II da_II + ∫II(v, d^∇h): vanishes on a closed surface when
    /// ∂̄ = ∂̄_III is paired with d^∇ (`Connection::Third`), or ∂̄_I with d^∇̃
    /// (`Connection::First`).
    pub fn adjoint_residual(&self, dbar: Connection, v: &[Vector2<f64>], h: &AntiholSection) -> f64 {
        let a = match dbar {
            Connection::First => self.dbar_i(v),
            Connection::Third => self.dbar_iii(v),
        };
        let dh = match dbar {
            Connection::First => self.d_nabla_third(&h.h),
            Connection::Third => self.d_nabla(&h.h),
        };
        let w = self.chart_weights();
        let d: Vec<f64> = (0..v.len())
            .map(|k| {
                let ja = self.jbar[k] * a.h[k];
                self.section_inner(k, &ja, &h.h[k]) * self.sqrt_det_ii(k)
                    + (v[k].transpose() * self.forms.ii.m[k] * dh[k])[0]
            })
            .collect();
        integrate(&w, &d)
    }

    /// Per-node Codazzi residual |d^∇Ḃ(∂θ, ∂φ)|_I / √det I and trace residual tr(B⁻¹Ḃ).
    pub fn bdot_residuals(&self, bdot: &[Matrix2<f64>]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d_nabla(bdot);
        let codazzi = (0..d.len())
            .map(|k| {
                let i = &self.forms.i.m[k];
                (d[k].transpose() * i * d[k])[0].max(0.0).sqrt() / i.determinant().sqrt()
            })
            .collect();
        let trace = bdot.iter().zip(&self.binv).map(|(bd, bi)| (bi * bd).trace()).collect();
        (codazzi, trace)
    }

    /// h = B⁻¹Ḃ.
    pub fn section_of_bdot(&self, bdot: &[Matrix2<f64>]) -> AntiholSection {
        AntiholSection { h: bdot.iter().zip(&self.binv).map(|(bd, bi)| bi * bd).collect() }
    }

    /// Ḃ = B·h.
    pub fn bdot_of_section(&self, h: &AntiholSection) -> Vec<Matrix2<f64>> {
        h.h.iter().zip(&self.forms.b.b).map(|(h, b)| b * h).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::DeformField;
    use crate::grid::{convergence_order, Grid};
    use crate::lorentz::KillingElement;
    use crate::sample::RadialFn;
    use crate::surface::{embed, RadialSurface};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_surface(seed: u64, n: usize) -> FrameField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = RadialFn::random(&mut rng, 1.0, 0.1, 4);
        embed(&RadialSurface::from_fn(Grid::new(n, 2 * n).unwrap(), &r).unwrap()).unwrap()
    }

    #[test]
    fn dbar_outputs_are_sections() {
        let f = random_surface(11, 16);
        let c = Calculus::new(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = DeformField::random(&f, &mut rng, 3).unwrap().v;
        for h in [c.dbar_i(&v), c.dbar_iii(&v)] {
            assert!(h.anticommutation(&c.forms.ii.m) < 1e-10);
            let (tr, sa) = h.residuals(&c.forms.ii.m);
            assert!(tr < 1e-10 && sa < 1e-10, "{tr} {sa}");
        }
        let h = AntiholSection::random(&f, &c.forms.ii.m, &mut rng, 3);
        assert!(h.anticommutation(&c.forms.ii.m) < 1e-10);
        assert!(h.det_field(&c.forms.ii.m).iter().all(|d| *d <= 0.0));
        let dets: Vec<f64> = h.h.iter().map(|m| m.determinant()).collect();
        let alg = h.det_field(&c.forms.ii.m);
        assert!(dets.iter().zip(&alg).all(|(a, b)| (a - b).abs() < 1e-10 * (1.0 + a.abs())));
    }

    #[test]
    fn rotation_field_on_round_sphere() {
        let g = Grid::new(24, 48).unwrap();
        let f = embed(&RadialSurface::sphere(g, 1.0)).unwrap();
        let c = Calculus::new(&f).unwrap();
        let v = vec![Vector2::new(0.0, 1.0); g.len()];
        for h in [c.dbar_i(&v), c.dbar_iii(&v)] {
            assert!(h.h.iter().all(|m| m.amax() < 1e-9));
        }
    }

    #[test]
    fn killing_fields_are_dbar_iii_closed() {
        let f = random_surface(13, 32);
        let c = Calculus::new(&f).unwrap();
        let k = KillingElement::basis()[0].add(&KillingElement::basis()[5].scaled(0.7));
        let u = DeformField::from_killing(&f, &k).unwrap();
        let w: Vec<Vector2<f64>> = u.v.iter().zip(&c.binv).map(|(v, bi)| bi * v).collect();
        let big = c.dbar_iii(&u.v).h.iter().map(|m| m.amax()).fold(0.0, f64::max);
        let r = c.dbar_iii(&w).h.iter().map(|m| m.amax()).fold(0.0, f64::max);
        assert!(r < 1e-5 * big.max(1.0), "{r} vs {big}");
    }

    #[test]
    fn adjointness_converges() {
        let mut errs = [vec![], vec![]];
        for n in [16, 32] {
            let f = random_surface(14, n);
            let c = Calculus::new(&f).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(15);
            let v = DeformField::random(&f, &mut rng, 3).unwrap().v;
            let h = AntiholSection::random(&f, &c.forms.ii.m, &mut rng, 3);
            let scale = c.vector_norm(&v) * c.section_norm(&h);
            assert_eq!(c.adjoint_residual(Connection::Third, &v, &AntiholSection::zero(v.len())), 0.0);
            assert_eq!(c.adjoint_residual(Connection::Third, &vec![Vector2::zeros(); v.len()], &h), 0.0);
            errs[0].push(c.adjoint_residual(Connection::Third, &v, &h).abs() / scale);
            errs[1].push(c.adjoint_residual(Connection::First, &v, &h).abs() / scale);
        }
        for e in errs {
            assert!(e[1] < 1e-4 && (e[1] < 1e-11 || convergence_order(&e) > 1.8), "{e:?}");
        }
    }

    #[test]
    fn bdot_residual_examples() {
        let f = random_surface(16, 24);
        let c = Calculus::new(&f).unwrap();
        let (_, tr) = c.bdot_residuals(&c.forms.b.b);
        assert!(tr.iter().all(|t| (t - 2.0).abs() < 1e-12));
        let k = KillingElement::basis()[2].add(&KillingElement::basis()[3]);
        let u = DeformField::from_killing(&f, &k).unwrap();
        let bd = crate::deform::shape_variation(&f, &u).unwrap();
        let (cz, tr) = c.bdot_residuals(&bd);
        assert!(cz.iter().chain(&tr).all(|r| r.abs() < 1e-4), "{:?}", cz.iter().cloned().fold(0.0, f64::max));
    }

    // Ḃ = Re(dz²) on the unit sphere of R³ (B = Id), z = tan(θ/2)e^{iφ}.
    #[test]
    fn holomorphic_quadratic_differential() {
        use crate::lorentz::from_spatial;
        use crate::surface::Ambient;
        let g = Grid::new(32, 64).unwrap();
        let x = (0..g.len()).map(|k| from_spatial(&g.dir(g.ij(k).0, g.ij(k).1))).collect();
        let f = FrameField::from_positions(g, Ambient::Euclidean, x).unwrap();
        let c = Calculus::new(&f).unwrap();
        let bd: Vec<Matrix2<f64>> = (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                let (t, p) = (g.theta(i), g.phi(j));
                let a = 0.5 / (t / 2.0).cos().powi(2);
                let b = (t / 2.0).tan();
                let q = Matrix2::new(a * a * (2.0 * p).cos(), -a * b * (2.0 * p).sin(), -a * b * (2.0 * p).sin(), -b * b * (2.0 * p).cos());
                c.forms.i.m[k].try_inverse().unwrap() * q
            })
            .collect();
        let (cz, tr) = c.bdot_residuals(&bd);
        let north = |k: &usize| g.theta(g.ij(*k).0) < 1.2;
        let worst = (0..g.len()).filter(north).map(|k| cz[k].max(tr[k].abs())).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
        let h = c.section_of_bdot(&bd);
        let (t, s) = h.residuals(&c.forms.ii.m);
        assert!(t < 1e-12 && s < 1e-12);
    }
}
