//! First-order deformations of sampled surfaces: metric, normal, second and
//! third form variations, the Pogorelov transfer identity, the ∂̄ calculus
//! and discrete infinitesimal rigidity.

pub mod calculus;
pub mod integrate;
pub mod rigidity;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Parity;
use crate::lorentz::{from_spatial, minkowski_inner, spatial, HPoint, KillingElement, LorentzVec};
use crate::projective::{klein_image, pogorelov_phi_h, EuclideanKilling};
use crate::sample::PolyField;
use crate::surface::{fundamental_forms, Ambient, FormField, FormKind, FrameField};

pub use calculus::{AntiholSection, Calculus};
pub use integrate::{herglotz_certificate, integrate_deformation, HerglotzCertificate, Integration};
pub use rigidity::{rigidity_kernel, RigidityKind, RigidityOperator, RigidityReport};

impl FrameField {
    pub fn first_form(&self, k: usize) -> Matrix2<f64> {
        let (a, b) = (&self.xt[k], &self.xp[k]);
        let f = minkowski_inner(a, b);
        Matrix2::new(minkowski_inner(a, a), f, f, minkowski_inner(b, b))
    }

    /// Chart components of the tangential part of an ambient vector.
    pub fn to_chart(&self, k: usize, w: &LorentzVec) -> Vector2<f64> {
        let rhs = Vector2::new(minkowski_inner(w, &self.xt[k]), minkowski_inner(w, &self.xp[k]));
        self.first_form(k).try_inverse().map_or(Vector2::zeros(), |inv| inv * rhs)
    }

    pub fn from_chart(&self, k: usize, c: &Vector2<f64>) -> LorentzVec {
        self.xt[k] * c[0] + self.xp[k] * c[1]
    }

    /// ⟨x, x⟩ of the ambient quadric: −1 in H³, 1 in de Sitter, 0 in R³.
    fn quadric_sign(&self) -> f64 {
        match self.ambient {
            Ambient::Hyperbolic => -1.0,
            Ambient::DeSitter => 1.0,
            Ambient::Euclidean => 0.0,
        }
    }

    /// ⟨N, N⟩.
    fn normal_sign(&self) -> f64 {
        if self.ambient == Ambient::DeSitter {
            -1.0
        } else {
            1.0
        }
    }
}

/// An ambient vector field along a sampled surface, split as u = λN + v
/// with v given by chart components.
#[derive(Clone, Debug)]
pub struct DeformField {
    pub u: Vec<LorentzVec>,
    pub lambda: Vec<f64>,
    pub v: Vec<Vector2<f64>>,
}

impl DeformField {
    /// Checks that each u_k is tangent to the ambient space at x_k.
    pub fn new(f: &FrameField, u: Vec<LorentzVec>) -> Result<Self> {
        if u.len() != f.grid.len() {
            return Err(Error::Precondition(format!("{} vectors for {} nodes", u.len(), f.grid.len())));
        }
        for (k, (uk, xk)) in u.iter().zip(&f.x).enumerate() {
            let off = match f.ambient {
                Ambient::Euclidean => uk[0].abs(),
                _ => minkowski_inner(uk, xk).abs() / (1.0 + uk.norm() * xk.norm()),
            };
            if !(off <= 1e-9) {
                let (i, j) = f.grid.ij(k);
                return Err(Error::Precondition(format!("vector at node ({i}, {j}) is not tangent to the ambient space")));
            }
        }
        let eps = f.normal_sign();
        let lambda: Vec<f64> = (0..u.len()).map(|k| eps * minkowski_inner(&u[k], &f.n[k])).collect();
        let v = (0..u.len()).map(|k| f.to_chart(k, &u[k])).collect();
        Ok(Self { u, lambda, v })
    }

    /// Restriction of the Killing field of `k` (H³ or de Sitter surfaces).
    pub fn from_killing(f: &FrameField, k: &KillingElement) -> Result<Self> {
        if f.ambient == Ambient::Euclidean {
            return Err(Error::Precondition("Lorentzian Killing field on a Euclidean surface".into()));
        }
        Self::new(f, f.x.iter().map(|x| k.eval(x)).collect())
    }

    pub fn from_euclidean_killing(f: &FrameField, k: &EuclideanKilling) -> Result<Self> {
        if f.ambient != Ambient::Euclidean {
            return Err(Error::Precondition("Euclidean Killing field on a non-Euclidean surface".into()));
        }
        Self::new(f, f.x.iter().map(|x| from_spatial(&k.eval(&spatial(x)))).collect())
    }

    pub fn normal(f: &FrameField, lambda: &[f64]) -> Result<Self> {
        Self::new(f, f.n.iter().zip(lambda).map(|(n, l)| n * *l).collect())
    }

    /// Smooth random field: a polynomial ambient vector field projected to the
    /// tangent space of the ambient space at each node.
    pub fn random<R: Rng>(f: &FrameField, rng: &mut R, max_deg: u32) -> Result<Self> {
        let p = PolyField::random(rng, 4, max_deg);
        let s = f.quadric_sign();
        let u = (0..f.grid.len())
            .map(|k| {
                let (i, j) = f.grid.ij(k);
                let c = p.eval(&f.grid.dir(i, j));
                let w = LorentzVec::new(c[0], c[1], c[2], c[3]);
                let x = &f.x[k];
                if s == 0.0 {
                    LorentzVec::new(0.0, w[1], w[2], w[3])
                } else {
                    w - x * (minkowski_inner(&w, x) / s)
                }
            })
            .collect();
        Self::new(f, u)
    }

    pub fn reconstruct(&self, f: &FrameField) -> Vec<LorentzVec> {
        (0..self.u.len()).map(|k| f.n[k] * self.lambda[k] + f.from_chart(k, &self.v[k])).collect()
    }

    /// Largest |λN + v − u| relative to max |u|.
    pub fn split_residual(&self, f: &FrameField) -> f64 {
        let r = self.reconstruct(f);
        let scale = self.u.iter().map(|u| u.amax()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        r.iter().zip(&self.u).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max) / scale
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            u: self.u.iter().map(|u| u * s).collect(),
            lambda: self.lambda.iter().map(|l| l * s).collect(),
            v: self.v.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            u: self.u.iter().zip(&o.u).map(|(a, b)| a + b).collect(),
            lambda: self.lambda.iter().zip(&o.lambda).map(|(a, b)| a + b).collect(),
            v: self.v.iter().zip(&o.v).map(|(a, b)| a + b).collect(),
        }
    }
}

fn sym_pairing(f: &FrameField, a: &[LorentzVec; 2], b: &[LorentzVec; 2]) -> Matrix2<f64> {
    let _ = f;
    let m = |i: usize, j: usize| minkowski_inner(&a[i], &b[j]) + minkowski_inner(&b[i], &a[j]);
    let off = m(0, 1);
    Matrix2::new(m(0, 0), off, off, m(1, 1))
}

/// δI(x, y) = ⟨∇_x u, y⟩ + ⟨x, ∇_y u⟩.
pub fn metric_variation(f: &FrameField, u: &DeformField) -> FormField {
    let ut = f.grid.d_theta(&u.u, Parity::Even);
    let up = f.grid.d_phi(&u.u);
    let m = (0..f.grid.len())
        .map(|k| sym_pairing(f, &[ut[k], up[k]], &[f.xt[k], f.xp[k]]))
        .collect();
    FormField::new(f.grid, FormKind::DeltaI, m)
}

/// First-order variation of the unit normal under u.
pub fn normal_variation(f: &FrameField, u: &DeformField) -> Vec<LorentzVec> {
    let ut = f.grid.d_theta(&u.u, Parity::Even);
    let up = f.grid.d_phi(&u.u);
    let s = f.quadric_sign();
    (0..f.grid.len())
        .map(|k| {
            let n = &f.n[k];
            let c = Vector2::new(-minkowski_inner(n, &ut[k]), -minkowski_inner(n, &up[k]));
            let inv = f.first_form(k).try_inverse().unwrap_or_else(Matrix2::zeros);
            let tangential = f.from_chart(k, &(inv * c));
            if s == 0.0 {
                tangential
            } else {
                f.x[k] * (-minkowski_inner(n, &u.u[k]) / s) + tangential
            }
        })
        .collect()
}

/// δIII(x, y) = ⟨∇_x Ṅ, dN(y)⟩ + ⟨dN(x), ∇_y Ṅ⟩: the induced-metric variation
/// of the dual surface under the dual deformation −Ṅ.
pub fn third_form_variation(f: &FrameField, u: &DeformField) -> FormField {
    let dn = normal_variation(f, u);
    let dt = f.grid.d_theta(&dn, Parity::Even);
    let dp = f.grid.d_phi(&dn);
    let nt = f.grid.d_theta(&f.n, Parity::Even);
    let np = f.grid.d_phi(&f.n);
    let m = (0..f.grid.len())
        .map(|k| sym_pairing(f, &[dt[k], dp[k]], &[nt[k], np[k]]))
        .collect();
    FormField::new(f.grid, FormKind::DeltaIII, m)
}

/// δII from II(x, y) = −⟨x, ∂_y N⟩, symmetrized.
pub fn second_form_variation(f: &FrameField, u: &DeformField) -> FormField {
    let dn = normal_variation(f, u);
    let g = f.grid;
    let (ut, up) = (g.d_theta(&u.u, Parity::Even), g.d_phi(&u.u));
    let (nt, np) = (g.d_theta(&f.n, Parity::Even), g.d_phi(&f.n));
    let (dt, dp) = (g.d_theta(&dn, Parity::Even), g.d_phi(&dn));
    let m = (0..g.len())
        .map(|k| {
            let du = [ut[k], up[k]];
            let x = [f.xt[k], f.xp[k]];
            let n = [nt[k], np[k]];
            let d = [dt[k], dp[k]];
            let e = |a: usize, b: usize| -minkowski_inner(&du[a], &n[b]) - minkowski_inner(&x[a], &d[b]);
            let off = 0.5 * (e(0, 1) + e(1, 0));
            Matrix2::new(e(0, 0), off, off, e(1, 1))
        })
        .collect();
    FormField::new(g, FormKind::DeltaII, m)
}

/// Ḃ = I⁻¹(δII − δI·B).
pub fn shape_variation(f: &FrameField, u: &DeformField) -> Result<Vec<Matrix2<f64>>> {
    let forms = fundamental_forms(f)?;
    let di = metric_variation(f, u);
    let dii = second_form_variation(f, u);
    (0..f.grid.len())
        .map(|k| {
            let inv = forms.i.m[k]
                .try_inverse()
                .ok_or_else(|| Error::Degenerate("first fundamental form is singular".into()))?;
            Ok(inv * (dii.m[k] - di.m[k] * forms.b.b[k]))
        })
        .collect()
}

/// Nodewise residual of (L_u g)(x, y) = cosh²ρ (L_{Φ_H u} ḡ)(x̄, ȳ) over chart
/// tangents, in the unit sphere frame.
pub fn pogorelov_transfer_residual(f: &FrameField, u: &DeformField) -> Result<Vec<f64>> {
    if f.ambient != Ambient::Hyperbolic {
        return Err(Error::Precondition("transfer identity needs a surface in H³".into()));
    }
    let img = klein_image(f)?;
    let ubar = f
        .x
        .iter()
        .zip(&u.u)
        .map(|(x, v)| from_spatial(&pogorelov_phi_h(&HPoint::from_raw(*x), v).1))
        .collect();
    let ubar = DeformField::new(&img, ubar)?;
    let lhs = metric_variation(f, u);
    let rhs = metric_variation(&img, &ubar);
    Ok((0..f.grid.len())
        .map(|k| {
            let c2 = f.x[k][0] * f.x[k][0];
            (lhs.normalized(k) - rhs.normalized(k) * c2).norm()
        })
        .collect())
}
