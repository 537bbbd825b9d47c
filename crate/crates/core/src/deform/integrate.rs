//! Reconstruction of an isometric deformation of a surface in R³ from a
//! solution Ḃ of the linearized Gauss–Codazzi system, and the Herglotz
//! integral certificate.

use nalgebra::{DVector, Matrix2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, Parity};
use crate::lorentz::{from_spatial, spatial, LorentzVec};
use crate::sparse::{Sparse, SparseCholesky};
use crate::surface::{fundamental_forms, Ambient, FrameField};

use super::calculus::rotation;
use super::DeformField;

/// Result of integrating Ḃ over the cap of the first `rows` latitude rows.
#[derive(Clone, Debug)]
pub struct Integration {
    pub rows: usize,
    /// Infinitesimal rotation field Y with dY = (dφ∘Ḃ) × N.
    pub y: Vec<Vector3<f64>>,
    /// Deformation φ̇ with dφ̇ = Y × dφ.
    pub phidot: Vec<Vector3<f64>>,
    /// Largest loop integral of (dφ∘Ḃ) × N over index rectangles, relative
    /// to perimeter · max|α|.
    pub loop_residual: f64,
    /// Relative least-squares residual of the two integrations.
    pub fit_residual: f64,
}

impl Integration {
    /// φ̇ on the whole grid, zero outside the cap.
    pub fn deform_field(&self, f: &FrameField) -> Result<DeformField> {
        let mut u = vec![LorentzVec::zeros(); f.grid.len()];
        for (k, p) in self.phidot.iter().enumerate() {
            u[k] = from_spatial(p);
        }
        DeformField::new(f, u)
    }
}

/// First-derivative equations on the cap: θ rows whose stencil stays inside,
/// φ rows everywhere. Returns the matrix and, per equation, (node, direction).
fn cap_operator(g: &Grid, rows: usize) -> (Sparse, Vec<(usize, usize)>) {
    let n = rows * g.n_phi;
    let mut eqs = vec![];
    let mut meta = vec![];
    for k in 0..n {
        let st = g.stencil_theta(k, Parity::Even);
        if st.iter().all(|(m, _)| *m < n) {
            eqs.push(st.to_vec());
            meta.push((k, 0));
        }
        let s = g.theta(g.ij(k).0).sin();
        eqs.push(g.stencil_phi(k).iter().map(|&(m, w)| (m, w / s)).collect());
        meta.push((k, 1));
    }
    (Sparse::from_rows(n, eqs), meta)
}

/// Least-squares solution of ∂θF = a_θ, ∂φF = a_φ on the cap with a tiny
/// Tikhonov term fixing the constants.
fn integrate_cap(g: &Grid, rows: usize, a: &[[Vector3<f64>; 2]]) -> Result<(Vec<Vector3<f64>>, f64)> {
    let (op, meta) = cap_operator(g, rows);
    let normal = op.normal(0.0);
    let mu = 1e-12 * normal.max_diag();
    let chol = SparseCholesky::new(&op.normal(mu))?;
    let at = op.transpose();
    let mut out = vec![Vector3::zeros(); op.ncols];
    let (mut res, mut rhs_norm) = (0.0f64, 0.0f64);
    for c in 0..3 {
        let rhs = DVector::from_iterator(
            meta.len(),
            meta.iter().map(|&(k, d)| {
                let s = if d == 1 { g.theta(g.ij(k).0).sin() } else { 1.0 };
                a[k][d][c] / s
            }),
        );
        let sol = chol.solve_vec(&at.mul_vec(&rhs))?;
        res = res.max((op.mul_vec(&sol) - &rhs).amax());
        rhs_norm = rhs_norm.max(rhs.amax());
        for (k, v) in out.iter_mut().enumerate() {
            v[c] = sol[k];
        }
    }
    Ok((out, res / rhs_norm.max(f64::MIN_POSITIVE)))
}

/// Trapezoidal loop integrals of a 1-form (components per node) over random
/// index rectangles inside the cap.
fn loop_integrals(g: &Grid, rows: usize, a: &[[Vector3<f64>; 2]], loops: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x100b);
    let scale = a.iter().map(|c| c[0].norm().max(c[1].norm())).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let (ht, hp) = (g.h_theta(), g.h_phi());
    let mut worst = 0.0f64;
    for _ in 0..loops {
        let i0 = rng.gen_range(0..rows - 2);
        let i1 = rng.gen_range(i0 + 1..rows);
        let j0 = rng.gen_range(0..g.n_phi);
        let len = rng.gen_range(1..g.n_phi / 2);
        let col = |j: usize| (j0 + j) % g.n_phi;
        let mut sum = Vector3::zeros();
        let mut edge = |pts: Vec<usize>, d: usize, h: f64, sign: f64| {
            for w in pts.windows(2) {
                sum += (a[w[0]][d] + a[w[1]][d]) * (0.5 * h * sign);
            }
        };
        edge((0..=len).map(|j| g.idx(i0, col(j))).collect(), 1, hp, 1.0);
        edge((i0..=i1).map(|i| g.idx(i, col(len))).collect(), 0, ht, 1.0);
        edge((0..=len).map(|j| g.idx(i1, col(j))).collect(), 1, hp, -1.0);
        edge((i0..=i1).map(|i| g.idx(i, col(0))).collect(), 0, ht, -1.0);
        let perimeter = 2.0 * ((i1 - i0) as f64 * ht + len as f64 * hp);
        worst = worst.max(sum.norm() / (perimeter * scale));
    }
    worst
}

/// Integrates Ḃ (a solution of d^∇Ḃ = 0, tr(B⁻¹Ḃ) = 0) on the north cap of
/// `rows` rows to an isometric deformation φ̇ of a surface in R³.
pub fn integrate_deformation(f: &FrameField, bdot: &[Matrix2<f64>], rows: usize, tol: f64) -> Result<Integration> {
    if f.ambient != Ambient::Euclidean {
        return Err(Error::Precondition("integration needs a surface in R³".into()));
    }
    let g = f.grid;
    if rows < 6 || rows > g.n_theta {
        return Err(Error::Precondition(format!("cap of {rows} rows is not a usable patch of a {}-row grid", g.n_theta)));
    }
    let n = rows * g.n_phi;
    let cross = |a: &LorentzVec, b: &LorentzVec| spatial(a).cross(&spatial(b));
    let alpha: Vec<[Vector3<f64>; 2]> = (0..n)
        .map(|k| {
            let col = |b: usize| f.from_chart(k, &bdot[k].column(b).into());
            [cross(&col(0), &f.n[k]), cross(&col(1), &f.n[k])]
        })
        .collect();
    let loop_residual = loop_integrals(&g, rows, &alpha, 100);
    let (y, r1) = integrate_cap(&g, rows, &alpha)?;
    let beta: Vec<[Vector3<f64>; 2]> =
        (0..n).map(|k| [y[k].cross(&spatial(&f.xt[k])), y[k].cross(&spatial(&f.xp[k]))]).collect();
    let (phidot, r2) = integrate_cap(&g, rows, &beta)?;
    let fit_residual = r1.max(r2);
    if !(fit_residual <= tol) {
        return Err(Error::Precondition(format!("integration is path dependent: residual {fit_residual:.3e} exceeds {tol:.1e}")));
    }
    Ok(Integration { rows, y, phidot, loop_residual, fit_residual })
}

#[derive(Clone, Debug)]
pub struct HerglotzCertificate {
    /// Quadrature of dω over the closed surface.
    pub integral: f64,
    /// Integral of |dω| for scale.
    pub total_variation: f64,
    pub det: Vec<f64>,
    pub max_abs_det: f64,
    /// dω(∂θ, ∂φ) / √det I per node.
    pub density: Vec<f64>,
    /// ⟨p, N⟩ per node.
    pub support: Vec<f64>,
}

/// ω(X) = dḟ(JḂX) with ḟ = ⟨p, u⟩ the variation of |p|²/2 under the
/// deformation u; for isometric deformations dω = −2⟨p, N⟩ det Ḃ da.
pub fn herglotz_certificate(f: &FrameField, u: &DeformField, bdot: &[Matrix2<f64>]) -> Result<HerglotzCertificate> {
    if f.ambient != Ambient::Euclidean {
        return Err(Error::Precondition("Herglotz certificate needs a surface in R³".into()));
    }
    let g = f.grid;
    let support: Vec<f64> = (0..g.len()).map(|k| spatial(&f.x[k]).dot(&spatial(&f.n[k]))).collect();
    let scale = f.x.iter().map(|x| spatial(x).norm()).fold(0.0, f64::max);
    let (lo, hi) = support.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    if !(lo > 1e-9 * scale || hi < -1e-9 * scale) {
        return Err(Error::Precondition("surface is not star-shaped about the origin".into()));
    }
    let i = fundamental_forms(f)?.i;
    let fdot: Vec<f64> = (0..g.len()).map(|k| spatial(&f.x[k]).dot(&spatial(&u.u[k]))).collect();
    let (ft, fp) = (g.d_theta(&fdot, Parity::Even), g.d_phi(&fdot));
    let (mut wt, mut wp) = (vec![0.0; g.len()], vec![0.0; g.len()]);
    for k in 0..g.len() {
        let jb = rotation(&i.m[k]) * bdot[k];
        wt[k] = ft[k] * jb[(0, 0)] + fp[k] * jb[(1, 0)];
        wp[k] = ft[k] * jb[(0, 1)] + fp[k] * jb[(1, 1)];
    }
    let (a, b) = (g.d_theta(&wp, Parity::Even), g.d_phi(&wt));
    let dw: Vec<f64> = (0..g.len()).map(|k| (a[k] - b[k]) / g.theta(g.ij(k).0).sin()).collect();
    let w = g.quad_weights();
    let density = (0..g.len())
        .map(|k| dw[k] * g.theta(g.ij(k).0).sin() / i.m[k].determinant().sqrt())
        .collect();
    let det: Vec<f64> = bdot.iter().map(|m| m.determinant()).collect();
    Ok(HerglotzCertificate {
        integral: integrate(&w, &dw),
        total_variation: integrate(&w, &dw.iter().map(|x| x.abs()).collect::<Vec<_>>()),
        max_abs_det: det.iter().map(|d| d.abs()).fold(0.0, f64::max),
        det,
        density,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::{metric_variation, shape_variation};
    use crate::projective::EuclideanKilling;

    fn unit_sphere(n: usize) -> FrameField {
        let g = Grid::new(n, 2 * n).unwrap();
        let x = (0..g.len()).map(|k| from_spatial(&g.dir(g.ij(k).0, g.ij(k).1))).collect();
        FrameField::from_positions(g, Ambient::Euclidean, x).unwrap()
    }

    // Re(dz²) with z = tan(θ/2)e^{iφ}, raised by I = can.
    fn quadratic_differential(f: &FrameField) -> Vec<Matrix2<f64>> {
        let g = f.grid;
        (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                let (t, p) = (g.theta(i), g.phi(j));
                let a = 0.5 / (t / 2.0).cos().powi(2);
                let b = (t / 2.0).tan();
                let (c, s) = ((2.0 * p).cos(), (2.0 * p).sin());
                let q = Matrix2::new(a * a * c, -a * b * s, -a * b * s, -b * b * c);
                Matrix2::new(1.0, 0.0, 0.0, 1.0 / t.sin().powi(2)) * q
            })
            .collect()
    }

    #[test]
    fn zero_bdot_gives_zero_field() {
        let f = unit_sphere(16);
        let r = integrate_deformation(&f, &vec![Matrix2::zeros(); f.grid.len()], 8, 1e-8).unwrap();
        assert!(r.phidot.iter().all(|p| p.norm() < 1e-12));
    }

    #[test]
    fn quadratic_differential_integrates_to_isometric_deformation() {
        let f = unit_sphere(48);
        let g = f.grid;
        let rows = 18;
        let bd = quadratic_differential(&f);
        let r = integrate_deformation(&f, &bd, rows, 1e-6).unwrap();
        assert!(r.loop_residual < g.h_theta().powi(2), "{}", r.loop_residual);
        let u = r.deform_field(&f).unwrap();
        let di = metric_variation(&f, &u);
        let sv = shape_variation(&f, &u).unwrap();
        let inner = (rows - 6) * g.n_phi;
        let scale = r.phidot.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let di_max = (0..inner).map(|k| di.normalized(k).norm()).fold(0.0, f64::max);
        let frame = |k: usize, m: &Matrix2<f64>| {
            let st = g.theta(g.ij(k).0).sin();
            Matrix2::new(1.0, 0.0, 0.0, st) * m * Matrix2::new(1.0, 0.0, 0.0, 1.0 / st)
        };
        let region = 0..inner - 4 * g.n_phi;
        let b_scale = region.clone().map(|k| frame(k, &bd[k]).norm()).fold(0.0, f64::max);
        let b_err = region.map(|k| frame(k, &(sv[k] - bd[k])).norm()).fold(0.0, f64::max) / b_scale;
        assert!(di_max < 1e-6 * scale, "{di_max}");
        assert!(b_err < 1e-5, "{b_err}");
        let cert = herglotz_certificate(&f, &u, &bd).unwrap();
        let mut worst = 0.0f64;
        for k in 0..inner - 4 * g.n_phi {
            let expect = -2.0 * cert.support[k] * cert.det[k];
            worst = worst.max((cert.density[k] - expect).abs());
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn killing_deformations_certify() {
        let f = unit_sphere(32);
        let k = EuclideanKilling { a: Vector3::new(0.3, -0.2, 0.5), b: Vector3::new(1.0, 0.4, -0.7) };
        let u = DeformField::from_euclidean_killing(&f, &k).unwrap();
        let bd = shape_variation(&f, &u).unwrap();
        let c = herglotz_certificate(&f, &u, &bd).unwrap();
        assert!(c.integral.abs() < 1e-8 && c.max_abs_det < 1e-8, "{c:?}");
        assert_eq!(herglotz_certificate(&f, &u, &vec![Matrix2::zeros(); f.grid.len()]).unwrap().integral, 0.0);
    }
}
