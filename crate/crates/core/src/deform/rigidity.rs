//! Sparse discrete operators u ↦ δI and u ↦ δIII and their near-kernel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Parity};
use crate::lorentz::{from_spatial, minkowski_inner, spatial, KillingElement, LorentzVec};
use crate::projective::EuclideanKilling;
use crate::sparse::{Sparse, SparseCholesky};
use crate::dual::dualize;
use crate::surface::{fundamental_forms, Ambient, FrameField};

const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RigidityKind {
    InducedMetric,
    ThirdForm,
}

/// u ↦ δI (or δIII) as a sparse matrix. Unknowns are √w·(c₁, c₂, c₃) per
/// node, with u = c₁e₁ + c₂e₂ + c₃N in an orthonormal frame and w the area
/// weights of the unit sphere. Equations are √w times the components of the
/// variation in the unit frame (∂θ, ∂φ/sin θ), so that Euclidean norms
/// approximate L² norms.
///
/// The variation is discretized twice, with forward- and with backward-biased
/// stencils, and the two blocks of 3 rows per node are stacked. Either block
/// alone admits grid-scale near-solutions of the linearized Cauchy–Riemann
/// part of the system; their common near-kernel is the discretized kernel.
#[derive(Clone, Debug)]
pub struct RigidityOperator {
    pub grid: Grid,
    pub kind: RigidityKind,
    pub ambient: Ambient,
    pub matrix: Sparse,
    frames: Vec<[LorentzVec; 3]>,
    sqrt_w: Vec<f64>,
    /// Positions of the surface the operator was assembled on.
    points: Vec<LorentzVec>,
}

fn orthonormal_frame(f: &FrameField, k: usize) -> [LorentzVec; 3] {
    let e1 = f.xt[k] / minkowski_inner(&f.xt[k], &f.xt[k]).sqrt();
    let e2 = f.xp[k] - e1 * minkowski_inner(&f.xp[k], &e1);
    let e2 = e2 / minkowski_inner(&e2, &e2).sqrt();
    [e1, e2, f.n[k]]
}

/// Kronecker product of a scalar stencil operator with the identity on the
/// four ambient components.
fn component_stencils(g: &Grid, theta: bool, forward: bool) -> Sparse {
    let mut rows = Vec::with_capacity(4 * g.len());
    for k in 0..g.len() {
        let st = if theta { g.biased_theta(k, Parity::Even, forward) } else { g.biased_phi(k, forward) };
        for mu in 0..4 {
            rows.push(st.iter().map(|&(m, w)| (4 * m + mu, w)).collect());
        }
    }
    Sparse::from_rows(4 * g.len(), rows)
}

impl RigidityOperator {
    /// The third-form operator is the induced-metric operator of the dual
    /// surface; its unknowns describe the dual deformation −Ṅ.
    pub fn assemble(f: &FrameField, kind: RigidityKind) -> Result<Self> {
        fundamental_forms(f)?.ensure_convex()?;
        match kind {
            RigidityKind::InducedMetric => Self::induced(f, kind),
            RigidityKind::ThirdForm => Self::induced(&dualize(f)?, kind),
        }
    }

    fn induced(f: &FrameField, kind: RigidityKind) -> Result<Self> {
        let g = f.grid;
        let n = g.len();
        let frames: Vec<[LorentzVec; 3]> = (0..n).map(|k| orthonormal_frame(f, k)).collect();
        let frame_rows = (0..4 * n).map(|r| {
            let (k, mu) = (r / 4, r % 4);
            (0..3).map(|m| (3 * k + m, frames[k][m][mu])).collect()
        });
        let expand = Sparse::from_rows(3 * n, frame_rows.collect());
        let w = g.quad_weights();
        let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let mut pair = Vec::with_capacity(3 * n);
        for k in 0..n {
            let s = g.theta(g.ij(k).0).sin();
            let (tt, tp) = (&f.xt[k], &f.xp[k]);
            let scale = [sqrt_w[k], sqrt_w[k] * std::f64::consts::SQRT_2 / s, sqrt_w[k] / (s * s)];
            let mut r0 = vec![];
            let mut r1 = vec![];
            let mut r2 = vec![];
            for mu in 0..4 {
                let (at, ap) = (8 * k + mu, 8 * k + 4 + mu);
                r0.push((at, 2.0 * ETA[mu] * tt[mu] * scale[0]));
                r1.push((at, ETA[mu] * tp[mu] * scale[1]));
                r1.push((ap, ETA[mu] * tt[mu] * scale[1]));
                r2.push((ap, 2.0 * ETA[mu] * tp[mu] * scale[2]));
            }
            pair.extend([r0, r1, r2]);
        }
        let pair = Sparse::from_rows(8 * n, pair);
        let mut rows = vec![];
        for forward in [true, false] {
            let dt = component_stencils(&g, true, forward);
            let dp = component_stencils(&g, false, forward);
            rows.extend(pair.matmul(&interleave(&dt.matmul(&expand), &dp.matmul(&expand))).rows);
        }
        let mut matrix = Sparse::from_rows(3 * n, rows);
        let col: Vec<f64> = (0..3 * n).map(|c| 1.0 / sqrt_w[c / 3]).collect();
        matrix.scale(&vec![1.0; 6 * n], &col);
        Ok(Self { grid: g, kind, ambient: f.ambient, matrix, frames, sqrt_w, points: f.x.clone() })
    }

    /// Unknown vector of an ambient field along the surface.
    pub fn coefficients(&self, u: &[LorentzVec]) -> DVector<f64> {
        DVector::from_fn(3 * self.grid.len(), |r, _| {
            let (k, m) = (r / 3, r % 3);
            let e = &self.frames[k][m];
            self.sqrt_w[k] * minkowski_inner(&u[k], e) / minkowski_inner(e, e)
        })
    }

    pub fn field(&self, y: &DVector<f64>) -> Vec<LorentzVec> {
        (0..self.grid.len())
            .map(|k| (0..3).fold(LorentzVec::zeros(), |acc, m| acc + self.frames[k][m] * (y[3 * k + m] / self.sqrt_w[k])))
            .collect()
    }

    /// Weighted variation rows for an ambient field.
    pub fn apply(&self, u: &[LorentzVec]) -> DVector<f64> {
        self.matrix.mul_vec(&self.coefficients(u))
    }

    /// Sampled infinitesimal isometries of the ambient space, as unknown vectors.
    pub fn killing_samples(&self) -> DMatrix<f64> {
        let x = &self.points;
        let fields: Vec<Vec<LorentzVec>> = match self.ambient {
            Ambient::Euclidean => (0..6)
                .map(|i| {
                    let mut a = nalgebra::Vector3::zeros();
                    let mut b = nalgebra::Vector3::zeros();
                    if i < 3 {
                        a[i] = 1.0
                    } else {
                        b[i - 3] = 1.0
                    }
                    let k = EuclideanKilling { a, b };
                    x.iter().map(|p| from_spatial(&k.eval(&spatial(p)))).collect()
                })
                .collect(),
            _ => KillingElement::basis().iter().map(|k| x.iter().map(|p| k.eval(p)).collect()).collect(),
        };
        let cols: Vec<DVector<f64>> = fields.iter().map(|u| self.coefficients(u)).collect();
        DMatrix::from_columns(&cols)
    }
}

fn interleave(a: &Sparse, b: &Sparse) -> Sparse {
    let n = a.nrows / 4;
    let mut rows = Vec::with_capacity(2 * a.nrows);
    for k in 0..n {
        rows.extend_from_slice(&a.rows[4 * k..4 * k + 4]);
        rows.extend_from_slice(&b.rows[4 * k..4 * k + 4]);
    }
    Sparse { nrows: 2 * a.nrows, ncols: a.ncols, rows }
}

/// Classifier and eigensolver settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Singular values ≤ τ·s_max count as kernel.
    pub tau: f64,
    /// Required s₇/s₆.
    pub gap: f64,
    pub block: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { tau: 1e-6, gap: 10.0, block: 16, max_iter: 60, seed: 6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub kind: RigidityKind,
    /// Smallest singular values, ascending.
    pub singular_values: Vec<f64>,
    pub s_max: f64,
    pub kernel_dim: usize,
    /// s₇/s₆.
    pub gap_ratio: f64,
    /// Largest principal angle between the six smallest right singular vectors
    /// and the sampled Killing fields.
    pub subspace_angle: f64,
    pub iterations: usize,
    pub pass: bool,
    #[serde(skip)]
    pub kernel: DMatrix<f64>,
}

fn orthonormalize(z: DMatrix<f64>) -> DMatrix<f64> {
    z.qr().q()
}

/// Largest singular value by power iteration on AᵀA.
fn largest_singular_value(a: &Sparse, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_fn(a.ncols, |_, _| rng.gen_range(-1.0..1.0));
    let at = a.transpose();
    let mut s = 0.0;
    for _ in 0..200 {
        x /= x.norm();
        let y = at.mul_vec(&a.mul_vec(&x));
        let next = y.norm().sqrt();
        x = y;
        if (next - s).abs() <= 1e-6 * next {
            return next;
        }
        s = next;
    }
    s
}

/// Smallest singular triplets of the operator by subspace iteration on
/// (AᵀA + μ)⁻¹ with a sparse Cholesky factorization, then Rayleigh–Ritz on A.
pub fn rigidity_kernel(f: &FrameField, kind: RigidityKind, opts: &KernelOptions) -> Result<RigidityReport> {
    let op = RigidityOperator::assemble(f, kind)?;
    kernel_of(&op, opts)
}

pub fn kernel_of(op: &RigidityOperator, opts: &KernelOptions) -> Result<RigidityReport> {
    let a = &op.matrix;
    let n = a.ncols;
    let b = opts.block.clamp(7, n);
    let normal = a.normal(0.0);
    let chol = SparseCholesky::new(&a.normal(1e-14 * normal.max_diag()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut z = orthonormalize(DMatrix::from_fn(n, b, |_, _| rng.gen_range(-1.0..1.0)));
    let mut prev: Vec<f64> = vec![];
    let mut iterations = 0;
    let (mut sv, mut vecs) = (vec![], DMatrix::zeros(n, b));
    for it in 0..opts.max_iter {
        iterations = it + 1;
        z = orthonormalize(chol.solve(&z)?);
        let az = a.mul_mat(&z);
        let svd = az.svd(false, true);
        let vt = svd.v_t.ok_or_else(|| Error::Linalg("SVD failed".into()))?;
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        sv = order.iter().map(|&i| svd.singular_values[i]).collect();
        let cols: Vec<DVector<f64>> = order.iter().map(|&i| &z * vt.row(i).transpose()).collect();
        vecs = DMatrix::from_columns(&cols);
        let converged = prev.len() == sv.len()
            && sv.iter().zip(&prev).take(7).all(|(s, p)| (s - p).abs() <= 1e-6 * s + 1e-13 * sv[b - 1]);
        prev = sv.clone();
        if converged {
            break;
        }
    }
    let s_max = largest_singular_value(a, opts.seed);
    let kernel_dim = sv.iter().filter(|s| **s <= opts.tau * s_max).count();
    let gap_ratio = sv[6] / sv[5];
    let v6 = vecs.columns(0, 6).into_owned();
    let q = orthonormalize(op.killing_samples());
    let resid = &v6 - &q * (q.transpose() * &v6);
    let subspace_angle = resid.svd(false, false).singular_values.max().min(1.0).asin();
    let pass = kernel_dim == 6 && gap_ratio >= opts.gap;
    Ok(RigidityReport {
        kind: op.kind,
        singular_values: sv,
        s_max,
        kernel_dim,
        gap_ratio,
        subspace_angle,
        iterations,
        pass,
        kernel: v6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::{metric_variation, normal_variation, third_form_variation, DeformField};
    use crate::sample::RadialFn;
    use crate::surface::{embed, FormField, RadialSurface};

    fn weighted(op: &RigidityOperator, form: &FormField) -> DVector<f64> {
        DVector::from_fn(3 * op.grid.len(), |r, _| {
            let (k, c) = (r / 3, r % 3);
            let m = form.normalized(k);
            let v = [m[(0, 0)], std::f64::consts::SQRT_2 * m[(0, 1)], m[(1, 1)]][c];
            v * op.sqrt_w[k]
        })
    }

    // The operator uses biased stencils, the pointwise formulas centered ones.
    #[test]
    fn operators_match_pointwise_variations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = RadialFn::random(&mut rng, 1.0, 0.1, 3);
        let f = embed(&RadialSurface::from_fn(Grid::new(32, 64).unwrap(), &r).unwrap()).unwrap();
        let u = DeformField::random(&f, &mut rng, 3).unwrap();
        for kind in [RigidityKind::InducedMetric, RigidityKind::ThirdForm] {
            let op = RigidityOperator::assemble(&f, kind).unwrap();
            let (form, field) = match kind {
                RigidityKind::InducedMetric => (metric_variation(&f, &u), u.u.clone()),
                RigidityKind::ThirdForm => {
                    (third_form_variation(&f, &u), normal_variation(&f, &u).iter().map(|v| -v).collect())
                }
            };
            let expect = weighted(&op, &form);
            let got = op.apply(&field);
            let m = expect.len();
            for half in [got.rows(0, m), got.rows(m, m)] {
                let rel = (half - &expect).amax() / expect.amax();
                assert!(rel < 5e-5, "{kind:?} {rel}");
            }
            let back = op.field(&op.coefficients(&field));
            assert!(back.iter().zip(&field).all(|(a, b)| (a - b).amax() < 1e-12));
        }
    }

    #[test]
    fn sphere_kernel_is_six_dimensional() {
        let g = Grid::new(16, 32).unwrap();
        let f = embed(&RadialSurface::sphere(g, 1.0)).unwrap();
        for kind in [RigidityKind::InducedMetric, RigidityKind::ThirdForm] {
            let rep = rigidity_kernel(&f, kind, &KernelOptions::default()).unwrap();
            assert_eq!(rep.kernel_dim, 6, "{:?} s_max {}", rep.singular_values, rep.s_max);
            assert!(rep.gap_ratio >= 10.0 && rep.subspace_angle < 1e-3, "{rep:?}");
        }
    }
}
