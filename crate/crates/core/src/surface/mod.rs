//! Sampled surfaces over the latitude–longitude grid: radial graphs in H³,
//! ambient frames, and the fundamental forms I, II, III with the shape
//! operator B.

pub mod intrinsic;
mod resample;

use nalgebra::{Matrix2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Parity};
use crate::lorentz::{center, from_spatial, lorentz_cross, minkowski_inner, LorentzVec};
use crate::sample::SphereFn;

pub use intrinsic::{Atlas, Chart, ConnectionResiduals};
pub use resample::{radial_resample, regrid};

/// The quadric or flat space a sampled surface lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ambient {
    Hyperbolic,
    Euclidean,
    DeSitter,
}

impl Ambient {
    /// The constant c in the Gauss equation det B = K − c
    /// (c = −1 in H³, 0 in R³; in S³₁ the equation reads det B = 1 − K).
    pub fn gauss_residual(self, det_b: f64, k: f64) -> f64 {
        match self {
            Ambient::Hyperbolic => det_b - (k + 1.0),
            Ambient::Euclidean => det_b - k,
            Ambient::DeSitter => det_b - (1.0 - k),
        }
    }
}

/// A star-shaped surface given by its distance ρ from the model center along
/// each grid direction.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSurface {
    pub grid: Grid,
    pub rho: Vec<f64>,
}

impl RadialSurface {
    pub fn new(grid: Grid, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != grid.len() {
            return Err(Error::Format(format!("{} radii for a grid of {} nodes", rho.len(), grid.len())));
        }
        if let Some(k) = rho.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Format(format!("radius {} at node {k} is not positive", rho[k])));
        }
        Ok(Self { grid, rho })
    }

    pub fn sphere(grid: Grid, rho: f64) -> Self {
        Self { grid, rho: vec![rho; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: &dyn SphereFn) -> Result<Self> {
        Self::new(grid, f.sample(&grid))
    }

    pub fn position(&self, k: usize) -> LorentzVec {
        let (i, j) = self.grid.ij(k);
        radial_point(self.rho[k], &self.grid.dir(i, j))
    }

    pub fn positions(&self) -> Vec<LorentzVec> {
        (0..self.grid.len()).map(|k| self.position(k)).collect()
    }
}

#[inline]
pub fn radial_point(rho: f64, d: &Vector3<f64>) -> LorentzVec {
    let s = rho.sinh();
    LorentzVec::new(rho.cosh(), s * d[0], s * d[1], s * d[2])
}

/// Positions, chart tangents and unit normal at every node. Euclidean
/// positions are stored with x0 = 0.
#[derive(Clone, Debug)]
pub struct FrameField {
    pub grid: Grid,
    pub ambient: Ambient,
    pub x: Vec<LorentzVec>,
    pub xt: Vec<LorentzVec>,
    pub xp: Vec<LorentzVec>,
    pub n: Vec<LorentzVec>,
}

impl FrameField {
    /// Tangents by eighth-order differences of the positions, projected onto
    /// the tangent space of the ambient quadric, and normal by the Lorentzian
    /// cross product. In H³ and R³ the normal points to the side
    /// of the center; in S³₁ it is the past-pointing timelike normal, which
    /// makes the dual of a convex surface convex with the same II.
    pub fn from_positions(grid: Grid, ambient: Ambient, x: Vec<LorentzVec>) -> Result<Self> {
        let mut xt = grid.d_theta(&x, Parity::Even);
        let mut xp = grid.d_phi(&x);
        if ambient != Ambient::Euclidean {
            for k in 0..grid.len() {
                let q = minkowski_inner(&x[k], &x[k]);
                let (a, b) = (minkowski_inner(&xt[k], &x[k]) / q, minkowski_inner(&xp[k], &x[k]) / q);
                xt[k] -= x[k] * a;
                xp[k] -= x[k] * b;
            }
        }
        let n = (0..grid.len())
            .map(|k| normal(ambient, &x[k], &xt[k], &xp[k]).map_err(|e| at_node(&grid, k, e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, ambient, x, xt, xp, n })
    }

    /// Largest |⟨N, x_a⟩| / |x_a| and largest deviation of |⟨N,N⟩| from 1.
    pub fn normal_residual(&self) -> (f64, f64) {
        let mut orth = 0.0f64;
        let mut unit = 0.0f64;
        for k in 0..self.grid.len() {
            let n = &self.n[k];
            for t in [&self.xt[k], &self.xp[k]] {
                orth = orth.max(minkowski_inner(n, t).abs() / minkowski_inner(t, t).abs().sqrt());
            }
            unit = unit.max((minkowski_inner(n, n).abs() - 1.0).abs());
        }
        (orth, unit)
    }
}

fn at_node(grid: &Grid, k: usize, e: Error) -> Error {
    let (i, j) = grid.ij(k);
    match e {
        Error::Degenerate(m) => Error::Degenerate(format!("{m} at node ({i}, {j})")),
        other => other,
    }
}

pub fn normal(ambient: Ambient, x: &LorentzVec, xt: &LorentzVec, xp: &LorentzVec) -> Result<LorentzVec> {
    let anchor = if ambient == Ambient::Euclidean { center() } else { *x };
    let c = lorentz_cross(&anchor, xt, xp);
    let q = minkowski_inner(&c, &c);
    let scale = minkowski_inner(xt, xt).abs() * minkowski_inner(xp, xp).abs();
    if !(q.abs() > 1e-24 * scale) || !q.is_finite() {
        return Err(Error::Degenerate("tangents are not independent".into()));
    }
    match ambient {
        Ambient::DeSitter => {
            if q >= 0.0 {
                return Err(Error::Degenerate("surface is not spacelike".into()));
            }
            let n = c / (-q).sqrt();
            Ok(if n[0] > 0.0 { -n } else { n })
        }
        _ => {
            if q <= 0.0 {
                return Err(Error::Degenerate("normal is not spacelike".into()));
            }
            Ok(-c / q.sqrt())
        }
    }
}

/// Radial embedding into H³ with finite-difference frames.
pub fn embed(s: &RadialSurface) -> Result<FrameField> {
    FrameField::from_positions(s.grid, Ambient::Hyperbolic, s.positions())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    I,
    II,
    III,
    DeltaI,
    DeltaII,
    DeltaIII,
    Target,
}

/// Per-node symmetric bilinear forms in the (θ, φ) chart basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    pub grid: Grid,
    pub kind: FormKind,
    pub m: Vec<Matrix2<f64>>,
}

/// The round metric diag(1, sin²θ) of the unit sphere at row `i`.
pub fn can(grid: &Grid, i: usize) -> Matrix2<f64> {
    let s = grid.theta(i).sin();
    Matrix2::new(1.0, 0.0, 0.0, s * s)
}

impl FormField {
    pub fn new(grid: Grid, kind: FormKind, m: Vec<Matrix2<f64>>) -> Self {
        assert_eq!(m.len(), grid.len());
        Self { grid, kind, m }
    }

    /// c·can.
    pub fn round(grid: Grid, kind: FormKind, c: f64) -> Self {
        let m = (0..grid.len()).map(|k| can(&grid, grid.ij(k).0) * c).collect();
        Self { grid, kind, m }
    }

    pub fn with_kind(mut self, kind: FormKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, kind: self.kind, m: self.m.iter().map(|a| a * s).collect() }
    }

    /// Σ cᵢ Fᵢ over forms on the same grid.
    pub fn combine(kind: FormKind, terms: &[(f64, &FormField)]) -> Self {
        let grid = terms[0].1.grid;
        let m = (0..grid.len())
            .map(|k| terms.iter().fold(Matrix2::zeros(), |acc, (c, f)| acc + f.m[k] * *c))
            .collect();
        Self { grid, kind, m }
    }

    /// Components in the unit frame (∂θ, ∂φ / sin θ) of the sphere.
    pub fn normalized(&self, k: usize) -> Matrix2<f64> {
        let s = 1.0 / self.grid.theta(self.grid.ij(k).0).sin();
        let d = Matrix2::new(1.0, 0.0, 0.0, s);
        d * self.m[k] * d
    }

    /// max_k ‖Δ_k‖ / max_k ‖other_k‖ with both measured in the unit sphere frame.
    pub fn rel_diff(&self, other: &FormField) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for k in 0..self.grid.len() {
            let a = self.normalized(k);
            let b = other.normalized(k);
            num = num.max((a - b).norm());
            den = den.max(b.norm());
        }
        num / den
    }

    /// max_k ‖Δ_k‖ in the unit sphere frame.
    pub fn max_diff(&self, other: &FormField) -> f64 {
        (0..self.grid.len()).map(|k| (self.normalized(k) - other.normalized(k)).norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.len()).map(|k| self.normalized(k).norm()).fold(0.0, f64::max)
    }

    /// Quadrature weights of the area form of this metric.
    pub fn area_weights(&self) -> Vec<f64> {
        let w = self.grid.quad_weights();
        (0..self.grid.len())
            .map(|k| {
                let s = self.grid.theta(self.grid.ij(k).0).sin();
                w[k] * self.m[k].determinant().max(0.0).sqrt() / s
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        crate::grid::pairwise_sum(&self.area_weights())
    }

    /// Index of the first node where the form is not positive definite.
    pub fn first_indefinite(&self) -> Option<usize> {
        self.m.iter().position(|a| !(a[(0, 0)] > 0.0 && a.determinant() > 0.0))
    }
}

/// Per-node (1,1)-tensor in the chart basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeField {
    pub grid: Grid,
    pub b: Vec<Matrix2<f64>>,
}

/// Eigenvalues (ascending) of an endomorphism that is self-adjoint for a
/// positive form.
pub fn real_eigenvalues(b: &Matrix2<f64>) -> (f64, f64) {
    let t = b.trace() / 2.0;
    let h = (b[(0, 0)] - b[(1, 1)]) / 2.0;
    let d = (h * h + b[(0, 1)] * b[(1, 0)]).max(0.0).sqrt();
    (t - d, t + d)
}

impl ShapeField {
    pub fn principal_curvatures(&self, k: usize) -> (f64, f64) {
        real_eigenvalues(&self.b[k])
    }

    pub fn min_curvature(&self) -> f64 {
        (0..self.grid.len()).map(|k| self.principal_curvatures(k).0).fold(f64::INFINITY, f64::min)
    }

    pub fn max_curvature(&self) -> f64 {
        (0..self.grid.len()).map(|k| self.principal_curvatures(k).1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inverse(&self) -> Result<ShapeField> {
        let b = self
            .b
            .iter()
            .enumerate()
            .map(|(k, m)| m.try_inverse().ok_or_else(|| at_node(&self.grid, k, Error::Degenerate("singular shape operator".into()))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ShapeField { grid: self.grid, b })
    }
}

#[derive(Clone, Debug)]
pub struct Forms {
    pub i: FormField,
    pub ii: FormField,
    pub iii: FormField,
    pub b: ShapeField,
    /// Largest relative antisymmetric part of the raw second form before
    /// symmetrization.
    pub asymmetry: f64,
    /// Nodes (row, column) where B fails to be positive definite.
    pub nonconvex: Vec<(usize, usize)>,
}

impl Forms {
    /// Builds II by symmetrization, B = I⁻¹II and III = II I⁻¹ II.
    pub fn from_raw(grid: Grid, i: Vec<Matrix2<f64>>, ii_raw: Vec<Matrix2<f64>>) -> Result<Self> {
        let n = grid.len();
        let mut ii = Vec::with_capacity(n);
        let mut iii = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut asymmetry = 0.0f64;
        let mut nonconvex = vec![];
        for k in 0..n {
            let s = (ii_raw[k] + ii_raw[k].transpose()) * 0.5;
            let a = (ii_raw[k] - ii_raw[k].transpose()) * 0.5;
            if s.norm() > 0.0 {
                asymmetry = asymmetry.max(a.norm() / s.norm());
            }
            let inv = i[k].try_inverse().filter(|_| i[k].determinant() > 0.0).ok_or_else(|| {
                at_node(&grid, k, Error::Degenerate("first fundamental form is not positive definite".into()))
            })?;
            let bk = inv * s;
            let t = s * inv * s;
            iii.push((t + t.transpose()) * 0.5);
            ii.push(s);
            if !(bk.determinant() > 0.0 && bk.trace() > 0.0) {
                nonconvex.push(grid.ij(k));
            }
            b.push(bk);
        }
        Ok(Self {
            i: FormField::new(grid, FormKind::I, i),
            ii: FormField::new(grid, FormKind::II, ii),
            iii: FormField::new(grid, FormKind::III, iii),
            b: ShapeField { grid, b },
            asymmetry,
            nonconvex,
        })
    }

    pub fn ensure_convex(&self) -> Result<()> {
        match self.nonconvex.first() {
            None => Ok(()),
            Some(&(r, c)) => Err(Error::NonConvex { count: self.nonconvex.len(), first_row: r, first_col: c }),
        }
    }

    pub fn grid(&self) -> Grid {
        self.i.grid
    }
}

/// Fundamental forms of a sampled surface: I from the tangents,
/// II = −⟨x_a, ∂_b N⟩ symmetrized, B = I⁻¹II, III = BᵀIB.
pub fn fundamental_forms(f: &FrameField) -> Result<Forms> {
    let g = f.grid;
    let nt = g.d_theta(&f.n, Parity::Even);
    let np = g.d_phi(&f.n);
    let mut i = Vec::with_capacity(g.len());
    let mut ii = Vec::with_capacity(g.len());
    for k in 0..g.len() {
        let (a, b) = (&f.xt[k], &f.xp[k]);
        let ip = |u: &LorentzVec, v: &LorentzVec| minkowski_inner(u, v);
        let e = ip(a, a);
        let ff = ip(a, b);
        let gg = ip(b, b);
        i.push(Matrix2::new(e, ff, ff, gg));
        ii.push(Matrix2::new(-ip(a, &nt[k]), -ip(a, &np[k]), -ip(b, &nt[k]), -ip(b, &np[k])));
    }
    Forms::from_raw(g, i, ii)
}

/// Forms of the Euclidean surface carried by a frame field in R³.
pub fn euclidean_forms(f: &FrameField) -> Result<Forms> {
    if f.ambient != Ambient::Euclidean {
        return Err(Error::Precondition("euclidean_forms needs a surface in R³".into()));
    }
    fundamental_forms(f)
}

/// Forms of the radial graph ρ = f(θ, φ) in H³ from exact derivatives of f.
pub fn analytic_forms(grid: Grid, f: &dyn SphereFn) -> Result<Forms> {
    let mut i = Vec::with_capacity(grid.len());
    let mut ii = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (r, c) = grid.ij(k);
        let (t, p) = (grid.theta(r), grid.phi(c));
        let j = f.jet(t, p);
        let (st, ct, sp, cp) = (t.sin(), t.cos(), p.sin(), p.cos());
        let d = from_spatial(&Vector3::new(st * cp, st * sp, ct));
        let dt = from_spatial(&Vector3::new(ct * cp, ct * sp, -st));
        let dp = from_spatial(&Vector3::new(-st * sp, st * cp, 0.0));
        let dtt = -d;
        let dtp = from_spatial(&Vector3::new(-ct * sp, ct * cp, 0.0));
        let dpp = from_spatial(&Vector3::new(-st * cp, -st * sp, 0.0));
        let (sh, ch) = (j.f.sinh(), j.f.cosh());
        let x = center() * ch + d * sh;
        let rad = center() * sh + d * ch;
        let xt = rad * j.t + dt * sh;
        let xp = rad * j.p + dp * sh;
        let second = |rab: f64, ra: f64, rb: f64, da: &LorentzVec, db: &LorentzVec, dab: &LorentzVec| {
            rad * rab + x * (ra * rb) + db * (ra * ch) + da * (rb * ch) + dab * sh
        };
        let xtt = second(j.tt, j.t, j.t, &dt, &dt, &dtt);
        let xtp = second(j.tp, j.t, j.p, &dt, &dp, &dtp);
        let xpp = second(j.pp, j.p, j.p, &dp, &dp, &dpp);
        let n = normal(Ambient::Hyperbolic, &x, &xt, &xp).map_err(|e| at_node(&grid, k, e))?;
        let ip = minkowski_inner;
        i.push(Matrix2::new(ip(&xt, &xt), ip(&xt, &xp), ip(&xp, &xt), ip(&xp, &xp)));
        let a = ip(&xtt, &n);
        let b = ip(&xtp, &n);
        let c2 = ip(&xpp, &n);
        ii.push(Matrix2::new(a, b, b, c2));
    }
    Forms::from_raw(grid, i, ii)
}
