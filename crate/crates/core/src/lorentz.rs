//! Minkowski space R⁴₁ with signature (−,+,+,+), the hyperboloid H³, de Sitter
//! space S³₁ and the Killing-field calculus of so(3,1).

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::Rng;

use crate::error::{Error, Result};

pub type LorentzVec = Vector4<f64>;

/// Tolerance for quadric membership at construction.
pub const QUADRIC_TOL: f64 = 1e-12;

#[inline]
pub fn minkowski_inner(u: &LorentzVec, v: &LorentzVec) -> f64 {
    -u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3]
}

#[inline]
pub fn minkowski_norm_sq(u: &LorentzVec) -> f64 {
    minkowski_inner(u, u)
}

/// The Gram matrix J = diag(−1, 1, 1, 1).
pub fn gram() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0))
}

#[inline]
pub fn spatial(v: &LorentzVec) -> Vector3<f64> {
    Vector3::new(v[1], v[2], v[3])
}

#[inline]
pub fn from_spatial(v: &Vector3<f64>) -> LorentzVec {
    Vector4::new(0.0, v[0], v[1], v[2])
}

/// The model center x₀ = (1, 0, 0, 0).
#[inline]
pub fn center() -> LorentzVec {
    Vector4::new(1.0, 0.0, 0.0, 0.0)
}

/// Orthogonal projection of `v` onto the tangent space of the quadric at `x`.
#[inline]
pub fn project_tangent(x: &LorentzVec, v: &LorentzVec) -> LorentzVec {
    v - x * (minkowski_inner(v, x) / minkowski_inner(x, x))
}

/// The vector c with ⟨c, z⟩ = det[a, b, c, z] for every z.
pub fn lorentz_cross(a: &LorentzVec, b: &LorentzVec, c: &LorentzVec) -> LorentzVec {
    let mut cof = Vector4::zeros();
    for i in 0..4 {
        let rows: Vec<usize> = (0..4).filter(|&r| r != i).collect();
        let m = Matrix3::new(
            a[rows[0]], b[rows[0]], c[rows[0]],
            a[rows[1]], b[rows[1]], c[rows[1]],
            a[rows[2]], b[rows[2]], c[rows[2]],
        );
        let sign = if (i + 3) % 2 == 0 { 1.0 } else { -1.0 };
        cof[i] = sign * m.determinant();
    }
    cof[0] = -cof[0];
    cof
}

/// Right-handed cross product u ∧ w in the tangent space at `x`; at the
/// center it is the usual cross product of R³.
#[inline]
pub fn cross_at(x: &LorentzVec, u: &LorentzVec, w: &LorentzVec) -> LorentzVec {
    lorentz_cross(x, u, w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPoint(LorentzVec);

impl HPoint {
    pub fn new(v: LorentzVec) -> Result<Self> {
        let q = minkowski_norm_sq(&v);
        if (q + 1.0).abs() > QUADRIC_TOL * (1.0 + v[0] * v[0]) || v[0] <= 0.0 {
            return Err(Error::OffQuadric(format!("⟨x,x⟩ = {q}, x0 = {}", v[0])));
        }
        Ok(Self(v))
    }

    /// Rescales a future timelike vector onto H³.
    pub fn normalize(v: LorentzVec) -> Result<Self> {
        let q = minkowski_norm_sq(&v);
        if q >= 0.0 || v[0] <= 0.0 {
            return Err(Error::OffQuadric(format!("not future timelike: ⟨x,x⟩ = {q}")));
        }
        Ok(Self(v / (-q).sqrt()))
    }

    /// Wraps a vector already known to lie on H³.
    #[inline]
    pub fn from_raw(v: LorentzVec) -> Self {
        Self(v)
    }

    pub fn center() -> Self {
        Self(center())
    }

    /// Point at distance `rho` from the center in the unit direction `dir`.
    pub fn from_polar(rho: f64, dir: &Vector3<f64>) -> Self {
        let (s, c) = (rho.sinh(), rho.cosh());
        Self(Vector4::new(c, s * dir[0], s * dir[1], s * dir[2]))
    }

    #[inline]
    pub fn vec(&self) -> &LorentzVec {
        &self.0
    }

    pub fn distance_to_center(&self) -> f64 {
        self.0[0].max(1.0).acosh()
    }

    /// Orthonormal, positively oriented frame of T_x H³ obtained by boosting
    /// the standard frame at the center along the ray through x.
    pub fn tangent_frame(&self) -> [LorentzVec; 3] {
        let x = &self.0;
        let s = spatial(x);
        let k = 1.0 / (1.0 + x[0]);
        let mut out = [Vector4::zeros(); 3];
        for (i, e) in out.iter_mut().enumerate() {
            let mut v = s * (s[i] * k);
            v[i] += 1.0;
            *e = Vector4::new(s[i], v[0], v[1], v[2]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DSPoint(LorentzVec);

impl DSPoint {
    pub fn new(v: LorentzVec) -> Result<Self> {
        let q = minkowski_norm_sq(&v);
        if (q - 1.0).abs() > QUADRIC_TOL * (1.0 + v[0] * v[0]) {
            return Err(Error::OffQuadric(format!("⟨x,x⟩ = {q}, expected 1")));
        }
        Ok(Self(v))
    }

    pub fn normalize(v: LorentzVec) -> Result<Self> {
        let q = minkowski_norm_sq(&v);
        if q <= 0.0 {
            return Err(Error::OffQuadric(format!("not spacelike: ⟨x,x⟩ = {q}")));
        }
        Ok(Self(v / q.sqrt()))
    }

    /// Wraps a vector already known to lie on S³₁.
    #[inline]
    pub fn from_raw(v: LorentzVec) -> Self {
        Self(v)
    }

    #[inline]
    pub fn vec(&self) -> &LorentzVec {
        &self.0
    }
}

/// A vector tangent to one of the quadrics at `base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVec {
    pub base: LorentzVec,
    pub dir: LorentzVec,
}

impl TangentVec {
    pub fn new(base: LorentzVec, dir: LorentzVec) -> Result<Self> {
        let r = minkowski_inner(&base, &dir);
        let scale = 1.0 + base.norm() * dir.norm();
        if r.abs() > 1e-9 * scale {
            return Err(Error::Degenerate(format!("vector not tangent: ⟨base, dir⟩ = {r}")));
        }
        Ok(Self { base, dir })
    }

    pub fn norm_sq(&self) -> f64 {
        minkowski_norm_sq(&self.dir)
    }
}

/// Hyperbolic distance, cosh d = −⟨x, y⟩.
pub fn h_dist(x: &HPoint, y: &HPoint) -> Result<f64> {
    let c = -minkowski_inner(x.vec(), y.vec());
    if c < 1.0 - 1e-9 {
        return Err(Error::Degenerate(format!("−⟨x,y⟩ = {c} < 1")));
    }
    Ok(c.max(1.0).acosh())
}

/// Point at arc length `t` along the geodesic leaving `x` with unit velocity `v`.
pub fn geodesic(x: &HPoint, v: &TangentVec, t: f64) -> Result<HPoint> {
    let n = v.norm_sq();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnit(n));
    }
    let p = x.vec() * t.cosh() + v.dir * t.sinh();
    HPoint::normalize(p)
}

/// An element of so(3,1), acting on R⁴₁ by matrix multiplication.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KillingElement {
    mat: Matrix4<f64>,
}

impl KillingElement {
    pub fn new(mat: Matrix4<f64>) -> Result<Self> {
        let j = gram();
        let defect = (mat.transpose() * j + j * mat).amax();
        if defect > 1e-12 * (1.0 + mat.amax()) {
            return Err(Error::Degenerate(format!("matrix not in so(3,1): defect {defect}")));
        }
        Ok(Self { mat })
    }

    pub fn zero() -> Self {
        Self { mat: Matrix4::zeros() }
    }

    /// Field with translation part `a` and rotation vector `b` at the center.
    pub fn from_parts(a: &Vector3<f64>, b: &Vector3<f64>) -> Self {
        #[rustfmt::skip]
        let mat = Matrix4::new(
            0.0,  a[0],  a[1],  a[2],
            a[0], 0.0,  -b[2],  b[1],
            a[1], b[2],  0.0,  -b[0],
            a[2], -b[1], b[0],  0.0,
        );
        Self { mat }
    }

    /// The six generators: boosts along the axes, then rotations about them.
    pub fn basis() -> [Self; 6] {
        let z = Vector3::zeros();
        let e = [Vector3::x(), Vector3::y(), Vector3::z()];
        [
            Self::from_parts(&e[0], &z),
            Self::from_parts(&e[1], &z),
            Self::from_parts(&e[2], &z),
            Self::from_parts(&z, &e[0]),
            Self::from_parts(&z, &e[1]),
            Self::from_parts(&z, &e[2]),
        ]
    }

    pub fn random<R: Rng>(rng: &mut R, scale: f64) -> Self {
        let mut g = || Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
        let a = g();
        let b = g();
        Self::from_parts(&a, &b)
    }

    #[inline]
    pub fn mat(&self) -> &Matrix4<f64> {
        &self.mat
    }

    #[inline]
    pub fn eval(&self, x: &LorentzVec) -> LorentzVec {
        self.mat * x
    }

    /// The isometry exp(t·k).
    pub fn flow(&self, t: f64) -> Matrix4<f64> {
        (self.mat * t).exp()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mat: self.mat * s }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { mat: self.mat + other.mat }
    }

    /// Covariant derivative w ↦ ∇_w X of the field at x.
    fn nabla(&self, x: &LorentzVec, w: &LorentzVec) -> LorentzVec {
        let aw = self.mat * w;
        aw + x * minkowski_inner(&aw, x)
    }

    /// Splits the field at x into a pure translation τ (the value at x) and
    /// a pure rotation with rotation vector σ, so that ∇_w X = σ ∧ w.
    pub fn decompose(&self, x: &HPoint) -> (TangentVec, TangentVec) {
        let p = x.vec();
        let tau = self.eval(p);
        let mut sigma = Vector4::zeros();
        for e in x.tangent_frame() {
            sigma += cross_at(p, &e, &self.nabla(p, &e));
        }
        sigma *= 0.5;
        (
            TangentVec { base: *p, dir: project_tangent(p, &tau) },
            TangentVec { base: *p, dir: sigma },
        )
    }

    /// Inverse of [`decompose`](Self::decompose).
    pub fn compose(tau: &LorentzVec, sigma: &LorentzVec, x: &HPoint) -> Self {
        let p = x.vec();
        let j = gram();
        let mut mat = (p * tau.transpose() - tau * p.transpose()) * j;
        for e in x.tangent_frame() {
            mat += cross_at(p, sigma, &e) * e.transpose() * j;
        }
        Self { mat }
    }
}

/// Samples of a section (τ, σ) of the Killing bundle along a path with
/// uniform parameter step `h`.
pub struct PathSection<'a> {
    pub points: &'a [LorentzVec],
    pub tau: &'a [LorentzVec],
    pub sigma: &'a [LorentzVec],
    pub h: f64,
}

/// The flat connection D_w(τ, σ) = (∇_w τ + w ∧ σ, ∇_w σ − w ∧ τ) at sample
/// `k`, with w the path velocity; second-order centered differences.
pub fn killing_transport_derivative(path: &PathSection, k: usize) -> Result<(LorentzVec, LorentzVec)> {
    let n = path.points.len();
    if path.tau.len() != n || path.sigma.len() != n {
        return Err(Error::Degenerate("section and path lengths differ".into()));
    }
    if k == 0 || k + 1 >= n {
        return Err(Error::Precondition(format!("sample {k} lacks a centered stencil")));
    }
    let x = &path.points[k];
    let d = |f: &[LorentzVec]| project_tangent(x, &((f[k + 1] - f[k - 1]) / (2.0 * path.h)));
    let w = d(path.points);
    let dtau = d(path.tau);
    let dsigma = d(path.sigma);
    let tau = &path.tau[k];
    let sigma = &path.sigma[k];
    Ok((dtau + cross_at(x, &w, sigma), dsigma - cross_at(x, &w, tau)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng) -> HPoint {
        let d = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        HPoint::from_polar(rng.gen_range(0.05..2.5), &d)
    }

    #[test]
    fn inner_product_examples() {
        assert_eq!(minkowski_inner(&center(), &center()), -1.0);
        let e1 = Vector4::new(0.0, 1.0, 0.0, 0.0);
        assert_eq!(minkowski_inner(&e1, &e1), 1.0);
        let p = Vector4::new(1f64.cosh(), 1f64.sinh(), 0.0, 0.0);
        assert!((minkowski_inner(&p, &center()) + 1f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let o = HPoint::center();
        let p = HPoint::new(Vector4::new(1f64.cosh(), 1f64.sinh(), 0.0, 0.0)).unwrap();
        let q = HPoint::new(Vector4::new(2f64.cosh(), 0.0, 2f64.sinh(), 0.0)).unwrap();
        assert_eq!(h_dist(&o, &o).unwrap(), 0.0);
        assert!((h_dist(&o, &p).unwrap() - 1.0).abs() < 1e-14);
        assert!((h_dist(&o, &q).unwrap() - 2.0).abs() < 1e-14);
        let bad = HPoint(Vector4::new(0.5, 0.0, 0.0, 0.0));
        assert!(h_dist(&o, &bad).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let o = HPoint::center();
        let v = TangentVec::new(center(), Vector4::new(0.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(geodesic(&o, &v, 0.0).unwrap(), o);
        let p = geodesic(&o, &v, 1.0).unwrap();
        assert!((p.vec() - Vector4::new(1f64.cosh(), 1f64.sinh(), 0.0, 0.0)).amax() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_point(&mut rng);
            let f = x.tangent_frame();
            let dir = (f[0] * 0.3 - f[1] * 0.5 + f[2] * 0.2).normalize();
            let dir = dir / minkowski_norm_sq(&dir).sqrt();
            let v = TangentVec::new(*x.vec(), dir).unwrap();
            for t in [-3.0, 0.7, 5.0] {
                let y = geodesic(&x, &v, t).unwrap();
                assert!((minkowski_norm_sq(y.vec()) + 1.0).abs() < 1e-12 * y.vec()[0].powi(2));
                assert!((h_dist(&x, &y).unwrap() - t.abs()).abs() < 1e-9);
            }
        }
        let long = TangentVec::new(center(), Vector4::new(0.0, 2.0, 0.0, 0.0)).unwrap();
        assert!(matches!(geodesic(&o, &long, 1.0), Err(Error::NonUnit(_))));
    }

    #[test]
    fn tangent_frame_is_orthonormal_and_oriented() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_point(&mut rng);
            let f = x.tangent_frame();
            for i in 0..3 {
                assert!(minkowski_inner(x.vec(), &f[i]).abs() < 1e-12);
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((minkowski_inner(&f[i], &f[j]) - expect).abs() < 1e-12);
                }
            }
            let c = cross_at(x.vec(), &f[0], &f[1]);
            assert!((c - f[2]).amax() < 1e-10);
        }
    }

    #[test]
    fn cross_at_center_is_euclidean() {
        let u = Vector3::new(0.3, -1.2, 0.5);
        let w = Vector3::new(2.0, 0.1, -0.7);
        let c = cross_at(&center(), &from_spatial(&u), &from_spatial(&w));
        assert!((spatial(&c) - u.cross(&w)).amax() < 1e-15);
        assert_eq!(c[0], 0.0);
    }

    #[test]
    fn killing_eval_examples() {
        let o = HPoint::center();
        assert_eq!(KillingElement::zero().eval(o.vec()), Vector4::zeros());
        let boost = KillingElement::basis()[0];
        assert_eq!(boost.eval(o.vec()), Vector4::new(0.0, 1.0, 0.0, 0.0));
        // rotation about the axis through x leaves x fixed
        let x = HPoint::from_polar(0.8, &Vector3::z());
        let rot = KillingElement::basis()[5];
        assert!(rot.eval(x.vec()).amax() < 1e-15);
    }

    #[test]
    fn decompose_examples() {
        let x = HPoint::from_polar(1.1, &Vector3::new(0.0, 0.6, 0.8));
        let f = x.tangent_frame();
        let a = f[0] * 0.4 - f[2] * 1.3;
        let translation = KillingElement::compose(&a, &Vector4::zeros(), &x);
        let (tau, sigma) = translation.decompose(&x);
        assert!((tau.dir - a).amax() < 1e-12);
        assert!(sigma.dir.amax() < 1e-12);

        let axis = f[1];
        let rotation = KillingElement::compose(&Vector4::zeros(), &axis, &x);
        let (tau, sigma) = rotation.decompose(&x);
        assert!(tau.dir.amax() < 1e-12);
        assert!((sigma.dir - axis).amax() < 1e-12);

        // at the center the split is the (boost, rotation) block structure
        let k = KillingElement::from_parts(&Vector3::new(1.0, 2.0, 3.0), &Vector3::new(-0.5, 0.25, 2.0));
        let (tau, sigma) = k.decompose(&HPoint::center());
        assert!((spatial(&tau.dir) - Vector3::new(1.0, 2.0, 3.0)).amax() < 1e-14);
        assert!((spatial(&sigma.dir) - Vector3::new(-0.5, 0.25, 2.0)).amax() < 1e-14);
    }

    #[test]
    fn decompose_compose_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = KillingElement::random(&mut rng, 2.0);
            let x = random_point(&mut rng);
            let (tau, sigma) = k.decompose(&x);
            let back = KillingElement::compose(&tau.dir, &sigma.dir, &x);
            assert!((back.mat() - k.mat()).amax() < 1e-10 * (1.0 + x.vec()[0].powi(2)));
            assert!(KillingElement::new(*back.mat()).is_ok());
        }
    }

    #[test]
    fn killing_flow_preserves_the_metric() {
        // Lie derivative of g along X at x, by finite differences of the flow
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let k = KillingElement::random(&mut rng, 1.0);
            let x = random_point(&mut rng);
            let f = x.tangent_frame();
            let mut errs = vec![];
            for h in [1e-2, 5e-3] {
                let gp = k.flow(h);
                let gm = k.flow(-h);
                let d = |g: &Matrix4<f64>| minkowski_inner(&(g * f[0]), &(g * f[1])) + minkowski_inner(&(g * f[2]), &(g * f[2]));
                errs.push(((d(&gp) - d(&gm)) / (2.0 * h)).abs());
            }
            assert!(errs[0] < 1e-9 && errs[1] < 1e-9);
        }
    }

    #[test]
    fn transport_derivative_matches_analytic() {
        // A section κ(s) = k0 + s·k1 along a unit-speed geodesic has D κ = k1.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k0 = KillingElement::random(&mut rng, 1.0);
        let k1 = KillingElement::random(&mut rng, 1.0);
        let x0 = random_point(&mut rng);
        let frame = x0.tangent_frame();
        let v = TangentVec::new(*x0.vec(), frame[0]).unwrap();
        let mut errs = vec![];
        for h in [0.02, 0.01] {
            let s: Vec<f64> = (0..3).map(|i| (i as f64 - 1.0) * h + 0.3).collect();
            let pts: Vec<LorentzVec> = s.iter().map(|&t| *geodesic(&x0, &v, t).unwrap().vec()).collect();
            let (mut tau, mut sigma) = (vec![], vec![]);
            for (p, &t) in pts.iter().zip(&s) {
                let k = k0.add(&k1.scaled(t));
                let (a, b) = k.decompose(&HPoint::normalize(*p).unwrap());
                tau.push(a.dir);
                sigma.push(b.dir);
            }
            let path = PathSection { points: &pts, tau: &tau, sigma: &sigma, h };
            let (dt, ds) = killing_transport_derivative(&path, 1).unwrap();
            let (et, es) = k1.decompose(&HPoint::normalize(pts[1]).unwrap());
            errs.push((dt - et.dir).amax().max((ds - es.dir).amax()));
        }
        assert!(errs[0] < 1e-3);
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn transport_derivative_annihilates_constant_sections() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = KillingElement::random(&mut rng, 1.5);
        let x0 = random_point(&mut rng);
        let frame = x0.tangent_frame();
        let v = TangentVec::new(*x0.vec(), frame[2]).unwrap();
        let h = 1e-3;
        let pts: Vec<LorentzVec> = (0..3).map(|i| *geodesic(&x0, &v, i as f64 * h).unwrap().vec()).collect();
        let (tau, sigma): (Vec<_>, Vec<_>) = pts
            .iter()
            .map(|p| {
                let (a, b) = k.decompose(&HPoint::normalize(*p).unwrap());
                (a.dir, b.dir)
            })
            .unzip();
        let path = PathSection { points: &pts, tau: &tau, sigma: &sigma, h };
        let (a, b) = killing_transport_derivative(&path, 1).unwrap();
        assert!(a.amax() < 1e-5 && b.amax() < 1e-5);
        assert!(killing_transport_derivative(&path, 0).is_err());
    }

    #[test]
    fn rejects_invalid_points() {
        assert!(HPoint::new(Vector4::new(1.0, 0.1, 0.0, 0.0)).is_err());
        assert!(HPoint::new(Vector4::new(-1.0, 0.0, 0.0, 0.0)).is_err());
        assert!(DSPoint::new(Vector4::new(0.0, 1.0, 0.0, 0.0)).is_ok());
        assert!(DSPoint::normalize(center()).is_err());
        assert!(KillingElement::new(Matrix4::identity()).is_err());
    }
}
