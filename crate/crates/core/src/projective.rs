//! Klein projective models of H³ and of the de Sitter hemisphere, point–plane
//! duality and the Pogorelov maps.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::lorentz::{center, from_spatial, minkowski_inner, spatial, DSPoint, HPoint, KillingElement, LorentzVec};
use crate::surface::{fundamental_forms, normal, Ambient, FormField, FormKind, FrameField};

/// Radius of the disk around the model center where the radial/lateral
/// split is not used.
pub const CENTER_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Hyperbolic,
    DeSitter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KleinPoint {
    pub p: Vector3<f64>,
    pub regime: Regime,
}

impl KleinPoint {
    pub fn new(p: Vector3<f64>) -> Result<Self> {
        let r = p.norm();
        if !r.is_finite() || (r - 1.0).abs() < 1e-15 {
            return Err(Error::Domain(format!("|p| = {r} lies on the ideal boundary")));
        }
        let regime = if r < 1.0 { Regime::Hyperbolic } else { Regime::DeSitter };
        Ok(Self { p, regime })
    }
}

pub fn phi_h(x: &HPoint) -> KleinPoint {
    let v = x.vec();
    KleinPoint { p: spatial(v) / v[0], regime: Regime::Hyperbolic }
}

pub fn phi_h_inv(p: &KleinPoint) -> Result<HPoint> {
    let r2 = p.p.norm_squared();
    if r2 >= 1.0 {
        return Err(Error::Domain(format!("|p|² = {r2} is outside the open unit ball")));
    }
    let s = 1.0 / (1.0 - r2).sqrt();
    Ok(HPoint::from_raw(LorentzVec::new(s, s * p.p[0], s * p.p[1], s * p.p[2])))
}

pub fn phi_s(y: &DSPoint) -> Result<KleinPoint> {
    let v = y.vec();
    if v[0] <= 0.0 {
        return Err(Error::Domain(format!("x0 = {} is outside the hemisphere", v[0])));
    }
    Ok(KleinPoint { p: spatial(v) / v[0], regime: Regime::DeSitter })
}

pub fn phi_s_inv(p: &KleinPoint) -> Result<DSPoint> {
    let r2 = p.p.norm_squared();
    if r2 <= 1.0 {
        return Err(Error::Domain(format!("|p|² = {r2} is inside the closed unit ball")));
    }
    let s = 1.0 / (r2 - 1.0).sqrt();
    Ok(DSPoint::from_raw(LorentzVec::new(s, s * p.p[0], s * p.p[1], s * p.p[2])))
}

/// Differential of the central projection x ↦ x/x0 at `x` (either quadric).
#[inline]
pub fn dphi(x: &LorentzVec, v: &LorentzVec) -> Vector3<f64> {
    spatial(v) / x[0] - spatial(x) * (v[0] / (x[0] * x[0]))
}

pub fn dphi_h(x: &HPoint, v: &LorentzVec) -> Vector3<f64> {
    dphi(x.vec(), v)
}

/// Oriented totally geodesic plane { x : ⟨x, dual⟩ = 0 } of H³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPlane {
    pub dual: DSPoint,
}

impl HPlane {
    /// The plane orthogonal to the ray from the center in direction `dir`,
    /// at distance `rho`, oriented away from the center.
    pub fn at_distance(rho: f64, dir: &Vector3<f64>) -> Self {
        let d = dir.normalize();
        let n = LorentzVec::new(rho.sinh(), rho.cosh() * d[0], rho.cosh() * d[1], rho.cosh() * d[2]);
        Self { dual: DSPoint::from_raw(n) }
    }

    /// Plane through `x` with unit normal `n` (tangent at x).
    pub fn through(x: &HPoint, n: &LorentzVec) -> Result<Self> {
        if minkowski_inner(x.vec(), n).abs() > 1e-9 * (1.0 + x.vec()[0] * n.norm()) {
            return Err(Error::Degenerate("normal is not tangent at the point".into()));
        }
        Ok(Self { dual: DSPoint::normalize(*n)? })
    }

    pub fn contains(&self, x: &HPoint) -> bool {
        minkowski_inner(x.vec(), self.dual.vec()).abs() <= 1e-10 * x.vec()[0]
    }
}

/// Spacelike plane { y ∈ S³₁ : ⟨y, normal⟩ = 0 }, the dual of a point of H³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DSPlane {
    pub normal: HPoint,
}

pub fn dual_of_plane(pl: &HPlane) -> DSPoint {
    pl.dual
}

pub fn plane_of_dual(y: &DSPoint) -> HPlane {
    HPlane { dual: *y }
}

pub fn dual_of_point(x: &HPoint) -> DSPlane {
    DSPlane { normal: *x }
}

pub fn point_of_dual(pl: &DSPlane) -> HPoint {
    pl.normal
}

/// Largest |(q − p*)·q| over `samples` points q of the ideal circle of the
/// plane, where p* is the Klein image of its dual. Zero when every line
/// through p* and the circle is tangent to the unit sphere.
pub fn klein_tangency_residual(pl: &HPlane, samples: usize) -> Result<f64> {
    let n = pl.dual.vec();
    let pstar = phi_s(&pl.dual)?.p;
    let nbar = spatial(n);
    let m = nbar.norm();
    let c = n[0] / m;
    if c.abs() >= 1.0 {
        return Err(Error::Degenerate("plane has no ideal circle".into()));
    }
    let u = nbar / m;
    let a = u.cross(&if u[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() }).normalize();
    let b = u.cross(&a);
    let rad = (1.0 - c * c).sqrt();
    let mut worst = 0.0f64;
    for k in 0..samples {
        let t = std::f64::consts::TAU * k as f64 / samples as f64;
        let q = u * c + (a * t.cos() + b * t.sin()) * rad;
        worst = worst.max(((q - pstar).dot(&q)).abs());
    }
    Ok(worst)
}

/// Euclidean Killing field p ↦ a + b × p.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EuclideanKilling {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl EuclideanKilling {
    pub fn zero() -> Self {
        Self { a: Vector3::zeros(), b: Vector3::zeros() }
    }

    #[inline]
    pub fn eval(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.a + self.b.cross(p)
    }

    /// Translation and rotation parts (τ̄, σ̄) at `p`.
    pub fn at(&self, p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        (self.eval(p), self.b)
    }

    pub fn from_at(p: &Vector3<f64>, tau: &Vector3<f64>, sigma: &Vector3<f64>) -> Self {
        Self { a: tau - sigma.cross(p), b: *sigma }
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        (self.a - other.a).amax().max((self.b - other.b).amax())
    }
}

/// Flat connection of the Euclidean Killing bundle, D̄_w(τ̄, σ̄) = (∂_w τ̄ + w × σ̄, ∂_w σ̄),
/// by centered differences on samples with step `h`.
pub fn euclidean_transport_derivative(
    points: &[Vector3<f64>],
    tau: &[Vector3<f64>],
    sigma: &[Vector3<f64>],
    h: f64,
    k: usize,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let n = points.len();
    if tau.len() != n || sigma.len() != n {
        return Err(Error::Degenerate("section and path lengths differ".into()));
    }
    if k == 0 || k + 1 >= n {
        return Err(Error::Precondition(format!("sample {k} lacks a centered stencil")));
    }
    let d = |f: &[Vector3<f64>]| (f[k + 1] - f[k - 1]) / (2.0 * h);
    let w = d(points);
    Ok((d(tau) + w.cross(&sigma[k]), d(sigma)))
}

/// Pogorelov map Φ_H at `x`: the lateral part goes through dφ_H and the
/// radial part keeps its direction and norm.
pub fn pogorelov_phi_h(x: &HPoint, v: &LorentzVec) -> (KleinPoint, Vector3<f64>) {
    let xv = x.vec();
    let kp = phi_h(x);
    let s = spatial(xv);
    let sn = s.norm();
    if sn < CENTER_EPS.sinh() {
        // dφ_H is an isometry at the center and the radial factor tends to 1
        return (kp, dphi(xv, v));
    }
    let d = s / sn;
    let radial = LorentzVec::new(sn, xv[0] * d[0], xv[0] * d[1], xv[0] * d[2]);
    let f = minkowski_inner(v, &radial);
    let lateral = v - radial * f;
    (kp, d * f + dphi(xv, &lateral))
}

/// Pogorelov map Φ_S on the de Sitter hemisphere.
pub fn pogorelov_phi_s(y: &DSPoint, v: &LorentzVec) -> Result<(KleinPoint, Vector3<f64>)> {
    let kp = phi_s(y)?;
    let yv = y.vec();
    let s = spatial(yv);
    let d = s / s.norm();
    // unit timelike radial direction; y = (sinh s, cosh s·d)
    let radial = LorentzVec::new(s.norm(), yv[0] * d[0], yv[0] * d[1], yv[0] * d[2]);
    let f = -minkowski_inner(v, &radial);
    let lateral = v - radial * f;
    Ok((kp, d * f + dphi(yv, &lateral)))
}

/// Euclidean Killing field Φ_H(X_k), from the decomposition of `k` at `x`.
pub fn psi_h(k: &KillingElement, x: &HPoint) -> Result<EuclideanKilling> {
    let xv = x.vec();
    let s = spatial(xv);
    let sn = s.norm();
    let (tau, sigma) = k.decompose(x);
    if sn < CENTER_EPS.sinh() {
        let lateral_free = |v: &LorentzVec| spatial(v).norm() <= 1e-14 * (1.0 + k.mat().amax());
        if !(lateral_free(&tau.dir) && lateral_free(&sigma.dir)) && sn > 0.0 {
            return Err(Error::Precondition("lateral parts are undefined at the model center".into()));
        }
        return Ok(EuclideanKilling { a: spatial(&tau.dir), b: spatial(&sigma.dir) });
    }
    let d = s / sn;
    let radial = LorentzVec::new(sn, xv[0] * d[0], xv[0] * d[1], xv[0] * d[2]);
    let r = sn / xv[0];
    let c = 1.0 / xv[0];
    let split = |v: &LorentzVec| {
        let f = minkowski_inner(v, &radial);
        (f, spatial(&(v - radial * f)))
    };
    let (tr, tl) = split(&tau.dir);
    let (sr, sl) = split(&sigma.dir);
    let tau_bar = d * tr + tl * c;
    let sigma_bar = d * sr - d.cross(&tl) * (r / c) + sl / c;
    Ok(EuclideanKilling::from_at(&(d * r), &tau_bar, &sigma_bar))
}

/// Image of a surface in H³ or in the de Sitter hemisphere under the Klein
/// projection, as a Euclidean frame field on the same chart.
pub fn klein_image(f: &FrameField) -> Result<FrameField> {
    if f.ambient == Ambient::Euclidean {
        return Err(Error::Precondition("surface is already Euclidean".into()));
    }
    let x = f
        .x
        .iter()
        .map(|x| {
            if x[0] <= 0.0 {
                return Err(Error::Domain(format!("x0 = {} is outside the model", x[0])));
            }
            Ok(from_spatial(&(spatial(x) / x[0])))
        })
        .collect::<Result<Vec<_>>>()?;
    FrameField::from_positions(f.grid, Ambient::Euclidean, x)
}

/// Second fundamental form of the Klein image computed from the source
/// surface alone: ĪI = ε⟨N̄, dφ(N)⟩·II, where ε = ⟨N, N⟩ and N̄ is the
/// interior unit normal of the image.
pub fn projective_ii_transform(f: &FrameField) -> Result<FormField> {
    if f.ambient == Ambient::Euclidean {
        return Err(Error::Precondition("surface is already Euclidean".into()));
    }
    let forms = fundamental_forms(f)?;
    forms.ensure_convex()?;
    let eps = if f.ambient == Ambient::DeSitter { -1.0 } else { 1.0 };
    let m = (0..f.grid.len())
        .map(|k| {
            let x = &f.x[k];
            let t = from_spatial(&dphi(x, &f.xt[k]));
            let p = from_spatial(&dphi(x, &f.xp[k]));
            let nbar = normal(Ambient::Euclidean, &center(), &t, &p)?;
            let factor = eps * spatial(&nbar).dot(&dphi(x, &f.n[k]));
            Ok(forms.ii.m[k] * factor)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FormField::new(f.grid, FormKind::II, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{center, cross_at, from_spatial, minkowski_norm_sq, TangentVec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.norm() > 0.1 && v.norm() < 1.0 {
                return v.normalize();
            }
        }
    }

    // Fits p ↦ a + b × p to samples of a field at 0 and at ±s·e_i.
    fn fit_killing(field: impl Fn(&Vector3<f64>) -> Vector3<f64>, s: f64) -> EuclideanKilling {
        let a = field(&Vector3::zeros());
        let e = [Vector3::x(), Vector3::y(), Vector3::z()];
        let g: Vec<Vector3<f64>> = e.iter().map(|ei| (field(&(ei * s)) - field(&(-ei * s))) / (2.0 * s)).collect();
        // g_i = b × e_i
        let b = Vector3::new(g[1][2], g[2][0], g[0][1]);
        EuclideanKilling { a, b }
    }

    fn image_field(k: &KillingElement) -> impl Fn(&Vector3<f64>) -> Vector3<f64> + '_ {
        move |p| {
            let x = phi_h_inv(&KleinPoint::new(*p).unwrap()).unwrap();
            pogorelov_phi_h(&x, &k.eval(x.vec())).1
        }
    }

    #[test]
    fn klein_examples() {
        assert_eq!(phi_h(&HPoint::center()).p, Vector3::zeros());
        let x = HPoint::from_polar(1.0, &Vector3::x());
        assert!((phi_h(&x).p.norm() - 1f64.tanh()).abs() < 1e-15);
        assert!((phi_h(&x).p.norm() - 0.76159).abs() < 1e-5);
        let y = DSPoint::new(LorentzVec::new(0.0, 1.0, 0.0, 0.0)).unwrap();
        assert!(phi_s(&y).is_err());
        assert!(phi_h_inv(&KleinPoint { p: Vector3::new(1.0, 0.0, 0.0), regime: Regime::Hyperbolic }).is_err());
        assert!(KleinPoint::new(Vector3::new(0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn klein_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = HPoint::from_polar(rng.gen_range(0.0..3.0), &unit(&mut rng));
            let back = phi_h_inv(&phi_h(&x)).unwrap();
            assert!((back.vec() - x.vec()).amax() < 1e-12 * x.vec()[0]);
            let rho = rng.gen_range(0.05..3.0);
            let pl = HPlane::at_distance(rho, &unit(&mut rng));
            let kp = phi_s(&pl.dual).unwrap();
            assert!((kp.p.norm() - 1.0 / rho.tanh()).abs() < 1e-12 * kp.p.norm());
            let back = phi_s_inv(&kp).unwrap();
            assert!((back.vec() - pl.dual.vec()).amax() < 1e-12 * pl.dual.vec()[0].abs().max(1.0));
        }
    }

    #[test]
    fn dphi_scalings() {
        let x = HPoint::from_polar(1.0, &Vector3::x());
        let lateral = LorentzVec::new(0.0, 0.0, 1.0, 0.0);
        let radial = LorentzVec::new(1f64.sinh(), 1f64.cosh(), 0.0, 0.0);
        assert!((dphi_h(&x, &lateral).norm() - 0.64805).abs() < 1e-5);
        assert!((dphi_h(&x, &radial).norm() - 0.41997).abs() < 1e-5);
        let o = HPoint::center();
        let v = LorentzVec::new(0.0, 0.6, 0.0, 0.8);
        assert!((dphi_h(&o, &v).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn plane_duality() {
        let pl = HPlane::at_distance(0.0, &Vector3::x());
        assert_eq!(dual_of_plane(&pl).vec(), &LorentzVec::new(0.0, 1.0, 0.0, 0.0));
        assert!(pl.contains(&HPoint::from_polar(0.7, &Vector3::y())));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let x = HPoint::from_polar(rng.gen_range(0.0..2.0), &unit(&mut rng));
            assert_eq!(point_of_dual(&dual_of_point(&x)), x);
            let f = x.tangent_frame();
            let n = f[0] * 0.3 + f[1] * -0.8 + f[2] * 0.5;
            let pl = HPlane::through(&x, &n).unwrap();
            assert!(pl.contains(&x));
            let y = dual_of_plane(&pl);
            assert!((minkowski_norm_sq(y.vec()) - 1.0).abs() < 1e-10);
            assert_eq!(plane_of_dual(&y), pl);
            if y.vec()[0] > 1e-3 {
                assert!(klein_tangency_residual(&pl, 16).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn pogorelov_h_examples() {
        let x = HPoint::from_polar(1.0, &Vector3::z());
        let lateral = LorentzVec::new(0.0, 1.0, 0.0, 0.0);
        let (_, w) = pogorelov_phi_h(&x, &lateral);
        assert!((w.norm() - 1.0 / 1f64.cosh()).abs() < 1e-14);
        let radial = LorentzVec::new(1f64.sinh(), 0.0, 0.0, 1f64.cosh());
        let (_, w) = pogorelov_phi_h(&x, &radial);
        assert!((w - Vector3::z()).amax() < 1e-14);
    }

    #[test]
    fn pogorelov_h_maps_killing_to_killing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let k = KillingElement::random(&mut rng, 1.0);
            let fit = fit_killing(image_field(&k), 0.5);
            for _ in 0..50 {
                let p = unit(&mut rng) * rng.gen_range(0.0..0.95);
                let w = image_field(&k)(&p);
                assert!((w - fit.eval(&p)).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn psi_h_is_point_independent_and_matches_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let k = KillingElement::random(&mut rng, 1.0);
            let fit = fit_killing(image_field(&k), 0.5);
            for _ in 0..100 {
                let x = HPoint::from_polar(rng.gen_range(0.01..2.5), &unit(&mut rng));
                let psi = psi_h(&k, &x).unwrap();
                assert!(psi.max_diff(&fit) < 1e-9, "{}", psi.max_diff(&fit));
            }
            assert!(psi_h(&k, &HPoint::center()).unwrap().max_diff(&fit) < 1e-12);
        }
    }

    #[test]
    fn psi_h_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let rho = rng.gen_range(0.05..2.0);
            let d = unit(&mut rng);
            let x = HPoint::from_polar(rho, &d);
            let r = rho.tanh();
            let c = (1.0 - r * r).sqrt();
            let radial = LorentzVec::new(rho.sinh(), rho.cosh() * d[0], rho.cosh() * d[1], rho.cosh() * d[2]);
            let e = d.cross(&unit(&mut rng)).normalize();
            let lat = from_spatial(&e);
            let zero = LorentzVec::zeros();
            let xbar = d * r;
            let cases = [
                (KillingElement::compose(&radial, &zero, &x), d, Vector3::zeros()),
                (KillingElement::compose(&zero, &radial, &x), Vector3::zeros(), d),
                (KillingElement::compose(&lat, &zero, &x), e * c, -d.cross(&e) * (r / c)),
                (KillingElement::compose(&zero, &lat, &x), Vector3::zeros(), e / c),
            ];
            for (k, tau_bar, sigma_bar) in cases {
                let expect = EuclideanKilling::from_at(&xbar, &tau_bar, &sigma_bar);
                let fit = fit_killing(image_field(&k), 0.5);
                assert!(fit.max_diff(&expect) < 1e-10, "{}", fit.max_diff(&expect));
                assert!(psi_h(&k, &x).unwrap().max_diff(&expect) < 1e-12);
            }
        }
    }

    #[test]
    fn pogorelov_s_radial_and_gluing() {
        let s = 0.8f64;
        let d = Vector3::new(0.0, 0.6, 0.8);
        let y = DSPoint::new(LorentzVec::new(s.sinh(), s.cosh() * d[0], s.cosh() * d[1], s.cosh() * d[2])).unwrap();
        let radial = LorentzVec::new(s.cosh(), s.sinh() * d[0], s.sinh() * d[1], s.sinh() * d[2]);
        let (_, w) = pogorelov_phi_s(&y, &radial).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-14);

        // the de Sitter field of k, read outside the ball, continues the interior image
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let k = KillingElement::random(&mut rng, 1.0);
            let inner = fit_killing(image_field(&k), 0.5);
            let outer = |p: &Vector3<f64>| {
                let y = phi_s_inv(&KleinPoint::new(*p).unwrap()).unwrap();
                pogorelov_phi_s(&y, &k.eval(y.vec())).unwrap().1
            };
            for _ in 0..20 {
                let p = unit(&mut rng) * rng.gen_range(1.2..4.0);
                assert!((outer(&p) - inner.eval(&p)).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn euclidean_transport_annihilates_killing() {
        let k = EuclideanKilling { a: Vector3::new(0.1, -0.4, 2.0), b: Vector3::new(1.0, 0.5, -0.3) };
        let h = 1e-3;
        let pts: Vec<Vector3<f64>> = (0..3).map(|i| Vector3::new(0.2, 0.1, 0.0) + Vector3::new(1.0, 2.0, -1.0) * (i as f64 * h)).collect();
        let (tau, sigma): (Vec<_>, Vec<_>) = pts.iter().map(|p| k.at(p)).unzip();
        let (a, b) = euclidean_transport_derivative(&pts, &tau, &sigma, h, 1).unwrap();
        assert!(a.amax() < 1e-10 && b.amax() < 1e-10);
    }

    #[test]
    fn sanity_of_tangent_types() {
        let v = TangentVec::new(center(), LorentzVec::new(0.0, 1.0, 0.0, 0.0)).unwrap();
        let w = cross_at(&center(), &v.dir, &LorentzVec::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(w, LorentzVec::new(0.0, 0.0, 0.0, 1.0));
    }
    #[test]
    fn second_form_transfer() {
        use crate::dual::dualize;
        use crate::grid::Grid;
        use crate::sample::RadialFn;
        use crate::surface::{embed, euclidean_forms, RadialSurface};
        let g = Grid::new(24, 48).unwrap();
        let rho = 1.0f64;
        let f = embed(&RadialSurface::sphere(g, rho)).unwrap();
        let img = euclidean_forms(&klein_image(&f).unwrap()).unwrap();
        let c2 = rho.cosh().powi(2);
        let forms = fundamental_forms(&f).unwrap();
        assert!(forms.i.rel_diff(&img.i.scaled(c2)) < 1e-8);
        assert!(forms.ii.rel_diff(&img.ii.scaled(c2)) < 1e-8);
        assert!(projective_ii_transform(&f).unwrap().rel_diff(&img.ii) < 1e-8);

        let d = dualize(&f).unwrap();
        let dimg = euclidean_forms(&klein_image(&d).unwrap()).unwrap();
        let s2 = rho.sinh().powi(2);
        let dforms = fundamental_forms(&d).unwrap();
        assert!(dforms.i.rel_diff(&dimg.i.scaled(s2)) < 1e-8);
        assert!(dforms.ii.rel_diff(&dimg.ii.scaled(s2)) < 1e-8);
        assert!(projective_ii_transform(&d).unwrap().rel_diff(&dimg.ii) < 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = RadialFn::random(&mut rng, 1.0, 0.1, 4);
        let mut errs = vec![];
        for n in [16, 32] {
            let g = Grid::new(n, 2 * n).unwrap();
            let f = embed(&RadialSurface::from_fn(g, &r).unwrap()).unwrap();
            let direct = euclidean_forms(&klein_image(&f).unwrap()).unwrap().ii;
            errs.push(projective_ii_transform(&f).unwrap().rel_diff(&direct));
        }
        assert!(errs[1] < 1e-5 && crate::grid::convergence_order(&errs) > 1.8, "{errs:?}");
    }
}
