//! The invariant suite: eleven numbered property checks shared by the
//! command line and the acceptance tests.
//!
//! Every check is deterministic. Wall-clock budgets are reported next to the
//! checks but never folded into them, so reports stay byte-identical.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deform::calculus::Connection;
use crate::deform::{herglotz_certificate, pogorelov_transfer_residual, rigidity_kernel, shape_variation};
use crate::deform::{AntiholSection, Calculus, DeformField, RigidityKind};
use crate::deform::rigidity::KernelOptions;
use crate::dual::duality_report;
use crate::error::{Error, Result};
use crate::flows::{mixed_combination, mixed_form, offset_forms, offset_frame, MixedVariant};
use crate::geodesic::{shortest_closed_geodesic, GeodesicOptions};
use crate::grid::{convergence_order, Grid};
use crate::lorentz::{from_spatial, HPoint, KillingElement, LorentzVec};
use crate::projective::{klein_image, phi_s_inv, pogorelov_phi_s, psi_h, EuclideanKilling, KleinPoint};
use crate::realize::{align_points, gauge_align, realize_metric, realize_third_form, RealizeOptions};
use crate::report::Check;
use crate::sample::RadialFn;
use crate::surface::intrinsic::gauss_codazzi_max;
use crate::surface::{analytic_forms, embed, fundamental_forms, Ambient, FormField, FormKind, Forms, RadialSurface};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Fewer random samples; same grids and tolerances.
    Fast,
    Full,
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            _ => Err(Error::Format(format!("unknown level {s:?}, expected fast or full"))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Fast => "fast",
            Level::Full => "full",
        })
    }
}

impl Level {
    fn pick(self, fast: usize, full: usize) -> usize {
        match self {
            Level::Fast => fast,
            Level::Full => full,
        }
    }
}

pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    /// Wall-clock budget of the full level, in seconds.
    pub budget: f64,
    run: fn(Level) -> Result<Vec<Check>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Set when the criterion aborted with an error.
    pub error: Option<String>,
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip)]
    pub budget: f64,
}

impl Criterion {
    pub fn run(&self, level: Level) -> Outcome {
        let start = Instant::now();
        let res = (self.run)(level);
        let seconds = start.elapsed().as_secs_f64();
        let (checks, error) = match res {
            Ok(c) => (c, None),
            Err(e) => (vec![], Some(e.to_string())),
        };
        let pass = error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.pass);
        Outcome { id: self.id, name: self.name.into(), pass, checks, error, seconds, budget: self.budget }
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "sphere oracles", budget: 10.0, run: spheres },
        Criterion { id: 2, name: "gauss-codazzi", budget: 120.0, run: gauss_codazzi },
        Criterion { id: 3, name: "duality", budget: 60.0, run: duality },
        Criterion { id: 4, name: "pogorelov", budget: 30.0, run: pogorelov },
        Criterion { id: 5, name: "rigidity kernel", budget: 300.0, run: rigidity },
        Criterion { id: 6, name: "adjointness", budget: 60.0, run: adjointness },
        Criterion { id: 7, name: "herglotz", budget: 60.0, run: herglotz },
        Criterion { id: 8, name: "offsets", budget: 60.0, run: offsets },
        Criterion { id: 9, name: "realization", budget: 900.0, run: realization },
        Criterion { id: 10, name: "closed geodesics", budget: 120.0, run: geodesics },
        Criterion { id: 11, name: "mixed forms", budget: 10.0, run: mixed },
    ]
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid(n: usize) -> Result<Grid> {
    Grid::new(n, 2 * n)
}

/// ρ = 1 plus a degree-4 perturbation of sup-norm 0.1, redrawn until strictly convex.
pub fn random_convex(rng: &mut ChaCha8Rng) -> Result<RadialFn> {
    let probe = Grid::new(32, 64)?;
    for _ in 0..100 {
        let r = RadialFn::random(rng, 1.0, 0.1, 4);
        if analytic_forms(probe, &r).and_then(|f| f.ensure_convex()).is_ok() {
            return Ok(r);
        }
    }
    Err(Error::Degenerate("no convex sample in 100 draws".into()))
}

fn surface(r: &RadialFn, n: usize) -> Result<RadialSurface> {
    RadialSurface::from_fn(grid(n)?, r)
}

fn fd_forms(r: &RadialFn, n: usize) -> Result<Forms> {
    fundamental_forms(&embed(&surface(r, n)?)?)
}

fn max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn min(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn order(name: &str, errs: &[f64]) -> Check {
    Check::at_least(format!("{name} order"), convergence_order(errs), 1.8)
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() < 1.0 {
            return v.normalize();
        }
    }
}

fn form_error(f: &Forms, g: &[FormField; 3]) -> f64 {
    f.i.rel_diff(&g[0]).max(f.ii.rel_diff(&g[1])).max(f.iii.rel_diff(&g[2]))
}

fn spheres(_: Level) -> Result<Vec<Check>> {
    let mut out = vec![];
    for rho in [0.5f64, 1.0, 2.0] {
        let (s, c) = (rho.sinh(), rho.cosh());
        let expect = |g: Grid| {
            [FormField::round(g, FormKind::I, s * s), FormField::round(g, FormKind::II, s * c), FormField::round(g, FormKind::III, c * c)]
        };
        let g = grid(64)?;
        let an = analytic_forms(g, &RadialFn::sphere(rho))?;
        out.push(Check::at_most(format!("rho={rho} analytic forms"), form_error(&an, &expect(g)), 1e-6));
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = grid(n)?;
            errs.push(form_error(&fundamental_forms(&embed(&RadialSurface::sphere(g, rho))?)?, &expect(g)));
        }
        out.push(Check::at_most(format!("rho={rho} pipeline forms at 64x128"), errs[2], 5e-4));
        out.push(order(&format!("rho={rho} pipeline forms 16->32"), &errs[..2]));
    }
    Ok(out)
}

fn gauss_codazzi(level: Level) -> Result<Vec<Check>> {
    let mut r = rng(200);
    let count = level.pick(5, 20);
    let (mut go, mut co) = (vec![], vec![]);
    for _ in 0..count {
        let f = random_convex(&mut r)?;
        let (mut ge, mut ce) = (vec![], vec![]);
        for n in [32, 64, 128] {
            let (g, c) = gauss_codazzi_max(&fd_forms(&f, n)?, Ambient::Hyperbolic);
            ge.push(g);
            ce.push(c);
        }
        go.push(convergence_order(&ge));
        co.push(convergence_order(&ce));
    }
    Ok(vec![
        Check::at_least(format!("gauss residual order, worst of {count}"), min(go), 1.8),
        Check::at_least(format!("codazzi residual order, worst of {count}"), min(co), 1.8),
    ])
}

fn duality(level: Level) -> Result<Vec<Check>> {
    let mut r = rng(300);
    let count = level.pick(2, 5);
    let mut worst = [0.0f64; 3];
    let mut orders = [f64::INFINITY; 3];
    for _ in 0..count {
        let f = random_convex(&mut r)?;
        let mut e: [Vec<f64>; 3] = Default::default();
        for n in [32, 64] {
            let rep = duality_report(&embed(&surface(&f, n)?)?)?;
            e[0].push(rep.first_vs_third);
            e[1].push(rep.double_dual);
            e[2].push(rep.curvature_ratio);
        }
        for q in 0..3 {
            worst[q] = worst[q].max(e[q][1]);
            orders[q] = orders[q].min(convergence_order(&e[q]));
        }
    }
    let names = ["I(S*) - III(S)", "double dual position", "K(III) - K/(K+1)"];
    let tols = [5e-4, 1e-3, 5e-4];
    let mut out = vec![];
    for q in 0..3 {
        out.push(Check::at_most(format!("{} at 64x128", names[q]), worst[q], tols[q]));
        out.push(Check::at_least(format!("{} order", names[q]), orders[q], 1.8));
    }
    Ok(out)
}

// Affine fit p ↦ a + b × p from exact central differences around `c`.
fn fit_affine(field: impl Fn(&Vector3<f64>) -> Result<Vector3<f64>>, c: &Vector3<f64>, s: f64) -> Result<EuclideanKilling> {
    let e = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut g = [Vector3::zeros(); 3];
    for i in 0..3 {
        g[i] = (field(&(c + e[i] * s))? - field(&(c - e[i] * s))?) / (2.0 * s);
    }
    let b = Vector3::new(g[1][2], g[2][0], g[0][1]);
    Ok(EuclideanKilling { a: field(c)? - b.cross(c), b })
}

fn pogorelov(level: Level) -> Result<Vec<Check>> {
    let mut r = rng(400);
    let pairs = level.pick(1000, 10_000);
    let mut closed = 0.0f64;
    for _ in 0..pairs {
        let rho = r.gen_range(0.05..2.0);
        let d = unit(&mut r);
        let x = HPoint::from_polar(rho, &d);
        let t = rho.tanh();
        let c = (1.0 - t * t).sqrt();
        let radial = LorentzVec::new(rho.sinh(), rho.cosh() * d[0], rho.cosh() * d[1], rho.cosh() * d[2]);
        let e = d.cross(&unit(&mut r)).normalize();
        let lat = from_spatial(&e);
        let zero = LorentzVec::zeros();
        let xbar = d * t;
        let cases = [
            (KillingElement::compose(&radial, &zero, &x), d, Vector3::zeros()),
            (KillingElement::compose(&zero, &radial, &x), Vector3::zeros(), d),
            (KillingElement::compose(&lat, &zero, &x), e * c, -d.cross(&e) * (t / c)),
            (KillingElement::compose(&zero, &lat, &x), Vector3::zeros(), e / c),
        ];
        for (k, tau, sigma) in cases {
            closed = closed.max(psi_h(&k, &x)?.max_diff(&EuclideanKilling::from_at(&xbar, &tau, &sigma)));
        }
    }

    let fields = level.pick(3, 10);
    let f = embed(&surface(&random_convex(&mut r)?, 64)?)?;
    let mut transfer = 0.0f64;
    for _ in 0..fields {
        let u = DeformField::random(&f, &mut r, 3)?;
        transfer = transfer.max(max(pogorelov_transfer_residual(&f, &u)?));
    }

    let mut gluing = 0.0f64;
    for _ in 0..20 {
        let k = KillingElement::random(&mut r, 1.0);
        let inner = psi_h(&k, &HPoint::from_polar(r.gen_range(0.1..2.0), &unit(&mut r)))?;
        let outer = |p: &Vector3<f64>| -> Result<Vector3<f64>> {
            let y = phi_s_inv(&KleinPoint::new(*p)?)?;
            Ok(pogorelov_phi_s(&y, &k.eval(y.vec()))?.1)
        };
        let c = unit(&mut r) * r.gen_range(1.5..3.0);
        gluing = gluing.max(fit_affine(outer, &c, 0.25)?.max_diff(&inner));
    }
    Ok(vec![
        Check::at_most(format!("psi_H closed forms over {pairs} pairs"), closed, 1e-12),
        Check::at_most(format!("transfer residual at 64x128 over {fields} fields"), transfer, 5e-4),
        Check::at_most("killing gluing across the sphere at infinity", gluing, 1e-10),
    ])
}

fn rigidity(level: Level) -> Result<Vec<Check>> {
    let mut r = rng(500);
    let g = grid(48)?;
    let mut surfaces = vec![("sphere".to_string(), RadialSurface::sphere(g, 1.0))];
    for i in 0..level.pick(1, 5) {
        surfaces.push((format!("random {i}"), RadialSurface::from_fn(g, &random_convex(&mut r)?)?));
    }
    let opts = KernelOptions::default();
    let mut out = vec![];
    for (label, s) in &surfaces {
        let f = embed(s)?;
        let image = klein_image(&f)?;
        for (op, frame, kind) in [
            ("dI", &f, RigidityKind::InducedMetric),
            ("dIII", &f, RigidityKind::ThirdForm),
            ("klein dI", &image, RigidityKind::InducedMetric),
        ] {
            let rep = rigidity_kernel(frame, kind, &opts)?;
            out.push(Check::equals(format!("{label} {op} kernel dimension"), rep.kernel_dim as f64, 6.0));
            out.push(Check::at_least(format!("{label} {op} s7/s6"), rep.gap_ratio, opts.gap));
            out.push(Check::at_most(format!("{label} {op} kernel angle"), rep.subspace_angle, 1e-3));
        }
    }
    Ok(out)
}

fn adjointness(level: Level) -> Result<Vec<Check>> {
    let mut r = rng(600);
    let count = level.pick(3, 10);
    let mut out = vec![];
    for (conn, label) in [(Connection::Third, "III pairing"), (Connection::First, "I pairing")] {
        let (mut worst, mut ord) = (0.0f64, f64::INFINITY);
        for i in 0..count {
            let f = random_convex(&mut r)?;
            let mut errs = vec![];
            for n in [32, 64] {
                let frame = embed(&surface(&f, n)?)?;
                let c = Calculus::new(&frame)?;
                let mut fr = rng(6000 + i as u64);
                let v = DeformField::random(&frame, &mut fr, 3)?.v;
                let h = AntiholSection::random(&frame, &c.forms.ii.m, &mut fr, 3);
                let scale = c.vector_norm(&v) * c.section_norm(&h);
                errs.push(c.adjoint_residual(conn, &v, &h).abs() / scale);
            }
            worst = worst.max(errs[1]);
            ord = ord.min(convergence_order(&errs));
        }
        out.push(Check::at_most(format!("{label} defect at 64x128 over {count} pairs"), worst, 1e-3));
        out.push(Check::at_least(format!("{label} defect order"), ord, 1.8));
    }
    Ok(out)
}

fn herglotz(level: Level) -> Result<Vec<Check>> {
    let mut r = rng(700);
    let count = level.pick(3, 10);
    let (mut integral, mut det) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let f = klein_image(&embed(&surface(&random_convex(&mut r)?, 64)?)?)?;
        let k = EuclideanKilling { a: unit(&mut r) * r.gen_range(0.2..1.0), b: unit(&mut r) * r.gen_range(0.2..1.0) };
        let u = DeformField::from_euclidean_killing(&f, &k)?;
        let bd = shape_variation(&f, &u)?;
        let cert = herglotz_certificate(&f, &u, &bd)?;
        integral = integral.max(cert.integral.abs());
        det = det.max(cert.max_abs_det);
    }
    let mut sign = f64::NEG_INFINITY;
    for _ in 0..count {
        let f = embed(&surface(&random_convex(&mut r)?, 32)?)?;
        let c = Calculus::new(&f)?;
        let h = AntiholSection::random(&f, &c.forms.ii.m, &mut r, 3);
        sign = sign.max(h.det_field(&c.forms.ii.m).into_iter().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(vec![
        Check::at_most(format!("|integral of d omega| over {count} killing fields"), integral, 1e-6),
        Check::at_most("max |det Bdot| at 64x128", det, 1e-3),
        Check::at_most(format!("max det over {count} antiholomorphic sections"), sign, 0.0),
    ])
}

fn offsets(level: Level) -> Result<Vec<Check>> {
    let g = grid(64)?;
    let mut sphere = 0.0f64;
    for rho in [0.5f64, 1.0, 2.0] {
        let f = analytic_forms(g, &RadialFn::sphere(rho))?;
        for t in [0.2, 0.5, 1.0, -0.3] {
            let o = offset_forms(&f, t)?;
            let s = (rho + t).sinh();
            sphere = sphere.max(o.i.rel_diff(&FormField::round(g, FormKind::I, s * s)));
        }
    }
    let mut r = rng(800);
    let (mut cross, mut below, mut above) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..level.pick(1, 3) {
        let rf = random_convex(&mut r)?;
        let frame = embed(&surface(&rf, 64)?)?;
        let fd = fundamental_forms(&frame)?;
        let an = analytic_forms(g, &rf)?;
        for t in [0.2f64, 0.5, 1.0] {
            let alg = offset_forms(&fd, t)?;
            let geo = fundamental_forms(&offset_frame(&frame, t)?)?;
            cross = cross.max(alg.i.rel_diff(&geo.i)).max(alg.ii.rel_diff(&geo.ii)).max(alg.iii.rel_diff(&geo.iii));
            let o = offset_forms(&an, t)?;
            below = below.max(t.tanh() - o.b.min_curvature());
            above = above.max(o.b.max_curvature() - 1.0 / t.tanh());
        }
    }
    Ok(vec![
        Check::at_most("sphere offset I_t = sinh^2(rho+t) can", sphere, 1e-10),
        Check::at_most("algebraic vs geometric offset at 64x128", cross, 5e-4),
        Check::at_most("tanh t - min principal curvature", below, 1e-8),
        Check::at_most("max principal curvature - coth t", above, 1e-8),
    ])
}

struct RoundTrip {
    position: f64,
    form: f64,
    converged: bool,
}

fn round_trip(rf: &RadialFn, n: usize, third: bool, opts: &RealizeOptions) -> Result<(RoundTrip, Vec<LorentzVec>)> {
    let g = grid(n)?;
    let truth = RadialSurface::from_fn(g, rf)?;
    let forms = analytic_forms(g, rf)?;
    let out = if third { realize_third_form(&forms.iii, None, opts)? } else { realize_metric(&forms.i, None, opts)? };
    let aligned = gauge_align(&out.surface, &truth)?;
    let al = align_points(&out.frame.x, &truth.positions())?;
    let radial = max(aligned.rho.iter().zip(&truth.rho).map(|(a, b)| (a - b).abs()));
    Ok((
        RoundTrip { position: al.mismatch.max(radial), form: out.report.form_residual, converged: out.report.converged },
        out.frame.x,
    ))
}

fn realization(level: Level) -> Result<Vec<Check>> {
    let mut r = rng(900);
    let count = level.pick(1, 5);
    let surfaces: Vec<RadialFn> = (0..count).map(|_| random_convex(&mut r)).collect::<Result<_>>()?;
    let opts = RealizeOptions::default();
    let mut out = vec![];
    for (third, label, n) in [(false, "I", 32), (true, "III", 48)] {
        let (mut pos, mut form, mut conv) = (0.0f64, 0.0f64, true);
        for s in &surfaces {
            let (rt, _) = round_trip(s, n, third, &opts)?;
            pos = pos.max(rt.position);
            form = form.max(rt.form);
            conv &= rt.converged;
        }
        out.push(Check::at_most(format!("{label} position error after alignment, {count} surfaces"), pos, 1e-5));
        out.push(Check::at_most(format!("{label} form residual"), form, 1e-6));
        out.push(Check::flag(format!("{label} solver converged"), conv));

        let restarts = level.pick(2, 5);
        let rn = level.pick(24, 32);
        let runs: Vec<Vec<LorentzVec>> = (0..restarts)
            .map(|s| {
                let o = RealizeOptions { seed: Some(s as u64 + 1), ..opts.clone() };
                round_trip(&surfaces[0], rn, third, &o).map(|x| x.1)
            })
            .collect::<Result<_>>()?;
        let mut spread = 0.0f64;
        for a in 0..runs.len() {
            for b in a + 1..runs.len() {
                spread = spread.max(align_points(&runs[a], &runs[b])?.mismatch);
            }
        }
        out.push(Check::at_most(format!("{label} pairwise agreement of {restarts} random restarts"), spread, 1e-5));
    }
    Ok(out)
}

fn geodesics(level: Level) -> Result<Vec<Check>> {
    let opts = GeodesicOptions::default();
    let mut r = rng(1000);
    let count = level.pick(3, 10);
    let (mut margin, mut found) = (f64::INFINITY, 0usize);
    for _ in 0..count {
        let iii = fd_forms(&random_convex(&mut r)?, 32)?.iii.with_kind(FormKind::Target);
        let rep = shortest_closed_geodesic(&iii, &opts)?;
        for geo in rep.geodesics.iter().filter(|g| g.converged) {
            margin = margin.min(geo.length - std::f64::consts::TAU);
            found += 1;
        }
    }
    let g = grid(16)?;
    let mut round = 0.0f64;
    for c in [0.5f64, 1.0, 2.0] {
        let rep = shortest_closed_geodesic(&FormField::round(g, FormKind::Target, c * c), &opts)?;
        let l = rep.shortest().map_or(f64::INFINITY, |x| x.length);
        round = round.max((l - std::f64::consts::TAU * c).abs());
    }
    Ok(vec![
        Check::at_least("closed geodesics found on III", found as f64, 1.0),
        Check::at_least("shortest closed geodesic on III minus 2 pi", margin, 1e-3),
        Check::at_most("round metric c^2 can: |L - 2 pi c|", round, 1e-6),
    ])
}

fn mixed(_: Level) -> Result<Vec<Check>> {
    let g = grid(32)?;
    let opts = GeodesicOptions::default();
    let (mut closed, mut scaling, mut verdicts) = (0.0f64, 0.0f64, true);
    for rho in [1.0f64, 2.0] {
        let f = analytic_forms(g, &RadialFn::sphere(rho))?;
        let (s, c) = (rho.sinh(), rho.cosh());
        for k0 in [0.1f64, 0.3, 0.6] {
            let t0 = k0.atanh();
            let off = offset_forms(&f, -t0)?;
            for (variant, expect, offset) in [
                (MixedVariant::CorI, (s - k0 * c).powi(2), &off.i),
                (MixedVariant::CorIII, (c - k0 * s).powi(2), &off.iii),
            ] {
                let m = mixed_form(&f, k0, variant, &opts)?;
                closed = closed.max(m.h.rel_diff(&FormField::round(g, FormKind::Target, expect)));
                scaling = scaling.max(m.h.rel_diff(&offset.scaled(1.0 - k0 * k0)));
                verdicts &= m.verdict.admissible;
            }
        }
    }
    let mut r = rng(1100);
    let f = analytic_forms(g, &random_convex(&mut r)?)?;
    let limit = mixed_combination(&f, 0.0, MixedVariant::CorI).m == f.i.m
        && mixed_combination(&f, 0.0, MixedVariant::CorIII).m == f.iii.m;
    Ok(vec![
        Check::at_most("sphere mixed forms vs closed forms", closed, 1e-10),
        Check::at_most("mixed = (1 - k0^2) offset form", scaling, 1e-10),
        Check::flag("k0 = 0 recovers I and III exactly", limit),
        Check::flag("sphere mixed forms admissible", verdicts),
    ])
}

/// Runs every criterion in order, calling `done` after each.
pub fn run_all(level: Level, mut done: impl FnMut(&Outcome)) -> Vec<Outcome> {
    criteria()
        .iter()
        .map(|c| {
            let o = c.run(level);
            done(&o);
            o
        })
        .collect()
}
