mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hyperconvex::deform::rigidity::KernelOptions;
use hyperconvex::deform::{rigidity_kernel, RigidityKind};
use hyperconvex::dual::{duality_report, dualize};
use hyperconvex::flows::{mixed_form, offset_forms, offset_frame, offset_surface, MixedVariant, OffsetParams};
use hyperconvex::geodesic::{shortest_closed_geodesic, GeodesicOptions};
use hyperconvex::grid::Grid;
use hyperconvex::io::{load_metric, load_surface, write_metric_grid, write_surf_grid};
use hyperconvex::realize::{realize_metric, realize_third_form, RealizeOptions};
use hyperconvex::report::{Check, Report};
use hyperconvex::surface::intrinsic::gauss_codazzi_max;
use hyperconvex::surface::{embed, fundamental_forms, regrid, Ambient, Atlas, FormField, FormKind, RadialSurface};
use hyperconvex::verify::{run_all, Level};
use hyperconvex::Error;

use config::Tunables;

/// Convex surfaces in hyperbolic space: forms, duality, offsets, rigidity and realization.
#[derive(Parser)]
#[command(name = "hyperconvex", version)]
struct Cli {
    /// `key = value` file of defaults; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the surface or metric produced by the command here.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(flatten)]
    tunables: Tunables,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    #[value(name = "I")]
    I,
    #[value(name = "III")]
    III,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental forms, curvatures and Gauss–Codazzi residuals of a surf-grid surface.
    Forms {
        surf: PathBuf,
        /// Tab-separated per-node columns θ φ E F G k1 k2 K.
        #[arg(long)]
        columns: Option<PathBuf>,
    },
    /// Dual surface in de Sitter space; --output receives its induced metric.
    Dualize { surf: PathBuf },
    /// Equidistant surface at signed distance t; --output receives it as a surf-grid.
    Offset {
        surf: PathBuf,
        #[arg(long = "t", allow_negative_numbers = true)]
        t: f64,
        /// Move |t| towards the center.
        #[arg(long)]
        inward: bool,
    },
    /// Mixed form for k0 in (0, 1) with its admissibility verdict.
    Mixed {
        surf: PathBuf,
        #[arg(long)]
        k0: f64,
        #[arg(long)]
        variant: MixedVariant,
    },
    /// Singular spectrum and kernel of the linearized I or III operator.
    Rigidity {
        surf: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Convex surface whose induced metric (or third form) is the target.
    Realize {
        #[arg(long)]
        target: PathBuf,
        /// Treat the target as a third fundamental form.
        #[arg(long)]
        third: bool,
    },
    /// Shortest closed geodesics of a metric-grid metric.
    Geodesics { metric: PathBuf },
    /// The invariant suite; exits 0 iff every check passes.
    Verify,
}

/// Exit status of each error class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format(_) => 2,
        Error::Io(_) => 3,
        Error::Precondition(_) | Error::Domain(_) | Error::NonConvex { .. } => 4,
        Error::Inadmissible(_) => 5,
        Error::Stall(_) => STALLED,
        Error::Linalg(_) | Error::Degenerate(_) | Error::OffQuadric(_) | Error::NonUnit(_) => 7,
    }
}

const CHECKS_FAILED: u8 = 1;
const STALLED: u8 = 6;

struct Settings {
    t: Tunables,
    output: Option<PathBuf>,
}

impl Settings {
    fn residual_tol(&self) -> f64 {
        self.t.residual_tol.unwrap_or(1e-4)
    }

    fn geodesic(&self) -> GeodesicOptions {
        let d = GeodesicOptions::default();
        GeodesicOptions {
            points: self.t.geodesic_points.unwrap_or(d.points),
            random_seeds: self.t.geodesic_seeds.unwrap_or(d.random_seeds),
            ..d
        }
    }

    fn surface(&self, path: &Path) -> hyperconvex::Result<RadialSurface> {
        let s = load_surface(path)?;
        match (self.t.n_theta, self.t.n_phi) {
            (None, None) => Ok(s),
            (nt, np) => regrid(&s, Grid::new(nt.unwrap_or(s.grid.n_theta), np.unwrap_or(s.grid.n_phi))?),
        }
    }

    fn write(&self, text: &str) -> hyperconvex::Result<()> {
        if let Some(p) = &self.output {
            std::fs::write(p, text)?;
        }
        Ok(())
    }
}

fn range(v: impl IntoIterator<Item = f64>) -> [f64; 2] {
    v.into_iter().fold([f64::INFINITY, f64::NEG_INFINITY], |[a, b], x| [a.min(x), b.max(x)])
}

fn forms_cmd(s: &Settings, path: &Path, columns: Option<&Path>) -> hyperconvex::Result<Report> {
    let surf = s.surface(path)?;
    let g = surf.grid;
    let forms = fundamental_forms(&embed(&surf)?)?;
    let k = Atlas::new(g).gauss_curvature(&forms.i);
    let principal: Vec<(f64, f64)> = (0..g.len()).map(|n| forms.b.principal_curvatures(n)).collect();
    let (gauss, codazzi) = gauss_codazzi_max(&forms, Ambient::Hyperbolic);
    let tol = s.residual_tol();
    let mut r = Report::new();
    r.push(Check::flag("strictly convex", forms.ensure_convex().is_ok()));
    r.push(Check::at_most("gauss residual |det B - (K+1)|", gauss, tol));
    r.push(Check::at_most("codazzi residual", codazzi, tol));
    let rho0 = surf.rho[0];
    if surf.rho.iter().all(|x| *x == rho0) {
        let (sh, ch) = (rho0.sinh(), rho0.cosh());
        r.push(Check::at_most("sphere I = sinh^2 can", forms.i.rel_diff(&FormField::round(g, FormKind::I, sh * sh)), 1e-8));
        r.push(Check::at_most("sphere II = sinh cosh can", forms.ii.rel_diff(&FormField::round(g, FormKind::II, sh * ch)), 1e-8));
        r.push(Check::at_most("sphere III = cosh^2 can", forms.iii.rel_diff(&FormField::round(g, FormKind::III, ch * ch)), 1e-8));
    }
    r.insert("grid", [g.n_theta, g.n_phi]);
    r.insert("area", forms.i.area());
    r.insert("gauss_curvature_range", range(k.iter().copied()));
    r.insert("principal_curvature_range", [forms.b.min_curvature(), forms.b.max_curvature()]);
    r.insert("third_form_area", forms.iii.area());
    if let Some(p) = columns {
        let mut out = String::from("theta\tphi\tE\tF\tG\tk1\tk2\tK\n");
        for n in 0..g.len() {
            let (i, j) = g.ij(n);
            let m = forms.i.m[n];
            let (k1, k2) = principal[n];
            out += &format!(
                "{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\n",
                g.theta(i),
                g.phi(j),
                m[(0, 0)],
                m[(0, 1)],
                m[(1, 1)],
                k1,
                k2,
                k[n]
            );
        }
        std::fs::write(p, out)?;
    }
    Ok(r)
}

fn dualize_cmd(s: &Settings, path: &Path) -> hyperconvex::Result<Report> {
    let f = embed(&s.surface(path)?)?;
    let rep = duality_report(&f)?;
    let tol = s.residual_tol();
    let mut r = Report::new();
    r.extend([
        Check::at_most("I(S*) - III(S)", rep.first_vs_third, tol),
        Check::at_most("III(S*) - I(S)", rep.third_vs_first, tol),
        Check::at_most("II(S*) - II(S)", rep.second, tol),
        Check::at_most("B(S*) B(S) - Id", rep.shape_inverse, tol),
        Check::at_most("double dual position", rep.double_dual, tol),
        Check::at_most("K(III) - K/(K+1)", rep.curvature_ratio, tol),
    ]);
    let dual = dualize(&f)?;
    let df = fundamental_forms(&dual)?;
    r.insert("dual_area", df.i.area());
    r.insert("dual_first_coordinate_range", range(dual.x.iter().map(|y| y[0])));
    s.write(&write_metric_grid(&df.i.with_kind(FormKind::Target)))?;
    Ok(r)
}

fn offset_cmd(s: &Settings, path: &Path, t: f64, inward: bool) -> hyperconvex::Result<Report> {
    let surf = s.surface(path)?;
    let p = OffsetParams::new(t, inward)?;
    let f = embed(&surf)?;
    let forms = fundamental_forms(&f)?;
    p.check(&forms)?;
    let alg = offset_forms(&forms, p.t)?;
    let geo = fundamental_forms(&offset_frame(&f, p.t)?)?;
    let cross = alg.i.rel_diff(&geo.i).max(alg.ii.rel_diff(&geo.ii)).max(alg.iii.rel_diff(&geo.iii));
    let out = offset_surface(&surf, p.t)?;
    let mut r = Report::new();
    r.push(Check::at_most("offset forms: algebraic vs geometric", cross, s.residual_tol()));
    r.push(Check::flag("offset strictly convex", alg.ensure_convex().is_ok()));
    if p.t > 0.0 {
        let th = p.t.tanh();
        r.push(Check::at_least("min principal curvature - tanh t", alg.b.min_curvature() - th, -1e-8));
        r.push(Check::at_most("max principal curvature - coth t", alg.b.max_curvature() - 1.0 / th, 1e-8));
    }
    r.insert("t", p.t);
    r.insert("principal_curvature_range", [alg.b.min_curvature(), alg.b.max_curvature()]);
    r.insert("radius_range", range(out.rho.iter().copied()));
    s.write(&write_surf_grid(&out))?;
    Ok(r)
}

fn mixed_cmd(s: &Settings, path: &Path, k0: f64, variant: MixedVariant) -> hyperconvex::Result<Report> {
    let forms = fundamental_forms(&embed(&s.surface(path)?)?)?;
    let m = mixed_form(&forms, k0, variant, &s.geodesic())?;
    let mut r = Report::new();
    r.push(Check::flag("admissible", m.verdict.admissible));
    r.insert("variant", variant);
    r.insert("k0", k0);
    r.insert("verdict", &m.verdict);
    s.write(&write_metric_grid(&m.h))?;
    Ok(r)
}

fn rigidity_cmd(s: &Settings, path: &Path, which: Which) -> hyperconvex::Result<Report> {
    let f = embed(&s.surface(path)?)?;
    let d = KernelOptions::default();
    let opts = KernelOptions { tau: s.t.kernel_tau.unwrap_or(d.tau), gap: s.t.kernel_gap.unwrap_or(d.gap), ..d };
    let kind = match which {
        Which::I => RigidityKind::InducedMetric,
        Which::III => RigidityKind::ThirdForm,
    };
    let rep = rigidity_kernel(&f, kind, &opts)?;
    let mut r = Report::new();
    r.extend([
        Check::equals("kernel dimension", rep.kernel_dim as f64, 6.0),
        Check::at_least("s7/s6", rep.gap_ratio, opts.gap),
        Check::at_most("angle to the Killing fields", rep.subspace_angle, 1e-3),
    ]);
    r.insert("spectrum", &rep);
    Ok(r)
}

fn realize_cmd(s: &Settings, target: &Path, third: bool) -> hyperconvex::Result<(Report, bool)> {
    let h = load_metric(target)?;
    let d = RealizeOptions::default();
    let opts = RealizeOptions {
        tol: s.t.tol.unwrap_or(d.tol),
        max_iter: s.t.max_iter.unwrap_or(d.max_iter),
        seed: s.t.seed,
        geodesic: s.geodesic(),
        ..d
    };
    let out = if third { realize_third_form(&h, None, &opts)? } else { realize_metric(&h, None, &opts)? };
    let mut r = Report::new();
    r.push(Check::at_most("form residual", out.report.form_residual, opts.tol));
    r.push(Check::flag("strictly convex", out.report.min_principal_curvature > 0.0));
    r.insert("solver", &out.report);
    s.write(&write_surf_grid(&out.surface))?;
    Ok((r, out.report.converged))
}

fn geodesics_cmd(s: &Settings, path: &Path) -> hyperconvex::Result<Report> {
    let h = load_metric(path)?;
    let rep = shortest_closed_geodesic(&h, &s.geodesic())?;
    let shortest = rep.shortest().map(|g| g.length);
    let mut r = Report::new();
    r.push(Check::flag("a closed geodesic converged", shortest.is_some()));
    r.push(Check::at_least("shortest closed geodesic - 2 pi", shortest.unwrap_or(f64::NAN) - std::f64::consts::TAU, 0.0));
    r.insert("shortest", shortest);
    r.insert("geodesics", &rep.geodesics);
    Ok(r)
}

fn verify_cmd(s: &Settings) -> Report {
    let level = s.t.level.unwrap_or(Level::Fast);
    let outcomes = run_all(level, |o| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        eprintln!("[{:>2}] {status} {} ({:.1} s, budget {:.0} s)", o.id, o.name, o.seconds, o.budget);
    });
    let mut r = Report::new();
    for o in &outcomes {
        for c in &o.checks {
            r.push(Check { name: format!("[{}] {}: {}", o.id, o.name, c.name), ..c.clone() });
        }
        if let Some(e) = &o.error {
            r.push(Check { name: format!("[{}] {}: {e}", o.id, o.name), value: f64::NAN, tolerance: 0.0, pass: false });
        }
    }
    r.insert("level", level);
    r.insert("criteria", &outcomes);
    r
}

fn run(cli: Cli) -> Result<u8, Error> {
    let file = match &cli.config {
        Some(p) => Tunables::load(p)?,
        None => Tunables::default(),
    };
    let s = Settings { t: cli.tunables.over(file), output: cli.output };
    let mut code = 0;
    let report = match &cli.command {
        Command::Forms { surf, columns } => forms_cmd(&s, surf, columns.as_deref())?,
        Command::Dualize { surf } => dualize_cmd(&s, surf)?,
        Command::Offset { surf, t, inward } => offset_cmd(&s, surf, *t, *inward)?,
        Command::Mixed { surf, k0, variant } => mixed_cmd(&s, surf, *k0, *variant)?,
        Command::Rigidity { surf, which } => rigidity_cmd(&s, surf, *which)?,
        Command::Realize { target, third } => {
            let (r, converged) = realize_cmd(&s, target, *third)?;
            if !converged {
                code = STALLED;
            }
            r
        }
        Command::Geodesics { metric } => geodesics_cmd(&s, metric)?,
        Command::Verify => verify_cmd(&s),
    };
    let mut out = std::io::stdout().lock();
    out.write_all(report.to_json().as_bytes())?;
    if code == 0 && !report.passed() {
        code = CHECKS_FAILED;
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
