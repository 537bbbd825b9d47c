use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("hyperconvex-{}-{name}", std::process::id()))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperconvex")).args(args).output().expect("binary runs")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn forms_on_the_unit_sphere_match_closed_forms() {
    let o = run(&["forms", path(&fixture("sphere-rho1.surf"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    for name in ["sphere I = sinh^2 can", "sphere II = sinh cosh can", "sphere III = cosh^2 can"] {
        let c = check(&r, name);
        assert!(c["pass"].as_bool().unwrap() && c["value"].as_f64().unwrap() <= 1e-8, "{c}");
    }
    assert_eq!(r["pass"], true);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_hints() {
    let f = fixture("bumpy.surf");
    let a = run(&["forms", path(&f)]);
    let b = run(&["forms", path(&f), "--threads", "4"]);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
    let a = run(&["rigidity", path(&f), "--which", "I"]);
    let b = run(&["rigidity", path(&f), "--which", "I", "--threads", "2"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(report(&a)["spectrum"]["kernel_dim"], 6);
}

#[test]
fn inward_offset_past_the_curvature_bound_is_a_precondition_error() {
    let o = run(&["offset", path(&fixture("flat-cap.surf")), "--t", "-10"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let o = run(&["offset", path(&fixture("flat-cap.surf")), "--t", "10", "--inward"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn offset_writes_a_concentric_sphere() {
    let out = scratch("offset.surf");
    let o = run(&["offset", path(&fixture("sphere-rho1.surf")), "--t", "0.5", "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("surf-grid 1\n24 48\n"));
    let rho: Vec<f64> = text.lines().skip(2).flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap())).collect();
    assert_eq!(rho.len(), 24 * 48);
    assert!(rho.iter().all(|r| (r - 1.5).abs() < 1e-12));
    std::fs::remove_file(out).ok();
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let metric = fixture("bumpy-I.metric.json");
    let surf = fixture("bumpy.surf");
    // surf-grid reader on a JSON file
    assert_eq!(run(&["forms", path(&metric)]).status.code(), Some(2));
    assert_eq!(run(&["geodesics", path(&surf)]).status.code(), Some(2));
    assert_eq!(run(&["forms", path(&scratch("missing.surf"))]).status.code(), Some(3));
    assert_eq!(run(&["mixed", path(&surf), "--k0", "1.5", "--variant", "cor-I"]).status.code(), Some(4));
    assert_eq!(run(&["mixed", path(&surf), "--k0", "0.5", "--variant", "cor-II"]).status.code(), Some(2));

    let small = scratch("small.metric.json");
    let g = (8, 16);
    let efg: Vec<Vec<[f64; 3]>> = (0..g.0)
        .map(|i| {
            let t = std::f64::consts::PI * (i as f64 + 0.5) / g.0 as f64;
            vec![[0.25, 0.0, 0.25 * t.sin().powi(2)]; g.1]
        })
        .collect();
    let doc = serde_json::json!({"format": "metric-grid", "version": 1, "n_theta": g.0, "n_phi": g.1, "EFG": efg});
    std::fs::write(&small, doc.to_string()).unwrap();
    assert_eq!(run(&["realize", "--target", path(&small), "--third"]).status.code(), Some(5));
    std::fs::remove_file(small).ok();
}

#[test]
fn config_values_apply_and_flags_win() {
    let cfg = scratch("strict.conf");
    std::fs::write(&cfg, "# demanding\nresidual_tol = 1e-30\nthreads = 3\n").unwrap();
    let surf = fixture("bumpy.surf");
    let o = run(&["forms", path(&surf), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let tol = check(&report(&o), "codazzi residual")["tolerance"].as_f64().unwrap();
    assert!((tol / 1e-30 - 1.0).abs() < 1e-12);
    let o = run(&["forms", path(&surf), "--config", path(&cfg), "--residual-tol", "1e-2"]);
    assert_eq!(o.status.code(), Some(0));
    std::fs::write(&cfg, "n_theta = 16\nn_phi = 32\n").unwrap();
    let o = run(&["forms", path(&surf), "--config", path(&cfg)]);
    assert_eq!(report(&o)["grid"], serde_json::json!([16, 32]));
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(run(&["forms", path(&surf), "--config", path(&cfg)]).status.code(), Some(2));
    std::fs::remove_file(cfg).ok();
}

#[test]
fn dual_mixed_and_geodesic_reports() {
    let surf = fixture("sphere-rho1.surf");
    let out = scratch("dual.metric.json");
    let o = run(&["dualize", path(&surf), "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let dual: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(dual["format"], "metric-grid");
    let c2 = 1f64.cosh().powi(2);
    assert!((dual["EFG"][3][5][0].as_f64().unwrap() - c2).abs() < 1e-8);

    let o = run(&["geodesics", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let l = report(&o)["shortest"].as_f64().unwrap();
    assert!((l - std::f64::consts::TAU * 1f64.cosh()).abs() < 1e-6, "{l}");
    std::fs::remove_file(out).ok();

    for variant in ["cor-I", "cor-III"] {
        let o = run(&["mixed", path(&surf), "--k0", "0.3", "--variant", variant]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(report(&o)["verdict"]["admissible"], true);
    }
}

#[test]
fn realize_reproduces_the_fixture_metric() {
    let out = scratch("realized.surf");
    let o = run(&["realize", "--target", path(&fixture("bumpy-I.metric.json")), "--tol", "1e-6", "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert!(r["solver"]["form_residual"].as_f64().unwrap() <= 1e-6);
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("surf-grid 1\n24 48\n"));
    std::fs::remove_file(out).ok();
}

#[test]
fn verify_fast_passes() {
    let start = std::time::Instant::now();
    let o = run(&["verify", "--level", "fast"]);
    let secs = start.elapsed().as_secs_f64();
    eprintln!("{}verify --level fast: {secs:.0} s", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["criteria"].as_array().unwrap().len(), 11);
}
