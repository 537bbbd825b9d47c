//! Text file formats: `surf-grid` radial surfaces and `metric-grid` JSON
//! metrics, both on the half-offset latitude–longitude chart.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::surface::{FormField, FormKind, RadialSurface};

const SURF_MAGIC: &str = "surf-grid 1";

/// Writes ρ with 17 significant digits, one latitude row per line.
pub fn write_surf_grid(s: &RadialSurface) -> String {
    let g = s.grid;
    let mut out = format!("{SURF_MAGIC}\n{} {}\n", g.n_theta, g.n_phi);
    for i in 0..g.n_theta {
        for j in 0..g.n_phi {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{:.16e}", s.rho[g.idx(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_surf_grid(text: &str) -> Result<RadialSurface> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |n: usize, msg: &str| Error::Format(format!("surf-grid line {}: {msg}", n + 1));
    let (n0, head) = lines.next().ok_or_else(|| Error::Format("surf-grid: empty input".into()))?;
    if head.split_whitespace().collect::<Vec<_>>() != ["surf-grid", "1"] {
        return Err(bad(n0, "expected header `surf-grid 1`"));
    }
    let (n1, dims) = lines.next().ok_or_else(|| Error::Format("surf-grid: missing grid size".into()))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(n1, "grid size is not two integers"))?;
    let [nt, np] = dims[..] else { return Err(bad(n1, "grid size is not two integers")) };
    let grid = Grid::new(nt, np)?;
    let mut rho = Vec::with_capacity(grid.len());
    for i in 0..nt {
        let (n, line) = lines.next().ok_or_else(|| Error::Format(format!("surf-grid: {i} of {nt} rows present")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(n, "unparsable value"))?;
        if row.len() != np {
            return Err(bad(n, &format!("{} values, expected {np}", row.len())));
        }
        rho.extend(row);
    }
    if let Some((n, _)) = lines.next() {
        return Err(bad(n, "trailing data"));
    }
    RadialSurface::new(grid, rho)
}

#[derive(Serialize, Deserialize)]
struct MetricGrid {
    format: String,
    version: u32,
    n_theta: usize,
    n_phi: usize,
    #[serde(rename = "EFG")]
    efg: Vec<Vec<[f64; 3]>>,
}

/// `EFG[i][j] = [E, F, G]` at latitude row i and longitude column j.
pub fn write_metric_grid(h: &FormField) -> String {
    let g = h.grid;
    let efg = (0..g.n_theta)
        .map(|i| {
            (0..g.n_phi)
                .map(|j| {
                    let m = &h.m[g.idx(i, j)];
                    [m[(0, 0)], m[(0, 1)], m[(1, 1)]]
                })
                .collect()
        })
        .collect();
    let doc = MetricGrid { format: "metric-grid".into(), version: 1, n_theta: g.n_theta, n_phi: g.n_phi, efg };
    serde_json::to_string(&doc).expect("metric serialization") + "\n"
}

pub fn read_metric_grid(text: &str) -> Result<FormField> {
    let doc: MetricGrid = serde_json::from_str(text).map_err(|e| Error::Format(format!("metric-grid: {e}")))?;
    if doc.format != "metric-grid" || doc.version != 1 {
        return Err(Error::Format(format!("metric-grid: unsupported format {:?} version {}", doc.format, doc.version)));
    }
    let grid = Grid::new(doc.n_theta, doc.n_phi)?;
    if doc.efg.len() != grid.n_theta || doc.efg.iter().any(|r| r.len() != grid.n_phi) {
        return Err(Error::Format(format!("metric-grid: EFG is not {}×{}", grid.n_theta, grid.n_phi)));
    }
    let m: Vec<Matrix2<f64>> = doc.efg.iter().flatten().map(|&[e, f, g]| Matrix2::new(e, f, f, g)).collect();
    if let Some(k) = m.iter().position(|a| !a.iter().all(|x| x.is_finite())) {
        let (i, j) = grid.ij(k);
        return Err(Error::Format(format!("metric-grid: non-finite entry at ({i}, {j})")));
    }
    Ok(FormField::new(grid, FormKind::Target, m))
}

pub fn load_surface(path: &Path) -> Result<RadialSurface> {
    read_surf_grid(&std::fs::read_to_string(path)?)
}

pub fn load_metric(path: &Path) -> Result<FormField> {
    read_metric_grid(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::RadialFn;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn surf_grid_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = RadialFn::random(&mut rng, 1.0, 0.1, 4);
        let s = RadialSurface::from_fn(Grid::new(8, 16).unwrap(), &r).unwrap();
        let text = write_surf_grid(&s);
        assert!(text.starts_with("surf-grid 1\n8 16\n"));
        let back = read_surf_grid(&text).unwrap();
        assert!(back.rho.iter().zip(&s.rho).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(write_surf_grid(&back), text);
    }

    proptest! {
        #[test]
        fn surf_grid_values_round_trip(v in proptest::collection::vec(1e-300f64..1e300, 32)) {
            let s = RadialSurface::new(Grid::new(4, 8).unwrap(), v).unwrap();
            let back = read_surf_grid(&write_surf_grid(&s)).unwrap();
            prop_assert!(back.rho.iter().zip(&s.rho).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn surf_grid_rejects_malformed_input() {
        let ok = write_surf_grid(&RadialSurface::sphere(Grid::new(4, 8).unwrap(), 1.0));
        for bad in [
            String::new(),
            ok.replace("surf-grid 1", "surf-grid 2"),
            ok.replace("4 8", "4 9"),
            ok.replacen("1.0000000000000000e0", "x", 1),
            ok.replacen("1.0000000000000000e0", "-1", 1),
            ok.clone() + "1\n",
            ok.lines().take(4).collect::<Vec<_>>().join("\n"),
        ] {
            assert!(matches!(read_surf_grid(&bad), Err(Error::Format(_))), "{bad:?}");
        }
    }

    #[test]
    fn metric_grid_round_trip() {
        let g = Grid::new(4, 8).unwrap();
        let mut h = FormField::round(g, FormKind::Target, 1.7);
        h.m[5][(0, 1)] = 0.1 / 3.0;
        h.m[5][(1, 0)] = 0.1 / 3.0;
        let text = write_metric_grid(&h);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format"], "metric-grid");
        assert_eq!(v["EFG"][0][5][1], 0.1 / 3.0);
        let back = read_metric_grid(&text).unwrap();
        assert_eq!(back, h);
        assert!(read_metric_grid(&text.replace("\"version\":1", "\"version\":2")).is_err());
        assert!(read_metric_grid("{}").is_err());
    }
}
