//! Duality between convex surfaces of H³ and spacelike surfaces of de Sitter
//! space, and admissibility tests for prescribed metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::{shortest_closed_geodesic, GeodesicOptions};
use crate::lorentz::minkowski_inner;
use crate::surface::{fundamental_forms, Ambient, Atlas, FormField, FrameField};

/// The dual surface: positions are the outward unit normals of the primal
/// surface, parameterized by the same chart.
pub fn dualize(f: &FrameField) -> Result<FrameField> {
    let target = match f.ambient {
        Ambient::Hyperbolic => Ambient::DeSitter,
        Ambient::DeSitter => Ambient::Hyperbolic,
        Ambient::Euclidean => return Err(Error::Precondition("Euclidean surfaces have no dual".into())),
    };
    fundamental_forms(f)?.ensure_convex()?;
    let y = f.n.iter().map(|n| -n).collect();
    FrameField::from_positions(f.grid, target, y).map_err(|e| match e {
        Error::Degenerate(m) => Error::Degenerate(format!("dual is not spacelike: {m}")),
        other => other,
    })
}

/// Residuals of the duality identities between a surface and its dual.
#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    /// max ‖I(S*) − III(S)‖ in the unit sphere frame.
    pub first_vs_third: f64,
    /// max ‖III(S*) − I(S)‖.
    pub third_vs_first: f64,
    /// max ‖II(S*) − II(S)‖.
    pub second: f64,
    /// max ‖B(S*)·B(S) − Id‖.
    pub shape_inverse: f64,
    /// Largest coordinate difference between (S*)* and S.
    pub double_dual: f64,
    /// max |K(III(S)) − K/(K+1)|.
    pub curvature_ratio: f64,
}

pub fn duality_report(f: &FrameField) -> Result<DualityReport> {
    let forms = fundamental_forms(f)?;
    forms.ensure_convex()?;
    let d = dualize(f)?;
    let dforms = fundamental_forms(&d)?;
    let dd = dualize(&d)?;
    let double_dual = (0..f.grid.len()).map(|k| (dd.x[k] - f.x[k]).amax()).fold(0.0, f64::max);
    let shape_inverse = (0..f.grid.len())
        .map(|k| (dforms.b.b[k] * forms.b.b[k] - nalgebra::Matrix2::identity()).amax())
        .fold(0.0, f64::max);
    let atlas = Atlas::new(f.grid);
    let k = atlas.gauss_curvature(&forms.i);
    let kt = atlas.gauss_curvature(&forms.iii);
    let curvature_ratio = (0..k.len()).map(|n| (kt[n] - k[n] / (k[n] + 1.0)).abs()).fold(0.0, f64::max);
    Ok(DualityReport {
        first_vs_third: dforms.i.max_diff(&forms.iii),
        third_vs_first: dforms.iii.max_diff(&forms.i),
        second: dforms.ii.max_diff(&forms.ii),
        shape_inverse,
        double_dual,
        curvature_ratio,
    })
}

/// Largest deviation of the dual positions from the de Sitter quadric.
pub fn quadric_residual(d: &FrameField) -> f64 {
    d.x.iter().map(|y| (minkowski_inner(y, y) - 1.0).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub admissible: bool,
    pub min_curvature: f64,
    pub max_curvature: f64,
    /// Distance of the curvature range from its bound (positive when satisfied).
    pub curvature_margin: f64,
    /// Shortest closed geodesic found, when the test uses one.
    pub min_geodesic: Option<f64>,
    /// min_geodesic minus its required bound.
    pub geodesic_margin: Option<f64>,
    pub reasons: Vec<String>,
}

fn curvature_range(h: &FormField) -> Result<(f64, f64)> {
    if let Some(k) = h.first_indefinite() {
        let (i, j) = h.grid.ij(k);
        return Err(Error::Precondition(format!("metric is not positive definite at node ({i}, {j})")));
    }
    let k = Atlas::new(h.grid).gauss_curvature(h);
    Ok(k.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))))
}

/// Curvature K > `lower` everywhere.
pub fn admissibility_curvature_below(h: &FormField, lower: f64) -> Result<Verdict> {
    let (lo, hi) = curvature_range(h)?;
    let margin = lo - lower;
    let mut reasons = vec![];
    if !(margin > 0.0) {
        reasons.push(format!("curvature reaches {lo}, not above {lower}"));
    }
    Ok(Verdict {
        admissible: reasons.is_empty(),
        min_curvature: lo,
        max_curvature: hi,
        curvature_margin: margin,
        min_geodesic: None,
        geodesic_margin: None,
        reasons,
    })
}

/// Curvature K < `upper` and every closed geodesic found longer than `length`.
pub fn admissibility_curvature_above(h: &FormField, upper: f64, length: f64, opts: &GeodesicOptions) -> Result<Verdict> {
    let (lo, hi) = curvature_range(h)?;
    let margin = upper - hi;
    let mut reasons = vec![];
    if !(margin > 0.0) {
        reasons.push(format!("curvature reaches {hi}, not below {upper}"));
    }
    let rep = shortest_closed_geodesic(h, opts)?;
    let min_geodesic = rep.shortest().map(|g| g.length);
    match min_geodesic {
        Some(l) if l > length => {}
        Some(l) => reasons.push(format!("closed geodesic of length {l} is not longer than {length}")),
        None => reasons.push("closed geodesic search did not converge".into()),
    }
    Ok(Verdict {
        admissible: reasons.is_empty(),
        min_curvature: lo,
        max_curvature: hi,
        curvature_margin: margin,
        min_geodesic,
        geodesic_margin: min_geodesic.map(|l| l - length),
        reasons,
    })
}

/// Metrics realizable as induced metrics of convex surfaces: K > −1.
pub fn admissibility_i(h: &FormField) -> Result<Verdict> {
    admissibility_curvature_below(h, -1.0)
}

/// Metrics realizable as third forms: K < 1 and closed geodesics longer than 2π.
pub fn admissibility_iii(h: &FormField, opts: &GeodesicOptions) -> Result<Verdict> {
    admissibility_curvature_above(h, 1.0, std::f64::consts::TAU, opts)
}
