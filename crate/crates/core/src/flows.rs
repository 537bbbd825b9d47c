//! Equidistant surfaces and the mixed combinations of I, II, III.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::dual::{admissibility_curvature_above, admissibility_curvature_below, Verdict};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicOptions;
use crate::lorentz::LorentzVec;
use crate::surface::{
    embed, fundamental_forms, radial_resample, Ambient, FormField, FormKind, Forms, FrameField, RadialSurface,
    ShapeField,
};

/// Signed offset distance: positive away from the center, negative towards it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetParams {
    pub t: f64,
}

impl OffsetParams {
    /// `inward` moves a distance |t| towards the center.
    pub fn new(t: f64, inward: bool) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("offset distance {t} is not finite")));
        }
        Ok(Self { t: if inward { -t.abs() } else { t } })
    }

    pub fn is_inward(&self) -> bool {
        self.t < 0.0
    }

    /// Checks an inward offset against the principal curvatures of the
    /// source: tanh|t| ≤ k₀ keeps it convex, and tanh|t|·k_max < 1 keeps it
    /// short of the focal set.
    pub fn check(&self, forms: &Forms) -> Result<()> {
        if !self.is_inward() {
            return Ok(());
        }
        let th = self.t.abs().tanh();
        let k0 = forms.b.min_curvature();
        let k1 = forms.b.max_curvature();
        if !(th <= k0) {
            return Err(Error::Precondition(format!(
                "inward offset {} needs tanh|t| = {th} ≤ k0 = {k0} (minimum principal curvature)",
                self.t
            )));
        }
        if !(th * k1 < 1.0) {
            return Err(Error::Precondition(format!(
                "inward offset {} reaches the focal set: tanh|t|·k_max = {}",
                self.t,
                th * k1
            )));
        }
        Ok(())
    }
}

/// Forms of the equidistant surface at signed distance t, by nodewise
/// algebra. B_t is recomputed as I_t⁻¹ II_t.
pub fn offset_forms(forms: &Forms, t: f64) -> Result<Forms> {
    let p = OffsetParams::new(t, false)?;
    forms.ensure_convex()?;
    p.check(forms)?;
    let (ch, sh) = (t.cosh(), t.sinh());
    let grid = forms.grid();
    let (c2, s2, cs) = (ch * ch, sh * sh, ch * sh);
    let i = FormField::combine(FormKind::I, &[(c2, &forms.i), (2.0 * cs, &forms.ii), (s2, &forms.iii)]);
    let ii = FormField::combine(FormKind::II, &[(cs, &forms.i), (c2 + s2, &forms.ii), (cs, &forms.iii)]);
    let iii = FormField::combine(FormKind::III, &[(s2, &forms.i), (2.0 * cs, &forms.ii), (c2, &forms.iii)]);
    let mut b = Vec::with_capacity(grid.len());
    let mut nonconvex = vec![];
    for k in 0..grid.len() {
        let inv = i.m[k]
            .try_inverse()
            .filter(|_| i.m[k].determinant() > 0.0)
            .ok_or_else(|| Error::Degenerate(format!("offset metric degenerates at node {:?}", grid.ij(k))))?;
        let bk: Matrix2<f64> = inv * ii.m[k];
        if !(bk.determinant() > 0.0 && bk.trace() > 0.0) {
            nonconvex.push(grid.ij(k));
        }
        b.push(bk);
    }
    Ok(Forms { i, ii, iii, b: ShapeField { grid, b }, asymmetry: forms.asymmetry, nonconvex })
}

/// x_t = cosh t·x − sinh t·N along the normal geodesics (N points to the
/// center).
pub fn offset_positions(f: &FrameField, t: f64) -> Result<Vec<LorentzVec>> {
    if f.ambient != Ambient::Hyperbolic {
        return Err(Error::Precondition("offsets are defined for surfaces in H³".into()));
    }
    let (ch, sh) = (t.cosh(), t.sinh());
    Ok(f.x.iter().zip(&f.n).map(|(x, n)| x * ch - n * sh).collect())
}

/// The offset surface in the chart of the source, with fresh frames.
pub fn offset_frame(f: &FrameField, t: f64) -> Result<FrameField> {
    let forms = fundamental_forms(f)?;
    forms.ensure_convex()?;
    OffsetParams::new(t, false)?.check(&forms)?;
    FrameField::from_positions(f.grid, Ambient::Hyperbolic, offset_positions(f, t)?)
}

/// The offset surface re-sampled as a radial graph on the same grid.
pub fn offset_surface(s: &RadialSurface, t: f64) -> Result<RadialSurface> {
    let f = offset_frame(&embed(s)?, t)?;
    radial_resample(s.grid, &f.x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedVariant {
    /// I − 2k₀ II + k₀² III.
    #[serde(rename = "cor-I")]
    CorI,
    /// k₀² I − 2k₀ II + III.
    #[serde(rename = "cor-III")]
    CorIII,
}

impl fmt::Display for MixedVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CorI => "cor-I",
            Self::CorIII => "cor-III",
        })
    }
}

impl FromStr for MixedVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cor-I" => Ok(Self::CorI),
            "cor-III" => Ok(Self::CorIII),
            _ => Err(Error::Format(format!("unknown mixed variant `{s}` (expected cor-I or cor-III)"))),
        }
    }
}

/// The combination itself, for any k₀ (including the limit k₀ = 0).
pub fn mixed_combination(forms: &Forms, k0: f64, variant: MixedVariant) -> FormField {
    let (a, c) = match variant {
        MixedVariant::CorI => (1.0, k0 * k0),
        MixedVariant::CorIII => (k0 * k0, 1.0),
    };
    FormField::combine(FormKind::Target, &[(a, &forms.i), (-2.0 * k0, &forms.ii), (c, &forms.iii)])
}

#[derive(Clone, Debug)]
pub struct MixedForm {
    pub h: FormField,
    pub verdict: Verdict,
}

/// The mixed form for k₀ ∈ (0, 1) with its admissibility verdict:
/// K > −1/(1−k₀²) for cor-I; K < 1/(1−k₀²) and closed geodesics longer than
/// 2π√(1−k₀²) for cor-III.
pub fn mixed_form(forms: &Forms, k0: f64, variant: MixedVariant, opts: &GeodesicOptions) -> Result<MixedForm> {
    if !(k0 > 0.0 && k0 < 1.0) {
        return Err(Error::Domain(format!("k0 = {k0} is outside (0, 1)")));
    }
    let h = mixed_combination(forms, k0, variant);
    let q = 1.0 - k0 * k0;
    let verdict = match variant {
        MixedVariant::CorI => admissibility_curvature_below(&h, -1.0 / q)?,
        MixedVariant::CorIII => admissibility_curvature_above(&h, 1.0 / q, std::f64::consts::TAU * q.sqrt(), opts)?,
    };
    Ok(MixedForm { h, verdict })
}
