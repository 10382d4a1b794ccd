use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    cube_sample, local_cube, local_pivotal, pps_probabilities, second_stage_srswor, BalanceColumn, InclusionPlan,
    LpmVariant, SampleDraw, SelectionMethod,
};
use crate::error::{Error, Result};
use crate::frame::FrameSnapshot;

/// The six first-stage designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DesignKind {
    /// Fixed-size PPS through the cube method.
    Fpps,
    /// Cube balanced on the verified infected.
    Cbv,
    /// Local pivotal.
    Lp,
    /// Local cube balanced on the verified infected.
    Lcbv,
    /// Local cube balanced on the centroid coordinates.
    Lcbg,
    /// Local cube balanced on verified infected and coordinates.
    Lcbvg,
}

impl DesignKind {
    pub const ALL: [DesignKind; 6] = [
        DesignKind::Fpps,
        DesignKind::Cbv,
        DesignKind::Lp,
        DesignKind::Lcbv,
        DesignKind::Lcbg,
        DesignKind::Lcbvg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Fpps => "FPPS",
            DesignKind::Cbv => "CBV",
            DesignKind::Lp => "LP",
            DesignKind::Lcbv => "LCBV",
            DesignKind::Lcbg => "LCBG",
            DesignKind::Lcbvg => "LCBVG",
        }
    }

    pub fn is_spatial(self) -> bool {
        !matches!(self, DesignKind::Fpps | DesignKind::Cbv)
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownDesign(s.to_string()))
    }
}

impl TryFrom<String> for DesignKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DesignKind> for String {
    fn from(k: DesignKind) -> String {
        k.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub m: usize,
    pub n_bar: usize,
}

/// Knobs that the named designs leave open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignOptions {
    pub lpm: LpmVariant,
    /// Add `cx^2`, `cy^2` and `cx*cy` to the geographic balancing columns.
    pub geo_quadratic: bool,
}

/// PPS probabilities plus the balancing and spreading that `kind` calls for.
pub fn make_design(kind: DesignKind, frame: &FrameSnapshot, m: usize, opts: &DesignOptions) -> Result<InclusionPlan> {
    frame.validate()?;
    let verified: Vec<f64> = frame.verified_counts().into_iter().map(|v| v as f64).collect();
    make_design_from_parts(kind, &frame.sizes(), verified, frame.spec.centroids(), m, opts)
}

/// [`make_design`] for clusters given by size, verified count and location.
pub fn make_design_from_parts(
    kind: DesignKind,
    sizes: &[usize],
    verified: Vec<f64>,
    coords: Vec<[f64; 2]>,
    m: usize,
    opts: &DesignOptions,
) -> Result<InclusionPlan> {
    if verified.len() != sizes.len() || coords.len() != sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sizes, {} verified counts, {} locations",
            sizes.len(),
            verified.len(),
            coords.len()
        )));
    }
    let pi = pps_probabilities(sizes, m)?;

    let mut cols = vec![BalanceColumn::new("pi", pi.clone())];
    let with_v = matches!(kind, DesignKind::Cbv | DesignKind::Lcbv | DesignKind::Lcbvg);
    let with_geo = matches!(kind, DesignKind::Lcbg | DesignKind::Lcbvg);
    if with_v {
        cols.push(BalanceColumn::new("verified", verified));
    }
    if with_geo {
        cols.push(BalanceColumn::new("cx", coords.iter().map(|c| c[0]).collect()));
        cols.push(BalanceColumn::new("cy", coords.iter().map(|c| c[1]).collect()));
        if opts.geo_quadratic {
            cols.push(BalanceColumn::new("cx2", coords.iter().map(|c| c[0] * c[0]).collect()));
            cols.push(BalanceColumn::new("cy2", coords.iter().map(|c| c[1] * c[1]).collect()));
            cols.push(BalanceColumn::new("cxcy", coords.iter().map(|c| c[0] * c[1]).collect()));
        }
    }
    let method = match kind {
        DesignKind::Fpps | DesignKind::Cbv => SelectionMethod::Cube,
        DesignKind::Lp => {
            cols.clear();
            SelectionMethod::LocalPivotal(opts.lpm)
        }
        _ => SelectionMethod::LocalCube,
    };
    InclusionPlan::new(pi, cols, Some(coords), method)
}

/// First-stage selection by the plan's method.
pub fn draw_first_stage<R: Rng + ?Sized>(plan: &InclusionPlan, rng: &mut R) -> Vec<usize> {
    match plan.method {
        SelectionMethod::Cube => cube_sample(plan, rng),
        SelectionMethod::LocalPivotal(_) => local_pivotal(plan, rng),
        SelectionMethod::LocalCube => local_cube(plan, rng),
    }
}

/// Two-stage draw: first stage by the plan, SRSWOR of `n_bar` residents in
/// every selected cluster.
pub fn draw_sample<R: Rng + ?Sized>(
    plan: &InclusionPlan,
    frame: &FrameSnapshot,
    n_bar: usize,
    rng: &mut R,
) -> Result<SampleDraw> {
    if plan.num_clusters() != frame.num_clusters() {
        return Err(Error::DimensionMismatch(format!(
            "plan has {} clusters, frame {}",
            plan.num_clusters(),
            frame.num_clusters()
        )));
    }
    let first_stage = draw_first_stage(plan, rng);
    let mut second_stage = Vec::with_capacity(first_stage.len());
    let mut w_i = Vec::with_capacity(first_stage.len());
    let mut w_ii = Vec::with_capacity(first_stage.len());
    for &c in &first_stage {
        let (persons, p2) = second_stage_srswor(frame, c, n_bar, rng)?;
        second_stage.push(persons);
        w_i.push(1.0 / plan.pi[c]);
        w_ii.push(1.0 / p2);
    }
    Ok(SampleDraw {
        first_stage,
        second_stage,
        w_i,
        w_ii,
    })
}
