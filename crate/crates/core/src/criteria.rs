//! Separability and EPR inequalities.
//!
//! Every check compares a measurable `lhs` against the `bound` that any
//! separable state must respect; `lhs < bound` certifies entanglement.
//! `margin = bound - lhs` is positive when the inequality is violated.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Result;
use crate::inference::{
    inference_variance_conditional_auto, optimal_gain_from, optimal_offset_from,
    residual_second_moment, Method, QuadraturePair,
};
use crate::quadrature::GridSpec;
use crate::states::{GaussianState, State, UncertaintyBounds};

/// Absolute margin required before an exact-moment check is flagged.
pub const VIOLATION_THRESHOLD: f64 = 1e-9;
/// Grid-based violations need a margin this many times the larger grid diagnostic.
pub const GRID_SAFETY: f64 = 2.0;

pub const REID_NOTE: &str = "EPR criterion violated: the state is entangled, and under spatial \
                             separation this realizes the EPR gedanken experiment";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriterionKind {
    /// `Δ_inf x · Δ_inf p ≥ C`.
    ReidProduct,
    /// `Δ²_L x · Δ²_L p ≥ C² + g²h²D²`.
    LinearProduct,
    /// Common-gain product `≥ C² + g⁴D²` (`C²(1 + g⁴)` when `C = D`).
    AnyGProduct,
    /// `max(Δ²_L x, Δ²_L p) ≥ C + D` at unit gains.
    TwoModeSqueezing,
    /// `Var(x_A - x_B) + Var(p_A + p_B) ≥ 2(C + D)`.
    DuanSum,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 5] = [
        CriterionKind::ReidProduct,
        CriterionKind::LinearProduct,
        CriterionKind::AnyGProduct,
        CriterionKind::TwoModeSqueezing,
        CriterionKind::DuanSum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CriterionKind::ReidProduct => "reid_product",
            CriterionKind::LinearProduct => "linear_product",
            CriterionKind::AnyGProduct => "any_g_product",
            CriterionKind::TwoModeSqueezing => "two_mode_squeezing",
            CriterionKind::DuanSum => "duan_sum",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub lhs: f64,
    pub bound: f64,
    pub violated: bool,
    pub params: BTreeMap<String, f64>,
    pub method: Method,
    /// Change in `lhs` when the grid resolution doubles (conditional method only).
    pub convergence_delta: Option<f64>,
    pub notes: Vec<String>,
}

impl CriterionReport {
    fn new(kind: CriterionKind, lhs: f64, bound: f64, method: Method) -> Self {
        let mut r = Self {
            kind,
            lhs,
            bound,
            violated: false,
            params: BTreeMap::new(),
            method,
            convergence_delta: None,
            notes: Vec::new(),
        };
        r.violated = r.margin() > VIOLATION_THRESHOLD;
        r
    }

    fn with_params(mut self, params: &[(&str, f64)]) -> Self {
        self.params
            .extend(params.iter().map(|(k, v)| (k.to_string(), *v)));
        self
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.lhs
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CriteriaConfig {
    pub bounds: UncertaintyBounds,
    pub grid: GridSpec,
}

fn bound_params(b: &UncertaintyBounds) -> [(&'static str, f64); 2] {
    [("C", b.c()), ("D", b.d())]
}

fn conditional_product(state: &State, grid: &GridSpec) -> Result<(f64, f64, f64)> {
    let vx = inference_variance_conditional_auto(state, QuadraturePair::X, grid)?.variance;
    let vp = inference_variance_conditional_auto(state, QuadraturePair::P, grid)?.variance;
    Ok((vx, vp, (vx * vp).sqrt()))
}

/// Residual variance at optimal offset and the offset used.
fn residual(m: &GaussianState, pair: QuadraturePair, g: f64) -> (f64, f64) {
    let d = optimal_offset_from(m, pair, g);
    (residual_second_moment(m, pair, g, d), d)
}

/// `Δ_inf x · Δ_inf p` against `C`.
///
/// With [`Method::Linear`], `gains = None` uses the regression gains `g*` and
/// `h*`; offsets are always optimal. The conditional method ignores `gains`
/// and only flags a violation when the grid-refinement change is smaller than
/// the margin.
pub fn reid_epr_criterion(
    state: &State,
    method: Method,
    gains: Option<(f64, f64)>,
    cfg: &CriteriaConfig,
) -> Result<CriterionReport> {
    let c = cfg.bounds.c();
    let mut report = match method {
        Method::Conditional => {
            let (vx, vp, lhs) = conditional_product(state, &cfg.grid)?;
            let (_, _, fine) = conditional_product(state, &cfg.grid.refined())?;
            let (_, _, wide) = conditional_product(state, &cfg.grid.widened())?;
            let delta = (lhs - fine).abs();
            let truncation = (lhs - wide).abs();
            let mut r = CriterionReport::new(CriterionKind::ReidProduct, lhs, c, method)
                .with_params(&[
                    ("C", c),
                    ("var_x", vx),
                    ("var_p", vp),
                    ("truncation_delta", truncation),
                ]);
            r.convergence_delta = Some(delta);
            r.violated = r.violated && GRID_SAFETY * delta.max(truncation) < r.margin();
            r
        }
        Method::Linear => {
            let m = state.moments();
            let (g, h) = match gains {
                Some(gh) => gh,
                None => (
                    optimal_gain_from(&m, QuadraturePair::X)?,
                    optimal_gain_from(&m, QuadraturePair::P)?,
                ),
            };
            let (vx, dx) = residual(&m, QuadraturePair::X, g);
            let (vp, dp) = residual(&m, QuadraturePair::P, h);
            CriterionReport::new(CriterionKind::ReidProduct, (vx * vp).sqrt(), c, method)
                .with_params(&[
                    ("C", c),
                    ("g", g),
                    ("h", h),
                    ("d_x", dx),
                    ("d_p", dp),
                    ("var_x", vx),
                    ("var_p", vp),
                ])
        }
    };
    if report.violated {
        report.notes.push(REID_NOTE.to_string());
    }
    Ok(report)
}

/// `Δ²_L x · Δ²_L p` at gains `g` (partner `x_B`) and signed `h` (partner `p_B`)
/// against `C² + g²h²D²`.
pub fn linear_product_criterion(
    state: &State,
    g: f64,
    h: f64,
    cfg: &CriteriaConfig,
) -> Result<CriterionReport> {
    Ok(linear_product_from(&state.moments(), g, h, &cfg.bounds))
}

fn linear_product_from(
    m: &GaussianState,
    g: f64,
    h: f64,
    b: &UncertaintyBounds,
) -> CriterionReport {
    let (vx, dx) = residual(m, QuadraturePair::X, g);
    let (vp, dp) = residual(m, QuadraturePair::P, h);
    let bound = b.c().powi(2) + g * g * h * h * b.d().powi(2);
    CriterionReport::new(CriterionKind::LinearProduct, vx * vp, bound, Method::Linear)
        .with_params(&[("g", g), ("h", h), ("d_x", dx), ("d_p", dp)])
        .with_params(&bound_params(b))
}

/// [`linear_product_criterion`] at the regression gains.
pub fn linear_product_optimal(state: &State, cfg: &CriteriaConfig) -> Result<CriterionReport> {
    let m = state.moments();
    let g = optimal_gain_from(&m, QuadraturePair::X)?;
    let h = optimal_gain_from(&m, QuadraturePair::P)?;
    Ok(linear_product_from(&m, g, h, &cfg.bounds))
}

/// Common gain `g` on both pairs with `q = -p_B`:
/// `<(δx - g δy)²> <(δp - g δq)²> ≥ C² + g⁴D²`.
pub fn any_g_product_criterion(
    state: &State,
    g: f64,
    cfg: &CriteriaConfig,
) -> Result<CriterionReport> {
    let m = state.moments();
    let (vx, _) = residual(&m, QuadraturePair::X, g);
    let (vp, _) = residual(&m, QuadraturePair::P_FLIPPED, g);
    let b = &cfg.bounds;
    let bound = b.c().powi(2) + g.powi(4) * b.d().powi(2);
    Ok(
        CriterionReport::new(CriterionKind::AnyGProduct, vx * vp, bound, Method::Linear)
            .with_params(&[("g", g), ("var_x", vx), ("var_p", vp)])
            .with_params(&bound_params(b)),
    )
}

/// Unit-gain squeezing test: `max(Δ²_L x, Δ²_L p) < C + D` with the sign of `h`
/// chosen to minimize `Δ²_L p`.
pub fn two_mode_squeezing_criterion(
    state: &State,
    cfg: &CriteriaConfig,
) -> Result<CriterionReport> {
    let m = state.moments();
    let (vx, _) = residual(&m, QuadraturePair::X, 1.0);
    let (vp_plus, _) = residual(&m, QuadraturePair::P, 1.0);
    let (vp_minus, _) = residual(&m, QuadraturePair::P, -1.0);
    let (vp, h) = if vp_minus <= vp_plus {
        (vp_minus, -1.0)
    } else {
        (vp_plus, 1.0)
    };
    let b = &cfg.bounds;
    let bound = b.c() + b.d();
    let mut r = CriterionReport::new(
        CriterionKind::TwoModeSqueezing,
        vx.max(vp),
        bound,
        Method::Linear,
    )
    .with_params(&[("g", 1.0), ("h", h), ("var_x", vx), ("var_p", vp)])
    .with_params(&bound_params(b));
    if r.violated {
        r.notes.push(format!(
            "both unit-gain inferred variances lie below {bound}, so Δ_L x·Δ_L p = {:.6} < {bound}",
            (vx * vp).sqrt()
        ));
    }
    Ok(r)
}

/// `Var(x_A - x_B) + Var(p_A + p_B) ≥ 2(C + D)`.
pub fn duan_sum_criterion(state: &State, cfg: &CriteriaConfig) -> Result<CriterionReport> {
    let m = state.moments();
    let (vx, _) = residual(&m, QuadraturePair::X, 1.0);
    let (vp, _) = residual(&m, QuadraturePair::P, -1.0);
    let b = &cfg.bounds;
    Ok(CriterionReport::new(
        CriterionKind::DuanSum,
        vx + vp,
        2.0 * (b.c() + b.d()),
        Method::Linear,
    )
    .with_params(&[("var_x_minus", vx), ("var_p_plus", vp)])
    .with_params(&bound_params(b)))
}

/// Every criterion: Reid (conditional and optimal linear), the linear product at
/// the regression gains and at every `(g, h)` pair from `gains`, the common-gain
/// product at every `g`, the unit-gain squeezing test and the sum witness.
/// Sorted by margin, largest first.
pub fn evaluate_all(
    state: &State,
    gains: &[f64],
    cfg: &CriteriaConfig,
) -> Result<Vec<CriterionReport>> {
    let m = state.moments();
    let mut out = vec![
        reid_epr_criterion(state, Method::Conditional, None, cfg)?,
        reid_epr_criterion(state, Method::Linear, None, cfg)?,
        linear_product_optimal(state, cfg)?,
    ];
    for &g in gains {
        for &h in gains {
            out.push(linear_product_from(&m, g, h, &cfg.bounds));
        }
        out.push(any_g_product_criterion(state, g, cfg)?);
    }
    out.push(two_mode_squeezing_criterion(state, cfg)?);
    out.push(duan_sum_criterion(state, cfg)?);
    out.sort_by(|a, b| b.margin().total_cmp(&a.margin()));
    Ok(out)
}

/// Any flagged violation in `reports`.
pub fn any_violation(reports: &[CriterionReport]) -> bool {
    reports.iter().any(|r| r.violated)
}
