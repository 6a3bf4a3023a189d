//! Virtual homodyne experiment: finite records drawn from the exact quantum
//! statistics, and criteria estimated from them with bootstrap errors.
//!
//! The x-pair `(x_A, x_B)` and p-pair `(p_A, ±p_B)` are incompatible settings,
//! so they live in separate records and estimates combine the two.

use std::f64::consts::FRAC_PI_2;
use std::io::{BufRead, Write};

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::criteria::{CriterionKind, CriterionReport};
use crate::error::{Error, Result};
use crate::inference::Method;
use crate::quadrature::{joint_distribution_auto, GridSpec};
use crate::report::fmt_num;
use crate::states::{LocalState, State, UncertaintyBounds};
use crate::stats::{
    binned_conditional_variance, bootstrap_standard_errors, PairMoments, BOOTSTRAP_RESAMPLES,
};

/// Shots per independently seeded sampling stream.
const CHUNK: usize = 4096;
/// Conditional estimates need this many populated conditioning bins.
pub const MIN_EFFECTIVE_BINS: usize = 100;
/// Upper limit on conditioning bins.
pub const MAX_CONDITIONING_BINS: usize = 256;
/// A conditioning bin counts as populated with at least this many shots.
pub const MIN_BIN_SHOTS: usize = 10;
/// Violations are flagged when the margin exceeds this many standard errors.
pub const SIGNIFICANCE_SE: f64 = 3.0;
const ANGLE_TOL: f64 = 1e-9;

/// Outcome pairs `(x at A, y at B)` for one fixed pair of settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub theta: f64,
    pub phi: f64,
    pub outcomes: Vec<(f64, f64)>,
    pub seed: u64,
}

impl MeasurementRecord {
    pub fn new(theta: f64, phi: f64, outcomes: Vec<(f64, f64)>, seed: u64) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidArgument("measurement record is empty".into()));
        }
        if outcomes
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::InvalidArgument(
                "measurement record has non-finite outcomes".into(),
            ));
        }
        Ok(Self {
            theta,
            phi,
            outcomes,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Header comment naming settings and seed, then `x,y` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# theta={} phi={} seed={}",
            fmt_num(self.theta),
            fmt_num(self.phi),
            self.seed
        )?;
        writeln!(w, "x,y")?;
        for (x, y) in &self.outcomes {
            writeln!(w, "{},{}", fmt_num(*x), fmt_num(*y))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("record CSV: {msg}"));
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("missing header"))??;
        let mut theta = None;
        let mut phi = None;
        let mut seed = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("theta", v)) => theta = v.parse().ok(),
                Some(("phi", v)) => phi = v.parse().ok(),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => {}
            }
        }
        let (theta, phi, seed) = match (theta, phi, seed) {
            (Some(t), Some(p), Some(s)) => (t, p, s),
            _ => return Err(bad("header must carry theta, phi and seed")),
        };
        let mut outcomes = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "x,y" {
                continue;
            }
            let (x, y) = line.split_once(',').ok_or_else(|| bad("expected x,y"))?;
            let x: f64 = x.trim().parse().map_err(|_| bad("unparsable x"))?;
            let y: f64 = y.trim().parse().map_err(|_| bad("unparsable y"))?;
            outcomes.push((x, y));
        }
        Self::new(theta, phi, outcomes, seed)
    }
}

/// Per-shot sampler for one pair of settings.
enum Sampler {
    Normal {
        mean: [f64; 2],
        chol: Matrix2<f64>,
    },
    ProductNormals {
        cumulative: Vec<f64>,
        terms: Vec<([f64; 2], [f64; 2])>,
    },
    Grid {
        cumulative: Vec<f64>,
        xs: Vec<f64>,
        ys: Vec<f64>,
        wx: f64,
        wy: f64,
        ny: usize,
    },
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

impl Sampler {
    fn build(state: &State, theta: f64, phi: f64, grid: &GridSpec) -> Result<Self> {
        match state {
            State::Gaussian(g) => {
                let (mean, cov) = g.quadrature_moments(theta, phi);
                let a = cov[(0, 0)].max(0.0).sqrt();
                let b = if a > 0.0 { cov[(0, 1)] / a } else { 0.0 };
                let c = (cov[(1, 1)] - b * b).max(0.0).sqrt();
                Ok(Sampler::Normal {
                    mean: [mean[0], mean[1]],
                    chol: Matrix2::new(a, 0.0, b, c),
                })
            }
            State::Mixture(m)
                if m.terms().iter().all(|t| {
                    matches!(
                        (&t.a, &t.b),
                        (LocalState::Gaussian(_), LocalState::Gaussian(_))
                    )
                }) =>
            {
                let mut acc = 0.0;
                let mut cumulative = Vec::new();
                let mut terms = Vec::new();
                for t in m.terms() {
                    acc += t.weight;
                    cumulative.push(acc);
                    let (ma, va) = t.a.quadrature_moments(theta);
                    let (mb, vb) = t.b.quadrature_moments(phi);
                    terms.push(([ma, va.sqrt()], [mb, vb.sqrt()]));
                }
                Ok(Sampler::ProductNormals { cumulative, terms })
            }
            _ => {
                let joint = joint_distribution_auto(state, theta, phi, grid)?;
                let mut acc = 0.0;
                // row-major over (x bin, y bin)
                let cumulative = joint
                    .probs()
                    .transpose()
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Ok(Sampler::Grid {
                    cumulative,
                    xs: joint.grid_a.centers(),
                    ys: joint.grid_b.centers(),
                    wx: joint.grid_a.width(),
                    wy: joint.grid_b.width(),
                    ny: joint.grid_b.n_points(),
                })
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self {
            Sampler::Normal { mean, chol } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                (
                    mean[0] + chol[(0, 0)] * z1,
                    mean[1] + chol[(1, 0)] * z1 + chol[(1, 1)] * z2,
                )
            }
            Sampler::ProductNormals { cumulative, terms } => {
                let (a, b) = terms[pick(cumulative, rng.random::<f64>())];
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                (a[0] + a[1] * z1, b[0] + b[1] * z2)
            }
            Sampler::Grid {
                cumulative,
                xs,
                ys,
                wx,
                wy,
                ny,
            } => {
                let k = pick(
                    cumulative,
                    rng.random::<f64>() * cumulative[cumulative.len() - 1],
                );
                let (i, j) = (k / ny, k % ny);
                (
                    xs[i] + wx * (rng.random::<f64>() - 0.5),
                    ys[j] + wy * (rng.random::<f64>() - 0.5),
                )
            }
        }
    }
}

/// `n` draws split over independently seeded streams of [`CHUNK`] shots.
pub(crate) fn chunked_draws<T, F>(n: usize, seed: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// I.i.d. outcome pairs of `x_theta` at A and `x_phi` at B. Gaussian states
/// (and mixtures of Gaussian products) are sampled directly; other states by
/// inverse CDF over the gridded joint distribution with uniform jitter inside
/// the chosen bin.
pub fn run_experiment(
    state: &State,
    theta: f64,
    phi: f64,
    n_shots: usize,
    seed: u64,
    grid: &GridSpec,
) -> Result<MeasurementRecord> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("n_shots must be >= 1".into()));
    }
    let sampler = Sampler::build(state, theta, phi, grid)?;
    let outcomes = chunked_draws(n_shots, seed, |rng| sampler.draw(rng));
    MeasurementRecord::new(theta, phi, outcomes, seed)
}

/// Options for [`estimate_criteria`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateOptions {
    /// Fixed `(g, h)`; `None` uses the empirical regression gains.
    pub gains: Option<(f64, f64)>,
    /// Common gain for the any-g product.
    pub any_g: f64,
    pub bounds: UncertaintyBounds,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            gains: None,
            any_g: 1.0,
            bounds: UncertaintyBounds::default(),
            resamples: BOOTSTRAP_RESAMPLES,
            seed: 0,
        }
    }
}

/// A sample-based criterion with its bootstrap standard error. `report.violated`
/// is set only when the margin exceeds [`SIGNIFICANCE_SE`] standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionEstimate {
    pub report: CriterionReport,
    pub se: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimateSummary {
    pub estimates: Vec<CriterionEstimate>,
    pub warnings: Vec<String>,
}

impl EstimateSummary {
    pub fn get(&self, kind: CriterionKind, method: Method) -> Option<&CriterionEstimate> {
        self.estimates
            .iter()
            .find(|e| e.report.kind == kind && e.report.method == method)
    }
}

fn conditioning_bins(n: usize) -> usize {
    ((n as f64).sqrt() as usize).min(MAX_CONDITIONING_BINS)
}

fn populated_bins(n: usize) -> usize {
    let k = conditioning_bins(n);
    if k == 0 || n / k < MIN_BIN_SHOTS {
        0
    } else {
        k
    }
}

/// Empirical linear inference variance of one record: value, bootstrap SE and gain.
/// `gain = None` re-estimates the regression gain in every replicate.
pub fn estimate_linear_inference(
    record: &MeasurementRecord,
    gain: Option<f64>,
    seed: u64,
    resamples: usize,
) -> (f64, f64, f64) {
    let stat = |pairs: &[(f64, f64)]| {
        let m = PairMoments::from_pairs(pairs);
        m.residual_variance(gain.unwrap_or_else(|| m.regression_gain()))
    };
    let m = PairMoments::from_pairs(&record.outcomes);
    let g = gain.unwrap_or_else(|| m.regression_gain());
    let se =
        bootstrap_standard_errors(seed, resamples, &record.outcomes, &[], |a, _| vec![stat(a)])[0];
    (stat(&record.outcomes), se, g)
}

fn check_settings(x: &MeasurementRecord, p: &MeasurementRecord) -> Result<f64> {
    let near = |a: f64, b: f64| (a - b).abs() < ANGLE_TOL;
    if !(near(x.theta, 0.0) && near(x.phi, 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "x-record must measure (x_A, x_B), got angles ({}, {})",
            x.theta, x.phi
        )));
    }
    if !(near(p.theta, FRAC_PI_2) && (near(p.phi, FRAC_PI_2) || near(p.phi, -FRAC_PI_2))) {
        return Err(Error::InvalidArgument(format!(
            "p-record must measure (p_A, ±p_B), got angles ({}, {})",
            p.theta, p.phi
        )));
    }
    // y = s p_B
    Ok(p.phi.sin().signum())
}

/// Sample versions of every criterion from an x-record and a p-record.
pub fn estimate_criteria(
    x_record: &MeasurementRecord,
    p_record: &MeasurementRecord,
    opts: &EstimateOptions,
) -> Result<EstimateSummary> {
    let s = check_settings(x_record, p_record)?;
    let (xs, ps) = (&x_record.outcomes, &p_record.outcomes);
    let mut warnings = Vec::new();

    let bins_x = populated_bins(xs.len());
    let bins_p = populated_bins(ps.len());
    let conditional_ok = bins_x >= MIN_EFFECTIVE_BINS && bins_p >= MIN_EFFECTIVE_BINS;
    if !conditional_ok {
        warnings.push(format!(
            "conditional estimate suppressed: {} / {} populated conditioning bins, need {MIN_EFFECTIVE_BINS}",
            bins_x, bins_p
        ));
    }

    let mx = PairMoments::from_pairs(xs);
    let mp = PairMoments::from_pairs(ps);
    // gains expressed against the recorded partner y = s p_B
    let (g_lin, h_lin) = match opts.gains {
        Some((g, h)) => (g, h),
        None => (mx.regression_gain(), s * mp.regression_gain()),
    };
    let h_sign = if mp.residual_variance(-s) <= mp.residual_variance(s) {
        -1.0
    } else {
        1.0
    };
    let b = opts.bounds;
    let (c, d) = (b.c(), b.d());
    let any_g = opts.any_g;

    let stat = |xs: &[(f64, f64)], ps: &[(f64, f64)]| -> Vec<f64> {
        let mx = PairMoments::from_pairs(xs);
        let mp = PairMoments::from_pairs(ps);
        let (gx, gp) = match opts.gains {
            Some((g, h)) => (g, s * h),
            None => (mx.regression_gain(), mp.regression_gain()),
        };
        let reid_linear = (mx.residual_variance(gx) * mp.residual_variance(gp)).sqrt();
        let reid_conditional = if conditional_ok {
            let (cx, _) = binned_conditional_variance(xs, conditioning_bins(xs.len()));
            let (cp, _) = binned_conditional_variance(ps, conditioning_bins(ps.len()));
            (cx * cp).sqrt()
        } else {
            f64::NAN
        };
        let linear_product = mx.residual_variance(g_lin) * mp.residual_variance(s * h_lin);
        // q = -p_B, residual p_A - g q = p_A + g p_B = p_A + g s y
        let any_g_product = mx.residual_variance(any_g) * mp.residual_variance(-any_g * s);
        let tms = mx
            .residual_variance(1.0)
            .max(mp.residual_variance(s * h_sign));
        let duan = mx.residual_variance(1.0) + mp.residual_variance(-s);
        vec![
            reid_linear,
            reid_conditional,
            linear_product,
            any_g_product,
            tms,
            duan,
        ]
    };

    let point = stat(xs, ps);
    let se = bootstrap_standard_errors(opts.seed, opts.resamples, xs, ps, stat);

    let entries: [(CriterionKind, Method, f64, Vec<(&str, f64)>); 6] = [
        (
            CriterionKind::ReidProduct,
            Method::Linear,
            c,
            vec![("C", c)],
        ),
        (
            CriterionKind::ReidProduct,
            Method::Conditional,
            c,
            vec![("C", c)],
        ),
        (
            CriterionKind::LinearProduct,
            Method::Linear,
            c * c + g_lin * g_lin * h_lin * h_lin * d * d,
            vec![("g", g_lin), ("h", h_lin), ("C", c), ("D", d)],
        ),
        (
            CriterionKind::AnyGProduct,
            Method::Linear,
            c * c + any_g.powi(4) * d * d,
            vec![("g", any_g), ("C", c), ("D", d)],
        ),
        (
            CriterionKind::TwoModeSqueezing,
            Method::Linear,
            c + d,
            vec![("g", 1.0), ("h", h_sign), ("C", c), ("D", d)],
        ),
        (
            CriterionKind::DuanSum,
            Method::Linear,
            2.0 * (c + d),
            vec![("C", c), ("D", d)],
        ),
    ];

    let mut estimates = Vec::new();
    for (i, (kind, method, bound, params)) in entries.into_iter().enumerate() {
        if !point[i].is_finite() {
            continue;
        }
        let margin = bound - point[i];
        let report = CriterionReport {
            kind,
            lhs: point[i],
            bound,
            violated: margin > SIGNIFICANCE_SE * se[i],
            params: params
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            method,
            convergence_delta: None,
            notes: Vec::new(),
        };
        estimates.push(CriterionEstimate { report, se: se[i] });
    }
    Ok(EstimateSummary {
        estimates,
        warnings,
    })
}
