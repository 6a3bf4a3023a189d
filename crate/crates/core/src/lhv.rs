//! Local hidden-variable model built from the positive Wigner function of a
//! Gaussian state.
//!
//! Each hidden state `λ = (x_A, p_A, x_B, p_B)` is a phase-space point drawn
//! from the Wigner function. The dispersion-free response model returns the
//! λ component selected by the measurement angle, so joint statistics factorize
//! per λ and reproduce the quantum quadrature marginals exactly, while every
//! hidden state has `σ_λ(x) σ_λ(p) = 0`. The smeared model attaches Gaussian
//! noise of fixed width to each response, restoring the per-state uncertainty
//! bound at the price of inflated marginals.

use std::io::Write;

use nalgebra::{Cholesky, Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::experiment::{chunked_draws, MeasurementRecord};
use crate::quadrature::{JointQuadratureDistribution, Mode, QuadratureGrid};
use crate::report::fmt_num;
use crate::states::{State, UncertaintyBounds};

/// One phase-space point; its components are the elements of reality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HiddenVariableSample {
    pub x_a: f64,
    pub p_a: f64,
    pub x_b: f64,
    pub p_b: f64,
}

impl HiddenVariableSample {
    /// Value of `x_theta` predicted at one mode.
    pub fn component(&self, mode: Mode, theta: f64) -> f64 {
        let (x, p) = match mode {
            Mode::A => (self.x_a, self.p_a),
            Mode::B => (self.x_b, self.p_b),
        };
        theta.cos() * x + theta.sin() * p
    }
}

#[derive(Clone, Debug)]
pub struct LhvEnsemble {
    samples: Vec<HiddenVariableSample>,
    source: String,
}

impl LhvEnsemble {
    pub fn new(samples: Vec<HiddenVariableSample>, source: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "hidden-variable ensemble is empty".into(),
            ));
        }
        if samples
            .iter()
            .any(|s| ![s.x_a, s.p_a, s.x_b, s.p_b].iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "hidden-variable samples must be finite".into(),
            ));
        }
        Ok(Self {
            samples,
            source: source.into(),
        })
    }

    pub fn samples(&self) -> &[HiddenVariableSample] {
        &self.samples
    }

    /// Description of the distribution ρ(λ).
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x_a,p_a,x_b,p_b")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_num(s.x_a),
                fmt_num(s.p_a),
                fmt_num(s.x_b),
                fmt_num(s.p_b)
            )?;
        }
        Ok(())
    }
}

fn sqrt_cov(cov: &Matrix4<f64>) -> Matrix4<f64> {
    match Cholesky::new(*cov) {
        Some(ch) => ch.l(),
        // semidefinite covariance: symmetric square root
        None => {
            let eig = cov.symmetric_eigen();
            let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            eig.eigenvectors * Matrix4::from_diagonal(&root) * eig.eigenvectors.transpose()
        }
    }
}

/// I.i.d. draws from the Wigner function (a 4-dimensional normal) of a Gaussian state.
pub fn wigner_sample(state: &State, n: usize, seed: u64) -> Result<LhvEnsemble> {
    let State::Gaussian(g) = state else {
        return Err(Error::Unsupported(format!(
            "Wigner sampling needs a Gaussian state (positive Wigner function), got {}",
            state.kind()
        )));
    };
    if n == 0 {
        return Err(Error::InvalidArgument("ensemble size must be >= 1".into()));
    }
    let l = sqrt_cov(g.cov());
    let mean = *g.mean();
    let samples = chunked_draws(n, seed, |rng| {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let v = mean + l * z;
        HiddenVariableSample {
            x_a: v[0],
            p_a: v[1],
            x_b: v[2],
            p_b: v[3],
        }
    });
    LhvEnsemble::new(
        samples,
        format!("Wigner function of Gaussian state, seed {seed}"),
    )
}

/// Response of one hidden state to a quadrature measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResponseModel {
    /// Outcome equals the λ component (zero variance).
    DispersionFree,
    /// Outcome is normal around the λ component with these widths for `x` and `p`.
    Smeared { sigma_x: f64, sigma_p: f64 },
}

impl ResponseModel {
    /// Standard deviation of the response to `x_theta`.
    pub fn width(&self, theta: f64) -> f64 {
        match *self {
            ResponseModel::DispersionFree => 0.0,
            ResponseModel::Smeared { sigma_x, sigma_p } => {
                ((theta.cos() * sigma_x).powi(2) + (theta.sin() * sigma_p).powi(2)).sqrt()
            }
        }
    }

    /// `σ_λ(x) σ_λ(p)` of every hidden state.
    pub fn uncertainty_product(&self) -> f64 {
        match *self {
            ResponseModel::DispersionFree => 0.0,
            ResponseModel::Smeared { sigma_x, sigma_p } => sigma_x * sigma_p,
        }
    }
}

/// Histogram of the dispersion-free predictions `(x_theta^A(λ), x_phi^B(λ))`.
pub fn lhv_predicts(
    ensemble: &LhvEnsemble,
    theta: f64,
    phi: f64,
    grid_a: &QuadratureGrid,
    grid_b: &QuadratureGrid,
) -> Result<JointQuadratureDistribution> {
    let mut counts = nalgebra::DMatrix::zeros(grid_a.n_points(), grid_b.n_points());
    for s in ensemble.samples() {
        let x = s.component(Mode::A, theta);
        let y = s.component(Mode::B, phi);
        if let (Some(i), Some(j)) = (grid_a.bin_of(x), grid_b.bin_of(y)) {
            counts[(i, j)] += 1.0;
        }
    }
    counts /= ensemble.len() as f64;
    JointQuadratureDistribution::from_masses(grid_a.clone(), grid_b.clone(), theta, phi, counts)
}

/// One measured outcome pair per hidden state under the given response model.
pub fn lhv_record(
    ensemble: &LhvEnsemble,
    theta: f64,
    phi: f64,
    model: ResponseModel,
    seed: u64,
) -> Result<MeasurementRecord> {
    let (wa, wb) = (model.width(theta), model.width(phi));
    let outcomes = match model {
        ResponseModel::DispersionFree => ensemble
            .samples()
            .iter()
            .map(|s| (s.component(Mode::A, theta), s.component(Mode::B, phi)))
            .collect(),
        ResponseModel::Smeared { .. } => {
            let noise = chunked_draws(ensemble.len(), seed, |rng| {
                (
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                )
            });
            ensemble
                .samples()
                .iter()
                .zip(noise)
                .map(|(s, (za, zb))| {
                    (
                        s.component(Mode::A, theta) + wa * za,
                        s.component(Mode::B, phi) + wb * zb,
                    )
                })
                .collect()
        }
    };
    MeasurementRecord::new(theta, phi, outcomes, seed)
}

/// Outcome of checking the per-state uncertainty proviso `σ_λ(x) σ_λ(p) ≥ C`
/// (and `≥ D` at B) over an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct ProvisoReport {
    pub n_states: usize,
    pub n_violating: usize,
    pub product_a: f64,
    pub product_b: f64,
    pub bound_a: f64,
    pub bound_b: f64,
}

impl ProvisoReport {
    pub fn fraction_violating(&self) -> f64 {
        self.n_violating as f64 / self.n_states as f64
    }

    pub fn satisfied(&self) -> bool {
        self.n_violating == 0
    }

    pub fn summary(&self) -> String {
        if self.satisfied() {
            format!(
                "all {} hidden states respect the uncertainty bound (σ(x)σ(p) = {} ≥ {}); \
                 predictions of this model must satisfy Δ_inf x·Δ_inf p ≥ C",
                self.n_states, self.product_a, self.bound_a
            )
        } else {
            format!(
                "{} of {} hidden states ({:.1}%) have σ(x)σ(p) = {} < {}: the model is a local \
                 theory whose hidden states are not quantum states",
                self.n_violating,
                self.n_states,
                100.0 * self.fraction_violating(),
                self.product_a,
                self.bound_a
            )
        }
    }
}

pub fn check_uncertainty_proviso(
    ensemble: &LhvEnsemble,
    model: ResponseModel,
    bounds: &UncertaintyBounds,
) -> ProvisoReport {
    // the response model is the same for every λ at each station
    let product = model.uncertainty_product();
    let n_violating = ensemble
        .samples()
        .iter()
        .filter(|_| product < bounds.c() || product < bounds.d())
        .count();
    ProvisoReport {
        n_states: ensemble.len(),
        n_violating,
        product_a: product,
        product_b: product,
        bound_a: bounds.c(),
        bound_b: bounds.d(),
    }
}

/// Model marginal variances against the source state, `(x_A, p_A, x_B, p_B)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReproductionCheck {
    pub quantum_variances: [f64; 4],
    pub model_variances: [f64; 4],
    /// Any model variance exceeds the quantum one by more than 3 sampling SEs.
    pub inflated: bool,
}

pub fn compare_with_source(
    ensemble: &LhvEnsemble,
    model: ResponseModel,
    state: &State,
) -> ReproductionCheck {
    let m = state.moments();
    let settings = [
        (Mode::A, 0.0),
        (Mode::A, std::f64::consts::FRAC_PI_2),
        (Mode::B, 0.0),
        (Mode::B, std::f64::consts::FRAC_PI_2),
    ];
    let n = ensemble.len() as f64;
    let mut quantum = [0.0; 4];
    let mut model_var = [0.0; 4];
    let mut inflated = false;
    for (k, (mode, theta)) in settings.into_iter().enumerate() {
        quantum[k] = m.mode_moments(mode, theta).1;
        let vals: Vec<f64> = ensemble
            .samples()
            .iter()
            .map(|s| s.component(mode, theta))
            .collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        model_var[k] = var + model.width(theta).powi(2);
        let se = quantum[k] * (2.0 / n).sqrt();
        inflated |= model_var[k] - quantum[k] > 3.0 * se;
    }
    ReproductionCheck {
        quantum_variances: quantum,
        model_variances: model_var,
        inflated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::joint_distribution_integrated;
    use crate::states::{FockDensityMatrix, GaussianState};
    use crate::stats::PairMoments;

    fn tmsv(r: f64) -> State {
        State::Gaussian(GaussianState::two_mode_squeezed_vacuum(r).unwrap())
    }

    fn sample_cov(e: &LhvEnsemble) -> Matrix4<f64> {
        let n = e.len() as f64;
        let vs: Vec<Vector4<f64>> = e
            .samples()
            .iter()
            .map(|s| Vector4::new(s.x_a, s.p_a, s.x_b, s.p_b))
            .collect();
        let mean = vs.iter().sum::<Vector4<f64>>() / n;
        vs.iter()
            .map(|v| (v - mean) * (v - mean).transpose())
            .sum::<Matrix4<f64>>()
            / n
    }

    #[test]
    fn vacuum_samples_have_unit_covariance() {
        let n = 100_000;
        let e = wigner_sample(&tmsv(0.0), n, 7).unwrap();
        let c = sample_cov(&e);
        let se_var = (2.0 / n as f64).sqrt();
        let se_cov = (1.0 / n as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let (target, se) = if i == j { (1.0, se_var) } else { (0.0, se_cov) };
                assert!(
                    (c[(i, j)] - target).abs() < 3.0 * se,
                    "({i},{j}) {}",
                    c[(i, j)]
                );
            }
        }
    }

    #[test]
    fn tmsv_samples_carry_the_correlation() {
        let n = 100_000;
        let e = wigner_sample(&tmsv(0.5), n, 3).unwrap();
        let c = sample_cov(&e);
        let (ch, sh) = (1.0f64.cosh(), 1.0f64.sinh());
        let se = ((ch * ch + sh * sh) / n as f64).sqrt();
        assert!((c[(0, 2)] - sh).abs() < 3.0 * se);
        assert!((c[(1, 3)] + sh).abs() < 3.0 * se);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = wigner_sample(&tmsv(0.5), 10_000, 42).unwrap();
        let b = wigner_sample(&tmsv(0.5), 10_000, 42).unwrap();
        let c = wigner_sample(&tmsv(0.5), 10_000, 43).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn non_gaussian_states_are_refused() {
        let f = State::Fock(FockDensityMatrix::two_mode_squeezed_vacuum(0.3, 20).unwrap());
        assert!(matches!(
            wigner_sample(&f, 10, 0),
            Err(Error::Unsupported(_))
        ));
        assert!(wigner_sample(&tmsv(0.3), 0, 0).is_err());
    }

    #[test]
    fn histogram_matches_quantum_joint() {
        let g = QuadratureGrid::symmetric(6.0, 16).unwrap();
        let e = wigner_sample(&tmsv(0.0), 100_000, 5).unwrap();
        let h = lhv_predicts(&e, 0.0, 0.0, &g, &g).unwrap();
        let q = joint_distribution_integrated(&tmsv(0.0), 0.0, 0.0, &g, &g, 8).unwrap();
        assert!(h.total_variation(&q).unwrap() < 0.02);
        // factorizes into the marginals up to sampling noise
        let pa = h.marginal_a();
        let pb = h.marginal_b();
        let prod = nalgebra::DMatrix::from_fn(16, 16, |i, j| pa[i] * pb[j]);
        assert!((h.probs() - prod).amax() < 5e-3);
    }

    #[test]
    fn dispersion_free_model_violates_proviso_everywhere() {
        let e = wigner_sample(&tmsv(0.5), 1000, 1).unwrap();
        let r = check_uncertainty_proviso(
            &e,
            ResponseModel::DispersionFree,
            &UncertaintyBounds::default(),
        );
        assert_eq!(r.n_violating, 1000);
        assert_eq!(r.fraction_violating(), 1.0);
        assert_eq!(r.product_a, 0.0);
        assert!(!r.satisfied());
        assert!(r.summary().contains("100.0%"));
        let smeared = ResponseModel::Smeared {
            sigma_x: 1.0,
            sigma_p: 1.0,
        };
        let r = check_uncertainty_proviso(&e, smeared, &UncertaintyBounds::default());
        assert!(r.satisfied());
    }

    #[test]
    fn smearing_inflates_marginals() {
        let e = wigner_sample(&tmsv(0.0), 50_000, 9).unwrap();
        let plain = compare_with_source(&e, ResponseModel::DispersionFree, &tmsv(0.0));
        assert!(!plain.inflated);
        let smeared = compare_with_source(
            &e,
            ResponseModel::Smeared {
                sigma_x: 1.0,
                sigma_p: 1.0,
            },
            &tmsv(0.0),
        );
        assert!(smeared.inflated);
        assert!(smeared
            .model_variances
            .iter()
            .all(|v| (v - 2.0).abs() < 0.05));
    }

    #[test]
    fn records_reproduce_linear_inference() {
        let e = wigner_sample(&tmsv(0.5), 100_000, 11).unwrap();
        let rec = lhv_record(&e, 0.0, 0.0, ResponseModel::DispersionFree, 0).unwrap();
        assert_eq!(rec.outcomes[0], (e.samples()[0].x_a, e.samples()[0].x_b));
        let (v, se, _) = crate::experiment::estimate_linear_inference(&rec, None, 1, 50);
        assert!((v - 1.0 / 1.0f64.cosh()).abs() < 3.0 * se, "{v} ± {se}");
        let smeared = lhv_record(
            &e,
            0.0,
            0.0,
            ResponseModel::Smeared {
                sigma_x: 1.0,
                sigma_p: 1.0,
            },
            2,
        )
        .unwrap();
        let m = PairMoments::from_pairs(&smeared.outcomes);
        assert!((m.var_x - (1.0f64.cosh() + 1.0)).abs() < 0.05);
    }

    #[test]
    fn response_widths() {
        let m = ResponseModel::Smeared {
            sigma_x: 2.0,
            sigma_p: 0.5,
        };
        assert_eq!(m.width(0.0), 2.0);
        assert!((m.width(std::f64::consts::FRAC_PI_2) - 0.5).abs() < 1e-15);
        assert_eq!(m.uncertainty_product(), 1.0);
        assert_eq!(ResponseModel::DispersionFree.width(0.3), 0.0);
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let e = wigner_sample(&tmsv(0.2), 5, 0).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_a,p_a,x_b,p_b");
        assert_eq!(lines.len(), 6);
        let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert!((first[0] - e.samples()[0].x_a).abs() < 1e-10 * e.samples()[0].x_a.abs().max(1.0));
    }
}
