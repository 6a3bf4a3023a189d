use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::states::gaussian::GaussianParameters;
use crate::states::{FockDensityMatrix, GaussianState, SingleModeFock, SingleModeGaussian};
use crate::C64;

pub(crate) const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Terms lighter than this are dropped and the rest renormalized.
pub const WEIGHT_FLOOR: f64 = 1e-14;
/// Tail mass allowed when converting local Gaussian states to Fock form.
pub const LOCAL_TAIL_TOLERANCE: f64 = 1e-8;

/// One local (single-mode) state of a product term.
#[derive(Clone, Debug)]
pub enum LocalState {
    Fock(SingleModeFock),
    Gaussian(SingleModeGaussian),
}

impl LocalState {
    pub fn moments(&self) -> (Vector2<f64>, Matrix2<f64>) {
        match self {
            LocalState::Fock(f) => f.moments(),
            LocalState::Gaussian(g) => (*g.mean(), *g.cov()),
        }
    }

    /// Mean and variance of `x_theta`.
    pub fn quadrature_moments(&self, theta: f64) -> (f64, f64) {
        let (m, c) = self.moments();
        let u = Vector2::new(theta.cos(), theta.sin());
        (u.dot(&m), u.dot(&(c * u)))
    }

    pub fn quadrature_density(&self, theta: f64, xs: &[f64]) -> Vec<f64> {
        match self {
            LocalState::Fock(f) => f.quadrature_density(theta, xs),
            LocalState::Gaussian(g) => g.quadrature_density(theta, xs),
        }
    }

    /// Density matrix with exactly `cutoff` levels and the discarded tail mass.
    pub fn to_fock_matrix(&self, cutoff: usize) -> Result<(DMatrix<C64>, f64)> {
        match self {
            LocalState::Fock(f) => {
                let (m, tail) = f.resized(cutoff);
                if tail > LOCAL_TAIL_TOLERANCE {
                    return Err(Error::Truncation {
                        tail,
                        tolerance: LOCAL_TAIL_TOLERANCE,
                    });
                }
                let tr: f64 = (0..cutoff).map(|i| m[(i, i)].re).sum();
                Ok((m / C64::new(tr, 0.0), tail))
            }
            LocalState::Gaussian(g) => {
                let f = g.to_fock(cutoff, LOCAL_TAIL_TOLERANCE)?;
                Ok((f.matrix().clone(), 0.0))
            }
        }
    }
}

/// One product term `P_r ρ_r^A ⊗ ρ_r^B`.
#[derive(Clone, Debug)]
pub struct MixtureTerm {
    pub weight: f64,
    pub a: LocalState,
    pub b: LocalState,
}

/// Explicitly separable two-mode state `Σ_r P_r ρ_r^A ⊗ ρ_r^B`.
#[derive(Clone, Debug)]
pub struct SeparableMixture {
    terms: Vec<MixtureTerm>,
}

/// Local-state family used by [`SeparableMixture::random`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixtureFamily {
    /// Displaced squeezed thermal states.
    Gaussian,
    /// Random low-rank density matrices with at most 8 levels.
    Fock,
}

impl SeparableMixture {
    /// Weights must be positive and sum to one; terms below [`WEIGHT_FLOOR`] are dropped.
    pub fn new(terms: Vec<MixtureTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Weights("mixture has no terms".into()));
        }
        if let Some(t) = terms.iter().find(|t| !(t.weight >= 0.0) || t.weight > 1.0) {
            return Err(Error::Weights(format!(
                "weight {} outside [0, 1]",
                t.weight
            )));
        }
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Weights(format!(
                "weights sum to {total:.15}, expected 1"
            )));
        }
        let mut kept: Vec<MixtureTerm> = terms
            .into_iter()
            .filter(|t| t.weight >= WEIGHT_FLOOR)
            .collect();
        let kept_total: f64 = kept.iter().map(|t| t.weight).sum();
        for t in &mut kept {
            t.weight /= kept_total;
        }
        Ok(Self { terms: kept })
    }

    /// Single product state.
    pub fn product(a: LocalState, b: LocalState) -> Self {
        Self {
            terms: vec![MixtureTerm { weight: 1.0, a, b }],
        }
    }

    pub fn terms(&self) -> &[MixtureTerm] {
        &self.terms
    }

    /// Deterministic random mixture of `n_terms` product states.
    pub fn random(n_terms: usize, seed: u64, family: MixtureFamily) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::InvalidArgument("n_terms must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n_terms).map(|_| 1.0 - rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut terms = Vec::with_capacity(n_terms);
        for w in raw {
            let a = random_local(&mut rng, family)?;
            let b = random_local(&mut rng, family)?;
            terms.push(MixtureTerm {
                weight: w / total,
                a,
                b,
            });
        }
        Ok(Self { terms })
    }

    /// `w * self + (1 - w) * other`.
    pub fn merge(&self, other: &SeparableMixture, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Weights(format!("merge weight {w} outside [0, 1]")));
        }
        let scaled = |m: &SeparableMixture, s: f64| {
            m.terms
                .iter()
                .map(move |t| MixtureTerm {
                    weight: t.weight * s,
                    ..t.clone()
                })
                .collect::<Vec<_>>()
        };
        let mut terms = scaled(self, w);
        terms.extend(scaled(other, 1.0 - w));
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        for t in &mut terms {
            t.weight /= total;
        }
        Self::new(terms)
    }

    /// Global first and second moments.
    pub fn moments(&self) -> GaussianState {
        let mut mean = Vector4::zeros();
        let mut second = Matrix4::zeros();
        for t in &self.terms {
            let (ma, ca) = t.a.moments();
            let (mb, cb) = t.b.moments();
            let mut m = Vector4::zeros();
            m.fixed_rows_mut::<2>(0).copy_from(&ma);
            m.fixed_rows_mut::<2>(2).copy_from(&mb);
            let mut c = Matrix4::zeros();
            c.fixed_view_mut::<2, 2>(0, 0).copy_from(&ca);
            c.fixed_view_mut::<2, 2>(2, 2).copy_from(&cb);
            mean += m * t.weight;
            second += (c + m * m.transpose()) * t.weight;
        }
        GaussianState::from_moments_unchecked(mean, second - mean * mean.transpose())
    }

    /// `Σ_r P_r σ_r²(x_theta)` over the local states of one mode.
    pub fn mean_local_variance(&self, mode: crate::quadrature::Mode, theta: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let local = match mode {
                    crate::quadrature::Mode::A => &t.a,
                    crate::quadrature::Mode::B => &t.b,
                };
                t.weight * local.quadrature_moments(theta).1
            })
            .sum()
    }

    /// Flattened density matrix `Σ_r P_r ρ_r^A ⊗ ρ_r^B` with the given cutoffs.
    pub fn to_density(&self, cutoff_a: usize, cutoff_b: usize) -> Result<FockDensityMatrix> {
        if cutoff_a == 0 || cutoff_b == 0 {
            return Err(Error::InvalidArgument("cutoffs must be positive".into()));
        }
        let dim = cutoff_a * cutoff_b;
        let mut entries = DMatrix::<C64>::zeros(dim, dim);
        for t in &self.terms {
            let (ra, _) = t.a.to_fock_matrix(cutoff_a)?;
            let (rb, _) = t.b.to_fock_matrix(cutoff_b)?;
            entries += ra.kronecker(&rb) * C64::new(t.weight, 0.0);
        }
        let tr: f64 = (0..dim).map(|i| entries[(i, i)].re).sum();
        entries /= C64::new(tr, 0.0);
        Ok(FockDensityMatrix::from_entries_unchecked(
            cutoff_a, cutoff_b, entries,
        ))
    }
}

fn random_local(rng: &mut ChaCha8Rng, family: MixtureFamily) -> Result<LocalState> {
    match family {
        MixtureFamily::Gaussian => {
            let params = GaussianParameters {
                alpha: C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                r: rng.random_range(0.0..0.6),
                phi: rng.random_range(0.0..2.0 * PI),
                nbar: rng.random_range(0.0..0.5),
            };
            Ok(LocalState::Gaussian(SingleModeGaussian::from_parameters(
                params,
            )?))
        }
        MixtureFamily::Fock => {
            let dim = rng.random_range(2..=8usize);
            let rank = rng.random_range(1..=2usize);
            let mut rho = DMatrix::<C64>::zeros(dim, dim);
            for _ in 0..rank {
                let v = DVector::from_fn(dim, |_, _| {
                    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                let v = &v / C64::new(v.norm(), 0.0);
                let w = 1.0 - rng.random::<f64>();
                rho += &v * v.adjoint() * C64::new(w, 0.0);
            }
            let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
            rho /= C64::new(tr, 0.0);
            // exact Hermitian symmetrization against rounding
            let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
            Ok(LocalState::Fock(SingleModeFock::new(rho)?))
        }
    }
}
