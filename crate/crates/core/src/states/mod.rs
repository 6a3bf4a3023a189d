//! Two-mode states in three representations.

mod fock;
mod gaussian;
mod mixture;
pub mod spec;

pub use fock::{FockDensityMatrix, SingleModeFock, TMSV_TAIL_TOLERANCE};
pub use gaussian::{symplectic_form, GaussianParameters, GaussianState, SingleModeGaussian};
pub use mixture::{
    LocalState, MixtureFamily, MixtureTerm, SeparableMixture, LOCAL_TAIL_TOLERANCE, WEIGHT_FLOOR,
};
pub use spec::{load_state_spec, parse_state_spec, LocalSpec, StateSpec, TermSpec};

use crate::error::{Error, Result};

/// Uncertainty constants `Δx Δp ≥ C` (mode A) and `Δy Δq ≥ D` (mode B).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintyBounds {
    c: f64,
    d: f64,
}

impl UncertaintyBounds {
    pub fn new(c: f64, d: f64) -> Result<Self> {
        if !(c > 0.0 && d > 0.0) || !c.is_finite() || !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "uncertainty bounds must be positive, got C={c}, D={d}"
            )));
        }
        Ok(Self { c, d })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}

impl Default for UncertaintyBounds {
    /// `C = D = 1` for unit vacuum variance.
    fn default() -> Self {
        Self { c: 1.0, d: 1.0 }
    }
}

/// Any supported two-mode state.
#[derive(Clone, Debug)]
pub enum State {
    Fock(FockDensityMatrix),
    Gaussian(GaussianState),
    Mixture(SeparableMixture),
}

impl State {
    /// Exact first moments and symmetrized covariance.
    pub fn moments(&self) -> GaussianState {
        match self {
            State::Fock(f) => f.moments(),
            State::Gaussian(g) => g.clone(),
            State::Mixture(m) => m.moments(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            State::Fock(_) => "fock",
            State::Gaussian(_) => "gaussian",
            State::Mixture(_) => "separable_mixture",
        }
    }
}

impl From<FockDensityMatrix> for State {
    fn from(s: FockDensityMatrix) -> Self {
        State::Fock(s)
    }
}

impl From<GaussianState> for State {
    fn from(s: GaussianState) -> Self {
        State::Gaussian(s)
    }
}

impl From<SeparableMixture> for State {
    fn from(s: SeparableMixture) -> Self {
        State::Mixture(s)
    }
}

/// Partial-transpose separability diagnostic, used as an independent check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PptDiagnostic {
    /// Smallest eigenvalue of the partially transposed density matrix.
    Fock { min_eigenvalue: f64 },
    /// Smaller symplectic eigenvalue of the partially transposed covariance.
    Gaussian { min_symplectic: f64 },
}

impl PptDiagnostic {
    /// Whether the diagnostic certifies entanglement beyond `tol`.
    pub fn entangled(&self, tol: f64) -> bool {
        match *self {
            PptDiagnostic::Fock { min_eigenvalue } => min_eigenvalue < -tol,
            PptDiagnostic::Gaussian { min_symplectic } => min_symplectic < 1.0 - tol,
        }
    }
}

/// Cutoffs tried when a mixture must be converted to Fock form.
const MIXTURE_PPT_CUTOFFS: [usize; 4] = [10, 15, 20, 30];

/// PPT diagnostic for any state. Mixtures are converted to Fock form at the
/// smallest cutoff that keeps every local tail below the tolerance.
pub fn ppt_diagnostic(state: &State) -> Result<PptDiagnostic> {
    match state {
        State::Fock(f) => Ok(PptDiagnostic::Fock {
            min_eigenvalue: f.ppt_min_eigenvalue(),
        }),
        State::Gaussian(g) => Ok(PptDiagnostic::Gaussian {
            min_symplectic: g.partial_transpose_min_symplectic(),
        }),
        State::Mixture(m) => {
            let mut last = None;
            for cutoff in MIXTURE_PPT_CUTOFFS {
                match m.to_density(cutoff, cutoff) {
                    Ok(rho) => {
                        return Ok(PptDiagnostic::Fock {
                            min_eigenvalue: rho.ppt_min_eigenvalue(),
                        })
                    }
                    Err(e @ Error::Truncation { .. }) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("cutoff list is nonempty"))
        }
    }
}

/// Fock-basis two-mode squeezed vacuum with `cutoff` levels per mode.
pub fn make_two_mode_squeezed_vacuum(r: f64, cutoff: usize) -> Result<FockDensityMatrix> {
    FockDensityMatrix::two_mode_squeezed_vacuum(r, cutoff)
}

/// Closed-form Gaussian moments of the two-mode squeezed vacuum.
pub fn make_gaussian_tmsv(r: f64) -> Result<GaussianState> {
    GaussianState::two_mode_squeezed_vacuum(r)
}

pub fn make_separable_random(
    n_terms: usize,
    seed: u64,
    family: MixtureFamily,
) -> Result<SeparableMixture> {
    SeparableMixture::random(n_terms, seed, family)
}

pub fn mixture_to_density(
    m: &SeparableMixture,
    cutoff_a: usize,
    cutoff_b: usize,
) -> Result<FockDensityMatrix> {
    m.to_density(cutoff_a, cutoff_b)
}

pub fn fock_to_gaussian_moments(rho: &FockDensityMatrix) -> GaussianState {
    rho.moments()
}
