//! JSON state-spec documents.
//!
//! ```json
//! {"kind": "tmsv", "r": 0.5, "cutoff": 30}
//! {"kind": "gaussian", "mean": [0, 0, 0, 0], "cov": [1, 0, 0, 0, ...]}
//! {"kind": "fock", "dim_a": 1, "dim_b": 1, "entries": [[1.0, 0.0]]}
//! {"kind": "separable_mixture", "terms": [
//!     {"weight": 1.0, "state_a": {"kind": "vacuum"}, "state_b": {"kind": "coherent", "re": 1, "im": 0}}]}
//! ```
//!
//! A `tmsv` without `cutoff` uses the Gaussian representation.

use std::path::Path;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{
    FockDensityMatrix, GaussianState, LocalState, MixtureTerm, SeparableMixture, SingleModeFock,
    SingleModeGaussian, State,
};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Tmsv {
        r: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff: Option<usize>,
    },
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<f64>,
    },
    Fock {
        dim_a: usize,
        dim_b: usize,
        entries: Vec<[f64; 2]>,
    },
    SeparableMixture {
        terms: Vec<TermSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub weight: f64,
    pub state_a: LocalSpec,
    pub state_b: LocalSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalSpec {
    Vacuum,
    Coherent { re: f64, im: f64 },
    Gaussian { mean: Vec<f64>, cov: Vec<f64> },
    Fock { dim: usize, entries: Vec<[f64; 2]> },
}

fn expect_len(what: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Spec(format!(
            "{what} needs {n} values, got {}",
            v.len()
        )));
    }
    Ok(())
}

fn complex_matrix(dim: usize, entries: &[[f64; 2]]) -> Result<DMatrix<C64>> {
    if entries.len() != dim * dim {
        return Err(Error::Spec(format!(
            "entries needs {} (re, im) pairs, got {}",
            dim * dim,
            entries.len()
        )));
    }
    Ok(DMatrix::from_row_iterator(
        dim,
        dim,
        entries.iter().map(|[re, im]| C64::new(*re, *im)),
    ))
}

impl LocalSpec {
    pub fn build(&self) -> Result<LocalState> {
        Ok(match self {
            LocalSpec::Vacuum => LocalState::Gaussian(SingleModeGaussian::vacuum()),
            LocalSpec::Coherent { re, im } => {
                LocalState::Gaussian(SingleModeGaussian::coherent(C64::new(*re, *im)))
            }
            LocalSpec::Gaussian { mean, cov } => {
                expect_len("mean", mean, 2)?;
                expect_len("cov", cov, 4)?;
                LocalState::Gaussian(SingleModeGaussian::new(
                    Vector2::from_column_slice(mean),
                    Matrix2::from_row_slice(cov),
                )?)
            }
            LocalSpec::Fock { dim, entries } => {
                LocalState::Fock(SingleModeFock::new(complex_matrix(*dim, entries)?)?)
            }
        })
    }
}

impl StateSpec {
    /// Builds and validates the state; errors name the violated invariant.
    pub fn build(&self) -> Result<State> {
        Ok(match self {
            StateSpec::Tmsv { r, cutoff: None } => {
                State::Gaussian(GaussianState::two_mode_squeezed_vacuum(*r)?)
            }
            StateSpec::Tmsv { r, cutoff: Some(c) } => {
                State::Fock(FockDensityMatrix::two_mode_squeezed_vacuum(*r, *c)?)
            }
            StateSpec::Gaussian { mean, cov } => {
                expect_len("mean", mean, 4)?;
                expect_len("cov", cov, 16)?;
                State::Gaussian(GaussianState::new(
                    Vector4::from_column_slice(mean),
                    Matrix4::from_row_slice(cov),
                )?)
            }
            StateSpec::Fock {
                dim_a,
                dim_b,
                entries,
            } => State::Fock(FockDensityMatrix::new(
                *dim_a,
                *dim_b,
                complex_matrix(dim_a * dim_b, entries)?,
            )?),
            StateSpec::SeparableMixture { terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        Ok(MixtureTerm {
                            weight: t.weight,
                            a: t.state_a.build()?,
                            b: t.state_b.build()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                State::Mixture(SeparableMixture::new(terms)?)
            }
        })
    }
}

pub fn parse_state_spec(text: &str) -> Result<State> {
    let spec: StateSpec = serde_json::from_str(text)?;
    spec.build()
}

pub fn load_state_spec(path: impl AsRef<Path>) -> Result<State> {
    parse_state_spec(&std::fs::read_to_string(path)?)
}
