use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::quadrature::Mode;
use crate::states::fock::{Ladder, SingleModeFock};
use crate::C64;

pub(crate) const SYMMETRY_TOL: f64 = 1e-12;
pub(crate) const PHYSICAL_TOL: f64 = 1e-10;

/// Standard two-mode symplectic form in `(x_A, p_A, x_B, p_B)` order.
pub fn symplectic_form() -> Matrix4<f64> {
    let mut omega = Matrix4::zeros();
    omega[(0, 1)] = 1.0;
    omega[(1, 0)] = -1.0;
    omega[(2, 3)] = 1.0;
    omega[(3, 2)] = -1.0;
    omega
}

fn max_asymmetry<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..N {
        for j in i + 1..N {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn symmetrize<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> nalgebra::SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Normal density of `(x - mean)` with variance `var`.
pub(crate) fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / var).exp() / (2.0 * PI * var).sqrt()
}

/// Two-mode Gaussian state given by its first moments and symmetrized covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: Vector4<f64>,
    cov: Matrix4<f64>,
}

impl GaussianState {
    /// Validates symmetry and `cov + iΩ ≥ 0`.
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("moments must be finite".into()));
        }
        let asym = max_asymmetry(&cov);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let state = Self {
            mean,
            cov: symmetrize(&cov),
        };
        let min = state.uncertainty_min_eigenvalue();
        if min < -PHYSICAL_TOL * cov.norm().max(1.0) {
            return Err(Error::Uncertainty(min));
        }
        Ok(state)
    }

    pub(crate) fn from_moments_unchecked(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self {
            mean,
            cov: symmetrize(&cov),
        }
    }

    pub fn vacuum() -> Self {
        Self {
            mean: Vector4::zeros(),
            cov: Matrix4::identity(),
        }
    }

    /// Closed-form moments of the two-mode squeezed vacuum: x-quadratures
    /// correlated, p-quadratures anticorrelated.
    pub fn two_mode_squeezed_vacuum(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "squeezing must be >= 0, got {r}"
            )));
        }
        let c = (2.0 * r).cosh();
        let s = (2.0 * r).sinh();
        #[rustfmt::skip]
        let cov = Matrix4::new(
            c,   0.0, s,   0.0,
            0.0, c,   0.0, -s,
            s,   0.0, c,   0.0,
            0.0, -s,  0.0, c,
        );
        Ok(Self {
            mean: Vector4::zeros(),
            cov,
        })
    }

    /// Product of two single-mode Gaussian states.
    pub fn product(a: &SingleModeGaussian, b: &SingleModeGaussian) -> Self {
        let mut mean = Vector4::zeros();
        let mut cov = Matrix4::zeros();
        mean.fixed_rows_mut::<2>(0).copy_from(&a.mean);
        mean.fixed_rows_mut::<2>(2).copy_from(&b.mean);
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&a.cov);
        cov.fixed_view_mut::<2, 2>(2, 2).copy_from(&b.cov);
        Self { mean, cov }
    }

    pub fn mean(&self) -> &Vector4<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix4<f64> {
        &self.cov
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + iΩ`.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let omega = symplectic_form();
        let m = DMatrix::from_fn(4, 4, |i, j| C64::new(self.cov[(i, j)], omega[(i, j)]));
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Smaller symplectic eigenvalue of the partially transposed covariance;
    /// below 1 (vacuum units) iff the state is entangled.
    pub fn partial_transpose_min_symplectic(&self) -> f64 {
        let a = self.cov.fixed_view::<2, 2>(0, 0).determinant();
        let b = self.cov.fixed_view::<2, 2>(2, 2).determinant();
        let c = self.cov.fixed_view::<2, 2>(0, 2).determinant();
        let tilde = a + b - 2.0 * c;
        let det = self.cov.determinant();
        ((tilde - (tilde * tilde - 4.0 * det).max(0.0).sqrt()) / 2.0)
            .max(0.0)
            .sqrt()
    }

    /// Coefficient vector of `x_theta` at mode A or B.
    pub(crate) fn quadrature_vector(mode: Mode, theta: f64) -> Vector4<f64> {
        let (c, s) = (theta.cos(), theta.sin());
        match mode {
            Mode::A => Vector4::new(c, s, 0.0, 0.0),
            Mode::B => Vector4::new(0.0, 0.0, c, s),
        }
    }

    /// Mean and covariance of `(x_theta^A, x_phi^B)`.
    pub fn quadrature_moments(&self, theta: f64, phi: f64) -> (Vector2<f64>, Matrix2<f64>) {
        let u = Self::quadrature_vector(Mode::A, theta);
        let v = Self::quadrature_vector(Mode::B, phi);
        let mean = Vector2::new(u.dot(&self.mean), v.dot(&self.mean));
        let cu = self.cov * u;
        let cv = self.cov * v;
        let cov = Matrix2::new(u.dot(&cu), u.dot(&cv), v.dot(&cu), v.dot(&cv));
        (mean, cov)
    }

    /// Mean and variance of `x_theta` at one mode.
    pub fn mode_moments(&self, mode: Mode, theta: f64) -> (f64, f64) {
        let u = Self::quadrature_vector(mode, theta);
        (u.dot(&self.mean), u.dot(&(self.cov * u)))
    }

    /// Reduced single-mode state.
    pub fn local(&self, mode: Mode) -> SingleModeGaussian {
        let k = match mode {
            Mode::A => 0,
            Mode::B => 2,
        };
        SingleModeGaussian {
            mean: self.mean.fixed_rows::<2>(k).into_owned(),
            cov: self.cov.fixed_view::<2, 2>(k, k).into_owned(),
        }
    }
}

/// Parameters of a displaced squeezed thermal state `D(α) S(r e^{iφ}) ρ_th(n̄) S† D†`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParameters {
    pub alpha: C64,
    pub r: f64,
    pub phi: f64,
    pub nbar: f64,
}

/// Single-mode Gaussian state.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeGaussian {
    mean: Vector2<f64>,
    cov: Matrix2<f64>,
}

impl SingleModeGaussian {
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("moments must be finite".into()));
        }
        let asym = max_asymmetry(&cov);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let state = Self {
            mean,
            cov: symmetrize(&cov),
        };
        let min = state.uncertainty_min_eigenvalue();
        if min < -PHYSICAL_TOL * cov.norm().max(1.0) {
            return Err(Error::Uncertainty(min));
        }
        Ok(state)
    }

    pub fn vacuum() -> Self {
        Self {
            mean: Vector2::zeros(),
            cov: Matrix2::identity(),
        }
    }

    /// Coherent state `|α>`: mean `(2 Re α, 2 Im α)`, unit covariance.
    pub fn coherent(alpha: C64) -> Self {
        Self {
            mean: Vector2::new(2.0 * alpha.re, 2.0 * alpha.im),
            cov: Matrix2::identity(),
        }
    }

    pub fn from_parameters(p: GaussianParameters) -> Result<Self> {
        if !(p.r >= 0.0 && p.nbar >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "squeezing and thermal occupation must be >= 0, got r={}, nbar={}",
                p.r, p.nbar
            )));
        }
        let nu = 2.0 * p.nbar + 1.0;
        let beta = 0.5 * p.phi;
        let e1 = Vector2::new(beta.cos(), beta.sin());
        let e2 = Vector2::new(-beta.sin(), beta.cos());
        let cov = (e1 * e1.transpose() * (-2.0 * p.r).exp()
            + e2 * e2.transpose() * (2.0 * p.r).exp())
            * nu;
        Self::new(Vector2::new(2.0 * p.alpha.re, 2.0 * p.alpha.im), cov)
    }

    /// Williamson decomposition of the moments.
    pub fn parameters(&self) -> GaussianParameters {
        let (a, b, c) = (self.cov[(0, 0)], self.cov[(0, 1)], self.cov[(1, 1)]);
        let nu = (a * c - b * b).max(1.0).sqrt();
        let half_tr = 0.5 * (a + c) / nu;
        // eigenvalues of cov/nu are e^{±2r}
        let r = 0.5 * (half_tr + (half_tr * half_tr - 1.0).max(0.0).sqrt()).ln();
        // squeezed direction: eigenvector of the smaller eigenvalue
        let angle = 0.5 * (2.0 * b).atan2(a - c); // major-axis angle
        let beta = angle + 0.5 * PI;
        GaussianParameters {
            alpha: C64::new(0.5 * self.mean[0], 0.5 * self.mean[1]),
            r,
            phi: 2.0 * beta,
            nbar: 0.5 * (nu - 1.0),
        }
    }

    pub fn mean(&self) -> &Vector2<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix2<f64> {
        &self.cov
    }

    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let (a, b, c) = (self.cov[(0, 0)], self.cov[(0, 1)], self.cov[(1, 1)]);
        0.5 * (a + c) - ((0.5 * (a - c)).powi(2) + b * b + 1.0).sqrt()
    }

    pub fn quadrature_moments(&self, theta: f64) -> (f64, f64) {
        let u = Vector2::new(theta.cos(), theta.sin());
        (u.dot(&self.mean), u.dot(&(self.cov * u)))
    }

    pub fn quadrature_density(&self, theta: f64, xs: &[f64]) -> Vec<f64> {
        let (m, v) = self.quadrature_moments(theta);
        xs.iter().map(|&x| normal_pdf(x, m, v)).collect()
    }

    /// Fock-basis density matrix with `cutoff` levels. Built in an enlarged space by
    /// applying squeezing and displacement to the thermal eigenvectors, then cropped.
    /// Fails when the population above the cutoff exceeds `tolerance`.
    pub fn to_fock(&self, cutoff: usize, tolerance: f64) -> Result<SingleModeFock> {
        if cutoff == 0 {
            return Err(Error::InvalidArgument("cutoff must be positive".into()));
        }
        let p = self.parameters();
        let big = (2 * cutoff).max(cutoff + 40);
        let lower = DMatrix::from_fn(big, big, |i, j| {
            if let Some((n, c)) = Ladder::Lower.act(j) {
                if n == i {
                    return C64::new(c, 0.0);
                }
            }
            C64::new(0.0, 0.0)
        });
        let raise = lower.adjoint();
        let zeta = C64::from_polar(p.r, p.phi);
        let half = C64::new(0.5, 0.0);
        let squeeze_gen = (&lower * &lower * zeta.conj() - &raise * &raise * zeta) * half;
        let disp_gen = &raise * p.alpha - &lower * p.alpha.conj();
        let unitary = disp_gen.exp() * squeeze_gen.exp();

        let ratio = p.nbar / (p.nbar + 1.0);
        let mut weight = 1.0 / (p.nbar + 1.0);
        let mut rho = DMatrix::<C64>::zeros(cutoff, cutoff);
        for k in 0..big {
            if weight < 1e-18 {
                break;
            }
            let col = unitary.column(k);
            let v = col.rows(0, cutoff);
            rho += v * v.adjoint() * C64::new(weight, 0.0);
            weight *= ratio;
            if ratio == 0.0 {
                break;
            }
        }
        let tr: f64 = (0..cutoff).map(|i| rho[(i, i)].re).sum();
        let tail = 1.0 - tr;
        if tail > tolerance {
            return Err(Error::Truncation { tail, tolerance });
        }
        rho /= C64::new(tr, 0.0);
        Ok(SingleModeFock::new_unchecked(rho))
    }
}
