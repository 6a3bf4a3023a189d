//! Gridded homodyne statistics `P_{θ,φ}(x, y)` and their conditionals.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::report::fmt_num;
use crate::states::{FockDensityMatrix, GaussianState, SeparableMixture, State};
use crate::C64;

pub const MIN_GRID_POINTS: usize = 16;
/// Allowed probability mass outside the grid.
pub const CAPTURED_MASS_TOL: f64 = 1e-6;
/// Conditioning bins lighter than this are skipped.
pub const CONDITIONAL_MASS_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    A,
    B,
}

/// Fills `out[n] = ψ_n(x)` for the unit-vacuum-variance oscillator,
/// `ψ_n(x) = (2π)^{-1/4} (2^n n!)^{-1/2} H_n(x/√2) e^{-x²/4}`,
/// by the upward recurrence `√(n+1) ψ_{n+1} = x ψ_n - √n ψ_{n-1}`.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp();
    if out.len() > 1 {
        out[1] = x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
}

/// Uniform bins on `[lo, hi)`; outcomes are represented by bin centers.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    lo: f64,
    hi: f64,
    n_points: usize,
}

impl QuadratureGrid {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n_points < MIN_GRID_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_GRID_POINTS} points, got {n_points}"
            )));
        }
        Ok(Self { lo, hi, n_points })
    }

    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n_points as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.center(i)).collect()
    }

    /// Bin index containing `x`, if inside the grid.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x < self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.width()) as usize;
        Some(i.min(self.n_points - 1))
    }
}

/// Resolution of auto-built grids: `±(|mean| + n_sigmas·sd)` with `n_points` bins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n_points: usize,
    pub n_sigmas: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_points: 256,
            n_sigmas: 6.0,
        }
    }
}

impl GridSpec {
    pub fn new(n_points: usize, n_sigmas: f64) -> Result<Self> {
        if n_points < MIN_GRID_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_GRID_POINTS} points, got {n_points}"
            )));
        }
        if !(n_sigmas > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "n_sigmas must be positive, got {n_sigmas}"
            )));
        }
        Ok(Self { n_points, n_sigmas })
    }

    /// Same width, twice the points.
    pub fn refined(&self) -> Self {
        Self {
            n_points: 2 * self.n_points,
            ..*self
        }
    }

    pub fn grid_for(
        &self,
        moments: &GaussianState,
        mode: Mode,
        theta: f64,
    ) -> Result<QuadratureGrid> {
        QuadratureGrid::symmetric(self.half_width(moments, mode, theta), self.n_points)
    }

    /// Two more standard deviations on each side at the same bin width.
    pub fn widened(&self) -> Self {
        let n_sigmas = self.n_sigmas + 2.0;
        Self {
            n_points: (self.n_points as f64 * n_sigmas / self.n_sigmas).ceil() as usize,
            n_sigmas,
        }
    }

    /// Grids for both modes. Mixtures take the widest per-term extent, since a
    /// light term with a broad local state can stick out of the global moments.
    pub fn grids_for(
        &self,
        state: &State,
        theta: f64,
        phi: f64,
    ) -> Result<(QuadratureGrid, QuadratureGrid)> {
        let m = state.moments();
        let (mut ha, mut hb) = (
            self.half_width(&m, Mode::A, theta),
            self.half_width(&m, Mode::B, phi),
        );
        if let State::Mixture(mix) = state {
            for t in mix.terms() {
                let (ma, va) = t.a.quadrature_moments(theta);
                let (mb, vb) = t.b.quadrature_moments(phi);
                ha = ha.max(ma.abs() + self.n_sigmas * va.sqrt());
                hb = hb.max(mb.abs() + self.n_sigmas * vb.sqrt());
            }
        }
        Ok((
            QuadratureGrid::symmetric(ha, self.n_points)?,
            QuadratureGrid::symmetric(hb, self.n_points)?,
        ))
    }

    fn half_width(&self, moments: &GaussianState, mode: Mode, theta: f64) -> f64 {
        let (mean, var) = moments.mode_moments(mode, theta);
        mean.abs() + self.n_sigmas * var.sqrt()
    }
}

/// Bin masses of the joint outcome distribution of `x_theta` at A and `x_phi` at B.
/// Rows index A bins, columns B bins.
#[derive(Clone, Debug)]
pub struct JointQuadratureDistribution {
    pub grid_a: QuadratureGrid,
    pub grid_b: QuadratureGrid,
    pub theta: f64,
    pub phi: f64,
    probs: DMatrix<f64>,
    captured_mass: f64,
}

impl JointQuadratureDistribution {
    /// Checks the captured mass and renormalizes to 1.
    pub fn from_masses(
        grid_a: QuadratureGrid,
        grid_b: QuadratureGrid,
        theta: f64,
        phi: f64,
        mut probs: DMatrix<f64>,
    ) -> Result<Self> {
        if probs.nrows() != grid_a.n_points() || probs.ncols() != grid_b.n_points() {
            return Err(Error::InvalidGrid(
                "mass matrix does not match grids".into(),
            ));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument(
                "bin masses must be nonnegative".into(),
            ));
        }
        let captured: f64 = probs.iter().sum();
        let deficit = 1.0 - captured;
        if deficit > CAPTURED_MASS_TOL {
            return Err(Error::GridTooNarrow { deficit });
        }
        probs /= captured;
        Ok(Self {
            grid_a,
            grid_b,
            theta,
            phi,
            probs,
            captured_mass: captured,
        })
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    /// Mass inside the grid before renormalization.
    pub fn captured_mass(&self) -> f64 {
        self.captured_mass
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.probs.row_iter().map(|r| r.sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        self.probs.column_iter().map(|c| c.sum()).collect()
    }

    /// `½ Σ |p - q|` against a distribution on identical grids.
    pub fn total_variation(&self, other: &JointQuadratureDistribution) -> Result<f64> {
        if self.grid_a != other.grid_a || self.grid_b != other.grid_b {
            return Err(Error::InvalidGrid(
                "total variation needs identical grids".into(),
            ));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(other.probs.iter())
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>())
    }

    /// Swaps the roles of A and B.
    pub fn transposed(&self) -> Self {
        Self {
            grid_a: self.grid_b.clone(),
            grid_b: self.grid_a.clone(),
            theta: self.phi,
            phi: self.theta,
            probs: self.probs.transpose(),
            captured_mass: self.captured_mass,
        }
    }

    /// Rows `x,y,mass` at bin centers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,mass")?;
        for i in 0..self.grid_a.n_points() {
            let x = self.grid_a.center(i);
            for j in 0..self.grid_b.n_points() {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_num(x),
                    fmt_num(self.grid_b.center(j)),
                    fmt_num(self.probs[(i, j)])
                )?;
            }
        }
        Ok(())
    }
}

fn hermite_table(xs: &[f64], dim: usize, angle: f64) -> DMatrix<C64> {
    let phases: Vec<C64> = (0..dim)
        .map(|n| C64::from_polar(1.0, -(n as f64) * angle))
        .collect();
    let mut psi = vec![0.0; dim];
    let mut out = DMatrix::zeros(xs.len(), dim);
    for (i, &x) in xs.iter().enumerate() {
        hermite_functions(x, &mut psi);
        for n in 0..dim {
            out[(i, n)] = phases[n] * psi[n];
        }
    }
    out
}

fn fock_density_grid(
    rho: &FockDensityMatrix,
    theta: f64,
    phi: f64,
    xs: &[f64],
    ys: &[f64],
) -> DMatrix<f64> {
    let (da, db) = (rho.dim_a(), rho.dim_b());
    let wa = hermite_table(xs, da, theta);
    let wb_t = hermite_table(ys, db, phi).transpose();
    // per component: U_k = V_k W_Bᵀ, amplitude = W_A U_k
    let partials: Vec<(f64, DMatrix<C64>)> = rho
        .components()
        .par_iter()
        .map(|(w, v)| {
            let vmat = DMatrix::from_row_slice(da, db, v.as_slice());
            (*w, vmat * &wb_t)
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..xs.len())
        .into_par_iter()
        .map(|i| {
            let wrow = wa.row(i);
            let mut acc = vec![0.0; ys.len()];
            for (w, u) in &partials {
                let amp = wrow * u;
                for (a, z) in acc.iter_mut().zip(amp.iter()) {
                    *a += w * z.norm_sqr();
                }
            }
            acc
        })
        .collect();
    DMatrix::from_fn(xs.len(), ys.len(), |i, j| rows[i][j])
}

fn gaussian_density_grid(
    g: &GaussianState,
    theta: f64,
    phi: f64,
    xs: &[f64],
    ys: &[f64],
) -> Result<DMatrix<f64>> {
    let (mean, cov) = g.quadrature_moments(theta, phi);
    let (sx, sxy, sy) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let det = sx * sy - sxy * sxy;
    if !(det > 0.0) {
        return Err(Error::Unsupported(format!(
            "joint quadrature covariance is singular (det = {det:.3e})"
        )));
    }
    let norm = 1.0 / (2.0 * PI * det.sqrt());
    Ok(DMatrix::from_fn(xs.len(), ys.len(), |i, j| {
        let dx = xs[i] - mean[0];
        let dy = ys[j] - mean[1];
        let q = (sy * dx * dx - 2.0 * sxy * dx * dy + sx * dy * dy) / det;
        norm * (-0.5 * q).exp()
    }))
}

fn mixture_density_grid(
    m: &SeparableMixture,
    theta: f64,
    phi: f64,
    xs: &[f64],
    ys: &[f64],
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(xs.len(), ys.len());
    for t in m.terms() {
        let pa = nalgebra::DVector::from_vec(t.a.quadrature_density(theta, xs));
        let pb = nalgebra::DVector::from_vec(t.b.quadrature_density(phi, ys));
        out += pa * pb.transpose() * t.weight;
    }
    out
}

/// Joint bin masses by the midpoint rule (density at bin center times bin area).
pub fn joint_distribution(
    state: &State,
    theta: f64,
    phi: f64,
    grid_a: &QuadratureGrid,
    grid_b: &QuadratureGrid,
) -> Result<JointQuadratureDistribution> {
    let xs = grid_a.centers();
    let ys = grid_b.centers();
    let density = match state {
        State::Fock(f) => fock_density_grid(f, theta, phi, &xs, &ys),
        State::Gaussian(g) => gaussian_density_grid(g, theta, phi, &xs, &ys)?,
        State::Mixture(m) => mixture_density_grid(m, theta, phi, &xs, &ys),
    };
    let area = grid_a.width() * grid_b.width();
    JointQuadratureDistribution::from_masses(
        grid_a.clone(),
        grid_b.clone(),
        theta,
        phi,
        density * area,
    )
}

/// Bin masses integrated over each bin by the midpoint rule on `sub × sub`
/// sub-bins, for comparison with histograms of sampled outcomes.
pub fn joint_distribution_integrated(
    state: &State,
    theta: f64,
    phi: f64,
    grid_a: &QuadratureGrid,
    grid_b: &QuadratureGrid,
    sub: usize,
) -> Result<JointQuadratureDistribution> {
    if sub == 0 {
        return Err(Error::InvalidGrid(
            "sub-binning factor must be positive".into(),
        ));
    }
    let fine_a = QuadratureGrid::new(grid_a.lo(), grid_a.hi(), grid_a.n_points() * sub)?;
    let fine_b = QuadratureGrid::new(grid_b.lo(), grid_b.hi(), grid_b.n_points() * sub)?;
    let fine = joint_distribution(state, theta, phi, &fine_a, &fine_b)?;
    let mut masses = DMatrix::zeros(grid_a.n_points(), grid_b.n_points());
    for i in 0..fine_a.n_points() {
        for j in 0..fine_b.n_points() {
            masses[(i / sub, j / sub)] += fine.probs()[(i, j)] * fine.captured_mass();
        }
    }
    JointQuadratureDistribution::from_masses(grid_a.clone(), grid_b.clone(), theta, phi, masses)
}

/// [`joint_distribution`] on auto-built grids.
pub fn joint_distribution_auto(
    state: &State,
    theta: f64,
    phi: f64,
    spec: &GridSpec,
) -> Result<JointQuadratureDistribution> {
    let (ga, gb) = spec.grids_for(state, theta, phi)?;
    joint_distribution(state, theta, phi, &ga, &gb)
}

/// Per-outcome conditional statistics of the inferred quadrature.
#[derive(Clone, Debug, Default)]
pub struct ConditionalProfile {
    /// Conditioning outcomes `y_i` with `P(y_i)` above the mass floor.
    pub y_values: Vec<f64>,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Total conditioning mass dropped by the floor.
    pub skipped_mass: f64,
}

impl ConditionalProfile {
    /// `Σ_i P(y_i) Δ_i²`.
    pub fn average_variance(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Variance of the conditional means, `Var_i(μ_i)`.
    pub fn variance_of_means(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let mean: f64 = self
            .weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * m)
            .sum::<f64>()
            / total;
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * (m - mean).powi(2))
            .sum::<f64>()
            / total
    }
}

/// Conditional means and variances of the outcome at A given each B bin
/// (`infer_at_a`), or of B given A.
pub fn conditional_profile(
    j: &JointQuadratureDistribution,
    infer_at_a: bool,
) -> ConditionalProfile {
    let flipped;
    let j = if infer_at_a {
        j
    } else {
        flipped = j.transposed();
        &flipped
    };
    let xs = j.grid_a.centers();
    let mut out = ConditionalProfile::default();
    for (col_idx, col) in j.probs.column_iter().enumerate() {
        let py: f64 = col.sum();
        if py < CONDITIONAL_MASS_FLOOR {
            out.skipped_mass += py;
            continue;
        }
        let mu = col.iter().zip(&xs).map(|(p, x)| p * x).sum::<f64>() / py;
        let var = col
            .iter()
            .zip(&xs)
            .map(|(p, x)| p * (x - mu).powi(2))
            .sum::<f64>()
            / py;
        out.y_values.push(j.grid_b.center(col_idx));
        out.weights.push(py);
        out.means.push(mu);
        out.variances.push(var.max(0.0));
    }
    out
}

/// Exact mean and variance of `x_theta` at one mode.
pub fn marginal_moments(state: &State, mode: Mode, theta: f64) -> (f64, f64) {
    state.moments().mode_moments(mode, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{LocalState, MixtureTerm, SingleModeFock, SingleModeGaussian};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn tmsv(r: f64) -> State {
        State::Gaussian(GaussianState::two_mode_squeezed_vacuum(r).unwrap())
    }

    fn tmsv_fock(r: f64, cutoff: usize) -> State {
        State::Fock(FockDensityMatrix::two_mode_squeezed_vacuum(r, cutoff).unwrap())
    }

    fn grid_moments(j: &JointQuadratureDistribution) -> (f64, f64, f64) {
        let xs = j.grid_a.centers();
        let ys = j.grid_b.centers();
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..xs.len() {
            for k in 0..ys.len() {
                let p = j.probs()[(i, k)];
                sxx += p * xs[i] * xs[i];
                syy += p * ys[k] * ys[k];
                sxy += p * xs[i] * ys[k];
            }
        }
        (sxx, syy, sxy)
    }

    #[test]
    fn hermite_functions_match_explicit_polynomials() {
        let explicit = |n: usize, x: f64| {
            let t = x / 2f64.sqrt();
            let h = [
                1.0,
                2.0 * t,
                4.0 * t * t - 2.0,
                8.0 * t.powi(3) - 12.0 * t,
                16.0 * t.powi(4) - 48.0 * t * t + 12.0,
            ][n];
            let norm = (2f64.powi(n as i32) * [1.0, 1.0, 2.0, 6.0, 24.0][n]).sqrt();
            (2.0 * PI).powf(-0.25) * h / norm * (-0.25 * x * x).exp()
        };
        let mut out = [0.0; 5];
        for x in [-3.1, -0.4, 0.0, 0.7, 2.5] {
            hermite_functions(x, &mut out);
            for n in 0..5 {
                assert!((out[n] - explicit(n, x)).abs() < 1e-14, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let n_max = 40;
        let h = 0.01;
        let mut gram = DMatrix::<f64>::zeros(n_max, n_max);
        let mut psi = vec![0.0; n_max];
        for i in 0..4000 {
            let x = -20.0 + h * i as f64;
            hermite_functions(x, &mut psi);
            for a in 0..n_max {
                for b in 0..n_max {
                    gram[(a, b)] += h * psi[a] * psi[b];
                }
            }
        }
        assert!((gram - DMatrix::identity(n_max, n_max)).amax() < 1e-10);
    }

    #[test]
    fn vacuum_is_a_product_of_normals() {
        let g = QuadratureGrid::symmetric(8.0, 64).unwrap();
        let j = joint_distribution(&tmsv(0.0), 0.3, 1.2, &g, &g).unwrap();
        let pa = j.marginal_a();
        let pb = j.marginal_b();
        let w = g.width();
        for i in 0..64 {
            let x = g.center(i);
            let expected = w * (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
            assert!((pa[i] - expected).abs() < 1e-12);
            for k in 0..64 {
                assert!((j.probs()[(i, k)] - pa[i] * pb[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tmsv_grid_moments() {
        let spec = GridSpec::default();
        let j = joint_distribution_auto(&tmsv(0.5), 0.0, 0.0, &spec).unwrap();
        let (sxx, syy, sxy) = grid_moments(&j);
        let c = 1.0f64.cosh();
        assert!((sxx - c).abs() < 1e-6);
        assert!((syy - c).abs() < 1e-6);
        assert!((sxy / (sxx * syy).sqrt() - 1.0f64.tanh()).abs() < 1e-6);
        assert!((1.0f64.tanh() - 0.761_594_155_955_764_9).abs() < 1e-15);
        let j = joint_distribution_auto(&tmsv(0.5), FRAC_PI_2, FRAC_PI_2, &spec).unwrap();
        let (_, _, sxy) = grid_moments(&j);
        assert!((sxy + 1.0f64.sinh()).abs() < 1e-6);
    }

    #[test]
    fn fock_and_gaussian_paths_agree() {
        let g = QuadratureGrid::symmetric(9.0, 96).unwrap();
        for (theta, phi) in [(0.0, 0.0), (FRAC_PI_2, -FRAC_PI_2), (FRAC_PI_4, 1.0)] {
            let jf = joint_distribution(&tmsv_fock(0.5, 40), theta, phi, &g, &g).unwrap();
            let jg = joint_distribution(&tmsv(0.5), theta, phi, &g, &g).unwrap();
            assert!((jf.probs() - jg.probs()).amax() < 1e-6);
            assert!(jf.total_variation(&jg).unwrap() < 1e-6);
        }
    }

    #[test]
    fn exchanging_modes_transposes() {
        let g = QuadratureGrid::symmetric(7.0, 48).unwrap();
        for state in [tmsv(0.4), tmsv_fock(0.3, 30)] {
            let j = joint_distribution(&state, 0.2, 1.3, &g, &g).unwrap();
            let k = joint_distribution(&state, 1.3, 0.2, &g, &g)
                .unwrap()
                .transposed();
            assert!((j.probs() - k.probs()).amax() < 1e-10);
        }
    }

    #[test]
    fn single_photon_marginal() {
        let rho = FockDensityMatrix::from_pure(
            2,
            1,
            nalgebra::DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
        )
        .unwrap();
        let g = QuadratureGrid::symmetric(10.0, 100).unwrap();
        let j = joint_distribution(&State::Fock(rho), 0.9, 0.0, &g, &g).unwrap();
        for (i, p) in j.marginal_a().iter().enumerate() {
            let x = g.center(i);
            let expected = g.width() * x * x * (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_profile_of_tmsv() {
        let j = joint_distribution_auto(&tmsv(0.5), 0.0, 0.0, &GridSpec::default()).unwrap();
        let prof = conditional_profile(&j, true);
        let (t, c) = (1.0f64.tanh(), 1.0f64.cosh());
        // far tails are clipped by the grid edge
        for (k, y) in prof.y_values.iter().enumerate() {
            if y.abs() < 3.0 {
                assert!((prof.means[k] - t * y).abs() < 1e-6, "y = {y}");
                assert!((prof.variances[k] - 1.0 / c).abs() < 1e-6);
            }
        }
        assert!((prof.average_variance() - 0.648_054_273_663_885_3).abs() < 1e-6);
        // law of total variance on the grid
        let (sxx, _, _) = grid_moments(&j);
        let mean_a: f64 = j
            .marginal_a()
            .iter()
            .zip(j.grid_a.centers())
            .map(|(p, x)| p * x)
            .sum();
        let var_a = sxx - mean_a * mean_a;
        assert!((prof.average_variance() + prof.variance_of_means() - var_a).abs() < 1e-10);
        let rev = conditional_profile(&j, false);
        assert!((rev.average_variance() - prof.average_variance()).abs() < 1e-10);
    }

    #[test]
    fn mixture_is_weighted_sum_of_terms() {
        let coh =
            |re: f64, im: f64| LocalState::Gaussian(SingleModeGaussian::coherent(C64::new(re, im)));
        let terms = vec![
            MixtureTerm {
                weight: 0.3,
                a: coh(0.5, 0.0),
                b: coh(-0.2, 0.4),
            },
            MixtureTerm {
                weight: 0.7,
                a: LocalState::Fock(SingleModeFock::fock_state(2, 3)),
                b: coh(0.0, -0.5),
            },
        ];
        let mix = SeparableMixture::new(terms.clone()).unwrap();
        let g = QuadratureGrid::symmetric(10.0, 80).unwrap();
        let j = joint_distribution(&State::Mixture(mix), 0.4, -0.8, &g, &g).unwrap();
        let mut expected = DMatrix::zeros(80, 80);
        for t in terms {
            let single = SeparableMixture::product(t.a, t.b);
            expected += joint_distribution(&State::Mixture(single), 0.4, -0.8, &g, &g)
                .unwrap()
                .probs()
                * t.weight;
        }
        assert!((j.probs() - expected).amax() < 1e-9);
    }

    #[test]
    fn two_point_mixture_conditionals() {
        // ½(|α,α><α,α| + |-α,-α><-α,-α|) with α = 1.5: x_A ≈ x_B = ±3
        let coh = |re: f64| LocalState::Gaussian(SingleModeGaussian::coherent(C64::new(re, 0.0)));
        let mix = SeparableMixture::new(vec![
            MixtureTerm {
                weight: 0.5,
                a: coh(1.5),
                b: coh(1.5),
            },
            MixtureTerm {
                weight: 0.5,
                a: coh(-1.5),
                b: coh(-1.5),
            },
        ])
        .unwrap();
        let state = State::Mixture(mix);
        assert_eq!(marginal_moments(&state, Mode::A, 0.0), (0.0, 10.0));
        let j = joint_distribution_auto(&state, 0.0, 0.0, &GridSpec::default()).unwrap();
        let prof = conditional_profile(&j, true);
        for (k, y) in prof.y_values.iter().enumerate() {
            if y.abs() > 2.0 && prof.weights[k] > 1e-6 {
                assert!((prof.means[k] - 3.0 * y.signum()).abs() < 1e-3);
            }
        }
        // conditional variance stays above the local vacuum value
        assert!(prof.average_variance() > 1.0);
    }

    #[test]
    fn coherent_marginal_moments() {
        let s = State::Mixture(SeparableMixture::product(
            LocalState::Gaussian(SingleModeGaussian::coherent(C64::new(0.7, -0.2))),
            LocalState::Gaussian(SingleModeGaussian::vacuum()),
        ));
        let (m, v) = marginal_moments(&s, Mode::A, 0.0);
        assert!((m - 1.4).abs() < 1e-15 && (v - 1.0).abs() < 1e-15);
        let (m, _) = marginal_moments(&s, Mode::A, FRAC_PI_2);
        assert!((m + 0.4).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            QuadratureGrid::new(1.0, 1.0, 64),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            QuadratureGrid::new(-1.0, 1.0, 8),
            Err(Error::InvalidGrid(_))
        ));
        assert!(GridSpec::new(8, 6.0).is_err());
        assert!(GridSpec::new(64, 0.0).is_err());
        let narrow = QuadratureGrid::symmetric(2.0, 64).unwrap();
        assert!(matches!(
            joint_distribution(&tmsv(0.5), 0.0, 0.0, &narrow, &narrow),
            Err(Error::GridTooNarrow { .. })
        ));
        let g = QuadratureGrid::new(-1.0, 1.0, 16).unwrap();
        assert_eq!(g.bin_of(-1.0), Some(0));
        assert_eq!(g.bin_of(0.999_999), Some(15));
        assert_eq!(g.bin_of(1.0), None);
    }

    #[test]
    fn refinement_converges() {
        let spec = GridSpec::default();
        let coarse = conditional_profile(
            &joint_distribution_auto(&tmsv(0.5), 0.0, 0.0, &spec).unwrap(),
            true,
        );
        let fine = conditional_profile(
            &joint_distribution_auto(&tmsv(0.5), 0.0, 0.0, &spec.refined()).unwrap(),
            true,
        );
        assert!((coarse.average_variance() - fine.average_variance()).abs() < 1e-4);
    }
}
