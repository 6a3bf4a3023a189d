use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::quadrature::hermite_functions;
use crate::states::GaussianState;
use crate::C64;

pub(crate) const HERMITIAN_TOL: f64 = 1e-12;
pub(crate) const TRACE_TOL: f64 = 1e-10;
pub(crate) const PSD_TOL: f64 = 1e-10;
/// Eigen-components below this weight are dropped from the pure-state decomposition.
const COMPONENT_FLOOR: f64 = 1e-15;
/// Fock tail tolerance for the two-mode squeezed vacuum.
pub const TMSV_TAIL_TOLERANCE: f64 = 1e-10;

/// Sparse single-mode operators needed for first and second moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Ladder {
    Identity,
    Lower,
    Raise,
    Lower2,
    Number,
}

impl Ladder {
    /// `op |m> = coeff |n>`; `None` when the result vanishes.
    pub(crate) fn act(self, m: usize) -> Option<(usize, f64)> {
        match self {
            Ladder::Identity => Some((m, 1.0)),
            Ladder::Lower => (m >= 1).then(|| (m - 1, (m as f64).sqrt())),
            Ladder::Raise => Some((m + 1, ((m + 1) as f64).sqrt())),
            Ladder::Lower2 => (m >= 2).then(|| (m - 2, ((m * (m - 1)) as f64).sqrt())),
            Ladder::Number => (m > 0).then_some((m, m as f64)),
        }
    }
}

/// `<a>`, `<a^2>` and `<a† a>` of one mode.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LadderMoments {
    pub a: C64,
    pub a2: C64,
    pub n: f64,
}

impl LadderMoments {
    pub fn quadrature_moments(&self) -> (Vector2<f64>, Matrix2<f64>) {
        let mean = Vector2::new(2.0 * self.a.re, 2.0 * self.a.im);
        let sym = 2.0 * self.n + 1.0;
        let xx = 2.0 * self.a2.re + sym;
        let pp = -2.0 * self.a2.re + sym;
        let xp = 2.0 * self.a2.im;
        let second = Matrix2::new(xx, xp, xp, pp);
        (mean, second - mean * mean.transpose())
    }
}

fn max_hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn real_trace(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

fn eigen_components(m: &DMatrix<C64>) -> (f64, Vec<(f64, DVector<C64>)>) {
    let eig = m.clone().symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let comps = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > COMPONENT_FLOOR)
        .map(|(k, &l)| (l, eig.eigenvectors.column(k).into_owned()))
        .collect();
    (min, comps)
}

fn validate_density(m: &DMatrix<C64>) -> Result<Vec<(f64, DVector<C64>)>> {
    let herm = max_hermitian_defect(m);
    if herm > HERMITIAN_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let tr = real_trace(m);
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::Trace(tr));
    }
    let (min, comps) = eigen_components(m);
    if min < -PSD_TOL {
        return Err(Error::NotPositive(min));
    }
    Ok(comps)
}

/// Single-mode truncated density matrix.
#[derive(Clone, Debug)]
pub struct SingleModeFock {
    rho: DMatrix<C64>,
}

impl SingleModeFock {
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "density matrix must be square and nonempty, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        validate_density(&rho)?;
        Ok(Self { rho })
    }

    pub(crate) fn new_unchecked(rho: DMatrix<C64>) -> Self {
        Self { rho }
    }

    pub fn vacuum() -> Self {
        Self::fock_state(0, 1)
    }

    /// Number state `|n><n|` in a space of dimension `dim > n`.
    pub fn fock_state(n: usize, dim: usize) -> Self {
        assert!(n < dim, "number state {n} does not fit in dimension {dim}");
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(n, n)] = C64::new(1.0, 0.0);
        Self { rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub(crate) fn expect(&self, op: Ladder) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..d {
            if let Some((n, c)) = op.act(m) {
                if n < d {
                    acc += self.rho[(m, n)] * c;
                }
            }
        }
        acc
    }

    pub(crate) fn ladder_moments(&self) -> LadderMoments {
        LadderMoments {
            a: self.expect(Ladder::Lower),
            a2: self.expect(Ladder::Lower2),
            n: self.expect(Ladder::Number).re,
        }
    }

    /// Mean `(x, p)` and symmetrized covariance.
    pub fn moments(&self) -> (Vector2<f64>, Matrix2<f64>) {
        self.ladder_moments().quadrature_moments()
    }

    /// Probability density of `x_theta` at each point of `xs`.
    pub fn quadrature_density(&self, theta: f64, xs: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let phases: Vec<C64> = (0..d)
            .map(|n| C64::from_polar(1.0, -(n as f64) * theta))
            .collect();
        let mut psi = vec![0.0; d];
        xs.iter()
            .map(|&x| {
                hermite_functions(x, &mut psi);
                let w: Vec<C64> = phases.iter().zip(&psi).map(|(p, &v)| p * v).collect();
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..d {
                    let mut row = C64::new(0.0, 0.0);
                    for k in 0..d {
                        row += self.rho[(n, k)] * w[k].conj();
                    }
                    acc += w[n] * row;
                }
                acc.re.max(0.0)
            })
            .collect()
    }

    /// Copy into a space of dimension `dim`, returning the discarded population.
    pub(crate) fn resized(&self, dim: usize) -> (DMatrix<C64>, f64) {
        let d = self.dim();
        let keep = d.min(dim);
        let mut out = DMatrix::zeros(dim, dim);
        out.view_mut((0, 0), (keep, keep))
            .copy_from(&self.rho.view((0, 0), (keep, keep)));
        let tail: f64 = (keep..d).map(|n| self.rho[(n, n)].re).sum();
        (out, tail)
    }
}

/// Truncated two-mode density operator with composite index `n_a * dim_b + m_b`.
#[derive(Clone, Debug)]
pub struct FockDensityMatrix {
    dim_a: usize,
    dim_b: usize,
    entries: DMatrix<C64>,
    components: OnceLock<Vec<(f64, DVector<C64>)>>,
}

impl FockDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(dim_a: usize, dim_b: usize, entries: DMatrix<C64>) -> Result<Self> {
        Self::check_shape(dim_a, dim_b, &entries)?;
        let comps = validate_density(&entries)?;
        Ok(Self {
            dim_a,
            dim_b,
            entries,
            components: OnceLock::from(comps),
        })
    }

    /// Pure state `|v><v|`; `amplitudes` must be normalized.
    pub fn from_pure(dim_a: usize, dim_b: usize, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != dim_a * dim_b || dim_a == 0 || dim_b == 0 {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector of length {} does not match {dim_a}x{dim_b}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::Trace(norm));
        }
        Ok(Self::from_components(dim_a, dim_b, vec![(1.0, amplitudes)]))
    }

    /// Builds `Σ w_k |v_k><v_k|` from nonnegative weights; positivity holds by construction.
    pub(crate) fn from_components(
        dim_a: usize,
        dim_b: usize,
        comps: Vec<(f64, DVector<C64>)>,
    ) -> Self {
        let dim = dim_a * dim_b;
        let mut entries = DMatrix::zeros(dim, dim);
        for (w, v) in &comps {
            entries += v * v.adjoint() * C64::new(*w, 0.0);
        }
        Self {
            dim_a,
            dim_b,
            entries,
            components: OnceLock::from(comps),
        }
    }

    /// Trusted entries; the eigen decomposition is computed on first use.
    pub(crate) fn from_entries_unchecked(
        dim_a: usize,
        dim_b: usize,
        entries: DMatrix<C64>,
    ) -> Self {
        Self {
            dim_a,
            dim_b,
            entries,
            components: OnceLock::new(),
        }
    }

    fn check_shape(dim_a: usize, dim_b: usize, entries: &DMatrix<C64>) -> Result<()> {
        let dim = dim_a * dim_b;
        if dim == 0 || entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "entries are {}x{}, expected {dim}x{dim} for dims ({dim_a}, {dim_b})",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(())
    }

    pub fn vacuum() -> Self {
        Self::from_components(
            1,
            1,
            vec![(1.0, DVector::from_element(1, C64::new(1.0, 0.0)))],
        )
    }

    /// Two-mode squeezed vacuum `Σ_n tanh^n r / cosh r |n, n>` keeping `cutoff` levels per mode.
    pub fn two_mode_squeezed_vacuum(r: f64, cutoff: usize) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "squeezing must be >= 0, got {r}"
            )));
        }
        if cutoff == 0 {
            return Err(Error::InvalidArgument("cutoff must be positive".into()));
        }
        let lambda = r.tanh();
        // Σ_{n >= cutoff} (1 - t²) t^{2n} = t^{2 cutoff}
        let tail = if lambda == 0.0 {
            0.0
        } else {
            (2.0 * cutoff as f64 * lambda.ln()).exp()
        };
        if tail >= TMSV_TAIL_TOLERANCE {
            return Err(Error::Truncation {
                tail,
                tolerance: TMSV_TAIL_TOLERANCE,
            });
        }
        let mut amps = DVector::zeros(cutoff * cutoff);
        let mut c = 1.0 / r.cosh();
        for n in 0..cutoff {
            amps[n * cutoff + n] = C64::new(c, 0.0);
            c *= lambda;
        }
        let norm = amps.norm();
        amps /= C64::new(norm, 0.0);
        Self::from_pure(cutoff, cutoff, amps)
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn index(&self, n_a: usize, m_b: usize) -> usize {
        n_a * self.dim_b + m_b
    }

    pub fn trace(&self) -> f64 {
        real_trace(&self.entries)
    }

    /// Weighted pure-state decomposition (eigen-decomposition unless known from construction).
    pub fn components(&self) -> &[(f64, DVector<C64>)] {
        self.components
            .get_or_init(|| eigen_components(&self.entries).1)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigen_components(&self.entries).0
    }

    /// Reduced state of mode A.
    pub fn reduced_a(&self) -> SingleModeFock {
        let mut out = DMatrix::zeros(self.dim_a, self.dim_a);
        for n in 0..self.dim_a {
            for k in 0..self.dim_a {
                out[(n, k)] = (0..self.dim_b)
                    .map(|m| self.entries[(self.index(n, m), self.index(k, m))])
                    .sum();
            }
        }
        SingleModeFock::new_unchecked(out)
    }

    /// Reduced state of mode B.
    pub fn reduced_b(&self) -> SingleModeFock {
        let mut out = DMatrix::zeros(self.dim_b, self.dim_b);
        for m in 0..self.dim_b {
            for l in 0..self.dim_b {
                out[(m, l)] = (0..self.dim_a)
                    .map(|n| self.entries[(self.index(n, m), self.index(n, l))])
                    .sum();
            }
        }
        SingleModeFock::new_unchecked(out)
    }

    /// Partial transpose on mode B.
    pub fn partial_transpose_b(&self) -> DMatrix<C64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for n in 0..self.dim_a {
            for m in 0..self.dim_b {
                for k in 0..self.dim_a {
                    for l in 0..self.dim_b {
                        out[(self.index(n, m), self.index(k, l))] =
                            self.entries[(self.index(n, l), self.index(k, m))];
                    }
                }
            }
        }
        out
    }

    /// Smallest eigenvalue of the partial transpose; negative values witness entanglement.
    pub fn ppt_min_eigenvalue(&self) -> f64 {
        eigen_components(&self.partial_transpose_b()).0
    }

    /// `Tr(rho (A ⊗ B))`; exact for the truncated state since it has no support outside.
    pub(crate) fn expect(&self, op_a: Ladder, op_b: Ladder) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..self.dim_a {
            let Some((n, ca)) = op_a.act(m) else { continue };
            if n >= self.dim_a {
                continue;
            }
            for k in 0..self.dim_b {
                let Some((l, cb)) = op_b.act(k) else { continue };
                if l >= self.dim_b {
                    continue;
                }
                acc += self.entries[(self.index(m, k), self.index(n, l))] * (ca * cb);
            }
        }
        acc
    }

    fn mode_ladder(&self, first: bool) -> LadderMoments {
        let e = |op: Ladder| {
            if first {
                self.expect(op, Ladder::Identity)
            } else {
                self.expect(Ladder::Identity, op)
            }
        };
        LadderMoments {
            a: e(Ladder::Lower),
            a2: e(Ladder::Lower2),
            n: e(Ladder::Number).re,
        }
    }

    /// First moments and symmetrized covariance in `(x_A, p_A, x_B, p_B)` order.
    pub fn moments(&self) -> GaussianState {
        let la = self.mode_ladder(true);
        let lb = self.mode_ladder(false);
        let (ma, ca) = la.quadrature_moments();
        let (mb, cb) = lb.quadrature_moments();
        let ab = self.expect(Ladder::Lower, Ladder::Lower);
        let abd = self.expect(Ladder::Lower, Ladder::Raise);
        // u = e^{-iθ}: x ↦ 1, p ↦ -i
        let us = [C64::new(1.0, 0.0), C64::new(0.0, -1.0)];
        let mut mean = nalgebra::Vector4::zeros();
        let mut cov = nalgebra::Matrix4::zeros();
        for i in 0..2 {
            mean[i] = ma[i];
            mean[i + 2] = mb[i];
            for j in 0..2 {
                cov[(i, j)] = ca[(i, j)];
                cov[(i + 2, j + 2)] = cb[(i, j)];
                let second = 2.0 * (us[i] * us[j] * ab + us[i] * us[j].conj() * abd).re;
                let c = second - ma[i] * mb[j];
                cov[(i, j + 2)] = c;
                cov[(j + 2, i)] = c;
            }
        }
        GaussianState::from_moments_unchecked(mean, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tmsv_at_zero_squeezing_is_vacuum() {
        let rho = FockDensityMatrix::two_mode_squeezed_vacuum(0.0, 1).unwrap();
        assert_eq!(rho.dim(), 1);
        assert_abs_diff_eq!(rho.entries()[(0, 0)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tmsv_amplitudes_follow_closed_form() {
        let r: f64 = 0.5;
        let rho = FockDensityMatrix::two_mode_squeezed_vacuum(r, 30).unwrap();
        // |0,0> amplitude from the populations
        let amp0 = rho.entries()[(0, 0)].re.sqrt();
        assert_abs_diff_eq!(amp0, 1.0 / r.cosh(), epsilon = 1e-12);
        assert_abs_diff_eq!(amp0, 0.886_818_883_970_074, epsilon = 1e-12);
        // populations sum to one before renormalization: Σ t^{2n} / cosh² = 1
        let t2 = r.tanh().powi(2);
        let raw: f64 = (0..30).map(|n| t2.powi(n) / r.cosh().powi(2)).sum();
        assert!((1.0 - raw) < 1e-10);
        for n in 0..30 {
            let idx = rho.index(n, n);
            assert_abs_diff_eq!(
                rho.entries()[(idx, idx)].re,
                t2.powi(n as i32) / r.cosh().powi(2),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tmsv_reduced_state_is_thermal() {
        let r: f64 = 0.5;
        let rho = FockDensityMatrix::two_mode_squeezed_vacuum(r, 30).unwrap();
        let red = rho.reduced_a();
        let nbar = r.sinh().powi(2);
        for n in 0..30 {
            let thermal = nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1);
            assert_abs_diff_eq!(red.matrix()[(n, n)].re, thermal, epsilon = 1e-12);
            for k in 0..30 {
                if k != n {
                    assert!(red.matrix()[(n, k)].norm() < 1e-15);
                }
            }
        }
        assert_abs_diff_eq!(red.expect(Ladder::Number).re, nbar, epsilon = 1e-10);
    }

    #[test]
    fn tmsv_rejects_short_cutoff() {
        match FockDensityMatrix::two_mode_squeezed_vacuum(1.0, 10) {
            Err(Error::Truncation { tail, .. }) => assert!(tail > 1e-10),
            other => panic!("expected truncation error, got {other:?}"),
        }
        // tail = tanh(1)^{2·cutoff} drops below 1e-10 at cutoff 43
        assert!(FockDensityMatrix::two_mode_squeezed_vacuum(1.0, 42).is_err());
        assert!(FockDensityMatrix::two_mode_squeezed_vacuum(1.0, 43).is_ok());
        assert!(FockDensityMatrix::two_mode_squeezed_vacuum(-0.1, 10).is_err());
    }

    #[test]
    fn tmsv_moments_match_closed_form() {
        for (r, cutoff) in [(0.1, 40), (0.5, 40), (0.8, 40), (1.0, 43)] {
            let f = FockDensityMatrix::two_mode_squeezed_vacuum(r, cutoff)
                .unwrap()
                .moments();
            let g = GaussianState::two_mode_squeezed_vacuum(r).unwrap();
            assert!((f.mean() - g.mean()).amax() < 1e-8, "r = {r}");
            assert!((f.cov() - g.cov()).amax() < 1e-8, "r = {r}: {}", f.cov());
        }
    }

    #[test]
    fn vacuum_moments() {
        let m = FockDensityMatrix::vacuum().moments();
        assert_eq!(*m.mean(), nalgebra::Vector4::zeros());
        assert!((m.cov() - nalgebra::Matrix4::identity()).amax() < 1e-15);
    }

    #[test]
    fn validation_names_the_violated_invariant() {
        let mut m = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
        m[(0, 0)] = C64::new(0.9, 0.0);
        assert!(
            matches!(FockDensityMatrix::new(2, 2, m.clone()), Err(Error::Trace(t)) if (t - 0.9).abs() < 1e-12)
        );

        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            FockDensityMatrix::new(2, 2, m.clone()),
            Err(Error::NotHermitian(_))
        ));

        let mut neg = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
        neg[(0, 0)] = C64::new(1.2, 0.0);
        neg[(1, 1)] = C64::new(-0.2, 0.0);
        assert!(
            matches!(FockDensityMatrix::new(2, 2, neg), Err(Error::NotPositive(v)) if v < -0.1)
        );

        assert!(FockDensityMatrix::new(2, 3, DMatrix::identity(4, 4)).is_err());
        let err = FockDensityMatrix::new(1, 1, DMatrix::from_element(1, 1, C64::new(0.9, 0.0)))
            .unwrap_err();
        assert!(err.to_string().contains("trace"));
    }

    #[test]
    fn tmsv_has_negative_partial_transpose() {
        // PT eigenvalues of a pure TMSV include -c_n c_m for n != m
        let rho = FockDensityMatrix::two_mode_squeezed_vacuum(0.3, 20).unwrap();
        let c = |n: i32| 0.3f64.tanh().powi(n) / 0.3f64.cosh();
        assert_abs_diff_eq!(rho.ppt_min_eigenvalue(), -c(0) * c(1), epsilon = 1e-9);
    }

    #[test]
    fn single_mode_fock_moments() {
        let f = SingleModeFock::fock_state(3, 5);
        let (mean, cov) = f.moments();
        assert_eq!(mean, Vector2::zeros());
        assert_abs_diff_eq!(cov[(0, 0)], 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(1, 1)], 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(0, 1)], 0.0, epsilon = 1e-12);
    }
}
