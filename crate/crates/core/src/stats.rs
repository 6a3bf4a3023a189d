//! Sample statistics and bootstrap standard errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Resamples used for every bootstrap standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 50;

/// Population (1/n) moments of paired outcomes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMoments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
}

impl PairMoments {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let n = pairs.len() as f64;
        let (sx, sy) = pairs
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let (mut vx, mut vy, mut c) = (0.0, 0.0, 0.0);
        for (x, y) in pairs {
            let (dx, dy) = (x - mx, y - my);
            vx += dx * dx;
            vy += dy * dy;
            c += dx * dy;
        }
        Self {
            mean_x: mx,
            mean_y: my,
            var_x: vx / n,
            var_y: vy / n,
            cov: c / n,
        }
    }

    /// `g* = Cov / Var(y)`; zero when `y` does not vary.
    pub fn regression_gain(&self) -> f64 {
        if self.var_y > 0.0 {
            self.cov / self.var_y
        } else {
            0.0
        }
    }

    /// Mean squared residual of `x - (g y + d)` with the empirical optimal `d`.
    pub fn residual_variance(&self, g: f64) -> f64 {
        (self.var_x - 2.0 * g * self.cov + g * g * self.var_y).max(0.0)
    }

    pub fn correlation(&self) -> f64 {
        self.cov / (self.var_x * self.var_y).sqrt()
    }
}

/// Average within-bin variance of `x` after splitting the pairs into `n_bins`
/// equal-count bins of `y`. Returns the estimate and the number of bins used.
pub fn binned_conditional_variance(pairs: &[(f64, f64)], n_bins: usize) -> (f64, usize) {
    let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let n = sorted.len();
    let n_bins = n_bins.clamp(1, n.max(1));
    let mut total = 0.0;
    let mut used = 0;
    for b in 0..n_bins {
        let lo = b * n / n_bins;
        let hi = (b + 1) * n / n_bins;
        let chunk = &sorted[lo..hi];
        if chunk.len() < 2 {
            continue;
        }
        let k = chunk.len() as f64;
        let m = chunk.iter().map(|p| p.0).sum::<f64>() / k;
        let ss = chunk.iter().map(|p| (p.0 - m).powi(2)).sum::<f64>();
        total += ss / (k - 1.0) * (k / n as f64);
        used += 1;
    }
    (total, used)
}

/// Sample standard deviation (n - 1) of bootstrap replicates, ignoring non-finite values.
pub fn standard_error(replicates: &[f64]) -> f64 {
    let vals: Vec<f64> = replicates
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    if vals.len() < 2 {
        return f64::NAN;
    }
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn resample<T: Copy>(rng: &mut ChaCha8Rng, data: &[T]) -> Vec<T> {
    (0..data.len())
        .map(|_| data[rng.random_range(0..data.len())])
        .collect()
}

/// Bootstrap standard errors of a vector-valued statistic of two independent
/// records, each resampled with replacement. Replicate `k` uses stream `k` of
/// the seeded generator, so results do not depend on thread scheduling.
pub fn bootstrap_standard_errors<T, F>(
    seed: u64,
    resamples: usize,
    first: &[T],
    second: &[T],
    stat: F,
) -> Vec<f64>
where
    T: Copy + Send + Sync,
    F: Fn(&[T], &[T]) -> Vec<f64> + Sync,
{
    let replicates: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let a = resample(&mut rng, first);
            let b = resample(&mut rng, second);
            stat(&a, &b)
        })
        .collect();
    let width = replicates.first().map_or(0, Vec::len);
    (0..width)
        .map(|i| standard_error(&replicates.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect()
}

/// Single-record variant of [`bootstrap_standard_errors`].
pub fn bootstrap_standard_error<T, F>(seed: u64, resamples: usize, data: &[T], stat: F) -> f64
where
    T: Copy + Send + Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    bootstrap_standard_errors(seed, resamples, data, &[], |a, _| vec![stat(a)])[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn normal_pairs(n: usize, seed: u64, rho: f64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (a, rho * a + (1.0 - rho * rho).sqrt() * b)
            })
            .collect()
    }

    #[test]
    fn pair_moments_by_hand() {
        let m = PairMoments::from_pairs(&[(1.0, 2.0), (3.0, 2.0), (2.0, 5.0)]);
        assert_eq!((m.mean_x, m.mean_y), (2.0, 3.0));
        assert!((m.var_x - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.var_y - 2.0).abs() < 1e-15);
        assert_eq!(m.cov, 0.0);
        assert_eq!(m.regression_gain(), 0.0);
        let line = PairMoments::from_pairs(&[(2.0, 1.0), (4.0, 2.0), (6.0, 3.0)]);
        assert!((line.regression_gain() - 2.0).abs() < 1e-15);
        assert!(line.residual_variance(2.0) < 1e-15);
        assert!((line.correlation() - 1.0).abs() < 1e-15);
        let flat = PairMoments::from_pairs(&[(1.0, 0.0), (2.0, 0.0)]);
        assert_eq!(flat.regression_gain(), 0.0);
    }

    #[test]
    fn binned_conditional_variance_limits() {
        let indep = normal_pairs(40_000, 1, 0.0);
        let (v, used) = binned_conditional_variance(&indep, 200);
        assert_eq!(used, 200);
        assert!((v - 1.0).abs() < 0.03);
        let exact: Vec<(f64, f64)> = indep.iter().map(|&(x, _)| (x, x)).collect();
        let (v, _) = binned_conditional_variance(&exact, 200);
        assert!(v < 1e-3);
        let corr = normal_pairs(100_000, 2, 0.8);
        let (v, _) = binned_conditional_variance(&corr, 256);
        assert!((v - 0.36).abs() < 0.01);
    }

    #[test]
    fn standard_error_of_replicates() {
        assert!((standard_error(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert!(standard_error(&[1.0]).is_nan());
        assert!((standard_error(&[1.0, f64::NAN, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_se_of_mean() {
        let data: Vec<f64> = normal_pairs(10_000, 3, 0.0).iter().map(|p| p.0).collect();
        let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
        let se = bootstrap_standard_error(9, 200, &data, mean);
        assert!((se - 0.01).abs() < 0.003, "{se}");
        let again = bootstrap_standard_error(9, 200, &data, mean);
        assert_eq!(se, again);
    }
}
