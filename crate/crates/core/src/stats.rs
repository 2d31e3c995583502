//! Empirical tail estimation and the quantitative tail comparison.
//!
//! The headline check is [`theorem_check`]: given sojourn samples from an
//! MPS run and waiting samples from an MROS run, test whether `ρ·P(S > t)`
//! and `P(W > t)` agree uniformly within an honest band. The band combines
//! Dvoretzky–Kiefer–Wolfowitz envelopes for both empirical tails with a
//! slack multiplier that absorbs the residual serial correlation left after
//! subsampling.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("at least one sample is required")]
    EmptySamples,
    #[error("samples must be finite and non-negative, got {value}")]
    BadSample { value: f64 },
    #[error("confidence parameter must lie in (0, 1), got {value}")]
    BadDelta { value: f64 },
    #[error("load must lie in (0, 1], got {value}")]
    BadRho { value: f64 },
    #[error("slack multiplier must be at least 1, got {value}")]
    BadSlack { value: f64 },
    #[error("grid must contain at least 2 points")]
    BadGrid,
    #[error("{needed} samples needed, got {got}")]
    TooFewSamples { got: usize, needed: usize },
}

/// Sorted sample set with an evaluable complementary CDF
/// `F̄(t) = #{x : x > t} / n` (strict inequality).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTail {
    sorted: Vec<f64>,
}

impl EmpiricalTail {
    pub fn from_samples(samples: &[f64]) -> Result<Self, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::EmptySamples);
        }
        for &value in samples {
            if !value.is_finite() || value < 0.0 {
                return Err(StatsError::BadSample { value });
            }
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    /// Construction rejects empty sample sets.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `P(X > t)` as an exact count ratio.
    pub fn survival(&self, t: f64) -> f64 {
        let at_most = self.sorted.partition_point(|&x| x <= t);
        (self.sorted.len() - at_most) as f64 / self.sorted.len() as f64
    }
}

/// Half-width `sqrt(ln(2/δ)/(2n))` of the DKW confidence band at level
/// `1 − δ`.
pub fn dkw_epsilon(n: usize, delta: f64) -> Result<f64, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySamples);
    }
    if delta <= 0.0 || delta >= 1.0 {
        return Err(StatsError::BadDelta { value: delta });
    }
    Ok(((2.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Result of a two-sample Kolmogorov–Smirnov test at level `alpha`
/// (asymptotic critical value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Two-sample KS test: sup-distance between the empirical distributions,
/// compared against `c(α)·sqrt((n+m)/(n·m))` with `c(α) = sqrt(−ln(α/2)/2)`.
pub fn two_sample_ks(
    a: &EmpiricalTail,
    b: &EmpiricalTail,
    alpha: f64,
) -> Result<KsOutcome, StatsError> {
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(StatsError::BadDelta { value: alpha });
    }
    let xs = a.sorted();
    let ys = b.sorted();
    let n = xs.len() as f64;
    let m = ys.len() as f64;

    let mut statistic = 0.0f64;
    let mut i = 0;
    let mut j = 0;
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] <= next {
            i += 1;
        }
        while j < ys.len() && ys[j] <= next {
            j += 1;
        }
        statistic = statistic.max((i as f64 / n - j as f64 / m).abs());
    }

    let critical_value = (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt();
    Ok(KsOutcome {
        statistic,
        critical_value,
        alpha,
        pass: statistic < critical_value,
    })
}

/// One evaluation point of the tail comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailGridPoint {
    pub t: f64,
    /// ρ · F̄_S(t)
    pub scaled_sojourn_tail: f64,
    /// F̄_W(t)
    pub waiting_tail: f64,
    pub discrepancy: f64,
}

/// Outcome of comparing `ρ·P(S > t)` against `P(W > t)` on a merged
/// quantile grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailComparisonReport {
    pub rho: f64,
    pub delta: f64,
    pub slack: f64,
    pub sojourn_samples: usize,
    pub waiting_samples: usize,
    pub grid: Vec<TailGridPoint>,
    pub sup_discrepancy: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Compares the two empirical tails on the merged-quantile grid. Passes
/// when the sup-discrepancy stays below `slack · (ρ·ε_S(δ/2) + ε_W(δ/2))`
/// with `ε` the DKW half-widths.
pub fn theorem_check(
    sojourn_tail: &EmpiricalTail,
    waiting_tail: &EmpiricalTail,
    rho: f64,
    delta: f64,
    slack: f64,
    grid_size: usize,
) -> Result<TailComparisonReport, StatsError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(StatsError::BadRho { value: rho });
    }
    if delta <= 0.0 || delta >= 1.0 {
        return Err(StatsError::BadDelta { value: delta });
    }
    if !(slack >= 1.0) {
        return Err(StatsError::BadSlack { value: slack });
    }
    if grid_size < 2 {
        return Err(StatsError::BadGrid);
    }

    // Quantiles of the union of both sample sets resolve the tail region
    // where the discrepancy concentrates.
    let mut merged = Vec::with_capacity(sojourn_tail.len() + waiting_tail.len());
    let (mut i, mut j) = (0, 0);
    let xs = sojourn_tail.sorted();
    let ys = waiting_tail.sorted();
    while i < xs.len() || j < ys.len() {
        let take_x = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x <= y,
            (Some(_), None) => true,
            _ => false,
        };
        if take_x {
            merged.push(xs[i]);
            i += 1;
        } else {
            merged.push(ys[j]);
            j += 1;
        }
    }

    let points = grid_size.min(merged.len());
    let mut grid: Vec<TailGridPoint> = Vec::with_capacity(points);
    let mut sup_discrepancy = 0.0f64;
    for k in 0..points {
        let rank = if points == 1 {
            0
        } else {
            (k as f64 / (points - 1) as f64 * (merged.len() - 1) as f64).round() as usize
        };
        let t = merged[rank];
        if grid.last().is_some_and(|p| p.t == t) {
            continue;
        }
        let scaled_sojourn_tail = rho * sojourn_tail.survival(t);
        let waiting = waiting_tail.survival(t);
        let discrepancy = scaled_sojourn_tail - waiting;
        sup_discrepancy = sup_discrepancy.max(discrepancy.abs());
        grid.push(TailGridPoint {
            t,
            scaled_sojourn_tail,
            waiting_tail: waiting,
            discrepancy,
        });
    }

    let threshold = slack
        * (rho * dkw_epsilon(sojourn_tail.len(), delta / 2.0)?
            + dkw_epsilon(waiting_tail.len(), delta / 2.0)?);
    Ok(TailComparisonReport {
        rho,
        delta,
        slack,
        sojourn_samples: sojourn_tail.len(),
        waiting_samples: waiting_tail.len(),
        grid,
        sup_discrepancy,
        threshold,
        pass: sup_discrepancy <= threshold,
    })
}

/// Sample mean and normal-approximation confidence half-width.
pub fn mean_with_ci(samples: &[f64], confidence: f64) -> Result<(f64, f64), StatsError> {
    if confidence <= 0.0 || confidence >= 1.0 {
        return Err(StatsError::BadDelta { value: confidence });
    }
    let (mean, se) = mean_with_standard_error(samples)?;
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    Ok((mean, z * se))
}

/// Sample mean and its standard error.
pub fn mean_with_standard_error(samples: &[f64]) -> Result<(f64, f64), StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            got: samples.len(),
            needed: 2,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (variance / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn exp_draws(seed: u64, index: u64, n: usize, rate: f64) -> Vec<f64> {
        let mut rng = crate::rng::stream(seed, crate::rng::StreamDomain::MpsEngine, index);
        (0..n)
            .map(|_| -(1.0 - rng.random::<f64>()).ln() / rate)
            .collect()
    }

    #[test]
    fn survival_counts_strictly_greater() {
        let tail = EmpiricalTail::from_samples(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(tail.survival(2.0), 1.0 / 3.0);
        assert_relative_eq!(tail.survival(0.5), 1.0);
        assert_relative_eq!(tail.survival(3.0), 0.0);
        assert_relative_eq!(tail.survival(-1.0), 1.0);
    }

    #[test]
    fn survival_at_single_sample() {
        let tail = EmpiricalTail::from_samples(&[5.0]).unwrap();
        assert_relative_eq!(tail.survival(5.0), 0.0);
        assert_relative_eq!(tail.survival(4.99), 1.0);
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(matches!(
            EmpiricalTail::from_samples(&[]),
            Err(StatsError::EmptySamples)
        ));
        assert!(matches!(
            EmpiricalTail::from_samples(&[1.0, -0.5]),
            Err(StatsError::BadSample { .. })
        ));
        assert!(matches!(
            EmpiricalTail::from_samples(&[f64::NAN]),
            Err(StatsError::BadSample { .. })
        ));
    }

    #[test]
    fn dkw_epsilon_values() {
        assert_relative_eq!(
            dkw_epsilon(1_000_000, 0.01).unwrap(),
            0.001628,
            epsilon = 1e-6
        );
        assert_relative_eq!(dkw_epsilon(1, 0.5).unwrap(), 0.8326, epsilon = 1e-4);
        assert!(dkw_epsilon(0, 0.5).is_err());
        assert!(dkw_epsilon(10, 0.0).is_err());
        assert!(dkw_epsilon(10, 1.5).is_err());
    }

    #[test]
    fn dkw_epsilon_monotonicity() {
        let base = dkw_epsilon(1000, 0.05).unwrap();
        assert!(dkw_epsilon(2000, 0.05).unwrap() < base);
        assert!(dkw_epsilon(1000, 0.01).unwrap() > base);
    }

    #[test]
    fn empirical_tail_tracks_exponential_within_dkw_band() {
        let n = 100_000;
        let samples = exp_draws(2024, 77, n, 1.0);
        let tail = EmpiricalTail::from_samples(&samples).unwrap();
        let epsilon = dkw_epsilon(n, 0.01).unwrap();
        // Check the band just before and just after every jump.
        let mut sup = 0.0f64;
        for (k, &x) in tail.sorted().iter().enumerate() {
            let expected = (-x).exp();
            let after = (n - k - 1) as f64 / n as f64;
            let before = (n - k) as f64 / n as f64;
            sup = sup
                .max((after - expected).abs())
                .max((before - expected).abs());
        }
        assert!(sup < epsilon, "sup deviation {sup} exceeds DKW bound {epsilon}");
    }

    #[test]
    fn ks_statistic_zero_for_identical_samples() {
        let a = EmpiricalTail::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = EmpiricalTail::from_samples(&[2.0, 1.0, 4.0, 3.0]).unwrap();
        let outcome = two_sample_ks(&a, &b, 0.01).unwrap();
        assert_eq!(outcome.statistic, 0.0);
        assert!(outcome.pass);
    }

    #[test]
    fn ks_statistic_known_value() {
        let a = EmpiricalTail::from_samples(&[1.0, 1.0, 4.0, 4.0]).unwrap();
        let b = EmpiricalTail::from_samples(&[1.0, 1.0, 1.0, 4.0]).unwrap();
        let outcome = two_sample_ks(&a, &b, 0.05).unwrap();
        assert_relative_eq!(outcome.statistic, 0.25);
    }

    #[test]
    fn ks_separates_different_rates() {
        let a = exp_draws(7, 3, 10_000, 1.0);
        let b = exp_draws(7, 4, 10_000, 2.0);
        let outcome = two_sample_ks(
            &EmpiricalTail::from_samples(&a).unwrap(),
            &EmpiricalTail::from_samples(&b).unwrap(),
            0.01,
        )
        .unwrap();
        assert!(!outcome.pass, "distinct distributions must be rejected");
    }

    #[test]
    fn ks_level_holds_under_null() {
        // Split a single stream in half; at α = 0.01 the vast majority of
        // repetitions must pass.
        let mut passes = 0;
        for rep in 0..100 {
            let draws = exp_draws(1234, rep, 20_000, 1.0);
            let (first, second) = draws.split_at(10_000);
            let outcome = two_sample_ks(
                &EmpiricalTail::from_samples(first).unwrap(),
                &EmpiricalTail::from_samples(second).unwrap(),
                0.01,
            )
            .unwrap();
            if outcome.pass {
                passes += 1;
            }
        }
        assert!(passes >= 95, "only {passes}/100 null repetitions passed");
    }

    #[test]
    fn theorem_check_identity_with_unit_rho() {
        let samples = [0.5, 1.0, 1.5, 2.0, 2.5];
        let a = EmpiricalTail::from_samples(&samples).unwrap();
        let b = EmpiricalTail::from_samples(&samples).unwrap();
        let report = theorem_check(&a, &b, 1.0, 0.01, 1.0, 16).unwrap();
        assert_eq!(report.sup_discrepancy, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn theorem_check_scaled_exponential_fixture_passes() {
        // Single-class fixture at ρ = 1/2: sojourns exponential with rate
        // μ − Λ = 1/2; waiting times drawn from the matching mixture, zero
        // with probability 1 − ρ and exponential(μ − Λ) otherwise.
        let n = 200_000;
        let s = exp_draws(42, 0, n, 0.5);
        let mut rng = crate::rng::stream(42, crate::rng::StreamDomain::MrosEngine, 1);
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.5 {
                    0.0
                } else {
                    -(1.0 - rng.random::<f64>()).ln() / 0.5
                }
            })
            .collect();
        let report = theorem_check(
            &EmpiricalTail::from_samples(&s).unwrap(),
            &EmpiricalTail::from_samples(&w).unwrap(),
            0.5,
            0.01,
            3.0,
            512,
        )
        .unwrap();
        assert!(
            report.pass,
            "sup {} exceeded threshold {}",
            report.sup_discrepancy, report.threshold
        );
    }

    #[test]
    fn theorem_check_rejects_bad_parameters() {
        let tail = EmpiricalTail::from_samples(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            theorem_check(&tail, &tail, 0.0, 0.01, 3.0, 8),
            Err(StatsError::BadRho { .. })
        ));
        assert!(matches!(
            theorem_check(&tail, &tail, 1.5, 0.01, 3.0, 8),
            Err(StatsError::BadRho { .. })
        ));
        assert!(matches!(
            theorem_check(&tail, &tail, 0.5, 0.0, 3.0, 8),
            Err(StatsError::BadDelta { .. })
        ));
        assert!(matches!(
            theorem_check(&tail, &tail, 0.5, 0.01, 0.5, 8),
            Err(StatsError::BadSlack { .. })
        ));
        assert!(matches!(
            theorem_check(&tail, &tail, 0.5, 0.01, 3.0, 1),
            Err(StatsError::BadGrid)
        ));
    }

    #[test]
    fn theorem_check_grid_is_monotone() {
        let s = exp_draws(5, 1, 5_000, 0.5);
        let w = exp_draws(5, 2, 5_000, 0.5);
        let report = theorem_check(
            &EmpiricalTail::from_samples(&s).unwrap(),
            &EmpiricalTail::from_samples(&w).unwrap(),
            0.5,
            0.01,
            3.0,
            64,
        )
        .unwrap();
        for pair in report.grid.windows(2) {
            assert!(pair[0].t < pair[1].t);
            assert!(pair[0].scaled_sojourn_tail >= pair[1].scaled_sojourn_tail);
            assert!(pair[0].waiting_tail >= pair[1].waiting_tail);
        }
    }

    #[test]
    fn discrepancy_scales_under_role_swap() {
        let s = exp_draws(15, 2, 2_000, 0.5);
        let w = exp_draws(15, 3, 2_000, 1.0);
        let rho = 0.5;
        let s_tail = EmpiricalTail::from_samples(&s).unwrap();
        let w_tail = EmpiricalTail::from_samples(&w).unwrap();
        let forward = theorem_check(&s_tail, &w_tail, rho, 0.01, 3.0, 4_000).unwrap();
        // Swapping roles and replacing ρ by 1/ρ rescales every pointwise
        // discrepancy by 1/ρ, so the sup does the same.
        let mut sup_swapped = 0.0f64;
        for point in &forward.grid {
            let swapped = (1.0 / rho) * w_tail.survival(point.t) - s_tail.survival(point.t);
            sup_swapped = sup_swapped.max(swapped.abs());
        }
        assert_relative_eq!(
            sup_swapped,
            forward.sup_discrepancy / rho,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mean_with_ci_basics() {
        let (mean, half) = mean_with_ci(&[1.0, 1.0, 1.0, 1.0], 0.95).unwrap();
        assert_relative_eq!(mean, 1.0);
        assert_relative_eq!(half, 0.0);
        let (mean, _) = mean_with_ci(&[0.0, 2.0], 0.95).unwrap();
        assert_relative_eq!(mean, 1.0);
        assert!(matches!(
            mean_with_ci(&[1.0], 0.95),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert!(mean_with_ci(&[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn sample_mean_obeys_clt_for_exponentials() {
        let samples = exp_draws(99, 11, 1_000_000, 1.0);
        let (mean, se) = mean_with_standard_error(&samples).unwrap();
        assert!(
            (mean - 1.0).abs() <= 3.0 * se,
            "mean {mean} outside 3 standard errors ({se})"
        );
    }
}
