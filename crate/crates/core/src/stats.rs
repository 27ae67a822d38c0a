//! Small statistics helpers for the Monte Carlo experiments.

use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("inputs must be positive and finite")]
    NonPositive,
    #[error("all n values are equal")]
    Degenerate,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64), StatsError> {
    if trials == 0 || successes > trials {
        return Err(StatsError::Invalid(format!("{successes} successes out of {trials} trials")));
    }
    if !(0.0..1.0).contains(&confidence) || confidence == 0.0 {
        return Err(StatsError::Invalid(format!("confidence {confidence}")));
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Ok((lo, hi))
}

/// Least-squares slope of `ln(mean)` against `ln(n)`.
pub fn fit_scaling(ns: &[f64], means: &[f64]) -> Result<f64, StatsError> {
    if ns.len() != means.len() {
        return Err(StatsError::Invalid("ns and means differ in length".into()));
    }
    if ns.len() < 3 {
        return Err(StatsError::TooFewPoints { need: 3, got: ns.len() });
    }
    if ns.iter().chain(means).any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(StatsError::NonPositive);
    }
    let xs: Vec<f64> = ns.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|y| y.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Degenerate);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Mean, median and 95th percentile (nearest rank).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Some(Summary { count: n, mean: sorted.iter().sum::<f64>() / n as f64, median, p95: sorted[rank - 1] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        // Closed form with z = 1.959964: centre 0.5, half-width 0.0961.
        assert!((lo - 0.40383).abs() < 1e-4, "{lo}");
        assert!((hi - 0.59617).abs() < 1e-4, "{hi}");
        assert_eq!(wilson_interval(0, 10, 0.95).unwrap().0, 0.0);
        assert_eq!(wilson_interval(10, 10, 0.95).unwrap().1, 1.0);
        assert!(wilson_interval(1, 0, 0.95).is_err());
    }

    #[test]
    fn scaling_fits() {
        let ns = [4.0, 8.0, 16.0, 32.0];
        let nlogn: Vec<f64> = ns.iter().map(|n: &f64| n * n.log2()).collect();
        let e = fit_scaling(&ns, &nlogn).unwrap();
        assert!((1.0..=1.5).contains(&e), "{e}");
        let sq: Vec<f64> = ns.iter().map(|n| n * n).collect();
        assert!((fit_scaling(&ns, &sq).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_scaling(&ns, &[7.0; 4]).unwrap().abs() < 1e-12);
        assert!(fit_scaling(&ns[..2], &sq[..2]).is_err());
        assert_eq!(fit_scaling(&[2.0; 3], &[1.0, 2.0, 3.0]), Err(StatsError::Degenerate));
        assert_eq!(fit_scaling(&ns, &[1.0, 0.0, 1.0, 1.0]), Err(StatsError::NonPositive));
    }

    #[test]
    fn summary_percentiles() {
        let values: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = summarize(&values).unwrap();
        assert_eq!(s.mean, 10.5);
        assert_eq!(s.median, 10.5);
        assert_eq!(s.p95, 19.0);
        assert!(summarize(&[]).is_none());
    }
}
