//! Monte Carlo ensembles for the law of `X_{t0}` and density diagnostics
//! for its restriction to `(0, ∞)`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec::{try_map_indices, Execution};
use crate::fbm::FbmSampler;
use crate::model::ModelSpec;
use crate::solver::{solve_penalized, solve_reflected, PenaltySpec};

/// Asymptotic two-sided 1% critical value of `√n D_n`.
pub const KS_CRITICAL_1PCT: f64 = 1.628;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Reflected,
    Penalized(PenaltySpec),
}

/// `X_{t0}` for paths `0..n_paths` of the ensemble keyed by `seed`.
pub fn monte_carlo_ensemble(
    model: &ModelSpec,
    method: Method,
    n_paths: usize,
    seed: u64,
    t0: f64,
) -> Result<Vec<f64>> {
    monte_carlo_ensemble_with(model, method, n_paths, seed, t0, Execution::Parallel)
}

pub fn monte_carlo_ensemble_with(
    model: &ModelSpec,
    method: Method,
    n_paths: usize,
    seed: u64,
    t0: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be >= 1"));
    }
    let k0 = model
        .grid
        .forward_index(t0)
        .ok_or_else(|| Error::Domain(format!("t0 = {t0} is not a forward grid node")))?;
    if let Method::Penalized(p) = &method {
        p.validate(&model.grid)?;
    }
    let sampler = FbmSampler::cached(model.grid, model.hurst)?;
    try_map_indices(n_paths, exec, |i| {
        let driver = sampler.sample(seed, i as u64);
        let sol = match &method {
            Method::Reflected => solve_reflected(model, &driver)?,
            Method::Penalized(p) => solve_penalized(model, p, &driver)?,
        };
        Ok(sol.forward_x()[k0])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `bins` equal cells on `[lo, hi]`; values outside are ignored and `hi`
    /// falls in the last cell.
    pub fn over(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins)
            .map(|k| if k == bins { hi } else { lo + k as f64 * width })
            .collect();
        let mut counts = vec![0; bins];
        for &v in samples {
            if v < lo || v > hi {
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Empty bins strictly between the first and last occupied bins.
    pub fn interior_gaps(&self) -> usize {
        let first = self.counts.iter().position(|&c| c > 0);
        let last = self.counts.iter().rposition(|&c| c > 0);
        match (first, last) {
            (Some(a), Some(b)) => self.counts[a..=b].iter().filter(|&&c| c == 0).count(),
            _ => 0,
        }
    }
}

/// Gaussian KDE reflected at zero, normalised by the full sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

impl Kde {
    /// Trapezoidal mass over the evaluation grid.
    pub fn mass(&self) -> f64 {
        self.points
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    /// `(probability, quantile)` pairs.
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub t0: f64,
    pub n_paths: usize,
    pub theta: f64,
    pub atom_count: usize,
    /// Fraction of samples `<= theta`.
    pub atom_mass_below_theta: f64,
    pub histogram: Histogram,
    pub kde: Option<Kde>,
    pub summary: Summary,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let k = pos.floor() as usize;
    let w = pos - k as f64;
    if k + 1 < sorted.len() {
        sorted[k] * (1.0 - w) + sorted[k + 1] * w
    } else {
        sorted[k]
    }
}

fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^{−1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, var) = mean_var(&sorted);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (var.sqrt(), iqr / 1.34) {
        (sd, r) if r > 0.0 => sd.min(r),
        (sd, _) => sd,
    };
    let h = 0.9 * spread * (sorted.len() as f64).powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3 * mean.abs().max(1.0)
    }
}

/// Atom estimate, histogram and KDE of the part above `theta`.
pub fn density_report(
    samples: &[f64],
    t0: f64,
    theta: f64,
    bins: usize,
    bandwidth: Option<f64>,
) -> Result<DensityReport> {
    if samples.is_empty() {
        return Err(Error::param("samples", "need at least one sample"));
    }
    if !(theta > 0.0) {
        return Err(Error::param("theta", format!("must be > 0, got {theta}")));
    }
    if bins < 10 {
        return Err(Error::param("bins", format!("must be >= 10, got {bins}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, variance) = mean_var(&sorted);
    let summary = Summary {
        mean,
        variance,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        quantiles: [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
            .iter()
            .map(|&p| (p, quantile_sorted(&sorted, p)))
            .collect(),
    };
    let split = sorted.partition_point(|&v| v <= theta);
    let positive = &sorted[split..];
    let n = samples.len();

    let (histogram, kde) = if positive.is_empty() {
        (
            Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            },
            None,
        )
    } else {
        let lo = positive[0];
        let hi = positive[positive.len() - 1];
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let w = 1e-3 * lo.abs().max(1.0);
            (lo - w, hi + w)
        };
        let hist = Histogram::over(positive, lo, hi, bins);
        let bw = match bandwidth {
            Some(b) if b > 0.0 => b,
            _ => silverman_bandwidth(positive),
        };
        (hist, Some(reflected_kde(positive, n, bw)))
    };

    Ok(DensityReport {
        t0,
        n_paths: n,
        theta,
        atom_count: split,
        atom_mass_below_theta: split as f64 / n as f64,
        histogram,
        kde,
        summary,
    })
}

fn reflected_kde(positive: &[f64], total: usize, bw: f64) -> Kde {
    let top = positive[positive.len() - 1] + 5.0 * bw;
    let count = ((top / (0.25 * bw)).ceil() as usize).clamp(256, 8192);
    let step = top / (count - 1) as f64;
    let norm = 1.0 / (total as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    let points: Vec<f64> = (0..count).map(|k| k as f64 * step).collect();
    let values = crate::exec::map_indices(count, Execution::Parallel, |k| {
        let x = points[k];
        positive
            .iter()
            .map(|&s| {
                let a = (x - s) / bw;
                let b = (x + s) / bw;
                (-0.5 * a * a).exp() + (-0.5 * b * b).exp()
            })
            .sum::<f64>()
            * norm
    });
    Kde {
        bandwidth: bw,
        points,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub pass_at_1pct: bool,
}

/// Two-sided Kolmogorov–Smirnov statistic against `N(mean, variance)`;
/// passes iff `D_n <= 1.628 / √n`.
pub fn ks_gaussian_check(samples: &[f64], mean: f64, variance: f64) -> Result<KsOutcome> {
    if !(variance > 0.0) {
        return Err(Error::param("variance", format!("must be > 0, got {variance}")));
    }
    if samples.len() < 100 {
        return Err(Error::param(
            "samples",
            format!("need at least 100 samples, got {}", samples.len()),
        ));
    }
    let normal = Normal::new(mean, variance.sqrt())
        .map_err(|e| Error::param("variance", e.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let critical = KS_CRITICAL_1PCT / n.sqrt();
    Ok(KsOutcome {
        statistic,
        critical,
        pass_at_1pct: statistic <= critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_samples() {
        let r = density_report(&[5.0; 100], 1.0, 0.01, 10, None).unwrap();
        assert_eq!(r.atom_mass_below_theta, 0.0);
        assert_eq!(r.histogram.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(r.histogram.total(), 100);
        assert!((r.kde.unwrap().mass() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn atom_counting() {
        let r = density_report(&[0.0, 0.0, 1.0, 2.0], 1.0, 0.01, 10, None).unwrap();
        assert_eq!(r.atom_mass_below_theta, 0.5);
        assert_eq!(r.histogram.total() + r.atom_count, r.n_paths);
        assert!((r.kde.as_ref().unwrap().mass() - 0.5).abs() < 1e-2);
    }

    #[test]
    fn all_mass_at_zero_gives_empty_histogram() {
        let r = density_report(&[0.0; 20], 1.0, 0.01, 10, None).unwrap();
        assert_eq!(r.atom_mass_below_theta, 1.0);
        assert!(r.histogram.counts.is_empty());
        assert!(r.kde.is_none());
    }

    #[test]
    fn report_validation() {
        assert!(density_report(&[], 1.0, 0.01, 10, None).is_err());
        assert!(density_report(&[1.0], 1.0, 0.0, 10, None).is_err());
        assert!(density_report(&[1.0], 1.0, 0.01, 5, None).is_err());
    }

    #[test]
    fn kde_mass_matches_positive_fraction() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..2000)
            .map(|_| {
                let v: f64 = rng.sample(StandardNormal);
                (v * 0.3 + 0.2).max(0.0)
            })
            .collect();
        let r = density_report(&s, 1.0, 1e-4, 30, None).unwrap();
        let mass = r.kde.as_ref().unwrap().mass();
        assert!((mass - (1.0 - r.atom_mass_below_theta)).abs() < 1e-2);
        assert!(r.atom_mass_below_theta > 0.2);
    }

    #[test]
    fn ks_accepts_its_own_law_and_rejects_degenerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(20);
        let s: Vec<f64> = (0..10_000)
            .map(|_| 1.5 + 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let ok = ks_gaussian_check(&s, 1.5, 4.0).unwrap();
        assert!(ok.pass_at_1pct, "{ok:?}");
        let bad = ks_gaussian_check(&[0.0; 200], 0.0, 1.0).unwrap();
        assert!(!bad.pass_at_1pct);
        assert!((bad.statistic - 0.5).abs() < 1e-12);
        assert!(ks_gaussian_check(&s, 0.0, 0.0).is_err());
        assert!(ks_gaussian_check(&s[..50], 0.0, 1.0).is_err());
    }

    #[test]
    fn histogram_gap_count() {
        let h = Histogram::over(&[0.05, 0.95, 0.951], 0.0, 1.0, 10);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[9], 2);
        assert_eq!(h.interior_gaps(), 8);
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
    }
}
