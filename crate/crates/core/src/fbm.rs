//! Exact fractional Brownian motion on a [`TimeGrid`], the Molchan kernel
//! `K_H` and the Cameron–Martin lift built from it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::grid::TimeGrid;
use crate::quad::{gauss8, midpoint};

/// Default number of cells for the `K_H` quadrature.
pub const DEFAULT_KERNEL_QUAD_POINTS: usize = 256;

/// Hurst index restricted to `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.5 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::param("hurst", format!("must lie in (1/2, 1), got {h}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn covariance(self, s: f64, t: f64) -> Result<f64> {
        cov_rh(self.0, s, t)
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        HurstParam::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

/// fBm covariance `½(t^{2H} + s^{2H} − |t−s|^{2H})`.
///
/// Accepts any `h` in `(0, 1]` so the Brownian case `h = 1/2` can be used
/// as a reference.
pub fn cov_rh(h: f64, s: f64, t: f64) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::Domain(format!(
            "covariance needs non-negative times, got s = {s}, t = {t}"
        )));
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Domain(format!("Hurst index must lie in (0, 1], got {h}")));
    }
    let two_h = 2.0 * h;
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Normalising constant `c_H = sqrt(H(2H−1) / B(2−2H, H−1/2))`.
pub fn kernel_constant(h: HurstParam) -> f64 {
    let h = h.value();
    (h * (2.0 * h - 1.0) / ln_beta(2.0 - 2.0 * h, h - 0.5).exp()).sqrt()
}

/// `K_H(t, s) = c_H s^{1/2−H} ∫_s^t (u−s)^{H−3/2} u^{H−1/2} du` for `t > s`,
/// zero for `t <= s`.
///
/// The substitution `u = s + v^p` with `p = 1/(H − 1/2)` turns the
/// integrand into `p (s + v^p)^{H−1/2}`, which is smooth, and the composite
/// midpoint rule with `quad_points` cells is applied to it.
pub fn kernel_kh(h: HurstParam, t: f64, s: f64, quad_points: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("K_H(t, s) needs s > 0, got s = {s}")));
    }
    if quad_points == 0 {
        return Err(Error::param("quad_points", "must be >= 1"));
    }
    if t <= s {
        return Ok(0.0);
    }
    Ok(kernel_unchecked(h, kernel_constant(h), t, s, quad_points))
}

fn kernel_unchecked(h: HurstParam, c_h: f64, t: f64, s: f64, quad_points: usize) -> f64 {
    let hv = h.value();
    let a = hv - 0.5;
    let p = 1.0 / a;
    let upper = (t - s).powf(a);
    let integral = midpoint(0.0, upper, quad_points, |v| p * (s + v.powf(p)).powf(a));
    c_h * s.powf(-a) * integral
}

/// `∫_0^{s∧t} K_H(t, u) K_H(s, u) du`, which equals `R_H(t, s)`.
///
/// The lower half of the range is mapped through `u = m w^{1/(2−2H)}` and
/// the upper half through `u = m − m w^{1/(H+1/2)}`, `m = s∧t`, so both
/// endpoint singularities become smooth before composite Gauss–Legendre.
pub fn kernel_gram(h: HurstParam, t: f64, s: f64, quad_points: usize) -> Result<f64> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!("kernel Gram needs t, s > 0, got ({t}, {s})")));
    }
    let c_h = kernel_constant(h);
    let m = t.min(s);
    let half = 0.5 * m;
    let hv = h.value();
    let k = |u: f64| {
        kernel_unchecked(h, c_h, t, u, quad_points) * kernel_unchecked(h, c_h, s, u, quad_points)
    };
    let panels = 32;
    let composite = |q: f64, map: &dyn Fn(f64) -> f64| {
        (0..panels)
            .map(|p| {
                let (lo, hi) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
                gauss8(lo, hi, |w| k(map(w)) * half * q * w.powf(q - 1.0))
            })
            .sum::<f64>()
    };
    let q_low = 1.0 / (2.0 - 2.0 * hv);
    let q_high = 1.0 / (hv + 0.5);
    let low = composite(q_low, &|w| half * w.powf(q_low));
    let high = composite(q_high, &|w| m - half * w.powf(q_high));
    Ok(low + high)
}

/// Cameron–Martin lift `t ↦ ∫_0^t K_H(t, s) h_s ds` at the forward nodes.
///
/// `hfun` holds the direction at the forward nodes of `grid` and is
/// interpolated linearly. Each cell uses 8-point Gauss–Legendre; the first
/// cell is mapped through `s = Δ w^q`, `q = 1/(3/2 − H)`, which absorbs the
/// `s^{1/2−H}` blow-up of the kernel at the origin.
pub fn cameron_martin_lift(
    grid: &TimeGrid,
    h: HurstParam,
    hfun: &[f64],
    quad_points: usize,
) -> Result<Vec<f64>> {
    let n = grid.forward_len();
    if hfun.len() != n {
        return Err(Error::GridMismatch(format!(
            "direction has {} values, grid has {} forward nodes",
            hfun.len(),
            n
        )));
    }
    if quad_points == 0 {
        return Err(Error::param("quad_points", "must be >= 1"));
    }
    let delta = grid.delta();
    let c_h = kernel_constant(h);
    let q = 1.0 / (1.5 - h.value());
    let interp = |s: f64| {
        let x = s / delta;
        let k = (x.floor() as usize).min(n - 2);
        let w = x - k as f64;
        hfun[k] * (1.0 - w) + hfun[k + 1] * w
    };
    let lift = map_indices(n, Execution::Parallel, |j| {
        if j == 0 {
            return 0.0;
        }
        let t = grid.forward_time(j);
        let kern = |s: f64| kernel_unchecked(h, c_h, t, s, quad_points);
        let first = gauss8(0.0, 1.0, |w| {
            let s = delta * w.powf(q);
            kern(s) * interp(s) * delta * q * w.powf(q - 1.0)
        });
        let rest: f64 = (1..j)
            .map(|k| {
                let lo = grid.forward_time(k);
                gauss8(lo, lo + delta, |s| kern(s) * interp(s))
            })
            .sum();
        first + rest
    });
    Ok(lift)
}

/// Packed lower-triangular Cholesky factor (row `i` holds `L[i][0..=i]`).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    packed: Vec<f64>,
}

impl CholeskyFactor {
    /// Factorizes the symmetric matrix whose `(i, j)` entry (`j <= i`) is
    /// `entry(i, j)`.
    pub fn factorize(dim: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut packed = vec![0.0; dim * (dim + 1) / 2];
        for i in 0..dim {
            let row_i = i * (i + 1) / 2;
            for j in 0..=i {
                let row_j = j * (j + 1) / 2;
                let dot = dot(&packed[row_i..row_i + j], &packed[row_j..row_j + j]);
                let s = entry(i, j) - dot;
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Factorization {
                            pivot: i,
                            residual: s,
                        });
                    }
                    packed[row_i + i] = s.sqrt();
                } else {
                    packed[row_i + j] = s / packed[row_j + j];
                }
            }
        }
        Ok(Self { dim, packed })
    }

    /// Cholesky factor of `R_H` at the nodes `Δ, 2Δ, …, dim·Δ`.
    ///
    /// Increments on a uniform grid are stationary, so their covariance is
    /// Toeplitz and the Schur algorithm factors it in `O(dim²)`. Summing each
    /// column cumulatively maps that factor to the (unique) factor of `R_H`.
    pub fn fbm_uniform(dim: usize, delta: f64, hurst: HurstParam) -> Result<Self> {
        let two_h = 2.0 * hurst.value();
        let scale = 0.5 * delta.powf(two_h);
        let pw = |k: f64| k.abs().powf(two_h);
        let rho: Vec<f64> = (0..dim)
            .map(|k| {
                let k = k as f64;
                scale * (pw(k + 1.0) - 2.0 * pw(k) + pw(k - 1.0))
            })
            .collect();
        let mut packed = vec![0.0; dim * (dim + 1) / 2];
        let root = rho[0].sqrt();
        let mut a: Vec<f64> = rho.iter().map(|r| r / root).collect();
        let mut b = a.clone();
        b[0] = 0.0;
        for k in 0..dim {
            let mut acc = 0.0;
            for i in k..dim {
                acc += a[i];
                packed[i * (i + 1) / 2 + k] = acc;
            }
            if k + 1 == dim {
                break;
            }
            for i in (k + 1..dim).rev() {
                a[i] = a[i - 1];
            }
            let gamma = b[k + 1] / a[k + 1];
            let s = (1.0 - gamma * gamma).sqrt();
            if !(s > 0.0) {
                return Err(Error::Factorization {
                    pivot: k + 1,
                    residual: 1.0 - gamma * gamma,
                });
            }
            for i in k + 1..dim {
                let (ai, bi) = (a[i], b[i]);
                a[i] = (ai - gamma * bi) / s;
                b[i] = (bi - gamma * ai) / s;
            }
        }
        Ok(Self { dim, packed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..=start + i]
    }

    /// `(L Lᵀ)[i][j]`.
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        let k = i.min(j) + 1;
        dot(&a[..k], &b[..k])
    }

    /// `L ξ`.
    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), &xi[..=i])).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// One sampled fBm trajectory on the forward nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverPath {
    pub grid: TimeGrid,
    pub hurst: f64,
    pub seed: u64,
    pub index: u64,
    values: Vec<f64>,
}

impl DriverPath {
    /// Wraps a user-supplied driver; `values[0]` must be zero.
    pub fn from_values(grid: TimeGrid, hurst: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.forward_len() {
            return Err(Error::GridMismatch(format!(
                "driver has {} values, grid has {} forward nodes",
                values.len(),
                grid.forward_len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::Domain(format!(
                "driver must start at zero, got {}",
                values[0]
            )));
        }
        Ok(Self {
            grid,
            hurst,
            seed: 0,
            index: 0,
            values,
        })
    }

    /// Deterministic driver `t ↦ g(t) − g(0)` on the forward nodes.
    pub fn from_fn(grid: TimeGrid, g: impl Fn(f64) -> f64) -> Self {
        let g0 = g(0.0);
        let values = grid.forward_times().into_iter().map(|t| g(t) - g0).collect();
        Self {
            grid,
            hurst: f64::NAN,
            seed: 0,
            index: 0,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Returns `self + scale * h` (used for finite-difference perturbations).
    pub fn perturbed(&self, h: &[f64], scale: f64) -> Result<Self> {
        if h.len() != self.values.len() {
            return Err(Error::GridMismatch(format!(
                "perturbation has {} values, driver has {}",
                h.len(),
                self.values.len()
            )));
        }
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(h)
            .map(|(w, d)| w + scale * (d - h[0]))
            .collect();
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Increment `W_{k+1} − W_k` over forward cell `k`.
    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }
}

/// Gaussian generator for path `index` of the ensemble keyed by `seed`.
///
/// ChaCha20 is counter based: the stream id is the path index, so draws for
/// different paths never overlap and do not depend on evaluation order.
pub fn path_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exact fBm sampler: `W = L ξ` with `L Lᵀ = [R_H(t_i, t_j)]` over the
/// forward nodes in `(0, T]`.
#[derive(Debug)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: HurstParam,
    factor: CholeskyFactor,
}

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: HurstParam) -> Result<Self> {
        let factor = CholeskyFactor::fbm_uniform(grid.forward_len() - 1, grid.delta(), hurst)?;
        Ok(Self {
            grid,
            hurst,
            factor,
        })
    }

    /// Shared sampler for `(grid, hurst)`; the factorization runs once.
    pub fn cached(grid: TimeGrid, hurst: HurstParam) -> Result<Arc<Self>> {
        type Key = (u64, u64, usize, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<FbmSampler>>>> = OnceLock::new();
        let key = (
            grid.delay().to_bits(),
            grid.horizon().to_bits(),
            grid.steps_per_delay(),
            hurst.value().to_bits(),
        );
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(s));
        }
        // factorize outside the lock; a racing duplicate is harmless
        let sampler = Arc::new(FbmSampler::new(grid, hurst)?);
        let mut guard = cache.lock().unwrap();
        Ok(Arc::clone(guard.entry(key).or_insert(sampler)))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// Path `index` of the ensemble keyed by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> DriverPath {
        let mut rng = path_rng(seed, index);
        let xi: Vec<f64> = (0..self.factor.dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let mut values = Vec::with_capacity(self.factor.dim() + 1);
        values.push(0.0);
        values.extend(self.factor.apply(&xi));
        DriverPath {
            grid: self.grid,
            hurst: self.hurst.value(),
            seed,
            index,
            values,
        }
    }

    pub fn sample_many(&self, seed: u64, count: usize, exec: Execution) -> Vec<DriverPath> {
        map_indices(count, exec, |i| self.sample(seed, i as u64))
    }
}

/// Paths `0..count` of the ensemble keyed by `seed`.
pub fn sample_fbm(
    grid: &TimeGrid,
    h: HurstParam,
    seed: u64,
    count: usize,
) -> Result<Vec<DriverPath>> {
    if count == 0 {
        return Err(Error::param("count", "must be >= 1"));
    }
    let sampler = FbmSampler::cached(*grid, h)?;
    Ok(sampler.sample_many(seed, count, Execution::Parallel))
}
