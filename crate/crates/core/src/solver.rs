//! Euler schemes for the delay equation on `[−r, T]`.
//!
//! All schemes advance one delay interval `[(l−1)r, lr]` at a time. Inside
//! interval `l` the diffusion coefficient only reads the path on earlier
//! intervals, so each interval is an ordinary (non-delayed) problem driven
//! by a known integrator.
//!
//! The penalized scheme reads its delayed argument from the reflected
//! solution (the limit object), which it carries along as a companion
//! bundle. This keeps the noise term identical across a penalty ladder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::DriverPath;
use crate::grid::TimeGrid;
use crate::model::{CoefficientFn, ModelSpec};

/// `sup_{x<0} |f′(x)| = 3 (2/3)^{2/3} e^{−2/3}`.
pub const PENALTY_SLOPE_BOUND: f64 = 1.175_431_777_054_615;

/// Penalty `f(x) = 1 − exp(x³)` for `x < 0`, zero otherwise.
///
/// `f` is `C²_b`, non-increasing, and `0 < f(x) ≤ min(1, |x|³) ≤ x^−` on
/// `(−1, 0)` while `f < 1 ≤ |x|` below −1.
pub fn penalty_f(x: f64) -> f64 {
    if x >= 0.0 {
        0.0
    } else {
        -(x * x * x).exp_m1()
    }
}

pub fn penalty_f_prime(x: f64) -> f64 {
    if x >= 0.0 {
        0.0
    } else {
        -3.0 * x * x * (x * x * x).exp()
    }
}

/// Penalty strength and drift substepping for the penalized scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub epsilon: f64,
    pub substep_factor: usize,
}

impl PenaltySpec {
    pub fn new(epsilon: f64, substep_factor: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if substep_factor == 0 {
            return Err(Error::param("substep_factor", "must be >= 1"));
        }
        Ok(Self {
            epsilon,
            substep_factor,
        })
    }

    /// Smallest substep factor with `Δ / factor <= ε / 4`.
    pub fn required_substeps(epsilon: f64, grid: &TimeGrid) -> usize {
        ((4.0 * grid.delta() / epsilon) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn for_grid(epsilon: f64, grid: &TimeGrid) -> Result<Self> {
        Self::new(epsilon, Self::required_substeps(epsilon, grid))
    }

    pub fn substep(&self, grid: &TimeGrid) -> f64 {
        grid.delta() / self.substep_factor as f64
    }

    /// Explicit Euler on the stiff drift needs `Δ_sub <= ε/4`.
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let substep = self.substep(grid);
        let limit = self.epsilon / 4.0;
        if substep > limit * (1.0 + 1e-12) {
            return Err(Error::Stability {
                substep,
                limit,
                required: Self::required_substeps(self.epsilon, grid),
            });
        }
        Ok(())
    }

    /// `b_ε(x) = b(x) + f(x)/ε`.
    pub fn drift(&self, b: &CoefficientFn, x: f64) -> f64 {
        b.eval(x) + penalty_f(x) / self.epsilon
    }

    pub fn drift_derivative(&self, b: &CoefficientFn, x: f64) -> f64 {
        b.derivative(x) + penalty_f_prime(x) / self.epsilon
    }

    /// `substep_factor` explicit Euler substeps of the penalized drift.
    pub fn drift_flow(&self, b: &CoefficientFn, x: f64, substep: f64) -> f64 {
        let mut x = x;
        for _ in 0..self.substep_factor {
            x += substep * self.drift(b, x);
        }
        x
    }

    /// Derivative of [`PenaltySpec::drift_flow`] with respect to its start
    /// point: `Π (1 + b_ε′(x_sub) Δ_sub)` along the substeps.
    pub fn drift_flow_derivative(&self, b: &CoefficientFn, x: f64, substep: f64) -> f64 {
        let mut x = x;
        let mut factor = 1.0;
        for _ in 0..self.substep_factor {
            factor *= 1.0 + substep * self.drift_derivative(b, x);
            x += substep * self.drift(b, x);
        }
        factor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverKind {
    Reflected,
    Penalized {
        epsilon: f64,
        substep_factor: usize,
    },
}

/// Solution paths on the full grid `[−r, lr]` after `l` completed intervals.
///
/// Reflected runs carry `x = z + y`. Penalized runs carry `x = x^ε`,
/// `z = η_0 + ∫σ(x_{s−r}) dW` and no regulator; their delayed argument is
/// the reflected companion returned by [`SolutionBundle::limit`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBundle {
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub z: Vec<f64>,
    pub kind: SolverKind,
    grid: TimeGrid,
    limit: Option<Box<SolutionBundle>>,
    completed: usize,
}

impl SolutionBundle {
    /// Bundle holding only the initial segment, ready for interval 1.
    pub fn initial_reflected(model: &ModelSpec) -> Self {
        let eta = model.initial_segment();
        Self {
            y: Some(vec![0.0; eta.len()]),
            z: eta.clone(),
            x: eta,
            kind: SolverKind::Reflected,
            grid: model.grid,
            limit: None,
            completed: 0,
        }
    }

    pub fn initial_penalized(model: &ModelSpec, penalty: &PenaltySpec) -> Self {
        let eta = model.initial_segment();
        Self {
            y: None,
            z: eta.clone(),
            x: eta,
            kind: SolverKind::Penalized {
                epsilon: penalty.epsilon,
                substep_factor: penalty.substep_factor,
            },
            grid: model.grid,
            limit: Some(Box::new(Self::initial_reflected(model))),
            completed: 0,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn completed_intervals(&self) -> usize {
        self.completed
    }

    pub fn is_complete(&self) -> bool {
        self.completed == self.grid.intervals()
    }

    /// Moves a partially solved bundle onto a longer grid with the same
    /// delay and step, so further intervals can be appended.
    pub fn rebase(&mut self, grid: TimeGrid) -> Result<()> {
        if grid.delay() != self.grid.delay()
            || grid.steps_per_delay() != self.grid.steps_per_delay()
            || grid.intervals() < self.completed
        {
            return Err(Error::GridMismatch(format!(
                "cannot move a bundle with {} solved intervals onto {grid:?}",
                self.completed
            )));
        }
        self.grid = grid;
        if let Some(limit) = self.limit.as_mut() {
            limit.rebase(grid)?;
        }
        Ok(())
    }

    /// Reflected companion of a penalized run.
    pub fn limit(&self) -> Option<&SolutionBundle> {
        self.limit.as_deref()
    }

    /// Path read by `σ(· − r)`: the reflected companion for penalized runs,
    /// the solution itself otherwise.
    pub fn delay_path(&self) -> &[f64] {
        match &self.limit {
            Some(l) => &l.x,
            None => &self.x,
        }
    }

    /// `x` on the forward nodes `[0, lr]`.
    pub fn forward_x(&self) -> &[f64] {
        &self.x[self.grid.zero_index()..]
    }

    pub fn forward_z(&self) -> &[f64] {
        &self.z[self.grid.zero_index()..]
    }

    pub fn forward_y(&self) -> Option<&[f64]> {
        self.y.as_deref().map(|y| &y[self.grid.zero_index()..])
    }

    /// `x` at a forward grid time.
    pub fn x_at(&self, t: f64) -> Result<f64> {
        self.grid
            .forward_index(t)
            .and_then(|k| self.forward_x().get(k).copied())
            .ok_or_else(|| Error::Domain(format!("t = {t} is not a computed grid node")))
    }
}

fn check_driver(model: &ModelSpec, driver: &DriverPath, intervals: usize) -> Result<()> {
    let need = intervals * model.grid.steps_per_delay() + 1;
    if (driver.grid.delta() - model.grid.delta()).abs() > 1e-12 * model.grid.delta()
        || driver.values().len() < need
    {
        return Err(Error::GridMismatch(format!(
            "driver (Δ = {}, {} nodes) does not cover {} intervals of the model grid (Δ = {})",
            driver.grid.delta(),
            driver.values().len(),
            intervals,
            model.grid.delta()
        )));
    }
    Ok(())
}

fn next_interval(bundle: &SolutionBundle) -> Result<usize> {
    if bundle.is_complete() {
        return Err(Error::Domain("all delay intervals are already solved".into()));
    }
    Ok(bundle.completed + 1)
}

/// Advances a reflected bundle by one delay interval.
///
/// `z_{k+1} = z_k + b(x_k)Δ + σ(x_{k−n})ΔW_k`,
/// `y_{k+1} = max(y_k, (z_{k+1})^−)`, `x_{k+1} = z_{k+1} + y_{k+1}`.
pub fn reflected_interval(
    model: &ModelSpec,
    driver: &DriverPath,
    bundle: &mut SolutionBundle,
) -> Result<()> {
    if bundle.kind != SolverKind::Reflected {
        return Err(Error::param("bundle", "expected a reflected bundle"));
    }
    let l = next_interval(bundle)?;
    check_driver(model, driver, l)?;
    let n = model.grid.steps_per_delay();
    let delta = model.grid.delta();
    let start = l * n; // full index of time (l−1)r
    let y = bundle.y.as_mut().expect("reflected bundles carry a regulator");
    for big_k in start..start + n {
        let k = big_k - n;
        let z_next = bundle.z[big_k]
            + model.drift.eval(bundle.x[big_k]) * delta
            + model.sigma.eval(bundle.x[k]) * driver.increment(k);
        let y_next = y[big_k].max(-z_next);
        bundle.z.push(z_next);
        y.push(y_next);
        bundle.x.push(z_next + y_next);
    }
    bundle.completed = l;
    Ok(())
}

/// Advances a penalized bundle (and its reflected companion) by one delay
/// interval.
///
/// `x_{k+1} = F^{sf}(x_k) + σ(x̄_{k−n}) ΔW_k` where `F` is one explicit Euler
/// substep of `b_ε` and `x̄` the reflected companion.
pub fn penalized_interval(
    model: &ModelSpec,
    penalty: &PenaltySpec,
    driver: &DriverPath,
    bundle: &mut SolutionBundle,
) -> Result<()> {
    penalty.validate(&model.grid)?;
    let expected = SolverKind::Penalized {
        epsilon: penalty.epsilon,
        substep_factor: penalty.substep_factor,
    };
    if bundle.kind != expected {
        return Err(Error::param(
            "bundle",
            format!("expected a penalized bundle for {expected:?}, got {:?}", bundle.kind),
        ));
    }
    let l = next_interval(bundle)?;
    check_driver(model, driver, l)?;
    let n = model.grid.steps_per_delay();
    let substep = penalty.substep(&model.grid);
    let start = l * n;
    let limit = bundle
        .limit
        .as_mut()
        .expect("penalized bundles carry a reflected companion");
    reflected_interval(model, driver, limit)?;
    for big_k in start..start + n {
        let k = big_k - n;
        let noise = model.sigma.eval(limit.x[k]) * driver.increment(k);
        let x_next = penalty.drift_flow(&model.drift, bundle.x[big_k], substep) + noise;
        let z_next = bundle.z[big_k] + noise;
        bundle.x.push(x_next);
        bundle.z.push(z_next);
    }
    bundle.completed = l;
    Ok(())
}

/// Reflected Euler scheme on `[−r, T]`.
pub fn solve_reflected(model: &ModelSpec, driver: &DriverPath) -> Result<SolutionBundle> {
    check_driver(model, driver, model.grid.intervals())?;
    let mut bundle = SolutionBundle::initial_reflected(model);
    while !bundle.is_complete() {
        reflected_interval(model, driver, &mut bundle)?;
    }
    Ok(bundle)
}

/// Penalized Euler scheme on `[−r, T]`.
pub fn solve_penalized(
    model: &ModelSpec,
    penalty: &PenaltySpec,
    driver: &DriverPath,
) -> Result<SolutionBundle> {
    penalty.validate(&model.grid)?;
    check_driver(model, driver, model.grid.intervals())?;
    let mut bundle = SolutionBundle::initial_penalized(model, penalty);
    while !bundle.is_complete() {
        penalized_interval(model, penalty, driver, &mut bundle)?;
    }
    Ok(bundle)
}

/// `w_t = η_0 + ζ_t + ∫_0^t drift(w_s) ds` by explicit Euler with
/// `substeps` drift substeps per cell of width `delta`.
pub fn integrate_drift(
    eta0: f64,
    zeta: &[f64],
    delta: f64,
    substeps: usize,
    drift: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    match zeta.first() {
        Some(&z0) if z0 == 0.0 => {}
        Some(&z0) => {
            return Err(Error::Domain(format!("ζ must start at zero, got {z0}")));
        }
        None => return Err(Error::Domain("ζ is empty".into())),
    }
    if substeps == 0 {
        return Err(Error::param("substeps", "must be >= 1"));
    }
    let h = delta / substeps as f64;
    let mut w = Vec::with_capacity(zeta.len());
    w.push(eta0);
    for k in 0..zeta.len() - 1 {
        let mut x = w[k];
        for _ in 0..substeps {
            x += h * drift(x);
        }
        w.push(x + (zeta[k + 1] - zeta[k]));
    }
    Ok(w)
}

/// `w_{k+1} = w_k + (ζ_{k+1} − ζ_k) + b(w_k)Δ`, `w_0 = η_0`.
pub fn solve_ode(eta0: f64, zeta: &[f64], b: &CoefficientFn, delta: f64) -> Result<Vec<f64>> {
    integrate_drift(eta0, zeta, delta, 1, |x| b.eval(x))
}

/// `ζ_t = ∫_0^t σ(x_{s−r}) dW_s` on the forward nodes, with `x` read from a
/// full-grid delay path.
pub fn diffusion_path(model: &ModelSpec, driver: &DriverPath, delay_path: &[f64]) -> Vec<f64> {
    let len = model.grid.forward_len().min(driver.values().len());
    let mut zeta = Vec::with_capacity(len);
    zeta.push(0.0);
    for k in 0..len - 1 {
        zeta.push(zeta[k] + model.sigma.eval(delay_path[k]) * driver.increment(k));
    }
    zeta
}

/// Lower and upper comparison paths around the penalized solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichBounds {
    /// `v`: same noise, drift `b`, no penalty (full grid).
    pub lower: Vec<f64>,
    /// `ũ = u + sup_{s′≤t} u_{s′}^−` (full grid).
    pub upper: Vec<f64>,
    /// `u`, driven by `b(u + sup u^−)` (full grid).
    pub u: Vec<f64>,
}

/// Comparison paths `v ≤ x^ε ≤ ũ` sharing the penalized run's noise
/// `ζ = ∫ σ(x̄_{s−r}) dW`. Both use the penalty's drift substepping so the
/// three schemes differ only in their drift.
pub fn solve_sandwich_bounds(
    model: &ModelSpec,
    penalty: &PenaltySpec,
    driver: &DriverPath,
) -> Result<SandwichBounds> {
    let reflected = solve_reflected(model, driver)?;
    penalty.validate(&model.grid)?;
    let zeta = diffusion_path(model, driver, &reflected.x);
    let eta0 = model.eta.eta0();
    let sf = penalty.substep_factor;
    let h = penalty.substep(&model.grid);
    let v = integrate_drift(eta0, &zeta, model.grid.delta(), sf, |x| model.drift.eval(x))?;

    let mut u = Vec::with_capacity(zeta.len());
    let mut upper = Vec::with_capacity(zeta.len());
    let mut phi = 0.0f64;
    let mut cur = eta0;
    u.push(cur);
    upper.push(cur + phi);
    for k in 0..zeta.len() - 1 {
        for _ in 0..sf {
            cur += h * model.drift.eval(cur + phi);
            phi = phi.max(-cur);
        }
        cur += zeta[k + 1] - zeta[k];
        phi = phi.max(-cur);
        u.push(cur);
        upper.push(cur + phi);
    }

    let eta = model.initial_segment();
    let n = model.grid.zero_index();
    let with_prefix = |tail: Vec<f64>| {
        let mut full = eta[..n].to_vec();
        full.extend(tail);
        full
    };
    Ok(SandwichBounds {
        lower: with_prefix(v),
        upper: with_prefix(upper),
        u: with_prefix(u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{FbmSampler, HurstParam};
    use crate::fraccalc::{holder_norm, GridFunction};
    use crate::model::InitialPath;
    use crate::skorokhod::{apply_map, complementarity_defect, ReflectionPair};

    fn h75() -> HurstParam {
        HurstParam::new(0.75).unwrap()
    }

    fn model(grid: TimeGrid, drift: CoefficientFn, sigma: CoefficientFn, eta0: f64) -> ModelSpec {
        ModelSpec::new(drift, sigma, InitialPath::constant(eta0), grid, h75()).unwrap()
    }

    /// b ≡ 0, σ ≡ 1 and the deterministic driver ζ_t = −2t, η_0 = 1.
    fn ramp_model(steps_per_delay: usize) -> (ModelSpec, DriverPath) {
        let grid = TimeGrid::new(1.0, 1.0, steps_per_delay).unwrap();
        let m = model(grid, CoefficientFn::constant(0.0), CoefficientFn::constant(1.0), 1.0);
        (m, DriverPath::from_fn(grid, |t| -2.0 * t))
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty_f(0.5), 0.0);
        assert_eq!(penalty_f(0.0), 0.0);
        assert!((penalty_f(-1.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((penalty_f(-1.0) - 0.632_121).abs() < 1e-6);
        let f = penalty_f(-0.5);
        assert!((f - 0.117_503).abs() < 1e-6);
        assert!(f > 0.0 && f <= 0.5);
    }

    #[test]
    fn penalty_shape_constraints() {
        let mut prev = penalty_f(-6.0);
        for k in 0..=6000 {
            let x = -6.0 + k as f64 * 1e-3;
            let f = penalty_f(x);
            assert!(f <= prev + 1e-15, "non-increasing at {x}");
            if x < 0.0 {
                assert!(f > 0.0 && f <= -x, "0 < f <= x^- at {x}");
            }
            assert!(penalty_f_prime(x).abs() <= PENALTY_SLOPE_BOUND + 1e-12);
            let fd = (penalty_f(x + 1e-7) - penalty_f(x - 1e-7)) / 2e-7;
            assert!((fd - penalty_f_prime(x)).abs() < 1e-6);
            prev = f;
        }
        let u = (2.0f64 / 3.0).cbrt();
        assert!((penalty_f_prime(-u).abs() - PENALTY_SLOPE_BOUND).abs() < 1e-12);
    }

    #[test]
    fn stability_rule() {
        let grid = TimeGrid::new(1.0, 1.0, 100).unwrap();
        let bad = PenaltySpec::new(0.01, 2).unwrap();
        assert!(matches!(bad.validate(&grid), Err(Error::Stability { required: 4, .. })));
        assert!(PenaltySpec::new(0.01, 4).unwrap().validate(&grid).is_ok());
        assert_eq!(PenaltySpec::for_grid(0.01, &grid).unwrap().substep_factor, 4);
        assert_eq!(PenaltySpec::for_grid(1.0, &grid).unwrap().substep_factor, 1);
    }

    #[test]
    fn ode_without_drift_is_shifted_driver() {
        let zeta: Vec<f64> = (0..50).map(|k| (k as f64 * 0.1).sin()).collect();
        let w = solve_ode(2.0, &zeta, &CoefficientFn::constant(0.0), 0.02).unwrap();
        for (a, b) in w.iter().zip(&zeta) {
            assert!((a - (2.0 + b)).abs() < 1e-14);
        }
        assert!(solve_ode(1.0, &[0.5, 1.0], &CoefficientFn::constant(0.0), 0.1).is_err());
    }

    #[test]
    fn ode_linear_decay() {
        let delta = 1e-3;
        let zeta = vec![0.0; 1001];
        let w = solve_ode(1.0, &zeta, &CoefficientFn::linear_branch(-1.0, 1e3), delta).unwrap();
        for (k, v) in w.iter().enumerate() {
            assert!((v - (-(k as f64) * delta).exp()).abs() < 5e-3);
        }
    }

    #[test]
    fn ode_comparison_on_random_drivers() {
        let grid = TimeGrid::new(1.0, 1.0, 256).unwrap();
        let sampler = FbmSampler::cached(grid, h75()).unwrap();
        let b = CoefficientFn::scaled_tanh(1.0);
        let bt = CoefficientFn::affine_tanh(0.5, 1.0);
        for i in 0..10 {
            let zeta = sampler.sample(11, i).values().to_vec();
            let w = solve_ode(0.3, &zeta, &b, grid.delta()).unwrap();
            let wt = solve_ode(0.3, &zeta, &bt, grid.delta()).unwrap();
            assert!(w.iter().zip(&wt).all(|(a, b)| *a <= b + 1e-8));
        }
    }

    #[test]
    fn penalized_quasi_stationary_level() {
        let (m, driver) = ramp_model(1000);
        let eps = 0.01;
        let p = PenaltySpec::for_grid(eps, &m.grid).unwrap();
        let sol = solve_penalized(&m, &p, &driver).unwrap();
        let target = -(-(1.0 - 2.0 * eps).ln()).cbrt();
        let last = *sol.x.last().unwrap();
        assert!((last - target).abs() < 1e-2, "{last} vs {target}");
        assert!((target + 0.2726).abs() < 1e-3);
    }

    fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn penalized_converges_to_reflected_on_ramp() {
        let (m, driver) = ramp_model(1000);
        let reflected = solve_reflected(&m, &driver).unwrap();
        let ladder = [0.1, 0.05, 0.025];
        let sf = PenaltySpec::required_substeps(0.025, &m.grid);
        let errs: Vec<f64> = ladder
            .iter()
            .map(|&e| {
                let p = PenaltySpec::new(e, sf).unwrap();
                sup_dist(&solve_penalized(&m, &p, &driver).unwrap().x, &reflected.x)
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        // boundary layer of the cubic penalty: e(ε) ≈ (−ln(1−2ε))^{1/3}
        let bound = 1.1 * (2.0f64 * 0.025).cbrt() + 5.0 * m.grid.delta();
        assert!(errs[2] <= bound, "{} > {bound}", errs[2]);
    }

    #[test]
    fn reflected_with_deterministic_driver_is_skorokhod_of_ode() {
        let grid = TimeGrid::new(0.5, 1.0, 200).unwrap();
        let m = model(grid, CoefficientFn::constant(0.0), CoefficientFn::constant(1.0), 0.4);
        let driver = DriverPath::from_fn(grid, |t| (7.0 * t).sin() - 1.5 * t);
        let sol = solve_reflected(&m, &driver).unwrap();
        let w = solve_ode(0.4, driver.values(), &m.drift, grid.delta()).unwrap();
        let pair = apply_map(&w).unwrap();
        assert_eq!(sol.forward_x(), &pair.x[..]);
        assert_eq!(sol.forward_y().unwrap(), &pair.y[..]);
    }

    fn active_model() -> ModelSpec {
        let grid = TimeGrid::new(0.5, 1.0, 128).unwrap();
        model(grid, CoefficientFn::scaled_tanh(-0.5), CoefficientFn::affine_tanh(1.0, 0.4), 0.1)
    }

    #[test]
    fn reflected_invariants_and_holder_bound() {
        let m = active_model();
        let sampler = FbmSampler::cached(m.grid, m.hurst).unwrap();
        let mut touched = 0;
        for i in 0..20 {
            let sol = solve_reflected(&m, &sampler.sample(3, i)).unwrap();
            let pair = ReflectionPair {
                x: sol.forward_x().to_vec(),
                y: sol.forward_y().unwrap().to_vec(),
                z: sol.forward_z().to_vec(),
            };
            assert!(pair.x.iter().all(|&v| v >= 0.0));
            assert!(pair.y.windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(pair.y[0], 0.0);
            assert_eq!(complementarity_defect(&pair), 0.0);
            touched += usize::from(*pair.y.last().unwrap() > 0.0);
            let t = m.grid.forward_times();
            let x = GridFunction::new(t.clone(), pair.x).unwrap();
            let z = GridFunction::new(t, pair.z).unwrap();
            assert!(holder_norm(&x, 0.7).unwrap() <= 2.0 * holder_norm(&z, 0.7).unwrap());
        }
        assert!(touched > 0);
    }

    #[test]
    fn monotone_in_epsilon_and_sandwiched() {
        let m = active_model();
        let sampler = FbmSampler::cached(m.grid, m.hurst).unwrap();
        let sf = PenaltySpec::required_substeps(0.025, &m.grid);
        let coarse = PenaltySpec::new(0.05, sf).unwrap();
        let fine = PenaltySpec::new(0.025, sf).unwrap();
        for i in 0..10 {
            let d = sampler.sample(5, i);
            let a = solve_penalized(&m, &coarse, &d).unwrap();
            let b = solve_penalized(&m, &fine, &d).unwrap();
            assert!(a.x.iter().zip(&b.x).all(|(u, v)| *u <= v + 1e-6));
            let s = solve_sandwich_bounds(&m, &coarse, &d).unwrap();
            for k in 0..a.x.len() {
                assert!(s.lower[k] - 1e-3 <= a.x[k] && a.x[k] <= s.upper[k] + 1e-3, "node {k}");
                assert!(s.upper[k] >= 0.0);
            }
        }
    }

    #[test]
    fn sandwich_collapses_without_noise_or_drift() {
        let grid = TimeGrid::new(0.5, 1.0, 32).unwrap();
        let m = model(grid, CoefficientFn::constant(0.0), CoefficientFn::constant(1.0), 0.7);
        let d = DriverPath::from_fn(grid, |_| 0.0);
        let p = PenaltySpec::for_grid(0.05, &grid).unwrap();
        let s = solve_sandwich_bounds(&m, &p, &d).unwrap();
        assert!(s.lower.iter().all(|&v| v == 0.7));
        assert!(s.upper.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn segment_stepping_is_bitwise_consistent() {
        let grid = TimeGrid::new(0.5, 1.0, 64).unwrap();
        let m = ModelSpec::new(
            CoefficientFn::scaled_tanh(-0.3),
            CoefficientFn::affine_tanh(1.0, 0.5),
            InitialPath::Cosine { eta0: 0.3, amplitude: 0.1, frequency: 4.0 },
            grid,
            h75(),
        )
        .unwrap();
        let sampler = FbmSampler::cached(grid, m.hurst).unwrap();
        let d = sampler.sample(9, 0);
        let p = PenaltySpec::for_grid(0.05, &grid).unwrap();
        let whole = solve_penalized(&m, &p, &d).unwrap();

        let first = m.with_intervals(1).unwrap();
        let mut part = solve_penalized(&first, &p, &d).unwrap();
        assert_eq!(&whole.x[..part.x.len()], &part.x[..]);
        // continue the one-interval bundle on the two-interval model
        part.rebase(grid).unwrap();
        penalized_interval(&m, &p, &d, &mut part).unwrap();
        assert_eq!(whole, part);

        let whole_r = solve_reflected(&m, &d).unwrap();
        let mut part_r = SolutionBundle::initial_reflected(&m);
        reflected_interval(&m, &d, &mut part_r).unwrap();
        reflected_interval(&m, &d, &mut part_r).unwrap();
        assert_eq!(whole_r, part_r);
        assert!(reflected_interval(&m, &d, &mut part_r).is_err());
    }

    #[test]
    fn initial_segment_is_copied_exactly() {
        let m = active_model();
        let d = FbmSampler::cached(m.grid, m.hurst).unwrap().sample(1, 1);
        let p = PenaltySpec::for_grid(0.05, &m.grid).unwrap();
        let sol = solve_penalized(&m, &p, &d).unwrap();
        let eta = m.initial_segment();
        assert_eq!(&sol.x[..eta.len()], &eta[..]);
        assert_eq!(&sol.limit().unwrap().x[..eta.len()], &eta[..]);
    }

    #[test]
    fn driver_mismatch_is_rejected() {
        let m = active_model();
        let other = TimeGrid::new(0.5, 1.0, 64).unwrap();
        let d = DriverPath::from_fn(other, |t| t);
        assert!(matches!(solve_reflected(&m, &d), Err(Error::GridMismatch(_))));
    }
}
