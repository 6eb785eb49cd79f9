//! Pathwise derivative fields `D_s X_t` on the forward grid.
//!
//! For a source node `s_i` the row `D[i][·]` solves the linear delayed
//! recursion obtained by differentiating the Euler scheme with respect to
//! the driver increment on `[s_i, s_{i+1}]`:
//!
//! ```text
//! D[i][i]   = σ(x̄_{s_i − r})
//! D[i][i+1] = σ(x̄_{s_i − r})
//! D[i][j+1] = A_j D[i][j] + σ′(x̄_{t_j − r}) D[i][j−n] ΔW_j      (j > i)
//! ```
//!
//! where `x̄` is the delay path, `n` the steps per delay and `A_j` the drift
//! propagation factor over cell `j`. The delayed entry is zero unless
//! `t_j − r > s_i`. Entries with `s_i > t_j` are zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::fbm::DriverPath;
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::solver::{PenaltySpec, SolutionBundle, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Penalized { epsilon: f64 },
    Free,
}

/// Lower-triangular array of derivatives `D[i][j]`, `s_i ≤ t_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeField {
    grid: TimeGrid,
    kind: FieldKind,
    // rows[i][j - i]
    rows: Vec<Vec<f64>>,
}

impl DerivativeField {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Number of forward nodes.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `D[i][j]`, zero when `i > j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j {
            0.0
        } else {
            self.rows[i][j - i]
        }
    }

    /// `D[i][j]` for `j = i, …, N`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// `D[·][j]` over all sources (zeros for `s_i > t_j`).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i, j)).collect()
    }

    fn column_index(&self, t0: f64) -> Result<usize> {
        match self.grid.forward_index(t0) {
            Some(j) if j > 0 && j < self.len() => Ok(j),
            _ => Err(Error::Domain(format!(
                "t0 = {t0} is not a grid node in (0, {}]",
                self.grid.horizon()
            ))),
        }
    }

    /// `(s_i, D_{s_i} X_{t0})` for `s_i < t0`.
    pub fn column_at(&self, t0: f64) -> Result<Vec<(f64, f64)>> {
        let j = self.column_index(t0)?;
        Ok((0..j)
            .map(|i| (self.grid.forward_time(i), self.get(i, j)))
            .collect())
    }
}

fn build_rows(
    steps_per_delay: usize,
    seeds: &[f64],
    propagation: &[f64],
    coupling: &[f64],
) -> Vec<Vec<f64>> {
    let len = seeds.len();
    let n = steps_per_delay;
    map_indices(len, Execution::Parallel, |i| {
        let mut row = Vec::with_capacity(len - i);
        row.push(seeds[i]);
        if i + 1 < len {
            row.push(seeds[i]);
        }
        for j in i + 1..len - 1 {
            let delayed = if j > i + n { row[j - n - i] } else { 0.0 };
            let next = propagation[j] * row[j - i] + coupling[j] * delayed;
            row.push(next);
        }
        row
    })
}

fn check_inputs(model: &ModelSpec, driver: &DriverPath, bundle: &SolutionBundle) -> Result<()> {
    if !bundle.is_complete() || bundle.grid() != &model.grid {
        return Err(Error::GridMismatch(
            "bundle must be a complete solve on the model grid".into(),
        ));
    }
    if driver.values().len() != model.grid.forward_len() {
        return Err(Error::GridMismatch(format!(
            "driver has {} nodes, model grid has {}",
            driver.values().len(),
            model.grid.forward_len()
        )));
    }
    Ok(())
}

fn seeds_and_coupling(
    model: &ModelSpec,
    driver: &DriverPath,
    delay_path: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let len = model.grid.forward_len();
    // full-grid index i is time s_i − r for forward node i
    let seeds = (0..len).map(|i| model.sigma.eval(delay_path[i])).collect();
    let coupling = (0..len)
        .map(|j| {
            if j + 1 < len {
                model.sigma.derivative(delay_path[j]) * driver.increment(j)
            } else {
                0.0
            }
        })
        .collect();
    (seeds, coupling)
}

/// Derivative field of the penalized scheme.
///
/// `A_j` is the exact derivative of the substepped drift flow over cell
/// `j`, `Π (1 + b_ε′(x_sub) Δ_sub)`, which reduces to `1 + b_ε′(x^ε_j) Δ`
/// without substepping.
pub fn derivative_field_penalized(
    model: &ModelSpec,
    penalty: &PenaltySpec,
    driver: &DriverPath,
    bundle: &SolutionBundle,
) -> Result<DerivativeField> {
    check_inputs(model, driver, bundle)?;
    let expected = SolverKind::Penalized {
        epsilon: penalty.epsilon,
        substep_factor: penalty.substep_factor,
    };
    if bundle.kind != expected {
        return Err(Error::param(
            "bundle",
            format!("bundle was solved as {:?}, expected {expected:?}", bundle.kind),
        ));
    }
    let substep = penalty.substep(&model.grid);
    let xs = bundle.forward_x();
    let propagation: Vec<f64> = xs
        .iter()
        .map(|&x| penalty.drift_flow_derivative(&model.drift, x, substep))
        .collect();
    let (seeds, coupling) = seeds_and_coupling(model, driver, bundle.delay_path());
    Ok(DerivativeField {
        grid: model.grid,
        kind: FieldKind::Penalized {
            epsilon: penalty.epsilon,
        },
        rows: build_rows(model.grid.steps_per_delay(), &seeds, &propagation, &coupling),
    })
}

/// Penalty-free field with `A_j = 1 + b′(x_j) Δ` along `bundle.x`.
///
/// On a reflected bundle this is the boundary-free reference derivative;
/// on a penalized bundle it is the same recursion along `x^ε`.
pub fn derivative_field_free(
    model: &ModelSpec,
    driver: &DriverPath,
    bundle: &SolutionBundle,
) -> Result<DerivativeField> {
    check_inputs(model, driver, bundle)?;
    let delta = model.grid.delta();
    let propagation: Vec<f64> = bundle
        .forward_x()
        .iter()
        .map(|&x| 1.0 + model.drift.derivative(x) * delta)
        .collect();
    let (seeds, coupling) = seeds_and_coupling(model, driver, bundle.delay_path());
    Ok(DerivativeField {
        grid: model.grid,
        kind: FieldKind::Free,
        rows: build_rows(model.grid.steps_per_delay(), &seeds, &propagation, &coupling),
    })
}

/// `D_h x_{t_j} = Σ_{i<j} D[i][j] (h_{i+1} − h_i)`.
pub fn directional_derivative(field: &DerivativeField, h: &[f64]) -> Result<Vec<f64>> {
    let len = field.len();
    if h.len() != len {
        return Err(Error::GridMismatch(format!(
            "direction has {} values, field has {len} nodes",
            h.len()
        )));
    }
    let dh: Vec<f64> = h.windows(2).map(|w| w[1] - w[0]).collect();
    Ok((0..len)
        .map(|j| (0..j).map(|i| field.get(i, j) * dh[i]).sum())
        .collect())
}

/// `∫_0^{t0} (D_s X_{t0})² ds ≈ Σ_{s_i < t0} D[i][j0]² Δ`.
pub fn dsquared_integral(field: &DerivativeField, t0: f64) -> Result<f64> {
    column_integral(field, t0, |_, d| d * d)
}

/// `∫_0^{t0} D_s X_{t0} φ(s) ds ≈ Σ_{s_i < t0} D[i][j0] φ(s_i) Δ`.
pub fn weighted_column_integral(
    field: &DerivativeField,
    t0: f64,
    phi: impl Fn(f64) -> f64,
) -> Result<f64> {
    column_integral(field, t0, |s, d| d * phi(s))
}

fn column_integral(
    field: &DerivativeField,
    t0: f64,
    integrand: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let j = field.column_index(t0)?;
    let delta = field.grid.delta();
    Ok((0..j)
        .map(|i| integrand(field.grid.forward_time(i), field.get(i, j)))
        .sum::<f64>()
        * delta)
}

/// Start `t_1` of the longest window `[t_1, t0)` of sources on which
/// `D_s X_{t0} > 0`, scanning backwards from `t0`. Returns `t0` when the
/// derivative at the last source is not positive.
pub fn positivity_window(field: &DerivativeField, t0: f64) -> Result<f64> {
    let j = field.column_index(t0)?;
    let mut start = j;
    while start > 0 && field.get(start - 1, j) > 0.0 {
        start -= 1;
    }
    Ok(field.grid.forward_time(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{FbmSampler, HurstParam};
    use crate::model::{CoefficientFn, InitialPath};
    use crate::solver::{solve_penalized, solve_reflected};

    fn additive(grid: TimeGrid) -> ModelSpec {
        ModelSpec::new(
            CoefficientFn::constant(0.0),
            CoefficientFn::constant(1.0),
            InitialPath::constant(1.0),
            grid,
            HurstParam::new(0.75).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn additive_model_has_unit_field() {
        let grid = TimeGrid::new(0.25, 1.0, 16).unwrap();
        let m = additive(grid);
        let d = FbmSampler::cached(grid, m.hurst).unwrap().sample(1, 0);
        let sol = solve_reflected(&m, &d).unwrap();
        let field = derivative_field_free(&m, &d, &sol).unwrap();
        for i in 0..field.len() {
            for j in 0..field.len() {
                assert_eq!(field.get(i, j), if i <= j { 1.0 } else { 0.0 });
            }
        }
        assert!((dsquared_integral(&field, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let h: Vec<f64> = grid.forward_times().iter().map(|t| (3.0 * t).sin()).collect();
        let dh = directional_derivative(&field, &h).unwrap();
        for (a, b) in dh.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = directional_derivative(&field, &vec![0.0; field.len()]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert_eq!(positivity_window(&field, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn off_grid_and_boundary_times_are_rejected() {
        let grid = TimeGrid::new(0.25, 1.0, 16).unwrap();
        let m = additive(grid);
        let d = FbmSampler::cached(grid, m.hurst).unwrap().sample(1, 0);
        let sol = solve_reflected(&m, &d).unwrap();
        let field = derivative_field_free(&m, &d, &sol).unwrap();
        assert!(dsquared_integral(&field, 0.51).is_err());
        assert!(dsquared_integral(&field, 0.0).is_err());
        assert!(dsquared_integral(&field, 2.0).is_err());
        assert!(directional_derivative(&field, &[0.0; 3]).is_err());
    }

    #[test]
    fn mismatched_bundle_is_rejected() {
        let grid = TimeGrid::new(0.5, 1.0, 50).unwrap();
        let m = additive(grid);
        let d = FbmSampler::cached(grid, m.hurst).unwrap().sample(2, 0);
        let p = PenaltySpec::for_grid(0.05, &grid).unwrap();
        let sol = solve_penalized(&m, &p, &d).unwrap();
        let other = PenaltySpec::for_grid(0.02, &grid).unwrap();
        assert!(derivative_field_penalized(&m, &other, &d, &sol).is_err());
        let refl = solve_reflected(&m, &d).unwrap();
        assert!(derivative_field_penalized(&m, &p, &d, &refl).is_err());
    }

    #[test]
    fn first_interval_constant_field_without_drift() {
        let grid = TimeGrid::new(1.0, 1.0, 200).unwrap();
        let m = ModelSpec::new(
            CoefficientFn::constant(0.0),
            CoefficientFn::affine_tanh(1.0, 0.5),
            InitialPath::Cosine { eta0: 3.0, amplitude: 0.5, frequency: 5.0 },
            grid,
            HurstParam::new(0.75).unwrap(),
        )
        .unwrap();
        let d = FbmSampler::cached(grid, m.hurst).unwrap().sample(4, 0);
        let p = PenaltySpec::for_grid(0.05, &grid).unwrap();
        let sol = solve_penalized(&m, &p, &d).unwrap();
        assert!(sol.forward_x().iter().all(|&x| x > 0.0));
        let field = derivative_field_penalized(&m, &p, &d, &sol).unwrap();
        let eta = m.initial_segment();
        for i in 0..field.len() {
            let seed = m.sigma.eval(eta[i]);
            assert!(field.row(i).iter().all(|&v| v == seed));
        }
    }
}
