//! Built-in consistency checks on the configured model.

use rfsdde::fbm::{cov_rh, kernel_gram, DEFAULT_KERNEL_QUAD_POINTS};
use rfsdde::fraccalc::{holder_norm, young_integral, zahle_integral, GridFunction};
use rfsdde::skorokhod::{apply_map, complementarity_defect};
use rfsdde::solver::{solve_ode, solve_penalized, solve_reflected, solve_sandwich_bounds};
use rfsdde::{CoefficientFn, FbmSampler, TimeGrid};
use serde::Serialize;

use crate::config::Validated;
use crate::output::Bundle;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Serialize)]
struct Report<'a> {
    all_pass: bool,
    checks: &'a [Check],
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn zahle(v: &Validated) -> Result<Check, CliError> {
    let n = 1 << 10;
    let grid = TimeGrid::new(1.0, 1.0, n)?;
    let d = FbmSampler::cached(grid, v.model.hurst)?.sample(v.config.seed, 0);
    let g = GridFunction::uniform(0.0, 1.0, d.values().to_vec())?;
    let f = GridFunction::from_fn(0.0, 1.0, n, f64::sin)?;
    let young = young_integral(&f, &g)?;
    Ok(match zahle_integral(&f, &g, v.alpha) {
        Ok(z) => {
            let rel = (z - young).abs() / young.abs();
            check("zahle_vs_young", rel <= 1e-2, format!("relative gap {rel:.2e}"))
        }
        Err(e) => check("zahle_vs_young", false, e.to_string()),
    })
}

fn skorokhod(v: &Validated, drivers: &[rfsdde::DriverPath]) -> Result<Check, CliError> {
    let n = 1000;
    let z: Vec<f64> = (0..=n).map(|k| 1.0 - 2.0 * k as f64 / n as f64).collect();
    let p = apply_map(&z)?;
    let ramp = (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (p.x[k] - (1.0 - 2.0 * t).max(0.0)).abs() + (p.y[k] - (2.0 * t - 1.0).max(0.0)).abs()
        })
        .fold(0.0, f64::max);
    let eta0 = v.model.eta.eta0();
    let mut defect = 0.0f64;
    for d in drivers {
        let z: Vec<f64> = d.values().iter().map(|w| eta0 + w).collect();
        defect = defect.max(complementarity_defect(&apply_map(&z)?));
    }
    Ok(check(
        "skorokhod_map",
        ramp <= 1e-14 && defect == 0.0,
        format!("ramp error {ramp:.1e}, max defect {defect}"),
    ))
}

fn sandwich_and_holder(v: &Validated, drivers: &[rfsdde::DriverPath]) -> Result<[Check; 2], CliError> {
    let p = &v.ladder[0];
    let (mut below, mut above, mut ratio) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    let horizon = v.model.grid.horizon();
    for d in drivers {
        let b = solve_sandwich_bounds(&v.model, p, d)?;
        let x = solve_penalized(&v.model, p, d)?.x;
        for k in 0..x.len() {
            below = below.max(b.lower[k] - x[k]);
            above = above.max(x[k] - b.upper[k]);
        }
        let r = solve_reflected(&v.model, d)?;
        let xs = GridFunction::uniform(0.0, horizon, r.forward_x().to_vec())?;
        let zs = GridFunction::uniform(0.0, horizon, r.forward_z().to_vec())?;
        ratio = ratio.max(holder_norm(&xs, 0.7)? / holder_norm(&zs, 0.7)?);
    }
    Ok([
        check(
            "sandwich_bounds",
            below <= 1e-3 && above <= 1e-3,
            format!("ε = {}, max (v − x) {below:.2e}, max (x − ũ) {above:.2e}", p.epsilon),
        ),
        check("holder_bound", ratio <= 2.0, format!("max ‖x‖/‖z‖ at order 0.7 = {ratio:.4}")),
    ])
}

fn monotone(v: &Validated, drivers: &[rfsdde::DriverPath]) -> Result<Check, CliError> {
    let mut worst = f64::NEG_INFINITY;
    for d in drivers {
        let xs = v
            .ladder
            .iter()
            .map(|p| solve_penalized(&v.model, p, d).map(|b| b.x))
            .collect::<rfsdde::Result<Vec<_>>>()?;
        for pair in xs.windows(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                worst = worst.max(a - b);
            }
        }
    }
    Ok(if v.ladder.len() < 2 {
        check("monotone_ladder", true, "single ε, nothing to compare".into())
    } else {
        check("monotone_ladder", worst <= 1e-6, format!("max (x^ε − x^ε′) {worst:.2e}"))
    })
}

fn comparison(v: &Validated, drivers: &[rfsdde::DriverPath]) -> Result<Check, CliError> {
    let b = CoefficientFn::affine_tanh(0.0, 1.0);
    let bt = CoefficientFn::affine_tanh(0.5, 1.0);
    let delta = v.model.grid.delta();
    let eta0 = v.model.eta.eta0();
    let mut worst = f64::NEG_INFINITY;
    for d in drivers {
        let w = solve_ode(eta0, d.values(), &b, delta)?;
        let wt = solve_ode(eta0, d.values(), &bt, delta)?;
        for (a, c) in w.iter().zip(&wt) {
            worst = worst.max(a - c);
        }
    }
    Ok(check("comparison", worst <= 1e-8, format!("max (w − w̃) {worst:.2e}")))
}

fn gram(v: &Validated) -> Result<Check, CliError> {
    let grid = v.model.grid;
    let s = FbmSampler::cached(grid, v.model.hurst)?;
    let f = s.factor();
    let h = v.model.hurst.value();
    let mut err = 0.0f64;
    for i in 0..f.dim() {
        for j in 0..=i {
            let r = cov_rh(h, grid.forward_time(i + 1), grid.forward_time(j + 1))?;
            err = err.max((f.gram(i, j) - r).abs());
        }
    }
    let k = kernel_gram(v.model.hurst, 1.0, 0.5, DEFAULT_KERNEL_QUAD_POINTS)?;
    let r = cov_rh(h, 1.0, 0.5)?;
    let rel = (k - r).abs() / r;
    Ok(check(
        "fbm_gram",
        err <= 1e-10 && rel <= 1e-3,
        format!("factor error {err:.2e}, kernel Gram relative error {rel:.2e}"),
    ))
}

pub fn run(v: &Validated) -> Result<(Vec<Check>, Bundle), CliError> {
    let sampler = FbmSampler::cached(v.model.grid, v.model.hurst)?;
    let drivers = sampler.sample_many(v.config.seed, v.config.n_paths, rfsdde::exec::Execution::Parallel);
    let mut checks = vec![zahle(v)?, skorokhod(v, &drivers)?];
    checks.extend(sandwich_and_holder(v, &drivers)?);
    checks.push(monotone(v, &drivers)?);
    checks.push(comparison(v, &drivers)?);
    checks.push(gram(v)?);
    let mut bundle = Bundle::new(&v.hash);
    bundle.add_json(
        "selfcheck.json",
        &Report {
            all_pass: checks.iter().all(|c| c.pass),
            checks: &checks,
        },
    );
    Ok((checks, bundle))
}
