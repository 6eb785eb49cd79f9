//! `simulate`, `density` and `derivative`.

use rfsdde::density::{density_report, ks_gaussian_check, monte_carlo_ensemble, DensityReport, Method};
use rfsdde::exec::{try_map_indices, Execution};
use rfsdde::malliavin::{derivative_field_penalized, directional_derivative, dsquared_integral};
use rfsdde::skorokhod::complementarity_defect;
use rfsdde::solver::{solve_penalized, solve_reflected, SolutionBundle};
use rfsdde::FbmSampler;
use serde::Serialize;

use crate::config::{DensityMethod, Validated};
use crate::output::{eps_label, Bundle, Csv};
use crate::CliError;

fn path_name(prefix: &str, index: usize) -> String {
    format!("{prefix}_{index:05}.csv")
}

#[derive(Serialize)]
struct EpsValue {
    epsilon: f64,
    value: f64,
}

#[derive(Serialize)]
struct SimulatedPath {
    index: usize,
    x_t0: f64,
    y_t0: f64,
    x_eps_t0: Vec<EpsValue>,
    complementarity_defect: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    t0: f64,
    seed: u64,
    n_paths: usize,
    rows_per_path: usize,
    paths: Vec<SimulatedPath>,
}

/// Reflected and penalized paths on `[−r, T]`, one CSV per path.
pub fn simulate(v: &Validated) -> Result<Bundle, CliError> {
    let model = &v.model;
    let cfg = &v.config;
    let sampler = FbmSampler::cached(model.grid, model.hurst)?;
    let runs = try_map_indices(cfg.n_paths, Execution::Parallel, |i| {
        let d = sampler.sample(cfg.seed, i as u64);
        let refl = solve_reflected(model, &d)?;
        let pens = v
            .ladder
            .iter()
            .map(|p| solve_penalized(model, p, &d))
            .collect::<rfsdde::Result<Vec<SolutionBundle>>>()?;
        Ok::<_, rfsdde::Error>((refl, pens))
    })?;

    let mut header: Vec<String> = ["t", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
    header.extend(v.ladder.iter().map(|p| eps_label("x", p.epsilon)));
    let times = model.grid.times();
    let k0 = model.grid.zero_index() + model.grid.forward_index(cfg.t0).unwrap();
    let mut bundle = Bundle::new(&v.hash);
    let mut paths = Vec::new();
    let mut rows_per_path = 0;
    for (i, (refl, pens)) in runs.into_iter().enumerate() {
        let y = refl.y.as_ref().expect("reflected runs carry y");
        let mut csv = Csv::new(&v.hash, &header);
        let mut row = vec![0.0; header.len()];
        for k in 0..times.len() {
            row[0] = times[k];
            row[1] = refl.x[k];
            row[2] = y[k];
            row[3] = refl.z[k];
            for (c, p) in pens.iter().enumerate() {
                row[4 + c] = p.x[k];
            }
            csv.row(&row);
        }
        rows_per_path = csv.rows();
        let z0 = model.grid.zero_index();
        let pair = rfsdde::skorokhod::ReflectionPair {
            x: refl.x[z0..].to_vec(),
            y: y[z0..].to_vec(),
            z: refl.z[z0..].to_vec(),
        };
        paths.push(SimulatedPath {
            index: i,
            x_t0: refl.x[k0],
            y_t0: y[k0],
            x_eps_t0: v
                .ladder
                .iter()
                .zip(&pens)
                .map(|(p, b)| EpsValue {
                    epsilon: p.epsilon,
                    value: b.x[k0],
                })
                .collect(),
            complementarity_defect: complementarity_defect(&pair),
        });
        bundle.add_csv(path_name("path", i), csv);
    }
    bundle.add_json(
        "simulate.json",
        &SimulateSummary {
            t0: cfg.t0,
            seed: cfg.seed,
            n_paths: cfg.n_paths,
            rows_per_path,
            paths,
        },
    );
    Ok(bundle)
}

#[derive(Serialize)]
struct KsSummary {
    mean: f64,
    variance: f64,
    statistic: f64,
    critical: f64,
}

#[derive(Serialize)]
struct DensityOutput {
    method: DensityMethod,
    epsilon: Option<f64>,
    seed: u64,
    report: DensityReport,
    ks: Option<KsSummary>,
    ks_pass: Option<bool>,
}

/// Ensemble of `X_{t0}`, its density report and an optional KS verdict.
pub fn density(v: &Validated) -> Result<Bundle, CliError> {
    let cfg = &v.config;
    let opts = &cfg.density;
    let (method, epsilon) = match opts.method {
        DensityMethod::Reflected => (Method::Reflected, None),
        DensityMethod::Penalized => {
            let p = *v.ladder.last().unwrap();
            (Method::Penalized(p), Some(p.epsilon))
        }
    };
    let samples = monte_carlo_ensemble(&v.model, method, cfg.n_paths, cfg.seed, cfg.t0)?;
    let report = density_report(&samples, cfg.t0, v.theta, opts.bins, opts.bandwidth)?;
    let (ks, ks_pass) = match opts.gaussian_reference {
        Some(g) => {
            let out = ks_gaussian_check(&samples, g.mean, g.variance)?;
            let s = KsSummary {
                mean: g.mean,
                variance: g.variance,
                statistic: out.statistic,
                critical: out.critical,
            };
            (Some(s), Some(out.pass_at_1pct))
        }
        None => (None, None),
    };

    let mut bundle = Bundle::new(&v.hash);
    let mut hist = Csv::new(&v.hash, &["bin_lo".into(), "bin_hi".into(), "count".into()]);
    let h = &report.histogram;
    for (k, &c) in h.counts.iter().enumerate() {
        hist.row(&[h.edges[k], h.edges[k + 1], c as f64]);
    }
    bundle.add_csv("histogram.csv", hist);
    let mut kde = Csv::new(&v.hash, &["x".into(), "density".into()]);
    if let Some(k) = &report.kde {
        for (x, d) in k.points.iter().zip(&k.values) {
            kde.row(&[*x, *d]);
        }
    }
    bundle.add_csv("kde.csv", kde);
    let mut raw = Csv::new(&v.hash, &["index".into(), "x_t0".into()]);
    for (i, x) in samples.iter().enumerate() {
        raw.row(&[i as f64, *x]);
    }
    bundle.add_csv("samples.csv", raw);
    bundle.add_json(
        "density.json",
        &DensityOutput {
            method: opts.method,
            epsilon,
            seed: cfg.seed,
            report,
            ks,
            ks_pass,
        },
    );
    Ok(bundle)
}

#[derive(Serialize)]
struct EpsDerivative {
    epsilon: f64,
    x_t0: f64,
    dsquared: f64,
    gradient_relative_error: Option<f64>,
}

#[derive(Serialize)]
struct DerivativePath {
    index: usize,
    in_omega: bool,
    per_epsilon: Vec<EpsDerivative>,
}

#[derive(Serialize)]
struct LadderSummary {
    epsilon: f64,
    mean_dsquared_in_omega: Option<f64>,
    min_dsquared_in_omega: Option<f64>,
}

#[derive(Serialize)]
struct DerivativeOutput {
    t0: f64,
    seed: u64,
    omega_threshold: f64,
    omega_count: usize,
    ladder: Vec<LadderSummary>,
    /// Largest gap between the Ω-means of `dsquared` across the ladder.
    max_mean_dsquared_spread: Option<f64>,
    max_gradient_relative_error: Option<f64>,
    paths: Vec<DerivativePath>,
}

/// `D_s X_{t0}` columns per ε, `dsquared` values and the optional
/// finite-difference gradient check.
pub fn derivative(v: &Validated) -> Result<Bundle, CliError> {
    let model = &v.model;
    let cfg = &v.config;
    let opts = &cfg.derivative;
    let grid = model.grid;
    let sampler = FbmSampler::cached(grid, model.hurst)?;
    let h: Option<Vec<f64>> = opts
        .direction
        .map(|dir| grid.forward_times().iter().map(|&t| dir.eval(t)).collect());
    let runs = try_map_indices(cfg.n_paths, Execution::Parallel, |i| {
        let d = sampler.sample(cfg.seed, i as u64);
        v.ladder
            .iter()
            .map(|p| {
                let sol = solve_penalized(model, p, &d)?;
                let field = derivative_field_penalized(model, p, &d, &sol)?;
                let column = field.column_at(cfg.t0)?;
                let dsquared = dsquared_integral(&field, cfg.t0)?;
                let grad = match &h {
                    Some(h) => {
                        let dh = directional_derivative(&field, h)?;
                        let step = opts.fd_step;
                        let up = solve_penalized(model, p, &d.perturbed(h, step)?)?;
                        let dn = solve_penalized(model, p, &d.perturbed(h, -step)?)?;
                        let (mut err, mut scale) = (0.0f64, 0.0f64);
                        for ((a, b), g) in up.forward_x().iter().zip(dn.forward_x()).zip(&dh) {
                            let fd = (a - b) / (2.0 * step);
                            err = err.max((fd - g).abs());
                            scale = scale.max(fd.abs());
                        }
                        Some(if scale > 0.0 { err / scale } else { err })
                    }
                    None => None,
                };
                Ok((sol.x_at(cfg.t0)?, column, dsquared, grad))
            })
            .collect::<rfsdde::Result<Vec<_>>>()
    })?;

    let mut bundle = Bundle::new(&v.hash);
    let mut header = vec!["s".to_string()];
    header.extend(v.ladder.iter().map(|p| eps_label("d", p.epsilon)));
    let mut paths = Vec::new();
    for (i, per_eps) in runs.iter().enumerate() {
        let mut csv = Csv::new(&v.hash, &header);
        let sources = per_eps[0].1.len();
        for r in 0..sources {
            let mut row = vec![per_eps[0].1[r].0];
            row.extend(per_eps.iter().map(|e| e.1[r].1));
            csv.row(&row);
        }
        bundle.add_csv(path_name("derivative", i), csv);
        let x_last = per_eps.last().unwrap().0;
        paths.push(DerivativePath {
            index: i,
            in_omega: x_last >= opts.omega_threshold,
            per_epsilon: v
                .ladder
                .iter()
                .zip(per_eps)
                .map(|(p, e)| EpsDerivative {
                    epsilon: p.epsilon,
                    x_t0: e.0,
                    dsquared: e.2,
                    gradient_relative_error: e.3,
                })
                .collect(),
        });
    }
    let omega: Vec<&DerivativePath> = paths.iter().filter(|p| p.in_omega).collect();
    let ladder: Vec<LadderSummary> = v
        .ladder
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let vals: Vec<f64> = omega.iter().map(|q| q.per_epsilon[k].dsquared).collect();
            let n = vals.len();
            LadderSummary {
                epsilon: p.epsilon,
                mean_dsquared_in_omega: (n > 0).then(|| vals.iter().sum::<f64>() / n as f64),
                min_dsquared_in_omega: (n > 0).then(|| vals.iter().copied().fold(f64::INFINITY, f64::min)),
            }
        })
        .collect();
    let means: Vec<f64> = ladder.iter().filter_map(|l| l.mean_dsquared_in_omega).collect();
    let spread = (!means.is_empty()).then(|| {
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    });
    let max_grad = paths
        .iter()
        .flat_map(|p| p.per_epsilon.iter().filter_map(|e| e.gradient_relative_error))
        .reduce(f64::max);
    bundle.add_json(
        "derivative.json",
        &DerivativeOutput {
            t0: cfg.t0,
            seed: cfg.seed,
            omega_threshold: opts.omega_threshold,
            omega_count: omega.len(),
            ladder,
            max_mean_dsquared_spread: spread,
            max_gradient_relative_error: max_grad,
            paths,
        },
    );
    Ok(bundle)
}
