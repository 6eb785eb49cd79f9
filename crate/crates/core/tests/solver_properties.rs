use proptest::prelude::*;
use rfsdde::skorokhod::apply_map;
use rfsdde::solver::{solve_penalized, solve_reflected, SolutionBundle};
use rfsdde::solver::{penalized_interval, reflected_interval};
use rfsdde::{
    CoefficientFn, DriverPath, Error, FbmSampler, HurstParam, InitialPath, ModelSpec, PenaltySpec,
    TimeGrid,
};

fn model(eta0: f64, grid: TimeGrid) -> ModelSpec {
    ModelSpec::new(
        CoefficientFn::scaled_tanh(-0.5),
        CoefficientFn::affine_tanh(0.8, 0.3),
        InitialPath::constant(eta0),
        grid,
        HurstParam::new(0.75).unwrap(),
    )
    .unwrap()
}

#[test]
fn reflected_solution_is_the_skorokhod_image_of_z() {
    let grid = TimeGrid::new(0.25, 1.0, 32).unwrap();
    let m = model(0.1, grid);
    let s = FbmSampler::cached(grid, m.hurst).unwrap();
    for i in 0..10 {
        let sol = solve_reflected(&m, &s.sample(3, i)).unwrap();
        let pair = apply_map(sol.forward_z()).unwrap();
        for (a, b) in pair.x.iter().zip(sol.forward_x()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(sol.forward_x().iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn stepping_by_interval_matches_full_solve() {
    let grid = TimeGrid::new(0.25, 1.0, 32).unwrap();
    let m = model(0.1, grid);
    let d = FbmSampler::cached(grid, m.hurst).unwrap().sample(4, 0);
    let p = PenaltySpec::for_grid(0.02, &grid).unwrap();
    let mut r = SolutionBundle::initial_reflected(&m);
    let mut q = SolutionBundle::initial_penalized(&m, &p);
    for _ in 0..grid.intervals() {
        reflected_interval(&m, &d, &mut r).unwrap();
        penalized_interval(&m, &p, &d, &mut q).unwrap();
    }
    assert_eq!(r, solve_reflected(&m, &d).unwrap());
    assert_eq!(q, solve_penalized(&m, &p, &d).unwrap());
    assert!(reflected_interval(&m, &d, &mut r).is_err());
}

#[test]
fn unstable_substepping_is_a_numerical_error() {
    let grid = TimeGrid::new(0.25, 1.0, 32).unwrap();
    let m = model(0.1, grid);
    let d = DriverPath::from_fn(grid, |t| -t);
    let err = solve_penalized(&m, &PenaltySpec::new(0.001, 1).unwrap(), &d).unwrap_err();
    assert!(matches!(err, Error::Stability { .. }) && err.is_numerical());
}

#[test]
fn boundary_inactive_penalized_run_tracks_reflected_run() {
    let grid = TimeGrid::new(0.5, 1.0, 64).unwrap();
    let m = ModelSpec::new(
        CoefficientFn::constant(0.0),
        CoefficientFn::constant(1.0),
        InitialPath::constant(5.0),
        grid,
        HurstParam::new(0.75).unwrap(),
    )
    .unwrap();
    let p = PenaltySpec::for_grid(0.01, &grid).unwrap();
    let s = FbmSampler::cached(grid, m.hurst).unwrap();
    for i in 0..50 {
        let d = s.sample(6, i);
        let r = solve_reflected(&m, &d).unwrap();
        let q = solve_penalized(&m, &p, &d).unwrap();
        for (a, b) in r.forward_x().iter().zip(q.forward_x()) {
            assert!((a - b).abs() <= 1e-2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn penalized_paths_increase_as_epsilon_decreases(
        index in 0u64..1000,
        eta0 in 0.05f64..1.0,
        eps in 0.02f64..0.2,
    ) {
        let grid = TimeGrid::new(0.5, 1.0, 32).unwrap();
        let m = model(eta0, grid);
        let d = FbmSampler::cached(grid, m.hurst).unwrap().sample(8, index);
        let sf = PenaltySpec::required_substeps(eps / 2.0, &grid);
        let a = solve_penalized(&m, &PenaltySpec::new(eps, sf).unwrap(), &d).unwrap();
        let b = solve_penalized(&m, &PenaltySpec::new(eps / 2.0, sf).unwrap(), &d).unwrap();
        for (x, y) in a.x.iter().zip(&b.x) {
            prop_assert!(x <= &(y + 1e-12));
        }
        // without drift the reflected path dominates every penalized path
        let free = ModelSpec { drift: CoefficientFn::constant(0.0), ..m };
        let p = PenaltySpec::for_grid(eps, &grid).unwrap();
        let q = solve_penalized(&free, &p, &d).unwrap();
        let r = solve_reflected(&free, &d).unwrap();
        for (x, y) in q.forward_x().iter().zip(r.forward_x()) {
            prop_assert!(x <= &(y + 1e-12));
        }
    }
}
