// Fixed-order Gauss–Legendre rules mapped to arbitrary intervals.

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// 8-point Gauss–Legendre on `[lo, hi]`.
pub(crate) fn gauss8(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    GL8_NODES
        .iter()
        .zip(GL8_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Composite midpoint rule with `n` cells.
pub(crate) fn midpoint(lo: f64, hi: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|k| f(lo + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss8_is_exact_for_degree_15() {
        let got = gauss8(0.0, 2.0, |x| x.powi(15));
        let exact = 2f64.powi(16) / 16.0;
        assert!((got - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn midpoint_converges_quadratically() {
        let exact = 1.0 - 1f64.cos();
        let e1 = (midpoint(0.0, 1.0, 64, f64::sin) - exact).abs();
        let e2 = (midpoint(0.0, 1.0, 128, f64::sin) - exact).abs();
        assert!(e1 / e2 > 3.8);
    }
}
