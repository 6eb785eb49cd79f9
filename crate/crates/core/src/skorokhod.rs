//! One-sided Skorokhod map at zero.

use crate::error::{Error, Result};

/// Reflected path `x`, regulator `y` and reflector `z` with `x = z + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Running maximum `y_k = max_{j≤k} (z_j)^−`.
pub fn regulator(z: &[f64]) -> Result<Vec<f64>> {
    match z.first() {
        None => Err(Error::Domain("reflector path is empty".into())),
        Some(&z0) if z0 < 0.0 => Err(Error::Domain(format!(
            "reflector must start in [0, ∞), got {z0}"
        ))),
        Some(_) => {
            let mut running = 0.0f64;
            Ok(z
                .iter()
                .map(|&v| {
                    running = running.max(-v);
                    running
                })
                .collect())
        }
    }
}

/// `(z + y, y, z)` with `y = regulator(z)`.
pub fn apply_map(z: &[f64]) -> Result<ReflectionPair> {
    let y = regulator(z)?;
    let x = z
        .iter()
        .zip(&y)
        .map(|(zv, yv)| zv + yv)
        .collect();
    Ok(ReflectionPair {
        x,
        y,
        z: z.to_vec(),
    })
}

/// `Σ_k x_{k+1} (y_{k+1} − y_k)`, the right-point discretisation of
/// `∫ x dy`. It is exactly zero for pairs built by [`apply_map`].
pub fn complementarity_defect(pair: &ReflectionPair) -> f64 {
    pair.y
        .windows(2)
        .zip(&pair.x[1..])
        .map(|(w, x)| x * (w[1] - w[0]))
        .sum()
}

impl ReflectionPair {
    pub fn defect(&self) -> f64 {
        complementarity_defect(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let z = [0.0, -1.0, 0.5, -2.0];
        assert_eq!(regulator(&z).unwrap(), vec![0.0, 1.0, 1.0, 2.0]);
        let pair = apply_map(&z).unwrap();
        assert_eq!(pair.x, vec![0.0, 0.0, 1.5, 0.0]);
        assert_eq!(complementarity_defect(&pair), 0.0);
    }

    #[test]
    fn nonnegative_reflector_is_fixed() {
        let z = [1.0, 0.3, 2.0, 0.0, 0.7];
        let pair = apply_map(&z).unwrap();
        assert!(pair.y.iter().all(|&v| v == 0.0));
        assert_eq!(pair.x, z.to_vec());
        assert_eq!(complementarity_defect(&pair), 0.0);
    }

    #[test]
    fn linear_reflector_closed_form() {
        let n = 1000;
        let z: Vec<f64> = (0..=n).map(|k| 1.0 - 2.0 * k as f64 / n as f64).collect();
        let pair = apply_map(&z).unwrap();
        for k in 0..=n {
            let t = k as f64 / n as f64;
            assert!((pair.x[k] - (1.0 - 2.0 * t).max(0.0)).abs() <= 1e-15);
            assert!((pair.y[k] - (2.0 * t - 1.0).max(0.0)).abs() <= 1e-15);
        }
    }

    #[test]
    fn rejects_negative_start() {
        assert!(regulator(&[-0.1, 0.0]).is_err());
        assert!(regulator(&[]).is_err());
    }

    #[test]
    fn defect_of_adversarial_pair() {
        let n = 100;
        let y: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let pair = ReflectionPair {
            x: vec![1.0; n + 1],
            z: y.iter().map(|v| 1.0 - v).collect(),
            y,
        };
        assert!((complementarity_defect(&pair) - 1.0).abs() < 1e-12);
    }

    fn brute_force_regulator(z: &[f64]) -> Vec<f64> {
        (0..z.len())
            .map(|k| (0..=k).map(|j| (-z[j]).max(0.0)).fold(0.0, f64::max))
            .collect()
    }

    proptest! {
        #[test]
        fn map_invariants(start in 0.0f64..2.0, steps in proptest::collection::vec(-1.0f64..1.0, 1..200)) {
            let mut z = vec![start];
            for s in &steps { let last = *z.last().unwrap(); z.push(last + s); }
            let pair = apply_map(&z).unwrap();
            prop_assert_eq!(&pair.y, &brute_force_regulator(&z));
            prop_assert!(pair.x.iter().all(|&v| v >= 0.0));
            prop_assert!(pair.y.windows(2).all(|w| w[1] >= w[0]));
            prop_assert_eq!(pair.y[0], 0.0);
            prop_assert_eq!(complementarity_defect(&pair), 0.0);
        }

        #[test]
        fn shift_by_constant(start in 0.5f64..2.0, shift in 0.0f64..0.5, steps in proptest::collection::vec(-1.0f64..1.0, 1..100)) {
            // raising z by c lowers y by c wherever the boundary was hit by more than c
            let mut z = vec![start];
            for s in &steps { let last = *z.last().unwrap(); z.push(last + s); }
            let up: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let y = regulator(&z).unwrap();
            let y_up = regulator(&up).unwrap();
            for (a, b) in y.iter().zip(&y_up) {
                prop_assert!((b - (a - shift).max(0.0)).abs() < 1e-12);
            }
        }
    }
}
