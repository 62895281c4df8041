//! Error analysis of the two-model And-strategy.
//!
//! With independent error probabilities `p1`, `p2` in (0, 0.5], a sample is
//! kept when both models agree, and the kept sample is wrong only when both
//! erred. The conditional error `p1 p2 / ((1-p1)(1-p2) + p1 p2)` never exceeds
//! the better of the two models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Per-model error probabilities, each in (0, 0.5].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    p1: f64,
    p2: f64,
}

impl ErrorRates {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(p > 0.0 && p <= 0.5) {
                return Err(Error::invalid(format!("{name} = {p} outside (0, 0.5]")));
            }
        }
        Ok(ErrorRates { p1, p2 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }
}

/// Probability that the two models agree.
pub fn validity_rate(r: ErrorRates) -> f64 {
    (1.0 - r.p1) * (1.0 - r.p2) + r.p1 * r.p2
}

/// Probability that an accepted sample is wrong.
pub fn ensemble_error(r: ErrorRates) -> f64 {
    r.p1 * r.p2 / validity_rate(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloOutcome {
    pub trials: u64,
    pub valid: u64,
    pub wrong: u64,
}

impl MonteCarloOutcome {
    /// Error frequency among valid trials; `None` if no trial was valid.
    pub fn error_given_valid(&self) -> Option<f64> {
        (self.valid > 0).then(|| self.wrong as f64 / self.valid as f64)
    }

    pub fn validity(&self) -> f64 {
        self.valid as f64 / self.trials as f64
    }
}

const SHARD: u64 = 1 << 16;

/// Simulates `trials` independent error pairs. Trials are split into fixed
/// shards with per-shard seeds so the tally does not depend on thread count.
pub fn monte_carlo_ensemble(r: ErrorRates, trials: u64, seed: u64) -> Result<MonteCarloOutcome> {
    if trials == 0 {
        return Err(Error::invalid("monte carlo needs at least one trial"));
    }
    let shards = trials.div_ceil(SHARD);
    let (valid, wrong) = (0..shards)
        .into_par_iter()
        .map(|s| {
            let n = SHARD.min(trials - s * SHARD);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let (mut valid, mut wrong) = (0u64, 0u64);
            for _ in 0..n {
                let e1 = rng.random::<f64>() < r.p1;
                let e2 = rng.random::<f64>() < r.p2;
                if e1 == e2 {
                    valid += 1;
                    wrong += u64::from(e1);
                }
            }
            (valid, wrong)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(MonteCarloOutcome {
        trials,
        valid,
        wrong,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(p1: f64, p2: f64) -> ErrorRates {
        ErrorRates::new(p1, p2).unwrap()
    }

    #[test]
    fn closed_form_reference_values() {
        for p in [0.01, 0.2, 0.37, 0.5] {
            assert!((ensemble_error(rates(0.5, p)) - p).abs() < 1e-15);
        }
        // 0.09 / 0.58
        assert!((ensemble_error(rates(0.3, 0.3)) - 9.0 / 58.0).abs() < 1e-15);
        assert!(ensemble_error(rates(1e-12, 0.4)) < 1e-11);
        assert!((validity_rate(rates(0.5, 0.5)) - 0.5).abs() < 1e-15);
        assert!((validity_rate(rates(0.3, 0.3)) - 0.58).abs() < 1e-15);
        assert!(validity_rate(rates(1e-12, 1e-12)) > 1.0 - 1e-11);
    }

    #[test]
    fn rejects_out_of_range_rates() {
        for (a, b) in [(0.0, 0.2), (0.6, 0.2), (0.2, -0.1), (0.2, f64::NAN)] {
            assert!(ErrorRates::new(a, b).is_err());
        }
    }

    #[test]
    fn monotone_and_dominated_on_grid() {
        let grid: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
        for &a in &grid {
            for (i, &b) in grid.iter().enumerate() {
                let e = ensemble_error(rates(a, b));
                assert!(e <= a.min(b) + 1e-15, "({a}, {b}) -> {e}");
                if i > 0 {
                    assert!(e > ensemble_error(rates(a, grid[i - 1])));
                    assert!(ensemble_error(rates(b, a)) > ensemble_error(rates(grid[i - 1], a)));
                }
            }
        }
    }

    #[test]
    fn single_trial_does_not_crash() {
        let out = monte_carlo_ensemble(rates(0.3, 0.3), 1, 7).unwrap();
        assert_eq!(out.trials, 1);
        assert!(out.validity() == 0.0 || out.validity() == 1.0);
        if let Some(e) = out.error_given_valid() {
            assert!(e == 0.0 || e == 1.0);
        }
        assert!(monte_carlo_ensemble(rates(0.3, 0.3), 0, 7).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = monte_carlo_ensemble(rates(0.2, 0.4), 200_000, 11).unwrap();
        let b = monte_carlo_ensemble(rates(0.2, 0.4), 200_000, 11).unwrap();
        assert_eq!(a, b);
    }
}
