//! Temporal estimator: ARMA fitting, count deflation and the wrong-way ratio.
//!
//! A vehicle that stays in view across consecutive samples is counted once
//! per sample. Fitting a low-order ARMA model to each direction's count series
//! identifies the AR coefficient with the persistence probability, and
//! `N̂_k = D_k - φ D_{k-1}` turns the raw counts into unique-arrival estimates.
//!
//! Fitting minimizes the conditional sum of squared innovations with
//! `ε_0 = 0`, conditioning on the first observation. For a fixed MA
//! coefficient the innovations are linear in `(c, φ)`, so those two are solved
//! exactly by least squares; the MA coefficient is found by a grid scan
//! followed by golden-section refinement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detector::{Direction, PairCounts};
use crate::error::{Error, Result};

/// Coefficient bound for both AR and MA terms during fitting.
pub const COEFF_BOUND: f64 = 0.999;

const THETA_GRID_STEP: f64 = 0.01;
const PARAM_TOL: f64 = 1e-6;
const BURN_IN: usize = 200;

/// Per-sample counts for one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    values: Vec<u32>,
    t_gap: f64,
    label: Direction,
}

impl CountSeries {
    pub fn new(values: Vec<u32>, t_gap: f64, label: Direction) -> Result<Self> {
        if !(t_gap > 0.0) {
            return Err(Error::invalid(format!("t_gap {t_gap} must be positive")));
        }
        Ok(CountSeries {
            values,
            t_gap,
            label,
        })
    }

    /// Splits detector output into aligned right-way and wrong-way series.
    pub fn pair_from_counts(counts: &[PairCounts], t_gap: f64) -> (CountSeries, CountSeries) {
        let right = counts.iter().map(|c| c.d_r).collect();
        let wrong = counts.iter().map(|c| c.d_w).collect();
        (
            CountSeries {
                values: right,
                t_gap,
                label: Direction::RightWay,
            },
            CountSeries {
                values: wrong,
                t_gap,
                label: Direction::WrongWay,
            },
        )
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_gap(&self) -> f64 {
        self.t_gap
    }

    pub fn label(&self) -> Direction {
        self.label
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| u64::from(v)).sum()
    }

    pub fn with_label(mut self, label: Direction) -> Self {
        self.label = label;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaOrder {
    pub p: usize,
    pub q: usize,
}

impl ArmaOrder {
    /// ARMA(1,1), used for right-way flow.
    pub const RIGHT_WAY: ArmaOrder = ArmaOrder { p: 1, q: 1 };
    /// ARMA(1,0), used for wrong-way flow.
    pub const WRONG_WAY: ArmaOrder = ArmaOrder { p: 1, q: 0 };

    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p > 1 || q > 1 {
            return Err(Error::invalid(format!(
                "ARMA({p},{q}) not supported; orders must be 0 or 1"
            )));
        }
        Ok(ArmaOrder { p, q })
    }

    /// Minimum series length the fit accepts.
    pub fn min_len(&self) -> usize {
        if self.q > 0 {
            10
        } else {
            3
        }
    }
}

impl std::fmt::Display for ArmaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.p, self.q)
    }
}

impl std::str::FromStr for ArmaOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, q) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("order `{s}` must look like p,q")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("order `{s}` must look like p,q")))
        };
        ArmaOrder::new(parse(p)?, parse(q)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub p: usize,
    pub q: usize,
    pub c: f64,
    pub phi: f64,
    pub theta: f64,
    pub sigma2: f64,
    /// Conditional Gaussian log-likelihood at the optimum.
    pub log_objective: f64,
}

impl ArmaFit {
    pub fn order(&self) -> ArmaOrder {
        ArmaOrder {
            p: self.p,
            q: self.q,
        }
    }

    /// Stationary mean `c / (1 - φ)`.
    pub fn mean(&self) -> f64 {
        self.c / (1.0 - self.phi)
    }
}

/// Best `(c, φ)` and the resulting sum of squares for a fixed θ.
#[derive(Debug, Clone, Copy)]
struct Inner {
    c: f64,
    phi: f64,
    sse: f64,
}

fn solve_inner(y: &[f64], theta: f64, with_ar: bool) -> Inner {
    // ε_k = a_k - c·b_k - φ·g_k, each term following the MA recursion
    let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
    let (mut sbb, mut sbg, mut sgg, mut sab, mut sag) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut terms = Vec::with_capacity(y.len().saturating_sub(1));
    for k in 1..y.len() {
        a = y[k] - theta * a;
        b = 1.0 - theta * b;
        g = y[k - 1] - theta * g;
        sbb += b * b;
        sbg += b * g;
        sgg += g * g;
        sab += a * b;
        sag += a * g;
        terms.push((a, b, g));
    }
    if !with_ar {
        let c = sab / sbb;
        return Inner {
            c,
            phi: 0.0,
            sse: direct_sse(&terms, c, 0.0),
        };
    }
    let det = sbb * sgg - sbg * sbg;
    let mut phi = if det.abs() > 1e-12 * sbb * sgg {
        (sbb * sag - sbg * sab) / det
    } else {
        0.0
    };
    phi = phi.clamp(-COEFF_BOUND, COEFF_BOUND);
    let c = (sab - phi * sbg) / sbb;
    Inner {
        c,
        phi,
        sse: direct_sse(&terms, c, phi),
    }
}

fn direct_sse(terms: &[(f64, f64, f64)], c: f64, phi: f64) -> f64 {
    terms
        .iter()
        .map(|&(a, b, g)| {
            let e = a - c * b - phi * g;
            e * e
        })
        .sum()
}

/// Conditional-sum-of-squares ARMA fit on a real-valued series.
pub fn fit_arma_values(y: &[f64], order: ArmaOrder) -> Result<ArmaFit> {
    let order = ArmaOrder::new(order.p, order.q)?;
    if y.len() < order.min_len() {
        return Err(Error::InsufficientData {
            needed: order.min_len(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::DegenerateSeries(format!(
            "constant series (every value {first})"
        )));
    }
    let with_ar = order.p == 1;

    let (theta, inner) = if order.q == 0 {
        (0.0, solve_inner(y, 0.0, with_ar))
    } else {
        minimize_theta(|t| solve_inner(y, t, with_ar))
    };

    let n = (y.len() - 1) as f64;
    let sigma2 = inner.sse / n;
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateSeries(
            "zero innovation variance".to_string(),
        ));
    }
    let log_objective = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    Ok(ArmaFit {
        p: order.p,
        q: order.q,
        c: inner.c,
        phi: inner.phi,
        theta,
        sigma2,
        log_objective,
    })
}

fn minimize_theta(eval: impl Fn(f64) -> Inner) -> (f64, Inner) {
    let steps = (2.0 * COEFF_BOUND / THETA_GRID_STEP).round() as usize;
    let grid = |i: usize| (-COEFF_BOUND + i as f64 * THETA_GRID_STEP).min(COEFF_BOUND);
    let mut best = (grid(0), eval(grid(0)));
    for i in 1..=steps {
        let t = grid(i);
        let r = eval(t);
        if r.sse < best.1.sse {
            best = (t, r);
        }
    }

    // golden-section refinement inside the neighbouring grid cells
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (best.0 - THETA_GRID_STEP).max(-COEFF_BOUND);
    let mut hi = (best.0 + THETA_GRID_STEP).min(COEFF_BOUND);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while hi - lo > PARAM_TOL {
        if f1.sse < f2.sse {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2);
        }
    }
    for (t, r) in [(x1, f1), (x2, f2)] {
        if r.sse < best.1.sse {
            best = (t, r);
        }
    }
    best
}

/// Fits one direction's count series.
pub fn fit_arma(series: &CountSeries, order: ArmaOrder) -> Result<ArmaFit> {
    fit_arma_values(&series.as_f64(), order)
}

/// Unique-arrival estimates for one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflatedSeries {
    pub values: Vec<f64>,
    pub label: Direction,
}

impl DeflatedSeries {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `N̂_k = D_k - φ D_{k-1}` for `k >= 1`. Values may be negative.
pub fn deflate(series: &CountSeries, phi: f64) -> Result<DeflatedSeries> {
    if !(phi.abs() < 1.0) {
        return Err(Error::invalid(format!("persistence {phi} must satisfy |φ| < 1")));
    }
    let d = series.as_f64();
    Ok(DeflatedSeries {
        values: d.windows(2).map(|w| w[1] - phi * w[0]).collect(),
        label: series.label(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    /// `sum_w / (sum_r + sum_w)`, clamped to [0, 1].
    pub ratio: f64,
    /// Unclamped ratio.
    pub raw_ratio: f64,
    pub sum_r: f64,
    pub sum_w: f64,
    /// Set when any summand was negative.
    pub negative_mass_warning: bool,
}

pub fn wwc_ratio(right: &DeflatedSeries, wrong: &DeflatedSeries) -> Result<RatioReport> {
    if right.values.len() != wrong.values.len() {
        return Err(Error::invalid(format!(
            "deflated series lengths differ: {} vs {}",
            right.values.len(),
            wrong.values.len()
        )));
    }
    let negative = right.values.iter().chain(&wrong.values).any(|&v| v < 0.0);
    ratio_from_sums(right.sum(), wrong.sum(), negative)
}

pub fn ratio_from_sums(sum_r: f64, sum_w: f64, negative_mass_warning: bool) -> Result<RatioReport> {
    let denom = sum_r + sum_w;
    if !(denom > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "non-positive total mass {denom}"
        )));
    }
    let raw_ratio = sum_w / denom;
    Ok(RatioReport {
        ratio: raw_ratio.clamp(0.0, 1.0),
        raw_ratio,
        sum_r,
        sum_w,
        negative_mass_warning,
    })
}

/// Ratio report plus the fits that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub report: RatioReport,
    /// `None` when the series was identically zero and no fit was attempted.
    pub fit_right: Option<ArmaFit>,
    pub fit_wrong: Option<ArmaFit>,
    pub samples: usize,
}

/// Fit, deflate and form the ratio with the default orders.
pub fn estimate_from_counts(right: &CountSeries, wrong: &CountSeries) -> Result<EstimateReport> {
    estimate_with_orders(right, wrong, ArmaOrder::RIGHT_WAY, ArmaOrder::WRONG_WAY)
}

pub fn estimate_with_orders(
    right: &CountSeries,
    wrong: &CountSeries,
    order_right: ArmaOrder,
    order_wrong: ArmaOrder,
) -> Result<EstimateReport> {
    if right.len() != wrong.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: {} vs {}",
            right.len(),
            wrong.len()
        )));
    }
    let (fit_right, deflated_right) = fit_and_deflate(right, order_right)?;
    let (fit_wrong, deflated_wrong) = fit_and_deflate(wrong, order_wrong)?;
    Ok(EstimateReport {
        report: wwc_ratio(&deflated_right, &deflated_wrong)?,
        fit_right,
        fit_wrong,
        samples: right.len(),
    })
}

fn fit_and_deflate(series: &CountSeries, order: ArmaOrder) -> Result<(Option<ArmaFit>, DeflatedSeries)> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: order.min_len().max(2),
            got: series.len(),
        });
    }
    if series.values().iter().all(|&v| v == 0) {
        // nothing observed: no persistence to estimate, every N̂_k is zero
        return Ok((None, deflate(series, 0.0)?));
    }
    let fit = fit_arma(series, order)?;
    let deflated = deflate(series, fit.phi)?;
    Ok((Some(fit), deflated))
}

/// A generated series: rounded counts plus the real-valued path before rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSeries {
    pub counts: CountSeries,
    pub latent: Vec<f64>,
}

/// Draws a path from the ARMA recursion with Gaussian innovations, after a
/// burn-in started at the stationary mean.
pub fn simulate_arma(fit: &ArmaFit, length: usize, seed: u64) -> Result<SimulatedSeries> {
    if !(fit.phi.abs() < 1.0 && fit.theta.abs() < 1.0 && fit.sigma2 >= 0.0) {
        return Err(Error::invalid("simulation needs |φ| < 1, |θ| < 1, σ² >= 0"));
    }
    let noise = Normal::new(0.0, fit.sigma2.sqrt())
        .map_err(|e| Error::invalid(format!("innovation distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prev = fit.mean();
    let mut prev_eps = 0.0;
    let mut latent = Vec::with_capacity(length);
    for step in 0..BURN_IN + length {
        let eps = noise.sample(&mut rng);
        let d = fit.c + eps + fit.phi * prev + fit.theta * prev_eps;
        if step >= BURN_IN {
            latent.push(d);
        }
        prev = d;
        prev_eps = eps;
    }
    let values = latent.iter().map(|&v| v.round().max(0.0) as u32).collect();
    Ok(SimulatedSeries {
        counts: CountSeries {
            values,
            t_gap: 1.0,
            label: Direction::RightWay,
        },
        latent,
    })
}
