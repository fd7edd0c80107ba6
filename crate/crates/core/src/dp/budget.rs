//! Gaussian-mechanism calibration and the per-client query ledger.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `e^a · Φ(x)` evaluated in log space so large `a` does not overflow.
fn exp_times_phi(a: f64, x: f64) -> f64 {
    let p = phi(x);
    if p == 0.0 {
        0.0
    } else {
        (a + p.ln()).exp()
    }
}

/// Bisection for a monotone predicate: returns the boundary in `[lo, hi]`
/// where `pred` flips from true to false.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest noise scale for which the Gaussian mechanism with L2
/// `sensitivity` is `(epsilon, delta)`-DP, following the exact analytic
/// characterisation (Balle & Wang, 2018) rather than the classical
/// `sqrt(2 ln(1.25/δ))` bound.
fn analytic_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> f64 {
    let eps = epsilon;
    let b_plus = |v: f64| phi((eps * v).sqrt()) - exp_times_phi(eps, -(eps * (v + 2.0)).sqrt());
    let b_minus = |u: f64| phi(-(eps * u).sqrt()) - exp_times_phi(eps, -(eps * (u + 2.0)).sqrt());
    let threshold = phi(0.0) - exp_times_phi(eps, -(2.0 * eps).sqrt());

    let alpha = if delta == threshold {
        1.0
    } else if delta > threshold {
        // sup { v >= 0 : B+(v) <= delta }, B+ increasing.
        let mut hi = 1.0;
        while b_plus(hi) <= delta {
            hi *= 2.0;
        }
        let v = bisect(0.0, hi, |v| b_plus(v) <= delta);
        (1.0 + v / 2.0).sqrt() - (v / 2.0).sqrt()
    } else {
        // inf { u >= 0 : B-(u) <= delta }, B- decreasing.
        let mut hi = 1.0;
        while b_minus(hi) > delta {
            hi *= 2.0;
        }
        let u = bisect(0.0, hi, |u| b_minus(u) > delta);
        (1.0 + u / 2.0).sqrt() + (u / 2.0).sqrt()
    };
    alpha * sensitivity / (2.0 * eps).sqrt()
}

/// Noise scale giving `(epsilon, delta)`-DP in total over `num_queries`
/// releases under basic composition: each release is calibrated to
/// `(epsilon / k, delta / k)`.
pub fn gaussian_sigma(epsilon: f64, delta: f64, sensitivity: f64, num_queries: u64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(Error::Domain(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    if num_queries == 0 {
        return Err(Error::Domain("num_queries must be at least 1".into()));
    }
    let k = num_queries as f64;
    Ok(analytic_sigma(epsilon / k, delta / k, sensitivity))
}

/// An `(epsilon, delta)` budget split evenly across a fixed number of
/// noisy-histogram releases, with a ledger of releases made so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
    max_queries: u64,
    queries_used: u64,
    sigma: f64,
}

impl PrivacyBudget {
    /// Histogram sensitivity: adding or removing one private example moves
    /// one unit of mass between at most one bin.
    pub const SENSITIVITY: f64 = 1.0;

    pub fn new(epsilon: f64, delta: f64, max_queries: u64) -> Result<Self> {
        let sigma = gaussian_sigma(epsilon, delta, Self::SENSITIVITY, max_queries)?;
        Ok(Self {
            epsilon,
            delta,
            max_queries,
            queries_used: 0,
            sigma,
        })
    }

    /// Noise-free ledger for ablations. Offers no privacy.
    pub fn non_private(max_queries: u64) -> Self {
        Self {
            epsilon: f64::INFINITY,
            delta: 0.0,
            max_queries,
            queries_used: 0,
            sigma: 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn max_queries(&self) -> u64 {
        self.max_queries
    }

    pub fn queries_used(&self) -> u64 {
        self.queries_used
    }

    pub fn remaining(&self) -> u64 {
        self.max_queries - self.queries_used
    }

    /// Epsilon consumed so far under basic composition.
    pub fn spent_epsilon(&self) -> f64 {
        if self.sigma == 0.0 {
            return f64::INFINITY;
        }
        self.epsilon * self.queries_used as f64 / self.max_queries as f64
    }

    pub fn spent_delta(&self) -> f64 {
        self.delta * self.queries_used as f64 / self.max_queries as f64
    }

    /// Records one release, refusing if the budget is already exhausted.
    pub fn spend(&mut self) -> Result<()> {
        if self.queries_used >= self.max_queries {
            return Err(Error::Privacy(format!(
                "query budget exhausted ({} of {} releases used)",
                self.queries_used, self.max_queries
            )));
        }
        self.queries_used += 1;
        Ok(())
    }

    /// Advisory check that delta is below one over the private-set size.
    pub fn delta_warning(&self, private_size: usize) -> Option<String> {
        (self.sigma > 0.0 && private_size > 0 && self.delta >= 1.0 / private_size as f64).then(
            || {
                format!(
                    "delta {} is not below 1/{private_size}; the guarantee is weak for this set",
                    self.delta
                )
            },
        )
    }
}
