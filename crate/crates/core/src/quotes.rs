//! Quote profile construction: expected qualities and reserve prices.
//!
//! A worker's reserve price is the smallest payment keeping both its risk of
//! an unsatisfying utility within its cap and its expected utility positive.
//! Soft assurance has a closed form; hard assurance needs a root-find
//! through the truncated-normal CDF of the local-cost variable.

use serde::{Deserialize, Serialize};

use crate::model::{Level, Scenario, ServiceLink, Worker};
use crate::stats::TruncNormal;
use crate::Error;

/// Absolute tolerance of the bisection for the hard-assurance price.
pub const PRICE_BISECTION_TOL: f64 = 1e-9;

/// Intermediates of the hard-assurance pricing: the local-cost variable
/// `Y = weight * cost_factor * hard_quality * beta`, the CDF threshold the
/// price must clear, and the bisection result.
#[derive(Debug, Clone)]
pub struct HardPriceIntermediates {
    pub y: TruncNormal,
    /// Target mass: the standardized CDF value the price must reach so the
    /// residual risk stays within the worker's cap.
    pub c_threshold: f64,
    /// Minimum payment satisfying the CDF inequality (before the increment).
    pub p_hat: f64,
}

/// Expected qualities and reserve prices for every (worker, task) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteProfile {
    num_workers: usize,
    num_tasks: usize,
    entries: Vec<QuoteEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteEntry {
    pub expected_quality_soft: f64,
    pub expected_quality_hard: f64,
    pub price_soft: f64,
    pub price_hard: f64,
}

impl QuoteProfile {
    pub fn entry(&self, worker: usize, task: usize) -> &QuoteEntry {
        &self.entries[worker * self.num_tasks + task]
    }

    pub fn expected_quality(&self, worker: usize, task: usize, level: Level) -> f64 {
        let e = self.entry(worker, task);
        match level {
            Level::Soft => e.expected_quality_soft,
            Level::Hard => e.expected_quality_hard,
        }
    }

    pub fn price(&self, worker: usize, task: usize, level: Level) -> f64 {
        let e = self.entry(worker, task);
        match level {
            Level::Soft => e.price_soft,
            Level::Hard => e.price_hard,
        }
    }
}

/// Expected soft quality `E[hard_quality - r' * beta]`.
pub fn expected_soft_quality(link: &ServiceLink, worker: &Worker) -> f64 {
    if worker.degradation_rate == 0.0 {
        return link.hard_quality;
    }
    // Equals hard_quality - r' * E[beta]; evaluated through the transformed
    // distribution so the result provably stays inside its support.
    link.soft_quality_dist(worker)
        .expect("degradation rate checked nonzero")
        .mean()
}

/// Reserve price under soft assurance: the risk event is deterministic in
/// the price, so the bound is closed form plus the standard increment.
pub fn soft_reserve_price(link: &ServiceLink, worker: &Worker, delta_p: f64) -> f64 {
    worker.lambda1 * worker.min_utility + link.base_cost + delta_p
}

/// Scaled local-cost variable `Y` for hard assurance.
pub fn local_cost_dist(link: &ServiceLink, worker: &Worker) -> Result<TruncNormal, Error> {
    let scale = worker.weight * worker.cost_factor * link.hard_quality;
    worker.workload.affine(scale, 0.0)
}

/// Reserve price under hard assurance: the maximum of the support bound,
/// the CDF root, and the positive-expected-utility bound, plus the standard
/// increment. The CDF root is located by bisection on the monotone risk
/// curve; the bracket spans exactly the interval where the truncated CDF
/// varies.
pub fn hard_reserve_price(
    link: &ServiceLink,
    worker: &Worker,
    delta_p: f64,
) -> Result<(f64, HardPriceIntermediates), Error> {
    let y = local_cost_dist(link, worker)?;
    let floor = worker.lambda1 * worker.min_utility + link.base_cost;

    let (z_lo, z_hi) = y.standardized_bounds();
    let (phi_lo, phi_hi) = (crate::stats::norm_cdf(z_lo), crate::stats::norm_cdf(z_hi));
    let c_threshold = (1.0 - worker.lambda2) * (phi_hi - phi_lo) + phi_lo;

    // Phi((p - floor - mu_Y)/sigma_Y) >= c_threshold. The left side is
    // nondecreasing in p; assert the bracket before bisecting.
    let target = |p: f64| crate::stats::norm_cdf((p - floor - y.mu()) / y.sigma());
    let (mut lo, mut hi) = (floor + y.lo(), floor + y.hi());
    debug_assert!(target(lo) <= c_threshold + 1e-12 && target(hi) >= c_threshold - 1e-12);
    if target(lo) >= c_threshold {
        hi = lo;
    }
    while hi - lo > PRICE_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if target(mid) >= c_threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p_hat = hi;

    let support_bound = floor + y.lo();
    let utility_bound = y.mean() + link.base_cost;
    let price = support_bound.max(p_hat).max(utility_bound) + delta_p;
    Ok((price, HardPriceIntermediates { y, c_threshold, p_hat }))
}

/// Build the full quote profile for a scenario. Deterministic: no RNG is
/// involved anywhere in pricing.
pub fn build_quote_profile(scenario: &Scenario) -> Result<QuoteProfile, Error> {
    let mut entries = Vec::with_capacity(scenario.num_workers() * scenario.num_tasks());
    for worker in &scenario.workers {
        for task in 0..scenario.num_tasks() {
            let link = scenario.link(worker.id, task);
            let (price_hard, _) = hard_reserve_price(link, worker, scenario.delta_p)?;
            entries.push(QuoteEntry {
                expected_quality_soft: expected_soft_quality(link, worker),
                expected_quality_hard: link.hard_quality,
                price_soft: soft_reserve_price(link, worker, scenario.delta_p),
                price_hard,
            });
        }
    }
    Ok(QuoteProfile {
        num_workers: scenario.num_workers(),
        num_tasks: scenario.num_tasks(),
        entries,
    })
}

/// Price of a temporary worker hired online, once its workload is realized
/// and known. Soft assurance is unchanged (the risk event never involved
/// the workload); hard assurance replaces the stochastic local cost with
/// the realized one.
pub fn online_price(
    link: &ServiceLink,
    worker: &Worker,
    level: Level,
    realized_beta: f64,
    delta_p: f64,
) -> f64 {
    match level {
        Level::Soft => soft_reserve_price(link, worker, delta_p),
        Level::Hard => {
            worker.lambda1 * worker.min_utility
                + link.base_cost
                + worker.weight * worker.cost_factor * link.hard_quality * realized_beta
                + delta_p
        }
    }
}

/// Realized quality delivered by a worker at a given level.
pub fn realized_quality(link: &ServiceLink, worker: &Worker, level: Level, beta: f64) -> f64 {
    match level {
        Level::Hard => link.hard_quality,
        Level::Soft => link.hard_quality - worker.degradation_rate * beta,
    }
}
