//! Independent oracles shared by the integration suites. Everything here
//! re-derives quantities along different code paths than the library:
//! rejection sampling instead of inverse-CDF, per-worker choice recursion
//! instead of bit-index enumeration, and its own attendance recursion for
//! the risk probabilities.

#![allow(dead_code)]

use mcsc_core::model::{AssignmentProfile, Level, Scenario};
use mcsc_core::quotes::QuoteProfile;
use mcsc_core::risk;
use mcsc_core::stats::{gauss_legendre, norm_cdf, TruncNormal};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;

/// Rejection sampler on the parent normal: an independent route to
/// truncated-normal draws.
pub fn rejection_sample(mu: f64, sigma: f64, lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    let normal = Normal::new(mu, sigma).unwrap();
    loop {
        let x = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
}

/// Monte-Carlo standard error of a Bernoulli frequency.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Sample standard error of the mean.
pub fn mean_se(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

// ---------------------------------------------------------------------------
// Independent risk evaluation
// ---------------------------------------------------------------------------

/// Tail probability of a sum of truncated normals, by reversed-order
/// Gauss-Legendre convolution (up to three terms) or moment matching
/// beyond. Deliberately organized differently from the library evaluator.
pub fn oracle_soft_tail(dists: &[TruncNormal], t: f64) -> f64 {
    let lo: f64 = dists.iter().map(|d| d.lo()).sum();
    let hi: f64 = dists.iter().map(|d| d.hi()).sum();
    if dists.is_empty() {
        return if t >= 0.0 { 1.0 } else { 0.0 };
    }
    if t >= hi {
        return 1.0;
    }
    if t < lo {
        return 0.0;
    }
    if dists.len() <= 3 {
        // integrate over the LAST distribution, recursing on the prefix
        let (nodes, weights) = gauss_legendre(160);
        let last = dists.last().unwrap();
        if dists.len() == 1 {
            return last.cdf(t);
        }
        let half = 0.5 * (last.hi() - last.lo());
        let mid = 0.5 * (last.hi() + last.lo());
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let y = half * x + mid;
            acc += w * last.pdf(y) * oracle_soft_tail(&dists[..dists.len() - 1], t - y);
        }
        (acc * half).clamp(0.0, 1.0)
    } else {
        let mean: f64 = dists.iter().map(|d| d.mean()).sum();
        let var: f64 = dists.iter().map(|d| d.variance()).sum();
        norm_cdf((t - mean) / var.sqrt())
    }
}

/// Exact quality risk by recursion over attendance outcomes.
pub fn oracle_risk_quality(s: &Scenario, x: &AssignmentProfile, task: usize) -> f64 {
    let assigned: Vec<(usize, Level)> = (0..s.num_workers())
        .flat_map(|i| Level::ALL.map(move |l| (i, l)))
        .filter(|&(i, l)| x.get(i, task, l))
        .collect();
    let threshold = s.tasks[task].lambda1 * s.tasks[task].quality_demand;
    fn recurse(
        s: &Scenario,
        task: usize,
        assigned: &[(usize, Level)],
        idx: usize,
        prob: f64,
        hard_sum: f64,
        softs: &mut Vec<TruncNormal>,
        threshold: f64,
    ) -> f64 {
        if idx == assigned.len() {
            return prob * oracle_soft_tail(softs, threshold - hard_sum);
        }
        let (i, level) = assigned[idx];
        let a = s.workers[i].participation.a;
        // absent branch
        let mut total = recurse(s, task, assigned, idx + 1, prob * (1.0 - a), hard_sum, softs, threshold);
        // attending branch
        if a > 0.0 {
            match level {
                Level::Hard => {
                    total += recurse(
                        s,
                        task,
                        assigned,
                        idx + 1,
                        prob * a,
                        hard_sum + s.link(i, task).hard_quality,
                        softs,
                        threshold,
                    );
                }
                Level::Soft => {
                    if s.workers[i].degradation_rate == 0.0 {
                        total += recurse(
                            s,
                            task,
                            assigned,
                            idx + 1,
                            prob * a,
                            hard_sum + s.link(i, task).hard_quality,
                            softs,
                            threshold,
                        );
                    } else {
                        softs.push(s.link(i, task).soft_quality_dist(&s.workers[i]).unwrap());
                        total += recurse(s, task, assigned, idx + 1, prob * a, hard_sum, softs, threshold);
                        softs.pop();
                    }
                }
            }
        }
        total
    }
    recurse(s, task, &assigned, 0, 1.0, 0.0, &mut Vec::new(), threshold)
}

/// Exact budget risk by recursion over attendance outcomes.
pub fn oracle_risk_budget(s: &Scenario, x: &AssignmentProfile, q: &QuoteProfile, task: usize) -> f64 {
    let assigned: Vec<(usize, f64)> = (0..s.num_workers())
        .flat_map(|i| Level::ALL.map(move |l| (i, l)))
        .filter(|&(i, l)| x.get(i, task, l))
        .map(|(i, l)| (i, q.price(i, task, l)))
        .collect();
    let threshold = s.tasks[task].lambda2 * s.tasks[task].budget;
    fn recurse(s: &Scenario, assigned: &[(usize, f64)], idx: usize, prob: f64, pay: f64, threshold: f64) -> f64 {
        if idx == assigned.len() {
            return if pay > threshold { prob } else { 0.0 };
        }
        let (i, price) = assigned[idx];
        let a = s.workers[i].participation.a;
        recurse(s, assigned, idx + 1, prob * (1.0 - a), pay, threshold)
            + recurse(s, assigned, idx + 1, prob * a, pay + price, threshold)
    }
    recurse(s, &assigned, 0, 1.0, 0.0, threshold)
}

/// Independent feasibility check against the exact probabilistic
/// constraints, memoized per task column.
pub struct OracleFeasibility<'a> {
    s: &'a Scenario,
    q: &'a QuoteProfile,
    cache: Vec<HashMap<Vec<(usize, Level)>, bool>>,
}

impl<'a> OracleFeasibility<'a> {
    pub fn new(s: &'a Scenario, q: &'a QuoteProfile) -> Self {
        Self { s, q, cache: vec![HashMap::new(); s.num_tasks()] }
    }

    pub fn feasible(&mut self, x: &AssignmentProfile) -> bool {
        if !x.satisfies_at_most_one() {
            return false;
        }
        for task in 0..self.s.num_tasks() {
            let column: Vec<(usize, Level)> = (0..self.s.num_workers())
                .flat_map(|i| Level::ALL.map(move |l| (i, l)))
                .filter(|&(i, l)| x.get(i, task, l))
                .collect();
            let s = self.s;
            let q = self.q;
            let ok = *self.cache[task].entry(column).or_insert_with(|| {
                oracle_risk_quality(s, x, task) <= s.tasks[task].lambda3
                    && oracle_risk_budget(s, x, q, task) <= s.tasks[task].lambda4
            });
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Brute-force optimum of the offline problem: recursion over per-worker
/// choices (structurally valid by construction), feasibility by the oracle
/// evaluators, objective via the public expectation.
pub fn oracle_offline_optimum(s: &Scenario, q: &QuoteProfile) -> (f64, bool) {
    let mut oracle = OracleFeasibility::new(s, q);
    let mut best: Option<f64> = None;
    let mut profile = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
    fn recurse(
        s: &Scenario,
        q: &QuoteProfile,
        oracle: &mut OracleFeasibility,
        profile: &mut AssignmentProfile,
        worker: usize,
        best: &mut Option<f64>,
    ) {
        if worker == s.num_workers() {
            if oracle.feasible(profile) {
                let obj = risk::expected_platform_utility(profile, q, s).unwrap();
                if best.map_or(true, |b| obj > b) {
                    *best = Some(obj);
                }
            }
            return;
        }
        recurse(s, q, oracle, profile, worker + 1, best);
        for task in 0..s.num_tasks() {
            for level in Level::ALL {
                profile.set(worker, task, level, true);
                recurse(s, q, oracle, profile, worker + 1, best);
                profile.set(worker, task, level, false);
            }
        }
    }
    recurse(s, q, &mut oracle, &mut profile, 0, &mut best);
    (best.unwrap_or(0.0), best.is_some())
}
