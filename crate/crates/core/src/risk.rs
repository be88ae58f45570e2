//! Expected/realized utilities, the three probabilistic risks, and the
//! Markov-bound surrogates.
//!
//! Exact risk evaluation enumerates participation outcomes (their
//! probabilities multiply) and integrates the soft-quality sum per outcome.
//! A sum of independent truncated normals has no closed form: up to three
//! soft attendees it is evaluated by Gauss-Legendre convolution, beyond
//! that by a normal approximation or per-outcome Monte Carlo, per
//! configuration.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::model::{AssignmentProfile, Level, Scenario};
use crate::quotes::QuoteProfile;
use crate::stats::{mix_labels, RngStream, TruncNormal};
use crate::Error;

/// Quadrature size for soft-sum convolutions.
const GL_POINTS: usize = 200;
/// Largest attendee-enumeration exponent exact mode accepts.
const EXACT_ENUM_LIMIT: usize = 20;
/// Soft-sum convolution depth; larger sums use the configured fallback.
const CONVOLUTION_LIMIT: usize = 3;

fn gl_cache() -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CACHE.get_or_init(|| crate::stats::gauss_legendre(GL_POINTS))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskMode {
    /// Enumerate participation outcomes exactly.
    ExactEnumeration,
    /// Estimate the whole probability by sampling draws.
    MonteCarlo,
}

/// How the soft-quality sum is integrated once the convolution limit is
/// exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SoftSumMethod {
    NormalApproximation,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEvalConfig {
    pub mode: RiskMode,
    pub mc_samples: usize,
    pub soft_sum: SoftSumMethod,
    /// Seed for every Monte-Carlo stream this config spawns. Streams are
    /// keyed by (task, assignment column, outcome), so estimates do not
    /// depend on evaluation order.
    pub mc_seed: u64,
    /// Error out instead of falling back to Monte Carlo when an exact
    /// enumeration would exceed 2^20 outcomes.
    pub error_on_large_exact: bool,
}

impl Default for RiskEvalConfig {
    fn default() -> Self {
        Self {
            mode: RiskMode::ExactEnumeration,
            mc_samples: 100_000,
            soft_sum: SoftSumMethod::NormalApproximation,
            mc_seed: 0,
            error_on_large_exact: false,
        }
    }
}

impl RiskEvalConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.mc_samples < 1_000 {
            return Err(Error::InvalidParameter(format!(
                "Monte-Carlo evaluation needs at least 1000 samples, got {}",
                self.mc_samples
            )));
        }
        Ok(())
    }

    pub fn monte_carlo(mc_samples: usize, mc_seed: u64) -> Self {
        Self {
            mode: RiskMode::MonteCarlo,
            mc_samples,
            mc_seed,
            ..Self::default()
        }
    }
}

/// Expected platform utility: sum over tasks and workers of attendance
/// probability times expected promised quality.
pub fn expected_platform_utility(
    x: &AssignmentProfile,
    q: &QuoteProfile,
    s: &Scenario,
) -> Result<f64, Error> {
    if !x.satisfies_at_most_one() {
        return Err(Error::AtMostOneViolated);
    }
    Ok((0..s.num_tasks())
        .map(|k| expected_task_quality(x, q, s, k))
        .sum())
}

/// Expected promised quality a single task receives.
pub fn expected_task_quality(
    x: &AssignmentProfile,
    q: &QuoteProfile,
    s: &Scenario,
    task: usize,
) -> f64 {
    let mut total = 0.0;
    for i in 0..s.num_workers() {
        let a = s.workers[i].participation.a;
        for level in Level::ALL {
            if x.get(i, task, level) {
                total += a * q.expected_quality(i, task, level);
            }
        }
    }
    total
}

/// Expected payment a single task owes its assigned workers.
pub fn expected_task_pay(x: &AssignmentProfile, q: &QuoteProfile, s: &Scenario, task: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..s.num_workers() {
        let a = s.workers[i].participation.a;
        for level in Level::ALL {
            if x.get(i, task, level) {
                total += a * q.price(i, task, level);
            }
        }
    }
    total
}

/// Expected utility of one worker under its (at most one) assignment.
pub fn expected_worker_utility(
    worker: usize,
    x: &AssignmentProfile,
    q: &QuoteProfile,
    s: &Scenario,
) -> f64 {
    let w = &s.workers[worker];
    let a = w.participation.a;
    match x.worker_assignment(worker) {
        None => 0.0,
        Some((task, Level::Soft)) => {
            a * (q.price(worker, task, Level::Soft) - s.link(worker, task).base_cost)
        }
        Some((task, Level::Hard)) => {
            let link = s.link(worker, task);
            a * (q.price(worker, task, Level::Hard) - link.base_cost)
                - w.weight * a * w.cost_factor * link.hard_quality * w.workload.mean()
        }
    }
}

/// Realized quantities of one trading round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedOutcome {
    pub per_task_quality: Vec<f64>,
    pub total_quality: f64,
    pub per_worker_utility: Vec<f64>,
    pub per_task_expense: Vec<f64>,
}

/// Evaluate realized per-task quality, total quality, per-worker net
/// profit, and per-task expense for a draw. `price_of` supplies the payment
/// per assigned (worker, task, level), so both quote prices and contract
/// prices fit.
pub fn realized_utilities(
    x: &AssignmentProfile,
    price_of: impl Fn(usize, usize, Level) -> f64,
    draw: &crate::stats::TradingDraw,
    s: &Scenario,
) -> RealizedOutcome {
    let mut per_task_quality = vec![0.0; s.num_tasks()];
    let mut per_task_expense = vec![0.0; s.num_tasks()];
    let mut per_worker_utility = vec![0.0; s.num_workers()];
    for (i, k, level) in x.assigned() {
        if !draw.alpha[i] {
            continue;
        }
        let w = &s.workers[i];
        let link = s.link(i, k);
        let price = price_of(i, k, level);
        let quality = crate::quotes::realized_quality(link, w, level, draw.beta[i]);
        per_task_quality[k] += quality;
        per_task_expense[k] += price;
        per_worker_utility[i] += match level {
            Level::Soft => price - link.base_cost,
            Level::Hard => {
                price - link.base_cost
                    - w.weight * w.cost_factor * link.hard_quality * draw.beta[i]
            }
        };
    }
    RealizedOutcome {
        total_quality: per_task_quality.iter().sum(),
        per_task_quality,
        per_worker_utility,
        per_task_expense,
    }
}

/// Tail probability Pr{sum of independent truncated normals <= t}.
fn soft_sum_tail(dists: &[TruncNormal], t: f64, cfg: &RiskEvalConfig, stream: RngStream) -> f64 {
    let lo_sum: f64 = dists.iter().map(|d| d.lo()).sum();
    let hi_sum: f64 = dists.iter().map(|d| d.hi()).sum();
    if dists.is_empty() {
        return if 0.0 <= t { 1.0 } else { 0.0 };
    }
    if t >= hi_sum {
        return 1.0;
    }
    if t < lo_sum {
        return 0.0;
    }
    if dists.len() == 1 {
        return dists[0].cdf(t);
    }
    if dists.len() <= CONVOLUTION_LIMIT {
        return convolve_tail(dists, t);
    }
    match cfg.soft_sum {
        SoftSumMethod::NormalApproximation => {
            let mean: f64 = dists.iter().map(|d| d.mean()).sum();
            let var: f64 = dists.iter().map(|d| d.variance()).sum();
            crate::stats::norm_cdf((t - mean) / var.sqrt())
        }
        SoftSumMethod::MonteCarlo => {
            let mut rng = stream.rng();
            let mut hits = 0usize;
            for _ in 0..cfg.mc_samples {
                let sum: f64 = dists.iter().map(|d| d.sample(&mut rng)).sum();
                if sum <= t {
                    hits += 1;
                }
            }
            hits as f64 / cfg.mc_samples as f64
        }
    }
}

/// Nested Gauss-Legendre convolution: integrate the first density against
/// the tail of the rest.
fn convolve_tail(dists: &[TruncNormal], t: f64) -> f64 {
    if dists.len() == 1 {
        return dists[0].cdf(t);
    }
    let d = &dists[0];
    let (nodes, weights) = gl_cache();
    let (a, b) = (d.lo(), d.hi());
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (xn, wn) in nodes.iter().zip(weights) {
        let y = half * xn + mid;
        acc += wn * d.pdf(y) * convolve_tail(&dists[1..], t - y);
    }
    (acc * half).clamp(0.0, 1.0)
}

fn outcome_stream(cfg: &RiskEvalConfig, task: usize, column: u64, outcome: u64) -> RngStream {
    RngStream::new(cfg.mc_seed, mix_labels(&[task as u64, column, outcome]))
}

/// Risk of task `task` receiving quality at or below its demand threshold.
pub fn risk_quality(
    task: usize,
    x: &AssignmentProfile,
    s: &Scenario,
    cfg: &RiskEvalConfig,
) -> Result<f64, Error> {
    let t = &s.tasks[task];
    let threshold = t.lambda1 * t.quality_demand;
    let (soft, hard) = x.task_sets(task);
    match cfg.mode {
        RiskMode::ExactEnumeration => {
            let assigned: Vec<(usize, Level)> = hard
                .iter()
                .map(|&i| (i, Level::Hard))
                .chain(soft.iter().map(|&i| (i, Level::Soft)))
                .collect();
            if assigned.len() > EXACT_ENUM_LIMIT {
                if cfg.error_on_large_exact {
                    return Err(Error::ExactEnumerationTooLarge(assigned.len()));
                }
                return Ok(mc_risk_quality(task, &soft, &hard, threshold, s, cfg));
            }
            let column = x.column_code(task);
            let mut risk = 0.0;
            for mask in 0u64..(1 << assigned.len()) {
                let mut prob = 1.0;
                let mut hard_quality = 0.0;
                let mut soft_dists = Vec::new();
                for (bit, &(i, level)) in assigned.iter().enumerate() {
                    let a = s.workers[i].participation.a;
                    if mask & (1 << bit) != 0 {
                        prob *= a;
                        match level {
                            Level::Hard => hard_quality += s.link(i, task).hard_quality,
                            Level::Soft => {
                                let w = &s.workers[i];
                                if w.degradation_rate == 0.0 {
                                    hard_quality += s.link(i, task).hard_quality;
                                } else {
                                    soft_dists.push(s.link(i, task).soft_quality_dist(w)?);
                                }
                            }
                        }
                    } else {
                        prob *= 1.0 - a;
                    }
                }
                if prob == 0.0 {
                    continue;
                }
                let tail = soft_sum_tail(
                    &soft_dists,
                    threshold - hard_quality,
                    cfg,
                    outcome_stream(cfg, task, column, mask),
                );
                risk += prob * tail;
            }
            Ok(risk.clamp(0.0, 1.0))
        }
        RiskMode::MonteCarlo => Ok(mc_risk_quality(task, &soft, &hard, threshold, s, cfg)),
    }
}

fn mc_risk_quality(
    task: usize,
    soft: &[usize],
    hard: &[usize],
    threshold: f64,
    s: &Scenario,
    cfg: &RiskEvalConfig,
) -> f64 {
    let stream = RngStream::new(cfg.mc_seed, mix_labels(&[task as u64, 0x71]));
    let mut rng = stream.rng();
    let mut hits = 0usize;
    for _ in 0..cfg.mc_samples {
        let mut quality = 0.0;
        for &i in hard {
            if s.workers[i].participation.sample(&mut rng) {
                quality += s.link(i, task).hard_quality;
            }
        }
        for &i in soft {
            if s.workers[i].participation.sample(&mut rng) {
                let w = &s.workers[i];
                let beta = w.workload.sample(&mut rng);
                quality += s.link(i, task).hard_quality - w.degradation_rate * beta;
            }
        }
        if quality <= threshold {
            hits += 1;
        }
    }
    hits as f64 / cfg.mc_samples as f64
}

/// Risk of task `task` paying strictly more than its budget threshold.
/// Prices are deterministic, so only participation is enumerated.
pub fn risk_budget(
    task: usize,
    x: &AssignmentProfile,
    prices: &QuoteProfile,
    s: &Scenario,
    cfg: &RiskEvalConfig,
) -> Result<f64, Error> {
    let t = &s.tasks[task];
    let threshold = t.lambda2 * t.budget;
    let assigned: Vec<(usize, f64)> = (0..s.num_workers())
        .flat_map(|i| {
            Level::ALL
                .into_iter()
                .filter(move |&l| x.get(i, task, l))
                .map(move |l| (i, prices.price(i, task, l)))
        })
        .collect();
    match cfg.mode {
        RiskMode::ExactEnumeration => {
            if assigned.len() > EXACT_ENUM_LIMIT {
                if cfg.error_on_large_exact {
                    return Err(Error::ExactEnumerationTooLarge(assigned.len()));
                }
                return Ok(mc_risk_budget(&assigned, threshold, s, cfg, task));
            }
            let mut risk = 0.0;
            for mask in 0u64..(1 << assigned.len()) {
                let mut prob = 1.0;
                let mut pay = 0.0;
                for (bit, &(i, price)) in assigned.iter().enumerate() {
                    let a = s.workers[i].participation.a;
                    if mask & (1 << bit) != 0 {
                        prob *= a;
                        pay += price;
                    } else {
                        prob *= 1.0 - a;
                    }
                }
                if pay > threshold {
                    risk += prob;
                }
            }
            Ok(risk.clamp(0.0, 1.0))
        }
        RiskMode::MonteCarlo => Ok(mc_risk_budget(&assigned, threshold, s, cfg, task)),
    }
}

fn mc_risk_budget(
    assigned: &[(usize, f64)],
    threshold: f64,
    s: &Scenario,
    cfg: &RiskEvalConfig,
    task: usize,
) -> f64 {
    let stream = RngStream::new(cfg.mc_seed, mix_labels(&[task as u64, 0x72]));
    let mut rng = stream.rng();
    let mut hits = 0usize;
    for _ in 0..cfg.mc_samples {
        let pay: f64 = assigned
            .iter()
            .filter(|(i, _)| s.workers[*i].participation.sample(&mut rng))
            .map(|(_, p)| p)
            .sum();
        if pay > threshold {
            hits += 1;
        }
    }
    hits as f64 / cfg.mc_samples as f64
}

/// Risk of a contracted worker earning an unsatisfying utility, conditional
/// on participation. Soft contracts yield a step function of the price;
/// hard contracts the piecewise truncated-normal form.
pub fn risk_worker(
    worker: usize,
    task: usize,
    level: Level,
    price: f64,
    s: &Scenario,
    cfg: &RiskEvalConfig,
) -> Result<f64, Error> {
    let w = &s.workers[worker];
    let link = s.link(worker, task);
    let floor = w.lambda1 * w.min_utility;
    match level {
        Level::Soft => Ok(if price - link.base_cost <= floor { 1.0 } else { 0.0 }),
        Level::Hard => {
            let y = crate::quotes::local_cost_dist(link, w)?;
            let threshold = price - link.base_cost - floor;
            match cfg.mode {
                RiskMode::ExactEnumeration => Ok(1.0 - y.cdf(threshold)),
                RiskMode::MonteCarlo => {
                    let stream =
                        RngStream::new(cfg.mc_seed, mix_labels(&[worker as u64, task as u64, 0x77]));
                    let mut rng = stream.rng();
                    let hits = (0..cfg.mc_samples)
                        .filter(|_| y.sample(&mut rng) >= threshold)
                        .count();
                    Ok(hits as f64 / cfg.mc_samples as f64)
                }
            }
        }
    }
}

/// Markov-bound surrogate checks for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovCheck {
    /// Necessary condition for the quality-risk constraint.
    pub c1: bool,
    /// Sufficient condition for the budget-risk constraint.
    pub c7: bool,
    /// Expected quality over the demand threshold.
    pub quality_ratio: f64,
    /// Expected pay over the budget threshold.
    pub pay_ratio: f64,
}

pub fn markov_feasibility(
    task: usize,
    x: &AssignmentProfile,
    q: &QuoteProfile,
    s: &Scenario,
) -> MarkovCheck {
    let t = &s.tasks[task];
    let e_quality = expected_task_quality(x, q, s, task);
    let e_pay = expected_task_pay(x, q, s, task);
    MarkovCheck {
        c1: e_quality >= (1.0 - t.lambda3) * t.lambda1 * t.quality_demand,
        c7: e_pay <= t.lambda4 * t.lambda2 * t.budget,
        quality_ratio: e_quality / (t.lambda1 * t.quality_demand),
        pay_ratio: e_pay / (t.lambda2 * t.budget),
    }
}

/// Feasibility of a profile against the probabilistic constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub c1_quality: bool,
    pub c5_structure: bool,
    pub c7_budget: bool,
}

impl Feasibility {
    pub fn all(&self) -> bool {
        self.c1_quality && self.c5_structure && self.c7_budget
    }
}

pub fn probabilistic_feasibility(
    x: &AssignmentProfile,
    q: &QuoteProfile,
    s: &Scenario,
    cfg: &RiskEvalConfig,
) -> Result<Feasibility, Error> {
    let c5 = x.satisfies_at_most_one();
    let mut c1 = true;
    let mut c7 = true;
    for k in 0..s.num_tasks() {
        if risk_quality(k, x, s, cfg)? > s.tasks[k].lambda3 {
            c1 = false;
        }
        if risk_budget(k, x, q, s, cfg)? > s.tasks[k].lambda4 {
            c7 = false;
        }
    }
    Ok(Feasibility { c1_quality: c1, c5_structure: c5, c7_budget: c7 })
}

/// Per-task and per-worker risk summary of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub task_quality_risk: Vec<f64>,
    pub task_budget_risk: Vec<f64>,
    pub worker_risk: Vec<f64>,
    pub markov: Vec<MarkovCheck>,
}

pub fn risk_report(
    x: &AssignmentProfile,
    q: &QuoteProfile,
    s: &Scenario,
    cfg: &RiskEvalConfig,
) -> Result<RiskReport, Error> {
    let mut task_quality_risk = Vec::with_capacity(s.num_tasks());
    let mut task_budget_risk = Vec::with_capacity(s.num_tasks());
    let mut markov = Vec::with_capacity(s.num_tasks());
    for k in 0..s.num_tasks() {
        task_quality_risk.push(risk_quality(k, x, s, cfg)?);
        task_budget_risk.push(risk_budget(k, x, q, s, cfg)?);
        markov.push(markov_feasibility(k, x, q, s));
    }
    let mut worker_risk = vec![0.0; s.num_workers()];
    for i in 0..s.num_workers() {
        if let Some((k, level)) = x.worker_assignment(i) {
            worker_risk[i] = risk_worker(i, k, level, q.price(i, k, level), s, cfg)?;
        }
    }
    Ok(RiskReport { task_quality_risk, task_budget_risk, worker_risk, markov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AssignmentProfile;
    use crate::quotes::build_quote_profile;
    use crate::testutil::{scenario_with_attendance, tiny_scenario};
    use approx::assert_abs_diff_eq;

    #[test]
    fn platform_utility_empty_profile_is_zero() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        assert_eq!(expected_platform_utility(&x, &q, &s).unwrap(), 0.0);
    }

    #[test]
    fn platform_utility_single_hard_contract() {
        let mut s = tiny_scenario();
        s.workers[0].participation = crate::stats::BernoulliParticipation::new(0.8).unwrap();
        for k in 0..s.num_tasks() {
            s.links[k].hard_quality = 4.0;
        }
        let q = build_quote_profile(&s).unwrap();
        let mut x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        x.set(0, 0, Level::Hard, true);
        assert_abs_diff_eq!(
            expected_platform_utility(&x, &q, &s).unwrap(),
            0.8 * 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn platform_utility_rejects_double_assignment() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let mut x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        x.set(0, 0, Level::Hard, true);
        x.set(0, 1, Level::Soft, true);
        assert!(matches!(
            expected_platform_utility(&x, &q, &s),
            Err(Error::AtMostOneViolated)
        ));
    }

    #[test]
    fn worker_utility_cases() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        assert_eq!(expected_worker_utility(0, &x, &q, &s), 0.0);

        let mut x_soft = x.clone();
        x_soft.set(0, 0, Level::Soft, true);
        let w = &s.workers[0];
        let expected = w.participation.a * (q.price(0, 0, Level::Soft) - s.link(0, 0).base_cost);
        assert_abs_diff_eq!(expected_worker_utility(0, &x_soft, &q, &s), expected, epsilon = 1e-12);

        // Hard contracts priced at the reserve keep expected utility
        // strictly positive.
        for i in 0..s.num_workers() {
            for k in 0..s.num_tasks() {
                let mut xh = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
                xh.set(i, k, Level::Hard, true);
                assert!(expected_worker_utility(i, &xh, &q, &s) > 0.0);
            }
        }
    }

    #[test]
    fn realized_no_attendance_is_all_zero() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let mut x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        x.set(0, 0, Level::Hard, true);
        x.set(1, 1, Level::Soft, true);
        let draw = crate::stats::TradingDraw {
            alpha: vec![false; s.num_workers()],
            beta: vec![3.0; s.num_workers()],
        };
        let out = realized_utilities(&x, |i, k, l| q.price(i, k, l), &draw, &s);
        assert!(out.per_task_quality.iter().all(|&v| v == 0.0));
        assert!(out.per_task_expense.iter().all(|&v| v == 0.0));
        assert_eq!(out.total_quality, 0.0);
    }

    #[test]
    fn realized_zero_workload_soft_equals_hard() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let mut x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        x.set(0, 0, Level::Soft, true);
        let draw = crate::stats::TradingDraw {
            alpha: vec![true; s.num_workers()],
            beta: vec![0.0; s.num_workers()],
        };
        let out = realized_utilities(&x, |i, k, l| q.price(i, k, l), &draw, &s);
        assert_abs_diff_eq!(out.per_task_quality[0], s.link(0, 0).hard_quality, epsilon = 1e-12);
        // Total equals the sum of per-task values.
        assert_abs_diff_eq!(
            out.total_quality,
            out.per_task_quality.iter().sum::<f64>(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn risk_quality_empty_assignment_is_one() {
        let s = tiny_scenario();
        let x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        let cfg = RiskEvalConfig::default();
        assert_eq!(risk_quality(0, &x, &s, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn risk_quality_certain_attendance_above_demand() {
        let mut s = tiny_scenario();
        s.workers[0].participation = crate::stats::BernoulliParticipation::new(1.0).unwrap();
        s.links[0].hard_quality = 100.0;
        let mut x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        x.set(0, 0, Level::Hard, true);
        let cfg = RiskEvalConfig::default();
        assert_eq!(risk_quality(0, &x, &s, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn risk_quality_two_hard_workers_analytic() {
        // Two hard workers at a = 0.8 with qualities 4 and 5 against a
        // threshold of 7: only joint attendance clears it.
        let mut s = scenario_with_attendance(&[0.8, 0.8], 1);
        s.links[0].hard_quality = 4.0;
        s.links[1].hard_quality = 5.0;
        s.tasks[0].lambda1 = 1.0;
        s.tasks[0].quality_demand = 7.0;
        let mut x = AssignmentProfile::empty(2, 1);
        x.set(0, 0, Level::Hard, true);
        x.set(1, 0, Level::Hard, true);
        let cfg = RiskEvalConfig::default();
        assert_abs_diff_eq!(
            risk_quality(0, &x, &s, &cfg).unwrap(),
            1.0 - 0.8 * 0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn risk_budget_empty_is_zero_and_single_worker_analytic() {
        let mut s = scenario_with_attendance(&[0.9], 1);
        let q = build_quote_profile(&s).unwrap();
        let x = AssignmentProfile::empty(1, 1);
        let cfg = RiskEvalConfig::default();
        assert_eq!(risk_budget(0, &x, &q, &s, &cfg).unwrap(), 0.0);

        // Price above the threshold: risk equals the attendance probability.
        s.tasks[0].budget = 0.5;
        s.tasks[0].lambda2 = 1.0;
        let q = build_quote_profile(&s).unwrap();
        let mut x = AssignmentProfile::empty(1, 1);
        x.set(0, 0, Level::Soft, true);
        assert!(q.price(0, 0, Level::Soft) > 0.5);
        assert_abs_diff_eq!(risk_budget(0, &x, &q, &s, &cfg).unwrap(), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn risk_worker_soft_step() {
        let s = tiny_scenario();
        let cfg = RiskEvalConfig::default();
        let w = &s.workers[0];
        let link = s.link(0, 0);
        let floor = w.lambda1 * w.min_utility + link.base_cost;
        assert_eq!(
            risk_worker(0, 0, Level::Soft, floor + 0.01, &s, &cfg).unwrap(),
            0.0
        );
        assert_eq!(risk_worker(0, 0, Level::Soft, floor, &s, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn risk_worker_hard_outside_support() {
        let s = tiny_scenario();
        let cfg = RiskEvalConfig::default();
        let w = &s.workers[0];
        let link = s.link(0, 0);
        let y = crate::quotes::local_cost_dist(link, w).unwrap();
        let floor = w.lambda1 * w.min_utility + link.base_cost;
        // Payment so high the threshold clears the upper support bound.
        assert_eq!(
            risk_worker(0, 0, Level::Hard, floor + y.hi() + 1.0, &s, &cfg).unwrap(),
            0.0
        );
        // Payment so low the threshold undercuts the lower bound.
        assert_eq!(
            risk_worker(0, 0, Level::Hard, floor + y.lo() - 1.0, &s, &cfg).unwrap(),
            1.0
        );
    }

    #[test]
    fn markov_arithmetic() {
        // E-quality 8 against threshold 8 with lambda3 = 0.3: necessary
        // bound is 5.6, so c1 holds.
        let mut s = scenario_with_attendance(&[1.0], 1);
        s.links[0].hard_quality = 8.0;
        s.tasks[0].quality_demand = 8.0;
        s.tasks[0].lambda1 = 1.0;
        s.tasks[0].lambda3 = 0.3;
        let q = build_quote_profile(&s).unwrap();
        let mut x = AssignmentProfile::empty(1, 1);
        x.set(0, 0, Level::Hard, true);
        let m = markov_feasibility(0, &x, &q, &s);
        assert!(m.c1);
        assert_abs_diff_eq!(m.quality_ratio, 1.0, epsilon = 1e-12);

        // E-pay 3 against a cap of 2: c7 fails.
        s.tasks[0].budget = 3.0;
        s.tasks[0].lambda2 = 1.0;
        s.tasks[0].lambda4 = 2.0 / 3.0;
        let price = q.price(0, 0, Level::Hard);
        assert!(price > 2.0);
        let m = markov_feasibility(0, &x, &q, &s);
        assert_eq!(m.c7, price <= 2.0);
    }

    #[test]
    fn feasibility_zero_profile_fails_quality() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        let cfg = RiskEvalConfig::default();
        let f = probabilistic_feasibility(&x, &q, &s, &cfg).unwrap();
        assert!(!f.c1_quality);
        assert!(f.c5_structure);
        assert!(f.c7_budget);
    }

    #[test]
    fn feasibility_flags_double_assignment() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let mut x = AssignmentProfile::empty(s.num_workers(), s.num_tasks());
        x.set(0, 0, Level::Hard, true);
        x.set(0, 1, Level::Hard, true);
        let cfg = RiskEvalConfig::default();
        assert!(!probabilistic_feasibility(&x, &q, &s, &cfg).unwrap().c5_structure);
    }
}
