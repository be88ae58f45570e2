//! Offline long-term recruitment solvers: exhaustive search, unique-index
//! stochastic search with a risk-aware filter, and the relaxation-based
//! successive convex algorithm, plus rounding/repair and contract signing.
//!
//! Exhaustive and stochastic search evaluate the exact probabilistic
//! constraints; the convex route works against the Markov surrogates it was
//! derived from, so its feasibility flag refers to those.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gp::{self, GpInstance};
use crate::model::{AssignmentProfile, Contract, ContractBook, Level, Scenario};
use crate::quotes::QuoteProfile;
use crate::risk::{self, RiskEvalConfig};
use crate::stats::RngStream;
use crate::Error;

/// Default guard on the exhaustive search space.
pub const ESA_GUARD_BITS: u32 = 26;

/// Outcome of one offline solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub profile: AssignmentProfile,
    /// Expected platform utility of the profile.
    pub objective: f64,
    /// Whether the solver's constraint set was met: the exact probabilistic
    /// risks for the search algorithms, the Markov surrogates for the
    /// convex route.
    pub feasible: bool,
    /// Indices visited or outer iterations performed.
    pub iterations: u64,
    /// Deterministic work measure (candidate evaluations or Newton steps).
    pub work: u64,
    /// Measured wall time in seconds; informational only.
    pub wall_time_s: f64,
}

/// Per-task, per-column evaluation cache. A column (one task's slice of a
/// profile) fully determines expected quality, expected pay, and both
/// risks, so enumeration reuses them across profiles.
pub struct ColumnCache<'a> {
    s: &'a Scenario,
    q: &'a QuoteProfile,
    cfg: &'a RiskEvalConfig,
    per_task: Vec<HashMap<u64, ColumnEval>>,
}

#[derive(Clone, Copy)]
pub struct ColumnEval {
    pub e_quality: f64,
    pub risk_quality: f64,
    pub risk_budget: f64,
}

impl<'a> ColumnCache<'a> {
    pub fn new(s: &'a Scenario, q: &'a QuoteProfile, cfg: &'a RiskEvalConfig) -> Self {
        Self { s, q, cfg, per_task: vec![HashMap::new(); s.num_tasks()] }
    }

    pub fn eval(&mut self, x: &AssignmentProfile, k: usize) -> Result<ColumnEval, Error> {
        let code = x.column_code(k);
        if let Some(e) = self.per_task[k].get(&code) {
            return Ok(*e);
        }
        // Task-local quantities only depend on this task's column, so the
        // risks can be evaluated on a stripped profile.
        let mut column = AssignmentProfile::empty(self.s.num_workers(), self.s.num_tasks());
        for i in 0..self.s.num_workers() {
            for level in Level::ALL {
                if x.get(i, k, level) {
                    column.set(i, k, level, true);
                }
            }
        }
        let eval = ColumnEval {
            e_quality: risk::expected_task_quality(&column, self.q, self.s, k),
            risk_quality: risk::risk_quality(k, &column, self.s, self.cfg)?,
            risk_budget: risk::risk_budget(k, &column, self.q, self.s, self.cfg)?,
        };
        self.per_task[k].insert(code, eval);
        Ok(eval)
    }
}

/// Fast structural check on a raw index: every worker holds at most one
/// assignment bit.
pub fn index_satisfies_at_most_one(s: &Scenario, n: u64) -> bool {
    let per_worker_bits = s.num_tasks() * 2;
    let mask = (1u64 << per_worker_bits) - 1;
    (0..s.num_workers()).all(|i| ((n >> (i * per_worker_bits)) & mask).count_ones() <= 1)
}

fn empty_result(s: &Scenario, iterations: u64, work: u64, started: Instant) -> SolveResult {
    SolveResult {
        profile: AssignmentProfile::empty(s.num_workers(), s.num_tasks()),
        objective: 0.0,
        feasible: false,
        iterations,
        work,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

/// Exhaustive search: enumerate every index, keep the best profile passing
/// the exact probabilistic constraints. First-seen index wins ties.
pub fn esa(s: &Scenario, q: &QuoteProfile, cfg: &RiskEvalConfig) -> Result<SolveResult, Error> {
    esa_guarded(s, q, cfg, ESA_GUARD_BITS)
}

pub fn esa_guarded(
    s: &Scenario,
    q: &QuoteProfile,
    cfg: &RiskEvalConfig,
    guard_bits: u32,
) -> Result<SolveResult, Error> {
    let started = Instant::now();
    let bits = s.index_bits();
    if bits > guard_bits || bits > 63 {
        return Err(Error::IndexSpaceTooLarge(bits));
    }
    cfg.validate()?;
    let mut cache = ColumnCache::new(s, q, cfg);
    let space = 1u64 << bits;
    let mut best: Option<(u64, f64)> = None;
    for n in 0..space {
        if !index_satisfies_at_most_one(s, n) {
            continue;
        }
        let x = AssignmentProfile::from_index(n, s.num_tasks(), s.num_workers())?;
        let mut objective = 0.0;
        let mut feasible = true;
        for k in 0..s.num_tasks() {
            let eval = cache.eval(&x, k)?;
            objective += eval.e_quality;
            if eval.risk_quality > s.tasks[k].lambda3 || eval.risk_budget > s.tasks[k].lambda4 {
                feasible = false;
                break;
            }
        }
        if feasible && best.map_or(true, |(_, obj)| objective > obj) {
            best = Some((n, objective));
        }
    }
    match best {
        Some((n, objective)) => Ok(SolveResult {
            profile: AssignmentProfile::from_index(n, s.num_tasks(), s.num_workers())?,
            objective,
            feasible: true,
            iterations: space,
            work: space,
            wall_time_s: started.elapsed().as_secs_f64(),
        }),
        None => Ok(empty_result(s, space, space, started)),
    }
}

/// Iteration budget and stream for the stochastic search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UisrfcConfig {
    /// Iteration budget M; clamped to the search-space size.
    pub iterations: u64,
    pub rng: RngStream,
}

/// Without-replacement index source. Small spaces get a materialized
/// partial Fisher-Yates shuffle; large ones rejection-sample against a seen
/// set (the budget is far below the space there).
enum IndexPool {
    Dense { arr: Vec<u64>, next: usize },
    Sparse { seen: HashSet<u64>, space: u64 },
}

impl IndexPool {
    fn new(bits: u32) -> Self {
        if bits <= 20 {
            IndexPool::Dense { arr: (0..(1u64 << bits)).collect(), next: 0 }
        } else {
            IndexPool::Sparse { seen: HashSet::new(), space: 1u64.checked_shl(bits).unwrap_or(u64::MAX) }
        }
    }

    fn draw(&mut self, rng: &mut impl Rng) -> Option<u64> {
        match self {
            IndexPool::Dense { arr, next } => {
                if *next >= arr.len() {
                    return None;
                }
                let j = rng.random_range(*next..arr.len());
                arr.swap(*next, j);
                let n = arr[*next];
                *next += 1;
                Some(n)
            }
            IndexPool::Sparse { seen, space } => {
                if seen.len() as u64 >= *space {
                    return None;
                }
                loop {
                    let cand = rng.random_range(0..*space);
                    if seen.insert(cand) {
                        return Some(cand);
                    }
                }
            }
        }
    }
}

/// Unique-index stochastic search with the utility filter and adaptive
/// budget-risk tightening. Visits at most M distinct indices; the filter
/// admits a candidate only when its objective reaches the incumbent's, and
/// each accepted incumbent lowers the over-budget bound to its own worst
/// per-task budget risk.
pub fn uisrfc(
    s: &Scenario,
    q: &QuoteProfile,
    cfg: &RiskEvalConfig,
    u: &UisrfcConfig,
) -> Result<SolveResult, Error> {
    let started = Instant::now();
    let bits = s.index_bits();
    if bits > 63 {
        return Err(Error::IndexSpaceTooLarge(bits));
    }
    if u.iterations == 0 {
        return Err(Error::InvalidParameter("iteration budget must be >= 1".into()));
    }
    cfg.validate()?;
    let space_cap = if bits >= 64 { u64::MAX } else { 1u64 << bits };
    let budget = u.iterations.min(space_cap);
    let mut cache = ColumnCache::new(s, q, cfg);
    let mut pool = IndexPool::new(bits);
    let mut rng = u.rng.rng();

    let mut u_star = 0.0f64;
    // Scalar tightening bound; effective cap per task is min(lambda4, r*).
    let mut r_star = s.tasks.iter().map(|t| t.lambda4).fold(0.0f64, f64::max);
    let mut incumbent: Option<(u64, f64)> = None;
    let mut visited = 0u64;

    for _ in 0..budget {
        let n = match pool.draw(&mut rng) {
            Some(n) => n,
            None => break,
        };
        visited += 1;
        if !index_satisfies_at_most_one(s, n) {
            continue;
        }
        let mut objective = 0.0;
        for k in 0..s.num_tasks() {
            objective += cache.eval(n, k)?.e_quality;
        }
        // Filter constraint: only candidates at or above the incumbent
        // objective proceed to the risk checks.
        if objective < u_star {
            continue;
        }
        let mut ok = true;
        let mut worst_budget_risk = 0.0f64;
        for k in 0..s.num_tasks() {
            let eval = cache.eval(n, k)?;
            let budget_cap = s.tasks[k].lambda4.min(r_star);
            if eval.risk_quality > s.tasks[k].lambda3 || eval.risk_budget > budget_cap {
                ok = false;
                break;
            }
            worst_budget_risk = worst_budget_risk.max(eval.risk_budget);
        }
        if !ok {
            continue;
        }
        if incumbent.map_or(true, |(_, obj)| objective > obj) {
            incumbent = Some((n, objective));
        }
        u_star = u_star.max(objective);
        if worst_budget_risk < r_star {
            r_star = worst_budget_risk;
        }
    }

    match incumbent {
        Some((n, objective)) => Ok(SolveResult {
            profile: AssignmentProfile::from_index(n, s.num_tasks(), s.num_workers())?,
            objective,
            feasible: true,
            iterations: visited,
            work: visited,
            wall_time_s: started.elapsed().as_secs_f64(),
        }),
        None => Ok(empty_result(s, visited, visited, started)),
    }
}

/// Initial-point strategies for the convex route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Spread mass uniformly: x = 1/(2|S|) per entry.
    Uniform,
    /// Deterministic greedy warm start against the surrogate constraints.
    Greedy,
    /// Random structurally valid binary point with budget repair.
    Random(u64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpScaConfig {
    /// Stop when consecutive epigraph values differ by at most this.
    pub eps: f64,
    pub max_outer: usize,
    /// Restarts after the first attempt.
    pub restarts: usize,
    pub init: InitStrategy,
    pub seed: u64,
}

impl Default for GpScaConfig {
    fn default() -> Self {
        Self { eps: 1e-4, max_outer: 200, restarts: 5, init: InitStrategy::Uniform, seed: 0 }
    }
}

pub(crate) fn init_point_for(instance: &GpInstance, strategy: InitStrategy) -> Vec<f64> {
    let n = instance.num_entries();
    match strategy {
        InitStrategy::Uniform => vec![1.0 / (2.0 * instance.num_tasks as f64); n],
        InitStrategy::Greedy => {
            let mut x = vec![0.0; n];
            let mut worker_used = vec![false; instance.num_agents];
            // Serve the tightest tasks first (largest floor relative to
            // cap), filling each by quality-per-pay ratio: reaches the
            // floors with the least budget, which is what the surrogate
            // caps punish.
            let mut order: Vec<usize> = (0..instance.num_tasks).collect();
            if let Some(floors) = &instance.quality_floor {
                order.sort_by(|&a, &b| {
                    let ta = floors[a] / instance.budget_cap[a];
                    let tb = floors[b] / instance.budget_cap[b];
                    tb.partial_cmp(&ta).unwrap().then(a.cmp(&b))
                });
            }
            let mut spend = vec![0.0; instance.num_tasks];
            let mut quality = vec![0.0; instance.num_tasks];
            let ranked = |task: usize| {
                let mut c: Vec<usize> = (0..instance.num_agents)
                    .flat_map(|i| Level::ALL.map(|l| instance.entry(i, task, l)))
                    .filter(|&e| instance.quality_coef[e] > 0.0 && instance.pay_coef[e] > 0.0)
                    .collect();
                c.sort_by(|&a, &b| {
                    let ra = instance.quality_coef[a] / instance.pay_coef[a];
                    let rb = instance.quality_coef[b] / instance.pay_coef[b];
                    rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
                });
                c
            };
            // Floor pass: secure every task's quality floor.
            for &task in &order {
                let floor = instance
                    .quality_floor
                    .as_ref()
                    .map_or(0.0, |f| f[task]);
                for e in ranked(task) {
                    if quality[task] >= floor {
                        break;
                    }
                    let agent = e / (instance.num_tasks * 2);
                    if worker_used[agent]
                        || spend[task] + instance.pay_coef[e] > instance.budget_cap[task]
                    {
                        continue;
                    }
                    worker_used[agent] = true;
                    x[e] = 1.0;
                    spend[task] += instance.pay_coef[e];
                    quality[task] += instance.quality_coef[e];
                }
            }
            // Fill pass: spend leftover workers wherever they still fit;
            // the objective rewards every cap filled.
            for &task in &order {
                for e in ranked(task) {
                    let agent = e / (instance.num_tasks * 2);
                    if worker_used[agent]
                        || spend[task] + instance.pay_coef[e] > instance.budget_cap[task]
                    {
                        continue;
                    }
                    worker_used[agent] = true;
                    x[e] = 1.0;
                    spend[task] += instance.pay_coef[e];
                    quality[task] += instance.quality_coef[e];
                }
            }
            x
        }
        InitStrategy::Random(seed) => {
            let mut rng = RngStream::new(seed, 0xb1a5).rng();
            let mut x = vec![0.0; n];
            let mut spend = vec![0.0; instance.num_tasks];
            for agent in 0..instance.num_agents {
                // none or one of the 2|S| slots
                let choices = instance.num_tasks * 2;
                let pick = rng.random_range(0..=choices);
                if pick == choices {
                    continue;
                }
                let task = pick / 2;
                let e = instance.entry(agent, task, Level::from_bit(pick % 2));
                if spend[task] + instance.pay_coef[e] <= instance.budget_cap[task] {
                    x[e] = 1.0;
                    spend[task] += instance.pay_coef[e];
                }
            }
            x
        }
    }
}

/// Offline convex-route driver: relax, iterate the condensed subproblems,
/// round, and repair. Restarts walk an init ladder (configured strategy,
/// then greedy, then seeded random points) until the rounded profile
/// passes the surrogate constraints.
pub fn gp_sca_offline(
    s: &Scenario,
    q: &QuoteProfile,
    cfg: &GpScaConfig,
) -> Result<SolveResult, Error> {
    let started = Instant::now();
    if !(cfg.eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be > 0".into()));
    }
    let instance = gp::offline_instance(s, q);
    let mut strategies = vec![cfg.init];
    strategies.push(InitStrategy::Greedy);
    for r in 0..cfg.restarts as u64 {
        strategies.push(InitStrategy::Random(cfg.seed.wrapping_add(r)));
    }
    strategies.truncate(cfg.restarts + 1);

    let mut total_work = 0u64;
    let mut total_iters = 0u64;
    for strategy in strategies {
        let (x0, y0) = gp::interior_lift(&instance, &init_point_for(&instance, strategy));
        let state = match gp::sca_solve(&instance, &x0, y0, cfg.eps, cfg.max_outer) {
            Ok(state) => state,
            Err(Error::SubproblemInfeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        total_work += state.newton_steps * instance.num_entries() as u64;
        total_iters += state.iterations as u64;
        let profile = round_and_repair(&state.x, s, q);
        let surrogate_ok = profile.satisfies_at_most_one()
            && (0..s.num_tasks()).all(|k| {
                let m = risk::markov_feasibility(k, &profile, q, s);
                m.c1 && m.c7
            });
        if !surrogate_ok {
            continue;
        }
        let objective = risk::expected_platform_utility(&profile, q, s)?;
        return Ok(SolveResult {
            profile,
            objective,
            feasible: true,
            iterations: total_iters,
            work: total_work,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Err(Error::NoFeasibleInit { restarts: cfg.restarts })
}

/// Threshold a relaxed profile at 1/2, keep each worker's strongest entry,
/// then drop the lowest-value contracts per task until the spend cap
/// holds. `value` and `spend` are slot-indexed; `cap` is per task.
pub fn round_and_repair_with(
    x_cont: &[f64],
    num_workers: usize,
    num_tasks: usize,
    value: &[f64],
    spend: &[f64],
    cap: &[f64],
) -> AssignmentProfile {
    let mut profile = AssignmentProfile::empty(num_workers, num_tasks);
    for i in 0..num_workers {
        let slots: Vec<usize> = (0..num_tasks)
            .flat_map(|k| Level::ALL.map(|l| (i * num_tasks + k) * 2 + l.bit()))
            .collect();
        let best = slots
            .iter()
            .filter(|&&e| x_cont[e] >= 0.5)
            .max_by(|&&a, &&b| {
                x_cont[a]
                    .partial_cmp(&x_cont[b])
                    .unwrap()
                    .then(b.cmp(&a)) // tie: keep the lowest slot
            });
        if let Some(&e) = best {
            let within = e - i * num_tasks * 2;
            profile.set(i, within / 2, Level::from_bit(within % 2), true);
        }
    }
    for k in 0..num_tasks {
        loop {
            let assigned: Vec<usize> = (0..num_workers)
                .flat_map(|i| Level::ALL.map(|l| (i, l)))
                .filter(|&(i, l)| profile.get(i, k, l))
                .map(|(i, l)| (i * num_tasks + k) * 2 + l.bit())
                .collect();
            let total: f64 = assigned.iter().map(|&e| spend[e]).sum();
            if total <= cap[k] || assigned.is_empty() {
                break;
            }
            let worst = *assigned
                .iter()
                .min_by(|&&a, &&b| value[a].partial_cmp(&value[b]).unwrap().then(a.cmp(&b)))
                .unwrap();
            let i = worst / (num_tasks * 2);
            let within = worst - i * num_tasks * 2;
            profile.set(i, within / 2, Level::from_bit(within % 2), false);
        }
    }
    profile
}

/// Offline rounding: expected-pay spend against the surrogate budget caps,
/// expected quality as the drop criterion.
pub fn round_and_repair(x_cont: &[f64], s: &Scenario, q: &QuoteProfile) -> AssignmentProfile {
    let instance = gp::offline_instance(s, q);
    round_and_repair_with(
        x_cont,
        s.num_workers(),
        s.num_tasks(),
        &instance.quality_coef,
        &instance.pay_coef,
        &instance.budget_cap,
    )
}

/// Turn a feasible solve result into signed contracts at the quoted prices
/// and expected qualities.
pub fn sign_contracts(result: &SolveResult, q: &QuoteProfile) -> Result<ContractBook, Error> {
    if !result.feasible {
        return Err(Error::InfeasibleOffline);
    }
    let contracts = result
        .profile
        .assigned()
        .map(|(i, k, level)| Contract {
            worker: i,
            task: k,
            level,
            price: q.price(i, k, level),
            expected_quality: q.expected_quality(i, k, level),
        })
        .collect();
    Ok(ContractBook { contracts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotes::build_quote_profile;
    use crate::testutil::{loose_risk_caps, tiny_scenario};

    fn default_cfg() -> RiskEvalConfig {
        RiskEvalConfig::default()
    }

    #[test]
    fn esa_guard_rejects_large_spaces() {
        let s = crate::io::generate_scenario(
            &crate::io::ParamSetSpec::set1(),
            5,
            15,
            &RngStream::new(1, 0),
        )
        .unwrap();
        let q = build_quote_profile(&s).unwrap();
        assert!(matches!(
            esa(&s, &q, &default_cfg()),
            Err(Error::IndexSpaceTooLarge(_))
        ));
    }

    #[test]
    fn esa_single_pair_prefers_hard_when_unconstrained() {
        let mut s = tiny_scenario();
        s.tasks.truncate(1);
        s.workers.truncate(1);
        s.links = vec![s.links[0].clone()];
        loose_risk_caps(&mut s);
        let q = build_quote_profile(&s).unwrap();
        let r = esa(&s, &q, &default_cfg()).unwrap();
        assert!(r.feasible);
        assert!(r.profile.get(0, 0, Level::Hard));
        assert!(q.expected_quality(0, 0, Level::Hard) > q.expected_quality(0, 0, Level::Soft));
    }

    #[test]
    fn esa_infeasible_everywhere_returns_empty() {
        let mut s = tiny_scenario();
        for t in &mut s.tasks {
            t.lambda4 = 1e-9; // any positive price overruns immediately
            t.lambda2 = 1e-6;
            t.lambda3 = 1e-9;
        }
        let q = build_quote_profile(&s).unwrap();
        let r = esa(&s, &q, &default_cfg()).unwrap();
        assert!(!r.feasible);
        assert!(r.profile.is_empty());
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn uisrfc_exhaustion_matches_esa() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let cfg = default_cfg();
        let full = 1u64 << s.index_bits();
        let esa_result = esa(&s, &q, &cfg).unwrap();
        for seed in 0..5 {
            let u = UisrfcConfig { iterations: full, rng: RngStream::new(seed, 0) };
            let r = uisrfc(&s, &q, &cfg, &u).unwrap();
            assert_eq!(r.objective, esa_result.objective, "seed {seed}");
            assert_eq!(r.feasible, esa_result.feasible);
        }
    }

    #[test]
    fn uisrfc_single_infeasible_draw_is_empty() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let cfg = default_cfg();
        // Find a seed whose first draw violates the structural constraint.
        for seed in 0..200 {
            let u = UisrfcConfig { iterations: 1, rng: RngStream::new(seed, 3) };
            let mut pool = IndexPool::new(s.index_bits());
            let first = pool.draw(&mut u.rng.rng()).unwrap();
            if !index_satisfies_at_most_one(&s, first) {
                let r = uisrfc(&s, &q, &cfg, &u).unwrap();
                assert!(!r.feasible);
                assert_eq!(r.objective, 0.0);
                return;
            }
        }
        panic!("no seed produced an infeasible first draw");
    }

    #[test]
    fn uisrfc_never_beats_esa() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let cfg = default_cfg();
        let esa_obj = esa(&s, &q, &cfg).unwrap().objective;
        for seed in 0..30 {
            let u = UisrfcConfig { iterations: 64, rng: RngStream::new(seed, 1) };
            let r = uisrfc(&s, &q, &cfg, &u).unwrap();
            assert!(r.objective <= esa_obj + 1e-12);
        }
    }

    #[test]
    fn round_and_repair_identity_on_feasible_binary() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let instance = gp::offline_instance(&s, &q);
        let n = instance.num_entries();
        let mut x = vec![0.0; n];
        // Worker 0 hard on task 0 if it fits the surrogate cap.
        let e = instance.entry(0, 0, Level::Hard);
        if instance.pay_coef[e] <= instance.budget_cap[0] {
            x[e] = 1.0;
        }
        let p = round_and_repair(&x, &s, &q);
        for (i, slot) in x.iter().enumerate() {
            let agent = i / (s.num_tasks() * 2);
            let within = i - agent * s.num_tasks() * 2;
            assert_eq!(
                p.get(agent, within / 2, Level::from_bit(within % 2)),
                *slot == 1.0
            );
        }
    }

    #[test]
    fn round_and_repair_resolves_worker_conflict() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let n = s.num_workers() * s.num_tasks() * 2;
        let mut x = vec![0.0; n];
        let hi = (0 * s.num_tasks() + 0) * 2 + Level::Hard.bit();
        let lo = (0 * s.num_tasks() + 1) * 2 + Level::Soft.bit();
        x[hi] = 0.7;
        x[lo] = 0.6;
        let p = round_and_repair(&x, &s, &q);
        assert!(p.get(0, 0, Level::Hard) || p.worker_assignment(0).is_none());
        assert!(!p.get(0, 1, Level::Soft));
        assert!(p.satisfies_at_most_one());
    }

    #[test]
    fn sign_contracts_structure() {
        let s = tiny_scenario();
        let q = build_quote_profile(&s).unwrap();
        let r = esa(&s, &q, &default_cfg()).unwrap();
        if r.feasible {
            let book = sign_contracts(&r, &q).unwrap();
            assert_eq!(book.len(), r.profile.assigned().count());
            for c in &book.contracts {
                assert_eq!(c.price, q.price(c.worker, c.task, c.level));
            }
            // one contract per worker at most
            let mut seen = HashSet::new();
            for c in &book.contracts {
                assert!(seen.insert(c.worker));
            }
        }
        let infeasible = SolveResult {
            profile: AssignmentProfile::empty(s.num_workers(), s.num_tasks()),
            objective: 0.0,
            feasible: false,
            iterations: 0,
            work: 0,
            wall_time_s: 0.0,
        };
        assert!(sign_contracts(&infeasible, &q).is_err());
    }
}

/// Exposed for the debugging example; not part of the public contract.
#[doc(hidden)]
pub fn init_point_debug(instance: &GpInstance, strategy: InitStrategy) -> Vec<f64> {
    init_point_for(instance, strategy)
}
