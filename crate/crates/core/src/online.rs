//! Online temporary-worker recruitment: shortfall detection after a draw,
//! exact/stochastic/convex solvers for the backup problem, and the random
//! and greedy baselines.
//!
//! Online qualities are realized (workloads are known once a trading runs),
//! so the backup problem is deterministic: maximize added quality under
//! each task's remaining budget, one task per temporary worker.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gp;
use crate::model::{AssignmentProfile, ContractBook, Level, Scenario};
use crate::offline::round_and_repair_with;
use crate::stats::{RngStream, TradingDraw};
use crate::Error;

/// Guard on online exhaustive search.
pub const ONLINE_ESA_GUARD_BITS: u32 = 26;

/// Tasks still short on quality with budget left, and the uncontracted
/// attendees available to serve them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortfallState {
    pub tasks: Vec<ShortfallTask>,
    /// Global ids of attended workers without a long-term contract.
    pub temp_workers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortfallTask {
    pub task: usize,
    pub remaining_budget: f64,
}

impl ShortfallState {
    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty() || self.temp_workers.is_empty()
    }
}

/// Detect the shortfall after contracts executed against a draw. A task
/// enters the state when its delivered quality is below its demand and
/// some budget remains after paying the attended contracted workers.
pub fn collect_shortfall(book: &ContractBook, draw: &TradingDraw, s: &Scenario) -> ShortfallState {
    let mut delivered = vec![0.0; s.num_tasks()];
    let mut paid = vec![0.0; s.num_tasks()];
    for c in &book.contracts {
        if !draw.alpha[c.worker] {
            continue;
        }
        let w = &s.workers[c.worker];
        let link = s.link(c.worker, c.task);
        delivered[c.task] +=
            crate::quotes::realized_quality(link, w, c.level, draw.beta[c.worker]);
        paid[c.task] += c.price;
    }
    let tasks = s
        .tasks
        .iter()
        .enumerate()
        .filter(|(k, t)| delivered[*k] < t.quality_demand && t.budget - paid[*k] > 0.0)
        .map(|(k, t)| ShortfallTask { task: k, remaining_budget: t.budget - paid[k] })
        .collect();
    let temp_workers = (0..s.num_workers())
        .filter(|&i| draw.alpha[i] && !book.is_contracted(i))
        .collect();
    ShortfallState { tasks, temp_workers }
}

/// Realized qualities and prices of every candidate temporary hire,
/// indexed locally: `(temp_idx * |shortfall tasks| + task_idx) * 2 + level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineQuoteSet {
    pub num_workers: usize,
    pub num_tasks: usize,
    pub quality: Vec<f64>,
    pub price: Vec<f64>,
    /// Hires that can never raise quality (nonpositive realized quality)
    /// are ineligible for every solver.
    pub eligible: Vec<bool>,
}

impl OnlineQuoteSet {
    pub fn slot(&self, worker: usize, task: usize, level: Level) -> usize {
        (worker * self.num_tasks + task) * 2 + level.bit()
    }
}

/// Quote every (temporary worker, shortfall task, level) against the draw.
pub fn online_quotes(state: &ShortfallState, draw: &TradingDraw, s: &Scenario) -> OnlineQuoteSet {
    let n = state.temp_workers.len() * state.tasks.len() * 2;
    let mut quality = vec![0.0; n];
    let mut price = vec![0.0; n];
    let mut eligible = vec![false; n];
    for (wi, &worker) in state.temp_workers.iter().enumerate() {
        let w = &s.workers[worker];
        let beta = draw.beta[worker];
        for (ti, st) in state.tasks.iter().enumerate() {
            let link = s.link(worker, st.task);
            for level in Level::ALL {
                let slot = (wi * state.tasks.len() + ti) * 2 + level.bit();
                quality[slot] = crate::quotes::realized_quality(link, w, level, beta);
                price[slot] = crate::quotes::online_price(link, w, level, beta, s.delta_p);
                eligible[slot] = quality[slot] > 0.0;
            }
        }
    }
    OnlineQuoteSet {
        num_workers: state.temp_workers.len(),
        num_tasks: state.tasks.len(),
        quality,
        price,
        eligible,
    }
}

/// One temporary hire, in global ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineHire {
    pub worker: usize,
    pub task: usize,
    pub level: Level,
    pub price: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineOutcome {
    pub hires: Vec<OnlineHire>,
    /// Total realized quality added.
    pub objective: f64,
    /// Deterministic work measure (candidates examined or Newton steps).
    pub work: u64,
    /// Measured wall time in seconds; informational only.
    pub wall_time_s: f64,
}

impl OnlineOutcome {
    fn empty(work: u64, started: Instant) -> Self {
        Self { hires: Vec::new(), objective: 0.0, work, wall_time_s: started.elapsed().as_secs_f64() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OnlineAlgo {
    Esa,
    Uisrfc { iterations: u64 },
    GpSca { eps: f64, max_outer: usize },
    Mcrs { iterations: u64 },
    SqPrefer,
}

/// Per-task column evaluation for the enumerative online solvers.
struct OnlineColumns<'a> {
    quotes: &'a OnlineQuoteSet,
    per_task: Vec<HashMap<u64, (f64, f64, bool)>>, // (quality, spend, eligible)
}

impl<'a> OnlineColumns<'a> {
    fn new(quotes: &'a OnlineQuoteSet) -> Self {
        Self { quotes, per_task: vec![HashMap::new(); quotes.num_tasks] }
    }

    fn column_code(&self, n: u64, task: usize) -> u64 {
        let tasks = self.quotes.num_tasks;
        let mut code = 0u64;
        for i in 0..self.quotes.num_workers {
            let soft = (n >> ((i * tasks + task) * 2)) & 1;
            let hard = (n >> ((i * tasks + task) * 2 + 1)) & 1;
            code |= (soft | (hard << 1)) << (2 * i);
        }
        code
    }

    fn eval(&mut self, n: u64, task: usize) -> (f64, f64, bool) {
        let code = self.column_code(n, task);
        if let Some(&e) = self.per_task[task].get(&code) {
            return e;
        }
        let mut quality = 0.0;
        let mut spend = 0.0;
        let mut eligible = true;
        for i in 0..self.quotes.num_workers {
            for level in Level::ALL {
                let bit = 1 + level.bit() as u64;
                if code >> (2 * i) & bit == bit {
                    let slot = self.quotes.slot(i, task, level);
                    quality += self.quotes.quality[slot];
                    spend += self.quotes.price[slot];
                    eligible &= self.quotes.eligible[slot];
                }
            }
        }
        self.per_task[task].insert(code, (quality, spend, eligible));
        (quality, spend, eligible)
    }
}

fn index_satisfies_one_task(quotes: &OnlineQuoteSet, n: u64) -> bool {
    let per_worker_bits = quotes.num_tasks * 2;
    let mask = (1u64 << per_worker_bits) - 1;
    (0..quotes.num_workers).all(|i| ((n >> (i * per_worker_bits)) & mask).count_ones() <= 1)
}

fn outcome_from_profile(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    profile: &AssignmentProfile,
    work: u64,
    started: Instant,
) -> OnlineOutcome {
    let mut hires = Vec::new();
    let mut objective = 0.0;
    for (wi, ti, level) in profile.assigned() {
        let slot = quotes.slot(wi, ti, level);
        objective += quotes.quality[slot];
        hires.push(OnlineHire {
            worker: state.temp_workers[wi],
            task: state.tasks[ti].task,
            level,
            price: quotes.price[slot],
            quality: quotes.quality[slot],
        });
    }
    OnlineOutcome { hires, objective, work, wall_time_s: started.elapsed().as_secs_f64() }
}

/// Solve the backup problem with the selected algorithm.
pub fn solve_online(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    algo: OnlineAlgo,
    rng: &RngStream,
) -> Result<OnlineOutcome, Error> {
    let started = Instant::now();
    if state.is_empty() {
        return Ok(OnlineOutcome::empty(0, started));
    }
    match algo {
        OnlineAlgo::Esa => online_esa(state, quotes, started),
        OnlineAlgo::Uisrfc { iterations } => {
            online_uisrfc(state, quotes, iterations, rng, started)
        }
        OnlineAlgo::Mcrs { iterations } => mcrs_inner(state, quotes, iterations, rng, started),
        OnlineAlgo::SqPrefer => Ok(sq_prefer_inner(state, quotes, started)),
        OnlineAlgo::GpSca { eps, max_outer } => online_gp_sca(state, quotes, eps, max_outer, started),
    }
}

fn feasible_objective(
    quotes: &OnlineQuoteSet,
    state: &ShortfallState,
    columns: &mut OnlineColumns,
    n: u64,
) -> Option<f64> {
    if !index_satisfies_one_task(quotes, n) {
        return None;
    }
    let mut total = 0.0;
    for ti in 0..quotes.num_tasks {
        let (quality, spend, eligible) = columns.eval(n, ti);
        if !eligible || spend > state.tasks[ti].remaining_budget {
            return None;
        }
        total += quality;
    }
    Some(total)
}

fn online_esa(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    started: Instant,
) -> Result<OnlineOutcome, Error> {
    let bits = (quotes.num_workers * quotes.num_tasks * 2) as u32;
    if bits > ONLINE_ESA_GUARD_BITS {
        return Err(Error::IndexSpaceTooLarge(bits));
    }
    let mut columns = OnlineColumns::new(quotes);
    let space = 1u64 << bits;
    let mut best: Option<(u64, f64)> = None;
    for n in 0..space {
        if let Some(obj) = feasible_objective(quotes, state, &mut columns, n) {
            if best.map_or(true, |(_, b)| obj > b) {
                best = Some((n, obj));
            }
        }
    }
    let profile = match best {
        Some((n, _)) => AssignmentProfile::from_index(n, quotes.num_tasks, quotes.num_workers)?,
        None => AssignmentProfile::empty(quotes.num_workers, quotes.num_tasks),
    };
    Ok(outcome_from_profile(state, quotes, &profile, space, started))
}

fn online_uisrfc(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    iterations: u64,
    rng: &RngStream,
    started: Instant,
) -> Result<OnlineOutcome, Error> {
    let bits = (quotes.num_workers * quotes.num_tasks * 2) as u32;
    if bits > 63 {
        return Err(Error::IndexSpaceTooLarge(bits));
    }
    let space = 1u64 << bits;
    let budget = iterations.min(space);
    let mut columns = OnlineColumns::new(quotes);
    let mut pool = OnlinePool::new(bits);
    let mut r = rng.rng();
    let mut u_star = 0.0f64;
    let mut incumbent: Option<(u64, f64)> = None;
    let mut visited = 0u64;
    for _ in 0..budget {
        let n = match pool.draw(&mut r) {
            Some(n) => n,
            None => break,
        };
        visited += 1;
        if !index_satisfies_one_task(quotes, n) {
            continue;
        }
        let mut total = 0.0;
        let mut structural = true;
        for ti in 0..quotes.num_tasks {
            let (quality, _, eligible) = columns.eval(n, ti);
            if !eligible {
                structural = false;
                break;
            }
            total += quality;
        }
        // Objective filter before the budget checks.
        if !structural || total < u_star {
            continue;
        }
        let within_budget = (0..quotes.num_tasks)
            .all(|ti| columns.eval(n, ti).1 <= state.tasks[ti].remaining_budget);
        if !within_budget {
            continue;
        }
        if incumbent.map_or(true, |(_, obj)| total > obj) {
            incumbent = Some((n, total));
        }
        u_star = u_star.max(total);
    }
    let profile = match incumbent {
        Some((n, _)) => AssignmentProfile::from_index(n, quotes.num_tasks, quotes.num_workers)?,
        None => AssignmentProfile::empty(quotes.num_workers, quotes.num_tasks),
    };
    Ok(outcome_from_profile(state, quotes, &profile, visited, started))
}

/// Without-replacement pool for the stochastic online solvers.
enum OnlinePool {
    Dense { arr: Vec<u64>, next: usize },
    Sparse { seen: std::collections::HashSet<u64>, space: u64 },
}

impl OnlinePool {
    fn new(bits: u32) -> Self {
        if bits <= 20 {
            OnlinePool::Dense { arr: (0..(1u64 << bits)).collect(), next: 0 }
        } else {
            OnlinePool::Sparse { seen: Default::default(), space: 1u64 << bits }
        }
    }

    fn draw(&mut self, rng: &mut impl Rng) -> Option<u64> {
        match self {
            OnlinePool::Dense { arr, next } => {
                if *next >= arr.len() {
                    return None;
                }
                let j = rng.random_range(*next..arr.len());
                arr.swap(*next, j);
                let n = arr[*next];
                *next += 1;
                Some(n)
            }
            OnlinePool::Sparse { seen, space } => {
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

/// Monte-Carlo random sampling baseline: best fully feasible profile among
/// uniformly drawn distinct indices.
pub fn mcrs(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    iterations: u64,
    rng: &RngStream,
) -> Result<OnlineOutcome, Error> {
    let started = Instant::now();
    if state.is_empty() {
        return Ok(OnlineOutcome::empty(0, started));
    }
    mcrs_inner(state, quotes, iterations, rng, started)
}

fn mcrs_inner(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    iterations: u64,
    rng: &RngStream,
    started: Instant,
) -> Result<OnlineOutcome, Error> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iteration budget must be >= 1".into()));
    }
    let bits = (quotes.num_workers * quotes.num_tasks * 2) as u32;
    if bits > 63 {
        return Err(Error::IndexSpaceTooLarge(bits));
    }
    let space = 1u64 << bits;
    let budget = iterations.min(space);
    let mut columns = OnlineColumns::new(quotes);
    let mut pool = OnlinePool::new(bits);
    let mut r = rng.rng();
    let mut best: Option<(u64, f64)> = None;
    let mut visited = 0u64;
    for _ in 0..budget {
        let n = match pool.draw(&mut r) {
            Some(n) => n,
            None => break,
        };
        visited += 1;
        if let Some(obj) = feasible_objective(quotes, state, &mut columns, n) {
            if best.map_or(true, |(_, b)| obj > b) {
                best = Some((n, obj));
            }
        }
    }
    let profile = match best {
        Some((n, _)) => AssignmentProfile::from_index(n, quotes.num_tasks, quotes.num_workers)?,
        None => AssignmentProfile::empty(quotes.num_workers, quotes.num_tasks),
    };
    Ok(outcome_from_profile(state, quotes, &profile, visited, started))
}

/// Greedy baseline preferring hard assurances: candidates sorted by hard
/// realized quality, assigned when the budget fits, falling back to soft
/// only when hard is unaffordable.
pub fn sq_prefer(state: &ShortfallState, quotes: &OnlineQuoteSet) -> OnlineOutcome {
    let started = Instant::now();
    if state.is_empty() {
        return OnlineOutcome::empty(0, started);
    }
    sq_prefer_inner(state, quotes, started)
}

fn sq_prefer_inner(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    started: Instant,
) -> OnlineOutcome {
    let mut pairs: Vec<(usize, usize)> = (0..quotes.num_workers)
        .flat_map(|wi| (0..quotes.num_tasks).map(move |ti| (wi, ti)))
        .collect();
    // Deterministic order: hard quality desc, hard price asc, worker asc,
    // task asc.
    pairs.sort_by(|&(w1, t1), &(w2, t2)| {
        let s1 = quotes.slot(w1, t1, Level::Hard);
        let s2 = quotes.slot(w2, t2, Level::Hard);
        quotes.quality[s2]
            .partial_cmp(&quotes.quality[s1])
            .unwrap()
            .then(quotes.price[s1].partial_cmp(&quotes.price[s2]).unwrap())
            .then(w1.cmp(&w2))
            .then(t1.cmp(&t2))
    });
    let mut remaining: Vec<f64> = state.tasks.iter().map(|t| t.remaining_budget).collect();
    let mut taken = vec![false; quotes.num_workers];
    let mut profile = AssignmentProfile::empty(quotes.num_workers, quotes.num_tasks);
    let mut work = 0u64;
    for (wi, ti) in pairs {
        work += 1;
        if taken[wi] {
            continue;
        }
        for level in [Level::Hard, Level::Soft] {
            let slot = quotes.slot(wi, ti, level);
            if quotes.eligible[slot] && quotes.price[slot] <= remaining[ti] {
                profile.set(wi, ti, level, true);
                remaining[ti] -= quotes.price[slot];
                taken[wi] = true;
                break;
            }
        }
    }
    outcome_from_profile(state, quotes, &profile, work, started)
}

fn online_gp_sca(
    state: &ShortfallState,
    quotes: &OnlineQuoteSet,
    eps: f64,
    max_outer: usize,
    started: Instant,
) -> Result<OnlineOutcome, Error> {
    // Ineligible slots are priced out by zeroing their quality; the
    // builder drops nonpositive-quality entries from every product.
    let quality: Vec<f64> = quotes
        .quality
        .iter()
        .zip(&quotes.eligible)
        .map(|(&q, &e)| if e { q } else { 0.0 })
        .collect();
    let instance = gp::online_instance(
        quotes.num_workers,
        quotes.num_tasks,
        quality,
        quotes.price.clone(),
        state.tasks.iter().map(|t| t.remaining_budget).collect(),
    );
    if instance.quality_coef.iter().all(|&q| q <= 0.0) {
        return Ok(OnlineOutcome::empty(0, started));
    }
    let mut total_work = 0u64;
    // Same restart ladder as offline: uniform, greedy, then seeded random.
    let inits: Vec<crate::offline::InitStrategy> = vec![
        crate::offline::InitStrategy::Uniform,
        crate::offline::InitStrategy::Greedy,
        crate::offline::InitStrategy::Random(1),
        crate::offline::InitStrategy::Random(2),
    ];
    for strategy in inits {
        let raw = crate::offline::init_point_for(&instance, strategy);
        let (x0, y0) = gp::interior_lift(&instance, &raw);
        let state_sca = match gp::sca_solve(&instance, &x0, y0, eps, max_outer) {
            Ok(st) => st,
            Err(Error::SubproblemInfeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        total_work += state_sca.newton_steps * instance.num_entries() as u64;
        let caps: Vec<f64> = state.tasks.iter().map(|t| t.remaining_budget).collect();
        let profile = round_and_repair_with(
            &state_sca.x,
            quotes.num_workers,
            quotes.num_tasks,
            &instance.quality_coef,
            &instance.pay_coef,
            &caps,
        );
        // The hard budget must hold exactly after rounding; the repair
        // guarantees it, so any eligible rounding is final.
        let mut clean = profile.clone();
        for (wi, ti, level) in profile.assigned() {
            if !quotes.eligible[quotes.slot(wi, ti, level)] {
                clean.set(wi, ti, level, false);
            }
        }
        return Ok(outcome_from_profile(state, quotes, &clean, total_work, started));
    }
    Ok(OnlineOutcome::empty(total_work, started))
}
