//! Domain types shared by every solver: workers, tasks, service links,
//! scenarios, assignment profiles, and contract books.

use serde::{Deserialize, Serialize};

use crate::stats::{BernoulliParticipation, TruncNormal};
use crate::Error;

/// Quality-assurance level of a service contract.
///
/// `Hard` pins the promised quality regardless of the worker's local
/// workload; `Soft` lets the workload degrade it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Soft,
    Hard,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Soft, Level::Hard];

    /// Bit used in the index encoding: Soft = 0, Hard = 1.
    pub fn bit(self) -> usize {
        match self {
            Level::Soft => 0,
            Level::Hard => 1,
        }
    }

    pub fn from_bit(b: usize) -> Self {
        if b == 0 {
            Level::Soft
        } else {
            Level::Hard
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::Soft => write!(f, "soft"),
            Level::Hard => write!(f, "hard"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: usize,
    pub participation: BernoulliParticipation,
    pub workload: TruncNormal,
    /// Cost factor applied to hard-assurance local cost.
    pub cost_factor: f64,
    /// Marginal quality degradation per unit of local workload.
    pub degradation_rate: f64,
    /// Weight of the local-cost term in the worker's utility.
    pub weight: f64,
    /// Smallest acceptable per-trading utility.
    pub min_utility: f64,
    /// Multiplier on `min_utility` in the worker's risk event.
    pub lambda1: f64,
    /// Cap on the probability of an unsatisfying utility; < 1, with 0
    /// meaning the worker accepts no risk at all.
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: usize,
    /// Tolerable budget for one trading.
    pub budget: f64,
    /// Desired service quality.
    pub quality_demand: f64,
    /// Quality-ratio threshold in the unsatisfying-quality risk.
    pub lambda1: f64,
    /// Budget-ratio threshold in the over-budget risk.
    pub lambda2: f64,
    /// Cap on the unsatisfying-quality risk.
    pub lambda3: f64,
    /// Cap on the over-budget risk.
    pub lambda4: f64,
}

/// Per (worker, task) service terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceLink {
    pub worker: usize,
    pub task: usize,
    /// Fundamental cost the worker incurs by serving the task at all.
    pub base_cost: f64,
    /// Quality delivered under hard assurance.
    pub hard_quality: f64,
}

impl ServiceLink {
    /// Distribution of the soft-assurance quality `hard_quality - r' * beta`.
    /// Degenerate (`r' = 0`) workloads have no distribution; callers handle
    /// that case via [`Worker::degradation_rate`].
    pub fn soft_quality_dist(&self, worker: &Worker) -> Result<TruncNormal, Error> {
        worker
            .workload
            .affine(-worker.degradation_rate, self.hard_quality)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub workers: Vec<Worker>,
    pub tasks: Vec<Task>,
    /// Dense, worker-major: `links[i * tasks + k]` connects worker `i` and
    /// task `k`.
    pub links: Vec<ServiceLink>,
    /// Standard incentive increment added on top of every reserve price.
    pub delta_p: f64,
}

impl Scenario {
    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn link(&self, worker: usize, task: usize) -> &ServiceLink {
        &self.links[worker * self.tasks.len() + task]
    }

    /// Bits needed to index the full assignment space.
    pub fn index_bits(&self) -> u32 {
        (self.num_workers() * self.num_tasks() * 2) as u32
    }

    pub fn draw_inputs(&self) -> Vec<(BernoulliParticipation, TruncNormal)> {
        self.workers
            .iter()
            .map(|w| (w.participation, w.workload))
            .collect()
    }

    /// Collects every invariant violation; an empty list means the scenario
    /// is well formed. Total function: never fails.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.delta_p > 0.0) {
            v.push(format!("standard increment must be > 0, got {}", self.delta_p));
        }
        for (idx, w) in self.workers.iter().enumerate() {
            if w.id != idx {
                v.push(format!("worker at position {idx} carries id {}", w.id));
            }
            if !(w.cost_factor > 0.0) {
                v.push(format!("worker {}: cost factor must be > 0", w.id));
            }
            if w.degradation_rate < 0.0 {
                v.push(format!("worker {}: degradation rate must be >= 0", w.id));
            }
            if w.weight < 0.0 {
                v.push(format!("worker {}: weight must be >= 0", w.id));
            }
            if !(w.min_utility > 0.0) {
                v.push(format!("worker {}: minimum utility must be > 0", w.id));
            }
            if !(w.lambda1 > 0.0) {
                v.push(format!("worker {}: lambda1 must be > 0", w.id));
            }
            if !(0.0..1.0).contains(&w.lambda2) {
                v.push(format!("worker {}: risk cap must be < 1", w.id));
            }
        }
        for (idx, t) in self.tasks.iter().enumerate() {
            if t.id != idx {
                v.push(format!("task at position {idx} carries id {}", t.id));
            }
            if !(t.budget > 0.0) {
                v.push(format!("task {}: budget must be > 0", t.id));
            }
            if !(t.quality_demand > 0.0) {
                v.push(format!("task {}: quality demand must be > 0", t.id));
            }
            if !(t.lambda1 > 0.0) {
                v.push(format!("task {}: lambda1 must be > 0", t.id));
            }
            if !(t.lambda2 > 0.0) {
                v.push(format!("task {}: lambda2 must be > 0", t.id));
            }
            for (name, val) in [("lambda3", t.lambda3), ("lambda4", t.lambda4)] {
                if !(val > 0.0 && val <= 1.0) {
                    v.push(format!("task {}: {name} must lie in (0,1]", t.id));
                }
            }
        }
        if self.links.len() != self.workers.len() * self.tasks.len() {
            v.push(format!(
                "expected one link per (worker, task) pair: {} links for {} x {}",
                self.links.len(),
                self.workers.len(),
                self.tasks.len()
            ));
        } else {
            for i in 0..self.workers.len() {
                for k in 0..self.tasks.len() {
                    let l = &self.links[i * self.tasks.len() + k];
                    if l.worker != i || l.task != k {
                        v.push(format!(
                            "link slot ({i},{k}) holds link for ({},{})",
                            l.worker, l.task
                        ));
                    }
                    if l.base_cost < 0.0 {
                        v.push(format!("link ({i},{k}): base cost must be >= 0"));
                    }
                    if !(l.hard_quality > 0.0) {
                        v.push(format!("link ({i},{k}): hard quality must be > 0"));
                    }
                }
            }
        }
        v
    }
}

/// Binary assignment map x[(worker, task, level)].
///
/// Index encoding is fixed: bit `(worker * |S| + task) * 2 + level_bit` with
/// Soft = bit 0 of the pair, worker-major overall. The same order is used
/// for continuous relaxations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentProfile {
    num_workers: usize,
    num_tasks: usize,
    bits: Vec<bool>,
}

impl AssignmentProfile {
    pub fn empty(num_workers: usize, num_tasks: usize) -> Self {
        Self {
            num_workers,
            num_tasks,
            bits: vec![false; num_workers * num_tasks * 2],
        }
    }

    pub fn num_workers(&self) -> usize {
        self.num_workers
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn slot(&self, worker: usize, task: usize, level: Level) -> usize {
        (worker * self.num_tasks + task) * 2 + level.bit()
    }

    pub fn get(&self, worker: usize, task: usize, level: Level) -> bool {
        self.bits[self.slot(worker, task, level)]
    }

    pub fn set(&mut self, worker: usize, task: usize, level: Level, value: bool) {
        let s = self.slot(worker, task, level);
        self.bits[s] = value;
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn assigned(&self) -> impl Iterator<Item = (usize, usize, Level)> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(s, _)| {
            let level = Level::from_bit(s & 1);
            let pair = s >> 1;
            (pair / self.num_tasks, pair % self.num_tasks, level)
        })
    }

    /// The single assignment of a worker, if any (requires C5 to be
    /// meaningful).
    pub fn worker_assignment(&self, worker: usize) -> Option<(usize, Level)> {
        for k in 0..self.num_tasks {
            for l in Level::ALL {
                if self.get(worker, k, l) {
                    return Some((k, l));
                }
            }
        }
        None
    }

    /// Each worker serves at most one (task, level).
    pub fn satisfies_at_most_one(&self) -> bool {
        (0..self.num_workers).all(|i| {
            let base = i * self.num_tasks * 2;
            self.bits[base..base + self.num_tasks * 2]
                .iter()
                .filter(|&&b| b)
                .count()
                <= 1
        })
    }

    /// Workers assigned to `task` at each level: (soft set, hard set).
    pub fn task_sets(&self, task: usize) -> (Vec<usize>, Vec<usize>) {
        let mut soft = Vec::new();
        let mut hard = Vec::new();
        for i in 0..self.num_workers {
            if self.get(i, task, Level::Soft) {
                soft.push(i);
            }
            if self.get(i, task, Level::Hard) {
                hard.push(i);
            }
        }
        (soft, hard)
    }

    /// Encode into the canonical index. Errors when the space exceeds 63
    /// bits.
    pub fn index(&self) -> Result<u64, Error> {
        if self.bits.len() > 63 {
            return Err(Error::IndexSpaceTooLarge(self.bits.len() as u32));
        }
        let mut n = 0u64;
        for (s, &b) in self.bits.iter().enumerate() {
            if b {
                n |= 1 << s;
            }
        }
        Ok(n)
    }

    /// Decode index `n` over a `(num_tasks, num_workers)` roster; the
    /// inverse of [`AssignmentProfile::index`].
    pub fn from_index(n: u64, num_tasks: usize, num_workers: usize) -> Result<Self, Error> {
        let total = num_workers * num_tasks * 2;
        if total > 63 {
            return Err(Error::IndexSpaceTooLarge(total as u32));
        }
        if n >= (1u64 << total) {
            return Err(Error::IndexOutOfRange { index: n, bits: total as u32 });
        }
        let bits = (0..total).map(|s| n & (1 << s) != 0).collect();
        Ok(Self { num_workers, num_tasks, bits })
    }

    /// Decode from packed 64-bit words (little-endian bit order), for index
    /// spaces beyond 63 bits.
    pub fn from_bit_words(words: &[u64], num_tasks: usize, num_workers: usize) -> Self {
        let total = num_workers * num_tasks * 2;
        let bits = (0..total)
            .map(|s| words.get(s / 64).is_some_and(|w| w & (1 << (s % 64)) != 0))
            .collect();
        Self { num_workers, num_tasks, bits }
    }

    /// Stable per-task column code: two bits per worker, folded for
    /// rosters beyond 32 workers.
    pub fn column_code(&self, task: usize) -> u64 {
        let mut key = 0u64;
        for i in 0..self.num_workers {
            let mut code = 0u64;
            if self.get(i, task, Level::Soft) {
                code |= 1;
            }
            if self.get(i, task, Level::Hard) {
                code |= 2;
            }
            key |= code << (2 * (i % 32));
            if i % 32 == 31 {
                key = crate::stats::splitmix64(key);
            }
        }
        key
    }
}

/// One signed long-term contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub worker: usize,
    pub task: usize,
    pub level: Level,
    /// Promised payment, equal to the reserve price in the quote profile.
    pub price: f64,
    /// Promised expected quality.
    pub expected_quality: f64,
}

/// The book of signed long-term contracts; at most one per worker.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContractBook {
    pub contracts: Vec<Contract>,
}

impl ContractBook {
    pub fn is_empty(&self) -> bool {
        self.contracts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.contracts.len()
    }

    pub fn contract_for(&self, worker: usize) -> Option<&Contract> {
        self.contracts.iter().find(|c| c.worker == worker)
    }

    pub fn is_contracted(&self, worker: usize) -> bool {
        self.contract_for(worker).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::tiny_scenario;

    #[test]
    fn index_zero_is_empty_profile() {
        let p = AssignmentProfile::from_index(0, 2, 3).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn paper_example_bit_order() {
        // |S|=2, |W|=3, n=5: binary 000000000101 sets bits 0 and 2, i.e.
        // worker 0 at (task 0, Soft) and (task 1, Soft).
        let p = AssignmentProfile::from_index(5, 2, 3).unwrap();
        assert!(p.get(0, 0, Level::Soft));
        assert!(p.get(0, 1, Level::Soft));
        assert_eq!(p.assigned().count(), 2);
        assert!(!p.satisfies_at_most_one());
    }

    #[test]
    fn index_round_trip_exhaustive_small() {
        // |S|*|W|*2 = 12 bits: full range.
        for n in 0..(1u64 << 12) {
            let p = AssignmentProfile::from_index(n, 2, 3).unwrap();
            assert_eq!(p.index().unwrap(), n);
        }
    }

    #[test]
    fn out_of_range_index_rejected() {
        assert!(AssignmentProfile::from_index(1 << 12, 2, 3).is_err());
        assert!(AssignmentProfile::from_index(0, 8, 4).is_err()); // 64 bits
    }

    #[test]
    fn validate_flags_worker_risk_cap() {
        let mut s = tiny_scenario();
        s.workers[0].lambda2 = 1.0;
        let v = s.validate();
        assert!(v.iter().any(|m| m.contains("risk cap must be < 1")));
    }

    #[test]
    fn validate_flags_missing_link() {
        let mut s = tiny_scenario();
        s.links.pop();
        assert!(!s.validate().is_empty());
    }

    #[test]
    fn validate_accepts_well_formed() {
        assert!(tiny_scenario().validate().is_empty());
    }

    #[test]
    fn worker_assignment_lookup() {
        let mut p = AssignmentProfile::empty(3, 2);
        p.set(1, 0, Level::Hard, true);
        assert_eq!(p.worker_assignment(1), Some((0, Level::Hard)));
        assert_eq!(p.worker_assignment(0), None);
        assert!(p.satisfies_at_most_one());
    }
}
