//! Shared fixtures for unit tests.

use crate::model::{Scenario, ServiceLink, Task, Worker};
use crate::stats::{BernoulliParticipation, TruncNormal};

pub fn worker_with(a: f64, mu: f64, sigma: f64, lo: f64, hi: f64) -> Worker {
    Worker {
        id: 0,
        participation: BernoulliParticipation::new(a).unwrap(),
        workload: TruncNormal::new(mu, sigma, lo, hi).unwrap(),
        cost_factor: 0.7,
        degradation_rate: 0.2,
        weight: 0.1,
        min_utility: 0.1,
        lambda1: 1.0,
        lambda2: 0.35,
    }
}

pub fn link_for(worker: usize, task: usize, base_cost: f64, hard_quality: f64) -> ServiceLink {
    ServiceLink { worker, task, base_cost, hard_quality }
}

/// Two tasks, three workers, hand-picked parameters inside the stock
/// ranges.
pub fn tiny_scenario() -> Scenario {
    let mut workers = Vec::new();
    for (id, (a, mu, sigma)) in [(0.8, 3.0, 0.5), (0.7, 2.6, 0.45), (0.9, 3.4, 0.55)]
        .into_iter()
        .enumerate()
    {
        let mut w = worker_with(a, mu, sigma, mu - 1.2, mu + 1.2);
        w.id = id;
        w.cost_factor = 0.6 + 0.05 * id as f64;
        w.degradation_rate = 0.1 + 0.05 * id as f64;
        w.lambda1 = 0.99;
        w.lambda2 = 0.3 + 0.02 * id as f64;
        workers.push(w);
    }
    let tasks = vec![
        Task {
            id: 0,
            budget: 18.0,
            quality_demand: 8.0,
            lambda1: 1.02,
            lambda2: 0.98,
            lambda3: 0.35,
            lambda4: 0.15,
        },
        Task {
            id: 1,
            budget: 16.0,
            quality_demand: 7.5,
            lambda1: 1.0,
            lambda2: 0.97,
            lambda3: 0.32,
            lambda4: 0.12,
        },
    ];
    let mut links = Vec::new();
    for worker in 0..workers.len() {
        for task in 0..tasks.len() {
            links.push(ServiceLink {
                worker,
                task,
                base_cost: 1.2 + 0.1 * (worker + task) as f64,
                hard_quality: 3.6 + 0.3 * worker as f64 + 0.2 * task as f64,
            });
        }
    }
    Scenario { workers, tasks, links, delta_p: 0.05 }
}

/// Relax every task's risk caps so any structural assignment is feasible.
pub fn loose_risk_caps(s: &mut Scenario) {
    for t in &mut s.tasks {
        t.lambda3 = 1.0;
        t.lambda4 = 1.0;
        t.lambda2 = 10.0;
        t.quality_demand = 0.5;
    }
}

/// Single-task scenario with given attendance probabilities.
pub fn scenario_with_attendance(attendance: &[f64], num_tasks: usize) -> Scenario {
    let workers: Vec<Worker> = attendance
        .iter()
        .enumerate()
        .map(|(id, &a)| {
            let mut w = worker_with(a, 3.0, 0.5, 1.8, 4.2);
            w.id = id;
            w
        })
        .collect();
    let tasks: Vec<Task> = (0..num_tasks)
        .map(|id| Task {
            id,
            budget: 18.0,
            quality_demand: 8.0,
            lambda1: 1.0,
            lambda2: 0.98,
            lambda3: 0.35,
            lambda4: 0.15,
        })
        .collect();
    let mut links = Vec::new();
    for worker in 0..workers.len() {
        for task in 0..num_tasks {
            links.push(ServiceLink { worker, task, base_cost: 1.5, hard_quality: 4.0 });
        }
    }
    Scenario { workers, tasks, links, delta_p: 0.05 }
}
