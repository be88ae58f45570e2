//! Successive convex approximation engine for the log-domain assignment
//! programs.
//!
//! The binary program is relaxed to continuous assignments, rewritten with
//! an epigraph variable, and every troublesome denominator is replaced by
//! its arithmetic-geometric-mean monomial lower bound around the current
//! expansion point. After the logarithmic change of variables the
//! subproblem is smooth; it is solved by a primal log-barrier method with
//! regularized Newton steps (the binarity surrogate is not convex
//! everywhere, so plain Newton may meet indefinite Hessians).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::{Level, Scenario};
use crate::quotes::QuoteProfile;
use crate::Error;

/// Slack constant of the binarity constraint. Keeps its denominator away
/// from zero without losing the pressure toward 0/1 assignments.
pub const DEFAULT_MU: f64 = 1e-3;
/// Interior clip applied to expansion points before the log transform.
pub const INTERIOR_CLIP: f64 = 1e-3;
/// Safety factor on the initial epigraph value.
pub const EPIGRAPH_SAFETY: f64 = 1.1;

const MAX_NEWTON_PER_SUBPROBLEM: usize = 200;
const BARRIER_T0: f64 = 1.0;
const BARRIER_GROWTH: f64 = 20.0;
const TARGET_GAP: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Posynomials and the AM-GM condensation
// ---------------------------------------------------------------------------

/// Monomial `coef * prod_j x_j^{e_j}` over positive variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<f64>,
}

impl Monomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coef
            * self
                .exponents
                .iter()
                .zip(x)
                .map(|(e, xi)| xi.powf(*e))
                .product::<f64>()
    }
}

/// Sum of monomials with positive coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }
}

/// AM-GM condensation: the monomial lower bound of a posynomial, tight at
/// the expansion point. Errors when any term is nonpositive there.
pub fn amgm_monomial_bound(posy: &Posynomial, x0: &[f64]) -> Result<Monomial, Error> {
    let term_values: Vec<f64> = posy.terms.iter().map(|t| t.eval(x0)).collect();
    if term_values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(
            "AM-GM bound needs strictly positive terms at the expansion point".into(),
        ));
    }
    let total: f64 = term_values.iter().sum();
    let nvars = posy.terms.first().map_or(0, |t| t.exponents.len());
    let mut coef = 0.0f64; // accumulate in logs for stability
    let mut exponents = vec![0.0; nvars];
    for (term, value) in posy.terms.iter().zip(&term_values) {
        let w = value / total;
        coef += w * (term.coef / w).ln();
        for (e, acc) in term.exponents.iter().zip(exponents.iter_mut()) {
            *acc += w * e;
        }
    }
    Ok(Monomial { coef: coef.exp(), exponents })
}

/// Grouped condensation factors for the binarity denominator
/// `sum_j (mu' + x_j^2)`: per-term weights and the constant multiplier (in
/// logs). The bound is `exp(log_k) * prod_j (mu' + x_j^2)^{theta_j}`.
pub fn binarity_condensation(x0: &[f64], mu_prime: f64) -> (Vec<f64>, f64) {
    let term_values: Vec<f64> = x0.iter().map(|&x| mu_prime + x * x).collect();
    let total: f64 = term_values.iter().sum();
    let thetas: Vec<f64> = term_values.iter().map(|v| v / total).collect();
    let log_k: f64 = thetas
        .iter()
        .zip(&term_values)
        .map(|(th, v)| th * (total / v).ln())
        .sum();
    (thetas, log_k)
}

/// Evaluate the grouped binarity bound at `x`.
pub fn binarity_bound(x: &[f64], x0: &[f64], mu_prime: f64) -> f64 {
    let (thetas, log_k) = binarity_condensation(x0, mu_prime);
    let log_val: f64 = thetas
        .iter()
        .zip(x)
        .map(|(th, &xi)| th * (mu_prime + xi * xi).ln())
        .sum();
    (log_k + log_val).exp()
}

// ---------------------------------------------------------------------------
// Log-domain program
// ---------------------------------------------------------------------------

/// One smooth constraint `g(z) <= 0` in log variables.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `constant + sum coef * z <= 0`
    Affine { terms: Vec<(usize, f64)>, constant: f64 },
    /// `constant + ln sum_t exp(offset_t + z_{var_t}) <= 0`
    LogSumExp { rows: Vec<(usize, f64)>, constant: f64 },
    /// `constant + ln sum_j exp(z_j) - sum_j theta_j ln(mu' + exp(2 z_j)) <= 0`
    Binarity { vars: Vec<usize>, thetas: Vec<f64>, mu_prime: f64, constant: f64 },
}

impl Constraint {
    /// Variable indices with nonzero derivatives.
    fn support(&self) -> Vec<usize> {
        match self {
            Constraint::Affine { terms, .. } => terms.iter().map(|(i, _)| *i).collect(),
            Constraint::LogSumExp { rows, .. } => {
                let mut v: Vec<usize> = rows.iter().map(|(i, _)| *i).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            Constraint::Binarity { vars, .. } => vars.clone(),
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            Constraint::Affine { terms, constant } => {
                constant + terms.iter().map(|(i, c)| c * z[*i]).sum::<f64>()
            }
            Constraint::LogSumExp { rows, constant } => {
                let m = rows
                    .iter()
                    .map(|(i, o)| o + z[*i])
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = rows.iter().map(|(i, o)| (o + z[*i] - m).exp()).sum();
                constant + m + s.ln()
            }
            Constraint::Binarity { vars, thetas, mu_prime, constant } => {
                let m = vars.iter().map(|&i| z[i]).fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = vars.iter().map(|&i| (z[i] - m).exp()).sum();
                let lse = m + s.ln();
                let neg: f64 = vars
                    .iter()
                    .zip(thetas)
                    .map(|(&i, th)| th * log_mu_exp2(z[i], *mu_prime))
                    .sum();
                constant + lse - neg
            }
        }
    }

    /// Accumulate gradient into `grad` (dense) and return the sparse pieces
    /// needed for the Hessian assembly.
    fn add_gradient(&self, z: &[f64], grad: &mut [f64]) {
        match self {
            Constraint::Affine { terms, .. } => {
                for (i, c) in terms {
                    grad[*i] += c;
                }
            }
            Constraint::LogSumExp { rows, .. } => {
                for (i, p) in lse_softmax(rows, z) {
                    grad[i] += p;
                }
            }
            Constraint::Binarity { vars, thetas, mu_prime, .. } => {
                for (i, p) in softmax_plain(vars, z) {
                    grad[i] += p;
                }
                for (&i, th) in vars.iter().zip(thetas) {
                    grad[i] -= th * 2.0 * sigma_mu(z[i], *mu_prime);
                }
            }
        }
    }

    fn gradient(&self, z: &[f64], n: usize) -> Vec<f64> {
        let mut g = vec![0.0; n];
        self.add_gradient(z, &mut g);
        g
    }

    /// Add `w * hess(g)` restricted to the constraint support into `h`.
    fn add_weighted_hessian(&self, z: &[f64], w: f64, h: &mut DMatrix<f64>) {
        match self {
            Constraint::Affine { .. } => {}
            Constraint::LogSumExp { rows, .. } => {
                let probs = lse_softmax(rows, z);
                // diag(p) - p p^T on the support
                for &(i, pi) in &probs {
                    h[(i, i)] += w * pi;
                }
                for &(i, pi) in &probs {
                    for &(j, pj) in &probs {
                        h[(i, j)] -= w * pi * pj;
                    }
                }
            }
            Constraint::Binarity { vars, thetas, mu_prime, .. } => {
                let probs = softmax_plain(vars, z);
                for &(i, pi) in &probs {
                    h[(i, i)] += w * pi;
                }
                for &(i, pi) in &probs {
                    for &(j, pj) in &probs {
                        h[(i, j)] -= w * pi * pj;
                    }
                }
                for (&i, th) in vars.iter().zip(thetas) {
                    let s = sigma_mu(z[i], *mu_prime);
                    h[(i, i)] -= w * th * 4.0 * s * (1.0 - s);
                }
            }
        }
    }
}

fn log_mu_exp2(u: f64, mu_prime: f64) -> f64 {
    // ln(mu' + e^{2u}), stable for large |u|
    if 2.0 * u > (mu_prime.max(f64::MIN_POSITIVE)).ln() + 40.0 {
        2.0 * u + (mu_prime * (-2.0 * u).exp()).ln_1p()
    } else {
        (mu_prime + (2.0 * u).exp()).ln()
    }
}

fn sigma_mu(u: f64, mu_prime: f64) -> f64 {
    let e = (2.0 * u).exp();
    e / (mu_prime + e)
}

fn lse_softmax(rows: &[(usize, f64)], z: &[f64]) -> Vec<(usize, f64)> {
    let m = rows
        .iter()
        .map(|(i, o)| o + z[*i])
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = rows.iter().map(|(i, o)| (o + z[*i] - m).exp()).collect();
    let total: f64 = raw.iter().sum();
    // rows may repeat a variable; merge
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(rows.len());
    for ((i, _), r) in rows.iter().zip(raw) {
        match merged.iter_mut().find(|(j, _)| j == i) {
            Some((_, acc)) => *acc += r / total,
            None => merged.push((*i, r / total)),
        }
    }
    merged
}

fn softmax_plain(vars: &[usize], z: &[f64]) -> Vec<(usize, f64)> {
    let m = vars.iter().map(|&i| z[i]).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = vars.iter().map(|&i| (z[i] - m).exp()).collect();
    let total: f64 = raw.iter().sum();
    vars.iter().zip(raw).map(|(&i, r)| (i, r / total)).collect()
}

/// A built log-domain subproblem: minimize `e^{z[objective_var]}` subject to
/// all constraints `<= 0`.
#[derive(Debug, Clone)]
pub struct PosynomialProgram {
    pub num_vars: usize,
    pub objective_var: usize,
    pub constraints: Vec<Constraint>,
    pub mu: f64,
    pub mu_prime: f64,
}

impl PosynomialProgram {
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(z))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Instance description shared by the offline and online builders
// ---------------------------------------------------------------------------

/// Data of one relaxed assignment program. Entries are laid out
/// agent-major: `(agent * num_tasks + task) * 2 + level_bit`.
#[derive(Debug, Clone)]
pub struct GpInstance {
    pub num_agents: usize,
    pub num_tasks: usize,
    /// Objective coefficient per entry (expected or realized quality,
    /// weighted by attendance where applicable).
    pub quality_coef: Vec<f64>,
    /// Budget-row coefficient per entry.
    pub pay_coef: Vec<f64>,
    /// Per-task cap on the budget row.
    pub budget_cap: Vec<f64>,
    /// Per-task quality floor, when the program carries one.
    pub quality_floor: Option<Vec<f64>>,
    pub mu: f64,
}

impl GpInstance {
    pub fn num_entries(&self) -> usize {
        self.num_agents * self.num_tasks * 2
    }

    pub fn entry(&self, agent: usize, task: usize, level: Level) -> usize {
        (agent * self.num_tasks + task) * 2 + level.bit()
    }

    pub fn mu_prime(&self) -> f64 {
        self.mu / self.num_entries() as f64
    }

    /// Objective value (the quality sum the epigraph inverts) at a
    /// continuous assignment.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.quality_coef.iter().zip(x).map(|(c, xi)| c * xi).sum()
    }

    /// Build the log-domain subproblem around expansion `(x0, y0)`.
    /// The expansion must be strictly interior: components in (0, 1),
    /// epigraph positive.
    pub fn build_program(&self, x0: &[f64], y0: f64) -> Result<PosynomialProgram, Error> {
        let n = self.num_entries();
        if x0.len() != n {
            return Err(Error::InvalidParameter("expansion point has wrong length".into()));
        }
        if x0.iter().any(|&x| !(x > 0.0 && x < 1.0)) || !(y0 > 0.0) {
            return Err(Error::BoundaryExpansionPoint);
        }
        let mu_prime = self.mu_prime();
        let mut constraints = Vec::new();

        // Quality floors: monomial condensation of each task's quality row.
        if let Some(floors) = &self.quality_floor {
            for (task, &floor) in floors.iter().enumerate() {
                let entries: Vec<usize> = (0..self.num_agents)
                    .flat_map(|i| {
                        Level::ALL.map(|l| self.entry(i, task, l))
                    })
                    .filter(|&e| self.quality_coef[e] > 0.0)
                    .collect();
                let f0: f64 = entries.iter().map(|&e| self.quality_coef[e] * x0[e]).sum();
                if !(f0 > 0.0) {
                    return Err(Error::BoundaryExpansionPoint);
                }
                if floor <= 0.0 {
                    continue; // vacuous
                }
                let mut terms = Vec::with_capacity(entries.len());
                let mut constant = floor.ln();
                for &e in &entries {
                    let w = self.quality_coef[e] * x0[e] / f0;
                    terms.push((e, -w));
                    constant -= w * (f0 / x0[e]).ln();
                }
                constraints.push(Constraint::Affine { terms, constant });
            }
        }

        // Relaxed binary caps: x <= 1, i.e. u <= 0.
        for e in 0..n {
            constraints.push(Constraint::Affine { terms: vec![(e, 1.0)], constant: 0.0 });
        }

        // One assignment per agent.
        for agent in 0..self.num_agents {
            let rows: Vec<(usize, f64)> = (0..self.num_tasks)
                .flat_map(|k| Level::ALL.map(|l| (self.entry(agent, k, l), 0.0)))
                .collect();
            constraints.push(Constraint::LogSumExp { rows, constant: 0.0 });
        }

        // Budget rows per task.
        for (task, &cap) in self.budget_cap.iter().enumerate() {
            let rows: Vec<(usize, f64)> = (0..self.num_agents)
                .flat_map(|i| Level::ALL.map(|l| self.entry(i, task, l)))
                .filter(|&e| self.pay_coef[e] > 0.0)
                .map(|e| (e, self.pay_coef[e].ln()))
                .collect();
            if rows.is_empty() {
                continue;
            }
            if !(cap > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "budget cap for task {task} must be positive, got {cap}"
                )));
            }
            constraints.push(Constraint::LogSumExp { rows, constant: -cap.ln() });
        }

        // Binarity surrogate over all entries.
        let (thetas, log_k) = binarity_condensation(x0, mu_prime);
        constraints.push(Constraint::Binarity {
            vars: (0..n).collect(),
            thetas,
            mu_prime,
            constant: -log_k,
        });

        // Epigraph link: condensation of y * quality around (x0, y0).
        let entries: Vec<usize> = (0..n).filter(|&e| self.quality_coef[e] > 0.0).collect();
        let f0: f64 = entries
            .iter()
            .map(|&e| y0 * self.quality_coef[e] * x0[e])
            .sum();
        if !(f0 > 0.0) {
            return Err(Error::BoundaryExpansionPoint);
        }
        let mut terms = Vec::with_capacity(entries.len() + 1);
        let mut constant = 0.0;
        let mut v_coef = 0.0;
        for &e in &entries {
            let w = y0 * self.quality_coef[e] * x0[e] / f0;
            terms.push((e, -w));
            v_coef -= w;
            constant -= w * (f0 / (y0 * x0[e])).ln();
        }
        terms.push((n, v_coef));
        constraints.push(Constraint::Affine { terms, constant });

        Ok(PosynomialProgram {
            num_vars: n + 1,
            objective_var: n,
            constraints,
            mu: self.mu,
            mu_prime,
        })
    }
}

/// Build the offline relaxed program data from a scenario and its quotes.
pub fn offline_instance(s: &Scenario, q: &QuoteProfile) -> GpInstance {
    let n = s.num_workers() * s.num_tasks() * 2;
    let mut quality_coef = vec![0.0; n];
    let mut pay_coef = vec![0.0; n];
    for i in 0..s.num_workers() {
        let a = s.workers[i].participation.a;
        for k in 0..s.num_tasks() {
            for l in Level::ALL {
                let e = (i * s.num_tasks() + k) * 2 + l.bit();
                quality_coef[e] = a * q.expected_quality(i, k, l);
                pay_coef[e] = a * q.price(i, k, l);
            }
        }
    }
    GpInstance {
        num_agents: s.num_workers(),
        num_tasks: s.num_tasks(),
        quality_coef,
        pay_coef,
        budget_cap: s
            .tasks
            .iter()
            .map(|t| t.lambda4 * t.lambda2 * t.budget)
            .collect(),
        quality_floor: Some(
            s.tasks
                .iter()
                .map(|t| (1.0 - t.lambda3) * t.lambda1 * t.quality_demand)
                .collect(),
        ),
        mu: DEFAULT_MU,
    }
}

/// Build the online relaxed program data: realized qualities and prices of
/// the temporary candidates against the remaining budgets. No quality
/// floor; the online problem only maximizes.
pub fn online_instance(
    num_temp_workers: usize,
    num_shortfall_tasks: usize,
    realized_quality: Vec<f64>,
    prices: Vec<f64>,
    remaining_budget: Vec<f64>,
) -> GpInstance {
    GpInstance {
        num_agents: num_temp_workers,
        num_tasks: num_shortfall_tasks,
        quality_coef: realized_quality,
        pay_coef: prices,
        budget_cap: remaining_budget,
        quality_floor: None,
        mu: DEFAULT_MU,
    }
}

// ---------------------------------------------------------------------------
// Barrier solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub z: Vec<f64>,
    pub newton_steps: u64,
    pub kkt_residual: f64,
    pub max_violation: f64,
}

struct BarrierEval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// Evaluate `t * c.z + phase1_weight * s - sum ln(slack_i)` where slack is
/// `-g_i(z)` in phase 2 and `s - g_i(z)` in phase 1.
fn eval_barrier(
    program: &PosynomialProgram,
    z: &[f64],
    s: Option<f64>,
    t: f64,
    supports: &[Vec<usize>],
) -> Option<BarrierEval> {
    let d = program.num_vars + usize::from(s.is_some());
    let mut value = 0.0;
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    match s {
        None => {
            value += t * z[program.objective_var];
            grad[program.objective_var] += t;
        }
        Some(sv) => {
            value += t * sv;
            grad[d - 1] += t;
        }
    }
    for (c, _support) in program.constraints.iter().zip(supports) {
        let g = c.value(z);
        let slack = match s {
            None => -g,
            Some(sv) => sv - g,
        };
        if !(slack > 0.0) || !slack.is_finite() {
            return None;
        }
        value -= slack.ln();
        let cgrad = c.gradient(z, program.num_vars);
        let inv = 1.0 / slack;
        let inv2 = inv * inv;
        // gradient: +inv * dg/dz (and -inv on s in phase 1)
        for (i, gi) in cgrad.iter().enumerate() {
            if *gi != 0.0 {
                grad[i] += inv * gi;
            }
        }
        if s.is_some() {
            grad[d - 1] -= inv;
        }
        // Hessian: inv * d2g + inv2 * dg dg^T (phase 1 couples s)
        c.add_weighted_hessian(z, inv, &mut hess);
        let support: Vec<usize> = cgrad
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        for &i in &support {
            for &j in &support {
                hess[(i, j)] += inv2 * cgrad[i] * cgrad[j];
            }
        }
        if s.is_some() {
            for &i in &support {
                hess[(i, d - 1)] -= inv2 * cgrad[i];
                hess[(d - 1, i)] -= inv2 * cgrad[i];
            }
            hess[(d - 1, d - 1)] += inv2;
        }
    }
    Some(BarrierEval { value, grad, hess })
}

/// Regularized Newton descent on one barrier function. Returns steps used.
#[allow(clippy::too_many_arguments)]
fn newton_descend(
    program: &PosynomialProgram,
    z: &mut Vec<f64>,
    s: &mut Option<f64>,
    t: f64,
    supports: &[Vec<usize>],
    grad_tol: f64,
    step_budget: &mut usize,
    early_exit: &dyn Fn(&[f64], Option<f64>) -> bool,
) -> bool {
    while *step_budget > 0 {
        if early_exit(z, *s) {
            return true;
        }
        let eval = match eval_barrier(program, z, *s, t, supports) {
            Some(e) => e,
            None => return false,
        };
        if eval.grad.norm() <= grad_tol {
            return true;
        }
        *step_budget -= 1;
        // Regularize until factorizable.
        let mut tau = 0.0;
        let step = loop {
            let mut h = eval.hess.clone();
            if tau > 0.0 {
                for i in 0..h.nrows() {
                    h[(i, i)] += tau;
                }
            }
            match h.cholesky() {
                Some(chol) => break chol.solve(&(-&eval.grad)),
                None => {
                    tau = if tau == 0.0 { 1e-8 } else { tau * 100.0 };
                    if tau > 1e12 {
                        return false;
                    }
                }
            }
        };
        // Backtracking line search on the barrier merit.
        let mut alpha = 1.0;
        let descent: f64 = eval.grad.dot(&step);
        let mut improved = false;
        for _ in 0..60 {
            let (zc, sc) = apply_step(z, *s, &step, alpha);
            if let Some(cand) = eval_barrier(program, &zc, sc, t, supports) {
                if cand.value <= eval.value + 1e-4 * alpha * descent {
                    *z = zc;
                    *s = sc;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            return true; // stalled at numerical precision
        }
    }
    true
}

fn apply_step(z: &[f64], s: Option<f64>, step: &DVector<f64>, alpha: f64) -> (Vec<f64>, Option<f64>) {
    let mut zc = z.to_vec();
    for (i, zi) in zc.iter_mut().enumerate() {
        *zi += alpha * step[i];
    }
    let sc = s.map(|sv| sv + alpha * step[step.len() - 1]);
    (zc, sc)
}

/// Solve one subproblem: minimize `e^v` subject to the program constraints.
/// Infeasible starts are handled by a phase-1 slack minimization; an
/// infeasibility certificate is reported when no point can be driven inside
/// the constraint set.
pub fn solve_convex_subproblem(
    program: &PosynomialProgram,
    z_start: &[f64],
) -> Result<SubproblemSolution, Error> {
    let supports: Vec<Vec<usize>> = program.constraints.iter().map(|c| c.support()).collect();
    let mut steps_left = MAX_NEWTON_PER_SUBPROBLEM;
    let mut z = z_start.to_vec();

    // Phase 1: drive the worst violation strictly negative.
    if program.max_violation(&z) >= 0.0 {
        let mut s = Some(program.max_violation(&z) + 1.0);
        let mut t = BARRIER_T0;
        let feasible = |zz: &[f64], _ss: Option<f64>| program.max_violation(zz) < -1e-8;
        for _ in 0..14 {
            if !newton_descend(program, &mut z, &mut s, t, &supports, 1e-8 * t.max(1.0), &mut steps_left, &feasible)
            {
                break;
            }
            if feasible(&z, s) || steps_left == 0 {
                break;
            }
            t *= BARRIER_GROWTH;
        }
        if program.max_violation(&z) >= 0.0 {
            return Err(Error::SubproblemInfeasible {
                residual: program.max_violation(&z),
            });
        }
    }

    // Phase 2: central path on the objective. `t` keeps the last value a
    // Newton pass actually ran with, so the multiplier estimates below
    // match the final iterate.
    let m = program.constraints.len() as f64;
    let mut t = BARRIER_T0;
    let no_exit = |_: &[f64], _: Option<f64>| false;
    loop {
        let mut none = None;
        let ok = newton_descend(
            program,
            &mut z,
            &mut none,
            t,
            &supports,
            1e-7 * t.max(1.0),
            &mut steps_left,
            &no_exit,
        );
        if !ok || steps_left == 0 || m / t <= TARGET_GAP {
            break;
        }
        t *= BARRIER_GROWTH;
    }

    // KKT residual with barrier multipliers.
    let mut residual = DVector::zeros(program.num_vars);
    residual[program.objective_var] = 1.0;
    for c in &program.constraints {
        let g = c.value(&z);
        let lambda = 1.0 / (t * (-g));
        let cg = c.gradient(&z, program.num_vars);
        for (i, gi) in cg.iter().enumerate() {
            residual[i] += lambda * gi;
        }
    }
    let newton_steps = (MAX_NEWTON_PER_SUBPROBLEM - steps_left) as u64;
    Ok(SubproblemSolution {
        max_violation: program.max_violation(&z),
        kkt_residual: residual.amax(),
        newton_steps,
        z,
    })
}

// ---------------------------------------------------------------------------
// Outer SCA loop
// ---------------------------------------------------------------------------

/// Trajectory of one successive-convex-approximation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaState {
    /// Continuous assignment at the final iterate.
    pub x: Vec<f64>,
    /// Epigraph value at the final iterate.
    pub y: f64,
    /// Objective history `y^{[0]}, ..., y^{[m]}` (index 0 is the init).
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Total Newton steps over all subproblems (a deterministic work
    /// measure).
    pub newton_steps: u64,
}

impl ScaState {
    /// Quality value reached (the epigraph inverts it).
    pub fn quality(&self) -> f64 {
        1.0 / self.y
    }
}

/// Clip an arbitrary relaxed assignment into the interior box and derive
/// the matching epigraph value.
pub fn interior_lift(instance: &GpInstance, x_raw: &[f64]) -> (Vec<f64>, f64) {
    let x: Vec<f64> = x_raw
        .iter()
        .map(|&v| v.clamp(INTERIOR_CLIP, 1.0 - INTERIOR_CLIP))
        .collect();
    let obj = instance.objective(&x).max(f64::MIN_POSITIVE);
    (x, EPIGRAPH_SAFETY / obj)
}

/// Run the SCA loop from an interior expansion point until the epigraph
/// history stabilizes within `eps` or the iteration cap is hit.
pub fn sca_solve(
    instance: &GpInstance,
    x0: &[f64],
    y0: f64,
    eps: f64,
    max_outer: usize,
) -> Result<ScaState, Error> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("convergence criterion must be > 0".into()));
    }
    let n = instance.num_entries();
    let mut x = x0.to_vec();
    let mut y = y0;
    let mut history = vec![y];
    let mut newton_steps = 0u64;
    let mut iterations = 0usize;
    for _ in 0..max_outer {
        let program = instance.build_program(&x, y)?;
        let mut z0: Vec<f64> = x.iter().map(|&v| v.ln()).collect();
        z0.push(y.ln());
        let sol = solve_convex_subproblem(&program, &z0)?;
        newton_steps += sol.newton_steps;
        iterations += 1;
        // Clamp the relaxed-binary cap exactly; interior floor keeps the
        // next expansion valid.
        x = sol.z[..n]
            .iter()
            .map(|&u| u.min(0.0).exp().clamp(1e-12, 1.0 - 1e-12))
            .collect();
        y = sol.z[n].exp();
        let prev = *history.last().unwrap();
        history.push(y);
        if (y - prev).abs() <= eps {
            break;
        }
    }
    Ok(ScaState { x, y, history, iterations, newton_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_posynomial(rng: &mut impl Rng, nterms: usize, nvars: usize) -> Posynomial {
        Posynomial {
            terms: (0..nterms)
                .map(|_| Monomial {
                    coef: rng.random_range(0.1..5.0),
                    exponents: (0..nvars).map(|_| rng.random_range(-2.0..2.0)).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn single_term_bound_is_exact() {
        let p = Posynomial {
            terms: vec![Monomial { coef: 2.5, exponents: vec![1.0, -0.5] }],
        };
        let x0 = vec![0.7, 1.3];
        let bound = amgm_monomial_bound(&p, &x0).unwrap();
        for x in [vec![0.1, 0.2], vec![2.0, 3.0], x0.clone()] {
            assert_abs_diff_eq!(bound.eval(&x), p.eval(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn bound_tight_at_expansion() {
        let mut rng = crate::stats::RngStream::new(11, 0).rng();
        for _ in 0..50 {
            let p = random_posynomial(&mut rng, 3, 3);
            let x0: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..2.0)).collect();
            let bound = amgm_monomial_bound(&p, &x0).unwrap();
            assert_abs_diff_eq!(bound.eval(&x0), p.eval(&x0), epsilon = 1e-10 * p.eval(&x0));
        }
    }

    #[test]
    fn bound_lies_below_everywhere() {
        let mut rng = crate::stats::RngStream::new(12, 0).rng();
        for _ in 0..20 {
            let p = random_posynomial(&mut rng, 3, 3);
            let x0: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..2.0)).collect();
            let bound = amgm_monomial_bound(&p, &x0).unwrap();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..4.0)).collect();
                assert!(bound.eval(&x) <= p.eval(&x) * (1.0 + 1e-11));
            }
        }
    }

    #[test]
    fn binarity_bound_below_and_tight() {
        let mut rng = crate::stats::RngStream::new(13, 0).rng();
        let mu_prime = 5e-5;
        for _ in 0..30 {
            let x0: Vec<f64> = (0..6).map(|_| rng.random_range(0.001..0.999)).collect();
            let f = |x: &[f64]| -> f64 { x.iter().map(|&v| mu_prime + v * v).sum() };
            assert_abs_diff_eq!(
                binarity_bound(&x0, &x0, mu_prime),
                f(&x0),
                epsilon = 1e-10
            );
            for _ in 0..200 {
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(0.001..0.999)).collect();
                assert!(binarity_bound(&x, &x0, mu_prime) <= f(&x) * (1.0 + 1e-11));
            }
        }
    }

    #[test]
    fn toy_program_analytic_optimum() {
        // min e^v s.t. v >= ln 2
        let program = PosynomialProgram {
            num_vars: 1,
            objective_var: 0,
            constraints: vec![Constraint::Affine {
                terms: vec![(0, -1.0)],
                constant: 2.0f64.ln(),
            }],
            mu: DEFAULT_MU,
            mu_prime: DEFAULT_MU,
        };
        let sol = solve_convex_subproblem(&program, &[1.0]).unwrap();
        assert_abs_diff_eq!(sol.z[0].exp(), 2.0, epsilon = 1e-6);
        assert!(sol.max_violation <= 1e-6);
        assert!(sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn infeasible_program_is_certified() {
        // v <= 0 and v >= 1 cannot both hold.
        let program = PosynomialProgram {
            num_vars: 1,
            objective_var: 0,
            constraints: vec![
                Constraint::Affine { terms: vec![(0, 1.0)], constant: 0.0 },
                Constraint::Affine { terms: vec![(0, -1.0)], constant: 1.0 },
            ],
            mu: DEFAULT_MU,
            mu_prime: DEFAULT_MU,
        };
        assert!(matches!(
            solve_convex_subproblem(&program, &[0.5]),
            Err(Error::SubproblemInfeasible { .. })
        ));
    }

    #[test]
    fn boundary_expansion_rejected() {
        let instance = GpInstance {
            num_agents: 1,
            num_tasks: 1,
            quality_coef: vec![1.0, 2.0],
            pay_coef: vec![1.0, 1.5],
            budget_cap: vec![4.0],
            quality_floor: Some(vec![0.5]),
            mu: DEFAULT_MU,
        };
        assert!(matches!(
            instance.build_program(&[0.0, 0.5], 1.0),
            Err(Error::BoundaryExpansionPoint)
        ));
        assert!(matches!(
            instance.build_program(&[0.5, 1.0], 1.0),
            Err(Error::BoundaryExpansionPoint)
        ));
    }

    #[test]
    fn one_by_one_program_constraint_count() {
        // 1 quality floor + 2 relaxed caps + 1 per-agent row + 1 budget row
        // + 1 binarity + 1 epigraph = 7.
        let instance = GpInstance {
            num_agents: 1,
            num_tasks: 1,
            quality_coef: vec![1.0, 2.0],
            pay_coef: vec![1.0, 1.5],
            budget_cap: vec![4.0],
            quality_floor: Some(vec![0.5]),
            mu: DEFAULT_MU,
        };
        let program = instance.build_program(&[0.4, 0.4], 0.8).unwrap();
        assert_eq!(program.num_vars, 3);
        assert_eq!(program.constraints.len(), 7);
        // Residuals at an interior point are finite.
        let z = vec![-1.0, -1.0, 0.2];
        for c in &program.constraints {
            assert!(c.value(&z).is_finite());
        }
    }

    #[test]
    fn approximated_constraints_tight_at_expansion() {
        // At the expansion point the condensed constraints must equal the
        // unapproximated originals.
        let instance = GpInstance {
            num_agents: 2,
            num_tasks: 1,
            quality_coef: vec![0.8, 1.6, 0.7, 1.4],
            pay_coef: vec![1.0, 1.5, 0.9, 1.3],
            budget_cap: vec![2.0],
            quality_floor: Some(vec![1.0]),
            mu: DEFAULT_MU,
        };
        let x0 = vec![0.3, 0.2, 0.25, 0.15];
        let y0 = 1.3 / instance.objective(&x0);
        let program = instance.build_program(&x0, y0).unwrap();
        let mut z0: Vec<f64> = x0.iter().map(|&v| v.ln()).collect();
        z0.push(y0.ln());

        // Quality floor: original value ln(floor / sum q x).
        let quality: f64 = instance.objective(&x0);
        let original = (1.0f64 / quality).ln();
        assert_abs_diff_eq!(program.constraints[0].value(&z0), original, epsilon = 1e-10);

        // Binarity: original value ln(sum x / (mu + sum x^2)).
        let sum_x: f64 = x0.iter().sum();
        let denom: f64 = instance.mu + x0.iter().map(|v| v * v).sum::<f64>();
        let bin_idx = program.constraints.len() - 2;
        assert_abs_diff_eq!(
            program.constraints[bin_idx].value(&z0),
            (sum_x / denom).ln(),
            epsilon = 1e-10
        );

        // Epigraph: original value ln(1 / (y * sum q x)).
        let epi_idx = program.constraints.len() - 1;
        assert_abs_diff_eq!(
            program.constraints[epi_idx].value(&z0),
            (1.0 / (y0 * quality)).ln(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn convexity_of_provably_convex_families() {
        // Midpoint convexity along random segments for the affine,
        // log-sum-exp families (the binarity surrogate is checked
        // separately: it is not convex everywhere).
        let instance = GpInstance {
            num_agents: 2,
            num_tasks: 2,
            quality_coef: vec![0.9, 1.8, 0.8, 1.5, 0.7, 1.2, 0.6, 1.1],
            pay_coef: vec![1.0; 8],
            budget_cap: vec![2.0, 2.0],
            quality_floor: Some(vec![0.8, 0.8]),
            mu: DEFAULT_MU,
        };
        let x0 = vec![0.25; 8];
        let program = instance.build_program(&x0, 1.0).unwrap();
        let mut rng = crate::stats::RngStream::new(21, 0).rng();
        for c in &program.constraints {
            if matches!(c, Constraint::Binarity { .. }) {
                continue;
            }
            for _ in 0..200 {
                let a: Vec<f64> = (0..program.num_vars)
                    .map(|_| rng.random_range(-6.0..0.5))
                    .collect();
                let b: Vec<f64> = (0..program.num_vars)
                    .map(|_| rng.random_range(-6.0..0.5))
                    .collect();
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                assert!(c.value(&mid) <= 0.5 * (c.value(&a) + c.value(&b)) + 1e-9);
            }
        }
    }

    #[test]
    fn binarity_surrogate_has_concave_directions() {
        // Along the all-ones direction the log-sum-exp part is affine while
        // the subtracted terms are convex, so the surrogate is concave
        // there. This pins the known non-convexity of the condensed
        // binarity constraint.
        let n = 4;
        let x0 = vec![0.3; n];
        let (thetas, log_k) = binarity_condensation(&x0, 1e-4);
        let c = Constraint::Binarity {
            vars: (0..n).collect(),
            thetas,
            mu_prime: 1e-4,
            constant: -log_k,
        };
        let z: Vec<f64> = x0.iter().map(|&v| v.ln()).collect();
        let shift = |delta: f64| -> Vec<f64> { z.iter().map(|&v| v + delta).collect() };
        let mid = c.value(&z);
        let avg = 0.5 * (c.value(&shift(-1.0)) + c.value(&shift(1.0)));
        assert!(mid > avg, "expected concavity along the translation direction");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let instance = GpInstance {
            num_agents: 2,
            num_tasks: 1,
            quality_coef: vec![0.8, 1.6, 0.7, 1.4],
            pay_coef: vec![1.0, 1.5, 0.9, 1.3],
            budget_cap: vec![2.0],
            quality_floor: Some(vec![0.9]),
            mu: DEFAULT_MU,
        };
        let x0 = vec![0.3, 0.2, 0.25, 0.15];
        let program = instance.build_program(&x0, 1.1).unwrap();
        let z: Vec<f64> = vec![-1.1, -0.7, -1.3, -2.0, 0.3];
        let h = 1e-6;
        for c in &program.constraints {
            let g = c.gradient(&z, program.num_vars);
            for i in 0..program.num_vars {
                let mut zp = z.clone();
                zp[i] += h;
                let mut zm = z.clone();
                zm[i] -= h;
                let fd = (c.value(&zp) - c.value(&zm)) / (2.0 * h);
                assert_abs_diff_eq!(g[i], fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn sca_terminates_at_fixed_point() {
        let instance = GpInstance {
            num_agents: 1,
            num_tasks: 1,
            quality_coef: vec![1.0, 2.0],
            pay_coef: vec![0.5, 0.7],
            budget_cap: vec![10.0],
            quality_floor: None,
            mu: DEFAULT_MU,
        };
        // Start from a converged-looking state and require only that the
        // loop stops quickly with a consistent history.
        let (x0, y0) = interior_lift(&instance, &[1.0, 1.0]);
        let state = sca_solve(&instance, &x0, y0, 1e-4, 50).unwrap();
        assert_eq!(state.history.len(), state.iterations + 1);
        assert!(state.iterations < 50);
        let last = state.history[state.history.len() - 1];
        let prev = state.history[state.history.len() - 2];
        assert!((last - prev).abs() <= 1e-4);
    }
}
