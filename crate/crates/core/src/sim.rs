//! Trading-campaign engine: replays tradings against sampled draws,
//! executes contracts, triggers the online backup, and accumulates the
//! campaign metrics.
//!
//! Decision cost per trading is reported as a deterministic work measure
//! converted to milliseconds at a fixed nominal rate, so identical seeds
//! reproduce bit-identical reports. Measured wall times stay available on
//! the solver results themselves.

use serde::{Deserialize, Serialize};

use crate::model::{ContractBook, Scenario};
use crate::offline::{self, GpScaConfig, UisrfcConfig};
use crate::online::{self, OnlineAlgo};
use crate::quotes::{build_quote_profile, QuoteProfile};
use crate::risk::RiskEvalConfig;
use crate::stats::{sample_draw, RngStream};
use crate::Error;

/// Nominal nanoseconds per unit of solver work in the decision-cost
/// metric.
pub const NS_PER_WORK_UNIT: f64 = 100.0;

const STREAM_DRAW: u64 = 0x11;
const STREAM_ONLINE: u64 = 0x22;
const STREAM_OFFLINE: u64 = 0x33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CampaignMode {
    /// Offline contracts signed once, online backup per trading.
    Hybrid,
    /// No contracts: every attendee is temporary in every trading.
    OnlineOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OfflineAlgo {
    Esa,
    Uisrfc { iterations: u64 },
    GpSca { eps: f64, max_outer: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub tradings: usize,
    pub mode: CampaignMode,
    pub offline_algo: OfflineAlgo,
    pub online_algo: OnlineAlgo,
    pub risk: RiskEvalConfig,
    pub master_seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            tradings: 300,
            mode: CampaignMode::Hybrid,
            offline_algo: OfflineAlgo::Esa,
            online_algo: OnlineAlgo::Esa,
            risk: RiskEvalConfig::default(),
            master_seed: 0,
        }
    }
}

/// Per-task outcome of one trading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTradingRow {
    pub task: usize,
    pub longterm_quality: f64,
    pub final_quality: f64,
    pub expense: f64,
    pub budget: f64,
    pub over_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingRecord {
    pub trading_index: usize,
    /// Draw summary: who attended.
    pub attended: Vec<bool>,
    pub per_task: Vec<TaskTradingRow>,
    pub worker_utilities: Vec<f64>,
    /// Deterministic decision cost of the online phase, in milliseconds.
    pub decision_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAggregate {
    pub task: usize,
    pub avg_longterm_quality: f64,
    pub avg_final_quality: f64,
    pub avg_expense: f64,
    pub budget: f64,
    /// Fraction of tradings whose expense exceeded lambda2 * budget.
    pub over_budget_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub tasks: Vec<TaskAggregate>,
    pub mean_decision_ms: f64,
    pub records: Vec<TradingRecord>,
}

fn work_to_ms(work: u64) -> f64 {
    work as f64 * NS_PER_WORK_UNIT * 1e-6
}

/// Stream feeding the draw of one trading, derived from the campaign
/// master stream.
pub fn trading_draw_stream(master: &RngStream, trading_index: usize) -> RngStream {
    master.substream(trading_index as u64).substream(STREAM_DRAW)
}

/// Execute one trading: sample the draw, fulfil contracts, detect the
/// shortfall, run the online backup, and assemble the record. Contracted
/// attendees are always paid their promised price; absentees earn nothing.
pub fn run_trading(
    book: &ContractBook,
    s: &Scenario,
    cfg: &CampaignConfig,
    trading_index: usize,
    master: &RngStream,
) -> Result<TradingRecord, Error> {
    let trading_stream = master.substream(trading_index as u64);
    let draw = sample_draw(&s.draw_inputs(), &trading_draw_stream(master, trading_index));

    let mut quality = vec![0.0; s.num_tasks()];
    let mut expense = vec![0.0; s.num_tasks()];
    let mut worker_utilities = vec![0.0; s.num_workers()];
    for c in &book.contracts {
        if !draw.alpha[c.worker] {
            continue;
        }
        let w = &s.workers[c.worker];
        let link = s.link(c.worker, c.task);
        quality[c.task] += crate::quotes::realized_quality(link, w, c.level, draw.beta[c.worker]);
        expense[c.task] += c.price;
        worker_utilities[c.worker] += match c.level {
            crate::model::Level::Soft => c.price - link.base_cost,
            crate::model::Level::Hard => {
                c.price
                    - link.base_cost
                    - w.weight * w.cost_factor * link.hard_quality * draw.beta[c.worker]
            }
        };
    }
    let longterm_quality = quality.clone();

    let state = online::collect_shortfall(book, &draw, s);
    let outcome = if state.is_empty() {
        None
    } else {
        let quotes = online::online_quotes(&state, &draw, s);
        Some(online::solve_online(
            &state,
            &quotes,
            cfg.online_algo,
            &trading_stream.substream(STREAM_ONLINE),
        )?)
    };
    let mut decision_work = 0u64;
    if let Some(out) = outcome {
        decision_work = out.work;
        for h in &out.hires {
            let w = &s.workers[h.worker];
            let link = s.link(h.worker, h.task);
            quality[h.task] += h.quality;
            expense[h.task] += h.price;
            worker_utilities[h.worker] += match h.level {
                crate::model::Level::Soft => h.price - link.base_cost,
                crate::model::Level::Hard => {
                    h.price
                        - link.base_cost
                        - w.weight * w.cost_factor * link.hard_quality * draw.beta[h.worker]
                }
            };
        }
    }

    let per_task = (0..s.num_tasks())
        .map(|k| TaskTradingRow {
            task: k,
            longterm_quality: longterm_quality[k],
            final_quality: quality[k],
            expense: expense[k],
            budget: s.tasks[k].budget,
            over_budget: expense[k] > s.tasks[k].lambda2 * s.tasks[k].budget,
        })
        .collect();
    Ok(TradingRecord {
        trading_index,
        attended: draw.alpha,
        per_task,
        worker_utilities,
        decision_ms: work_to_ms(decision_work),
    })
}

/// Sign the long-term book according to the configured offline algorithm.
pub fn solve_offline(
    s: &Scenario,
    q: &QuoteProfile,
    cfg: &CampaignConfig,
) -> Result<offline::SolveResult, Error> {
    let stream = RngStream::new(cfg.master_seed, 0).substream(STREAM_OFFLINE);
    match cfg.offline_algo {
        OfflineAlgo::Esa => offline::esa(s, q, &cfg.risk),
        OfflineAlgo::Uisrfc { iterations } => {
            offline::uisrfc(s, q, &cfg.risk, &UisrfcConfig { iterations, rng: stream })
        }
        OfflineAlgo::GpSca { eps, max_outer } => offline::gp_sca_offline(
            s,
            q,
            &GpScaConfig {
                eps,
                max_outer,
                seed: cfg.master_seed,
                ..GpScaConfig::default()
            },
        ),
    }
}

/// Run a whole campaign: one offline phase (hybrid mode), then the
/// configured number of tradings with per-trading derived streams.
pub fn run_campaign(s: &Scenario, cfg: &CampaignConfig) -> Result<CampaignReport, Error> {
    if cfg.tradings == 0 {
        return Err(Error::InvalidParameter("campaign needs at least one trading".into()));
    }
    let violations = s.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    let book = match cfg.mode {
        CampaignMode::OnlineOnly => ContractBook::default(),
        CampaignMode::Hybrid => {
            let q = build_quote_profile(s)?;
            let result = solve_offline(s, &q, cfg)?;
            offline::sign_contracts(&result, &q)?
        }
    };
    run_campaign_with_book(s, cfg, &book)
}

/// Campaign loop against an already-signed book (empty for online-only).
pub fn run_campaign_with_book(
    s: &Scenario,
    cfg: &CampaignConfig,
    book: &ContractBook,
) -> Result<CampaignReport, Error> {
    let master = RngStream::new(cfg.master_seed, 0);
    let mut records = Vec::with_capacity(cfg.tradings);
    for t in 0..cfg.tradings {
        records.push(run_trading(book, s, cfg, t, &master)?);
    }
    Ok(aggregate(s, records))
}

fn aggregate(s: &Scenario, records: Vec<TradingRecord>) -> CampaignReport {
    let n = records.len() as f64;
    let tasks = (0..s.num_tasks())
        .map(|k| {
            let rows = records.iter().map(|r| &r.per_task[k]);
            let mut longterm = 0.0;
            let mut fin = 0.0;
            let mut expense = 0.0;
            let mut over = 0usize;
            for row in rows {
                longterm += row.longterm_quality;
                fin += row.final_quality;
                expense += row.expense;
                over += usize::from(row.over_budget);
            }
            TaskAggregate {
                task: k,
                avg_longterm_quality: longterm / n,
                avg_final_quality: fin / n,
                avg_expense: expense / n,
                budget: s.tasks[k].budget,
                over_budget_frequency: over as f64 / n,
            }
        })
        .collect();
    let mean_decision_ms = records.iter().map(|r| r.decision_ms).sum::<f64>() / n;
    CampaignReport { tasks, mean_decision_ms, records }
}
