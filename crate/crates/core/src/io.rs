//! Scenario generation, taxi-trip ingestion, and file formats: scenario
//! JSON documents, campaign reports as CSV or JSON.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Scenario, ServiceLink, Task, Worker};
use crate::sim::CampaignReport;
use crate::stats::{BernoulliParticipation, RngStream, TruncNormal};
use crate::Error;

/// Inclusive uniform sampling range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Named sampling ranges for every scenario parameter.
///
/// The two stock parameter sets share the service/task ranges and differ in
/// the participation and workload statistics: set 1 is the fluctuant
/// regime, set 2 the stable one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSetSpec {
    pub attendance: Range,
    pub workload_mean: Range,
    pub workload_sigma: Range,
    /// Offset of the lower workload bound below its mean.
    pub workload_lo_offset: Range,
    /// Offset of the upper workload bound above its mean.
    pub workload_hi_offset: Range,
    pub cost_factor: Range,
    pub degradation_rate: Range,
    pub base_cost: Range,
    pub hard_quality: Range,
    pub budget: Range,
    pub quality_demand: Range,
    pub task_lambda1: Range,
    pub task_lambda2: Range,
    pub task_lambda3: Range,
    pub task_lambda4: Range,
    pub worker_lambda1: Range,
    pub worker_lambda2: Range,
    pub weight: Range,
    pub min_utility: Range,
    pub delta_p: f64,
}

impl ParamSetSpec {
    fn common() -> Self {
        Self {
            attendance: Range::new(0.64, 0.96),
            workload_mean: Range::new(2.4, 3.6),
            workload_sigma: Range::new(0.4, 0.6),
            workload_lo_offset: Range::new(0.96, 1.44),
            workload_hi_offset: Range::new(0.96, 1.44),
            cost_factor: Range::new(0.6, 0.8),
            degradation_rate: Range::new(0.1, 0.3),
            base_cost: Range::new(1.2, 1.8),
            hard_quality: Range::new(3.2, 4.8),
            budget: Range::new(15.0, 22.0),
            quality_demand: Range::new(7.2, 8.8),
            task_lambda1: Range::new(1.0, 1.05),
            task_lambda2: Range::new(0.95, 1.0),
            task_lambda3: Range::new(0.3, 0.4),
            task_lambda4: Range::new(0.1, 0.2),
            worker_lambda1: Range::new(0.98, 1.01),
            worker_lambda2: Range::new(0.3, 0.4),
            weight: Range::new(0.08, 0.12),
            min_utility: Range::fixed(0.02),
            delta_p: 0.02,
        }
    }

    /// Fluctuant workers: wide attendance and workload spreads.
    pub fn set1() -> Self {
        Self::common()
    }

    /// Stable workers: high attendance, narrow workload spread.
    pub fn set2() -> Self {
        Self {
            attendance: Range::new(0.90, 0.95),
            workload_mean: Range::new(2.5, 3.0),
            workload_sigma: Range::new(0.1, 0.2),
            workload_lo_offset: Range::new(0.5, 1.0),
            workload_hi_offset: Range::new(0.5, 1.0),
            ..Self::common()
        }
    }

    pub fn by_id(id: u32) -> Result<Self, Error> {
        match id {
            1 => Ok(Self::set1()),
            2 => Ok(Self::set2()),
            other => Err(Error::InvalidParameter(format!(
                "unknown parameter set {other}; expected 1 or 2"
            ))),
        }
    }
}

/// Sample a scenario from a parameter set. Deterministic per stream; the
/// output always validates.
pub fn generate_scenario(
    spec: &ParamSetSpec,
    num_tasks: usize,
    num_workers: usize,
    rng: &RngStream,
) -> Result<Scenario, Error> {
    if num_tasks == 0 || num_workers == 0 {
        return Err(Error::InvalidParameter("roster sizes must be >= 1".into()));
    }
    let mut r = rng.rng();
    let mut workers = Vec::with_capacity(num_workers);
    for id in 0..num_workers {
        let mu = spec.workload_mean.sample(&mut r);
        let sigma = spec.workload_sigma.sample(&mut r);
        let lo = mu - spec.workload_lo_offset.sample(&mut r);
        let hi = mu + spec.workload_hi_offset.sample(&mut r);
        workers.push(Worker {
            id,
            participation: BernoulliParticipation::new(spec.attendance.sample(&mut r))?,
            workload: TruncNormal::new(mu, sigma, lo, hi)?,
            cost_factor: spec.cost_factor.sample(&mut r),
            degradation_rate: spec.degradation_rate.sample(&mut r),
            weight: spec.weight.sample(&mut r),
            min_utility: spec.min_utility.sample(&mut r),
            lambda1: spec.worker_lambda1.sample(&mut r),
            lambda2: spec.worker_lambda2.sample(&mut r),
        });
    }
    let mut tasks = Vec::with_capacity(num_tasks);
    for id in 0..num_tasks {
        tasks.push(Task {
            id,
            budget: spec.budget.sample(&mut r),
            quality_demand: spec.quality_demand.sample(&mut r),
            lambda1: spec.task_lambda1.sample(&mut r),
            lambda2: spec.task_lambda2.sample(&mut r),
            lambda3: spec.task_lambda3.sample(&mut r),
            lambda4: spec.task_lambda4.sample(&mut r),
        });
    }
    let mut links = Vec::with_capacity(num_workers * num_tasks);
    for worker in 0..num_workers {
        for task in 0..num_tasks {
            links.push(ServiceLink {
                worker,
                task,
                base_cost: spec.base_cost.sample(&mut r),
                hard_quality: spec.hard_quality.sample(&mut r),
            });
        }
    }
    let scenario = Scenario { workers, tasks, links, delta_p: spec.delta_p };
    let violations = scenario.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// Taxi-trip ingestion
// ---------------------------------------------------------------------------

/// One taxi trip: id, service day, endpoints, and traveled distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub taxi_id: String,
    pub day: u32,
    pub pickup_x: f64,
    pub pickup_y: f64,
    pub dropoff_x: f64,
    pub dropoff_y: f64,
    pub distance: f64,
}

/// Axis-aligned region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionFilter {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl RegionFilter {
    fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

fn euclid(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Affine rescale of raw values into a target range; degenerate spreads map
/// to the midpoint.
fn rescale(raw: &[f64], target: Range) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12) {
        return vec![0.5 * (target.lo + target.hi); raw.len()];
    }
    raw.iter()
        .map(|v| target.lo + (v - lo) / (hi - lo) * (target.hi - target.lo))
        .collect()
}

/// Build a scenario from taxi trips: attendance from the fraction of days a
/// taxi shows up in the region, costs from traveled plus approach plus
/// return distances, hard quality inversely proportional to the approach
/// and return distances. All remaining parameters sample from the stock
/// ranges.
pub fn ingest_trips(
    records: &[TripRecord],
    num_tasks: usize,
    num_workers: usize,
    region: Option<RegionFilter>,
    rng: &RngStream,
) -> Result<Scenario, Error> {
    if records.is_empty() {
        return Err(Error::Ingest("empty trip stream".into()));
    }
    let total_days: Vec<u32> = {
        let mut days: Vec<u32> = records.iter().map(|t| t.day).collect();
        days.sort_unstable();
        days.dedup();
        days
    };
    let in_region = |t: &TripRecord| {
        region.map_or(true, |reg| {
            reg.contains(t.pickup_x, t.pickup_y) || reg.contains(t.dropoff_x, t.dropoff_y)
        })
    };
    // Per-taxi presence days and trip statistics inside the region.
    #[derive(Default)]
    struct TaxiStats {
        days: Vec<u32>,
        trip_distance_sum: f64,
        pickup: (f64, f64),
        dropoff: (f64, f64),
        trips: usize,
    }
    let mut per_taxi: BTreeMap<&str, TaxiStats> = BTreeMap::new();
    for t in records.iter().filter(|t| in_region(t)) {
        if t.distance < 0.0 {
            return Err(Error::Ingest(format!("negative trip distance for taxi {}", t.taxi_id)));
        }
        let e = per_taxi.entry(&t.taxi_id).or_default();
        e.days.push(t.day);
        e.trip_distance_sum += t.distance;
        e.pickup.0 += t.pickup_x;
        e.pickup.1 += t.pickup_y;
        e.dropoff.0 += t.dropoff_x;
        e.dropoff.1 += t.dropoff_y;
        e.trips += 1;
    }
    if per_taxi.len() < num_workers {
        return Err(Error::Ingest(format!(
            "need at least {num_workers} distinct taxis after filtering, found {}",
            per_taxi.len()
        )));
    }
    let mut r = rng.rng();
    // Random subset of taxis, deterministic order afterwards.
    let mut ids: Vec<&str> = per_taxi.keys().copied().collect();
    for i in 0..num_workers {
        let j = r.random_range(i..ids.len());
        ids.swap(i, j);
    }
    ids.truncate(num_workers);

    // Task positions, uniform in the covered region (or data bounding box).
    let bbox = region.unwrap_or_else(|| {
        let xs: Vec<f64> = records.iter().flat_map(|t| [t.pickup_x, t.dropoff_x]).collect();
        let ys: Vec<f64> = records.iter().flat_map(|t| [t.pickup_y, t.dropoff_y]).collect();
        RegionFilter {
            x_min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            y_min: ys.iter().copied().fold(f64::INFINITY, f64::min),
            x_max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            y_max: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    });
    let task_pos: Vec<(f64, f64)> = (0..num_tasks)
        .map(|_| {
            (
                r.random_range(bbox.x_min..=bbox.x_max),
                r.random_range(bbox.y_min..=bbox.y_max),
            )
        })
        .collect();

    // Raw cost and quality factors per (worker, task).
    let spec = ParamSetSpec::set1();
    let mut raw_cost = Vec::with_capacity(num_workers * num_tasks);
    let mut raw_quality = Vec::with_capacity(num_workers * num_tasks);
    let mut attendance = Vec::with_capacity(num_workers);
    for id in &ids {
        let stats = &per_taxi[id];
        let trips = stats.trips as f64;
        let avg_trip = stats.trip_distance_sum / trips;
        let pickup = (stats.pickup.0 / trips, stats.pickup.1 / trips);
        let dropoff = (stats.dropoff.0 / trips, stats.dropoff.1 / trips);
        let mut days = stats.days.clone();
        days.sort_unstable();
        days.dedup();
        attendance.push(days.len() as f64 / total_days.len() as f64);
        for &(tx, ty) in &task_pos {
            let approach = euclid(pickup.0, pickup.1, tx, ty);
            let ret = euclid(dropoff.0, dropoff.1, tx, ty);
            raw_cost.push(avg_trip + approach + ret);
            raw_quality.push(1.0 / (approach + ret + 1e-6));
        }
    }
    let costs = rescale(&raw_cost, spec.base_cost);
    let qualities = rescale(&raw_quality, spec.hard_quality);

    let mut workers = Vec::with_capacity(num_workers);
    for (idx, a) in attendance.iter().enumerate() {
        let mu = spec.workload_mean.sample(&mut r);
        let sigma = spec.workload_sigma.sample(&mut r);
        let lo = mu - spec.workload_lo_offset.sample(&mut r);
        let hi = mu + spec.workload_hi_offset.sample(&mut r);
        workers.push(Worker {
            id: idx,
            participation: BernoulliParticipation::new(*a)?,
            workload: TruncNormal::new(mu, sigma, lo, hi)?,
            cost_factor: spec.cost_factor.sample(&mut r),
            degradation_rate: spec.degradation_rate.sample(&mut r),
            weight: spec.weight.sample(&mut r),
            min_utility: spec.min_utility.sample(&mut r),
            lambda1: spec.worker_lambda1.sample(&mut r),
            lambda2: spec.worker_lambda2.sample(&mut r),
        });
    }
    let mut tasks = Vec::with_capacity(num_tasks);
    for id in 0..num_tasks {
        tasks.push(Task {
            id,
            budget: spec.budget.sample(&mut r),
            quality_demand: spec.quality_demand.sample(&mut r),
            lambda1: spec.task_lambda1.sample(&mut r),
            lambda2: spec.task_lambda2.sample(&mut r),
            lambda3: spec.task_lambda3.sample(&mut r),
            lambda4: spec.task_lambda4.sample(&mut r),
        });
    }
    let links = (0..num_workers)
        .flat_map(|worker| {
            (0..num_tasks).map(move |task| (worker, task, worker * num_tasks + task))
        })
        .map(|(worker, task, slot)| ServiceLink {
            worker,
            task,
            base_cost: costs[slot],
            hard_quality: qualities[slot],
        })
        .collect();
    let scenario = Scenario { workers, tasks, links, delta_p: spec.delta_p };
    let violations = scenario.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    Ok(scenario)
}

/// Parse trip records from a CSV file with header
/// `taxi_id,day,pickup_x,pickup_y,dropoff_x,dropoff_y,distance`.
pub fn read_trips_csv(path: &Path) -> Result<Vec<TripRecord>, Error> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in reader.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scenario and report files
// ---------------------------------------------------------------------------

pub fn write_scenario(s: &Scenario, path: &Path) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(s)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_scenario(path: &Path) -> Result<Scenario, Error> {
    let data = std::fs::read_to_string(path)?;
    let s: Scenario = serde_json::from_str(&data)?;
    let violations = s.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown report format {other}"))),
        }
    }
}

/// CSV column order, fixed: per-trading rows for every task, then one
/// aggregate row per task (`trading_index` column holds `aggregate`, the
/// flag column the over-budget frequency, the decision column the campaign
/// mean).
pub const CSV_HEADER: &str =
    "trading_index,task_id,longterm_quality,final_quality,expense,budget,over_budget_flag,online_decision_ms";

pub fn write_report(report: &CampaignReport, format: ReportFormat, path: &Path) -> Result<(), Error> {
    match format {
        ReportFormat::Json => {
            let json = serde_json::to_string_pretty(report)?;
            std::fs::write(path, json)?;
        }
        ReportFormat::Csv => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            writeln!(f, "{CSV_HEADER}")?;
            for rec in &report.records {
                for row in &rec.per_task {
                    writeln!(
                        f,
                        "{},{},{},{},{},{},{},{}",
                        rec.trading_index,
                        row.task,
                        row.longterm_quality,
                        row.final_quality,
                        row.expense,
                        row.budget,
                        u8::from(row.over_budget),
                        rec.decision_ms
                    )?;
                }
            }
            for agg in &report.tasks {
                writeln!(
                    f,
                    "aggregate,{},{},{},{},{},{},{}",
                    agg.task,
                    agg.avg_longterm_quality,
                    agg.avg_final_quality,
                    agg.avg_expense,
                    agg.budget,
                    agg.over_budget_frequency,
                    report.mean_decision_ms
                )?;
            }
            f.flush()?;
        }
    }
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<CampaignReport, Error> {
    let data = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn set1_ranges_respected() {
        let s = generate_scenario(&ParamSetSpec::set1(), 2, 5, &RngStream::new(42, 0)).unwrap();
        assert!(s.validate().is_empty());
        for w in &s.workers {
            assert!((0.64..=0.96).contains(&w.participation.a));
        }
    }

    #[test]
    fn set2_attendance_band() {
        let s = generate_scenario(&ParamSetSpec::set2(), 2, 5, &RngStream::new(7, 0)).unwrap();
        for w in &s.workers {
            assert!((0.90..=0.95).contains(&w.participation.a));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scenario(&ParamSetSpec::set1(), 3, 6, &RngStream::new(5, 1)).unwrap();
        let b = generate_scenario(&ParamSetSpec::set1(), 3, 6, &RngStream::new(5, 1)).unwrap();
        assert_eq!(a, b);
    }

    fn fixture_trips() -> Vec<TripRecord> {
        // 4 taxis over 4 days with known attendance patterns.
        let mut trips = Vec::new();
        let present: [&[u32]; 4] = [&[1, 2, 3, 4], &[1, 3], &[2], &[1, 2, 4]];
        for (taxi, days) in present.iter().enumerate() {
            for &day in *days {
                trips.push(TripRecord {
                    taxi_id: format!("t{taxi}"),
                    day,
                    pickup_x: taxi as f64,
                    pickup_y: 0.3 * day as f64,
                    dropoff_x: taxi as f64 + 1.0,
                    dropoff_y: 0.5,
                    distance: 1.0 + taxi as f64,
                });
            }
        }
        trips
    }

    #[test]
    fn ingest_attendance_ratios() {
        let trips = fixture_trips();
        let s = ingest_trips(&trips, 2, 4, None, &RngStream::new(0, 0)).unwrap();
        // Window is 4 distinct days; taxi subset is random but the
        // multiset of attendance values is fixed.
        let mut got: Vec<f64> = s.workers.iter().map(|w| w.participation.a).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(got[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(got[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(got[2], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(got[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ingest_scaling_hits_bounds() {
        let trips = fixture_trips();
        let s = ingest_trips(&trips, 2, 4, None, &RngStream::new(0, 0)).unwrap();
        let costs: Vec<f64> = s.links.iter().map(|l| l.base_cost).collect();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(min, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(max, 1.8, epsilon = 1e-12);
    }

    #[test]
    fn ingest_rejects_empty_and_small_streams() {
        assert!(matches!(
            ingest_trips(&[], 2, 4, None, &RngStream::new(0, 0)),
            Err(Error::Ingest(_))
        ));
        let trips = fixture_trips();
        assert!(matches!(
            ingest_trips(&trips, 2, 10, None, &RngStream::new(0, 0)),
            Err(Error::Ingest(_))
        ));
    }

    #[test]
    fn ingest_deterministic() {
        let trips = fixture_trips();
        let a = ingest_trips(&trips, 2, 4, None, &RngStream::new(9, 0)).unwrap();
        let b = ingest_trips(&trips, 2, 4, None, &RngStream::new(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scenario_file_round_trip() {
        let s = generate_scenario(&ParamSetSpec::set1(), 2, 4, &RngStream::new(3, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        write_scenario(&s, &path).unwrap();
        let back = read_scenario(&path).unwrap();
        assert_eq!(s, back);
    }
}
