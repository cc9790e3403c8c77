//! Monte-Carlo engine.
//!
//! A replication places UEs once, then for every slot redraws shadowing,
//! rebuilds R, redraws demands on every `demand_period`-th slot (slot 0
//! included) and lets each configured scheduler pick an assignment. All
//! schedulers of a run see the same UE drop, shadowing and demands, so their
//! results are paired samples.
//!
//! Replication seeds come from [`derive_seed`]; each replication then splits
//! into three ChaCha8 streams (placement = 1, shadowing = 2, demands = 3) of
//! the same key, so turning one randomness source off leaves the others alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelParams, LinkBudget, ShadowingField};
use crate::domain::{AssignmentVector, DemandVector, RateMatrix, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{place_ues, DistrictLayout};
use crate::metrics::{aggregate, Aggregate, ReplicationSummary, SlotAccumulator, SlotRecord};
use crate::schedulers::{Scheduler, SchedulerKind, SchedulerParams};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SLICE_SCHED_THREADS";

/// Spacing at which 31 hexagonal cells tile the 35 km district disk by area.
pub const DEFAULT_INTERSITE_KM: f64 = 12.0;

const STREAM_PLACEMENT: u64 = 1;
const STREAM_SHADOWING: u64 = 2;
const STREAM_DEMAND: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub intersite_km: f64,
    /// Reject layouts with eNodeBs outside the district radius.
    pub strict_layout: bool,
    pub channel: ChannelParams,
    pub schedulers: Vec<SchedulerKind>,
    pub sched: SchedulerParams,
    pub n_replications: usize,
    pub n_slots: usize,
    pub demand_period: usize,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::reference(),
            intersite_km: DEFAULT_INTERSITE_KM,
            strict_layout: false,
            channel: ChannelParams::default(),
            schedulers: SchedulerKind::all().to_vec(),
            sched: SchedulerParams::default(),
            n_replications: 200,
            n_slots: 1000,
            demand_period: 50,
            master_seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.n_replications == 0 {
            return bad("at least one replication is required".into());
        }
        if self.n_slots == 0 {
            return bad("at least one slot is required".into());
        }
        if self.demand_period == 0 {
            return bad("demand period must be at least one slot".into());
        }
        if self.schedulers.is_empty() {
            return bad("no scheduler selected".into());
        }
        if !(self.intersite_km.is_finite() && self.intersite_km > 0.0) {
            return bad(format!("inter-site distance {} km must be positive", self.intersite_km));
        }
        self.channel.validate()?;
        for &kind in &self.schedulers {
            Scheduler::new(kind, self.scenario.betas(), &self.sched)?;
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<DistrictLayout> {
        let layout = DistrictLayout::for_scenario(&self.scenario, self.intersite_km)?;
        if self.strict_layout {
            layout.check_containment()?;
        }
        Ok(layout)
    }
}

/// Seed of replication `index`: the splitmix64 output for state
/// `master + (index + 1)·0x9E3779B97F4A7C15`.
///
/// ```text
/// z = master + (index + 1) * 0x9E3779B97F4A7C15      (wrapping)
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// z =  z ^ (z >> 31)
/// ```
///
/// Every step is a bijection on u64 and the golden-ratio increment is odd, so
/// distinct indices below 2⁶⁴ never share a seed under one master seed.
pub fn derive_seed(master_seed: u64, replication_index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(replication_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws a fresh demand for every QoS-aware operator.
pub fn draw_demands<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> DemandVector {
    let omega = scenario
        .mos()
        .iter()
        .map(|mo| mo.demand_range.map(|d| rng.random_range(d.low..d.high)))
        .collect();
    DemandVector::new(omega).expect("validated ranges yield non-negative demands")
}

/// What an observer sees after each scheduler decision.
#[derive(Debug)]
pub struct SlotView<'a> {
    pub scheduler: SchedulerKind,
    pub slot: usize,
    pub rates: &'a RateMatrix,
    pub omega: &'a DemandVector,
    pub phi: &'a AssignmentVector,
    pub record: &'a SlotRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    pub schedulers: Vec<SchedulerKind>,
    /// Time means, one per scheduler.
    pub summaries: Vec<ReplicationSummary>,
    /// Per-slot records per scheduler; empty unless requested.
    pub records: Vec<Vec<SlotRecord>>,
    /// Per-slot assignments per scheduler; empty unless requested.
    pub trace: Vec<Vec<AssignmentVector>>,
}

/// Runs replication `index` keeping only time means.
pub fn run_replication(config: &SimConfig, index: usize) -> Result<ReplicationResult> {
    run_replication_with(config, index, false, |_| {})
}

/// Runs replication `index`, calling `observer` after every scheduler
/// decision and keeping full records and Φ traces when `keep_records` is set.
pub fn run_replication_with(
    config: &SimConfig,
    index: usize,
    keep_records: bool,
    mut observer: impl FnMut(&SlotView),
) -> Result<ReplicationResult> {
    config.validate()?;
    let layout = config.layout()?;
    replicate(config, &layout, index, keep_records, &mut observer)
}

fn replicate(
    config: &SimConfig,
    layout: &DistrictLayout,
    index: usize,
    keep_records: bool,
    observer: &mut dyn FnMut(&SlotView),
) -> Result<ReplicationResult> {
    let seed = derive_seed(config.master_seed, index as u64);
    let scenario = &config.scenario;
    let placement = place_ues(scenario, layout, &mut stream(seed, STREAM_PLACEMENT));
    let mut shadow_rng = stream(seed, STREAM_SHADOWING);
    let mut demand_rng = stream(seed, STREAM_DEMAND);

    let budget = LinkBudget::new(layout, &placement, &config.channel)?;
    let mut shadowing = ShadowingField::zeros(budget.n_ues(), budget.n_sites());
    let mut r = RateMatrix::zeros(scenario.mo_count(), layout.n_sites());
    let mut omega = draw_demands(scenario, &mut demand_rng);

    let mut schedulers = config
        .schedulers
        .iter()
        .map(|&k| Scheduler::new(k, scenario.betas(), &config.sched))
        .collect::<Result<Vec<_>>>()?;
    let n = schedulers.len();
    let mut acc = vec![SlotAccumulator::default(); n];
    let mut records = vec![Vec::new(); if keep_records { n } else { 0 }];
    let mut trace = vec![Vec::new(); if keep_records { n } else { 0 }];

    for slot in 0..config.n_slots {
        shadowing.redraw(&mut shadow_rng, config.channel.shadow_sigma_db);
        budget.fill_rate_matrix(&shadowing, &mut r)?;
        if slot > 0 && slot % config.demand_period == 0 {
            omega = draw_demands(scenario, &mut demand_rng);
        }
        for (j, sched) in schedulers.iter_mut().enumerate() {
            let phi = sched.step(&r, &omega, Some(layout))?;
            let record = SlotRecord::new(slot, &phi, &r, &omega)?;
            acc[j].push(&record);
            observer(&SlotView {
                scheduler: sched.kind(),
                slot,
                rates: &r,
                omega: &omega,
                phi: &phi,
                record: &record,
            });
            if keep_records {
                records[j].push(record);
                trace[j].push(phi);
            }
        }
    }

    Ok(ReplicationResult {
        replication: index,
        seed,
        schedulers: config.schedulers.clone(),
        summaries: acc.iter().map(SlotAccumulator::finish).collect::<Result<_>>()?,
        records,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Serial,
    /// Replications run on a worker pool. Without the `parallel` feature this
    /// behaves like `Serial`.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Serial
        }
    }
}

/// Worker cap from `SLICE_SCHED_THREADS`; `None` when unset or empty.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Usage(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
    }
}

/// Per-replication time means of every scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub seed: u64,
    pub summaries: Vec<ReplicationSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub schedulers: Vec<SchedulerKind>,
    pub replications: Vec<ReplicationOutcome>,
    /// One per scheduler, same order as `schedulers`.
    pub aggregates: Vec<Aggregate>,
}

impl MonteCarloResult {
    pub fn aggregate_of(&self, label: &str) -> Option<&Aggregate> {
        self.schedulers
            .iter()
            .position(|k| k.label() == label)
            .map(|j| &self.aggregates[j])
    }
}

/// Receives each finished replication in index order.
pub type ReplicationSink<'a> = &'a mut dyn FnMut(&ReplicationResult) -> Result<()>;

/// Runs all replications and aggregates them.
///
/// With a `sink`, full per-slot records are kept and handed to it one
/// replication at a time in index order; replications are computed in
/// bounded batches so memory stays flat.
pub fn run_monte_carlo(
    config: &SimConfig,
    mode: ExecMode,
    mut sink: Option<ReplicationSink<'_>>,
) -> Result<MonteCarloResult> {
    config.validate()?;
    let layout = config.layout()?;
    let threads = threads_from_env()?;
    let keep = sink.is_some();
    let batch = if keep {
        4 * threads.unwrap_or(1).max(8)
    } else {
        config.n_replications
    };

    let mut outcomes = Vec::with_capacity(config.n_replications);
    let mut start = 0;
    while start < config.n_replications {
        let end = (start + batch).min(config.n_replications);
        let results = run_batch(config, &layout, start..end, keep, mode, threads)?;
        for res in results {
            if let Some(sink) = sink.as_mut() {
                sink(&res)?;
            }
            outcomes.push(ReplicationOutcome {
                replication: res.replication,
                seed: res.seed,
                summaries: res.summaries,
            });
        }
        start = end;
    }

    let aggregates = (0..config.schedulers.len())
        .map(|j| aggregate(&outcomes.iter().map(|o| o.summaries[j]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    Ok(MonteCarloResult {
        schedulers: config.schedulers.clone(),
        replications: outcomes,
        aggregates,
    })
}

fn run_batch(
    config: &SimConfig,
    layout: &DistrictLayout,
    indices: std::ops::Range<usize>,
    keep: bool,
    mode: ExecMode,
    threads: Option<usize>,
) -> Result<Vec<ReplicationResult>> {
    let one = |i: usize| replicate(config, layout, i, keep, &mut |_| {});
    match mode {
        ExecMode::Serial => indices.map(one).collect(),
        ExecMode::Parallel => parallel_map(indices, threads, one),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<F>(indices: std::ops::Range<usize>, threads: Option<usize>, f: F) -> Result<Vec<ReplicationResult>>
where
    F: Fn(usize) -> Result<ReplicationResult> + Sync,
{
    use rayon::prelude::*;
    let run = || indices.into_par_iter().map(&f).collect::<Result<Vec<_>>>();
    match threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(run),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<F>(indices: std::ops::Range<usize>, _threads: Option<usize>, f: F) -> Result<Vec<ReplicationResult>>
where
    F: Fn(usize) -> Result<ReplicationResult> + Sync,
{
    log::debug!("built without the parallel feature; running replications serially");
    indices.map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MobileOperator;

    fn small(schedulers: Vec<SchedulerKind>) -> SimConfig {
        SimConfig {
            schedulers,
            n_replications: 3,
            n_slots: 60,
            ..SimConfig::default()
        }
    }

    #[test]
    fn derive_seed_is_a_pure_function() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(7, 4));
    }

    #[test]
    fn demand_redraws_every_period_from_slot_zero() {
        let mut cfg = small(vec![SchedulerKind::MaxMinFair]);
        cfg.n_slots = 101;
        let mut seen: Vec<(usize, f64)> = Vec::new();
        run_replication_with(&cfg, 0, false, |v| seen.push((v.slot, v.omega.get(0).unwrap()))).unwrap();
        assert_eq!(seen.len(), 101);
        for w in seen.windows(2) {
            let (s, a) = w[1];
            let changed = a != w[0].1;
            assert_eq!(changed, s % 50 == 0, "slot {s}");
        }
    }

    #[test]
    fn static_schedulers_never_change() {
        let cfg = small(vec![SchedulerKind::StaticDemand, SchedulerKind::StaticUe]);
        let res = run_replication_with(&cfg, 1, true, |_| {}).unwrap();
        for (trace, counts) in res.trace.iter().zip([[12, 18, 1], [9, 16, 6]]) {
            assert!(trace.iter().all(|phi| phi == &trace[0]));
            assert_eq!(trace[0].site_counts(3), counts);
        }
    }

    #[test]
    fn best_effort_only_records_no_satisfied_ratio() {
        let cfg = SimConfig {
            scenario: Scenario::new(vec![MobileOperator::best_effort(5)], 1, 5.0).unwrap(),
            schedulers: vec![SchedulerKind::MaxMinFair],
            n_replications: 1,
            n_slots: 1,
            ..SimConfig::default()
        };
        let res = run_replication_with(&cfg, 0, true, |_| {}).unwrap();
        assert_eq!(res.records[0].len(), 1);
        assert_eq!(res.records[0][0].satisfied_ratio, None);
        let mc = run_monte_carlo(&cfg, ExecMode::Serial, None).unwrap();
        assert!(mc.aggregates[0].satisfied.is_none());
    }

    #[test]
    fn replications_are_reproducible_and_order_free() {
        let cfg = small(vec![SchedulerKind::pf(), SchedulerKind::RateGuarantee]);
        assert_eq!(run_replication(&cfg, 2).unwrap(), run_replication(&cfg, 2).unwrap());
        let serial = run_monte_carlo(&cfg, ExecMode::Serial, None).unwrap();
        let parallel = run_monte_carlo(&cfg, ExecMode::Parallel, None).unwrap();
        assert_eq!(serial, parallel);
        let mut sunk = Vec::new();
        let mut sink = |r: &ReplicationResult| {
            sunk.push(r.replication);
            Ok(())
        };
        let dumped = run_monte_carlo(&cfg, ExecMode::Serial, Some(&mut sink)).unwrap();
        assert_eq!(sunk, vec![0, 1, 2]);
        assert_eq!(dumped, serial);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            SimConfig {
                n_slots: 0,
                ..SimConfig::default()
            },
            SimConfig {
                n_replications: 0,
                ..SimConfig::default()
            },
            SimConfig {
                demand_period: 0,
                ..SimConfig::default()
            },
            SimConfig {
                schedulers: vec![],
                ..SimConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
