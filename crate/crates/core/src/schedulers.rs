//! The controller's decision core: per-interval eNodeB assignment for the six
//! dynamic schedulers and the two static baselines.
//!
//! Metric-based schedulers (RR, BET, MT, PF, RG) build m(i,k) and hand every
//! eNodeB column to its argmax operator. How the λ-dependent metrics react to
//! grants made earlier in the same interval is controlled by
//! [`RefreshPolicy`]. MMF and the static baselines do not use metrics.

use std::fmt;
use std::str::FromStr;

use crate::domain::{
    AssignmentVector, DemandVector, MetricMatrix, RateMatrix, SchedulerState, DEFAULT_TAU, LAMBDA_INIT_GBPS,
};
use crate::error::{Error, Result};
use crate::geometry::DistrictLayout;

pub const DEFAULT_PF_ALPHA: f64 = 1.0;
pub const DEFAULT_PF_GAMMA: f64 = 0.8;

/// Nominal demand used by RG for best-effort operators, in Gbps.
pub const DEFAULT_RG_BEST_EFFORT_OMEGA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedulerKind {
    RoundRobin,
    BlindEqualThroughput,
    MaxThroughput,
    ProportionalFair { alpha: f64, gamma: f64 },
    MaxMinFair,
    RateGuarantee,
    StaticDemand,
    StaticUe,
}

impl SchedulerKind {
    /// All eight schedulers in reporting order.
    pub fn all() -> [SchedulerKind; 8] {
        [
            SchedulerKind::RoundRobin,
            SchedulerKind::BlindEqualThroughput,
            SchedulerKind::MaxThroughput,
            SchedulerKind::pf(),
            SchedulerKind::MaxMinFair,
            SchedulerKind::RateGuarantee,
            SchedulerKind::StaticDemand,
            SchedulerKind::StaticUe,
        ]
    }

    pub fn pf() -> Self {
        SchedulerKind::ProportionalFair {
            alpha: DEFAULT_PF_ALPHA,
            gamma: DEFAULT_PF_GAMMA,
        }
    }

    /// Short name used on the command line and in CSV files.
    pub fn label(&self) -> &'static str {
        match self {
            SchedulerKind::RoundRobin => "RR",
            SchedulerKind::BlindEqualThroughput => "BET",
            SchedulerKind::MaxThroughput => "MT",
            SchedulerKind::ProportionalFair { .. } => "PF",
            SchedulerKind::MaxMinFair => "MMF",
            SchedulerKind::RateGuarantee => "RG",
            SchedulerKind::StaticDemand => "static-demand",
            SchedulerKind::StaticUe => "static-ue",
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, SchedulerKind::StaticDemand | SchedulerKind::StaticUe)
    }

    /// Whether the metric depends on the smoothed rate λ.
    pub fn uses_lambda(&self) -> bool {
        matches!(
            self,
            SchedulerKind::BlindEqualThroughput | SchedulerKind::ProportionalFair { .. } | SchedulerKind::RateGuarantee
        )
    }

    /// Refresh policy applied when none is configured.
    pub fn default_refresh(&self) -> RefreshPolicy {
        match self {
            SchedulerKind::BlindEqualThroughput | SchedulerKind::ProportionalFair { .. } => {
                RefreshPolicy::PerAssignment
            }
            SchedulerKind::RateGuarantee => RefreshPolicy::Granted,
            _ => RefreshPolicy::PerInterval,
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    /// Case-insensitive; PF gets the default α and γ.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "rr" => SchedulerKind::RoundRobin,
            "bet" => SchedulerKind::BlindEqualThroughput,
            "mt" => SchedulerKind::MaxThroughput,
            "pf" => SchedulerKind::pf(),
            "mmf" => SchedulerKind::MaxMinFair,
            "rg" => SchedulerKind::RateGuarantee,
            "static-demand" | "demand-based" => SchedulerKind::StaticDemand,
            "static-ue" | "ue-based" => SchedulerKind::StaticUe,
            other => {
                return Err(format!(
                    "unknown scheduler '{other}' (expected rr, bet, mt, pf, mmf, rg, static-demand, static-ue)"
                ))
            }
        })
    }
}

/// When λ-dependent metrics are re-evaluated inside one allocation interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefreshPolicy {
    /// After each eNodeB is granted, λ is replaced by the provisional value
    /// (1 − 1/τ)·λ + g/τ, where g is the rate granted so far this interval.
    PerAssignment,
    /// M is computed once per interval from λ and never updated.
    PerInterval,
    /// After each grant the metric is evaluated at g itself (floored at the
    /// λ warm-start value) instead of the smoothed rate, so the scheduler
    /// reacts to the current demand without the filter's lag.
    Granted,
}

impl RefreshPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            RefreshPolicy::PerAssignment => "per-assignment",
            RefreshPolicy::PerInterval => "per-interval",
            RefreshPolicy::Granted => "granted",
        }
    }
}

impl FromStr for RefreshPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per-assignment" => Ok(RefreshPolicy::PerAssignment),
            "per-interval" => Ok(RefreshPolicy::PerInterval),
            "granted" => Ok(RefreshPolicy::Granted),
            other => Err(format!(
                "unknown refresh policy '{other}' (expected per-assignment, per-interval or granted)"
            )),
        }
    }
}

/// Marginal utility U′(λ) = Ω/λ + β·exp(−β(λ − Ω)/Ω) of the rate-guarantee
/// utility U(λ) = Ω·(ln λ + 1 − exp(−β(λ − Ω)/Ω)).
pub fn rg_marginal_utility(lambda: f64, omega: f64, beta: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Schedule(format!("smoothed rate {lambda} must be positive")));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Schedule(format!("demand {omega} must be positive")));
    }
    Ok(omega / lambda + beta * (-beta * (lambda - omega) / omega).exp())
}

/// The rate-guarantee utility itself; U′ is its derivative in λ.
pub fn rg_utility(lambda: f64, omega: f64, beta: f64) -> f64 {
    omega * (lambda.ln() + 1.0 - (-beta * (lambda - omega) / omega).exp())
}

/// Everything a metric needs besides R and λ.
#[derive(Debug, Clone, Copy)]
pub struct MetricInputs<'a> {
    pub omega: &'a DemandVector,
    pub betas: &'a [f64],
    pub rr_offset: usize,
    /// Nominal demand RG assumes for best-effort operators.
    pub best_effort_omega: f64,
}

/// One metric entry m(i,k) for rate `r` and smoothed rate `lambda`.
fn metric_entry(kind: SchedulerKind, r: f64, lambda: f64, mo: usize, site: usize, ctx: &MetricInputs) -> Result<f64> {
    let n_mos = ctx.omega.len();
    Ok(match kind {
        SchedulerKind::MaxThroughput => r,
        SchedulerKind::BlindEqualThroughput => 1.0 / lambda,
        SchedulerKind::ProportionalFair { alpha, gamma } => r.powf(alpha) / lambda.powf(gamma),
        SchedulerKind::RoundRobin => f64::from(u8::from((site + ctx.rr_offset) % n_mos == mo)),
        SchedulerKind::RateGuarantee => match ctx.omega.get(mo) {
            None => r * ctx.best_effort_omega / lambda,
            // U′ → 0 as Ω → 0⁺ for any λ > 0: a zero demand is already met.
            Some(0.0) => 0.0,
            Some(omega) => r * rg_marginal_utility(lambda, omega, ctx.betas[mo])?,
        },
        SchedulerKind::MaxMinFair | SchedulerKind::StaticDemand | SchedulerKind::StaticUe => {
            return Err(Error::Schedule(format!("{kind} does not use a metric matrix")));
        }
    })
}

fn check_inputs(r: &RateMatrix, lambda: &[f64], ctx: &MetricInputs) -> Result<()> {
    if r.n_mos() != lambda.len() || ctx.omega.len() != r.n_mos() || ctx.betas.len() != r.n_mos() {
        return Err(Error::Dimension(format!(
            "R has {} operators, λ {}, Ω {}, β {}",
            r.n_mos(),
            lambda.len(),
            ctx.omega.len(),
            ctx.betas.len()
        )));
    }
    if let Some(bad) = lambda.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Schedule(format!("smoothed rate {bad} must be positive")));
    }
    if (0..r.n_mos()).any(|i| r.row(i).iter().any(|v| v.is_nan())) {
        return Err(Error::Schedule("rate matrix contains NaN".into()));
    }
    Ok(())
}

/// Builds M for one interval from the current smoothed rates.
pub fn compute_metric(
    kind: SchedulerKind,
    r: &RateMatrix,
    state: &SchedulerState,
    ctx: &MetricInputs,
) -> Result<MetricMatrix> {
    check_inputs(r, &state.lambda, ctx)?;
    let ctx = MetricInputs {
        rr_offset: state.rr_offset,
        ..*ctx
    };
    let mut err = None;
    let m = MetricMatrix::from_fn(r.n_mos(), r.n_sites(), |i, k| {
        metric_entry(kind, r.get(i, k), state.lambda[i], i, k, &ctx).unwrap_or_else(|e| {
            err.get_or_insert(e);
            f64::NAN
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Column-wise argmax of a fixed metric matrix, lowest operator on ties.
pub fn assign_argmax(m: &MetricMatrix) -> Result<AssignmentVector> {
    if m.n_mos() == 0 || m.n_sites() == 0 {
        return Err(Error::Schedule("empty metric matrix".into()));
    }
    let owners: Vec<usize> = (0..m.n_sites())
        .map(|k| argmax((0..m.n_mos()).map(|i| m.get(i, k))).expect("non-empty column"))
        .collect();
    Ok(AssignmentVector::from_owners(&owners))
}

/// One interval of a metric-based scheduler under `refresh`.
pub fn assign_metric(
    kind: SchedulerKind,
    r: &RateMatrix,
    state: &SchedulerState,
    ctx: &MetricInputs,
    refresh: RefreshPolicy,
) -> Result<AssignmentVector> {
    if refresh == RefreshPolicy::PerInterval || !kind.uses_lambda() {
        return assign_argmax(&compute_metric(kind, r, state, ctx)?);
    }
    check_inputs(r, &state.lambda, ctx)?;
    if r.n_mos() == 0 || r.n_sites() == 0 {
        return Err(Error::Schedule("empty rate matrix".into()));
    }
    let n = r.n_mos();
    let keep = 1.0 - 1.0 / state.tau;
    let mut granted = vec![0.0; n];
    let mut column = vec![0.0; n];
    let mut owners = Vec::with_capacity(r.n_sites());
    for k in 0..r.n_sites() {
        for i in 0..n {
            let lambda = match refresh {
                RefreshPolicy::PerAssignment => keep * state.lambda[i] + granted[i] / state.tau,
                _ => granted[i].max(LAMBDA_INIT_GBPS),
            };
            column[i] = metric_entry(kind, r.get(i, k), lambda, i, k, ctx)?;
        }
        let winner = argmax(column.iter().copied()).expect("non-empty column");
        granted[winner] += r.get(winner, k);
        owners.push(winner);
    }
    Ok(AssignmentVector::from_owners(&owners))
}

/// Smoothed-rate update λ ← (1 − 1/τ)·λ + Σ_k δ(i,k)·R(i,k)/τ, recording Φ as
/// the new δ.
pub fn update_avg_rate(state: &mut SchedulerState, r: &RateMatrix, phi: &AssignmentVector) -> Result<()> {
    phi.validate(state.n_mos(), r.n_sites())?;
    if r.n_mos() != state.n_mos() {
        return Err(Error::Dimension(format!(
            "R has {} operators, state has {}",
            r.n_mos(),
            state.n_mos()
        )));
    }
    let keep = 1.0 - 1.0 / state.tau;
    let mut got = vec![0.0; state.n_mos()];
    for (k, owner) in phi.as_slice().iter().enumerate() {
        if let Some(i) = *owner {
            got[i] += r.get(i, k);
        }
    }
    for (l, g) in state.lambda.iter_mut().zip(got) {
        *l = keep * *l + g / state.tau;
    }
    state.last_assignment = Some(phi.clone());
    Ok(())
}

/// Moves the round-robin cursor by one operator.
pub fn advance_rr(state: &mut SchedulerState) {
    let n = state.n_mos().max(1);
    state.rr_offset = (state.rr_offset + 1) % n;
}

fn best_free(r: &RateMatrix, mo: usize, free: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, _) in free.iter().enumerate().filter(|(_, &f)| f) {
        if best.is_none_or(|b| r.get(mo, k) > r.get(mo, b)) {
            best = Some(k);
        }
    }
    best
}

/// Max-min fair assignment of indivisible eNodeBs.
///
/// QoS-aware operators are served in ascending demand order, each greedily
/// taking its best free eNodeBs until its demand is met. The first operator
/// the pool cannot satisfy returns what it took, and it and every operator
/// after it then share the remaining eNodeBs round-robin, one best eNodeB per
/// pass, dropping out once satisfied. Leftovers go round-robin to the
/// best-effort operators. eNodeBs stay unassigned only when there are none.
pub fn assign_mmf(r: &RateMatrix, omega: &DemandVector) -> Result<AssignmentVector> {
    if omega.len() != r.n_mos() {
        return Err(Error::Dimension(format!(
            "R has {} operators, Ω has {}",
            r.n_mos(),
            omega.len()
        )));
    }
    let n_sites = r.n_sites();
    let mut qos = omega.qos_set();
    qos.sort_by(|&a, &b| {
        let (oa, ob) = (omega.get(a).unwrap_or(0.0), omega.get(b).unwrap_or(0.0));
        oa.total_cmp(&ob).then(a.cmp(&b))
    });
    let be = omega.be_set();

    let mut phi: Vec<Option<usize>> = vec![None; n_sites];
    let mut free = vec![true; n_sites];
    let mut n_free = n_sites;
    let mut rate = vec![0.0; r.n_mos()];
    let demand = |i: usize| omega.get(i).unwrap_or(0.0);

    let grant = |i: usize, k: usize, phi: &mut Vec<Option<usize>>, free: &mut Vec<bool>, rate: &mut Vec<f64>| {
        free[k] = false;
        phi[k] = Some(i);
        rate[i] += r.get(i, k);
    };

    let mut unsatisfied: &[usize] = &[];
    for (pos, &i) in qos.iter().enumerate() {
        let mut taken = Vec::new();
        while rate[i] < demand(i) {
            let Some(k) = best_free(r, i, &free) else { break };
            grant(i, k, &mut phi, &mut free, &mut rate);
            n_free -= 1;
            taken.push(k);
        }
        if rate[i] < demand(i) {
            for k in taken {
                free[k] = true;
                phi[k] = None;
                n_free += 1;
            }
            rate[i] = 0.0;
            unsatisfied = &qos[pos..];
            break;
        }
    }

    let mut active: Vec<usize> = unsatisfied.to_vec();
    while n_free > 0 && !active.is_empty() {
        let mut still = Vec::with_capacity(active.len());
        for &i in &active {
            if n_free == 0 {
                still.push(i);
                continue;
            }
            let k = best_free(r, i, &free).expect("free eNodeB exists");
            grant(i, k, &mut phi, &mut free, &mut rate);
            n_free -= 1;
            if rate[i] < demand(i) {
                still.push(i);
            }
        }
        active = still;
    }

    let mut turn = 0;
    while n_free > 0 && !be.is_empty() {
        let i = be[turn % be.len()];
        let k = best_free(r, i, &free).expect("free eNodeB exists");
        grant(i, k, &mut phi, &mut free, &mut rate);
        n_free -= 1;
        turn += 1;
    }

    Ok(AssignmentVector::new(phi))
}

/// The precomputed static labeling for `kind`.
pub fn assign_static(kind: SchedulerKind, layout: &DistrictLayout) -> Result<AssignmentVector> {
    let labels = match kind {
        SchedulerKind::StaticDemand => layout.static_labels_demand.as_ref(),
        SchedulerKind::StaticUe => layout.static_labels_ue.as_ref(),
        other => return Err(Error::Schedule(format!("{other} is not a static assignment"))),
    };
    labels
        .map(|l| AssignmentVector::from_owners(l))
        .ok_or_else(|| Error::Schedule(format!("layout carries no {} labels", kind.label())))
}

/// Tunables shared by all schedulers of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerParams {
    pub tau: f64,
    /// Overrides every scheduler's default refresh policy when set.
    pub refresh: Option<RefreshPolicy>,
    pub best_effort_omega: f64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            refresh: None,
            best_effort_omega: DEFAULT_RG_BEST_EFFORT_OMEGA,
        }
    }
}

/// A scheduler together with the state it carries across intervals.
#[derive(Debug, Clone)]
pub struct Scheduler {
    kind: SchedulerKind,
    refresh: RefreshPolicy,
    best_effort_omega: f64,
    betas: Vec<f64>,
    state: SchedulerState,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, betas: Vec<f64>, params: &SchedulerParams) -> Result<Self> {
        if !(params.best_effort_omega > 0.0 && params.best_effort_omega.is_finite()) {
            return Err(Error::Schedule(format!(
                "best-effort nominal demand {} must be positive",
                params.best_effort_omega
            )));
        }
        if let SchedulerKind::ProportionalFair { alpha, gamma } = kind {
            if !alpha.is_finite() || !gamma.is_finite() {
                return Err(Error::Schedule("PF exponents must be finite".into()));
            }
        }
        Ok(Self {
            kind,
            refresh: params.refresh.unwrap_or_else(|| kind.default_refresh()),
            best_effort_omega: params.best_effort_omega,
            state: SchedulerState::new(betas.len(), params.tau)?,
            betas,
        })
    }

    pub fn kind(&self) -> SchedulerKind {
        self.kind
    }

    pub fn refresh(&self) -> RefreshPolicy {
        self.refresh
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    /// Places the round-robin cursor, wrapping at the operator count.
    pub fn set_rr_offset(&mut self, offset: usize) {
        self.state.rr_offset = offset % self.state.n_mos().max(1);
    }

    /// Assignment for the current interval, without touching the state.
    pub fn decide(
        &self,
        r: &RateMatrix,
        omega: &DemandVector,
        layout: Option<&DistrictLayout>,
    ) -> Result<AssignmentVector> {
        match self.kind {
            SchedulerKind::MaxMinFair => assign_mmf(r, omega),
            SchedulerKind::StaticDemand | SchedulerKind::StaticUe => {
                let layout = layout.ok_or_else(|| Error::Schedule("static assignment needs a layout".into()))?;
                assign_static(self.kind, layout)
            }
            kind => {
                let ctx = MetricInputs {
                    omega,
                    betas: &self.betas,
                    rr_offset: self.state.rr_offset,
                    best_effort_omega: self.best_effort_omega,
                };
                assign_metric(kind, r, &self.state, &ctx, self.refresh)
            }
        }
    }

    /// Runs one interval: decide, then fold the outcome into λ and the cursor.
    pub fn step(
        &mut self,
        r: &RateMatrix,
        omega: &DemandVector,
        layout: Option<&DistrictLayout>,
    ) -> Result<AssignmentVector> {
        let phi = self.decide(r, omega, layout)?;
        phi.validate(r.n_mos(), r.n_sites())?;
        update_avg_rate(&mut self.state, r, &phi)?;
        advance_rr(&mut self.state);
        Ok(phi)
    }
}
