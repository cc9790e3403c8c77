//! Core value types shared by every stage of the controller: the operator set,
//! per-slot rate and metric matrices, demand and assignment vectors, and the
//! smoothed-rate state carried by the dynamic schedulers.
//!
//! Operators are indexed from 0 internally. Anything written for humans
//! (CSV files, log lines) uses 1-based operator ids, so MO index 0 is "MO 1".

use std::fmt;

use crate::error::{Error, Result};

/// Smoothing time constant (in allocation intervals) used by BET, PF and RG.
pub const DEFAULT_TAU: f64 = 50.0;

/// Warm-start value for every smoothed rate, in Gbps. Keeps `1/λ` and
/// `R/λ^γ` finite in the first interval; the filter forgets it within a few
/// multiples of τ.
pub const LAMBDA_INIT_GBPS: f64 = 0.001;

/// Whether an operator carries a rate demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoKind {
    QosAware,
    BestEffort,
}

/// Closed-open range a QoS-aware operator's demand is redrawn from (Gbps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandRange {
    pub low: f64,
    pub high: f64,
}

impl DemandRange {
    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.low + self.high)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobileOperator {
    pub kind: MoKind,
    pub ue_count: usize,
    /// Aggressiveness of the rate-guarantee utility. Zero for best-effort.
    pub beta: f64,
    pub demand_range: Option<DemandRange>,
}

impl MobileOperator {
    pub fn qos(ue_count: usize, low: f64, high: f64, beta: f64) -> Self {
        Self {
            kind: MoKind::QosAware,
            ue_count,
            beta,
            demand_range: Some(DemandRange::new(low, high)),
        }
    }

    pub fn best_effort(ue_count: usize) -> Self {
        Self {
            kind: MoKind::BestEffort,
            ue_count,
            beta: 0.0,
            demand_range: None,
        }
    }

    pub fn is_qos(&self) -> bool {
        self.kind == MoKind::QosAware
    }
}

/// A validated, immutable description of the operators sharing one district.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    mos: Vec<MobileOperator>,
    n_enodebs: usize,
    radius_km: f64,
}

impl Scenario {
    /// Checks operator and pool invariants and freezes the scenario.
    pub fn new(mos: Vec<MobileOperator>, n_enodebs: usize, radius_km: f64) -> Result<Self> {
        validate_scenario(&mos, n_enodebs, radius_km)?;
        Ok(Self {
            mos,
            n_enodebs,
            radius_km,
        })
    }

    /// Three operators (300/500/200 UEs, demands unif(0,8) / unif(0,12) /
    /// best-effort) sharing 31 eNodeBs in a 35 km district.
    pub fn reference() -> Self {
        Self::new(
            vec![
                MobileOperator::qos(300, 0.0, 8.0, 10.0),
                MobileOperator::qos(500, 0.0, 12.0, 9.5),
                MobileOperator::best_effort(200),
            ],
            31,
            35.0,
        )
        .expect("built-in scenario is valid")
    }

    pub fn mos(&self) -> &[MobileOperator] {
        &self.mos
    }

    pub fn mo_count(&self) -> usize {
        self.mos.len()
    }

    pub fn n_enodebs(&self) -> usize {
        self.n_enodebs
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    pub fn total_ues(&self) -> usize {
        self.mos.iter().map(|m| m.ue_count).sum()
    }

    pub fn qos_set(&self) -> Vec<usize> {
        (0..self.mos.len()).filter(|&i| self.mos[i].is_qos()).collect()
    }

    pub fn be_set(&self) -> Vec<usize> {
        (0..self.mos.len()).filter(|&i| !self.mos[i].is_qos()).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.mos.iter().map(|m| m.beta).collect()
    }
}

/// Rejects inconsistent operator/pool configurations.
pub fn validate_scenario(mos: &[MobileOperator], n_enodebs: usize, radius_km: f64) -> Result<()> {
    if mos.is_empty() {
        return Err(Error::Scenario("at least one mobile operator is required".into()));
    }
    if n_enodebs == 0 {
        return Err(Error::Scenario("the eNodeB pool is empty".into()));
    }
    if !(radius_km.is_finite() && radius_km >= 0.0) {
        return Err(Error::Scenario(format!(
            "district radius {radius_km} km is not a non-negative length"
        )));
    }
    for (i, mo) in mos.iter().enumerate() {
        let name = i + 1;
        if mo.ue_count == 0 {
            return Err(Error::Scenario(format!("MO {name} has no UEs")));
        }
        if !(mo.beta.is_finite() && mo.beta >= 0.0) {
            return Err(Error::Scenario(format!(
                "MO {name} has negative or non-finite beta {}",
                mo.beta
            )));
        }
        match (mo.kind, mo.demand_range) {
            (MoKind::QosAware, None) => {
                return Err(Error::Scenario(format!("QoS-aware MO {name} has no demand range")));
            }
            (MoKind::QosAware, Some(r)) => {
                if !(r.low.is_finite() && r.high.is_finite()) || r.low < 0.0 {
                    return Err(Error::Scenario(format!(
                        "MO {name} demand range ({}, {}) must be finite and non-negative",
                        r.low, r.high
                    )));
                }
                if r.low >= r.high {
                    return Err(Error::Scenario(format!(
                        "MO {name} demand range ({}, {}) has low >= high",
                        r.low, r.high
                    )));
                }
            }
            (MoKind::BestEffort, Some(_)) => {
                return Err(Error::Scenario(format!(
                    "best-effort MO {name} must not carry a demand range"
                )));
            }
            (MoKind::BestEffort, None) => {}
        }
    }
    Ok(())
}

/// Dense row-major |ζ| × |ξ| matrix. Rows are operators, columns eNodeBs.
#[derive(Debug, Clone, PartialEq)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    #[inline]
    fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Achievable rate R(i,k) in Gbps of operator i if eNodeB k is granted to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix(Dense);

impl RateMatrix {
    pub fn zeros(n_mos: usize, n_sites: usize) -> Self {
        Self(Dense {
            rows: n_mos,
            cols: n_sites,
            data: vec![0.0; n_mos * n_sites],
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dense = Dense::from_rows(rows)?;
        if let Some(bad) = dense.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Channel(format!("rate {bad} is not a finite non-negative value")));
        }
        Ok(Self(dense))
    }

    pub fn n_mos(&self) -> usize {
        self.0.rows
    }

    pub fn n_sites(&self) -> usize {
        self.0.cols
    }

    #[inline]
    pub fn get(&self, mo: usize, site: usize) -> f64 {
        self.0.get(mo, site)
    }

    pub fn row(&self, mo: usize) -> &[f64] {
        self.0.row(mo)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_mos()).map(|i| self.row(i).to_vec()).collect()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.0.data
    }
}

/// Scheduler metric m(i,k); units depend on the scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix(Dense);

impl MetricMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self(Dense::from_rows(rows)?))
    }

    pub(crate) fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for k in 0..cols {
                data.push(f(i, k));
            }
        }
        Self(Dense { rows, cols, data })
    }

    pub fn n_mos(&self) -> usize {
        self.0.rows
    }

    pub fn n_sites(&self) -> usize {
        self.0.cols
    }

    #[inline]
    pub fn get(&self, mo: usize, site: usize) -> f64 {
        self.0.get(mo, site)
    }

    pub fn row(&self, mo: usize) -> &[f64] {
        self.0.row(mo)
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.0.data.iter_mut().for_each(|v| *v *= c);
        out
    }
}

/// Owner operator of every eNodeB for one allocation interval. `None` marks
/// an eNodeB left unassigned (only max-min fair can produce that).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AssignmentVector {
    phi: Vec<Option<usize>>,
}

impl AssignmentVector {
    pub fn new(phi: Vec<Option<usize>>) -> Self {
        Self { phi }
    }

    pub fn from_owners(owners: &[usize]) -> Self {
        Self {
            phi: owners.iter().map(|&i| Some(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn owner(&self, site: usize) -> Option<usize> {
        self.phi[site]
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.phi
    }

    /// δ(i,k): 1 when eNodeB k is held by operator i.
    pub fn delta(&self, mo: usize, site: usize) -> u8 {
        u8::from(self.phi[site] == Some(mo))
    }

    /// Number of eNodeBs held by each operator.
    pub fn site_counts(&self, n_mos: usize) -> Vec<usize> {
        let mut counts = vec![0; n_mos];
        for &i in self.phi.iter().flatten() {
            counts[i] += 1;
        }
        counts
    }

    pub fn unassigned_count(&self) -> usize {
        self.phi.iter().filter(|p| p.is_none()).count()
    }

    /// Checks length and that every owner indexes a real operator.
    pub fn validate(&self, n_mos: usize, n_sites: usize) -> Result<()> {
        if self.phi.len() != n_sites {
            return Err(Error::Dimension(format!(
                "assignment covers {} eNodeBs, expected {n_sites}",
                self.phi.len()
            )));
        }
        if let Some(bad) = self.phi.iter().flatten().find(|&&i| i >= n_mos) {
            return Err(Error::Dimension(format!("assignment names MO index {bad} of {n_mos}")));
        }
        Ok(())
    }
}

impl fmt::Display for AssignmentVector {
    /// 1-based operator ids, `-` for unassigned.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, p) in self.phi.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            match p {
                Some(i) => write!(f, "{}", i + 1)?,
                None => f.write_str("-")?,
            }
        }
        f.write_str("]")
    }
}

/// Current demand Ω(i) per operator in Gbps; `None` for best-effort operators.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandVector {
    omega: Vec<Option<f64>>,
}

impl DemandVector {
    pub fn new(omega: Vec<Option<f64>>) -> Result<Self> {
        if let Some(bad) = omega.iter().flatten().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Scenario(format!(
                "demand {bad} Gbps is not a finite non-negative rate"
            )));
        }
        Ok(Self { omega })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn get(&self, mo: usize) -> Option<f64> {
        self.omega[mo]
    }

    pub fn as_slice(&self) -> &[Option<f64>] {
        &self.omega
    }

    pub fn qos_set(&self) -> Vec<usize> {
        (0..self.omega.len()).filter(|&i| self.omega[i].is_some()).collect()
    }

    pub fn be_set(&self) -> Vec<usize> {
        (0..self.omega.len()).filter(|&i| self.omega[i].is_none()).collect()
    }
}

/// Per-replication scheduler memory: smoothed rates λ, the round-robin
/// cursor, and the previous interval's assignment (δ).
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub lambda: Vec<f64>,
    pub tau: f64,
    pub rr_offset: usize,
    pub last_assignment: Option<AssignmentVector>,
}

impl SchedulerState {
    pub fn new(n_mos: usize, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 1.0) {
            return Err(Error::Schedule(format!("smoothing constant tau = {tau} must exceed 1")));
        }
        Ok(Self {
            lambda: vec![LAMBDA_INIT_GBPS; n_mos],
            tau,
            rr_offset: 0,
            last_assignment: None,
        })
    }

    pub fn n_mos(&self) -> usize {
        self.lambda.len()
    }

    /// δ(i,k) of the most recent interval; all zero before the first one.
    pub fn delta(&self, mo: usize, site: usize) -> u8 {
        self.last_assignment.as_ref().map_or(0, |a| a.delta(mo, site))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scenario_is_valid() {
        let s = Scenario::reference();
        assert_eq!(s.mo_count(), 3);
        assert_eq!(s.n_enodebs(), 31);
        assert_eq!(s.qos_set(), vec![0, 1]);
        assert_eq!(s.be_set(), vec![2]);
        assert_eq!(s.total_ues(), 1000);
    }

    #[test]
    fn minimal_best_effort_scenario() {
        assert!(Scenario::new(vec![MobileOperator::best_effort(1)], 1, 1.0).is_ok());
    }

    #[test]
    fn rejects_malformed_configs() {
        let bad_range = MobileOperator::qos(10, 5.0, 2.0, 1.0);
        let err = Scenario::new(vec![bad_range], 3, 1.0).unwrap_err();
        assert!(err.to_string().contains("low >= high"), "{err}");

        assert!(Scenario::new(vec![], 3, 1.0).is_err());
        assert!(Scenario::new(vec![MobileOperator::best_effort(1)], 0, 1.0).is_err());

        let mut no_range = MobileOperator::qos(10, 0.0, 1.0, 1.0);
        no_range.demand_range = None;
        assert!(Scenario::new(vec![no_range], 1, 1.0).is_err());

        let negative_beta = MobileOperator::qos(10, 0.0, 1.0, -0.5);
        assert!(Scenario::new(vec![negative_beta], 1, 1.0).is_err());
    }

    #[test]
    fn delta_columns_sum_to_one() {
        let phi = AssignmentVector::new(vec![Some(1), Some(0), None, Some(1)]);
        for k in 0..phi.len() {
            let col: u8 = (0..2).map(|i| phi.delta(i, k)).sum();
            assert_eq!(col, u8::from(phi.owner(k).is_some()));
        }
        assert_eq!(phi.site_counts(2), vec![1, 2]);
        assert_eq!(phi.to_string(), "[2 1 - 2]");
    }

    #[test]
    fn assignment_validation() {
        let phi = AssignmentVector::from_owners(&[0, 3]);
        assert!(phi.validate(3, 2).is_err());
        assert!(phi.validate(4, 2).is_ok());
        assert!(phi.validate(4, 3).is_err());
    }

    #[test]
    fn state_requires_tau_above_one() {
        assert!(SchedulerState::new(3, 1.0).is_err());
        let s = SchedulerState::new(3, 50.0).unwrap();
        assert!(s.lambda.iter().all(|&l| l > 0.0));
        assert_eq!(s.delta(0, 0), 0);
    }
}
