//! Evaluation quantities: Jain fairness, per-operator and total rate, and the
//! satisfied-operator ratio, plus their aggregation over replications.
//!
//! Sums over unordered collections are taken over sorted values so results do
//! not depend on the order replications finish in.

use crate::domain::{AssignmentVector, DemandVector, RateMatrix};
use crate::error::{Error, Result};

/// Rate each operator obtains from the eNodeBs it holds, in Gbps.
pub fn per_mo_rate(phi: &AssignmentVector, r: &RateMatrix) -> Result<Vec<f64>> {
    phi.validate(r.n_mos(), r.n_sites())?;
    let mut rates = vec![0.0; r.n_mos()];
    for (k, owner) in phi.as_slice().iter().enumerate() {
        if let Some(i) = *owner {
            rates[i] += r.get(i, k);
        }
    }
    Ok(rates)
}

/// Sum of `values` in ascending order.
pub fn sorted_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Jain's index (Σr)² / (M·Σr²). An all-zero vector counts as perfectly fair.
pub fn jain_fairness(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::Metric("fairness of an empty rate vector".into()));
    }
    if let Some(bad) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::Metric(format!("rate {bad} is not a finite non-negative value")));
    }
    let sum = sorted_sum(rates.iter().copied());
    if sum == 0.0 {
        log::debug!("all {} operator rates are zero; fairness defined as 1", rates.len());
        return Ok(1.0);
    }
    let sum_sq = sorted_sum(rates.iter().map(|r| r * r));
    Ok(sum * sum / (rates.len() as f64 * sum_sq))
}

/// Fraction of QoS-aware operators whose rate meets their demand.
pub fn satisfied_ratio(rates: &[f64], omega: &DemandVector) -> Result<f64> {
    if rates.len() != omega.len() {
        return Err(Error::Dimension(format!(
            "{} rates for {} demands",
            rates.len(),
            omega.len()
        )));
    }
    let qos = omega.qos_set();
    if qos.is_empty() {
        return Err(Error::Metric("no QoS-aware operators to satisfy".into()));
    }
    let met = qos
        .iter()
        .filter(|&&i| omega.get(i).is_some_and(|w| rates[i] >= w))
        .count();
    Ok(met as f64 / qos.len() as f64)
}

/// Outcome of one allocation interval for one scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub per_mo_rate: Vec<f64>,
    pub omega: DemandVector,
    pub assigned_sites: Vec<usize>,
    pub fairness: f64,
    /// `None` when the scenario has no QoS-aware operator.
    pub satisfied_ratio: Option<f64>,
}

impl SlotRecord {
    pub fn new(slot: usize, phi: &AssignmentVector, r: &RateMatrix, omega: &DemandVector) -> Result<Self> {
        let per_mo_rate = per_mo_rate(phi, r)?;
        let fairness = jain_fairness(&per_mo_rate)?;
        let satisfied_ratio = if omega.qos_set().is_empty() {
            None
        } else {
            Some(satisfied_ratio(&per_mo_rate, omega)?)
        };
        Ok(Self {
            slot,
            assigned_sites: phi.site_counts(r.n_mos()),
            per_mo_rate,
            omega: omega.clone(),
            fairness,
            satisfied_ratio,
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.per_mo_rate.iter().sum()
    }
}

/// Running time averages of one scheduler over one replication.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotAccumulator {
    slots: usize,
    fairness: f64,
    rate: f64,
    satisfied: f64,
    satisfied_slots: usize,
}

impl SlotAccumulator {
    pub fn push(&mut self, record: &SlotRecord) {
        self.slots += 1;
        self.fairness += record.fairness;
        self.rate += record.total_rate();
        if let Some(s) = record.satisfied_ratio {
            self.satisfied += s;
            self.satisfied_slots += 1;
        }
    }

    pub fn finish(&self) -> Result<ReplicationSummary> {
        if self.slots == 0 {
            return Err(Error::Metric("no slots recorded".into()));
        }
        let n = self.slots as f64;
        Ok(ReplicationSummary {
            fairness: self.fairness / n,
            rate_gbps: self.rate / n,
            satisfied: (self.satisfied_slots > 0).then(|| self.satisfied / self.satisfied_slots as f64),
        })
    }
}

/// Time means of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationSummary {
    pub fairness: f64,
    pub rate_gbps: f64,
    pub satisfied: Option<f64>,
}

impl ReplicationSummary {
    pub fn from_records(records: &[SlotRecord]) -> Result<Self> {
        let mut acc = SlotAccumulator::default();
        records.iter().for_each(|r| acc.push(r));
        acc.finish()
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = sorted_sum(values.iter().copied()) / n;
        let var = sorted_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
        Some(Stat { mean, std: var.sqrt() })
    }
}

/// Replication-level statistics of one scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub replications: usize,
    pub fairness: Stat,
    pub rate_gbps: Stat,
    /// `None` when no replication had a QoS-aware operator.
    pub satisfied: Option<Stat>,
}

/// Means and standard deviations across replications of the per-replication
/// time means.
pub fn aggregate(summaries: &[ReplicationSummary]) -> Result<Aggregate> {
    if summaries.is_empty() {
        return Err(Error::Metric("nothing to aggregate".into()));
    }
    let pick = |f: fn(&ReplicationSummary) -> f64| summaries.iter().map(f).collect::<Vec<_>>();
    let satisfied: Vec<f64> = summaries.iter().filter_map(|s| s.satisfied).collect();
    Ok(Aggregate {
        replications: summaries.len(),
        fairness: Stat::of(&pick(|s| s.fairness)).expect("non-empty"),
        rate_gbps: Stat::of(&pick(|s| s.rate_gbps)).expect("non-empty"),
        satisfied: Stat::of(&satisfied),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_mo_rate_examples() {
        let r = RateMatrix::from_rows(&[vec![3.0, 1.0], vec![2.0, 5.0]]).unwrap();
        assert_eq!(
            per_mo_rate(&AssignmentVector::from_owners(&[0, 1]), &r).unwrap(),
            vec![3.0, 5.0]
        );
        assert_eq!(
            per_mo_rate(&AssignmentVector::from_owners(&[0, 0]), &r).unwrap(),
            vec![4.0, 0.0]
        );
        assert_eq!(
            per_mo_rate(&AssignmentVector::new(vec![None, None]), &r).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn jain_examples() {
        assert_eq!(jain_fairness(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((jain_fairness(&[1.0, 0.0, 0.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((jain_fairness(&[1.0, 2.0, 3.0]).unwrap() - 36.0 / 42.0).abs() < 1e-15);
        assert_eq!(jain_fairness(&[0.0, 0.0]).unwrap(), 1.0);
        assert!(jain_fairness(&[]).is_err());
    }

    #[test]
    fn satisfied_examples() {
        let om = DemandVector::new(vec![Some(4.0), Some(12.0), None]).unwrap();
        assert_eq!(satisfied_ratio(&[5.0, 13.0, 2.0], &om).unwrap(), 1.0);
        assert_eq!(satisfied_ratio(&[3.0, 13.0, 2.0], &om).unwrap(), 0.5);
        assert_eq!(satisfied_ratio(&[0.0, 0.0, 9.0], &om).unwrap(), 0.0);
        let be = DemandVector::new(vec![None]).unwrap();
        assert!(satisfied_ratio(&[1.0], &be).is_err());
    }

    fn summary(f: f64) -> ReplicationSummary {
        ReplicationSummary {
            fairness: f,
            rate_gbps: 10.0 * f,
            satisfied: Some(f),
        }
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[summary(0.7)]).unwrap();
        assert_eq!(one.fairness, Stat { mean: 0.7, std: 0.0 });

        let two = aggregate(&[summary(0.8), summary(0.9)]).unwrap();
        assert!((two.fairness.mean - 0.85).abs() < 1e-12);
        assert!((two.fairness.std - 0.05).abs() < 1e-12);

        let xs: Vec<_> = (0..20).map(|i| summary(0.1 + 0.037 * i as f64)).collect();
        let mut ys = xs.clone();
        ys.reverse();
        ys.swap(3, 11);
        assert_eq!(aggregate(&xs).unwrap(), aggregate(&ys).unwrap());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn best_effort_only_has_no_satisfied_stat() {
        let s = ReplicationSummary {
            fairness: 1.0,
            rate_gbps: 1.0,
            satisfied: None,
        };
        assert!(aggregate(&[s]).unwrap().satisfied.is_none());
    }
}
