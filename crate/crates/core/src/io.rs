//! CSV readers and writers.
//!
//! All files carry a header row, use `.` as decimal separator and print floats
//! in Rust's shortest round-trip form, so re-reading a file yields the exact
//! values that were written. Operator and eNodeB ids are 1-based.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::domain::{AssignmentVector, DemandVector, RateMatrix};
use crate::error::{Error, Result};
use crate::geometry::DistrictLayout;
use crate::metrics::{Aggregate, Stat};
use crate::sim::{MonteCarloResult, ReplicationResult};

/// Demand cell of a best-effort operator.
pub const NO_DEMAND: &str = "BE";
/// Owner cell of an unassigned eNodeB.
pub const UNASSIGNED: &str = "none";
/// Satisfied-ratio cell when there is no QoS-aware operator.
pub const NOT_APPLICABLE: &str = "n/a";

pub const SUMMARY_HEADER: [&str; 7] = [
    "scheduler",
    "fairness_mean",
    "fairness_std",
    "rate_gbps_mean",
    "rate_gbps_std",
    "satisfied_mean",
    "satisfied_std",
];

pub const DUMP_HEADER: [&str; 9] = [
    "replication",
    "slot",
    "scheduler",
    "mo",
    "rate_gbps",
    "demand_gbps",
    "assigned_sites",
    "fairness",
    "satisfied_ratio",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn bad(path: &Path, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// A CSV writer that remembers its path for error messages.
pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = Self {
            path: path.to_path_buf(),
            inner: csv::Writer::from_writer(file),
        };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))?;
        let file = self
            .inner
            .into_inner()
            .map_err(|e| Error::io(&self.path, e.into_error()))?;
        file.sync_all().ok();
        Ok(())
    }
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn parse_f64(path: &Path, row: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| bad(path, format!("row {row}: '{s}' is not a number")))
}

fn parse_id(path: &Path, row: usize, s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(id) if id >= 1 => Ok(id - 1),
        _ => Err(bad(path, format!("row {row}: '{s}' is not a 1-based id"))),
    }
}

fn check_ids(path: &Path, what: &str, ids: &[usize]) -> Result<()> {
    for (expected, &id) in ids.iter().enumerate() {
        if id != expected {
            return Err(bad(
                path,
                format!("{what} ids must run 1, 2, ... in order; found {}", id + 1),
            ));
        }
    }
    Ok(())
}

fn stat_cells(s: Option<Stat>) -> [String; 2] {
    match s {
        Some(s) => [s.mean.to_string(), s.std.to_string()],
        None => [NOT_APPLICABLE.into(), NOT_APPLICABLE.into()],
    }
}

/// `summary.csv`: one row per scheduler.
pub fn write_summary(path: &Path, result: &MonteCarloResult) -> Result<()> {
    let mut out = CsvOut::create(path, &SUMMARY_HEADER)?;
    for (kind, agg) in result.schedulers.iter().zip(&result.aggregates) {
        let mut row = vec![kind.label().to_string()];
        row.extend(stat_cells(Some(agg.fairness)));
        row.extend(stat_cells(Some(agg.rate_gbps)));
        row.extend(stat_cells(agg.satisfied));
        out.row(&row)?;
    }
    out.finish()
}

/// One parsed `summary.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheduler: String,
    pub fairness: Stat,
    pub rate_gbps: Stat,
    pub satisfied: Option<Stat>,
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let (header, rows) = read_rows(path)?;
    if header != SUMMARY_HEADER {
        return Err(bad(path, format!("unexpected header {header:?}")));
    }
    rows.iter()
        .enumerate()
        .map(|(n, r)| {
            let stat = |a: usize| -> Result<Stat> {
                Ok(Stat {
                    mean: parse_f64(path, n + 1, &r[a])?,
                    std: parse_f64(path, n + 1, &r[a + 1])?,
                })
            };
            Ok(SummaryRow {
                scheduler: r[0].clone(),
                fairness: stat(1)?,
                rate_gbps: stat(3)?,
                satisfied: if r[5] == NOT_APPLICABLE { None } else { Some(stat(5)?) },
            })
        })
        .collect()
}

/// One figure column pair (mean, std) per scheduler.
pub fn write_bar_chart(
    path: &Path,
    metric: &str,
    result: &MonteCarloResult,
    pick: fn(&Aggregate) -> Option<Stat>,
) -> Result<()> {
    let header = [
        "scheduler".to_string(),
        format!("{metric}_mean"),
        format!("{metric}_std"),
    ];
    let mut out = CsvOut::create(path, &header.iter().map(String::as_str).collect::<Vec<_>>())?;
    for (kind, agg) in result.schedulers.iter().zip(&result.aggregates) {
        let [m, s] = stat_cells(pick(agg));
        out.row([kind.label(), &m, &s])?;
    }
    out.finish()
}

/// Per-slot dump writer; rows are emitted replication by replication.
pub struct DumpWriter {
    out: CsvOut,
}

impl DumpWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: CsvOut::create(path, &DUMP_HEADER)?,
        })
    }

    /// Writes every (slot, scheduler, operator) row of one replication.
    pub fn write(&mut self, res: &ReplicationResult) -> Result<()> {
        let rep = (res.replication + 1).to_string();
        let n_slots = res.records.first().map_or(0, Vec::len);
        for slot in 0..n_slots {
            for (kind, records) in res.schedulers.iter().zip(&res.records) {
                let rec = &records[slot];
                let fairness = rec.fairness.to_string();
                let satisfied = rec
                    .satisfied_ratio
                    .map_or_else(|| NOT_APPLICABLE.to_string(), |s| s.to_string());
                for (mo, rate) in rec.per_mo_rate.iter().enumerate() {
                    self.out.row([
                        rep.as_str(),
                        &rec.slot.to_string(),
                        kind.label(),
                        &(mo + 1).to_string(),
                        &rate.to_string(),
                        &demand_cell(rec.omega.get(mo)),
                        &rec.assigned_sites[mo].to_string(),
                        &fairness,
                        &satisfied,
                    ])?;
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        self.out.finish()
    }
}

fn demand_cell(omega: Option<f64>) -> String {
    omega.map_or_else(|| NO_DEMAND.to_string(), |w| w.to_string())
}

/// One parsed dump row.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub replication: usize,
    pub slot: usize,
    pub scheduler: String,
    pub mo: usize,
    pub rate_gbps: f64,
    pub demand_gbps: Option<f64>,
    pub assigned_sites: usize,
    pub fairness: f64,
    pub satisfied_ratio: Option<f64>,
}

pub fn read_dump(path: &Path) -> Result<Vec<DumpRow>> {
    let (header, rows) = read_rows(path)?;
    if header != DUMP_HEADER {
        return Err(bad(path, format!("unexpected header {header:?}")));
    }
    rows.iter()
        .enumerate()
        .map(|(n, r)| {
            let n = n + 1;
            let opt = |s: &str, sentinel: &str| -> Result<Option<f64>> {
                if s == sentinel {
                    Ok(None)
                } else {
                    parse_f64(path, n, s).map(Some)
                }
            };
            Ok(DumpRow {
                replication: parse_id(path, n, &r[0])?,
                slot: r[1].parse().map_err(|_| bad(path, format!("row {n}: bad slot")))?,
                scheduler: r[2].clone(),
                mo: parse_id(path, n, &r[3])?,
                rate_gbps: parse_f64(path, n, &r[4])?,
                demand_gbps: opt(&r[5], NO_DEMAND)?,
                assigned_sites: r[6]
                    .parse()
                    .map_err(|_| bad(path, format!("row {n}: bad site count")))?,
                fairness: parse_f64(path, n, &r[7])?,
                satisfied_ratio: opt(&r[8], NOT_APPLICABLE)?,
            })
        })
        .collect()
}

/// Time series of one replication: `slot, mo, rate_gbps, demand_gbps`.
pub fn write_time_series(path: &Path, res: &ReplicationResult, scheduler: usize) -> Result<()> {
    let mut out = CsvOut::create(path, &["slot", "mo", "rate_gbps", "demand_gbps"])?;
    for rec in &res.records[scheduler] {
        for (mo, rate) in rec.per_mo_rate.iter().enumerate() {
            out.row([
                rec.slot.to_string(),
                (mo + 1).to_string(),
                rate.to_string(),
                demand_cell(rec.omega.get(mo)),
            ])?;
        }
    }
    out.finish()
}

/// Layout export: `site_id, x_km, y_km, label_demand, label_ue`.
pub fn write_layout(path: &Path, layout: &DistrictLayout) -> Result<()> {
    let mut out = CsvOut::create(path, &["site_id", "x_km", "y_km", "label_demand", "label_ue"])?;
    let label = |l: &Option<Vec<usize>>, k: usize| {
        l.as_ref()
            .map_or_else(|| UNASSIGNED.to_string(), |l| (l[k] + 1).to_string())
    };
    for (k, s) in layout.sites.iter().enumerate() {
        out.row([
            (k + 1).to_string(),
            s.x.to_string(),
            s.y.to_string(),
            label(&layout.static_labels_demand, k),
            label(&layout.static_labels_ue, k),
        ])?;
    }
    out.finish()
}

/// One parsed layout row: position and the two static owners (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutRow {
    pub x_km: f64,
    pub y_km: f64,
    pub label_demand: Option<usize>,
    pub label_ue: Option<usize>,
}

pub fn read_layout(path: &Path) -> Result<Vec<LayoutRow>> {
    let (_, rows) = read_rows(path)?;
    let ids = rows
        .iter()
        .enumerate()
        .map(|(n, r)| parse_id(path, n + 1, &r[0]))
        .collect::<Result<Vec<_>>>()?;
    check_ids(path, "site", &ids)?;
    rows.iter()
        .enumerate()
        .map(|(n, r)| {
            let owner = |s: &str| {
                if s == UNASSIGNED {
                    Ok(None)
                } else {
                    parse_id(path, n + 1, s).map(Some)
                }
            };
            Ok(LayoutRow {
                x_km: parse_f64(path, n + 1, &r[1])?,
                y_km: parse_f64(path, n + 1, &r[2])?,
                label_demand: owner(&r[3])?,
                label_ue: owner(&r[4])?,
            })
        })
        .collect()
}

/// Rate matrix file: header `mo_id, site_1, ..., site_n`, one row per
/// operator, rates in Gbps.
pub fn read_rates(path: &Path) -> Result<RateMatrix> {
    let (header, rows) = read_rows(path)?;
    let n_sites = header.len().saturating_sub(1);
    if n_sites == 0 {
        return Err(bad(path, "rate file needs at least one eNodeB column"));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (n, r) in rows.iter().enumerate() {
        ids.push(parse_id(path, n + 1, &r[0])?);
        values.push(
            r[1..]
                .iter()
                .map(|s| parse_f64(path, n + 1, s))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if values.is_empty() {
        return Err(bad(path, "rate file has no operator rows"));
    }
    check_ids(path, "operator", &ids)?;
    RateMatrix::from_rows(&values).map_err(|e| bad(path, e.to_string()))
}

pub fn write_rates(path: &Path, r: &RateMatrix) -> Result<()> {
    let mut header = vec!["mo_id".to_string()];
    header.extend((1..=r.n_sites()).map(|k| format!("site_{k}")));
    let mut out = CsvOut::create(path, &header.iter().map(String::as_str).collect::<Vec<_>>())?;
    for i in 0..r.n_mos() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(r.row(i).iter().map(f64::to_string));
        out.row(&row)?;
    }
    out.finish()
}

/// Demand file: `mo_id, demand_gbps` with `BE` for best-effort operators.
pub fn read_demands(path: &Path) -> Result<DemandVector> {
    let (_, rows) = read_rows(path)?;
    let mut ids = Vec::new();
    let mut omega = Vec::new();
    for (n, r) in rows.iter().enumerate() {
        if r.len() < 2 {
            return Err(bad(path, format!("row {}: expected mo_id,demand_gbps", n + 1)));
        }
        ids.push(parse_id(path, n + 1, &r[0])?);
        omega.push(if r[1] == NO_DEMAND {
            None
        } else {
            Some(parse_f64(path, n + 1, &r[1])?)
        });
    }
    check_ids(path, "operator", &ids)?;
    DemandVector::new(omega).map_err(|e| bad(path, e.to_string()))
}

pub fn write_demands(path: &Path, omega: &DemandVector) -> Result<()> {
    let mut out = CsvOut::create(path, &["mo_id", "demand_gbps"])?;
    for (i, w) in omega.as_slice().iter().enumerate() {
        out.row([(i + 1).to_string(), demand_cell(*w)])?;
    }
    out.finish()
}

/// Assignment file: `enodeb_id, mo_id` with `none` for unassigned eNodeBs.
pub fn write_assignment(path: &Path, phi: &AssignmentVector) -> Result<()> {
    let mut out = CsvOut::create(path, &["enodeb_id", "mo_id"])?;
    for (k, owner) in phi.as_slice().iter().enumerate() {
        let mo = owner.map_or_else(|| UNASSIGNED.to_string(), |i| (i + 1).to_string());
        out.row([(k + 1).to_string(), mo])?;
    }
    out.finish()
}

pub fn read_assignment(path: &Path) -> Result<AssignmentVector> {
    let (_, rows) = read_rows(path)?;
    let mut ids = Vec::new();
    let mut phi = Vec::new();
    for (n, r) in rows.iter().enumerate() {
        ids.push(parse_id(path, n + 1, &r[0])?);
        phi.push(if r[1] == UNASSIGNED {
            None
        } else {
            Some(parse_id(path, n + 1, &r[1])?)
        });
    }
    check_ids(path, "eNodeB", &ids)?;
    Ok(AssignmentVector::new(phi))
}

/// Writes `text` to `path`, mapping failures to I/O errors.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
