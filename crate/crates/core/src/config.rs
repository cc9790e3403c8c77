//! Plain-text `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is optional
//! and defaults to the reference scenario; unknown or repeated keys are errors.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `mos.count` | number of operators | 3 |
//! | `mos.N.kind` | `qos` or `be` (N is 1-based) | qos, qos, be |
//! | `mos.N.ue_count` | UEs of operator N | 300, 500, 200 |
//! | `mos.N.demand_low_gbps` | lower demand bound | 0, 0 |
//! | `mos.N.demand_high_gbps` | upper demand bound | 8, 12 |
//! | `mos.N.beta` | RG aggressiveness | 10, 9.5, 0 |
//! | `enodebs.count` | eNodeB pool size | 31 |
//! | `district.radius_km` | district radius | 35 |
//! | `district.intersite_km` | lattice spacing | 12 |
//! | `district.strict` | reject sites outside the radius | false |
//! | `channel.carrier_ghz` | carrier (informational) | 2 |
//! | `channel.bandwidth_per_ue_mhz` | bandwidth per UE | 5 |
//! | `channel.tx_power_dbm` | eNodeB transmit power | 46 |
//! | `channel.noise_psd_dbm_hz` | noise PSD | -179 |
//! | `channel.shadow_sigma_db` | shadowing deviation | 8 |
//! | `channel.rate_model` | `coverage` or `associated` | coverage |
//! | `sched.kind` | scheduler, comma list or `all` | all |
//! | `sched.refresh` | `default`, `per-assignment`, `per-interval`, `granted` | default |
//! | `sched.tau` | smoothing constant (slots) | 50 |
//! | `sched.alpha`, `sched.gamma` | PF exponents | 1, 0.8 |
//! | `sched.rg_best_effort_gbps` | RG nominal demand of best-effort operators | 0.1 |
//! | `sim.replications` | Monte-Carlo runs | 200 |
//! | `sim.slots` | slots per run | 1000 |
//! | `sim.demand_period` | slots between demand redraws | 50 |
//! | `sim.seed` | master seed | 1 |

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::domain::{DemandRange, MoKind, MobileOperator, Scenario};
use crate::error::{Error, Result};
use crate::schedulers::{RefreshPolicy, SchedulerKind};
use crate::sim::SimConfig;

const GLOBAL_KEYS: &[&str] = &[
    "mos.count",
    "enodebs.count",
    "district.radius_km",
    "district.intersite_km",
    "district.strict",
    "channel.carrier_ghz",
    "channel.bandwidth_per_ue_mhz",
    "channel.tx_power_dbm",
    "channel.noise_psd_dbm_hz",
    "channel.shadow_sigma_db",
    "channel.rate_model",
    "sched.kind",
    "sched.refresh",
    "sched.tau",
    "sched.alpha",
    "sched.gamma",
    "sched.rg_best_effort_gbps",
    "sim.replications",
    "sim.slots",
    "sim.demand_period",
    "sim.seed",
];

const MO_FIELDS: &[&str] = &["kind", "ue_count", "demand_low_gbps", "demand_high_gbps", "beta"];

struct Entry {
    value: String,
    line: usize,
}

struct Parser<'a> {
    source: &'a str,
    entries: BTreeMap<String, Entry>,
}

impl Parser<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.source.to_string(),
            line,
            message: message.into(),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.err(e.line, format!("{key}: cannot parse '{}': {err}", e.value))),
        }
    }

    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    /// First line mentioning any of `keys`, or 0 when all are defaulted.
    fn first_line(&self, keys: impl IntoIterator<Item = String>) -> usize {
        keys.into_iter()
            .filter_map(|k| self.entries.get(&k).map(|e| e.line))
            .min()
            .unwrap_or(0)
    }
}

fn is_known(key: &str) -> bool {
    if GLOBAL_KEYS.contains(&key) {
        return true;
    }
    let mut parts = key.splitn(3, '.');
    matches!(
        (parts.next(), parts.next().map(str::parse::<usize>), parts.next()),
        (Some("mos"), Some(Ok(n)), Some(field)) if n >= 1 && MO_FIELDS.contains(&field)
    )
}

fn parse_kind(s: &str) -> std::result::Result<MoKind, String> {
    match s {
        "qos" => Ok(MoKind::QosAware),
        "be" => Ok(MoKind::BestEffort),
        other => Err(format!("unknown operator kind '{other}' (expected qos or be)")),
    }
}

/// Scheduler list: a single name, a comma-separated list, or `all`.
pub fn parse_scheduler_list(s: &str) -> std::result::Result<Vec<SchedulerKind>, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(SchedulerKind::all().to_vec());
    }
    s.split(',').map(|p| p.trim().parse()).collect()
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, &path.display().to_string())
}

/// Parses configuration text; `source` names it in error messages.
pub fn parse_config_str(text: &str, source: &str) -> Result<SimConfig> {
    let mut p = Parser {
        source,
        entries: BTreeMap::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(p.err(line, format!("expected 'key = value', found '{trimmed}'")));
        };
        let (key, value) = (key.trim(), value.trim());
        if !is_known(key) {
            return Err(p.err(line, format!("unknown key '{key}'")));
        }
        if let Some(prev) = p.entries.get(key) {
            return Err(p.err(line, format!("key '{key}' already set on line {}", prev.line)));
        }
        p.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    build(&p)
}

fn build(p: &Parser) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let reference = Scenario::reference();

    let mo_count = p.get::<usize>("mos.count")?.unwrap_or(reference.mo_count());
    for key in p.entries.keys().filter(|k| k.starts_with("mos.") && *k != "mos.count") {
        let n: usize = key.split('.').nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
        if n > mo_count {
            return Err(p.err(
                p.line_of(key),
                format!("{key} refers to MO {n} but mos.count = {mo_count}"),
            ));
        }
    }

    let mut mos = Vec::with_capacity(mo_count);
    for n in 1..=mo_count {
        let key = |f: &str| format!("mos.{n}.{f}");
        let mut mo = reference
            .mos()
            .get(n - 1)
            .cloned()
            .unwrap_or_else(|| MobileOperator::best_effort(0));
        if let Some(kind) = p.entries.get(&key("kind")) {
            mo.kind = parse_kind(&kind.value).map_err(|m| p.err(kind.line, format!("{}: {m}", key("kind"))))?;
        }
        p.set(&key("ue_count"), &mut mo.ue_count)?;
        p.set(&key("beta"), &mut mo.beta)?;
        let low = p.get::<f64>(&key("demand_low_gbps"))?;
        let high = p.get::<f64>(&key("demand_high_gbps"))?;
        match mo.kind {
            MoKind::BestEffort => {
                if low.is_some() || high.is_some() {
                    let line = p
                        .line_of(&key("demand_low_gbps"))
                        .max(p.line_of(&key("demand_high_gbps")));
                    return Err(p.err(line, format!("best-effort MO {n} cannot carry a demand range")));
                }
                mo.demand_range = None;
                if !p.entries.contains_key(&key("beta")) {
                    mo.beta = 0.0;
                }
            }
            MoKind::QosAware => {
                let base = mo.demand_range.unwrap_or(DemandRange::new(0.0, 0.0));
                mo.demand_range = Some(DemandRange::new(low.unwrap_or(base.low), high.unwrap_or(base.high)));
            }
        }
        mos.push(mo);
    }

    let n_enodebs = p.get::<usize>("enodebs.count")?.unwrap_or(reference.n_enodebs());
    let radius = p.get::<f64>("district.radius_km")?.unwrap_or(reference.radius_km());
    cfg.scenario = Scenario::new(mos, n_enodebs, radius).map_err(|e| {
        let line = p.first_line(
            ["mos.count", "enodebs.count", "district.radius_km"]
                .iter()
                .map(|s| s.to_string())
                .chain(p.entries.keys().filter(|k| k.starts_with("mos.")).cloned()),
        );
        p.err(line, e.to_string())
    })?;

    p.set("district.intersite_km", &mut cfg.intersite_km)?;
    p.set("district.strict", &mut cfg.strict_layout)?;

    let ch = &mut cfg.channel;
    p.set("channel.carrier_ghz", &mut ch.carrier_ghz)?;
    if let Some(mhz) = p.get::<f64>("channel.bandwidth_per_ue_mhz")? {
        ch.bandwidth_per_ue_hz = mhz * 1e6;
    }
    p.set("channel.tx_power_dbm", &mut ch.tx_power_dbm)?;
    p.set("channel.noise_psd_dbm_hz", &mut ch.noise_psd_dbm_hz)?;
    p.set("channel.shadow_sigma_db", &mut ch.shadow_sigma_db)?;
    p.set("channel.rate_model", &mut ch.rate_model)?;
    ch.validate().map_err(|e| {
        let line = p.first_line(p.entries.keys().filter(|k| k.starts_with("channel.")).cloned());
        p.err(line, e.to_string())
    })?;

    if let Some(e) = p.entries.get("sched.kind") {
        cfg.schedulers = parse_scheduler_list(&e.value).map_err(|m| p.err(e.line, format!("sched.kind: {m}")))?;
    }
    if let Some(e) = p.entries.get("sched.refresh") {
        cfg.sched.refresh = match e.value.as_str() {
            "default" => None,
            v => Some(
                v.parse::<RefreshPolicy>()
                    .map_err(|m| p.err(e.line, format!("sched.refresh: {m}")))?,
            ),
        };
    }
    p.set("sched.tau", &mut cfg.sched.tau)?;
    p.set("sched.rg_best_effort_gbps", &mut cfg.sched.best_effort_omega)?;
    let alpha = p.get::<f64>("sched.alpha")?;
    let gamma = p.get::<f64>("sched.gamma")?;
    for kind in &mut cfg.schedulers {
        if let SchedulerKind::ProportionalFair { alpha: a, gamma: g } = kind {
            *a = alpha.unwrap_or(*a);
            *g = gamma.unwrap_or(*g);
        }
    }

    p.set("sim.replications", &mut cfg.n_replications)?;
    p.set("sim.slots", &mut cfg.n_slots)?;
    p.set("sim.demand_period", &mut cfg.demand_period)?;
    p.set("sim.seed", &mut cfg.master_seed)?;

    cfg.validate().map_err(|e| {
        let line = p.first_line(
            p.entries
                .keys()
                .filter(|k| k.starts_with("sim.") || k.starts_with("sched.") || k.starts_with("district."))
                .cloned(),
        );
        p.err(line, e.to_string())
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RateModel;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(parse_config_str("", "t").unwrap(), SimConfig::default());
        assert_eq!(parse_config_str("# nothing\n\n", "t").unwrap(), SimConfig::default());
    }

    #[test]
    fn single_override() {
        let cfg = parse_config_str("sim.slots = 100\n", "t").unwrap();
        assert_eq!(
            cfg,
            SimConfig {
                n_slots: 100,
                ..SimConfig::default()
            }
        );
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let err = parse_config_str("sim.slots = 5\nshed.kind = mt\n", "cfg.txt").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("shed.kind") && msg.starts_with("cfg.txt:2:"), "{msg}");
        assert_eq!(err.exit_code(), 1);
        assert!(parse_config_str("mos.0.beta = 1", "t").is_err());
        assert!(parse_config_str("mos.1.colour = 1", "t").is_err());
    }

    #[test]
    fn malformed_and_invalid_values() {
        assert!(matches!(
            parse_config_str("sim.slots 5", "t"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            parse_config_str("\nsim.slots = five", "t"),
            Err(Error::Config { line: 2, .. })
        ));
        let e = parse_config_str("mos.1.demand_low_gbps = 5\nmos.1.demand_high_gbps = 2", "t").unwrap_err();
        assert!(e.to_string().contains("low >= high"), "{e}");
        assert!(parse_config_str("sim.slots = 1\nsim.slots = 2", "t").is_err());
        assert!(parse_config_str("sched.tau = 1", "t").is_err());
    }

    #[test]
    fn operators_and_schedulers() {
        let text = "mos.count = 4\nmos.4.kind = be\nmos.4.ue_count = 50\nsched.kind = pf, mt\nsched.gamma = 1\n\
                    channel.rate_model = associated\nsched.refresh = per-interval\n";
        let cfg = parse_config_str(text, "t").unwrap();
        assert_eq!(cfg.scenario.mo_count(), 4);
        assert_eq!(cfg.scenario.be_set(), vec![2, 3]);
        assert_eq!(
            cfg.schedulers,
            vec![
                SchedulerKind::ProportionalFair { alpha: 1.0, gamma: 1.0 },
                SchedulerKind::MaxThroughput
            ]
        );
        assert_eq!(cfg.channel.rate_model, RateModel::Associated);
        assert_eq!(cfg.sched.refresh, Some(RefreshPolicy::PerInterval));

        assert!(parse_config_str("mos.count = 4", "t").is_err());
        assert!(parse_config_str("mos.count = 2\nmos.3.beta = 1", "t").is_err());
        assert!(parse_config_str("mos.3.demand_high_gbps = 4", "t").is_err());
    }
}
