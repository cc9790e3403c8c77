//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 for usage, configuration and input-shape errors, 2 for I/O
//! failures. Results go to files and a short table on stdout; diagnostics go
//! to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{parse_config, parse_scheduler_list};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::Aggregate;
use crate::schedulers::{Scheduler, SchedulerKind};
use crate::sim::{run_monte_carlo, run_replication_with, ExecMode, MonteCarloResult, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "slice-sched", version, about = "Shared-EPS eNodeB assignment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ScaleArgs {
    /// Configuration file (key = value); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of Monte-Carlo replications.
    #[arg(long)]
    runs: Option<usize>,
    /// Slots per replication.
    #[arg(long)]
    slots: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Run replications on the calling thread only.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write summary.csv.
    Simulate {
        #[command(flatten)]
        scale: ScaleArgs,
        /// Scheduler name, comma-separated list, or "all".
        #[arg(long)]
        scheduler: Option<String>,
        /// Also write every slot of every replication to slots.csv.
        #[arg(long)]
        dump_slots: bool,
    },
    /// Produce the data behind one of the reference figures.
    Figure {
        preset: Preset,
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// Run one scheduler once on a rate matrix and demand vector.
    Assign {
        /// Rate matrix CSV (mo_id, site_1, ..., site_n).
        #[arg(long)]
        rates: PathBuf,
        /// Demand CSV (mo_id, demand_gbps), "BE" for best-effort.
        #[arg(long)]
        demands: PathBuf,
        #[arg(long)]
        scheduler: String,
        /// Output CSV (enodeb_id, mo_id).
        #[arg(long)]
        out: PathBuf,
        /// Supplies RG β values and static layouts; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Round-robin cursor for the rr scheduler.
        #[arg(long, default_value_t = 0)]
        rr_offset: usize,
    },
    /// Export the eNodeB layout and static labelings.
    Layout {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Figure presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Jain fairness per scheduler.
    Fig4,
    /// Total data rate per scheduler.
    Fig5,
    /// Satisfied-operator ratio per scheduler.
    Fig6,
    /// MMF per-operator rates over time in one replication.
    Fig7,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
        }
    }

    pub fn schedulers(&self) -> Vec<SchedulerKind> {
        match self {
            Preset::Fig7 => vec![SchedulerKind::MaxMinFair],
            _ => SchedulerKind::all().to_vec(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate {
            scale,
            scheduler,
            dump_slots,
        } => cmd_simulate(&scale, scheduler.as_deref(), dump_slots),
        Command::Figure { preset, scale } => cmd_figure(preset, &scale),
        Command::Assign {
            rates,
            demands,
            scheduler,
            out,
            config,
            rr_offset,
        } => cmd_assign(&rates, &demands, &scheduler, &out, config.as_deref(), rr_offset),
        Command::Layout { config, out } => {
            let cfg = load_config(config.as_deref())?;
            io::write_layout(&out, &cfg.layout()?)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(SimConfig::default()),
    }
}

fn scaled_config(scale: &ScaleArgs) -> Result<SimConfig> {
    let mut cfg = load_config(scale.config.as_deref())?;
    if let Some(n) = scale.runs {
        cfg.n_replications = n;
    }
    if let Some(n) = scale.slots {
        cfg.n_slots = n;
    }
    if let Some(s) = scale.seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn mode(scale: &ScaleArgs) -> ExecMode {
    if scale.serial {
        ExecMode::Serial
    } else {
        ExecMode::default()
    }
}

fn print_table(result: &MonteCarloResult) {
    println!(
        "{:<14} {:>16} {:>18} {:>16}",
        "scheduler", "fairness", "rate (Gbps)", "satisfied"
    );
    for (kind, agg) in result.schedulers.iter().zip(&result.aggregates) {
        let sat = agg
            .satisfied
            .map_or_else(|| "n/a".to_string(), |s| format!("{:.3} ± {:.3}", s.mean, s.std));
        println!(
            "{:<14} {:>16} {:>18} {:>16}",
            kind.label(),
            format!("{:.3} ± {:.3}", agg.fairness.mean, agg.fairness.std),
            format!("{:.2} ± {:.2}", agg.rate_gbps.mean, agg.rate_gbps.std),
            sat
        );
    }
}

fn cmd_simulate(scale: &ScaleArgs, scheduler: Option<&str>, dump_slots: bool) -> Result<()> {
    let mut cfg = scaled_config(scale)?;
    if let Some(s) = scheduler {
        let kinds: Vec<SchedulerKind> = parse_scheduler_list(s).map_err(Error::Usage)?;
        // Keep configured PF exponents when PF is selected on the command line.
        let pf = cfg
            .schedulers
            .iter()
            .copied()
            .find(|k| matches!(k, SchedulerKind::ProportionalFair { .. }));
        cfg.schedulers = kinds
            .into_iter()
            .map(|k| match (k, pf) {
                (SchedulerKind::ProportionalFair { .. }, Some(p)) => p,
                _ => k,
            })
            .collect();
    }
    prepare_out_dir(&scale.out_dir)?;
    log::info!(
        "{} replications x {} slots, schedulers {:?}",
        cfg.n_replications,
        cfg.n_slots,
        cfg.schedulers.iter().map(SchedulerKind::label).collect::<Vec<_>>()
    );

    let result = if dump_slots {
        let mut dump = io::DumpWriter::create(&scale.out_dir.join("slots.csv"))?;
        let mut sink = |r: &crate::sim::ReplicationResult| dump.write(r);
        let result = run_monte_carlo(&cfg, mode(scale), Some(&mut sink))?;
        dump.finish()?;
        result
    } else {
        run_monte_carlo(&cfg, mode(scale), None)?
    };
    io::write_summary(&scale.out_dir.join("summary.csv"), &result)?;
    print_table(&result);
    Ok(())
}

fn cmd_figure(preset: Preset, scale: &ScaleArgs) -> Result<()> {
    let mut cfg = scaled_config(scale)?;
    cfg.schedulers = preset.schedulers();
    prepare_out_dir(&scale.out_dir)?;
    let path = scale.out_dir.join(format!("{}.csv", preset.name()));

    if preset == Preset::Fig7 {
        let res = run_replication_with(&cfg, 0, true, |_| {})?;
        return io::write_time_series(&path, &res, 0);
    }

    let result = run_monte_carlo(&cfg, mode(scale), None)?;
    let (metric, pick): (&str, fn(&Aggregate) -> _) = match preset {
        Preset::Fig4 => ("fairness", |a| Some(a.fairness)),
        Preset::Fig5 => ("rate_gbps", |a| Some(a.rate_gbps)),
        _ => ("satisfied", |a| a.satisfied),
    };
    io::write_bar_chart(&path, metric, &result, pick)?;
    print_table(&result);
    Ok(())
}

fn cmd_assign(
    rates: &Path,
    demands: &Path,
    scheduler: &str,
    out: &Path,
    config: Option<&Path>,
    rr_offset: usize,
) -> Result<()> {
    let kind: SchedulerKind = scheduler.parse().map_err(Error::Usage)?;
    let r = io::read_rates(rates)?;
    let omega = io::read_demands(demands)?;
    if omega.len() != r.n_mos() {
        return Err(Error::Dimension(format!(
            "rate matrix is {}x{} (operators x eNodeBs) but the demand vector has {} entries",
            r.n_mos(),
            r.n_sites(),
            omega.len()
        )));
    }
    let cfg = load_config(config)?;
    let matches_scenario = cfg.scenario.mo_count() == r.n_mos();
    let betas = if matches_scenario {
        cfg.scenario.betas()
    } else if kind == SchedulerKind::RateGuarantee {
        return Err(Error::Usage(format!(
            "RG needs a β per operator: pass --config describing {} operators",
            r.n_mos()
        )));
    } else {
        vec![0.0; r.n_mos()]
    };
    let layout = if kind.is_static() {
        let layout = cfg.layout()?;
        if !matches_scenario || layout.n_sites() != r.n_sites() {
            return Err(Error::Dimension(format!(
                "static layout is {}x{} but the rate matrix is {}x{}",
                cfg.scenario.mo_count(),
                layout.n_sites(),
                r.n_mos(),
                r.n_sites()
            )));
        }
        Some(layout)
    } else {
        None
    };

    let mut sched = Scheduler::new(kind, betas, &cfg.sched)?;
    sched.set_rr_offset(rr_offset);
    let phi = sched.decide(&r, &omega, layout.as_ref())?;
    io::write_assignment(out, &phi)?;
    println!("{phi}");
    Ok(())
}
