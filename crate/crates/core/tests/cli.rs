use std::path::Path;
use std::process::{Command, Output};

use slice_sched::io;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_slice-sched"));
    c.env_remove("SLICE_SCHED_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn data_rows(path: &Path) -> usize {
    read(path).lines().count() - 1
}

fn assign(dir: &Path, rates: &str, demands: &str, scheduler: &str, extra: &[&str]) -> Output {
    let (r, d, o) = (dir.join("r.csv"), dir.join("d.csv"), dir.join("phi.csv"));
    write(&r, rates);
    write(&d, demands);
    let mut args = vec![
        "assign",
        "--rates",
        r.to_str().unwrap(),
        "--demands",
        d.to_str().unwrap(),
        "--scheduler",
        scheduler,
        "--out",
        o.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn owners(dir: &Path) -> Vec<String> {
    read(&dir.join("phi.csv"))
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect()
}

#[test]
fn simulate_smoke_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run_into = |sub: &str| {
        let out = dir.path().join(sub);
        let o = run(&[
            "simulate",
            "--scheduler",
            "mmf",
            "--runs",
            "2",
            "--slots",
            "10",
            "--seed",
            "7",
            "--dump-slots",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run_into("a"), run_into("b"));
    assert_eq!(data_rows(&a.join("summary.csv")), 1);
    assert_eq!(
        std::fs::read(a.join("summary.csv")).unwrap(),
        std::fs::read(b.join("summary.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("slots.csv")).unwrap(),
        std::fs::read(b.join("slots.csv")).unwrap()
    );

    let rows = io::read_summary(&a.join("summary.csv")).unwrap();
    assert_eq!(rows[0].scheduler, "MMF");
    let dump = io::read_dump(&a.join("slots.csv")).unwrap();
    assert_eq!(dump.len(), 2 * 10 * 3);
    assert!(dump.iter().any(|r| r.demand_gbps.is_none()));
}

#[test]
fn simulate_all_lists_every_scheduler() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--scheduler",
        "all",
        "--runs",
        "1",
        "--slots",
        "5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let names: Vec<String> = io::read_summary(&dir.path().join("summary.csv"))
        .unwrap()
        .into_iter()
        .map(|r| r.scheduler)
        .collect();
    assert_eq!(
        names,
        ["RR", "BET", "MT", "PF", "MMF", "RG", "static-demand", "static-ue"]
    );
}

#[test]
fn figure_presets_have_the_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(run(&["figure", "fig4", "--runs", "2", "--slots", "5", "--out-dir", d])
        .status
        .success());
    assert_eq!(data_rows(&dir.path().join("fig4.csv")), 8);
    assert!(
        run(&["figure", "fig7", "--slots", "1000", "--seed", "3", "--out-dir", d])
            .status
            .success()
    );
    let fig7 = dir.path().join("fig7.csv");
    assert_eq!(data_rows(&fig7), 3000);
    assert!(read(&fig7).starts_with("slot,mo,rate_gbps,demand_gbps\n"));
}

#[test]
fn assign_examples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let o = assign(
        d,
        "mo_id,site_1,site_2\n1,3,1\n2,2,5\n",
        "mo_id,demand_gbps\n1,BE\n2,BE\n",
        "mt",
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(owners(d), ["1", "2"]);
    assert!(read(&d.join("phi.csv")).starts_with("enodeb_id,mo_id\n"));

    let o = assign(
        d,
        "mo_id,site_1,site_2,site_3,site_4\n1,1,1,1,1\n2,1,1,1,1\n",
        "mo_id,demand_gbps\n1,BE\n2,BE\n",
        "rr",
        &[],
    );
    assert!(o.status.success());
    assert_eq!(owners(d), ["1", "2", "1", "2"]);

    let o = assign(
        d,
        "mo_id,site_1,site_2\n1,2,2\n2,2,2\n3,2,2\n",
        "mo_id,demand_gbps\n1,3\n2,1\n3,BE\n",
        "mmf",
        &[],
    );
    assert!(o.status.success());
    assert_eq!(owners(d), ["2", "1"]);
    assert_eq!(io::read_assignment(&d.join("phi.csv")).unwrap().to_string(), "[2 1]");
}

#[test]
fn assign_dimension_mismatch_exits_one_with_both_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let o = assign(
        dir.path(),
        "mo_id,site_1,site_2\n1,3,1\n2,2,5\n",
        "mo_id,demand_gbps\n1,BE\n2,BE\n3,1\n",
        "mt",
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2x2") && err.contains("3 entries"), "{err}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let missing = d.join("nope.cfg");
    let o = run(&[
        "simulate",
        "--config",
        missing.to_str().unwrap(),
        "--out-dir",
        d.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = d.join("bad.cfg");
    write(&cfg, "sim.slots = 100\nshed.kind = mt\n");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        d.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("shed.kind") && err.contains('2'), "{err}");

    assert_eq!(run(&["simulate", "--scheduler", "nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));

    let o = bin()
        .env("SLICE_SCHED_THREADS", "zero")
        .args([
            "simulate",
            "--runs",
            "1",
            "--slots",
            "2",
            "--out-dir",
            d.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = bin()
        .env("SLICE_SCHED_THREADS", "1")
        .args([
            "simulate",
            "--runs",
            "2",
            "--slots",
            "2",
            "--out-dir",
            d.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn layout_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("layout.csv");
    assert!(run(&["layout", "--out", out.to_str().unwrap()]).status.success());
    assert!(read(&out).starts_with("site_id,x_km,y_km,label_demand,label_ue\n"));
    let rows = io::read_layout(&out).unwrap();
    assert_eq!(rows.len(), 31);

    let copy = dir.path().join("copy.csv");
    let layout = slice_sched::sim::SimConfig::default().layout().unwrap();
    io::write_layout(&copy, &layout).unwrap();
    assert_eq!(read(&out), read(&copy));
}
