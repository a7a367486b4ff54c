use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lemsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lemsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "seed = 3\n[roster]\nhouseholds = 4\nprosumers = [\"H01\", \"H02\"]\nhorizon = 168\n";

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn minimal_run_writes_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", &format!("scenarios = [\"FiT-Fixed\"]\n{SMALL}"));
    let out = dir.path().join("out");
    let o = lemsim(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    assert_eq!(
        listing(&out),
        [
            "daily_avg_FiT-Fixed.csv",
            "duration_FiT-Fixed.csv",
            "manifest.json",
            "selfconsumption.csv",
            "summary.csv"
        ]
    );
    let duration = std::fs::read_to_string(out.join("duration_FiT-Fixed.csv")).unwrap();
    assert!(duration.starts_with("rank,price\n1,"));
    assert_eq!(duration.lines().count(), 169);
    let daily = std::fs::read_to_string(out.join("daily_avg_FiT-Fixed.csv")).unwrap();
    assert!(daily.starts_with("date,avg_price\n2019-01-01,"));
    assert_eq!(daily.lines().count(), 8);
}

#[test]
fn output_dir_resolves_against_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", &format!("output_dir = \"results\"\nscenarios = [\"LCOE-Fixed\"]\n{SMALL}"));
    let o = lemsim(&["run", "--config", config.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("results/summary.csv").exists());
}

#[test]
fn scenario_filter_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", SMALL);
    let run = |out: &str, seed: &str| {
        let out = dir.path().join(out);
        let o = lemsim(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--scenario",
            "LCOE-Fixed",
            "--scenario",
            "basefit-fixed",
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("summary.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "2");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let scenarios: Vec<&str> = a.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(scenarios, ["BaseFiT-Fixed", "LCOE-Fixed"]);
    assert_eq!(listing(&dir.path().join("a")).len(), 7);
}

#[test]
fn dynamic_without_spot_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", &format!("mode = \"dynamic\"\n{SMALL}"));
    let o = lemsim(&["run", "--config", config.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("prices.spot"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn validate_reports_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", "");
    let o = lemsim(&["validate", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("valid"));

    let bad = write(dir.path(), "bad.toml", "[prices]\nlcoe = 40\nfit = -1\n");
    let o = lemsim(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.contains("stability criterion"), "{report}");
    assert!(report.contains("prices.fit"), "{report}");

    let unknown = write(dir.path(), "unknown.toml", "colour = 1\n");
    assert_eq!(lemsim(&["validate", "--config", unknown.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(lemsim(&["validate", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn missing_input_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", "[roster]\npath = \"missing.csv\"\n");
    let o = lemsim(&["run", "--config", config.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
}

#[test]
fn sweep_requires_section() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("o");
    let o = lemsim(&["sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let config = write(
        dir.path(),
        "s.toml",
        &format!("scenarios = [\"LCOE-Fixed\", \"BaseAuction-Fixed\"]\n{SMALL}[sweep]\ntracked_consumer = \"H03\"\ntracked_prosumer = \"H01\"\n"),
    );
    let o = lemsim(&["sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows[0], "scenario,n_prosumers,tracked_consumer_cost,tracked_prosumer_revenue");
    assert_eq!(rows.len(), 1 + 2 * 3);
    assert!(rows[1].starts_with("BaseAuction-Fixed,1,"));
    assert!(rows[6].starts_with("LCOE-Fixed,3,"));
}

#[test]
fn lcoe_subcommand_prints_one_number() {
    let o = lemsim(&["lcoe", "--pv-kwp", "5", "--annual-kwh", "5000", "--opex", "55"]);
    assert_eq!(o.status.code(), Some(0));
    let value: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((value - 81.413_159_065_1).abs() < 1e-9, "{value}");

    let o = lemsim(&["lcoe", "--annual-kwh", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", &format!("mode = \"both\"\n{SMALL}[prices]\nspot = \"synth:1\"\n"));
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_lemsim"))
            .args(["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
            .env("LEMSIM_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        outputs.push(
            listing(&out)
                .into_iter()
                .map(|n| std::fs::read(out.join(&n)).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}
