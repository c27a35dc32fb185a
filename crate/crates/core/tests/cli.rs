use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use htl_edge::energy::EnergyLedger;
use htl_edge::experiment::{list_presets, ExperimentConfig, Summary};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_htl-edge"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(total_mj: f64, f1: f64) -> Summary {
    Summary {
        preset: None,
        protocol: "shtl".into(),
        learning_tech: "4g".into(),
        seed: 1,
        replications: 10,
        windows: 100,
        convergence_f1: Some(f1),
        convergence_f1_ci: None,
        final_f1: f1,
        total_mj,
        energy: EnergyLedger::default(),
        collection_mj: total_mj,
        learning_mj: 0.0,
        mean_mules: 7.0,
        mean_nodes_before: 7.0,
        mean_nodes_after: 7.0,
        mean_model_transfers: 6.0,
        f1_series: vec![f1; 100],
        gain_vs_baseline_pct: None,
        accuracy_loss_pp: None,
    }
}

fn write_summary(path: &Path, s: &Summary) {
    fs::write(path, serde_json::to_string(s).unwrap()).unwrap();
}

#[test]
fn list_presets_prints_every_configuration() {
    let out = bin().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, list_presets());
    for name in ["edge_only", "scenario1_15pct", "complexity_shtl_n2", "scenario3_a2a_wifi_aggr"] {
        assert!(lines.contains(&name), "{name} missing");
    }
    for name in &lines {
        ExperimentConfig::from_preset(name)
            .and_then(|c| c.validate())
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn compare_reports_gains_and_losses() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    write_summary(&a, &summary(34477.0, 0.63));
    write_summary(&b, &summary(3749.0, 0.61));
    write_summary(&c, &summary(2066.0, 0.60));

    let out = bin().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("gain 89.1%"), "{}", stdout(&out));
    assert!(stdout(&out).contains("accuracy loss 2.00 pp"), "{}", stdout(&out));

    let out = bin().arg("compare").arg(&a).arg(&c).output().unwrap();
    assert!(stdout(&out).contains("gain 94.0%"), "{}", stdout(&out));

    let out = bin().arg("compare").arg(&a).arg(&a).output().unwrap();
    assert!(stdout(&out).contains("gain 0.0%"));
    assert!(stdout(&out).contains("accuracy loss 0.00 pp"));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario.lamda = 7\n").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("scenario.lamda"), "{}", stderr(&out));

    let out = bin()
        .args(["run", "--preset", "no_such_preset", "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    fs::write(&cfg, "dataset.path = \"/nonexistent/covtype.data\"\n").unwrap();
    let out = bin()
        .args(["run", "--preset", "edge_only", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    fs::write(&cfg, "seed = [\n").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().arg("compare").arg(dir.path().join("missing.json")).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn tiny_run(dir: &Path, out: &str) -> Output {
    let cfg = dir.join("tiny.toml");
    fs::write(
        &cfg,
        "dataset.source = \"synthetic\"\nscenario.windows = 4\nscenario.obs_per_window = 60\n\
         scenario.aggregation = true\nlearning.epochs = 2\noutput.raw_windows = true\n",
    )
    .unwrap();
    bin()
        .args(["run", "--preset", "scenario2_a2a_wifi", "--seed", "9", "--replications", "2", "--emit-messages"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .output()
        .unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = tiny_run(dir.path(), "a");
    assert!(first.status.success(), "{}", stderr(&first));
    let second = tiny_run(dir.path(), "b");
    assert!(second.status.success());

    let mut names: Vec<String> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "messages_r0.csv",
            "messages_r1.csv",
            "summary.json",
            "windows.csv",
            "windows_r0.csv",
            "windows_r1.csv"
        ]
    );
    for n in &names {
        let a = fs::read(dir.path().join("a").join(n)).unwrap();
        let b = fs::read(dir.path().join("b").join(n)).unwrap();
        assert!(a == b, "{n} differs between runs");
    }

    let windows = fs::read_to_string(dir.path().join("a/windows.csv")).unwrap();
    assert_eq!(windows.lines().count(), 1 + 4);
    let s: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(s.replications, 2);
    assert_eq!(s.protocol, "a2ahtl");
    assert!(s.mean_nodes_after <= s.mean_nodes_before);
}

#[test]
fn baseline_gain_is_written_to_summary() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.json");
    write_summary(&base, &summary(34477.0, 0.63));
    let cfg = dir.path().join("tiny.toml");
    fs::write(
        &cfg,
        "dataset.source = \"synthetic\"\nscenario.windows = 2\nscenario.obs_per_window = 50\nlearning.epochs = 1\nreplications = 1\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--preset", "scenario3_shtl_4g", "--config"])
        .arg(&cfg)
        .arg("--baseline")
        .arg(&base)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let s: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    let g = s.gain_vs_baseline_pct.unwrap();
    assert!((g - (34477.0 - s.total_mj) / 34477.0 * 100.0).abs() < 1e-9);
    // two windows are shorter than the convergence interval
    assert!(s.accuracy_loss_pp.is_none());
}
