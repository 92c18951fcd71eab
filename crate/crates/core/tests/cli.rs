use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beam-pinn"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn");
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn train_small(dir: &Path, model: &str, seed: &str) {
    run_ok(bin().args([
        "train", "--problem", "p1", "--model", model, "--seed", seed, "--epochs", "12", "--out",
    ])
    .arg(dir));
}

#[test]
fn fdm_is_not_trainable() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train", "--problem", "p1", "--model", "fdm", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not trainable"));
}

#[test]
fn train_writes_listed_artifacts_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train_small(&a, "apinn", "3");
    train_small(&b, "apinn", "3");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let mut on_disk: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    for f in ["params.json", "train_log.csv", "report.json", "config.json"] {
        assert!(listed.iter().any(|l| l == f), "{f}");
    }
    let log_a = std::fs::read(a.join("train_log.csv")).unwrap();
    assert_eq!(log_a, std::fs::read(b.join("train_log.csv")).unwrap());
    let text = String::from_utf8(log_a).unwrap();
    assert!(text.starts_with("epoch,l_f,l_b,l_0,l_a,total\n"));
    assert_eq!(text.lines().count(), 13);
    let manifest_b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["input_hash"], manifest_b["input_hash"]);
}

#[test]
fn evaluate_table_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train_small(&run, "sann", "0");
    let ev = dir.path().join("eval");
    let stdout = run_ok(
        bin()
            .args(["evaluate", "--problem", "p1", "--model", "exact", "--model", "fdm", "--model"])
            .arg(format!("sann={}", run.display()))
            .arg("--out")
            .arg(&ev),
    );
    assert!(stdout.contains("exact: E2 0e0 E3 0e0 E4 0e0"), "{stdout}");
    let summary = std::fs::read_to_string(ev.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows[0], "model,E2,E3,E4");
    assert_eq!(rows.len(), 4);
    assert!(ev.join("e1_sann.csv").exists());

    let tab = dir.path().join("tab");
    let table = run_ok(
        bin()
            .args(["table", "--problem", "p1", "--t", "0.9", "--model", "fdm", "--out"])
            .arg(&tab),
    );
    let line = table.lines().find(|l| l.starts_with("0.10,")).unwrap();
    assert!(line.starts_with("0.10,-0.264707,"), "{line}");
    let out = bin()
        .args(["table", "--problem", "p1", "--t", "1.5", "--model", "fdm", "--out"])
        .arg(&tab)
        .output()
        .unwrap();
    assert!(!out.status.success());

    let fields = dir.path().join("fields");
    run_ok(
        bin()
            .args(["export-field", "--problem", "p1", "--model", "exact", "--nx", "7", "--nt", "5", "--out"])
            .arg(&fields),
    );
    let gt = std::fs::read_to_string(fields.join("field_gt.csv")).unwrap();
    let lines: Vec<&str> = gt.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.split(',').count() == 7));
    for row in &lines[1..] {
        let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(v[0].abs() < 1e-12 && v[6].abs() < 1e-12);
    }
    let e1 = std::fs::read_to_string(fields.join("field_e1_exact.csv")).unwrap();
    assert!(e1
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').map(|s| s.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .all(|v| v == 0.0));
}

#[test]
fn config_file_round_trips_through_train() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = beam_pinn::cli::ExperimentConfig::defaults(
        beam_pinn::problems::ProblemId::P2,
        beam_pinn::network::ModelKind::Pinn,
    );
    c.schedule.total_epochs = 5;
    c.mlp = beam_pinn::network::MlpConfig::new(1, 4, 1);
    let path = dir.path().join("config.json");
    std::fs::write(&path, c.to_json().unwrap()).unwrap();
    let out = dir.path().join("run");
    run_ok(bin().arg("train").arg("--config").arg(&path).arg("--out").arg(&out));
    let written = beam_pinn::cli::ExperimentConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(written.mlp, c.mlp);
    assert_eq!(written.problem, c.problem);
}

#[test]
fn quick_reproduce_emits_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep");
    let stdout = run_ok(
        bin()
            .args(["reproduce", "--seeds", "0", "--epochs", "3", "--out"])
            .arg(&out),
    );
    assert!(stdout.contains("PASS GT column p1 t=0.5"), "{stdout}");
    let tables = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            let n = e.as_ref().unwrap().file_name().into_string().unwrap();
            n.starts_with("table_") || n.starts_with("baseline_errors_")
        })
        .count();
    assert_eq!(tables, 9);
    for f in ["metrics.csv", "losses.csv", "sheet.csv"] {
        assert!(out.join(f).exists());
    }
    let sheet = std::fs::read_to_string(out.join("sheet.csv")).unwrap();
    assert_eq!(sheet.lines().filter(|l| l.starts_with("GT column") && l.contains(",PASS,")).count(), 6);
}
