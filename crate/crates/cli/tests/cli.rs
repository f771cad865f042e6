use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vecset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecset"))
        .args(args)
        .env_remove("VECSET_SEED")
        .env_remove("VECSET_OUT")
        .env_remove("VECSET_CONFIG")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quick_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{"mh": {{"n_iterations": 600, "burn_in": 300}}, "grid": {{"resolution": 30}}{extra}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn gen_synthetic_writes_twelve_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("syn");
    let o = vecset(&["gen-synthetic", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csvs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    assert_eq!(csvs.len(), 12);
    for p in &csvs {
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), 1 + 10 * 200, "{}", p.display());
    }
    assert!(out.join("synthetic_manifest.json").exists());
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "");
    let out = dir.path().join("run");
    let run = || {
        let o = vecset(&["--config", s(&cfg), "--out", s(&out), "pipeline"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("manifest.json")).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);

    let manifest: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a["path"] == "projection/trajectory.csv"));
    assert!(artifacts.iter().any(|a| a["path"] == "modes.csv"));
    let modes = std::fs::read_to_string(out.join("modes.csv")).unwrap();
    assert_eq!(modes.lines().count(), 1 + 120);

    let other = dir.path().join("other");
    let o = vecset(&["--config", s(&cfg), "--out", s(&other), "--seed", "7", "pipeline"]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(other.join("manifest.json")).unwrap(), first);
}

#[test]
fn fit_project_heatmap_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "");
    let syn = dir.path().join("syn");
    assert!(vecset(&["gen-synthetic", "--out", s(&syn)]).status.success());
    let fits = dir.path().join("fits");
    let o = vecset(&[
        "--config",
        s(&cfg),
        "--k",
        "12",
        "--out",
        s(&fits),
        "fit",
        s(&syn.join("Shift_1.csv")),
        s(&syn.join("Converge_1.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let basis: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fits.join("basis.json")).unwrap()).unwrap();
    assert_eq!(basis["k"], 12);

    let proj = dir.path().join("proj");
    let o = vecset(&[
        "--config",
        s(&cfg),
        "--axes",
        "1,3",
        "--axis-sweep",
        "--out",
        s(&proj),
        "project",
        s(&fits.join("Shift_1.fit.json")),
        s(&fits.join("Converge_1.fit.json")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(proj.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "instance,time,pc1,pc3");
    assert_eq!(traj.lines().count(), 1 + 20);
    assert!(proj.join("sweep/sweep_index.csv").exists());

    let heat = dir.path().join("heat");
    let o = vecset(&[
        "--config",
        s(&cfg),
        "--out",
        s(&heat),
        "heatmap",
        "--fit",
        s(&fits.join("Converge_1.fit.json")),
        "--step",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = std::fs::read_to_string(heat.join("Converge_1_4.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 30 * 30);
    let pgm = std::fs::read(heat.join("Converge_1_4.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n30 30\n255\n"));
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");

    let o = vecset(&["--out", s(&out), "fit", s(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(5));

    let o = vecset(&["--k", "0", "--out", s(&out), "gen-synthetic"]);
    assert_eq!(o.status.code(), Some(2));

    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"unknown_key": 1}"#).unwrap();
    let o = vecset(&["--config", s(&bad_cfg), "gen-synthetic"]);
    assert_eq!(o.status.code(), Some(2));

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "instance,time,x,y\na,1,0.5\n").unwrap();
    let o = vecset(&["--out", s(&out), "fit", s(&ragged)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let nan = dir.path().join("nan.csv");
    std::fs::write(&nan, "instance,time,x,y\na,1,NaN,0\na,1,1,1\n").unwrap();
    let o = vecset(&["--out", s(&out), "fit", s(&nan)]);
    assert!(matches!(o.status.code(), Some(3) | Some(4)), "{:?}", o.status);
}

#[test]
fn heatmap_rejects_unknown_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), "");
    let syn = dir.path().join("syn");
    assert!(vecset(&["gen-synthetic", "--out", s(&syn)]).status.success());
    let fits = dir.path().join("fits");
    assert!(vecset(&["--config", s(&cfg), "--out", s(&fits), "fit", s(&syn.join("Shift_2.csv"))])
        .status
        .success());
    let o = vecset(&[
        "--out",
        s(&dir.path().join("h")),
        "heatmap",
        "--fit",
        s(&fits.join("Shift_2.fit.json")),
        "--step",
        "42",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("42"));
}

const CRIME: &str = "\
ID,Date,Primary Type,Latitude,Longitude
1,01/05/2001 10:00:00 PM,NARCOTICS,41.80,-87.60
2,02/11/2001 01:30:00 AM,THEFT,41.85,-87.65
3,03/15/2001 11:15:00 AM,NARCOTICS,41.90,-87.70
4,04/20/2001 09:45:00 PM,NARCOTICS,,-87.62
5,05/02/2001 03:00:00 PM,BATTERY,41.75,-87.58
6,06/18/2004 07:20:00 AM,NARCOTICS,41.95,-87.66
7,07/04/2004 12:00:00 PM,THEFT,41.88,-87.63
8,08/09/2004 06:10:00 PM,BATTERY,41.79,-87.61
9,09/30/2004 02:40:00 AM,THEFT,41.83,-87.69
10,10/12/2004 08:05:00 PM,BATTERY,41.91,-87.64
";

#[test]
fn ingest_crime_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("crimes.csv");
    std::fs::write(&input, CRIME).unwrap();
    let out = dir.path().join("crime");
    let o = vecset(&[
        "--out",
        s(&out),
        "ingest-crime",
        "--input",
        s(&input),
        "--types",
        "narcotics,theft",
        "--years",
        "2001:2004:3",
        "--per-year",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let narcotics = std::fs::read_to_string(out.join("narcotics.csv")).unwrap();
    let times: Vec<&str> = narcotics.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(times, ["2001", "2004"]);
    assert!(out.join("narcotics.norm.json").exists());
    assert!(out.join("theft.csv").exists());

    // Two usable narcotics rows in 2001 cannot supply three samples.
    let o = vecset(&[
        "--out",
        s(&out),
        "ingest-crime",
        "--input",
        s(&input),
        "--types",
        "NARCOTICS",
        "--years",
        "2001:2001",
        "--per-year",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn ingest_embeddings_reduces_each_period() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, period) in ["1990", "2000", "2010"].iter().enumerate() {
        let path = dir.path().join(format!("{period}.csv"));
        let rows: Vec<String> = (0..6)
            .map(|r| {
                (0..5)
                    .map(|c| format!("{}", ((r * 7 + c * 3 + i) % 11) as f64 * 0.1))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        std::fs::write(&path, rows.join("\n") + "\n").unwrap();
        files.push(path);
    }
    let out = dir.path().join("emb");
    let mut args = vec!["--out", s(&out), "ingest-embeddings", "--word", "cell"];
    args.extend(files.iter().map(|p| s(p)));
    let o = vecset(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("cell.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "instance,time,x,y");
    assert_eq!(text.lines().count(), 1 + 18);
    assert!(text.contains("cell,2010,"));
}
