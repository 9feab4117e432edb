use std::path::Path;
use std::process::{Command, Output};

fn nhep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhep")).args(args).output().expect("spawn nhep")
}

fn ok(args: &[&str]) -> Output {
    let out = nhep(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    ok(&[
        "--out-dir",
        p(dir),
        "synth",
        "--duration-sec",
        "9000",
        "--events",
        "3",
        "--quiet-sec",
        "3000",
        "--seed",
        "4",
    ]);
}

#[test]
fn full_run_writes_every_artifact_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, art) = (tmp.path().join("data"), tmp.path().join("art"));
    synth(&data);
    for f in ["rr.csv", "events.csv", "drift_intervals.csv"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let beats = data.join("rr.csv");
    let events = data.join("events.csv");
    ok(&["--eps", "0.2", "--out-dir", p(&art), "train", "--beats", p(&beats), "--events", p(&events)]);
    for f in ["model.nhep", "scaler.json", "normal_clusters.json"] {
        assert!(art.join(f).exists(), "{f}");
    }

    let mut logs = Vec::new();
    for run in ["det1", "det2"] {
        let dir = tmp.path().join(run);
        ok(&["--eps", "0.2", "--out-dir", p(&dir), "detect", "--beats", p(&beats), "--artifacts", p(&art)]);
        let read = |f: &str| std::fs::read(dir.join(f)).unwrap();
        logs.push((read("windows.csv"), read("alarms.csv"), read("snapshot.csv")));
    }
    assert_eq!(logs[0], logs[1]);

    let det = tmp.path().join("det1");
    let windows = det.join("windows.csv");
    let ev = tmp.path().join("eval");
    ok(&[
        "--eps",
        "0.2",
        "--out-dir",
        p(&ev),
        "eval",
        "--windows",
        p(&windows),
        "--alarms",
        p(&det.join("alarms.csv")),
        "--events",
        p(&events),
        "--artifacts",
        p(&art),
    ]);
    let report = std::fs::read_to_string(ev.join("report.json")).unwrap();
    assert!(report.contains("\"recall\""));
    assert!(ev.join("decisions.csv").exists() && ev.join("baseline_report.json").exists());

    let sw = tmp.path().join("sweep");
    ok(&["--out-dir", p(&sw), "sweep", "--windows", p(&windows), "--events", p(&events), "--ks", "1,3,5"]);
    let csv = std::fs::read_to_string(sw.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "{csv}");
    assert!(sw.join("sweep.json").exists() && sw.join("sweep.svg").exists());

    let pl = tmp.path().join("plot");
    ok(&["--out-dir", p(&pl), "plot", "--windows", p(&windows), "--events", p(&events)]);
    assert!(std::fs::read_to_string(pl.join("timeline.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a);
    synth(&b);
    for f in ["rr.csv", "events.csv", "drift_intervals.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nhep(&["--k", "0", "plot", "--windows", "w.csv", "--events", "e.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = nhep(&["--config", p(&cfg), "plot", "--windows", "w.csv", "--events", "e.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "time_sec\nnot-a-number\n").unwrap();
    let out = nhep(&["--out-dir", p(tmp.path()), "train", "--beats", p(&bad)]);
    assert_eq!(out.status.code(), Some(3));

    let data = tmp.path().join("data");
    synth(&data);
    let art = tmp.path().join("art");
    let beats = data.join("rr.csv");
    ok(&["--eps", "0.2", "--out-dir", p(&art), "train", "--beats", p(&beats)]);
    let out = nhep(&["--eps", "0.3", "--out-dir", p(tmp.path()), "detect", "--beats", p(&beats), "--artifacts", p(&art)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    ok(&["--eps", "0.3", "--force", "--out-dir", p(tmp.path()), "detect", "--beats", p(&beats), "--artifacts", p(&art)]);
}
