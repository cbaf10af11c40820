//! The command-line tool: outputs and exit codes.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stationbus");

const SMALL: &str = "
[scenario]
name = cli-small
duration = 2s
seed = 4

[switch sw]
processing_latency = 3us

[ied pub]
mac = 02:00:00:00:00:01

[ied sub]
mac = 02:00:00:00:00:02

[link pub-sw]
a = pub
b = sw

[link sw-sub]
a = sw
b = sub

[tap tap-pub]
link = pub-sw
near = pub

[tap tap-sub]
link = sw-sub
near = sub

[goose gcb]
source = pub
frame_bytes = 162
event_period = 500ms

[analysis]
publisher = pub
pub_capture = tap-pub
sub_capture = tap-sub
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_names_the_bundled_scenarios() {
    let o = run(&["list"]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["baseline_idle", "baseline_30pct", "load_50pct", "sv_burst"] {
        assert!(stdout(&o).contains(name), "{name}");
    }
}

#[test]
fn run_writes_everything_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "small.scn", SMALL);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let o = run(&["run", &scn, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("violations(>4ms)=0"));
        assert!(stdout(&o).contains("min_us=15.960"), "{}", stdout(&o));
    }
    for f in ["tap-pub.pcap", "tap-sub.pcap", "delays.csv", "report.txt", "manifest.json"] {
        let a = std::fs::read(out1.join(f)).unwrap();
        let b = std::fs::read(out2.join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let csv = std::fs::read_to_string(out1.join("delays.csv")).unwrap();
    assert!(csv.starts_with("src_mac,st_num,sq_num,t_pub_ns,t_sub_ns,delay_ns\n"));

    // a different seed is recorded in the manifest
    let out3 = dir.path().join("c");
    let o = run(&["run", &scn, "--out", out3.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out3.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 99);

    // the standalone analyzer agrees with the run
    let o = run(&[
        "analyze",
        out1.join("tap-pub.pcap").to_str().unwrap(),
        out1.join("tap-sub.pcap").to_str().unwrap(),
        "--src",
        "02:00:00:00:00:01",
        "--csv",
        dir.path().join("again.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("min_us=15.960"));
    assert_eq!(std::fs::read_to_string(dir.path().join("again.csv")).unwrap(), csv);

    // nothing from this source: zero matches
    let o = run(&[
        "analyze",
        out1.join("tap-pub.pcap").to_str().unwrap(),
        out1.join("tap-sub.pcap").to_str().unwrap(),
        "--src",
        "02:00:00:00:00:77",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("status=no matched frames"));
}

#[test]
fn scenario_errors_exit_2_with_locations() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("event_period = 500ms", "event_period = 500ms\nflavour = mint");
    let scn = write(dir.path(), "bad.scn", &bad);
    let o = run(&["run", &scn, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 36: [goose gcb] flavour: unknown key"), "{}", stderr(&o));
    assert!(!dir.path().join("o").exists(), "nothing written for a bad scenario");

    let o = run(&["check", dir.path().join("missing.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "small.scn", SMALL);
    let blocker = write(dir.path(), "file", "not a directory");
    let o = run(&["run", &scn, "--out", &format!("{blocker}/out")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not writable"), "{}", stderr(&o));

    let junk = write(dir.path(), "junk.pcap", "definitely not a capture");
    let o = run(&["analyze", &junk, &junk, "--src", "02:00:00:00:00:01"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_matches_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("publisher = pub", "publisher = sub");
    let scn = write(dir.path(), "nomatch.scn", &text);
    let o = run(&["run", &scn, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("status=no matched frames"));
}

#[test]
fn sv_offered_load_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}\n[ied mu]\n[link mu-sw]\na = mu\nb = sw\n[sv stream]\nsource = mu\nsamples_per_cycle = 256\nfrequency = 50\n"
    );
    let scn = write(dir.path(), "sv.scn", &text);
    let o = run(&["run", &scn, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("sv_offered_mbps=23.552"), "{}", stdout(&o));
}
