use super::*;
use crate::netsim::TrafficKind;

const SMALL: &str = "
[scenario]
name = small
duration = 3s
seed = 9

[switch sw]
processing_latency = 5us

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

[tap tap-a]
link = pub-sw
near = pub

[tap tap-b]
link = sw-sub
near = sub

[goose gcb]
source = pub
event_period = 1s

[analysis]
publisher = pub
pub_capture = tap-a
sub_capture = tap-b
load_link = sw-sub
load_from = sw
";

fn errors(text: &str) -> Vec<String> {
    parse_scenario_str(text)
        .expect_err("should be rejected")
        .iter()
        .map(ToString::to_string)
        .collect()
}

#[test]
fn bundled_scenarios_parse() {
    for (name, text) in BUNDLED {
        let s = parse_scenario_str(text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert_eq!(&s.name, name);
        assert_eq!(s.duration_ns, DEFAULT_DURATION_NS);
        assert!(s.analysis.is_some());
    }
}

#[test]
fn small_scenario_resolves() {
    let s = parse_scenario_str(SMALL).unwrap();
    assert_eq!(s.seed, 9);
    assert_eq!(s.topology.nodes.len(), 3);
    assert_eq!(s.topology.taps.len(), 2);
    let TrafficKind::Goose(g) = &s.traffic[0].kind else {
        panic!("goose expected")
    };
    assert_eq!(g.event_times_ns, vec![0, 1_000_000_000, 2_000_000_000]);
    assert_eq!(g.identity.go_id, "gcb");
}

#[test]
fn all_errors_are_collected_with_lines() {
    let text = SMALL
        .replace("processing_latency = 5us", "processing_latency = 5 parsecs\ncolour = blue")
        .replace("a = sw\n", "a = nowhere\n");
    let errs = errors(&text);
    assert_eq!(errs.len(), 3, "{errs:?}");
    assert!(errs[0].starts_with("line 8: [switch sw] processing_latency:"), "{errs:?}");
    assert!(errs[1].starts_with("line 9: [switch sw] colour: unknown key"), "{errs:?}");
    assert!(errs[2].contains("[link sw-sub] a: no node named \"nowhere\""), "{errs:?}");
}

#[test]
fn out_of_range_load_names_the_field() {
    let text = format!(
        "{SMALL}\n[generator g]\n[link g-sw]\na = g\nb = sw\n[background bg]\nsource = g\ndst = sub\nload = 1.5\n"
    );
    let errs = errors(&text);
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errs[0].contains("[background bg] load: 1.5 outside [0, 1)"), "{errs:?}");
}

#[test]
fn structural_errors() {
    assert!(errors("key = 1\n")[0].contains("outside of any section"));
    assert!(errors("[scenario]\nnonsense\n")[0].contains("expected key = value"));
    assert!(errors("[router r]\n")[0].contains("unknown section kind"));
    assert!(errors("[ied]\n")[0].contains("needs a name"));
    let dup = errors(&SMALL.replace("seed = 9", "seed = 9\nseed = 10"));
    assert!(dup[0].contains("seed: given more than once"), "{dup:?}");
}

#[test]
fn model_errors_are_reported() {
    // an end station with two ports
    let text = format!("{SMALL}\n[link pub-sub]\na = pub\nb = sub\n");
    let errs = errors(&text);
    assert!(errs.iter().any(|e| e.contains("pub")), "{errs:?}");
}

#[test]
fn missing_capture_in_analysis() {
    let errs = errors(&SMALL.replace("sub_capture = tap-b", "sub_capture = tap-z"));
    assert!(errs[0].contains("sub_capture: no tap or span named \"tap-z\""), "{errs:?}");
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let s = parse_scenario_str(SMALL).unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let out = run_scenario(&s, &opts).unwrap();
    let names: Vec<&str> = out.manifest.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["delays.csv", "report.txt", "tap-a.pcap", "tap-b.pcap"]);
    for f in ["delays.csv", "report.txt", "tap-a.pcap", "tap-b.pcap", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let h = &out.manifest.headline;
    assert!(h.matched > 0);
    // 12.96 us on the wire twice... one hop: store, latency, forward
    assert!(h.mean_delay_us.unwrap() > 12.0 && h.mean_delay_us.unwrap() < 25.0, "{h:?}");
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("scenario=small\nseed=9\n"));
    let again = run_scenario(&s, &opts).unwrap();
    assert_eq!(again.manifest, out.manifest);
}

#[test]
fn unwritable_output_fails_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, b"x").unwrap();
    let s = parse_scenario_str(SMALL).unwrap();
    let opts = RunOptions {
        out_dir: Some(file.join("sub")),
        ..Default::default()
    };
    assert!(matches!(run_scenario(&s, &opts), Err(RunError::Unwritable { .. })));
}
