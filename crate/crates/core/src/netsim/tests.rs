use super::*;
use crate::codec::{decode_goose, decode_header, MacAddress, ETHERTYPE_GOOSE};
use crate::engine::{RetransmissionProfile, TatlPolicy};

const MS: u64 = 1_000_000;

fn mac(last: u8) -> MacAddress {
    MacAddress([0x02, 0, 0, 0, 0, last])
}

struct Layout {
    topo: Topology,
    publisher: NodeId,
    switch: NodeId,
    gens: Vec<NodeId>,
}

/// Publisher and subscriber on one switch, TAP-A on the publisher link and
/// TAP-B on the subscriber link, plus `gens` background generators.
fn layout(latency_ns: u64, gens: usize) -> Layout {
    let mut t = Topology::new();
    let p = t.add_node("pub", mac(1), NodeKind::Ied);
    let s = t.add_node("sub", mac(2), NodeKind::Ied);
    let sw = t.add_node(
        "sw",
        mac(3),
        NodeKind::Switch(SwitchConfig {
            processing_latency_ns: latency_ns,
            ..Default::default()
        }),
    );
    let la = t.connect(p, sw);
    let lb = t.connect(sw, s);
    t.add_tap("tap-a", la);
    t.add_tap("tap-b", lb);
    let gens = (0..gens)
        .map(|i| {
            let g = t.add_node(format!("gen{i}"), mac(10 + i as u8), NodeKind::TrafficGen);
            t.connect(g, sw);
            g
        })
        .collect();
    Layout {
        topo: t,
        publisher: p,
        switch: sw,
        gens,
    }
}

fn goose(l: &Layout, frame_bytes: usize, events: Vec<u64>) -> TrafficSpec {
    let mut g = GooseTraffic::new("IED1", "gcb01");
    g.frame_bytes = Some(frame_bytes);
    g.profile = RetransmissionProfile::default()
        .with_tatl(TatlPolicy::FixedMs(2000))
        .unwrap();
    g.event_times_ns = events;
    TrafficSpec {
        name: "goose".into(),
        source: l.publisher,
        start_ns: 0,
        kind: TrafficKind::Goose(g),
    }
}

fn bg(name: &str, node: NodeId, load: f64, bytes: usize, priority: u8) -> TrafficSpec {
    let mut b = BackgroundTraffic::new(load, bytes, mac(2));
    b.priority = priority;
    TrafficSpec {
        name: name.into(),
        source: node,
        start_ns: 0,
        kind: TrafficKind::Background(b),
    }
}

fn first_delta(r: &SimulationResult) -> u64 {
    let a = &r.captures["tap-a"][0];
    let b = &r.captures["tap-b"][0];
    assert_eq!(a.data(), b.data());
    b.timestamp_ns - a.timestamp_ns
}

#[test]
fn one_store_and_forward_of_162_bytes() {
    let l = layout(0, 0);
    let traffic = vec![goose(&l, 162, vec![MS])];
    let r = simulate(l.topo, traffic, 1, SimConfig::default(), 2 * MS).unwrap();
    assert_eq!(r.captures["tap-a"][0].orig_len, 162);
    assert_eq!(first_delta(&r), 12_960);
}

#[test]
fn one_store_and_forward_of_178_bytes() {
    let l = layout(0, 0);
    let traffic = vec![goose(&l, 178, vec![MS])];
    let r = simulate(l.topo, traffic, 1, SimConfig::default(), 2 * MS).unwrap();
    assert_eq!(first_delta(&r), 14_240);
}

#[test]
fn processing_latency_adds() {
    let l = layout(5_000, 0);
    let traffic = vec![goose(&l, 162, vec![MS])];
    let r = simulate(l.topo, traffic, 1, SimConfig::default(), 2 * MS).unwrap();
    assert_eq!(first_delta(&r), 17_960);
}

#[test]
fn sv_arithmetic() {
    assert_eq!(sv_bandwidth(256, 50, 230).unwrap(), 23_552_000);
    assert_eq!(sv_frame_rate(256, 50).unwrap(), 12_800);
    assert_eq!(sv_bandwidth(1, 1, 1).unwrap(), 8);
    assert!(matches!(sv_bandwidth(0, 50, 230), Err(SimError::Domain(_))));
    assert!(sv_bandwidth(256, 0, 230).is_err());
}

#[test]
fn sv_stream_sends_its_sample_rate() {
    let mut l = layout(0, 0);
    let mu = l.topo.add_node("mu", mac(20), NodeKind::Ied);
    l.topo.connect(mu, l.switch);
    let sv = SvTraffic::new("MU01", 256, 50);
    let traffic = vec![TrafficSpec {
        name: "sv".into(),
        source: mu,
        start_ns: 0,
        kind: TrafficKind::Sv(sv),
    }];
    let r = simulate(l.topo, traffic, 1, SimConfig::default(), 999_999_999).unwrap();
    assert_eq!(r.counter("source.sv.frames"), 12_800);
    assert_eq!(r.counter("source.sv.bits"), 23_552_000);
}

#[test]
fn identical_inputs_identical_results() {
    let run = || {
        let l = layout(2_000, 2);
        let mut a = bg("a", l.gens[0], 0.3, 800, 0);
        if let TrafficKind::Background(b) = &mut a.kind {
            b.law = ArrivalLaw::Poisson;
        }
        let traffic = vec![goose(&l, 162, vec![MS, 40 * MS]), a, bg("b", l.gens[1], 0.2, 300, 4)];
        simulate(l.topo, traffic, 42, SimConfig::default(), 200 * MS).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn frames_are_conserved_per_link() {
    let l = layout(3_000, 2);
    let traffic = vec![
        goose(&l, 162, vec![MS]),
        bg("a", l.gens[0], 0.6, 1000, 0),
        bg("b", l.gens[1], 0.6, 1000, 0),
    ];
    let mut sim = Simulation::build(l.topo, traffic, 9, SimConfig::default()).unwrap();
    sim.run(50 * MS + 123);
    let r = sim.into_result();
    let mut in_flight_total = 0;
    for key in r.counters.keys().filter(|k| k.ends_with(".offered_frames")) {
        let p = key.trim_end_matches(".offered_frames");
        let get = |s: &str| r.counter(&format!("{p}.{s}"));
        assert_eq!(
            get("offered_frames"),
            get("delivered_frames")
                + get("loss_drops")
                + get("queue_drops")
                + get("span_drops")
                + get("in_flight"),
            "{p}"
        );
        in_flight_total += get("in_flight");
    }
    // 120% offered towards the subscriber: a backlog must exist at cutoff
    assert!(in_flight_total > 0);
}

#[test]
fn strict_priority_starves_low_class() {
    let mut l = layout(0, 2);
    // the generators sit behind gigabit links so they can saturate the
    // subscriber port
    for link in l.topo.links.iter_mut().skip(2) {
        link.bandwidth_bps = 1_000_000_000;
    }
    let mut hi = bg("hi", l.gens[0], 0.11, 1000, 6);
    let mut lo = bg("lo", l.gens[1], 0.05, 1000, 0);
    for s in [&mut hi, &mut lo] {
        if let TrafficKind::Background(b) = &mut s.kind {
            b.reference_bps = Some(1_000_000_000);
        }
    }
    let traffic = vec![hi, lo];
    let cfg = SimConfig {
        record_ledger: true,
        ..Default::default()
    };
    let mut depths = Vec::new();
    let mut sim = Simulation::build(l.topo.clone(), traffic.clone(), 1, cfg).unwrap();
    for step in 1..=4 {
        sim.run(step * 20 * MS);
        let mut s2 = Simulation::build(l.topo.clone(), traffic.clone(), 1, cfg).unwrap();
        s2.run(step * 20 * MS);
        let r = s2.into_result();
        depths.push(r.counter("queue.sw.sw-sub.p0.max_depth"));
        // nothing of the low class ever leaves
        let lo_delivered = r
            .ledger
            .unwrap()
            .frames
            .iter()
            .filter(|f| f.source == "lo" && !f.deliveries.is_empty())
            .count();
        assert!(lo_delivered <= 1, "{lo_delivered}");
    }
    assert!(depths.windows(2).all(|w| w[0] < w[1]), "{depths:?}");
}

#[test]
fn span_under_capacity_never_drops() {
    let mut l = layout(0, 1);
    let mon = l.topo.add_node("monitor", mac(30), NodeKind::Ied);
    let mirror = l.topo.connect(l.switch, mon);
    let gen_link = l.topo.link_by_name("gen0-sw").unwrap();
    l.topo.add_span(Span {
        capture_id: "span".into(),
        switch: l.switch,
        mirror,
        sources: vec![gen_link],
        buffer_frames: 8,
        snaplen: 128,
        ethertype_filter: None,
    });
    let traffic = vec![bg("a", l.gens[0], 0.3, 1000, 0)];
    let r = simulate(l.topo, traffic, 1, SimConfig::default(), 100 * MS).unwrap();
    assert_eq!(r.counter("span.span.drops"), 0);
    let mirrored = r.counter("span.span.mirrored");
    assert_eq!(mirrored, r.counter("link.gen0-sw.gen0>sw.delivered_frames"));
    assert_eq!(
        r.captures["span"].len() as u64 + r.counter("link.sw-monitor.sw>monitor.in_flight"),
        mirrored
    );
    assert!(r.captures["span"].iter().all(|c| c.incl_len() == 128 && c.orig_len == 1000));
}

#[test]
fn oversubscribed_span_drops_but_taps_do_not() {
    let mut l = layout(0, 2);
    let mon = l.topo.add_node("monitor", mac(30), NodeKind::Ied);
    let mirror = l.topo.connect(l.switch, mon);
    let sources = vec![
        l.topo.link_by_name("gen0-sw").unwrap(),
        l.topo.link_by_name("gen1-sw").unwrap(),
    ];
    for &s in &sources {
        l.topo.add_tap(format!("tap-{}", s.0), s);
    }
    l.topo.add_span(Span {
        capture_id: "span".into(),
        switch: l.switch,
        mirror,
        sources,
        buffer_frames: 16,
        snaplen: 65535,
        ethertype_filter: None,
    });
    let mut a = bg("a", l.gens[0], 0.8, 1000, 0);
    let mut b = bg("b", l.gens[1], 0.8, 1000, 0);
    for s in [&mut a, &mut b] {
        if let TrafficKind::Background(x) = &mut s.kind {
            x.dst = mac(40); // unknown unicast: flooded, but only 2 x 80 Mb/s mirrored
        }
    }
    let r = simulate(l.topo, vec![a, b], 1, SimConfig::default(), 100 * MS).unwrap();
    assert!(r.counter("span.span.drops") > 0);
    let sent = r.counter("source.a.frames") + r.counter("source.b.frames");
    for (k, v) in &r.counters {
        if k.starts_with("tap.") {
            assert_eq!(*v, 0, "{k}");
        }
    }
    // the taps on the generator links saw every frame the generators sent
    let from_gens = [("tap-2", mac(10)), ("tap-3", mac(11))]
        .iter()
        .map(|(t, m)| {
            r.captures[*t]
                .iter()
                .filter(|c| decode_header(c.data()).unwrap().src == *m)
                .count() as u64
        })
        .sum::<u64>();
    let on_wire = r.counter("link.gen0-sw.gen0>sw.in_flight") + r.counter("link.gen1-sw.gen1>sw.in_flight");
    assert_eq!(from_gens + on_wire, sent);
}

#[test]
fn vlan_membership_filters_egress() {
    let mut l = layout(0, 1);
    let la = l.topo.link_by_name("pub-sw").unwrap();
    let lg = l.topo.link_by_name("gen0-sw").unwrap();
    let cfg = l.topo.switch_config_mut(l.switch).unwrap();
    cfg.vlans.insert(10, [la, lg].into_iter().collect());
    let mut b = bg("a", l.gens[0], 0.1, 500, 0);
    if let TrafficKind::Background(x) = &mut b.kind {
        x.vid = 10;
        x.dst = MacAddress([0x01, 0, 0x5e, 0, 0, 1]);
    }
    let mut c = bg("c", l.gens[0], 0.1, 500, 0);
    if let TrafficKind::Background(x) = &mut c.kind {
        x.vid = 20;
    }
    // stop just before the next arrivals so nothing is in flight
    let r = simulate(l.topo, vec![b, c], 1, SimConfig::default(), 10 * MS - 1).unwrap();
    assert_eq!(r.counter("node.sub.rx_frames"), 0);
    assert_eq!(r.counter("node.pub.rx_frames"), r.counter("source.a.frames"));
    assert_eq!(r.counter("switch.sw.vlan_filtered"), r.counter("source.c.frames"));
}

#[test]
fn injected_loss_matches_ledger() {
    let mut l = layout(0, 0);
    l.topo.links[1].loss_probability = 0.05;
    let traffic = vec![goose(&l, 162, (1..=200).map(|i| i * 5 * MS).collect())];
    let cfg = SimConfig {
        record_ledger: true,
        ..Default::default()
    };
    let r = simulate(l.topo, traffic, 3, cfg, 2_000 * MS).unwrap();
    let ledger = r.ledger.as_ref().unwrap();
    let lost = ledger.frames.iter().filter(|f| !f.drops.is_empty()).count();
    assert!(lost > 0);
    assert_eq!(lost as u64, r.counter("link.sw-sub.sw>sub.loss_drops"));
    assert_eq!(
        r.captures["tap-a"].len() - r.captures["tap-b"].len(),
        lost
    );
}

#[test]
fn retransmission_gaps_on_the_wire() {
    let l = layout(0, 0);
    let mut spec = goose(&l, 162, vec![0]);
    if let TrafficKind::Goose(g) = &mut spec.kind {
        g.profile = RetransmissionProfile::default();
    }
    let r = simulate(l.topo, vec![spec], 1, SimConfig::default(), 800 * MS).unwrap();
    // capture stamps mark the last bit; subtract serialization to get the
    // moment each frame was handed to the wire
    let ts: Vec<u64> = r.captures["tap-a"]
        .iter()
        .map(|c| c.timestamp_ns - u64::from(c.orig_len) * 80)
        .collect();
    let gaps: Vec<u64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    assert_eq!(
        &gaps[..7],
        &[6_500_000, 13_000_000, 26_000_000, 52_000_000, 104_000_000, 208_000_000, 350_000_000]
    );
    let first = &r.captures["tap-a"][0];
    let h = decode_header(first.data()).unwrap();
    assert_eq!(h.ethertype, ETHERTYPE_GOOSE);
    assert_eq!(h.vlan.unwrap().pcp(), 4);
    let pdu = decode_goose(&first.data()[h.payload_offset..]).unwrap().1;
    assert_eq!((pdu.st_num, pdu.sq_num), (1, 0));
}

#[test]
fn removing_taps_changes_no_timestamps() {
    let build = |extra_tap: bool| {
        let mut l = layout(1_000, 1);
        if extra_tap {
            let lg = l.topo.link_by_name("gen0-sw").unwrap();
            l.topo.add_tap("extra", lg);
        }
        let traffic = vec![goose(&l, 162, vec![MS, 9 * MS]), bg("a", l.gens[0], 0.4, 700, 0)];
        simulate(l.topo, traffic, 5, SimConfig::default(), 50 * MS).unwrap()
    };
    let with = build(true);
    let without = build(false);
    assert_eq!(with.captures["tap-a"], without.captures["tap-a"]);
    assert_eq!(with.captures["tap-b"], without.captures["tap-b"]);
}

#[test]
fn build_lists_every_fault() {
    let l = layout(0, 1);
    let traffic = vec![
        bg("a", l.gens[0], 1.5, 1000, 0),
        bg("b", NodeId(99), 0.1, 1000, 0),
        bg("c", l.gens[0], 0.1, 10, 9),
    ];
    match Simulation::build(l.topo, traffic, 1, SimConfig::default()) {
        Err(SimError::Validation(errs)) => assert_eq!(errs.len(), 4, "{errs:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn oversubscribed_source_is_rejected() {
    let l = layout(0, 1);
    let traffic = vec![bg("a", l.gens[0], 0.6, 1000, 0), bg("b", l.gens[0], 0.5, 1000, 0)];
    let err = Simulation::build(l.topo, traffic, 1, SimConfig::default()).unwrap_err();
    assert!(err.to_string().contains("oversubscribed"), "{err}");
}

#[test]
fn periodic_load_is_exact_on_the_link() {
    let l = layout(0, 1);
    let traffic = vec![bg("a", l.gens[0], 0.5, 1000, 0)];
    let r = simulate(l.topo, traffic, 1, SimConfig::default(), 1_000 * MS).unwrap();
    let bits = r.counter("link.sw-sub.sw>sub.tx_bits");
    let util = bits as f64 / 1e8;
    assert!((util - 0.5).abs() < 0.005, "{util}");
}
