//! Topology and traffic builders shared by the integration tests.
#![allow(dead_code)]

pub mod strategies;

use stationbus::analyzer::{analyze, Analysis, DEFAULT_THRESHOLD_NS, DEFAULT_WINDOW_NS};
use stationbus::codec::MacAddress;
use stationbus::engine::{ReceiveVerdict, RetransmissionProfile, TatlPolicy};
use stationbus::netsim::*;

pub const US: u64 = 1_000;
pub const MS: u64 = 1_000_000;
pub const SEC: u64 = 1_000_000_000;

pub fn mac(last: u8) -> MacAddress {
    MacAddress([0x02, 0, 0, 0, 0, last])
}

pub struct Layout {
    pub topo: Topology,
    pub publisher: NodeId,
    pub subscriber: NodeId,
    pub switch: NodeId,
    pub pub_link: LinkId,
    pub sub_link: LinkId,
    pub gens: Vec<NodeId>,
}

/// Publisher and subscriber on one switch with `tap-pub` next to the
/// publisher and `tap-sub` next to the subscriber, plus `gens` traffic
/// generators on links of `gen_bps`.
pub fn layout(latency_ns: u64, gens: usize, gen_bps: u64) -> Layout {
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
    let pub_link = t.connect(p, sw);
    let sub_link = t.connect(sw, s);
    t.taps.push(Tap {
        capture_id: "tap-pub".into(),
        link: pub_link,
        near: Some(p),
        snaplen: DEFAULT_SNAPLEN,
        ethertype_filter: None,
    });
    t.taps.push(Tap {
        capture_id: "tap-sub".into(),
        link: sub_link,
        near: Some(s),
        snaplen: DEFAULT_SNAPLEN,
        ethertype_filter: None,
    });
    let gens = (0..gens)
        .map(|i| {
            let g = t.add_node(format!("gen{i}"), mac(10 + i as u8), NodeKind::TrafficGen);
            let l = t.connect(g, sw);
            t.links[l.0].bandwidth_bps = gen_bps;
            g
        })
        .collect();
    Layout {
        topo: t,
        publisher: p,
        subscriber: s,
        switch: sw,
        pub_link,
        sub_link,
        gens,
    }
}

pub fn goose(source: NodeId, frame_bytes: usize, profile: RetransmissionProfile, events: Vec<u64>) -> TrafficSpec {
    let mut g = GooseTraffic::new("IED1", "gcb01");
    g.frame_bytes = Some(frame_bytes);
    g.profile = profile;
    g.event_times_ns = events;
    TrafficSpec {
        name: "goose".into(),
        source,
        start_ns: 0,
        kind: TrafficKind::Goose(g),
    }
}

/// Standard schedule with a fixed TATL so every frame has the same size.
pub fn fixed_size_profile() -> RetransmissionProfile {
    RetransmissionProfile::default()
        .with_tatl(TatlPolicy::FixedMs(11000))
        .unwrap()
}

pub fn background(name: &str, source: NodeId, load: f64, bytes: usize, priority: u8, law: ArrivalLaw) -> TrafficSpec {
    let mut b = BackgroundTraffic::new(load, bytes, mac(2));
    b.priority = priority;
    b.law = law;
    TrafficSpec {
        name: name.into(),
        source,
        start_ns: 0,
        kind: TrafficKind::Background(b),
    }
}

/// Event times every `every` from 7 ms until `until`.
pub fn events(every: u64, until: u64) -> Vec<u64> {
    (0..until / every).map(|k| k * every + 7 * MS).collect()
}

pub fn mean(v: &[u64]) -> f64 {
    v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64
}

/// 1000 GOOSE frames 2 ms apart with 30% background; `loss` on the
/// subscriber link.
pub fn ground_truth_run(loss: f64, seed: u64) -> (SimulationResult, Analysis) {
    let mut l = layout(4 * US, 1, 100_000_000);
    l.topo.links[l.sub_link.0].loss_probability = loss;
    l.topo.links[l.sub_link.0].propagation_ns = 730;
    let profile = RetransmissionProfile::table(vec![2 * MS]).unwrap();
    let traffic = vec![
        goose(l.publisher, 162, profile, vec![0]),
        background("bg", l.gens[0], 0.3, 1000, 0, ArrivalLaw::Poisson),
    ];
    let config = SimConfig { record_ledger: true, ..Default::default() };
    let r = simulate(l.topo, traffic, seed, config, 1999 * MS).unwrap();
    let a = analyze(&r.captures["tap-pub"], &r.captures["tap-sub"], mac(1), DEFAULT_THRESHOLD_NS, DEFAULT_WINDOW_NS);
    (r, a)
}

/// Per-class delays at the subscriber when a gigabit uplink pushes 95%
/// of a 100 Mb/s port: (goose, priority 4, priority 0).
pub fn saturated_port_delays() -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let mut l = layout(2 * US, 2, 1_000_000_000);
    let until = 5 * SEC;
    let mut low = background("low", l.gens[0], 0.0, 1000, 0, ArrivalLaw::Poisson);
    let mut high = background("high", l.gens[1], 0.0, 1000, 4, ArrivalLaw::Poisson);
    for (spec, load) in [(&mut low, 0.70), (&mut high, 0.25)] {
        if let TrafficKind::Background(b) = &mut spec.kind {
            b.load_fraction = load;
            b.reference_bps = Some(100_000_000);
        }
    }
    l.topo.taps.clear();
    let sub = l.subscriber;
    let traffic = vec![goose(l.publisher, 162, fixed_size_profile(), events(100 * MS, until)), low, high];
    let config = SimConfig { record_ledger: true, ..Default::default() };
    let r = simulate(l.topo, traffic, 5, config, until).unwrap();
    let delays = |name: &str| -> Vec<u64> {
        r.ledger
            .as_ref()
            .unwrap()
            .frames
            .iter()
            .filter(|f| f.source == name)
            .filter_map(|f| {
                let (_, at) = f.deliveries.iter().find(|(n, _)| *n == sub)?;
                Some(at - f.sent_ns?)
            })
            .collect()
    };
    (delays("goose"), delays("high"), delays("low"))
}

/// Independent restatement of the verdict table.
pub fn verdict_oracle(last: Option<(u32, u32)>, st: u32, sq: u32) -> ReceiveVerdict {
    match last {
        None => ReceiveVerdict::NewEvent,
        Some((ls, _)) if st > ls => ReceiveVerdict::NewEvent,
        Some((ls, _)) if st < ls => ReceiveVerdict::StaleEvent,
        Some((_, lq)) => {
            let next = if lq == u32::MAX { 1 } else { lq + 1 };
            if sq == next {
                ReceiveVerdict::Retransmission
            } else if sq == lq {
                ReceiveVerdict::Duplicate
            } else if sq > lq {
                ReceiveVerdict::OutOfOrder { gap: sq - lq - 1 }
            } else {
                ReceiveVerdict::StaleEvent
            }
        }
    }
}
