use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::capture::CaptureRecord;
use crate::codec::{decode_header, FrameLimits, MacAddress};
use crate::engine::PublisherState;

use super::topology::{LinkId, NodeId, NodeKind, Topology};
use super::traffic::{
    goose_bytes, next_dataset, prepare_goose, source_rng, validate_sv, Arrivals, GooseTraffic,
    SvFrames, TrafficKind, TrafficSpec,
};
use super::{sv_bandwidth, SimError};

/// Preamble plus inter-frame gap, in bytes, that separate two frames.
pub const IFG_PREAMBLE_BYTES: u64 = 20;

/// Unix time of simulated t = 0, used for GOOSE timestamps.
pub const DEFAULT_EPOCH_UNIX_NS: u64 = 1_436_538_296_000_000_000;

const CLASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub epoch_unix_ns: u64,
    /// Keep per-frame ground truth (send, delivery and drop times).
    pub record_ledger: bool,
    pub limits: FrameLimits,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            epoch_unix_ns: DEFAULT_EPOCH_UNIX_NS,
            record_ledger: false,
            limits: FrameLimits::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropCause {
    Loss,
    QueueFull,
    VlanFiltered,
}

/// Ground truth for one injected frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub source: String,
    pub bytes: Arc<[u8]>,
    pub created_ns: u64,
    /// Last bit left the source's port.
    pub sent_ns: Option<u64>,
    /// Last bit reached an end station.
    pub deliveries: Vec<(NodeId, u64)>,
    pub drops: Vec<(LinkId, DropCause)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameLedger {
    /// Indexed by frame id, in injection order.
    pub frames: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub captures: BTreeMap<String, Vec<CaptureRecord>>,
    pub counters: BTreeMap<String, u64>,
    pub ledger: Option<FrameLedger>,
    pub end_ns: u64,
}

impl SimulationResult {
    /// Counter value, 0 when absent.
    pub fn counter(&self, key: &str) -> u64 {
        self.counters.get(key).copied().unwrap_or(0)
    }
}

#[derive(Debug)]
struct SimFrame {
    id: u64,
    bytes: Arc<[u8]>,
    dst: MacAddress,
    src: MacAddress,
    vid: Option<u16>,
    priority: u8,
    origin: NodeId,
    mirrored: bool,
}

#[derive(Debug)]
enum Event {
    Source(usize),
    TxEnd { node: usize, port: usize },
    PortFree { node: usize, port: usize },
    RxEnd { node: usize, port: usize, frame: Arc<SimFrame> },
    Forward { node: usize, port: usize, frame: Arc<SimFrame> },
}

#[derive(Debug)]
struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed so the max-heap pops the earliest (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Per link direction.
#[derive(Debug, Clone, Copy, Default)]
struct DirStats {
    offered: u64,
    loss_drops: u64,
    queue_drops: u64,
    span_drops: u64,
    tx_frames: u64,
    tx_bits: u64,
    delivered: u64,
    on_wire: u64,
}

#[derive(Debug)]
struct PortRt {
    link: usize,
    /// Index into the direction stats for frames sent from this port.
    dir: usize,
    peer: usize,
    peer_port: usize,
    bandwidth_bps: u64,
    propagation_ns: u64,
    queues: [VecDeque<Arc<SimFrame>>; CLASSES],
    queued: usize,
    busy: bool,
    tx: Option<Arc<SimFrame>>,
    class_limit: Option<usize>,
    mirror_of: Option<usize>,
    max_depth: [usize; CLASSES],
}

#[derive(Debug)]
struct SwitchRt {
    latency_ns: u64,
    mac_table: HashMap<MacAddress, usize>,
    /// VID -> membership flag per port.
    vlans: BTreeMap<u16, Vec<bool>>,
    spans_by_ingress: Vec<Vec<usize>>,
    vlan_filtered: u64,
}

#[derive(Debug)]
struct NodeRt {
    ports: Vec<PortRt>,
    switch: Option<SwitchRt>,
    rx_frames: u64,
}

#[derive(Debug)]
enum SourceKind {
    Goose {
        traffic: Box<GooseTraffic>,
        publisher: PublisherState,
        next_event: usize,
    },
    Sv {
        frames: SvFrames,
        rate: u64,
        burst: u64,
        batch: u64,
    },
    Background {
        arrivals: Arrivals,
        bytes: Arc<[u8]>,
        burst: u32,
    },
}

#[derive(Debug)]
struct SourceRt {
    name: String,
    node: usize,
    mac: MacAddress,
    start_ns: u64,
    kind: SourceKind,
    frames: u64,
    bits: u64,
    encode_errors: u64,
}

#[derive(Debug)]
struct CaptureRt {
    id: String,
    snaplen: u32,
    filter: Option<u16>,
    records: Vec<CaptureRecord>,
}

/// Deterministic discrete-event simulation of a switched Ethernet.
#[derive(Debug)]
pub struct Simulation {
    topo: Topology,
    config: SimConfig,
    now: u64,
    seq: u64,
    events: u64,
    heap: BinaryHeap<Scheduled>,
    nodes: Vec<NodeRt>,
    sources: Vec<SourceRt>,
    dirs: Vec<DirStats>,
    /// Capture index of every tap on a link, with its near-side node.
    taps_by_link: Vec<Vec<(usize, usize)>>,
    /// Capture index for frames arriving at an end station over a link.
    span_capture_by_link: Vec<Option<usize>>,
    captures: Vec<CaptureRt>,
    ledger: Option<FrameLedger>,
    loss_rng: ChaCha8Rng,
    next_frame_id: u64,
    scratch: Vec<usize>,
}

fn serialization_ns(bytes: u64, bandwidth_bps: u64) -> u64 {
    (u128::from(bytes * 8) * 1_000_000_000).div_ceil(u128::from(bandwidth_bps)) as u64
}

fn sample_time(start: u64, sample: u64, rate: u64) -> u64 {
    start + (u128::from(sample) * 1_000_000_000 / u128::from(rate)) as u64
}

impl Simulation {
    /// Validates everything up front and schedules the first source timers.
    pub fn build(
        topology: Topology,
        traffic: Vec<TrafficSpec>,
        seed: u64,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        let errs = topology.validate();
        if !errs.is_empty() {
            return Err(SimError::Validation(errs));
        }
        let mut errs = Vec::new();
        let sources = build_sources(&topology, traffic, seed, config, &mut errs);
        if !errs.is_empty() {
            return Err(SimError::Validation(errs));
        }

        let n_links = topology.links.len();
        let mut nodes = Vec::with_capacity(topology.nodes.len());
        let port_lists: Vec<Vec<LinkId>> = (0..topology.nodes.len())
            .map(|n| topology.ports_of(NodeId(n)))
            .collect();
        let mut mirror_port = vec![None; n_links];
        for (i, s) in topology.spans.iter().enumerate() {
            mirror_port[s.mirror.0] = Some(i);
        }
        for (n, node) in topology.nodes.iter().enumerate() {
            let ports: Vec<PortRt> = port_lists[n]
                .iter()
                .map(|&l| {
                    let link = topology.link(l);
                    let peer = link.other(NodeId(n)).0;
                    let class_limit = match &node.kind {
                        NodeKind::Switch(c) => c.queue_limit,
                        _ => None,
                    };
                    PortRt {
                        link: l.0,
                        dir: l.0 * 2 + usize::from(link.a.0 != n),
                        peer,
                        peer_port: port_lists[peer].iter().position(|&x| x == l).expect("attached"),
                        bandwidth_bps: link.bandwidth_bps,
                        propagation_ns: link.propagation_ns,
                        queues: Default::default(),
                        queued: 0,
                        busy: false,
                        tx: None,
                        class_limit,
                        mirror_of: if node.is_switch() { mirror_port[l.0] } else { None },
                        max_depth: [0; CLASSES],
                    }
                })
                .collect();
            let switch = match &node.kind {
                NodeKind::Switch(cfg) => {
                    let mut mac_table = HashMap::new();
                    for (i, p) in ports.iter().enumerate() {
                        let peer = &topology.nodes[p.peer];
                        if !peer.is_switch() && p.mirror_of.is_none() {
                            mac_table.insert(peer.mac, i);
                        }
                    }
                    for (mac, l) in &cfg.static_macs {
                        let i = port_lists[n].iter().position(|x| x == l).expect("validated");
                        mac_table.insert(*mac, i);
                    }
                    let vlans = cfg
                        .vlans
                        .iter()
                        .map(|(vid, members)| {
                            (*vid, port_lists[n].iter().map(|l| members.contains(l)).collect())
                        })
                        .collect();
                    let mut spans_by_ingress = vec![Vec::new(); ports.len()];
                    for (i, s) in topology.spans.iter().enumerate() {
                        if s.switch.0 == n {
                            for l in &s.sources {
                                let p = port_lists[n].iter().position(|x| x == l).expect("validated");
                                spans_by_ingress[p].push(i);
                            }
                        }
                    }
                    Some(SwitchRt {
                        latency_ns: cfg.processing_latency_ns,
                        mac_table,
                        vlans,
                        spans_by_ingress,
                        vlan_filtered: 0,
                    })
                }
                _ => None,
            };
            nodes.push(NodeRt {
                ports,
                switch,
                rx_frames: 0,
            });
        }

        let mut captures = Vec::new();
        let mut taps_by_link = vec![Vec::new(); n_links];
        for t in &topology.taps {
            let near = t.near.unwrap_or(topology.link(t.link).a).0;
            taps_by_link[t.link.0].push((captures.len(), near));
            captures.push(CaptureRt {
                id: t.capture_id.clone(),
                snaplen: t.snaplen,
                filter: t.ethertype_filter,
                records: Vec::new(),
            });
        }
        let mut span_capture_by_link = vec![None; n_links];
        for s in &topology.spans {
            span_capture_by_link[s.mirror.0] = Some(captures.len());
            captures.push(CaptureRt {
                id: s.capture_id.clone(),
                snaplen: s.snaplen,
                filter: s.ethertype_filter,
                records: Vec::new(),
            });
        }

        let mut sim = Simulation {
            topo: topology,
            config,
            now: 0,
            seq: 0,
            events: 0,
            heap: BinaryHeap::new(),
            nodes,
            sources,
            dirs: vec![DirStats::default(); n_links * 2],
            taps_by_link,
            span_capture_by_link,
            captures,
            ledger: config.record_ledger.then(FrameLedger::default),
            loss_rng: source_rng(seed, u64::MAX),
            next_frame_id: 0,
            scratch: Vec::new(),
        };
        for i in 0..sim.sources.len() {
            if let Some(t) = sim.first_fire(i) {
                sim.schedule(t, Event::Source(i));
            }
        }
        Ok(sim)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Processes every event with time <= `until_ns`. Can be called again
    /// with a later time to continue.
    pub fn run(&mut self, until_ns: u64) {
        while self.heap.peek().is_some_and(|s| s.time <= until_ns) {
            let s = self.heap.pop().expect("peeked");
            self.now = s.time;
            self.events += 1;
            match s.event {
                Event::Source(i) => self.fire_source(i),
                Event::TxEnd { node, port } => self.tx_end(node, port),
                Event::PortFree { node, port } => {
                    let p = &mut self.nodes[node].ports[port];
                    p.busy = false;
                    if p.queued > 0 {
                        self.start_tx(node, port);
                    }
                }
                Event::RxEnd { node, port, frame } => self.rx_end(node, port, frame),
                Event::Forward { node, port, frame } => self.forward(node, port, frame),
            }
        }
        self.now = self.now.max(until_ns);
    }

    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
    }

    fn first_fire(&mut self, i: usize) -> Option<u64> {
        let s = &mut self.sources[i];
        match &mut s.kind {
            SourceKind::Goose { traffic, .. } => {
                traffic.event_times_ns.first().map(|t| s.start_ns + t)
            }
            SourceKind::Sv { rate, burst, .. } => Some(sample_time(s.start_ns, *burst - 1, *rate)),
            SourceKind::Background { arrivals, .. } => Some(arrivals.next_time()),
        }
    }

    fn fire_source(&mut self, i: usize) {
        let now = self.now;
        let epoch = self.config.epoch_unix_ns;
        let limits = self.config.limits;
        let mut out: Vec<Arc<[u8]>> = Vec::new();
        let s = &mut self.sources[i];
        let next = match &mut s.kind {
            SourceKind::Goose {
                traffic,
                publisher,
                next_event,
            } => {
                let events = &traffic.event_times_ns;
                let due = events
                    .get(*next_event)
                    .is_some_and(|t| s.start_ns + t <= now);
                let emission = if due {
                    *next_event += 1;
                    let data = next_dataset(publisher.dataset());
                    publisher.publish_event(data, epoch + now)
                } else {
                    publisher.on_timer(epoch + now)
                }
                .expect("arity fixed and an event precedes every timer");
                match goose_bytes(traffic, s.mac, &emission.pdu, limits) {
                    Ok(b) => out.push(b.into()),
                    Err(_) => s.encode_errors += 1,
                }
                let retx = now + emission.next_timer_ns;
                Some(match events.get(*next_event) {
                    Some(t) => retx.min(s.start_ns + t),
                    None => retx,
                })
            }
            SourceKind::Sv {
                frames,
                rate,
                burst,
                batch,
            } => {
                let first = *batch * *burst;
                for j in first..first + *burst {
                    out.push(frames.get(j));
                }
                *batch += 1;
                Some(sample_time(s.start_ns, (*batch + 1) * *burst - 1, *rate))
            }
            SourceKind::Background {
                arrivals,
                bytes,
                burst,
            } => {
                for _ in 0..*burst {
                    out.push(bytes.clone());
                }
                Some(arrivals.next_time())
            }
        };
        let node = s.node;
        for bytes in out {
            self.inject(i, node, bytes);
        }
        if let Some(t) = next {
            self.schedule(t, Event::Source(i));
        }
    }

    fn inject(&mut self, source: usize, node: usize, bytes: Arc<[u8]>) {
        let header = decode_header(&bytes).expect("generated frames decode");
        let s = &mut self.sources[source];
        s.frames += 1;
        s.bits += bytes.len() as u64 * 8;
        let id = self.next_frame_id;
        self.next_frame_id += 1;
        if let Some(ledger) = &mut self.ledger {
            ledger.frames.push(LedgerEntry {
                source: s.name.clone(),
                bytes: bytes.clone(),
                created_ns: self.now,
                sent_ns: None,
                deliveries: Vec::new(),
                drops: Vec::new(),
            });
        }
        let frame = Arc::new(SimFrame {
            id,
            bytes,
            dst: header.dst,
            src: header.src,
            vid: header.vlan.map(|v| v.vid()),
            priority: header.vlan.map_or(0, |v| v.pcp()),
            origin: NodeId(node),
            mirrored: false,
        });
        self.enqueue(node, 0, frame);
    }

    fn ledger_drop(&mut self, frame: &SimFrame, link: usize, cause: DropCause) {
        if frame.mirrored {
            return;
        }
        if let Some(l) = &mut self.ledger {
            l.frames[frame.id as usize].drops.push((LinkId(link), cause));
        }
    }

    fn enqueue(&mut self, node: usize, port: usize, frame: Arc<SimFrame>) {
        let (link, dir) = {
            let p = &self.nodes[node].ports[port];
            (p.link, p.dir)
        };
        self.dirs[dir].offered += 1;
        let loss = self.topo.links[link].loss_probability;
        if loss > 0.0 && self.loss_rng.random::<f64>() < loss {
            self.dirs[dir].loss_drops += 1;
            self.ledger_drop(&frame, link, DropCause::Loss);
            return;
        }
        let p = &mut self.nodes[node].ports[port];
        let class = usize::from(frame.priority);
        if let Some(span) = p.mirror_of {
            if p.queued >= self.topo.spans[span].buffer_frames {
                self.dirs[dir].span_drops += 1;
                return;
            }
        } else if let Some(limit) = p.class_limit {
            if p.queues[class].len() >= limit {
                self.dirs[dir].queue_drops += 1;
                self.ledger_drop(&frame, link, DropCause::QueueFull);
                return;
            }
        }
        p.queues[class].push_back(frame);
        p.queued += 1;
        p.max_depth[class] = p.max_depth[class].max(p.queues[class].len());
        if !p.busy {
            self.start_tx(node, port);
        }
    }

    fn start_tx(&mut self, node: usize, port: usize) {
        let p = &mut self.nodes[node].ports[port];
        let frame = p
            .queues
            .iter_mut()
            .rev()
            .find_map(|q| q.pop_front())
            .expect("queued > 0");
        p.queued -= 1;
        p.busy = true;
        let done = self.now + serialization_ns(frame.bytes.len() as u64, p.bandwidth_bps);
        p.tx = Some(frame);
        self.dirs[p.dir].on_wire += 1;
        self.schedule(done, Event::TxEnd { node, port });
    }

    fn tx_end(&mut self, node: usize, port: usize) {
        let now = self.now;
        let p = &mut self.nodes[node].ports[port];
        let frame = p.tx.take().expect("transmitting");
        let (link, peer, peer_port, prop) = (p.link, p.peer, p.peer_port, p.propagation_ns);
        let gap = serialization_ns(IFG_PREAMBLE_BYTES, p.bandwidth_bps);
        let d = &mut self.dirs[p.dir];
        d.tx_frames += 1;
        d.tx_bits += frame.bytes.len() as u64 * 8;

        for &(cap, near) in &self.taps_by_link[link] {
            let ts = if near == node { now } else { now + prop };
            record(&mut self.captures[cap], ts, &frame.bytes);
        }
        if !frame.mirrored && frame.origin.0 == node {
            if let Some(l) = &mut self.ledger {
                l.frames[frame.id as usize].sent_ns.get_or_insert(now);
            }
        }
        self.schedule(
            now + prop,
            Event::RxEnd {
                node: peer,
                port: peer_port,
                frame,
            },
        );
        self.schedule(now + gap, Event::PortFree { node, port });
    }

    fn rx_end(&mut self, node: usize, port: usize, frame: Arc<SimFrame>) {
        let now = self.now;
        let (link, sender_dir) = {
            let p = &self.nodes[node].ports[port];
            let peer = &self.nodes[p.peer].ports[p.peer_port];
            (p.link, peer.dir)
        };
        let d = &mut self.dirs[sender_dir];
        d.on_wire -= 1;
        d.delivered += 1;
        let n = &mut self.nodes[node];
        if let Some(sw) = &n.switch {
            if sw.latency_ns == 0 {
                self.forward(node, port, frame);
            } else {
                let t = now + sw.latency_ns;
                self.schedule(t, Event::Forward { node, port, frame });
            }
            return;
        }
        n.rx_frames += 1;
        if let Some(cap) = self.span_capture_by_link[link] {
            if frame.mirrored {
                record(&mut self.captures[cap], now, &frame.bytes);
                return;
            }
        }
        if !frame.mirrored {
            if let Some(l) = &mut self.ledger {
                l.frames[frame.id as usize].deliveries.push((NodeId(node), now));
            }
        }
    }

    fn forward(&mut self, node: usize, ingress: usize, frame: Arc<SimFrame>) {
        if frame.mirrored {
            // mirror copies end at whatever sits on the mirror port
            return;
        }
        let mut targets = std::mem::take(&mut self.scratch);
        targets.clear();
        let mut mirrors = Vec::new();
        let mut filtered = false;
        {
            let n = &mut self.nodes[node];
            let sw = n.switch.as_mut().expect("switch");
            if !frame.src.is_multicast() {
                sw.mac_table.entry(frame.src).or_insert(ingress);
            }
            mirrors.extend(sw.spans_by_ingress[ingress].iter().copied());
            let members = match frame.vid {
                Some(vid) if vid != 0 && !sw.vlans.is_empty() => match sw.vlans.get(&vid) {
                    Some(m) if m[ingress] => Some(m),
                    _ => {
                        sw.vlan_filtered += 1;
                        filtered = true;
                        None
                    }
                },
                _ => None,
            };
            if !filtered {
                let known = if frame.dst.is_multicast() {
                    None
                } else {
                    sw.mac_table.get(&frame.dst).copied()
                };
                match known {
                    Some(p) if p != ingress => targets.push(p),
                    Some(_) => {}
                    None => targets.extend(
                        (0..n.ports.len()).filter(|&p| p != ingress && n.ports[p].mirror_of.is_none()),
                    ),
                }
                if let Some(m) = members {
                    targets.retain(|&p| m[p]);
                }
            }
        }
        for span in mirrors {
            let mirror_link = self.topo.spans[span].mirror;
            let port = self.nodes[node]
                .ports
                .iter()
                .position(|p| p.link == mirror_link.0)
                .expect("validated");
            let copy = Arc::new(SimFrame {
                id: frame.id,
                bytes: frame.bytes.clone(),
                dst: frame.dst,
                src: frame.src,
                vid: frame.vid,
                priority: frame.priority,
                origin: frame.origin,
                mirrored: true,
            });
            self.enqueue(node, port, copy);
        }
        if filtered {
            let link = self.nodes[node].ports[ingress].link;
            self.ledger_drop(&frame, link, DropCause::VlanFiltered);
        }
        for &p in &targets {
            self.enqueue(node, p, frame.clone());
        }
        self.scratch = targets;
    }

    /// Counters and captures at the current time.
    pub fn into_result(self) -> SimulationResult {
        let mut c = BTreeMap::new();
        let topo = &self.topo;
        let mut in_flight = vec![0u64; self.dirs.len()];
        for n in &self.nodes {
            for p in &n.ports {
                in_flight[p.dir] += p.queued as u64;
            }
        }
        for (i, d) in self.dirs.iter().enumerate() {
            let link = &topo.links[i / 2];
            let (from, to) = if i % 2 == 0 { (link.a, link.b) } else { (link.b, link.a) };
            let prefix = format!(
                "link.{}.{}>{}",
                link.name, topo.nodes[from.0].name, topo.nodes[to.0].name
            );
            for (k, v) in [
                ("offered_frames", d.offered),
                ("tx_frames", d.tx_frames),
                ("tx_bits", d.tx_bits),
                ("delivered_frames", d.delivered),
                ("loss_drops", d.loss_drops),
                ("queue_drops", d.queue_drops),
                ("span_drops", d.span_drops),
                ("in_flight", in_flight[i] + d.on_wire),
            ] {
                c.insert(format!("{prefix}.{k}"), v);
            }
        }
        for (ni, n) in self.nodes.iter().enumerate() {
            let name = &topo.nodes[ni].name;
            match &n.switch {
                Some(sw) => {
                    c.insert(format!("switch.{name}.vlan_filtered"), sw.vlan_filtered);
                    for p in &n.ports {
                        let link = &topo.links[p.link].name;
                        for (class, depth) in p.max_depth.iter().enumerate() {
                            c.insert(format!("queue.{name}.{link}.p{class}.max_depth"), *depth as u64);
                        }
                    }
                }
                None => {
                    c.insert(format!("node.{name}.rx_frames"), n.rx_frames);
                }
            }
        }
        for t in &topo.taps {
            // a tap copies passively and has no buffer to overflow
            c.insert(format!("tap.{}.drops", t.capture_id), 0);
        }
        for (i, s) in topo.spans.iter().enumerate() {
            let d = &self.dirs[self.mirror_dir(i)];
            c.insert(format!("span.{}.drops", s.capture_id), d.span_drops);
            c.insert(format!("span.{}.mirrored", s.capture_id), d.offered);
        }
        for s in &self.sources {
            c.insert(format!("source.{}.frames", s.name), s.frames);
            c.insert(format!("source.{}.bits", s.name), s.bits);
            if s.encode_errors > 0 {
                c.insert(format!("source.{}.encode_errors", s.name), s.encode_errors);
            }
        }
        for cap in &self.captures {
            c.insert(format!("capture.{}.frames", cap.id), cap.records.len() as u64);
        }
        c.insert("sim.events".into(), self.events);
        c.insert("sim.end_ns".into(), self.now);

        let captures = self
            .captures
            .into_iter()
            .map(|mut cap| {
                cap.records.sort_by_key(|r| r.timestamp_ns);
                (cap.id, cap.records)
            })
            .collect();
        SimulationResult {
            captures,
            counters: c,
            ledger: self.ledger,
            end_ns: self.now,
        }
    }

    fn mirror_dir(&self, span: usize) -> usize {
        let s = &self.topo.spans[span];
        let link = self.topo.link(s.mirror);
        s.mirror.0 * 2 + usize::from(link.a != s.switch)
    }
}

fn record(cap: &mut CaptureRt, ts: u64, bytes: &Arc<[u8]>) {
    if let Some(et) = cap.filter {
        match decode_header(bytes) {
            Ok(h) if h.ethertype == et => {}
            _ => return,
        }
    }
    cap.records
        .push(CaptureRecord::truncated(ts, bytes.clone(), cap.snaplen));
}

fn build_sources(
    topo: &Topology,
    traffic: Vec<TrafficSpec>,
    seed: u64,
    config: SimConfig,
    errs: &mut Vec<String>,
) -> Vec<SourceRt> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    // offered bits/s per source node, to catch oversubscribed NICs
    let mut offered: BTreeMap<usize, f64> = BTreeMap::new();
    for (idx, spec) in traffic.into_iter().enumerate() {
        let who = spec.name.clone();
        if !names.insert(who.clone()) {
            errs.push(format!("traffic {who:?}: duplicate name"));
        }
        let Some(node) = topo.nodes.get(spec.source.0) else {
            errs.push(format!("traffic {who:?}: source node {} does not exist", spec.source.0));
            continue;
        };
        if node.is_switch() {
            errs.push(format!("traffic {who:?}: source {:?} is a switch", node.name));
            continue;
        }
        let ports = topo.ports_of(spec.source);
        let Some(&link) = ports.first() else {
            errs.push(format!("traffic {who:?}: source {:?} has no link", node.name));
            continue;
        };
        let bandwidth = topo.link(link).bandwidth_bps;
        let rng = source_rng(seed, idx as u64 + 1);
        let kind = match spec.kind {
            TrafficKind::Goose(g) => {
                if g.event_times_ns.windows(2).any(|w| w[0] > w[1]) {
                    errs.push(format!("traffic {who:?}: event times must be non-decreasing"));
                }
                match prepare_goose(&g, node.mac, config.limits) {
                    Ok(identity) => {
                        let publisher = PublisherState::new(
                            g.profile.clone(),
                            identity.clone(),
                            g.dataset.clone(),
                        );
                        let mut traffic = Box::new(g);
                        traffic.identity = identity;
                        SourceKind::Goose {
                            traffic,
                            publisher,
                            next_event: 0,
                        }
                    }
                    Err(e) => {
                        errs.push(format!("traffic {who:?}: {e}"));
                        continue;
                    }
                }
            }
            TrafficKind::Sv(sv) => {
                let before = errs.len();
                validate_sv(&sv, errs, &who, config.limits);
                if errs.len() > before {
                    continue;
                }
                *offered.entry(spec.source.0).or_default() +=
                    sv_bandwidth(sv.samples_per_cycle.into(), sv.frequency_hz.into(), sv.frame_bytes as u64)
                        .unwrap_or(0) as f64;
                match SvFrames::build(&sv, node.mac, config.limits) {
                    Ok(frames) => SourceKind::Sv {
                        frames,
                        rate: sv.frames_per_second(),
                        burst: sv.burst.into(),
                        batch: 0,
                    },
                    Err(e) => {
                        errs.push(format!("traffic {who:?}: {e}"));
                        continue;
                    }
                }
            }
            TrafficKind::Background(bg) => {
                let before = errs.len();
                bg.validate(errs, &who, config.limits);
                if errs.len() > before || bg.load_fraction == 0.0 {
                    continue;
                }
                let reference = bg.reference_bps.unwrap_or(bandwidth);
                *offered.entry(spec.source.0).or_default() += bg.load_fraction * reference as f64;
                SourceKind::Background {
                    arrivals: Arrivals::new(spec.start_ns, bg.mean_gap_ns(reference), bg.law, rng),
                    bytes: bg.frame(node.mac),
                    burst: bg.burst,
                }
            }
        };
        out.push(SourceRt {
            name: spec.name,
            node: spec.source.0,
            mac: node.mac,
            start_ns: spec.start_ns,
            kind,
            frames: 0,
            bits: 0,
            encode_errors: 0,
        });
    }
    for (node, bps) in offered {
        let link = topo.ports_of(NodeId(node))[0];
        let bw = topo.link(link).bandwidth_bps as f64;
        if bps >= bw {
            errs.push(format!(
                "node {:?}: traffic offers {:.1} Mb/s on a {:.1} Mb/s link (oversubscribed)",
                topo.nodes[node].name,
                bps / 1e6,
                bw / 1e6
            ));
        }
    }
    out
}

/// Convenience wrapper: build, run to `until_ns` and collect.
pub fn simulate(
    topology: Topology,
    traffic: Vec<TrafficSpec>,
    seed: u64,
    config: SimConfig,
    until_ns: u64,
) -> Result<SimulationResult, SimError> {
    let mut sim = Simulation::build(topology, traffic, seed, config)?;
    sim.run(until_ns);
    Ok(sim.into_result())
}
