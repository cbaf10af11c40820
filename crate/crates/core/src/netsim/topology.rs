use std::collections::{BTreeMap, BTreeSet};

use crate::codec::MacAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub usize);

pub const DEFAULT_BANDWIDTH_BPS: u64 = 100_000_000;

/// Store-and-forward switch parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwitchConfig {
    /// Added between the last received bit and forwarding eligibility.
    pub processing_latency_ns: u64,
    /// Per-class egress queue depth in frames; `None` is unbounded.
    pub queue_limit: Option<usize>,
    /// Extra MAC table entries. Hosts attached directly to the switch are
    /// provisioned automatically; anything else is learned from traffic.
    pub static_macs: Vec<(MacAddress, LinkId)>,
    /// VLAN membership. An empty map disables filtering. Untagged and
    /// priority-tagged (VID 0) frames are never filtered.
    pub vlans: BTreeMap<u16, BTreeSet<LinkId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Ied,
    TrafficGen,
    Switch(SwitchConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub mac: MacAddress,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_switch(&self) -> bool {
        matches!(self.kind, NodeKind::Switch(_))
    }
}

/// Full-duplex point-to-point link; each direction is independent.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_bps: u64,
    pub propagation_ns: u64,
    /// Probability that a frame handed to either direction is lost before
    /// reaching the wire. Used for fault injection; default 0.
    pub loss_probability: f64,
}

impl Link {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.a == n || self.b == n
    }
}

/// Passive copy of every frame on a link, both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    pub capture_id: String,
    pub link: LinkId,
    /// The tap sits next to this endpoint; frames sent by the other end are
    /// seen one propagation delay later. Defaults to `link.a`.
    pub near: Option<NodeId>,
    pub snaplen: u32,
    /// Capture filter: keep only frames with this (inner) ethertype.
    pub ethertype_filter: Option<u16>,
}

/// Switch port mirroring: frames received on `sources` are copied to the
/// `mirror` port, where they compete for its bandwidth and buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Span {
    pub capture_id: String,
    pub switch: NodeId,
    pub mirror: LinkId,
    pub sources: Vec<LinkId>,
    /// Frames the mirror port may hold before dropping copies.
    pub buffer_frames: usize,
    pub snaplen: u32,
    pub ethertype_filter: Option<u16>,
}

pub const DEFAULT_SNAPLEN: u32 = 65_535;
pub const DEFAULT_SPAN_BUFFER: usize = 64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub taps: Vec<Tap>,
    pub spans: Vec<Span>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: impl Into<String>, mac: MacAddress, kind: NodeKind) -> NodeId {
        self.nodes.push(Node {
            name: name.into(),
            mac,
            kind,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Adds a 100 Mb/s link with no propagation delay.
    pub fn connect(&mut self, a: NodeId, b: NodeId) -> LinkId {
        let name = format!(
            "{}-{}",
            self.nodes.get(a.0).map_or("?", |n| n.name.as_str()),
            self.nodes.get(b.0).map_or("?", |n| n.name.as_str())
        );
        self.add_link(Link {
            name,
            a,
            b,
            bandwidth_bps: DEFAULT_BANDWIDTH_BPS,
            propagation_ns: 0,
            loss_probability: 0.0,
        })
    }

    pub fn add_link(&mut self, link: Link) -> LinkId {
        self.links.push(link);
        LinkId(self.links.len() - 1)
    }

    pub fn add_tap(&mut self, capture_id: impl Into<String>, link: LinkId) {
        self.taps.push(Tap {
            capture_id: capture_id.into(),
            link,
            near: None,
            snaplen: DEFAULT_SNAPLEN,
            ethertype_filter: None,
        });
    }

    pub fn add_span(&mut self, span: Span) {
        self.spans.push(span);
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn link_by_name(&self, name: &str) -> Option<LinkId> {
        self.links.iter().position(|l| l.name == name).map(LinkId)
    }

    pub fn switch_config_mut(&mut self, id: NodeId) -> Option<&mut SwitchConfig> {
        match &mut self.nodes.get_mut(id.0)?.kind {
            NodeKind::Switch(c) => Some(c),
            _ => None,
        }
    }

    /// Links attached to `n`, in link order. Port `i` of a node is the
    /// `i`-th entry.
    pub fn ports_of(&self, n: NodeId) -> Vec<LinkId> {
        (0..self.links.len())
            .map(LinkId)
            .filter(|&l| self.links[l.0].touches(n))
            .collect()
    }

    fn link_ok(&self, l: LinkId) -> bool {
        l.0 < self.links.len()
    }

    /// Every structural fault, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut names = BTreeSet::new();
        for n in &self.nodes {
            if !names.insert(n.name.as_str()) {
                errs.push(format!("node {:?}: duplicate name", n.name));
            }
        }
        let mut link_names = BTreeSet::new();
        for l in &self.links {
            if !link_names.insert(l.name.as_str()) {
                errs.push(format!("link {:?}: duplicate name", l.name));
            }
            for end in [l.a, l.b] {
                if end.0 >= self.nodes.len() {
                    errs.push(format!("link {:?}: endpoint {} does not exist", l.name, end.0));
                }
            }
            if l.a == l.b {
                errs.push(format!("link {:?}: both ends on the same node", l.name));
            }
            if l.bandwidth_bps == 0 {
                errs.push(format!("link {:?}: bandwidth must be positive", l.name));
            }
            if !(0.0..1.0).contains(&l.loss_probability) {
                errs.push(format!(
                    "link {:?}: loss probability {} outside [0, 1)",
                    l.name, l.loss_probability
                ));
            }
        }
        if !errs.is_empty() {
            return errs;
        }

        for (i, n) in self.nodes.iter().enumerate() {
            let ports = self.ports_of(NodeId(i));
            match &n.kind {
                NodeKind::Switch(cfg) => {
                    if cfg.queue_limit == Some(0) {
                        errs.push(format!("switch {:?}: queue limit must be positive", n.name));
                    }
                    for (mac, l) in &cfg.static_macs {
                        if !ports.contains(l) {
                            errs.push(format!(
                                "switch {:?}: static entry {mac} points at a link not attached to it",
                                n.name
                            ));
                        }
                    }
                    for (vid, members) in &cfg.vlans {
                        if *vid == 0 || *vid > 4094 {
                            errs.push(format!("switch {:?}: VLAN id {vid} out of range", n.name));
                        }
                        for l in members {
                            if !ports.contains(l) {
                                errs.push(format!(
                                    "switch {:?}: VLAN {vid} member is not one of its ports",
                                    n.name
                                ));
                            }
                        }
                    }
                }
                _ => {
                    if ports.len() > 1 {
                        errs.push(format!(
                            "node {:?}: end stations have a single port, found {}",
                            n.name,
                            ports.len()
                        ));
                    }
                }
            }
        }

        let mut capture_ids = BTreeSet::new();
        for t in &self.taps {
            if !capture_ids.insert(t.capture_id.as_str()) {
                errs.push(format!("tap {:?}: duplicate capture id", t.capture_id));
            }
            if !self.link_ok(t.link) {
                errs.push(format!("tap {:?}: link {} does not exist", t.capture_id, t.link.0));
            } else if let Some(near) = t.near {
                if !self.links[t.link.0].touches(near) {
                    errs.push(format!(
                        "tap {:?}: near-side node is not an endpoint of the tapped link",
                        t.capture_id
                    ));
                }
            }
            if t.snaplen == 0 {
                errs.push(format!("tap {:?}: snaplen must be positive", t.capture_id));
            }
        }
        for s in &self.spans {
            if !capture_ids.insert(s.capture_id.as_str()) {
                errs.push(format!("span {:?}: duplicate capture id", s.capture_id));
            }
            if s.switch.0 >= self.nodes.len() || !self.nodes[s.switch.0].is_switch() {
                errs.push(format!("span {:?}: mirroring node is not a switch", s.capture_id));
                continue;
            }
            let ports = self.ports_of(s.switch);
            if !ports.contains(&s.mirror) {
                errs.push(format!("span {:?}: mirror port is not on the switch", s.capture_id));
            }
            if s.sources.contains(&s.mirror) {
                errs.push(format!(
                    "span {:?}: mirror port is also a source port",
                    s.capture_id
                ));
            }
            if s.sources.is_empty() {
                errs.push(format!("span {:?}: no source ports", s.capture_id));
            }
            for l in &s.sources {
                if !ports.contains(l) {
                    errs.push(format!(
                        "span {:?}: source link {} is not on the switch",
                        s.capture_id, l.0
                    ));
                }
            }
            if s.buffer_frames == 0 {
                errs.push(format!("span {:?}: buffer must hold at least one frame", s.capture_id));
            }
            if s.snaplen == 0 {
                errs.push(format!("span {:?}: snaplen must be positive", s.capture_id));
            }
        }
        let mirrors: Vec<LinkId> = self.spans.iter().map(|s| s.mirror).collect();
        for (i, m) in mirrors.iter().enumerate() {
            if mirrors[..i].contains(m) {
                errs.push(format!("link {}: used as mirror port twice", m.0));
            }
        }
        errs
    }
}
