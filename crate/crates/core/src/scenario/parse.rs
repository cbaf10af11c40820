use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use crate::codec::{FrameLimits, MacAddress, VlanTag, ETHERTYPE_GOOSE, ETHERTYPE_IPV4, ETHERTYPE_SV};
use crate::engine::{Ratio, RetransmissionProfile, TatlPolicy};
use crate::netsim::{
    ArrivalLaw, BackgroundTraffic, GooseTraffic, Link, LinkId, NodeId, NodeKind, SimConfig,
    Simulation, Span, SvTraffic, SwitchConfig, Tap, Topology, TrafficKind, TrafficSpec,
    DEFAULT_BANDWIDTH_BPS, DEFAULT_SNAPLEN, DEFAULT_SPAN_BUFFER,
};
use crate::units::parse_duration;

use super::{AnalysisSpec, Scenario, ScenarioError, DEFAULT_DURATION_NS};

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: Cell<bool>,
}

struct Section {
    kind: String,
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn label(&self) -> String {
        match &self.name {
            Some(n) => format!("{} {n}", self.kind),
            None => self.kind.clone(),
        }
    }
}

fn lex(text: &str, errs: &mut Vec<ScenarioError>) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let Some(header) = header.strip_suffix(']') else {
                errs.push(ScenarioError::new(line, "", None, "section header lacks ']'"));
                continue;
            };
            let mut parts = header.split_whitespace();
            let kind = parts.next().unwrap_or("").to_string();
            let name = parts.next().map(str::to_string);
            if parts.next().is_some() || kind.is_empty() {
                errs.push(ScenarioError::new(
                    line,
                    header,
                    None,
                    "section header must be [kind] or [kind name]",
                ));
            }
            sections.push(Section {
                kind,
                name,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(section) = sections.last_mut() else {
            errs.push(ScenarioError::new(line, "", None, "entry outside of any section"));
            continue;
        };
        match content.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => section.entries.push(Entry {
                key: k.trim().to_string(),
                value: v.trim().to_string(),
                line,
                used: Cell::new(false),
            }),
            _ => errs.push(ScenarioError::new(
                line,
                &section.label(),
                None,
                "expected key = value",
            )),
        }
    }
    sections
}

/// Typed access to one section's entries, recording every problem.
struct Fields<'a> {
    sec: &'a Section,
    errs: &'a mut Vec<ScenarioError>,
}

impl<'a> Fields<'a> {
    fn new(sec: &'a Section, errs: &'a mut Vec<ScenarioError>) -> Self {
        Fields { sec, errs }
    }

    fn err(&mut self, line: usize, key: Option<&str>, msg: impl Into<String>) {
        self.errs
            .push(ScenarioError::new(line, &self.sec.label(), key, msg));
    }

    fn all(&mut self, key: &str) -> Vec<&'a Entry> {
        let found: Vec<&'a Entry> = self.sec.entries.iter().filter(|e| e.key == key).collect();
        for e in &found {
            e.used.set(true);
        }
        found
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let found = self.all(key);
        if found.len() > 1 {
            self.err(found[1].line, Some(key), "given more than once");
        }
        found.first().copied()
    }

    fn get<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        let e = self.entry(key)?;
        match parse(&e.value) {
            Ok(v) => Some(v),
            Err(m) => {
                self.err(e.line, Some(key), m);
                None
            }
        }
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        if self.sec.entries.iter().all(|e| e.key != key) {
            let line = self.sec.line;
            self.err(line, Some(key), "required");
            return None;
        }
        self.get(key, parse)
    }

    fn line_of(&self, key: &str) -> usize {
        self.sec
            .entries
            .iter()
            .find(|e| e.key == key)
            .map_or(self.sec.line, |e| e.line)
    }

    fn finish(self) {
        for e in &self.sec.entries {
            if !e.used.get() {
                self.errs.push(ScenarioError::new(
                    e.line,
                    &self.sec.label(),
                    Some(&e.key),
                    "unknown key",
                ));
            }
        }
    }
}

fn int<T: TryFrom<u64>>(s: &str) -> Result<T, String> {
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.replace('_', "").parse(),
    }
    .map_err(|_| format!("{s:?} is not a non-negative integer"))?;
    T::try_from(v).map_err(|_| format!("{s} is out of range"))
}

fn float(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("{s:?} is not a number"))
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("{s:?} is not true or false")),
    }
}

fn duration(s: &str) -> Result<u64, String> {
    parse_duration(s).map_err(|e| e.to_string())
}

fn mac(s: &str) -> Result<MacAddress, String> {
    s.parse::<MacAddress>().map_err(|e| e.to_string())
}

fn bandwidth(s: &str) -> Result<u64, String> {
    let (num, scale) = match s.chars().last() {
        Some('k' | 'K') => (&s[..s.len() - 1], 1_000),
        Some('M') => (&s[..s.len() - 1], 1_000_000),
        Some('G') => (&s[..s.len() - 1], 1_000_000_000),
        _ => (s, 1),
    };
    let v: u64 = num
        .parse()
        .map_err(|_| format!("{s:?} is not a bandwidth like 100M or 1G"))?;
    match v.checked_mul(scale) {
        Some(0) => Err("bandwidth must be positive".into()),
        Some(b) => Ok(b),
        None => Err(format!("{s} is too large")),
    }
}

fn ratio(s: &str) -> Result<Ratio, String> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: u64 = n.trim().parse().map_err(|_| format!("{s:?} is not a ratio like 2 or 3/2"))?;
    let d: u64 = d.trim().parse().map_err(|_| format!("{s:?} is not a ratio like 2 or 3/2"))?;
    Ratio::new(n, d).map_err(|e| e.to_string())
}

fn list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|x| x.trim().to_string())
        .filter(|x| !x.is_empty())
        .collect()
}

fn durations(s: &str) -> Result<Vec<u64>, String> {
    list(s).iter().map(|d| duration(d)).collect()
}

fn ethertype_filter(s: &str) -> Result<u16, String> {
    match s {
        "goose" => Ok(ETHERTYPE_GOOSE),
        "sv" => Ok(ETHERTYPE_SV),
        "ipv4" => Ok(ETHERTYPE_IPV4),
        other => int::<u16>(other).map_err(|_| format!("{s:?} is not goose, sv, ipv4 or an ethertype")),
    }
}

fn law(s: &str) -> Result<ArrivalLaw, String> {
    match s {
        "periodic" => Ok(ArrivalLaw::Periodic),
        "poisson" => Ok(ArrivalLaw::Poisson),
        _ => Err(format!("{s:?} is not periodic or poisson")),
    }
}

fn priority(s: &str) -> Result<u8, String> {
    let p: u8 = int(s)?;
    if p > 7 {
        return Err(format!("priority {p} exceeds 7"));
    }
    Ok(p)
}

fn vid(s: &str) -> Result<u16, String> {
    let v: u16 = int(s)?;
    if v > 4094 {
        return Err(format!("VLAN id {v} exceeds 4094"));
    }
    Ok(v)
}

fn load_fraction(s: &str) -> Result<f64, String> {
    let v = float(s)?;
    if !(0.0..1.0).contains(&v) {
        return Err(format!("{v} outside [0, 1)"));
    }
    Ok(v)
}

#[derive(Default)]
struct Names {
    nodes: BTreeMap<String, NodeId>,
    links: BTreeMap<String, LinkId>,
    /// Every declared link, including ones that failed to resolve, so
    /// one bad link is reported once rather than at every reference.
    declared_links: BTreeSet<String>,
    captures: BTreeSet<String>,
}

impl Names {
    fn node(&self, f: &mut Fields<'_>, key: &str, required: bool) -> Option<NodeId> {
        let name = if required {
            f.required(key, |s| Ok(s.to_string()))?
        } else {
            f.get(key, |s| Ok(s.to_string()))?
        };
        let found = self.nodes.get(&name).copied();
        if found.is_none() {
            let line = f.line_of(key);
            f.err(line, Some(key), format!("no node named {name:?}"));
        }
        found
    }

    fn link_named(&self, f: &mut Fields<'_>, key: &str, name: &str) -> Option<LinkId> {
        let found = self.links.get(name).copied();
        if found.is_none() && !self.declared_links.contains(name) {
            let line = f.line_of(key);
            f.err(line, Some(key), format!("no link named {name:?}"));
        }
        found
    }

    fn link(&self, f: &mut Fields<'_>, key: &str) -> Option<LinkId> {
        let name = f.required(key, |s| Ok(s.to_string()))?;
        self.link_named(f, key, &name)
    }

    /// A MAC literal or the name of a node.
    fn address(&self, topo: &Topology, f: &mut Fields<'_>, key: &str) -> Option<MacAddress> {
        let e = f.entry(key)?;
        if let Ok(m) = e.value.parse::<MacAddress>() {
            return Some(m);
        }
        match self.nodes.get(&e.value) {
            Some(id) => Some(topo.node(*id).mac),
            None => {
                f.err(e.line, Some(key), format!("{:?} is neither a MAC address nor a node", e.value));
                None
            }
        }
    }
}

const NODE_KINDS: [&str; 3] = ["switch", "ied", "generator"];

/// Parses and fully validates scenario text. All problems are reported,
/// each with its line.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, Vec<ScenarioError>> {
    let mut errs = Vec::new();
    let sections = lex(text, &mut errs);
    let mut topo = Topology::new();
    let mut names = Names::default();

    let known = [
        "scenario", "switch", "ied", "generator", "link", "tap", "span", "goose", "sv",
        "background", "analysis",
    ];
    for s in &sections {
        if !known.contains(&s.kind.as_str()) {
            errs.push(ScenarioError::new(s.line, &s.label(), None, "unknown section kind"));
        } else if s.kind != "scenario" && s.kind != "analysis" && s.name.is_none() {
            errs.push(ScenarioError::new(s.line, &s.kind, None, "section needs a name"));
        } else if (s.kind == "scenario" || s.kind == "analysis") && s.name.is_some() {
            errs.push(ScenarioError::new(s.line, &s.label(), None, "section takes no name"));
        }
    }
    let named = |kind: &'static str| {
        sections
            .iter()
            .filter(move |s| s.kind == kind && s.name.is_some())
    };
    for kind in ["scenario", "analysis"] {
        if let Some(dup) = sections.iter().filter(|s| s.kind == kind).nth(1) {
            errs.push(ScenarioError::new(dup.line, kind, None, "section given more than once"));
        }
    }

    // scenario-wide settings
    let mut name = "scenario".to_string();
    let mut duration_ns = DEFAULT_DURATION_NS;
    let mut seed = 1;
    let mut output = None;
    let mut limits = FrameLimits::default();
    if let Some(s) = sections.iter().find(|s| s.kind == "scenario") {
        let mut f = Fields::new(s, &mut errs);
        if let Some(n) = f.get("name", |v| Ok(v.to_string())) {
            name = n;
        }
        if let Some(d) = f.get("duration", duration) {
            if d == 0 {
                let line = f.line_of("duration");
                f.err(line, Some("duration"), "must be positive");
            }
            duration_ns = d;
        }
        if let Some(v) = f.get("seed", int::<u64>) {
            seed = v;
        }
        output = f.get("output", |v| Ok(PathBuf::from(v)));
        if f.get("strict_frames", boolean) == Some(true) {
            limits = FrameLimits::strict();
        }
        f.finish();
    }

    // nodes
    let mut auto_mac = 0u8;
    for s in sections.iter().filter(|s| NODE_KINDS.contains(&s.kind.as_str()) && s.name.is_some()) {
        let node_name = s.name.clone().expect("named");
        let mut f = Fields::new(s, &mut errs);
        auto_mac = auto_mac.wrapping_add(1);
        let m = f.get("mac", mac).unwrap_or(MacAddress([0x02, 0, 0, 0, 0xff, auto_mac]));
        let kind = match s.kind.as_str() {
            "switch" => {
                let mut cfg = SwitchConfig::default();
                if let Some(v) = f.get("processing_latency", duration) {
                    cfg.processing_latency_ns = v;
                }
                cfg.queue_limit = f.get("queue_limit", int::<usize>);
                // vlan and static entries reference links: resolved below
                f.all("vlan");
                f.all("static");
                NodeKind::Switch(cfg)
            }
            "ied" => NodeKind::Ied,
            _ => NodeKind::TrafficGen,
        };
        f.finish();
        if names.nodes.contains_key(&node_name) {
            errs.push(ScenarioError::new(s.line, &s.label(), None, "duplicate node name"));
            continue;
        }
        let id = topo.add_node(node_name.clone(), m, kind);
        names.nodes.insert(node_name, id);
    }

    // links
    names.declared_links = named("link").filter_map(|s| s.name.clone()).collect();
    for s in named("link") {
        let link_name = s.name.clone().expect("named");
        let mut f = Fields::new(s, &mut errs);
        let a = names.node(&mut f, "a", true);
        let b = names.node(&mut f, "b", true);
        let bw = f.get("bandwidth", bandwidth).unwrap_or(DEFAULT_BANDWIDTH_BPS);
        let prop = f.get("propagation", duration).unwrap_or(0);
        let loss = f
            .get("loss", |v| {
                let p = float(v)?;
                if (0.0..1.0).contains(&p) {
                    Ok(p)
                } else {
                    Err(format!("{p} outside [0, 1)"))
                }
            })
            .unwrap_or(0.0);
        f.finish();
        if names.links.contains_key(&link_name) {
            errs.push(ScenarioError::new(s.line, &s.label(), None, "duplicate link name"));
            continue;
        }
        if let (Some(a), Some(b)) = (a, b) {
            if a == b {
                errs.push(ScenarioError::new(s.line, &s.label(), Some("b"), "both ends on one node"));
                continue;
            }
            let id = topo.add_link(Link {
                name: link_name.clone(),
                a,
                b,
                bandwidth_bps: bw,
                propagation_ns: prop,
                loss_probability: loss,
            });
            names.links.insert(link_name, id);
        }
    }

    // switch tables
    for s in named("switch") {
        let Some(&id) = names.nodes.get(s.name.as_deref().expect("named")) else {
            continue;
        };
        let mut f = Fields::new(s, &mut errs);
        let mut vlans: BTreeMap<u16, BTreeSet<LinkId>> = BTreeMap::new();
        for e in f.all("vlan") {
            let Some((v, members)) = e.value.split_once(':') else {
                f.err(e.line, Some("vlan"), "expected `vid: link, link, ...`");
                continue;
            };
            let v = match vid(v.trim()) {
                Ok(0) => {
                    f.err(e.line, Some("vlan"), "VLAN id 0 cannot carry a membership");
                    continue;
                }
                Ok(v) => v,
                Err(m) => {
                    f.err(e.line, Some("vlan"), m);
                    continue;
                }
            };
            for l in list(members) {
                match names.links.get(&l) {
                    Some(&lid) if topo.link(lid).touches(id) => {
                        vlans.entry(v).or_default().insert(lid);
                    }
                    Some(_) => f.err(e.line, Some("vlan"), format!("link {l:?} is not on this switch")),
                    None => f.err(e.line, Some("vlan"), format!("no link named {l:?}")),
                }
            }
        }
        let mut statics = Vec::new();
        for e in f.all("static") {
            let mut parts = e.value.split_whitespace();
            let (Some(m), Some(l), None) = (parts.next(), parts.next(), parts.next()) else {
                f.err(e.line, Some("static"), "expected `MAC link`");
                continue;
            };
            match (mac(m), names.links.get(l)) {
                (Ok(m), Some(&lid)) if topo.link(lid).touches(id) => statics.push((m, lid)),
                (Ok(_), Some(_)) => f.err(e.line, Some("static"), format!("link {l:?} is not on this switch")),
                (Err(msg), _) => f.err(e.line, Some("static"), msg),
                (_, None) => f.err(e.line, Some("static"), format!("no link named {l:?}")),
            }
        }
        // every other key was already checked in the node pass
        let cfg = topo.switch_config_mut(id).expect("switch");
        cfg.vlans = vlans;
        cfg.static_macs = statics;
    }

    // capture points
    for s in named("tap") {
        let capture_id = s.name.clone().expect("named");
        let mut f = Fields::new(s, &mut errs);
        let link = names.link(&mut f, "link");
        let near = names.node(&mut f, "near", false);
        let snaplen = f.get("snaplen", int::<u32>).unwrap_or(DEFAULT_SNAPLEN);
        let filter = f.get("filter", ethertype_filter);
        if let (Some(l), Some(n)) = (link, near) {
            if !topo.link(l).touches(n) {
                let line = f.line_of("near");
                f.err(line, Some("near"), "not an endpoint of the tapped link");
            }
        }
        if snaplen == 0 {
            let line = f.line_of("snaplen");
            f.err(line, Some("snaplen"), "must be positive");
        }
        f.finish();
        if let Some(link) = link {
            topo.taps.push(Tap {
                capture_id,
                link,
                near,
                snaplen,
                ethertype_filter: filter,
            });
        }
    }
    for s in named("span") {
        let capture_id = s.name.clone().expect("named");
        let mut f = Fields::new(s, &mut errs);
        let switch = names.node(&mut f, "switch", true);
        let mirror = names.link(&mut f, "mirror");
        let mut sources = Vec::new();
        if let Some(srcs) = f.required("sources", |v| Ok(list(v))) {
            for l in srcs {
                if let Some(id) = names.link_named(&mut f, "sources", &l) {
                    sources.push(id);
                }
            }
        }
        let buffer_frames = f.get("buffer", int::<usize>).unwrap_or(DEFAULT_SPAN_BUFFER);
        let snaplen = f.get("snaplen", int::<u32>).unwrap_or(DEFAULT_SNAPLEN);
        let filter = f.get("filter", ethertype_filter);
        if let Some(m) = mirror {
            if sources.contains(&m) {
                let line = f.line_of("sources");
                f.err(line, Some("sources"), "mirror port is also a source port");
            }
        }
        f.finish();
        if let (Some(switch), Some(mirror)) = (switch, mirror) {
            topo.spans.push(Span {
                capture_id,
                switch,
                mirror,
                sources,
                buffer_frames,
                snaplen,
                ethertype_filter: filter,
            });
        }
    }

    // traffic
    let mut traffic = Vec::new();
    for s in sections.iter().filter(|s| {
        matches!(s.kind.as_str(), "goose" | "sv" | "background") && s.name.is_some()
    }) {
        let tname = s.name.clone().expect("named");
        let mut f = Fields::new(s, &mut errs);
        let source = names.node(&mut f, "source", true);
        let start_ns = f.get("start", duration).unwrap_or(0);
        let kind = match s.kind.as_str() {
            "goose" => goose_section(&mut f, &names, &topo, &tname, source, duration_ns, start_ns),
            "sv" => sv_section(&mut f, &names, &topo, &tname),
            _ => background_section(&mut f, &names, &topo),
        };
        f.finish();
        if let (Some(source), Some(kind)) = (source, kind) {
            if topo.node(source).is_switch() {
                errs.push(ScenarioError::new(
                    s.line,
                    &s.label(),
                    Some("source"),
                    "a switch cannot originate traffic",
                ));
                continue;
            }
            traffic.push(TrafficSpec {
                name: tname,
                source,
                start_ns,
                kind,
            });
        }
    }

    names.captures = sections
        .iter()
        .filter(|s| s.kind == "tap" || s.kind == "span")
        .filter_map(|s| s.name.clone())
        .collect();
    let analysis = sections
        .iter()
        .find(|s| s.kind == "analysis")
        .and_then(|s| analysis_section(s, &mut errs, &names, &topo));

    if !errs.is_empty() {
        errs.sort_by_key(|e| e.line);
        return Err(errs);
    }

    // whole-model checks that need everything resolved
    let config = SimConfig {
        limits,
        ..Default::default()
    };
    if let Err(e) = Simulation::build(topo.clone(), traffic.clone(), seed, config) {
        let messages = match e {
            crate::netsim::SimError::Validation(v) => v,
            other => vec![other.to_string()],
        };
        return Err(messages
            .into_iter()
            .map(|m| ScenarioError::new(0, "model", None, m))
            .collect());
    }
    Ok(Scenario {
        name,
        duration_ns,
        seed,
        limits,
        topology: topo,
        traffic,
        analysis,
        output,
        text: text.to_string(),
    })
}

fn tag(f: &mut Fields<'_>, default_priority: u8) -> Option<Option<VlanTag>> {
    let tagged = f.get("tagged", boolean).unwrap_or(true);
    let p = f.get("priority", priority).unwrap_or(default_priority);
    let v = f.get("vid", vid).unwrap_or(0);
    if !tagged {
        return Some(None);
    }
    VlanTag::new(p, false, v).ok().map(Some)
}

fn goose_section(
    f: &mut Fields<'_>,
    names: &Names,
    topo: &Topology,
    tname: &str,
    source: Option<NodeId>,
    duration_ns: u64,
    start_ns: u64,
) -> Option<TrafficKind> {
    let ied = source.map_or("IED".to_string(), |s| topo.node(s).name.clone());
    let mut g = GooseTraffic::new(&ied, tname);
    if let Some(d) = names.address(topo, f, "dst") {
        g.dst = d;
    }
    if let Some(a) = f.get("appid", int::<u16>) {
        g.appid = a;
    }
    g.vlan = tag(f, 4)?;
    if let Some(v) = f.get("gocb_ref", |s| Ok(s.to_string())) {
        g.identity.gocb_ref = v;
    }
    if let Some(v) = f.get("dat_set", |s| Ok(s.to_string())) {
        g.identity.dat_set = v;
    }
    if let Some(v) = f.get("go_id", |s| Ok(s.to_string())) {
        g.identity.go_id = v;
    }
    if let Some(v) = f.get("conf_rev", int::<u32>) {
        g.identity.conf_rev = v;
    }
    if let Some(v) = f.get("test", boolean) {
        g.identity.test = v;
    }
    g.frame_bytes = f.get("frame_bytes", int::<usize>);

    let profile_line = f.line_of("t0");
    let gaps = f.get("gaps", durations);
    let t0 = f.get("t0", duration);
    let mult = f.get("multiplier", ratio);
    let tmax = f.get("tmax", duration);
    let profile = match gaps {
        Some(g) => {
            if t0.is_some() || mult.is_some() || tmax.is_some() {
                f.err(profile_line, Some("gaps"), "gaps replace t0/multiplier/tmax; give one or the other");
            }
            RetransmissionProfile::table(g)
        }
        None => RetransmissionProfile::geometric(
            t0.unwrap_or(6_500_000),
            mult.unwrap_or(Ratio::integer(2)),
            tmax.unwrap_or(350_000_000),
        ),
    };
    let profile = match profile {
        Ok(p) => p,
        Err(e) => {
            f.err(profile_line, Some("t0"), e.to_string());
            return None;
        }
    };
    let tatl = match (f.get("tatl", duration), f.get("tatl_factor", ratio)) {
        (Some(_), Some(_)) => {
            let line = f.line_of("tatl");
            f.err(line, Some("tatl"), "give tatl or tatl_factor, not both");
            return None;
        }
        (Some(ns), None) if ns % 1_000_000 != 0 || ns == 0 => {
            let line = f.line_of("tatl");
            f.err(line, Some("tatl"), "must be a positive whole number of milliseconds");
            return None;
        }
        (Some(ns), None) => TatlPolicy::FixedMs(u32::try_from(ns / 1_000_000).unwrap_or(u32::MAX)),
        (None, Some(r)) => TatlPolicy::Factor(r),
        (None, None) => TatlPolicy::Factor(Ratio::integer(2)),
    };
    g.profile = match profile.with_tatl(tatl) {
        Ok(p) => p,
        Err(e) => {
            let line = f.line_of("tatl_factor");
            f.err(line, Some("tatl_factor"), e.to_string());
            return None;
        }
    };

    let events = f.get("events", durations);
    let period = f.get("event_period", duration);
    let first = f.get("event_start", duration);
    g.event_times_ns = match (events, period) {
        (Some(_), Some(_)) => {
            let line = f.line_of("events");
            f.err(line, Some("events"), "give events or event_period, not both");
            return None;
        }
        (Some(e), None) => {
            if e.windows(2).any(|w| w[0] > w[1]) {
                let line = f.line_of("events");
                f.err(line, Some("events"), "times must be non-decreasing");
            }
            e
        }
        (None, Some(0)) => {
            let line = f.line_of("event_period");
            f.err(line, Some("event_period"), "must be positive");
            return None;
        }
        (None, Some(p)) => {
            let span = duration_ns.saturating_sub(start_ns);
            (0..)
                .map(|k| first.unwrap_or(0) + k * p)
                .take_while(|&t| t < span)
                .collect()
        }
        (None, None) => vec![first.unwrap_or(0)],
    };
    Some(TrafficKind::Goose(g))
}

fn sv_section(f: &mut Fields<'_>, names: &Names, topo: &Topology, tname: &str) -> Option<TrafficKind> {
    let spc = f.required("samples_per_cycle", int::<u32>);
    let freq = f.required("frequency", int::<u32>);
    let mut sv = SvTraffic::new(tname, spc.unwrap_or(1), freq.unwrap_or(1));
    if let Some(v) = f.get("sv_id", |s| Ok(s.to_string())) {
        sv.sv_id = v;
    }
    if let Some(v) = f.get("frame_bytes", int::<usize>) {
        sv.frame_bytes = v;
    }
    if let Some(v) = f.get("priority", priority) {
        sv.priority = v;
    }
    if let Some(v) = f.get("vid", vid) {
        sv.vid = v;
    }
    if let Some(v) = names.address(topo, f, "dst") {
        sv.dst = v;
    }
    if let Some(v) = f.get("appid", int::<u16>) {
        sv.appid = v;
    }
    if let Some(v) = f.get("burst", int::<u32>) {
        sv.burst = v;
    }
    for (key, v) in [("samples_per_cycle", spc), ("frequency", freq)] {
        if v == Some(0) {
            let line = f.line_of(key);
            f.err(line, Some(key), "must be positive");
        }
    }
    spc?;
    freq?;
    Some(TrafficKind::Sv(sv))
}

fn background_section(f: &mut Fields<'_>, names: &Names, topo: &Topology) -> Option<TrafficKind> {
    let load = f.required("load", load_fraction);
    let dst = names.address(topo, f, "dst");
    if dst.is_none() && f.sec.entries.iter().all(|e| e.key != "dst") {
        let line = f.sec.line;
        f.err(line, Some("dst"), "required");
    }
    let mut b = BackgroundTraffic::new(load.unwrap_or(0.0), 1000, dst.unwrap_or_default());
    if let Some(v) = f.get("frame_bytes", int::<usize>) {
        b.frame_bytes = v;
    }
    if let Some(v) = f.get("priority", priority) {
        b.priority = v;
    }
    if let Some(v) = f.get("vid", vid) {
        b.vid = v;
    }
    if let Some(v) = f.get("law", law) {
        b.law = v;
    }
    if let Some(v) = f.get("burst", int::<u32>) {
        b.burst = v;
    }
    b.reference_bps = f.get("reference_bandwidth", bandwidth);
    load?;
    dst?;
    Some(TrafficKind::Background(b))
}

fn analysis_section(
    s: &Section,
    errs: &mut Vec<ScenarioError>,
    names: &Names,
    topo: &Topology,
) -> Option<AnalysisSpec> {
    let mut f = Fields::new(s, errs);
    let publisher = names.address(topo, &mut f, "publisher");
    if publisher.is_none() && s.entries.iter().all(|e| e.key != "publisher") {
        f.err(s.line, Some("publisher"), "required");
    }
    let captures = &names.captures;
    let capture = |f: &mut Fields<'_>, key: &str| {
        let c = f.required(key, |v| Ok(v.to_string()))?;
        if !captures.contains(&c) {
            let line = f.line_of(key);
            f.err(line, Some(key), format!("no tap or span named {c:?}"));
            return None;
        }
        Some(c)
    };
    let pub_capture = capture(&mut f, "pub_capture");
    let sub_capture = capture(&mut f, "sub_capture");
    let threshold_ns = f
        .get("threshold", duration)
        .unwrap_or(crate::analyzer::DEFAULT_THRESHOLD_NS);
    let window_ns = f.get("window", duration).unwrap_or(crate::analyzer::DEFAULT_WINDOW_NS);
    let load_link = f
        .get("load_link", |v| Ok(v.to_string()))
        .and_then(|l| names.link_named(&mut f, "load_link", &l));
    let load_from = names.node(&mut f, "load_from", false);
    if let (Some(l), Some(n)) = (load_link, load_from) {
        if !topo.link(l).touches(n) {
            let line = f.line_of("load_from");
            f.err(line, Some("load_from"), "not an endpoint of load_link");
        }
    }
    f.finish();
    Some(AnalysisSpec {
        publisher: publisher?,
        pub_capture: pub_capture?,
        sub_capture: sub_capture?,
        threshold_ns,
        window_ns,
        load_link: load_link.map(|l| (l, load_from.unwrap_or(topo.link(l).a))),
    })
}
