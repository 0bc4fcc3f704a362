//! Passive topology: L2 adjacency at the tap, L3 communication graph,
//! service dependencies and resiliency structure.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use crate::decoders::{FlowRecord, PacketObservation, ProtocolEvent};
use crate::pipeline::{DeviceKey, IdentityResolver};
use crate::MacAddr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologyParams {
    pub gw_k: usize,
    pub min_evidence: u64,
    pub hidden_k: usize,
    pub hidden_share: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            gw_k: 5,
            min_evidence: 3,
            hidden_k: 3,
            hidden_share: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct L2Node {
    pub is_gateway_candidate: bool,
    pub frames_sent: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct L2Graph {
    pub nodes: BTreeMap<MacAddr, L2Node>,
    /// Unicast frame counts keyed by `(min, max)` MAC.
    pub edges: BTreeMap<(MacAddr, MacAddr), u64>,
    /// Frames to broadcast or multicast destinations.
    pub group_frames: u64,
}

fn canonical<T: Ord>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn build_l2<'a, I>(frames: I) -> L2Graph
where
    I: IntoIterator<Item = &'a PacketObservation>,
{
    let mut g = L2Graph::default();
    for f in frames {
        g.nodes.entry(f.src_mac).or_default().frames_sent += 1;
        if f.dst_mac.is_multicast() {
            g.group_frames += 1;
            continue;
        }
        g.nodes.entry(f.dst_mac).or_default();
        *g.edges.entry(canonical(f.src_mac, f.dst_mac)).or_default() += 1;
    }
    g
}

/// MACs sourcing at least `gw_k` distinct source addresses or receiving
/// for at least `gw_k` distinct destination addresses. Group MACs and the
/// unspecified address are ignored.
pub fn infer_gateways<'a, I>(frames: I, gw_k: usize) -> BTreeSet<MacAddr>
where
    I: IntoIterator<Item = &'a PacketObservation>,
{
    let mut src: BTreeMap<MacAddr, BTreeSet<Ipv4Addr>> = BTreeMap::new();
    let mut dst: BTreeMap<MacAddr, BTreeSet<Ipv4Addr>> = BTreeMap::new();
    for f in frames {
        if let Some(ip) = f.src_ip.filter(|ip| !ip.is_unspecified()) {
            src.entry(f.src_mac).or_default().insert(ip);
        }
        if let Some(ip) = f.dst_ip.filter(|ip| !ip.is_unspecified()) {
            if !f.dst_mac.is_multicast() {
                dst.entry(f.dst_mac).or_default().insert(ip);
            }
        }
    }
    let k = gw_k.max(1);
    src.into_iter()
        .chain(dst)
        .filter(|(_, ips)| ips.len() >= k)
        .map(|(m, _)| m)
        .collect()
}

/// Sets the gateway flag on graph nodes.
pub fn mark_gateways(g: &mut L2Graph, gateways: &BTreeSet<MacAddr>) {
    for (mac, n) in g.nodes.iter_mut() {
        n.is_gateway_candidate = gateways.contains(mac);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum L3Node {
    Device(DeviceKey),
    External(Ipv4Addr),
}

impl L3Node {
    pub fn is_internal(&self) -> bool {
        matches!(self, L3Node::Device(_))
    }
}

impl fmt::Display for L3Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            L3Node::Device(k) => write!(f, "{k}"),
            L3Node::External(ip) => write!(f, "ext:{ip}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct L3NodeInfo {
    pub roles: BTreeSet<alloc::string::String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct L3Edge {
    pub flows: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct L3Graph {
    pub nodes: BTreeMap<L3Node, L3NodeInfo>,
    /// Directed originator → responder.
    pub edges: BTreeMap<(L3Node, L3Node), L3Edge>,
}

impl L3Graph {
    pub fn total_bytes(&self) -> u64 {
        self.edges.values().map(|e| e.bytes).sum()
    }
}

/// Whether an address can name a host endpoint.
fn is_host_address(ip: Ipv4Addr) -> bool {
    !(ip.is_unspecified() || ip.is_broadcast() || ip.is_multicast())
}

pub fn l3_node(ip: Ipv4Addr, ts: crate::Timestamp, resolver: &IdentityResolver) -> L3Node {
    match resolver.resolve(ip, ts) {
        Some(k) => L3Node::Device(k),
        None => L3Node::External(ip),
    }
}

/// Flows with an unspecified, broadcast or multicast endpoint are left out.
pub fn build_l3<'a, I>(flows: I, resolver: &IdentityResolver) -> L3Graph
where
    I: IntoIterator<Item = &'a FlowRecord>,
{
    let mut g = L3Graph::default();
    for f in flows {
        let (a, b) = (f.originator.ip, f.responder().ip);
        if !is_host_address(a) || !is_host_address(b) {
            continue;
        }
        let src = l3_node(a, f.first_ts, resolver);
        let dst = l3_node(b, f.first_ts, resolver);
        g.nodes.entry(src).or_default();
        g.nodes.entry(dst).or_default();
        let e = g.edges.entry((src, dst)).or_default();
        e.flows += 1;
        e.bytes += f.total_bytes();
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Service {
    Dns,
    Dhcp,
    Other(u16),
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Service::Dns => f.write_str("DNS"),
            Service::Dhcp => f.write_str("DHCP"),
            Service::Other(p) => write!(f, "Other({p})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DependencyEdge {
    pub dependent: L3Node,
    pub provider: L3Node,
    pub service: Service,
    pub evidence_count: u64,
}

/// Service dependencies from direct service traffic.
///
/// - DNS: queries from D to R.
/// - DHCP: server messages to a client plus the client's own messages,
///   credited to each server that answered it.
/// - Other(port): flows D → P:port for internal providers P whose port is
///   used by at least two internal dependents.
///
/// Edges need `min_evidence`; the result is sorted.
pub fn infer_dependencies(
    events: &[ProtocolEvent],
    flows: &[FlowRecord],
    resolver: &IdentityResolver,
    min_evidence: u64,
) -> Vec<DependencyEdge> {
    let mut counts: BTreeMap<(L3Node, L3Node, Service), u64> = BTreeMap::new();
    let mut client_msgs: BTreeMap<MacAddr, u64> = BTreeMap::new();
    let mut servers_of: BTreeMap<MacAddr, BTreeSet<L3Node>> = BTreeMap::new();
    for ev in events {
        match ev {
            ProtocolEvent::Dns(d) if !d.is_response => {
                let m = &d.meta;
                if !is_host_address(m.dst_ip) {
                    continue;
                }
                let Some(dep) = resolver.resolve_source(m.src_ip, m.src_mac, m.ts) else {
                    continue;
                };
                let prov = l3_node(m.dst_ip, m.ts, resolver);
                *counts.entry((L3Node::Device(dep), prov, Service::Dns)).or_default() += 1;
            }
            ProtocolEvent::Dhcp(d) => {
                if d.msg_type.is_server_message() {
                    if !is_host_address(d.meta.src_ip) {
                        continue;
                    }
                    let server = l3_node(d.meta.src_ip, d.meta.ts, resolver);
                    servers_of.entry(d.client_mac).or_default().insert(server);
                    let client = L3Node::Device(DeviceKey::Mac(d.client_mac));
                    *counts.entry((client, server, Service::Dhcp)).or_default() += 1;
                } else {
                    *client_msgs.entry(d.client_mac).or_default() += 1;
                }
            }
            _ => {}
        }
    }
    for (mac, n) in client_msgs {
        for server in servers_of.get(&mac).into_iter().flatten() {
            let client = L3Node::Device(DeviceKey::Mac(mac));
            *counts.entry((client, *server, Service::Dhcp)).or_default() += n;
        }
    }

    let mut by_service: BTreeMap<(L3Node, u16), BTreeMap<L3Node, u64>> = BTreeMap::new();
    for f in flows {
        let resp = f.responder();
        if matches!(resp.port, 53 | 67 | 68) || !is_host_address(resp.ip) || !is_host_address(f.originator.ip) {
            continue;
        }
        let dep = l3_node(f.originator.ip, f.first_ts, resolver);
        let prov = l3_node(resp.ip, f.first_ts, resolver);
        if !dep.is_internal() || !prov.is_internal() || dep == prov {
            continue;
        }
        *by_service.entry((prov, resp.port)).or_default().entry(dep).or_default() += 1;
    }
    for ((prov, port), deps) in by_service {
        if deps.len() < 2 {
            continue;
        }
        for (dep, n) in deps {
            counts.insert((dep, prov, Service::Other(port)), n);
        }
    }

    counts
        .into_iter()
        .filter(|(_, n)| *n >= min_evidence.max(1))
        .map(|((dependent, provider, service), evidence_count)| DependencyEdge {
            dependent,
            provider,
            service,
            evidence_count,
        })
        .collect()
}

/// Adds `dns_server`, `dhcp_server` and `service:<port>` role tags to
/// providers present in the graph.
pub fn tag_roles(g: &mut L3Graph, deps: &[DependencyEdge]) {
    for d in deps {
        let role = match d.service {
            Service::Dns => alloc::string::String::from("dns_server"),
            Service::Dhcp => "dhcp_server".into(),
            Service::Other(p) => alloc::format!("service:{p}"),
        };
        g.nodes.entry(d.provider).or_default().roles.insert(role);
    }
}

/// Articulation points of an undirected simple graph on `0..n`.
pub fn articulation_points(n: usize, edges: &[(usize, usize)]) -> BTreeSet<usize> {
    let mut adj = alloc::vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b && a < n && b < n {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut disc = alloc::vec![usize::MAX; n];
    let mut low = alloc::vec![0usize; n];
    let mut out = BTreeSet::new();
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        let mut root_children = 0;
        // (node, parent, next neighbor index)
        let mut stack = alloc::vec![(root, usize::MAX, 0usize)];
        while let Some(&mut (v, parent, ref mut i)) = stack.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if disc[w] == usize::MAX {
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    if v == root {
                        root_children += 1;
                    }
                    stack.push((w, v, 0));
                } else if w != parent {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[v]);
                    if parent != root && low[v] >= disc[parent] {
                        out.insert(parent);
                    }
                }
            }
        }
        if root_children > 1 {
            out.insert(root);
        }
    }
    out
}

/// Articulation points of the undirected internal subgraph.
pub fn find_articulation_points(g: &L3Graph) -> Vec<L3Node> {
    let nodes: Vec<L3Node> = g.nodes.keys().copied().filter(L3Node::is_internal).collect();
    let index: BTreeMap<L3Node, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let edges: Vec<(usize, usize)> = g
        .edges
        .keys()
        .filter_map(|(a, b)| Some((*index.get(a)?, *index.get(b)?)))
        .collect();
    articulation_points(nodes.len(), &edges)
        .into_iter()
        .map(|i| nodes[i])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenComponent {
    pub provider: L3Node,
    pub dependents: usize,
    pub byte_share: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResiliencyReport {
    pub articulation_points: Vec<L3Node>,
    /// `(provider, distinct dependents)`, most depended-on first.
    pub fan_in_ranking: Vec<(L3Node, usize)>,
    pub hidden_components: Vec<HiddenComponent>,
}

/// Share of internal traffic bytes (edges with an internal endpoint) that
/// touch `node`.
pub fn byte_share(g: &L3Graph, node: &L3Node) -> f64 {
    let mut total = 0u64;
    let mut mine = 0u64;
    for ((a, b), e) in &g.edges {
        if a.is_internal() || b.is_internal() {
            total += e.bytes;
            if a == node || b == node {
                mine += e.bytes;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        mine as f64 / total as f64
    }
}

pub fn report_resiliency(g: &L3Graph, deps: &[DependencyEdge], params: &TopologyParams) -> ResiliencyReport {
    let mut dependents: BTreeMap<L3Node, BTreeSet<L3Node>> = BTreeMap::new();
    for d in deps {
        dependents.entry(d.provider).or_default().insert(d.dependent);
    }
    let mut fan_in_ranking: Vec<(L3Node, usize)> = dependents.iter().map(|(p, s)| (*p, s.len())).collect();
    fan_in_ranking.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let hidden_components = fan_in_ranking
        .iter()
        .filter(|(_, n)| *n >= params.hidden_k)
        .map(|(p, n)| HiddenComponent {
            provider: *p,
            dependents: *n,
            byte_share: byte_share(g, p),
        })
        .filter(|h| h.byte_share < params.hidden_share)
        .collect();
    ResiliencyReport {
        articulation_points: if g.nodes.is_empty() {
            Vec::new()
        } else {
            find_articulation_points(g)
        },
        fan_in_ranking,
        hidden_components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{DhcpEvent, DhcpMessageType, DnsEvent, Endpoint, EventMeta, FlowKey, TransportKind};
    use crate::pipeline::bind_identity;
    use crate::Timestamp;
    use alloc::vec;
    use proptest::prelude::*;

    fn mac(i: u8) -> MacAddr {
        MacAddr::new(0x02, 0, 0, 0, 0, i)
    }

    fn ip(i: u8) -> Ipv4Addr {
        Ipv4Addr::new(10, 0, 0, i)
    }

    fn frame(s: MacAddr, d: MacAddr, sip: Ipv4Addr, dip: Ipv4Addr) -> PacketObservation {
        PacketObservation {
            ts: Timestamp::from_secs(1),
            src_mac: s,
            dst_mac: d,
            ethertype: 0x0800,
            frame_len: 60,
            src_ip: Some(sip),
            dst_ip: Some(dip),
            ip_len: 46,
        }
    }

    fn flow(a: Ipv4Addr, b: Ipv4Addr, port: u16, bytes: u64) -> FlowRecord {
        let src = Endpoint::new(a, 40000);
        let dst = Endpoint::new(b, port);
        let (key, _) = FlowKey::from_packet(src, dst, TransportKind::Udp);
        FlowRecord {
            key,
            originator: src,
            first_ts: Timestamp::from_secs(1),
            last_ts: Timestamp::from_secs(2),
            pkts_orig: 1,
            pkts_resp: 0,
            bytes_orig: bytes,
            bytes_resp: 0,
        }
    }

    fn dev(i: u8) -> L3Node {
        L3Node::Device(DeviceKey::Ip { ip: ip(i), epoch: 0 })
    }

    #[test]
    fn l2_single_and_broadcast() {
        let g = build_l2(&[frame(mac(1), mac(2), ip(1), ip(2))]);
        assert_eq!(g.nodes.keys().copied().collect::<Vec<_>>(), [mac(1), mac(2)]);
        assert_eq!(g.edges.get(&(mac(1), mac(2))), Some(&1));
        let g = build_l2(&[frame(mac(1), MacAddr::BROADCAST, ip(1), Ipv4Addr::BROADCAST)]);
        assert_eq!(g.nodes.keys().copied().collect::<Vec<_>>(), [mac(1)]);
        assert!(g.edges.is_empty());
        assert_eq!(g.group_frames, 1);
    }

    #[test]
    fn l2_edges_are_undirected() {
        let g = build_l2(&[frame(mac(2), mac(1), ip(2), ip(1)), frame(mac(1), mac(2), ip(1), ip(2))]);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[&(mac(1), mac(2))], 2);
    }

    #[test]
    fn gateway_threshold() {
        let router = mac(0xfe);
        let ten: Vec<_> = (1..=10)
            .map(|i| frame(mac(i), router, ip(i), Ipv4Addr::new(93, 0, 0, i)))
            .collect();
        assert_eq!(infer_gateways(&ten, 5), [router].into());
        let four: Vec<_> = (1..=4)
            .map(|i| frame(mac(i), router, ip(i), Ipv4Addr::new(93, 0, 0, i)))
            .collect();
        assert!(infer_gateways(&four, 5).is_empty());
        let one = [frame(mac(1), mac(2), ip(1), ip(2))];
        assert!(infer_gateways(&one, 5).is_empty());
        // routed replies: many source addresses behind one MAC
        let replies: Vec<_> = (1..=5)
            .map(|i| frame(router, mac(1), Ipv4Addr::new(93, 0, 0, i), ip(1)))
            .collect();
        assert_eq!(infer_gateways(&replies, 5), [router].into());
    }

    #[test]
    fn l3_weights() {
        let r = bind_identity([], []);
        let ext = Ipv4Addr::new(93, 184, 216, 34);
        let g = build_l3(&[flow(ip(2), ext, 443, 500)], &r);
        assert_eq!(
            g.edges[&(dev(2), L3Node::External(ext))],
            L3Edge { flows: 1, bytes: 500 }
        );
        let g = build_l3(&[flow(ip(2), ext, 443, 500), flow(ip(2), ext, 443, 70)], &r);
        assert_eq!(
            g.edges[&(dev(2), L3Node::External(ext))],
            L3Edge { flows: 2, bytes: 570 }
        );
        let g = build_l3(&[flow(Ipv4Addr::UNSPECIFIED, Ipv4Addr::BROADCAST, 67, 300)], &r);
        assert!(g.edges.is_empty());
    }

    fn meta(src: Ipv4Addr, dst: Ipv4Addr, smac: MacAddr) -> EventMeta {
        EventMeta {
            ts: Timestamp::from_secs(5),
            src_mac: smac,
            dst_mac: mac(1),
            src_ip: src,
            dst_ip: dst,
            src_port: 5353,
            dst_port: 53,
        }
    }

    fn q(i: u8, resolver_ip: Ipv4Addr) -> ProtocolEvent {
        ProtocolEvent::Dns(DnsEvent {
            meta: meta(ip(i), resolver_ip, mac(i)),
            query_name: "a.example".into(),
            qtype: 1,
            answers: vec![],
            is_response: false,
        })
    }

    #[test]
    fn dns_dependency_threshold() {
        let r = bind_identity([], []);
        let ten: Vec<_> = (0..10).map(|_| q(7, ip(1))).collect();
        let deps = infer_dependencies(&ten, &[], &r, 3);
        assert_eq!(
            deps,
            [DependencyEdge {
                dependent: dev(7),
                provider: dev(1),
                service: Service::Dns,
                evidence_count: 10
            }]
        );
        assert!(infer_dependencies(&ten[..2], &[], &r, 3).is_empty());
    }

    fn dhcp(t: DhcpMessageType, client: u8) -> ProtocolEvent {
        let server = t.is_server_message();
        ProtocolEvent::Dhcp(DhcpEvent {
            meta: EventMeta {
                src_port: if server { 67 } else { 68 },
                dst_port: if server { 68 } else { 67 },
                ..meta(
                    if server { ip(1) } else { Ipv4Addr::UNSPECIFIED },
                    Ipv4Addr::BROADCAST,
                    if server { mac(1) } else { mac(client) },
                )
            },
            msg_type: t,
            client_mac: mac(client),
            assigned_ip: server.then(|| ip(client)),
            hostname: None,
            vendor_class: None,
            param_req_list: None,
        })
    }

    #[test]
    fn dhcp_exchange_is_a_dependency() {
        use DhcpMessageType::*;
        let r = bind_identity([], []);
        let evs = vec![dhcp(Discover, 9), dhcp(Offer, 9), dhcp(Request, 9), dhcp(Ack, 9)];
        let deps = infer_dependencies(&evs, &[], &r, 3);
        assert_eq!(deps.len(), 1);
        assert_eq!(deps[0].dependent, L3Node::Device(DeviceKey::Mac(mac(9))));
        assert_eq!((deps[0].service, deps[0].evidence_count), (Service::Dhcp, 4));
        // a client nobody answered depends on nothing
        assert!(infer_dependencies(&[dhcp(Discover, 8), dhcp(Discover, 8), dhcp(Discover, 8)], &[], &r, 3).is_empty());
    }

    #[test]
    fn shared_internal_service() {
        let r = bind_identity([], []);
        let mut flows = Vec::new();
        for d in 10..15 {
            for _ in 0..4 {
                flows.push(flow(ip(d), ip(3), 123, 90));
            }
        }
        // a service with a single dependent is not a shared dependency
        for _ in 0..5 {
            flows.push(flow(ip(10), ip(4), 9000, 10));
        }
        let deps = infer_dependencies(&[], &flows, &r, 3);
        assert_eq!(deps.len(), 5);
        assert!(deps
            .iter()
            .all(|d| d.provider == dev(3) && d.service == Service::Other(123) && d.evidence_count == 4));
    }

    fn brute_force(n: usize, edges: &[(usize, usize)]) -> BTreeSet<usize> {
        let components = |skip: Option<usize>| {
            let mut seen = vec![false; n];
            let mut c = 0;
            for s in 0..n {
                if Some(s) == skip || seen[s] {
                    continue;
                }
                c += 1;
                let mut stack = vec![s];
                seen[s] = true;
                while let Some(v) = stack.pop() {
                    for &(a, b) in edges {
                        for (x, y) in [(a, b), (b, a)] {
                            if x == v && Some(y) != skip && !seen[y] {
                                seen[y] = true;
                                stack.push(y);
                            }
                        }
                    }
                }
            }
            c
        };
        let base = components(None);
        (0..n).filter(|&v| components(Some(v)) > base).collect()
    }

    #[test]
    fn textbook_articulation() {
        assert_eq!(articulation_points(3, &[(0, 1), (1, 2)]), [1].into());
        assert!(articulation_points(3, &[(0, 1), (1, 2), (2, 0)]).is_empty());
        assert!(articulation_points(1, &[]).is_empty());
    }

    #[test]
    fn hidden_dns_server() {
        let r = bind_identity([], []);
        let ext = Ipv4Addr::new(93, 0, 0, 1);
        // 8 dependents of 10.0.0.1, which carries 0.2% of bytes
        let mut flows = vec![flow(ip(1), ext, 53, 20)];
        for d in 10..18 {
            flows.push(flow(ip(d), ext, 443, 1248));
        }
        let g = build_l3(&flows, &r);
        let mut events = Vec::new();
        for d in 10..18 {
            for _ in 0..3 {
                events.push(q(d, ip(1)));
            }
        }
        let deps = infer_dependencies(&events, &[], &r, 3);
        let rep = report_resiliency(&g, &deps, &TopologyParams::default());
        let share: f64 = 20.0 / (20.0 + 8.0 * 1248.0);
        assert!((share - 0.002).abs() < 1e-3);
        assert_eq!(rep.fan_in_ranking, [(dev(1), 8)]);
        assert_eq!(rep.hidden_components.len(), 1);
        assert!((rep.hidden_components[0].byte_share - share).abs() < 1e-12);

        // the same provider carrying half the bytes is not hidden
        let heavy = build_l3(&[flow(ip(10), ip(1), 80, 1000), flow(ip(11), ext, 443, 1000)], &r);
        assert!(report_resiliency(&heavy, &deps, &TopologyParams::default())
            .hidden_components
            .is_empty());
        assert!(report_resiliency(&heavy, &[], &TopologyParams::default())
            .hidden_components
            .is_empty());
    }

    proptest! {
        #[test]
        fn articulation_matches_delete_and_recount(
            n in 1usize..=12,
            raw in proptest::collection::vec((0usize..12, 0usize..12), 0..30),
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|(a, b)| *a < n && *b < n && a != b).collect();
            prop_assert_eq!(articulation_points(n, &edges), brute_force(n, &edges));
        }

        #[test]
        fn l2_counts_match_brute_force(raw in proptest::collection::vec((0u8..6, 0u8..7), 0..60)) {
            let m = |i: u8| if i == 6 { MacAddr::BROADCAST } else { mac(i) };
            let frames: Vec<_> = raw.iter().map(|(s, d)| frame(mac(*s), m(*d), ip(*s), ip(*d))).collect();
            let g = build_l2(&frames);
            for a in 0..6u8 {
                for b in a..6u8 {
                    let n = raw.iter().filter(|(s, d)| (*s, *d) == (a, b) || (*s, *d) == (b, a)).count() as u64;
                    prop_assert_eq!(g.edges.get(&(mac(a), mac(b))).copied().unwrap_or(0), n);
                }
            }
            prop_assert_eq!(g.group_frames, raw.iter().filter(|(_, d)| *d == 6).count() as u64);
        }

        #[test]
        fn dependencies_ignore_order(seed in proptest::collection::vec((2u8..6, 0u8..2), 0..40), rot in 0usize..40) {
            let r = bind_identity([], []);
            let events: Vec<_> = seed.iter().map(|(d, s)| q(*d, ip(1 + *s))).collect();
            let mut rotated = events.clone();
            if !rotated.is_empty() {
                let k = rot % rotated.len();
                rotated.rotate_left(k);
                rotated.reverse();
            }
            prop_assert_eq!(infer_dependencies(&events, &[], &r, 3), infer_dependencies(&rotated, &[], &r, 3));
        }

        #[test]
        fn gateway_monotone(raw in proptest::collection::vec((0u8..4, 0u8..30), 0..60), split in 0usize..60) {
            let frames: Vec<_> = raw.iter().map(|(s, d)| frame(mac(*s), mac(0xfe), ip(*s), Ipv4Addr::new(93, 0, 0, *d))).collect();
            let k = split.min(frames.len());
            let before = infer_gateways(&frames[..k], 5);
            let after = infer_gateways(&frames, 5);
            prop_assert!(before.is_subset(&after));
        }
    }
}
