use std::collections::{HashMap, VecDeque};

use super::message::Flit;
use super::topology::{NodeId, Topology};

/// Where an ejected flit goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Bank(NodeId),
    Central,
}

/// A flit in transit, with the routing state the routers need.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetFlit {
    pub flit: Flit,
    /// Router the flit entered the network at.
    pub src: NodeId,
    pub from_central: bool,
    pub id: u64,
}

const LOCAL_BIT: u64 = 1 << 62;
const CENTRAL_BIT: u64 = 1 << 63;

#[derive(Debug)]
struct Buffered {
    nf: NetFlit,
    /// Output ports still owed a copy: bit `i` for the router's `i`th
    /// outgoing link, plus the local and central ejection bits.
    pending: u64,
}

#[derive(Debug, Default)]
struct InPort {
    buf: VecDeque<Buffered>,
    /// Feeding link; `None` for the injection ports.
    upstream: Option<usize>,
}

#[derive(Debug)]
struct Router {
    /// Network inputs in `Topology::in_links` order, then local injection,
    /// then central injection on the center router.
    inputs: Vec<InPort>,
    out_links: Vec<usize>,
    credits: Vec<u32>,
    /// Flits per context buffered here or travelling on outgoing links.
    load: [u32; 2],
    buffered: usize,
    /// Output held by an input until a multi-flit message's tail passes:
    /// outgoing links, then local, then central ejection.
    locks: Vec<Option<usize>>,
}

#[derive(Debug, Default)]
struct LinkState {
    flits: VecDeque<(u64, NetFlit)>,
    credits: VecDeque<u64>,
    /// Index of the downstream input port.
    dst_input: usize,
    /// Index of this link among the upstream router's outputs.
    src_output: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NetStats {
    pub flits_injected: u64,
    pub flits_ejected: u64,
    pub link_traversals: u64,
    /// Sum over cycles of flits buffered anywhere in the network.
    pub buffer_occupancy: u64,
}

#[derive(Debug, Default)]
struct DeliveryCheck {
    /// Remaining endpoints per flit id: banks by node index, central last.
    expected: HashMap<u64, Vec<bool>>,
    errors: Vec<String>,
}

#[derive(Debug)]
pub struct Network {
    topo: Topology,
    routers: Vec<Router>,
    links: Vec<LinkState>,
    depth: usize,
    now: u64,
    next_id: u64,
    pub stats: NetStats,
    check: Option<DeliveryCheck>,
}

impl Network {
    pub fn new(topo: Topology, buffer_depth: usize) -> Network {
        assert!(buffer_depth >= 1);
        let center = topo.center();
        let mut links: Vec<LinkState> = (0..topo.links().len())
            .map(|_| LinkState::default())
            .collect();
        let mut routers = Vec::with_capacity(topo.nodes());
        for node in 0..topo.nodes() {
            let mut inputs = Vec::new();
            for (i, &l) in topo.in_links(node).iter().enumerate() {
                links[l].dst_input = i;
                inputs.push(InPort {
                    buf: VecDeque::new(),
                    upstream: Some(l),
                });
            }
            inputs.push(InPort::default());
            if node == center {
                inputs.push(InPort::default());
            }
            let out_links = topo.out_links(node).to_vec();
            for (i, &l) in out_links.iter().enumerate() {
                links[l].src_output = i;
            }
            assert!(out_links.len() < 62);
            routers.push(Router {
                inputs,
                locks: vec![None; out_links.len() + 2],
                credits: vec![buffer_depth as u32; out_links.len()],
                out_links,
                load: [0; 2],
                buffered: 0,
            });
        }
        Network {
            topo,
            routers,
            links,
            depth: buffer_depth,
            now: 0,
            next_id: 0,
            stats: NetStats::default(),
            check: None,
        }
    }

    /// Records every injected flit and flags missing or duplicate deliveries.
    pub fn enable_delivery_check(&mut self) {
        self.check = Some(DeliveryCheck::default());
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    fn injection_port(&self, from: Endpoint) -> (NodeId, usize) {
        match from {
            Endpoint::Bank(node) => (node, self.topo.in_links(node).len()),
            Endpoint::Central => {
                let c = self.topo.center();
                (c, self.topo.in_links(c).len() + 1)
            }
        }
    }

    pub fn can_inject(&self, from: Endpoint) -> bool {
        let (node, port) = self.injection_port(from);
        self.routers[node].inputs[port].buf.len() < self.depth
    }

    /// Places a flit in the injection buffer of `from`. The flit can be
    /// switched in the current cycle. Returns `false` when the buffer is full.
    pub fn inject(&mut self, from: Endpoint, flit: Flit) -> bool {
        if !self.can_inject(from) {
            return false;
        }
        let (node, port) = self.injection_port(from);
        let nf = NetFlit {
            flit,
            src: node,
            from_central: from == Endpoint::Central,
            id: self.next_id,
        };
        self.next_id += 1;
        if let Some(check) = &mut self.check {
            let dests = expected_endpoints(&self.topo, &nf);
            check.expected.insert(nf.id, dests);
        }
        let pending = self.output_mask(node, &nf);
        let r = &mut self.routers[node];
        r.inputs[port].buf.push_back(Buffered { nf, pending });
        r.load[(flit.ctx & 1) as usize] += 1;
        r.buffered += 1;
        self.stats.flits_injected += 1;
        true
    }

    fn output_mask(&self, here: NodeId, nf: &NetFlit) -> u64 {
        let topo = &self.topo;
        let r = nf.flit.routing;
        let out_bit = |next: NodeId| -> u64 {
            let l = topo.link_between(here, next).expect("route without link");
            1u64 << self.links[l].src_output
        };
        let center = topo.center();
        let mut mask = 0;
        if r.broadcast {
            for next in topo.broadcast_next(nf.src, here) {
                mask |= out_bit(next);
            }
            if here != nf.src || r.to_source || nf.from_central {
                mask |= LOCAL_BIT;
            }
            if r.to_central && here == center && !nf.from_central {
                mask |= CENTRAL_BIT;
            }
        } else if r.to_central {
            match topo.unicast_next(here, center) {
                Some(next) => mask |= out_bit(next),
                None => mask |= CENTRAL_BIT,
            }
        } else {
            let dst = nf.flit.dest.expect("addressed flit without destination") as NodeId;
            match topo.unicast_next(here, dst) {
                Some(next) => mask |= out_bit(next),
                None => mask |= LOCAL_BIT,
            }
        }
        mask
    }

    /// Advances one cycle. Flits ejected this cycle are appended to `out`;
    /// endpoints observe them from the next cycle on.
    pub fn step(&mut self, out: &mut Vec<(Endpoint, NetFlit)>) {
        let now = self.now;
        // Phase 1: link arrivals and credit returns due by now.
        for li in 0..self.links.len() {
            let link = self.topo.link(li);
            while self.links[li].credits.front().is_some_and(|&t| t <= now) {
                self.links[li].credits.pop_front();
                let so = self.links[li].src_output;
                self.routers[link.from].credits[so] += 1;
            }
            while self.links[li].flits.front().is_some_and(|&(t, _)| t <= now) {
                let (_, nf) = self.links[li].flits.pop_front().unwrap();
                let ctx = (nf.flit.ctx & 1) as usize;
                self.routers[link.from].load[ctx] -= 1;
                let pending = self.output_mask(link.to, &nf);
                let di = self.links[li].dst_input;
                let r = &mut self.routers[link.to];
                debug_assert!(r.inputs[di].buf.len() < self.depth, "credit overrun");
                r.inputs[di].buf.push_back(Buffered { nf, pending });
                r.load[ctx] += 1;
                r.buffered += 1;
            }
        }
        // Phase 2: switch allocation, fixed priority by input index.
        for node in 0..self.routers.len() {
            if self.routers[node].buffered == 0 {
                continue;
            }
            self.stats.buffer_occupancy += self.routers[node].buffered as u64;
            let mut taken: u64 = 0;
            for ip in 0..self.routers[node].inputs.len() {
                let Some(head) = self.routers[node].inputs[ip].buf.front() else {
                    continue;
                };
                let nf = head.nf;
                let mut pending = head.pending;
                let mut bits = pending & !taken;
                while bits != 0 {
                    let b = bits.trailing_zeros();
                    bits &= bits - 1;
                    let bit = 1u64 << b;
                    let nout = self.routers[node].out_links.len();
                    let port = match bit {
                        LOCAL_BIT => nout,
                        CENTRAL_BIT => nout + 1,
                        _ => b as usize,
                    };
                    if self.routers[node].locks[port].is_some_and(|holder| holder != ip) {
                        continue;
                    }
                    if bit == LOCAL_BIT || bit == CENTRAL_BIT {
                        let ep = if bit == LOCAL_BIT {
                            Endpoint::Bank(node)
                        } else {
                            Endpoint::Central
                        };
                        self.deliver(ep, nf);
                        out.push((ep, nf));
                    } else {
                        let oi = b as usize;
                        if self.routers[node].credits[oi] == 0 {
                            continue;
                        }
                        self.routers[node].credits[oi] -= 1;
                        let li = self.routers[node].out_links[oi];
                        let d = self.topo.link(li).delay as u64;
                        self.links[li].flits.push_back((now + 1 + d, nf));
                        self.routers[node].load[(nf.flit.ctx & 1) as usize] += 1;
                        self.stats.link_traversals += 1;
                    }
                    self.routers[node].locks[port] = (!nf.flit.last).then_some(ip);
                    taken |= bit;
                    pending &= !bit;
                }
                let r = &mut self.routers[node];
                if pending == 0 {
                    let upstream = r.inputs[ip].upstream;
                    r.inputs[ip].buf.pop_front();
                    r.load[(nf.flit.ctx & 1) as usize] -= 1;
                    r.buffered -= 1;
                    if let Some(li) = upstream {
                        let d = self.topo.link(li).delay as u64;
                        self.links[li].credits.push_back(now + d);
                    }
                } else {
                    r.inputs[ip].buf.front_mut().unwrap().pending = pending;
                }
            }
        }
        self.now += 1;
    }

    fn deliver(&mut self, ep: Endpoint, nf: NetFlit) {
        self.stats.flits_ejected += 1;
        let Some(check) = &mut self.check else {
            return;
        };
        let slot = match ep {
            Endpoint::Bank(n) => n,
            Endpoint::Central => self.topo.nodes(),
        };
        match check.expected.get_mut(&nf.id) {
            Some(rem) if rem[slot] => {
                rem[slot] = false;
                if rem.iter().all(|&b| !b) {
                    check.expected.remove(&nf.id);
                }
            }
            _ => check
                .errors
                .push(format!("flit {} delivered unexpectedly to {ep:?}", nf.id)),
        }
    }

    /// Delivery violations so far, plus flits still owed to some endpoint.
    pub fn delivery_errors(&self) -> Vec<String> {
        let Some(check) = &self.check else {
            return Vec::new();
        };
        let mut errs = check.errors.clone();
        if self.in_flight() == 0 {
            let mut ids: Vec<_> = check.expected.keys().copied().collect();
            ids.sort_unstable();
            for id in ids {
                errs.push(format!("flit {id} not delivered everywhere"));
            }
        }
        errs
    }

    /// Flits buffered or on links.
    pub fn in_flight(&self) -> usize {
        self.routers.iter().map(|r| r.buffered).sum::<usize>()
            + self.links.iter().map(|l| l.flits.len()).sum::<usize>()
    }

    /// Flits of `ctx` in buffers or on links, counted by walking them rather
    /// than from the per-router load counters.
    pub fn flits_of(&self, ctx: u8) -> usize {
        let c = ctx & 1;
        let buffered: usize = self
            .routers
            .iter()
            .flat_map(|r| r.inputs.iter())
            .map(|p| p.buf.iter().filter(|b| b.nf.flit.ctx & 1 == c).count())
            .sum();
        let on_links: usize = self
            .links
            .iter()
            .map(|l| l.flits.iter().filter(|(_, f)| f.flit.ctx & 1 == c).count())
            .sum();
        buffered + on_links
    }

    /// No flit of `ctx` is buffered in `node` or travelling on its outgoing links.
    pub fn router_idle(&self, node: NodeId, ctx: u8) -> bool {
        self.routers[node].load[(ctx & 1) as usize] == 0
    }

    /// Credit conservation: for every link, upstream credits plus flits and
    /// credits in flight plus downstream occupancy equals the buffer depth.
    pub fn credits_conserved(&self) -> bool {
        self.links.iter().enumerate().all(|(li, ls)| {
            let link = self.topo.link(li);
            let credits = self.routers[link.from].credits[ls.src_output] as usize;
            let occ = self.routers[link.to].inputs[ls.dst_input].buf.len();
            credits + ls.flits.len() + ls.credits.len() + occ == self.depth
        })
    }
}

/// Endpoints a flit must reach, derived from its routing bits alone.
fn expected_endpoints(topo: &Topology, nf: &NetFlit) -> Vec<bool> {
    let n = topo.nodes();
    let mut v = vec![false; n + 1];
    let r = nf.flit.routing;
    if r.broadcast {
        for (node, slot) in v.iter_mut().enumerate().take(n) {
            *slot = node != nf.src || r.to_source || nf.from_central;
        }
        v[n] = r.to_central && !nf.from_central;
    } else if r.to_central {
        v[n] = true;
    } else if let Some(d) = nf.flit.dest {
        v[d as usize] = true;
    }
    v
}
