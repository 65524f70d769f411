use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Mesh,
    FlattenedButterfly,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::Mesh => "mesh",
            TopologyKind::FlattenedButterfly => "flatbfly",
        })
    }
}

impl FromStr for TopologyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mesh" => Ok(TopologyKind::Mesh),
            "flatbfly" | "fbfly" | "flattened_butterfly" => Ok(TopologyKind::FlattenedButterfly),
            _ => Err(format!(
                "unknown topology `{s}` (expected mesh or flatbfly)"
            )),
        }
    }
}

/// A directed network link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    /// Traversal time in cycles: Manhattan distance in router pitches.
    pub delay: u32,
}

/// An `n × n` grid of routers, each with one clause bank attached. The
/// central unit hangs off the center router.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub kind: TopologyKind,
    pub n: usize,
    links: Vec<Link>,
    /// Outgoing link indices per node.
    out_links: Vec<Vec<usize>>,
    /// Incoming link indices per node.
    in_links: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(kind: TopologyKind, n: usize) -> Topology {
        assert!(n >= 1);
        let mut links = Vec::new();
        for a in 0..n * n {
            let (ar, ac) = (a / n, a % n);
            for b in 0..n * n {
                if a == b {
                    continue;
                }
                let (br, bc) = (b / n, b % n);
                let d = ar.abs_diff(br) + ac.abs_diff(bc);
                let connected = match kind {
                    TopologyKind::Mesh => d == 1,
                    TopologyKind::FlattenedButterfly => ar == br || ac == bc,
                };
                if connected {
                    links.push(Link {
                        from: a,
                        to: b,
                        delay: d as u32,
                    });
                }
            }
        }
        let mut out_links = vec![Vec::new(); n * n];
        let mut in_links = vec![Vec::new(); n * n];
        for (i, l) in links.iter().enumerate() {
            out_links[l.from].push(i);
            in_links[l.to].push(i);
        }
        Topology {
            kind,
            n,
            links,
            out_links,
            in_links,
        }
    }

    pub fn nodes(&self) -> usize {
        self.n * self.n
    }

    pub fn coords(&self, node: NodeId) -> (usize, usize) {
        (node / self.n, node % self.n)
    }

    pub fn node(&self, row: usize, col: usize) -> NodeId {
        row * self.n + col
    }

    /// Node the central unit attaches to.
    pub fn center(&self) -> NodeId {
        self.node(self.n / 2, self.n / 2)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> Link {
        self.links[idx]
    }

    pub fn out_links(&self, node: NodeId) -> &[usize] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: NodeId) -> &[usize] {
        &self.in_links[node]
    }

    /// Router ports per direction: network links plus the local bank port.
    pub fn degree(&self, node: NodeId) -> usize {
        self.out_links[node].len() + 1
    }

    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.out_links[from]
            .iter()
            .copied()
            .find(|&l| self.links[l].to == to)
    }

    /// Next routers for a broadcast from `src` currently at `here`:
    /// along the source row first, then down every column.
    pub fn broadcast_next(&self, src: NodeId, here: NodeId) -> Vec<NodeId> {
        let (sr, sc) = self.coords(src);
        let (hr, hc) = self.coords(here);
        let n = self.n;
        let mut out = Vec::new();
        match self.kind {
            TopologyKind::Mesh => {
                if hr == sr {
                    if hc >= sc && hc + 1 < n {
                        out.push(self.node(hr, hc + 1));
                    }
                    if hc <= sc && hc > 0 {
                        out.push(self.node(hr, hc - 1));
                    }
                    if hr + 1 < n {
                        out.push(self.node(hr + 1, hc));
                    }
                    if hr > 0 {
                        out.push(self.node(hr - 1, hc));
                    }
                } else if hr > sr {
                    if hr + 1 < n {
                        out.push(self.node(hr + 1, hc));
                    }
                } else if hr > 0 {
                    out.push(self.node(hr - 1, hc));
                }
            }
            TopologyKind::FlattenedButterfly => {
                if hr == sr {
                    if here == src {
                        out.extend((0..n).filter(|&c| c != sc).map(|c| self.node(sr, c)));
                    }
                    out.extend((0..n).filter(|&r| r != sr).map(|r| self.node(r, hc)));
                }
            }
        }
        out
    }

    /// Next router on the dimension-order (column, then row) path to `dst`.
    pub fn unicast_next(&self, here: NodeId, dst: NodeId) -> Option<NodeId> {
        if here == dst {
            return None;
        }
        let (hr, hc) = self.coords(here);
        let (dr, dc) = self.coords(dst);
        Some(match self.kind {
            TopologyKind::Mesh => {
                if hc != dc {
                    self.node(hr, if dc > hc { hc + 1 } else { hc - 1 })
                } else {
                    self.node(if dr > hr { hr + 1 } else { hr - 1 }, hc)
                }
            }
            TopologyKind::FlattenedButterfly => {
                if hc != dc {
                    self.node(hr, dc)
                } else {
                    self.node(dr, hc)
                }
            }
        })
    }
}

/// Contention-free arrival time of a broadcast at one router.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arrival {
    pub node: NodeId,
    /// Routers traversed before reaching `node` (one cycle each).
    pub router_hops: u32,
    /// Summed link delays along the path.
    pub link_cycles: u32,
}

impl Arrival {
    /// Cycles after the flit becomes available at the source router.
    pub fn cycles(&self) -> u32 {
        self.router_hops + self.link_cycles
    }
}

/// Spanning schedule of a dimension-order broadcast from `src`, one entry
/// per node other than `src`, sorted by node id.
pub fn route_broadcast(topo: &Topology, src: NodeId) -> Vec<Arrival> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(src, 0u32, 0u32)]);
    while let Some((here, hops, link)) = queue.pop_front() {
        for next in topo.broadcast_next(src, here) {
            let d = topo
                .link(
                    topo.link_between(here, next)
                        .expect("broadcast hop without link"),
                )
                .delay;
            let a = Arrival {
                node: next,
                router_hops: hops + 1,
                link_cycles: link + d,
            };
            out.push(a);
            queue.push_back((next, a.router_hops, a.link_cycles));
        }
    }
    out.sort_by_key(|a| a.node);
    out
}
