use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bgp::Ipv4Prefix;

const DEFAULT_DOCUMENT: &str = include_str!("../../data/topology.toml");

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology document: {0}")]
    Parse(String),
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
    #[error("router `{router}` names unknown network `{network}`")]
    UnknownNetwork { router: String, network: String },
    #[error("link `{link}` references unknown router `{router}`")]
    UnknownRouter { link: String, router: String },
    #[error("link `{link}` references unknown interface `{interface}` on router `{router}`")]
    UnknownInterface {
        link: String,
        router: String,
        interface: String,
    },
    #[error("interface `{interface}` on router `{router}` terminates more than one link")]
    InterfaceReused { router: String, interface: String },
    #[error("prefix {prefix} is owned by both `{first}` and `{second}`")]
    SharedPrefix {
        prefix: Ipv4Prefix,
        first: String,
        second: String,
    },
    #[error("peer `{0}` is not a router with an address")]
    BadPeer(String),
    #[error("community network `{network}` has no path to a backbone network")]
    NoBackbonePath { network: String },
    #[error("dual-homed network `{network}` reaches a backbone through {found} backhaul(s), needs at least 2")]
    SingleHomed { network: String, found: usize },
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkRole {
    SatelliteBackhaul,
    FixedBackhaul,
    Backbone,
    CommunityCellular,
    CommunitySdcn,
    CommunityDual,
}

impl NetworkRole {
    pub fn is_backhaul(self) -> bool {
        matches!(self, NetworkRole::SatelliteBackhaul | NetworkRole::FixedBackhaul)
    }

    pub fn is_community(self) -> bool {
        matches!(
            self,
            NetworkRole::CommunityCellular | NetworkRole::CommunitySdcn | NetworkRole::CommunityDual
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    #[default]
    Router,
    BaseStation,
    Satellite,
    SatelliteTerminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Medium {
    SatelliteRf,
    Fiber,
    Microwave,
    Cellular,
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Medium::SatelliteRf => "satellite-rf",
            Medium::Fiber => "fiber",
            Medium::Microwave => "microwave",
            Medium::Cellular => "cellular",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub id: String,
    pub role: NetworkRole,
    #[serde(default)]
    pub prefixes: Vec<Ipv4Prefix>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Router {
    pub id: String,
    #[serde(default)]
    pub kind: NodeKind,
    pub asn: u32,
    pub network: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<Ipv4Addr>,
    #[serde(default)]
    pub interfaces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Endpoint {
    pub router: String,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub medium: Medium,
    pub a: Endpoint,
    pub b: Endpoint,
}

impl Link {
    pub fn connects(&self, x: &str, y: &str) -> bool {
        (self.a.router == x && self.b.router == y) || (self.a.router == y && self.b.router == x)
    }
}

/// The serialized form: networks, routers, links and the monitored peers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyDocument {
    #[serde(default)]
    pub peers: Vec<String>,
    pub networks: Vec<Network>,
    pub routers: Vec<Router>,
    #[serde(default)]
    pub links: Vec<Link>,
}

/// A validated network graph. Routers are graph nodes; links are edges.
#[derive(Debug, Clone)]
pub struct Topology {
    doc: TopologyDocument,
    router_index: HashMap<String, usize>,
    network_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
    /// Per router: `(neighbour, link)` in link declaration order.
    adjacency: Vec<Vec<(usize, usize)>>,
    router_network: Vec<usize>,
}

fn index_of<T>(
    items: &[T],
    kind: &'static str,
    id: impl Fn(&T) -> &str,
) -> Result<HashMap<String, usize>, TopologyError> {
    let mut map = HashMap::new();
    for (i, item) in items.iter().enumerate() {
        if map.insert(id(item).to_string(), i).is_some() {
            return Err(TopologyError::Duplicate {
                kind,
                id: id(item).to_string(),
            });
        }
    }
    Ok(map)
}

impl Topology {
    pub fn from_document(doc: TopologyDocument) -> Result<Self, TopologyError> {
        let network_index = index_of(&doc.networks, "network", |n| &n.id)?;
        let router_index = index_of(&doc.routers, "router", |r| &r.id)?;
        let link_index = index_of(&doc.links, "link", |l| &l.id)?;

        let mut router_network = Vec::with_capacity(doc.routers.len());
        for r in &doc.routers {
            let net = network_index
                .get(&r.network)
                .ok_or_else(|| TopologyError::UnknownNetwork {
                    router: r.id.clone(),
                    network: r.network.clone(),
                })?;
            router_network.push(*net);
        }

        let mut owner: HashMap<Ipv4Prefix, &str> = HashMap::new();
        for n in &doc.networks {
            for p in &n.prefixes {
                if let Some(first) = owner.insert(*p, &n.id) {
                    return Err(TopologyError::SharedPrefix {
                        prefix: *p,
                        first: first.to_string(),
                        second: n.id.clone(),
                    });
                }
            }
        }

        let mut adjacency = vec![Vec::new(); doc.routers.len()];
        let mut used: HashSet<(&str, &str)> = HashSet::new();
        for (li, link) in doc.links.iter().enumerate() {
            let mut ends = [0usize; 2];
            for (slot, end) in [&link.a, &link.b].into_iter().enumerate() {
                let ri = *router_index
                    .get(&end.router)
                    .ok_or_else(|| TopologyError::UnknownRouter {
                        link: link.id.clone(),
                        router: end.router.clone(),
                    })?;
                if !doc.routers[ri].interfaces.contains(&end.interface) {
                    return Err(TopologyError::UnknownInterface {
                        link: link.id.clone(),
                        router: end.router.clone(),
                        interface: end.interface.clone(),
                    });
                }
                if !used.insert((&end.router, &end.interface)) {
                    return Err(TopologyError::InterfaceReused {
                        router: end.router.clone(),
                        interface: end.interface.clone(),
                    });
                }
                ends[slot] = ri;
            }
            adjacency[ends[0]].push((ends[1], li));
            adjacency[ends[1]].push((ends[0], li));
        }

        for p in &doc.peers {
            match router_index.get(p) {
                Some(&i) if doc.routers[i].address.is_some() => {}
                _ => return Err(TopologyError::BadPeer(p.clone())),
            }
        }

        let topo = Topology {
            doc,
            router_index,
            network_index,
            link_index,
            adjacency,
            router_network,
        };
        topo.check_reachability()?;
        Ok(topo)
    }

    fn check_reachability(&self) -> Result<(), TopologyError> {
        let up = self.link_mask(&[]);
        for (ni, net) in self.doc.networks.iter().enumerate() {
            if !net.role.is_community() {
                continue;
            }
            if !self.community_reaches_backbone(ni, &up, |_| true) {
                return Err(TopologyError::NoBackbonePath {
                    network: net.id.clone(),
                });
            }
            if net.role == NetworkRole::CommunityDual {
                let found = self.backhauls_of(ni, &up).len();
                if found < 2 {
                    return Err(TopologyError::SingleHomed {
                        network: net.id.clone(),
                        found,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn default_document() -> TopologyDocument {
        toml::from_str(DEFAULT_DOCUMENT).expect("bundled topology parses")
    }

    /// The bundled reference topology.
    pub fn reference() -> Self {
        Self::from_document(Self::default_document()).expect("bundled topology validates")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TopologyError> {
        let doc = toml::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_json_str(text: &str) -> Result<Self, TopologyError> {
        let doc = serde_json::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    /// Loads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn document(&self) -> &TopologyDocument {
        &self.doc
    }

    pub fn networks(&self) -> &[Network] {
        &self.doc.networks
    }

    pub fn routers(&self) -> &[Router] {
        &self.doc.routers
    }

    pub fn links(&self) -> &[Link] {
        &self.doc.links
    }

    pub fn peers(&self) -> &[String] {
        &self.doc.peers
    }

    pub fn router(&self, id: &str) -> Option<&Router> {
        self.router_index.get(id).map(|&i| &self.doc.routers[i])
    }

    pub fn network(&self, id: &str) -> Option<&Network> {
        self.network_index.get(id).map(|&i| &self.doc.networks[i])
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.link_index.get(id).map(|&i| &self.doc.links[i])
    }

    pub(crate) fn link_position(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub(crate) fn router_position(&self, id: &str) -> Option<usize> {
        self.router_index.get(id).copied()
    }

    /// The first declared link joining the two routers, in either direction.
    pub fn link_between(&self, x: &str, y: &str) -> Option<&Link> {
        self.doc.links.iter().find(|l| l.connects(x, y))
    }

    /// Every owned prefix with the position of its network.
    pub fn prefix_owner(&self) -> Vec<(Ipv4Prefix, usize)> {
        let mut out = Vec::new();
        for (ni, n) in self.doc.networks.iter().enumerate() {
            out.extend(n.prefixes.iter().map(|p| (*p, ni)));
        }
        out
    }

    /// `true` for links that are up. Unknown ids are ignored.
    pub(crate) fn link_mask(&self, failed: &[&str]) -> Vec<bool> {
        let mut up = vec![true; self.doc.links.len()];
        for id in failed {
            if let Some(&i) = self.link_index.get(*id) {
                up[i] = false;
            }
        }
        up
    }

    /// Breadth-first search from `from` over up links and allowed routers.
    /// Returns the parent of every visited router (`from` is its own parent).
    pub(crate) fn bfs(&self, from: usize, up: &[bool], allowed: impl Fn(usize) -> bool) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.doc.routers.len()];
        parent[from] = Some(from);
        let mut queue = VecDeque::from([from]);
        while let Some(r) = queue.pop_front() {
            for &(next, link) in &self.adjacency[r] {
                if up[link] && parent[next].is_none() && allowed(next) {
                    parent[next] = Some(r);
                    queue.push_back(next);
                }
            }
        }
        parent
    }

    fn community_reaches_backbone(&self, network: usize, up: &[bool], allowed: impl Fn(usize) -> bool) -> bool {
        self.doc.routers.iter().enumerate().any(|(ri, _)| {
            self.router_network[ri] == network
                && self.bfs(ri, up, &allowed).iter().enumerate().any(|(x, p)| {
                    p.is_some() && self.doc.networks[self.router_network[x]].role == NetworkRole::Backbone
                })
        })
    }

    /// Backhaul networks through which `network` reaches a backbone when the
    /// search may only cross the community itself, that one backhaul, and
    /// backbone routers.
    pub(crate) fn backhauls_of(&self, network: usize, up: &[bool]) -> Vec<usize> {
        (0..self.doc.networks.len())
            .filter(|&b| self.doc.networks[b].role.is_backhaul())
            .filter(|&b| {
                self.community_reaches_backbone(network, up, |r| {
                    let n = self.router_network[r];
                    n == network || n == b || self.doc.networks[n].role == NetworkRole::Backbone
                })
            })
            .collect()
    }

    /// Backhaul network ids through which community `network` reaches a backbone.
    pub fn backhaul_paths(&self, network: &str, failed: &[&str]) -> Vec<String> {
        let Some(&ni) = self.network_index.get(network) else {
            return Vec::new();
        };
        let up = self.link_mask(failed);
        self.backhauls_of(ni, &up)
            .into_iter()
            .map(|b| self.doc.networks[b].id.clone())
            .collect()
    }

    pub fn network_of(&self, router: &str) -> Option<&Network> {
        self.router(router).and_then(|r| self.network(&r.network))
    }

    /// Shortest router path from `from` to the nearest router of `network`,
    /// as router positions; ties follow link declaration order.
    pub(crate) fn route(&self, from: usize, network: usize, up: &[bool]) -> Option<Vec<usize>> {
        let mut parent = vec![usize::MAX; self.doc.routers.len()];
        parent[from] = from;
        let mut queue = VecDeque::from([from]);
        let mut target = None;
        while let Some(r) = queue.pop_front() {
            if self.router_network[r] == network {
                target = Some(r);
                break;
            }
            for &(next, link) in &self.adjacency[r] {
                if up[link] && parent[next] == usize::MAX {
                    parent[next] = r;
                    queue.push_back(next);
                }
            }
        }
        let mut at = target?;
        let mut path = vec![at];
        while at != from {
            at = parent[at];
            path.push(at);
        }
        path.reverse();
        Some(path)
    }

    /// AS path a peer would advertise for prefixes of `network`: router ASes
    /// along the shortest path, consecutive duplicates collapsed.
    pub(crate) fn as_path(&self, from: usize, network: usize, up: &[bool]) -> Option<Vec<u32>> {
        let route = self.route(from, network, up)?;
        let mut path: Vec<u32> = route.iter().map(|&r| self.doc.routers[r].asn).collect();
        path.dedup();
        Some(path)
    }

    /// Whether `router` can reach any backbone router with `failed` down.
    pub fn reaches_backbone(&self, router: &str, failed: &[&str]) -> bool {
        let Some(from) = self.router_position(router) else {
            return false;
        };
        let up = self.link_mask(failed);
        self.bfs(from, &up, |_| true)
            .iter()
            .enumerate()
            .any(|(x, p)| p.is_some() && self.doc.networks[self.router_network[x]].role == NetworkRole::Backbone)
    }
}

/// Prefixes each monitored peer can reach with `failed_links` down.
pub fn reachable_prefixes(topology: &Topology, failed_links: &[&str]) -> BTreeMap<String, BTreeSet<Ipv4Prefix>> {
    let up = topology.link_mask(failed_links);
    topology
        .peers()
        .iter()
        .map(|peer| {
            let from = topology.router_index[peer];
            let visited = topology.bfs(from, &up, |_| true);
            let mut nets = vec![false; topology.networks().len()];
            for (r, p) in visited.iter().enumerate() {
                if p.is_some() {
                    nets[topology.router_network[r]] = true;
                }
            }
            let set = topology
                .prefix_owner()
                .into_iter()
                .filter(|&(_, n)| nets[n])
                .map(|(p, _)| p)
                .collect();
            (peer.clone(), set)
        })
        .collect()
}
