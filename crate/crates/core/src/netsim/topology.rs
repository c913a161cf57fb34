use std::collections::BTreeMap;

use super::link::{Link, LossModel};
use super::{link_seed, SimError};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct LinkParams {
    pub bandwidth_bps: f64,
    pub delay: SimTime,
    pub queue_limit: usize,
    pub loss: LossModel,
}

impl LinkParams {
    /// 5 Mb/s, 200 ms, DropTail 50.
    pub fn bottleneck() -> Self {
        LinkParams {
            bandwidth_bps: 5e6,
            delay: SimTime::from_millis(200),
            queue_limit: 50,
            loss: LossModel::None,
        }
    }

    pub fn access() -> Self {
        LinkParams {
            bandwidth_bps: 100e6,
            delay: SimTime::from_millis(1),
            queue_limit: 1000,
            loss: LossModel::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CustomLink {
    pub from: String,
    pub to: String,
    pub params: LinkParams,
}

/// One path of a custom connection: the server-side address it targets and
/// the link indices walked in each direction.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomPath {
    pub address: u32,
    pub node: String,
    pub forward: Vec<usize>,
    pub reverse: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TopologySpec {
    /// N sender/receiver pairs sharing one bottleneck.
    Dumbbell {
        connections: usize,
        access: LinkParams,
        bottleneck: LinkParams,
    },
    /// Disjoint paths between one pair of hosts; every connection may use
    /// all of them.
    Dualpath {
        connections: usize,
        paths: Vec<LinkParams>,
    },
    Custom {
        nodes: Vec<String>,
        links: Vec<CustomLink>,
        connections: Vec<Vec<CustomPath>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Client to server.
    Forward,
    Reverse,
}

#[derive(Clone, Debug)]
struct PathRoute {
    client_address: u32,
    server_address: u32,
    forward: Vec<usize>,
    reverse: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Topology {
    nodes: Vec<String>,
    links: Vec<Link>,
    routes: Vec<Vec<PathRoute>>,
    address_map: BTreeMap<u32, (usize, Vec<usize>)>,
}

fn dangling(what: impl Into<String>) -> SimError {
    SimError::DanglingAddress(what.into())
}

impl Topology {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: usize) -> &Link {
        &self.links[id]
    }

    pub fn link_mut(&mut self, id: usize) -> &mut Link {
        &mut self.links[id]
    }

    pub fn connections(&self) -> usize {
        self.routes.len()
    }

    pub fn path_count(&self, conn: usize) -> usize {
        self.routes[conn].len()
    }

    pub fn route(&self, conn: usize, dir: Direction, path: usize) -> &[usize] {
        let r = &self.routes[conn][path];
        match dir {
            Direction::Forward => &r.forward,
            Direction::Reverse => &r.reverse,
        }
    }

    pub fn client_addresses(&self, conn: usize) -> Vec<u32> {
        self.routes[conn].iter().map(|r| r.client_address).collect()
    }

    pub fn server_addresses(&self, conn: usize) -> Vec<u32> {
        self.routes[conn].iter().map(|r| r.server_address).collect()
    }

    /// Node owning `address` and the links that reach it.
    pub fn resolve(&self, address: u32) -> Option<(&str, &[usize])> {
        self.address_map
            .get(&address)
            .map(|(n, l)| (self.nodes[*n].as_str(), l.as_slice()))
    }

    fn add_link(&mut self, from: usize, to: usize, p: &LinkParams, seed: u64) -> usize {
        let id = self.links.len();
        self.links.push(Link::new(
            id,
            &self.nodes[from],
            &self.nodes[to],
            p.bandwidth_bps,
            p.delay,
            p.queue_limit,
            p.loss.clone(),
            link_seed(seed, id as u64),
        ));
        id
    }

    fn empty(nodes: Vec<String>) -> Self {
        Topology {
            nodes,
            links: Vec::new(),
            routes: Vec::new(),
            address_map: BTreeMap::new(),
        }
    }

    fn register(&mut self, node: usize, address: u32, links: Vec<usize>) {
        self.address_map.insert(address, (node, links));
    }
}

fn address(conn: usize, path: usize, server: bool) -> u32 {
    0x0a00_0000 | ((server as u32) << 16) | ((conn as u32) << 4) | path as u32
}

pub fn build_topology(spec: &TopologySpec, seed: u64) -> Result<Topology, SimError> {
    match spec {
        TopologySpec::Dumbbell {
            connections,
            access,
            bottleneck,
        } => {
            let n = *connections;
            let mut nodes: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            nodes.push("r1".into());
            nodes.push("r2".into());
            nodes.extend((0..n).map(|i| format!("d{i}")));
            let (r1, r2) = (n, n + 1);
            let mut t = Topology::empty(nodes);
            let b_fwd = t.add_link(r1, r2, bottleneck, seed);
            let b_rev = t.add_link(r2, r1, bottleneck, seed);
            for i in 0..n {
                let d = n + 2 + i;
                let up = t.add_link(i, r1, access, seed);
                let down = t.add_link(r2, d, access, seed);
                let up_r = t.add_link(d, r2, access, seed);
                let down_r = t.add_link(r1, i, access, seed);
                let route = PathRoute {
                    client_address: address(i, 0, false),
                    server_address: address(i, 0, true),
                    forward: vec![up, b_fwd, down],
                    reverse: vec![up_r, b_rev, down_r],
                };
                t.register(d, route.server_address, route.forward.clone());
                t.register(i, route.client_address, route.reverse.clone());
                t.routes.push(vec![route]);
            }
            Ok(t)
        }
        TopologySpec::Dualpath { connections, paths } => {
            let mut t = Topology::empty(vec!["a".into(), "b".into()]);
            let mut pairs = Vec::new();
            for p in paths {
                let f = t.add_link(0, 1, p, seed);
                let r = t.add_link(1, 0, p, seed);
                pairs.push((f, r));
            }
            for c in 0..*connections {
                let routes: Vec<PathRoute> = pairs
                    .iter()
                    .enumerate()
                    .map(|(p, &(f, r))| PathRoute {
                        client_address: address(c, p, false),
                        server_address: address(c, p, true),
                        forward: vec![f],
                        reverse: vec![r],
                    })
                    .collect();
                for r in &routes {
                    t.register(1, r.server_address, r.forward.clone());
                    t.register(0, r.client_address, r.reverse.clone());
                }
                t.routes.push(routes);
            }
            Ok(t)
        }
        TopologySpec::Custom {
            nodes,
            links,
            connections,
        } => {
            let index = |name: &str| {
                nodes
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| dangling(format!("unknown node {name:?}")))
            };
            let mut t = Topology::empty(nodes.clone());
            for l in links {
                let (f, to) = (index(&l.from)?, index(&l.to)?);
                t.add_link(f, to, &l.params, seed);
            }
            for (c, paths) in connections.iter().enumerate() {
                let mut routes = Vec::new();
                for (p, cp) in paths.iter().enumerate() {
                    let node = index(&cp.node)?;
                    for &l in cp.forward.iter().chain(&cp.reverse) {
                        if l >= t.links.len() {
                            return Err(dangling(format!(
                                "address {:#x} routes over missing link {l}",
                                cp.address
                            )));
                        }
                    }
                    if cp.forward.is_empty() || cp.reverse.is_empty() {
                        return Err(dangling(format!("address {:#x} has no route", cp.address)));
                    }
                    if t.links[*cp.forward.last().unwrap()].to != cp.node {
                        return Err(dangling(format!(
                            "address {:#x} route does not end at {}",
                            cp.address, cp.node
                        )));
                    }
                    t.register(node, cp.address, cp.forward.clone());
                    routes.push(PathRoute {
                        client_address: address(c, p, false),
                        server_address: cp.address,
                        forward: cp.forward.clone(),
                        reverse: cp.reverse.clone(),
                    });
                }
                t.routes.push(routes);
            }
            Ok(t)
        }
    }
}
