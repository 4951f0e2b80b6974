//! Structural parameters: maximum degree, arboricity, `e_max` and Berge
//! acyclicity, plus the path/cycle/forest shape checks used by the
//! dynamics.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::market::MarketInstance;

pub const DEFAULT_NODE_LIMIT: usize = 16;

/// Subsets are enumerated exhaustively for the density lower bound up to
/// this many nodes; beyond it the bound comes from greedy peeling.
const EXHAUSTIVE_LOWER_LIMIT: usize = 14;

#[derive(Clone, Debug)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Number of demands (parallel ones counted separately) at the busiest seller.
pub fn max_degree(instance: &MarketInstance) -> usize {
    (0..instance.num_nodes())
        .map(|v| instance.incident(v).len())
        .max()
        .unwrap_or(0)
}

/// Exact arboricity of a graph as the maximum over induced subgraphs `H`
/// with at least two nodes of `ceil(|E_H| / (|V_H| - 1))`.
pub fn arboricity_exact(instance: &MarketInstance, node_limit: usize) -> Result<usize> {
    if !instance.is_graph() {
        return Err(Error::NotGraph);
    }
    let n = instance.num_nodes();
    if n > node_limit || n >= usize::BITS as usize {
        return Err(Error::TooLarge {
            nodes: n,
            limit: node_limit,
        });
    }
    if n < 2 {
        return Ok(0);
    }
    let mut mult = vec![vec![0u32; n]; n];
    for d in instance.demands() {
        let (a, b) = (d.members[0], d.members[1]);
        mult[a][b] += 1;
        mult[b][a] += 1;
    }
    let full = 1usize << n;
    let mut edges = vec![0u32; full];
    let mut best = 0usize;
    for s in 1..full {
        let v = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        let mut add = 0u32;
        let mut bits = rest;
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            add += mult[v][u];
            bits &= bits - 1;
        }
        edges[s] = edges[rest] + add;
        let size = s.count_ones() as usize;
        if size >= 2 {
            let e = edges[s] as usize;
            best = best.max(e.div_ceil(size - 1));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestBounds {
    pub lower: usize,
    pub upper: usize,
    /// Demand indices per forest; a verified witness for `upper`.
    pub partition: Vec<Vec<usize>>,
}

/// Greedy partition of the demands into Berge forests (upper bound) and an
/// induced-density lower bound.
///
/// A part stays acyclic while every new demand joins members from pairwise
/// distinct components of that part, so one union-find per part suffices
/// for graphs and hypergraphs alike.
pub fn forest_partition_bounds(instance: &MarketInstance) -> ForestBounds {
    let n = instance.num_nodes();
    let mut parts: Vec<(UnionFind, Vec<usize>)> = Vec::new();
    for (d, demand) in instance.demands().iter().enumerate() {
        let mut placed = false;
        for (uf, members) in parts.iter_mut() {
            if joins_distinct_components(uf, &demand.members) {
                for w in demand.members.windows(2) {
                    uf.union(w[0], w[1]);
                }
                members.push(d);
                placed = true;
                break;
            }
        }
        if !placed {
            let mut uf = UnionFind::new(n);
            for w in demand.members.windows(2) {
                uf.union(w[0], w[1]);
            }
            parts.push((uf, vec![d]));
        }
    }
    let partition: Vec<Vec<usize>> = parts.into_iter().map(|(_, m)| m).collect();
    let upper = partition.len();
    let lower = density_lower_bound(instance).min(upper);
    ForestBounds {
        lower,
        upper,
        partition,
    }
}

fn joins_distinct_components(uf: &mut UnionFind, members: &[usize]) -> bool {
    let mut roots: Vec<usize> = members.iter().map(|&m| uf.find(m)).collect();
    roots.sort_unstable();
    roots.windows(2).all(|w| w[0] != w[1])
}

/// Each Berge forest on `k` nodes carries total rank `sum(|e| - 1) <= k - 1`,
/// so `ceil(rank(H) / (|V_H| - 1))` over induced `H` bounds the arboricity
/// from below. Any demand at all needs one forest.
fn density_lower_bound(instance: &MarketInstance) -> usize {
    let n = instance.num_nodes();
    let base = usize::from(instance.num_demands() > 0);
    if n < 2 {
        return base;
    }
    let masks: Vec<(u64, usize)> = instance
        .demands()
        .iter()
        .map(|d| {
            let mask = d.members.iter().fold(0u64, |m, &i| m | (1u64 << (i % 64)));
            (mask, d.size() - 1)
        })
        .collect();
    let density = |s: u64| -> usize {
        let size = s.count_ones() as usize;
        if size < 2 {
            return 0;
        }
        let rank: usize = masks
            .iter()
            .filter(|(m, _)| m & s == *m)
            .map(|(_, r)| r)
            .sum();
        rank.div_ceil(size - 1)
    };
    let mut best = base;
    if n <= EXHAUSTIVE_LOWER_LIMIT {
        for s in 1u64..(1u64 << n) {
            best = best.max(density(s));
        }
        return best;
    }
    if n > 64 {
        return base;
    }
    // peel the node of least rank-degree, keeping the best density seen
    let mut alive: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    while alive.count_ones() >= 2 {
        best = best.max(density(alive));
        let mut victim = None;
        let mut victim_deg = usize::MAX;
        for v in 0..n {
            if alive & (1u64 << v) == 0 {
                continue;
            }
            let deg: usize = masks
                .iter()
                .filter(|(m, _)| m & (1u64 << v) != 0 && m & alive == *m)
                .map(|(_, r)| r)
                .sum();
            if deg < victim_deg {
                victim_deg = deg;
                victim = Some(v);
            }
        }
        match victim {
            Some(v) => alive &= !(1u64 << v),
            None => break,
        }
    }
    best
}

/// True iff every part is a Berge forest and the parts exactly cover the
/// demand list.
pub fn verify_forest_partition(instance: &MarketInstance, partition: &[Vec<usize>]) -> bool {
    let mut seen = vec![0usize; instance.num_demands()];
    for part in partition {
        let mut uf = UnionFind::new(instance.num_nodes());
        for &d in part {
            let Some(demand) = instance.demands().get(d) else {
                return false;
            };
            seen[d] += 1;
            if !joins_distinct_components(&mut uf, &demand.members) {
                return false;
            }
            for w in demand.members.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
    }
    seen.iter().all(|&c| c == 1)
}

/// Maps every demand of a verified forest partition to one of its members
/// so that no node receives more than one demand per part: root each
/// incidence tree at a node and send each demand to its lowest child.
/// Singleton demands have no child and map to their only member.
pub fn orient_partition(instance: &MarketInstance, partition: &[Vec<usize>]) -> Vec<usize> {
    let n = instance.num_nodes();
    let mut owner = vec![usize::MAX; instance.num_demands()];
    for part in partition {
        let mut node_demands: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &d in part {
            for &m in &instance.demands()[d].members {
                node_demands[m].push(d);
            }
        }
        let mut visited_node = vec![false; n];
        let mut visited_demand = vec![false; instance.num_demands()];
        for root in 0..n {
            if visited_node[root] || node_demands[root].is_empty() {
                continue;
            }
            visited_node[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                for &d in &node_demands[v] {
                    if visited_demand[d] {
                        continue;
                    }
                    visited_demand[d] = true;
                    let members = &instance.demands()[d].members;
                    let mut children: Vec<usize> =
                        members.iter().copied().filter(|&m| m != v).collect();
                    children.sort_unstable();
                    owner[d] = children.first().copied().unwrap_or(v);
                    for c in children {
                        if !visited_node[c] {
                            visited_node[c] = true;
                            queue.push_back(c);
                        }
                    }
                }
            }
        }
    }
    owner
}

/// Berge acyclicity: the bipartite node/demand incidence graph is a forest.
pub fn berge_acyclic(instance: &MarketInstance) -> bool {
    let mut uf = UnionFind::new(instance.num_nodes());
    for demand in instance.demands() {
        if !joins_distinct_components(&mut uf, &demand.members) {
            return false;
        }
        for w in demand.members.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    true
}

/// A simple graph without cycles (parallel demands count as a cycle).
pub fn is_forest(instance: &MarketInstance) -> bool {
    instance.is_graph() && berge_acyclic(instance)
}

pub fn is_tree(instance: &MarketInstance) -> bool {
    is_forest(instance) && instance.num_demands() + 1 == instance.num_nodes()
}

/// Node order of a simple path, starting from the endpoint listed first,
/// together with the demand joining each consecutive pair.
pub fn path_order(instance: &MarketInstance) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = instance.num_nodes();
    if n == 0 || !is_tree(instance) || max_degree(instance) > 2 {
        return Err(Error::NotPath);
    }
    if n == 1 {
        return Ok((vec![0], Vec::new()));
    }
    let start = (0..n)
        .find(|&v| instance.incident(v).len() == 1)
        .ok_or(Error::NotPath)?;
    let mut order = vec![start];
    let mut edges = Vec::with_capacity(n - 1);
    let mut prev_edge = usize::MAX;
    let mut cur = start;
    while order.len() < n {
        let &d = instance
            .incident(cur)
            .iter()
            .find(|&&d| d != prev_edge)
            .ok_or(Error::NotPath)?;
        let next = instance.demands()[d].other(cur).ok_or(Error::NotPath)?;
        edges.push(d);
        order.push(next);
        prev_edge = d;
        cur = next;
    }
    Ok((order, edges))
}

/// Node order of a simple cycle starting at the first node and leaving it
/// through its first-listed demand; `edges[i]` joins `order[i]` and
/// `order[(i + 1) % n]`.
pub fn cycle_order(instance: &MarketInstance) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = instance.num_nodes();
    if n < 3 || !instance.is_graph() || instance.num_demands() != n {
        return Err(Error::NotCycle);
    }
    if (0..n).any(|v| instance.incident(v).len() != 2) {
        return Err(Error::NotCycle);
    }
    let mut order = vec![0usize];
    let mut edges = Vec::with_capacity(n);
    let mut cur = 0usize;
    let mut prev_edge = usize::MAX;
    loop {
        let &d = instance
            .incident(cur)
            .iter()
            .find(|&&d| d != prev_edge)
            .ok_or(Error::NotCycle)?;
        let next = instance.demands()[d].other(cur).ok_or(Error::NotCycle)?;
        edges.push(d);
        if next == 0 {
            break;
        }
        if order.contains(&next) {
            return Err(Error::NotCycle);
        }
        order.push(next);
        prev_edge = d;
        cur = next;
    }
    if order.len() != n {
        return Err(Error::NotCycle);
    }
    Ok((order, edges))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arboricity {
    Exact(usize),
    Interval { lower: usize, upper: usize },
}

impl Arboricity {
    /// The sound value for revenue lower bounds: exact, or the upper end.
    pub fn upper(&self) -> usize {
        match self {
            Arboricity::Exact(k) => *k,
            Arboricity::Interval { upper, .. } => *upper,
        }
    }

    pub fn lower(&self) -> usize {
        match self {
            Arboricity::Exact(k) => *k,
            Arboricity::Interval { lower, .. } => *lower,
        }
    }
}

impl fmt::Display for Arboricity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arboricity::Exact(k) => write!(f, "{k}"),
            Arboricity::Interval { lower, upper } => write!(f, "[{lower},{upper}]"),
        }
    }
}

impl Serialize for Arboricity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub max_degree: usize,
    pub arboricity: Arboricity,
    pub e_max: usize,
    pub berge_acyclic: bool,
}

/// Exact arboricity for graphs within `node_limit`, bounds otherwise.
pub fn arboricity(instance: &MarketInstance, node_limit: usize) -> Arboricity {
    match arboricity_exact(instance, node_limit) {
        Ok(k) => Arboricity::Exact(k),
        Err(_) => {
            let b = forest_partition_bounds(instance);
            Arboricity::Interval {
                lower: b.lower,
                upper: b.upper,
            }
        }
    }
}

pub fn metrics_report(instance: &MarketInstance, node_limit: usize) -> MetricsReport {
    MetricsReport {
        max_degree: max_degree(instance),
        arboricity: arboricity(instance, node_limit),
        e_max: instance.max_demand_size(),
        berge_acyclic: berge_acyclic(instance),
    }
}
