//! Procedures on forests: a breadth-first pass around a seller with a fixed
//! price, and recursive leaf-by-leaf dynamics that end in a non-malicious
//! equilibrium.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use super::{CapHit, DynamicsTrace, Runner, Termination};
use crate::best_response::TiePolicy;
use crate::error::{Error, Result};
use crate::market::{MarketInstance, PriceProfile};
use crate::metrics::{is_forest, is_tree};
use crate::rational::{ExtPrice, Rational};

/// Step cap per node for [`tree_dynamics`] when none is given.
pub const DEFAULT_TREE_CAP_PER_NODE: usize = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct TreeFixedRun {
    pub trace: DynamicsTrace,
    pub profile: PriceProfile,
    /// Utility of the fixed seller in the output.
    pub seller_utility: Rational,
}

/// Fixes `seller` at `fixed_price` and lets every other seller, in BFS order
/// from `seller` (neighbors by ascending index), best respond with the value
/// of the edge towards `seller` as its zero-utility fallback. Every other
/// seller best responds in the result.
pub fn tree_fixed_price(instance: &MarketInstance, seller: usize, fixed_price: &Rational) -> Result<TreeFixedRun> {
    if !is_tree(instance) {
        return Err(Error::NotTree);
    }
    if fixed_price.is_negative() {
        return Err(Error::NegativePrice(fixed_price.to_string()));
    }
    let n = instance.num_nodes();
    let mut runner = Runner::new(instance, vec![ExtPrice::Infinity; n], n);
    runner
        .set_price(seller, ExtPrice::Finite(fixed_price.clone()))
        .expect("one step per seller");
    let mut seen = vec![false; n];
    seen[seller] = true;
    let mut queue = VecDeque::from([seller]);
    while let Some(u) = queue.pop_front() {
        let mut next: Vec<(usize, usize)> = instance
            .incident(u)
            .iter()
            .map(|&d| (instance.demands()[d].other(u).expect("graph demand"), d))
            .filter(|(v, _)| !seen[*v])
            .collect();
        next.sort_unstable();
        for (v, d) in next {
            seen[v] = true;
            let fallback = instance.demands()[d].value.clone();
            runner
                .respond(v, &TiePolicy::PathFallback(fallback))
                .expect("one step per seller");
            queue.push_back(v);
        }
    }
    let profile = runner.profile();
    let seller_utility = crate::market::seller_revenue(instance, profile.as_slice(), seller);
    let trace = runner.finish("tree-fixed", TiePolicy::PreferLowest, None, Termination::Converged, Vec::new());
    Ok(TreeFixedRun {
        trace,
        profile,
        seller_utility,
    })
}

struct LeafDynamics<'a> {
    runner: Runner<'a>,
    policy: TiePolicy,
    exits: BTreeMap<&'static str, usize>,
}

impl LeafDynamics<'_> {
    fn settle(&mut self, node: usize) -> std::result::Result<(), CapHit> {
        if !self.runner.is_responding(node, true) {
            self.runner.respond(node, &self.policy)?;
        }
        Ok(())
    }

    fn free_neighbors(&self, node: usize, free: &[bool]) -> Vec<usize> {
        let mut v: Vec<usize> = self.runner.instance.neighbors(node).filter(|&x| free[x]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn edge_value(&self, a: usize, b: usize) -> Rational {
        let inst = self.runner.instance;
        inst.incident(a)
            .iter()
            .map(|&d| &inst.demands()[d])
            .find(|d| d.contains(b))
            .expect("neighbors share a demand")
            .value
            .clone()
    }

    /// Brings every free node to a non-malicious best response while the
    /// others stay put. `first` (if free) replies before anything else.
    fn stabilize(&mut self, free: &[bool], first: Option<usize>) -> std::result::Result<(), CapHit> {
        if let Some(v) = first.filter(|&v| free[v]) {
            self.settle(v)?;
        }
        let Some(u) = (0..free.len()).find(|&u| free[u] && self.free_neighbors(u, free).len() <= 1) else {
            return Ok(());
        };
        let mut rest = free.to_vec();
        rest[u] = false;
        let Some(&v) = self.free_neighbors(u, free).first() else {
            self.settle(u)?;
            return self.stabilize(&rest, None);
        };
        let value = self.edge_value(u, v);
        let mut x_prev = self.runner.prices[u].clone();
        let mut y_prev = self.runner.prices[v].clone();
        loop {
            self.settle(u)?;
            let x = self.runner.prices[u].clone();
            self.stabilize(&rest, Some(v))?;
            let y = self.runner.prices[v].clone();
            if self.runner.is_responding(u, true) {
                let reason = if x == x_prev {
                    "leaf-repeat"
                } else if y == y_prev {
                    "neighbor-repeat"
                } else if &x + &y == ExtPrice::Finite(value.clone()) {
                    "tight"
                } else {
                    "status-preserved"
                };
                *self.exits.entry(reason).or_default() += 1;
                return Ok(());
            }
            x_prev = x;
            y_prev = y;
        }
    }
}

/// Recursive leaf dynamics on a forest. Nodes in `fixed` keep their initial
/// price and must be leaves; every other node ends at a non-malicious best
/// response unless the step cap (default `10^4` per node) is reached first.
///
/// The lowest-index free node with at most one free neighbor `v` replies,
/// then the rest is stabilized recursively (starting with `v`), repeating
/// until that leaf is best responding too.
pub fn tree_dynamics(
    instance: &MarketInstance,
    initial: &PriceProfile,
    fixed: &[usize],
    cap: Option<usize>,
) -> Result<DynamicsTrace> {
    if !is_forest(instance) {
        return Err(Error::NotTree);
    }
    initial.check_covers(instance)?;
    let n = instance.num_nodes();
    let mut free = vec![true; n];
    for &f in fixed {
        if instance.incident(f).len() > 1 {
            return Err(Error::FixedNotLeaf(instance.node_name(f).to_string()));
        }
        free[f] = false;
    }
    let cap = cap.unwrap_or(DEFAULT_TREE_CAP_PER_NODE * n.max(1));
    let policy = TiePolicy::non_malicious();
    let mut dynamics = LeafDynamics {
        runner: Runner::new(instance, initial.as_slice().to_vec(), cap),
        policy: policy.clone(),
        exits: BTreeMap::new(),
    };
    let terminated = match dynamics.stabilize(&free, None) {
        Ok(()) => Termination::Converged,
        Err(CapHit) => Termination::CapReached,
    };
    let mut notes = Vec::new();
    if !dynamics.exits.is_empty() {
        let counts: Vec<String> = dynamics.exits.iter().map(|(k, v)| format!("{k}={v}")).collect();
        notes.push(format!("leaf exits: {}", counts.join(", ")));
    }
    if !fixed.is_empty() {
        let names: Vec<&str> = fixed.iter().map(|&f| instance.node_name(f)).collect();
        notes.push(format!("fixed: {}", names.join(", ")));
    }
    Ok(dynamics.runner.finish("tree", policy, None, terminated, notes))
}
