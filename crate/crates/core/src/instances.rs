//! Named instance families with reference profiles, plus seeded random
//! generators.
//!
//! Facts stored in a bundle are what the construction claims; tests always
//! re-derive them through `evaluate` and the checkers.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ln::{ln_lo_int, ln_up_int};
use crate::market::{max_welfare, MarketInstance, PriceProfile};
use crate::metrics::UnionFind;
use crate::rational::{ExtPrice, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fact {
    Bool(bool),
    Value(Rational),
    List(Vec<Rational>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionBundle {
    pub family: String,
    pub instance: MarketInstance,
    #[serde(default)]
    pub reference_profiles: IndexMap<String, IndexMap<String, ExtPrice>>,
    #[serde(default)]
    pub expected_facts: IndexMap<String, Fact>,
}

impl ConstructionBundle {
    fn new(family: &str, instance: MarketInstance) -> Self {
        let mut b = ConstructionBundle {
            family: family.to_string(),
            expected_facts: IndexMap::new(),
            reference_profiles: IndexMap::new(),
            instance,
        };
        let w = max_welfare(&b.instance);
        b.fact("max_welfare", Fact::Value(w));
        b
    }

    fn profile(&mut self, name: &str, prices: Vec<ExtPrice>) {
        let p = PriceProfile::new(prices);
        self.reference_profiles
            .insert(name.to_string(), p.to_named(&self.instance));
    }

    fn fact(&mut self, name: &str, fact: Fact) {
        self.expected_facts.insert(name.to_string(), fact);
    }

    pub fn reference(&self, name: &str) -> Result<PriceProfile> {
        let named = self
            .reference_profiles
            .get(name)
            .ok_or_else(|| Error::InvalidSize(format!("no reference profile `{name}`")))?;
        PriceProfile::from_named(&self.instance, named)
    }

    pub fn fact_value(&self, name: &str) -> Option<&Rational> {
        match self.expected_facts.get(name) {
            Some(Fact::Value(v)) => Some(v),
            _ => None,
        }
    }
}

fn fin(r: Rational) -> ExtPrice {
    ExtPrice::Finite(r)
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn path_instance(names: &[String], values: &[Rational]) -> Result<MarketInstance> {
    let mut b = MarketInstance::builder().nodes(names.iter().cloned());
    for (i, v) in values.iter().enumerate() {
        b = b.demand(&[&names[i], &names[i + 1]], v.clone());
    }
    b.build()
}

pub fn gen_path(values: &[Rational]) -> Result<ConstructionBundle> {
    if values.is_empty() {
        return Err(Error::InvalidSize("a path needs at least one edge".into()));
    }
    let names = numbered("v", values.len() + 1);
    Ok(ConstructionBundle::new("path", path_instance(&names, values)?))
}

pub fn gen_cycle(values: &[Rational]) -> Result<ConstructionBundle> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidSize("a cycle needs at least three edges".into()));
    }
    let names = numbered("s", n);
    let mut b = MarketInstance::builder().nodes(names.clone());
    for (i, v) in values.iter().enumerate() {
        b = b.demand(&[&names[i], &names[(i + 1) % n]], v.clone());
    }
    Ok(ConstructionBundle::new("cycle", b.build()?))
}

/// Star with center `c` and spike `s_i` on an edge of value `values[i-1]`.
/// Reference profiles: `center_zero` (spikes at their values) and
/// `center_top` (center at the largest value, spikes at 0).
pub fn gen_star(values: &[Rational]) -> Result<ConstructionBundle> {
    if values.is_empty() {
        return Err(Error::InvalidSize("a star needs at least one spike".into()));
    }
    let spikes = numbered("s", values.len());
    let mut b = MarketInstance::builder().node("c").nodes(spikes.clone());
    for (s, v) in spikes.iter().zip(values) {
        b = b.demand(&["c", s.as_str()], v.clone());
    }
    let mut bundle = ConstructionBundle::new("star", b.build()?);
    let mut zero = vec![fin(Rational::zero())];
    zero.extend(values.iter().cloned().map(fin));
    bundle.profile("center_zero", zero);
    let top = values.iter().max().cloned().expect("nonempty");
    let mut high = vec![fin(top)];
    high.extend(values.iter().map(|_| fin(Rational::zero())));
    bundle.profile("center_top", high);
    Ok(bundle)
}

/// Star with spikes `1, 1/2, …, 1/d`.
pub fn gen_harmonic_star(d: usize) -> Result<ConstructionBundle> {
    let values: Vec<Rational> = (1..=d).map(|i| Rational::new(1, i as i64)).collect();
    let mut bundle = gen_star(&values)?;
    bundle.family = "harmonic-star".into();
    let h = Rational::harmonic(d as u64);
    bundle.fact("monopolist_revenue", Fact::Value(h));
    bundle.fact("worst_nonmal_ne_revenue", Fact::Value(Rational::one()));
    Ok(bundle)
}

pub fn gen_clique_uniform(n: usize, value: Rational) -> Result<ConstructionBundle> {
    if n < 2 {
        return Err(Error::InvalidSize("a clique needs at least two nodes".into()));
    }
    let names = numbered("k", n);
    let mut b = MarketInstance::builder().nodes(names.clone());
    for a in 0..n {
        for c in a + 1..n {
            b = b.demand(&[&names[a], &names[c]], value.clone());
        }
    }
    let mut bundle = ConstructionBundle::new("clique", b.build()?);
    let half = &value / Rational::from(2i64);
    bundle.profile("all_half", vec![fin(half); n]);
    let mut worst = vec![fin(value.clone()); n];
    worst[0] = fin(Rational::zero());
    bundle.profile("worst_nonmal_ne", worst);
    let pairs = Rational::from(n * (n - 1) / 2);
    bundle.fact("best_nonmal_ne_revenue", Fact::Value(&pairs * &value));
    bundle.fact("worst_nonmal_ne_revenue", Fact::Value(Rational::from(n - 1) * &value));
    Ok(bundle)
}

/// Four sellers on a path with buyers of values 1, 6, 1.
pub fn gen_fig1() -> Result<ConstructionBundle> {
    let names: Vec<String> = ["copper", "zinc", "iron", "glass"].map(String::from).to_vec();
    let values = [1, 6, 1].map(Rational::from);
    let mut bundle = ConstructionBundle::new("fig1", path_instance(&names, &values)?);
    bundle.profile("ne", [0, 1, 5, 1].map(|x| fin(Rational::from(x))).to_vec());
    bundle.fact("revenue", Fact::Value(Rational::from(7)));
    Ok(bundle)
}

/// Path A–B–C–D with values 6, 9, 1: D earns nothing in any non-malicious
/// equilibrium.
pub fn gen_obs6_path() -> Result<ConstructionBundle> {
    let names: Vec<String> = ["A", "B", "C", "D"].map(String::from).to_vec();
    let values = [6, 9, 1].map(Rational::from);
    let mut bundle = ConstructionBundle::new("obs6", path_instance(&names, &values)?);
    bundle.profile("left_to_right", [0, 6, 3, 1].map(|x| fin(Rational::from(x))).to_vec());
    bundle.fact("d_utility", Fact::Value(Rational::zero()));
    bundle.fact("b_price_at_most", Fact::Value(Rational::from(6)));
    Ok(bundle)
}

/// Clique of `w+1` sellers on value-4 edges; every clique node carries a
/// harmonic gadget of `d` spikes.
pub fn gen_thm5(w: usize, d: usize) -> Result<ConstructionBundle> {
    if w < 1 || d < 1 {
        return Err(Error::InvalidSize("need w >= 1 and d >= 1".into()));
    }
    let k = w + 1;
    let clique = numbered("k", k);
    let mut b = MarketInstance::builder().nodes(clique.clone());
    for a in 0..k {
        for c in a + 1..k {
            b = b.demand(&[&clique[a], &clique[c]], Rational::from(4));
        }
    }
    let mut spike_values = Vec::new();
    for center in &clique {
        for j in 1..=d {
            let s = format!("{center}_s{j}");
            b = b.node(s.clone()).demand(&[center.as_str(), s.as_str()], Rational::new(1, j as i64));
            spike_values.push(Rational::new(1, j as i64));
        }
    }
    let mut bundle = ConstructionBundle::new("thm5", b.build()?);
    let mut mono = vec![fin(Rational::zero()); k];
    mono.extend(spike_values.into_iter().map(fin));
    bundle.profile("monopolist", mono);
    let kr = Rational::from(k);
    bundle.fact("monopolist_revenue", Fact::Value(&kr * Rational::harmonic(d as u64)));
    let cap = |ln: fn(u64) -> Rational| {
        Rational::from(4) * &kr * &kr + ln(d as u64) + Rational::one() + &kr * (Rational::one() + ln(w as u64))
    };
    bundle.fact("ne_cap_lower", Fact::Value(cap(ln_lo_int)));
    bundle.fact("ne_cap_upper", Fact::Value(cap(ln_up_int)));
    Ok(bundle)
}

/// Edge values of the doubling path: `5`, then from each odd edge value `v`
/// the next two edges get `2v+2` and `2v+6`.
pub fn thm6_path_values(m: usize) -> Vec<Rational> {
    let mut values = vec![Rational::from(5)];
    for _ in 0..m {
        let v = values.last().cloned().expect("nonempty");
        values.push(Rational::from(2) * &v + Rational::from(2));
        values.push(Rational::from(2) * &v + Rational::from(6));
    }
    values
}

/// Doubling path `p1 … p{2m+2}` with a gadget of `d-2` harmonic spikes on
/// each internal even node `p2, p4, …, p{2m}`.
pub fn gen_thm6(m: usize, d: usize) -> Result<ConstructionBundle> {
    if m < 1 || d < 3 {
        return Err(Error::InvalidSize("need m >= 1 and d >= 3".into()));
    }
    let path = numbered("p", 2 * m + 2);
    let values = thm6_path_values(m);
    let mut b = MarketInstance::builder().nodes(path.clone());
    for (i, v) in values.iter().enumerate() {
        b = b.demand(&[&path[i], &path[i + 1]], v.clone());
    }
    let mut spike_values = Vec::new();
    for center in (1..=m).map(|j| &path[2 * j - 1]) {
        for j in 1..=d - 2 {
            let s = format!("{center}_s{j}");
            b = b.node(s.clone()).demand(&[center.as_str(), s.as_str()], Rational::new(1, j as i64));
            spike_values.push(Rational::new(1, j as i64));
        }
    }
    let mut bundle = ConstructionBundle::new("thm6", b.build()?);
    let mut mono = vec![fin(Rational::zero()); path.len()];
    mono.extend(spike_values.into_iter().map(fin));
    bundle.profile("monopolist", mono);
    let a_seq: Vec<Rational> = values.iter().step_by(2).cloned().collect();
    let a_bounds: Vec<Rational> = (1..=a_seq.len())
        .map(|i| Rational::from(6 * (1i64 << i) - 6))
        .collect();
    bundle.fact("path_values", Fact::List(values.clone()));
    bundle.fact("a_sequence", Fact::List(a_seq));
    bundle.fact("a_bounds", Fact::List(a_bounds));
    bundle.fact("path_welfare", Fact::Value(values.iter().cloned().sum()));
    bundle.fact(
        "monopolist_revenue",
        Fact::Value(Rational::from(m) * Rational::harmonic((d - 2) as u64)),
    );
    Ok(bundle)
}

/// Two stars joined by a value-2 edge between centers `A` and `B`; `A` has
/// `d-1` harmonic spikes, `B` has `d-1` spikes of value `3/(d-1)`.
pub fn gen_prop5_two_stars(d: usize) -> Result<ConstructionBundle> {
    if d < 3 {
        return Err(Error::InvalidSize("need d >= 3".into()));
    }
    let k = d - 1;
    let mut b = MarketInstance::builder().nodes(["A", "B"]).demand(&["A", "B"], Rational::from(2));
    for j in 1..=k {
        let s = format!("a{j}");
        b = b.node(s.clone()).demand(&["A", s.as_str()], Rational::new(1, j as i64));
    }
    for j in 1..=k {
        let s = format!("b{j}");
        b = b.node(s.clone()).demand(&["B", s.as_str()], Rational::new(3, k as i64));
    }
    let mut bundle = ConstructionBundle::new("prop5", b.build()?);
    let mut malicious = vec![fin(Rational::zero()), fin(Rational::from(2))];
    malicious.extend((1..=k).map(|j| fin(Rational::new(1, j as i64))));
    malicious.extend((1..=k).map(|_| fin(Rational::from(10))));
    bundle.profile("malicious_ne", malicious);
    bundle.fact(
        "malicious_ne_revenue",
        Fact::Value(Rational::from(2) + Rational::harmonic(k as u64)),
    );
    if d > 7 {
        bundle.fact("nonmal_cap", Fact::Value(Rational::from(7)));
    }
    Ok(bundle)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn value(rng: &mut ChaCha8Rng, value_max: u64) -> Rational {
    Rational::from(rng.gen_range(1..=value_max.max(1)))
}

/// `G(n, p)` with integer values in `1..=value_max`.
pub fn gen_random_graph(n: usize, edge_prob: f64, value_max: u64, seed: u64) -> MarketInstance {
    let mut r = rng(seed);
    let names = numbered("v", n);
    let mut b = MarketInstance::builder().nodes(names.clone());
    for a in 0..n {
        for c in a + 1..n {
            if r.gen_bool(edge_prob.clamp(0.0, 1.0)) {
                let v = value(&mut r, value_max);
                b = b.demand(&[&names[a], &names[c]], v);
            }
        }
    }
    b.build().expect("generated instance is valid")
}

/// Simple graph with exactly `min(m, n(n-1)/2)` edges chosen uniformly.
pub fn gen_random_graph_edges(n: usize, m: usize, value_max: u64, seed: u64) -> MarketInstance {
    let mut r = rng(seed);
    let names = numbered("v", n);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |c| (a, c))).collect();
    pairs.shuffle(&mut r);
    pairs.truncate(m);
    pairs.sort_unstable();
    let mut b = MarketInstance::builder().nodes(names.clone());
    for (a, c) in pairs {
        let v = value(&mut r, value_max);
        b = b.demand(&[&names[a], &names[c]], v);
    }
    b.build().expect("generated instance is valid")
}

/// Random recursive tree: node `i` attaches to a uniform earlier node.
pub fn gen_random_tree(n: usize, value_max: u64, seed: u64) -> MarketInstance {
    let mut r = rng(seed);
    let names = numbered("v", n);
    let mut b = MarketInstance::builder().nodes(names.clone());
    for i in 1..n {
        let parent = r.gen_range(0..i);
        let v = value(&mut r, value_max);
        b = b.demand(&[&names[parent], &names[i]], v);
    }
    b.build().expect("generated instance is valid")
}

pub fn gen_random_path(n: usize, value_max: u64, seed: u64) -> MarketInstance {
    let mut r = rng(seed);
    let names = numbered("v", n.max(1));
    let values: Vec<Rational> = (1..n).map(|_| value(&mut r, value_max)).collect();
    path_instance(&names, &values).expect("generated instance is valid")
}

pub fn gen_random_cycle(n: usize, value_max: u64, seed: u64) -> Result<MarketInstance> {
    if n < 3 {
        return Err(Error::InvalidSize("a cycle needs at least three nodes".into()));
    }
    let mut r = rng(seed);
    let values: Vec<Rational> = (0..n).map(|_| value(&mut r, value_max)).collect();
    Ok(gen_cycle(&values)?.instance)
}

fn random_members(r: &mut ChaCha8Rng, n: usize, k_max: usize) -> Vec<usize> {
    let k = r.gen_range(1..=k_max.clamp(1, n));
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(r);
    nodes.truncate(k);
    nodes.sort_unstable();
    nodes
}

/// `m` demands with member counts uniform in `1..=k_max`.
pub fn gen_random_hyper(n: usize, k_max: usize, m: usize, value_max: u64, seed: u64) -> Result<MarketInstance> {
    if n == 0 && m > 0 {
        return Err(Error::InvalidSize("demands need at least one node".into()));
    }
    let mut r = rng(seed);
    let names = numbered("v", n);
    let mut b = MarketInstance::builder().nodes(names.clone());
    for _ in 0..m {
        let members: Vec<&str> = random_members(&mut r, n, k_max).into_iter().map(|i| names[i].as_str()).collect();
        let v = value(&mut r, value_max);
        b = b.demand(&members, v);
    }
    b.build()
}

/// Berge-acyclic hypergraph: candidate demands are kept only when their
/// members lie in pairwise distinct components.
pub fn gen_random_berge_forest(n: usize, k_max: usize, value_max: u64, seed: u64) -> MarketInstance {
    let mut r = rng(seed);
    let names = numbered("v", n);
    let mut uf = UnionFind::new(n);
    let mut b = MarketInstance::builder().nodes(names.clone());
    for _ in 0..2 * n {
        if n == 0 {
            break;
        }
        let members = random_members(&mut r, n, k_max);
        let mut roots: Vec<usize> = members.iter().map(|&m| uf.find(m)).collect();
        roots.sort_unstable();
        roots.dedup();
        if roots.len() < members.len() {
            continue;
        }
        for w in members.windows(2) {
            uf.union(w[0], w[1]);
        }
        let v = value(&mut r, value_max);
        let names: Vec<&str> = members.iter().map(|&i| names[i].as_str()).collect();
        b = b.demand(&names, v);
    }
    b.build().expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::check_equilibrium;
    use crate::market::evaluate;
    use crate::metrics::{arboricity_exact, berge_acyclic, max_degree};
    use crate::rational::rat;

    fn revenue(b: &ConstructionBundle, profile: &str) -> Rational {
        evaluate(&b.instance, &b.reference(profile).unwrap()).unwrap().total_revenue
    }

    #[test]
    fn fig1_facts_reverify() {
        let b = gen_fig1().unwrap();
        let p = b.reference("ne").unwrap();
        assert_eq!(revenue(&b, "ne"), *b.fact_value("revenue").unwrap());
        assert_eq!(max_welfare(&b.instance), rat(8, 1));
        assert!(check_equilibrium(&b.instance, &p, false).is_ne);
    }

    #[test]
    fn clique_bundle() {
        let b = gen_clique_uniform(6, Rational::one()).unwrap();
        assert_eq!(revenue(&b, "worst_nonmal_ne"), rat(5, 1));
        assert_eq!(revenue(&b, "all_half"), rat(15, 1));
        for name in ["worst_nonmal_ne", "all_half"] {
            assert!(check_equilibrium(&b.instance, &b.reference(name).unwrap(), true).is_non_malicious_ne);
        }
    }

    #[test]
    fn harmonic_star_bundle() {
        let b = gen_harmonic_star(4).unwrap();
        assert_eq!(revenue(&b, "center_zero"), rat(25, 12));
        let worst = b.reference("center_top").unwrap();
        assert_eq!(evaluate(&b.instance, &worst).unwrap().total_revenue, Rational::one());
        assert!(check_equilibrium(&b.instance, &worst, true).is_non_malicious_ne);
    }

    #[test]
    fn thm5_bundle() {
        let b = gen_thm5(2, 4).unwrap();
        assert_eq!(revenue(&b, "monopolist"), rat(25, 4));
        assert_eq!(max_welfare(&b.instance), rat(73, 4));
        assert_eq!(max_degree(&b.instance), 4 + 2);
        let clique = gen_clique_uniform(3, Rational::from(4)).unwrap().instance;
        assert_eq!(arboricity_exact(&clique, 16).unwrap(), 2);

        let small = gen_thm5(1, 1).unwrap().instance;
        assert_eq!(small.num_nodes(), 4);
        assert_eq!(small.num_demands(), 3);
        assert!(gen_thm5(0, 1).is_err());
    }

    #[test]
    fn thm6_bundle() {
        let b = gen_thm6(2, 5).unwrap();
        let vals = [5, 12, 16, 34, 38].map(Rational::from).to_vec();
        assert_eq!(b.expected_facts["path_values"], Fact::List(vals));
        assert_eq!(revenue(&b, "monopolist"), rat(11, 3));
        let Fact::List(a) = &b.expected_facts["a_sequence"] else { panic!() };
        for (i, a_i) in a.iter().enumerate() {
            assert!(*a_i < Rational::from(6 * (1i64 << (i + 1)) - 6));
        }
        let small = gen_thm6(1, 3).unwrap().instance;
        assert_eq!(small.num_demands(), 4);
        assert_eq!(small.num_nodes(), 5);
    }

    #[test]
    fn prop5_bundle() {
        let b = gen_prop5_two_stars(16).unwrap();
        let expected = rat(2, 1) + rat(1195757, 360360);
        assert_eq!(revenue(&b, "malicious_ne"), expected);
        assert_eq!(b.fact_value("malicious_ne_revenue"), Some(&expected));
        let b8 = gen_prop5_two_stars(8).unwrap();
        assert!(check_equilibrium(&b8.instance, &b8.reference("malicious_ne").unwrap(), false).is_ne);
    }

    #[test]
    fn random_generators_are_deterministic() {
        let a = serde_json::to_string(&gen_random_graph(7, 0.5, 10, 42)).unwrap();
        let b = serde_json::to_string(&gen_random_graph(7, 0.5, 10, 42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(gen_random_graph(8, 1.0, 10, 1).num_demands(), 28);
        let t = gen_random_tree(1, 5, 9);
        assert_eq!((t.num_nodes(), t.num_demands()), (1, 0));
        assert_eq!(gen_random_graph_edges(6, 8, 10, 3).num_demands(), 8);
        for seed in 0..20 {
            let h = gen_random_berge_forest(10, 4, 10, seed);
            assert!(berge_acyclic(&h));
            assert!(h.max_demand_size() <= 4);
            let h = gen_random_hyper(6, 3, 5, 10, seed).unwrap();
            assert_eq!(h.num_demands(), 5);
        }
    }
}
