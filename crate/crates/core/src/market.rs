//! Instances, price profiles and their outcomes.
//!
//! A [`MarketInstance`] is a list of sellers (nodes) and single-minded
//! buyers (demands). A demand over members `M` with value `v` buys iff every
//! member price is finite and `sum(p_i for i in M) <= v`. Sellers and
//! demands are addressed internally by their position in the instance;
//! "lowest id" everywhere means lowest position.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{ExtPrice, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Demand {
    pub id: String,
    /// Member sellers as node indices, in the order given at construction.
    pub members: Vec<usize>,
    pub value: Rational,
}

impl Demand {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.contains(&node)
    }

    /// The other endpoint of a two-member demand.
    pub fn other(&self, node: usize) -> Option<usize> {
        match self.members.as_slice() {
            [a, b] if *a == node => Some(*b),
            [a, b] if *b == node => Some(*a),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Graph,
    Hypergraph,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct MarketInstance {
    nodes: Vec<String>,
    demands: Vec<Demand>,
    incidence: Vec<Vec<usize>>,
    node_index: HashMap<String, usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DemandJson {
    id: String,
    members: Vec<String>,
    value: Rational,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct InstanceJson {
    nodes: Vec<String>,
    demands: Vec<DemandJson>,
}

impl TryFrom<InstanceJson> for MarketInstance {
    type Error = Error;

    fn try_from(j: InstanceJson) -> Result<Self> {
        let demands = j
            .demands
            .into_iter()
            .map(|d| (d.id, d.members, d.value))
            .collect();
        MarketInstance::new(j.nodes, demands)
    }
}

impl From<MarketInstance> for InstanceJson {
    fn from(m: MarketInstance) -> Self {
        let demands = m
            .demands
            .iter()
            .map(|d| DemandJson {
                id: d.id.clone(),
                members: d.members.iter().map(|&i| m.nodes[i].clone()).collect(),
                value: d.value.clone(),
            })
            .collect();
        InstanceJson {
            nodes: m.nodes,
            demands,
        }
    }
}

impl MarketInstance {
    /// Validates and builds an instance from named parts `(id, members, value)`.
    pub fn new(nodes: Vec<String>, demands: Vec<(String, Vec<String>, Rational)>) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.clone(), i).is_some() {
                return Err(Error::DuplicateNode(n.clone()));
            }
        }
        let mut seen_ids = HashMap::new();
        let mut built = Vec::with_capacity(demands.len());
        for (id, members, value) in demands {
            if seen_ids.insert(id.clone(), ()).is_some() {
                return Err(Error::DuplicateDemand(id));
            }
            if members.is_empty() {
                return Err(Error::EmptyDemand(id));
            }
            if !value.is_positive() {
                return Err(Error::NonPositiveValue(id));
            }
            let mut idx = Vec::with_capacity(members.len());
            for m in &members {
                let i = *node_index
                    .get(m)
                    .ok_or_else(|| Error::UnknownNode(m.clone()))?;
                if idx.contains(&i) {
                    return Err(Error::DuplicateMember {
                        demand: id,
                        node: m.clone(),
                    });
                }
                idx.push(i);
            }
            built.push(Demand {
                id,
                members: idx,
                value,
            });
        }
        let mut incidence = vec![Vec::new(); nodes.len()];
        for (d, demand) in built.iter().enumerate() {
            for &m in &demand.members {
                incidence[m].push(d);
            }
        }
        Ok(MarketInstance {
            nodes,
            demands: built,
            incidence,
            node_index,
        })
    }

    pub fn builder() -> InstanceBuilder {
        InstanceBuilder::default()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_demands(&self) -> usize {
        self.demands.len()
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_index.get(name).copied()
    }

    pub fn demand_index(&self, id: &str) -> Option<usize> {
        self.demands.iter().position(|d| d.id == id)
    }

    /// Demands (by index) containing `node`, in demand order.
    pub fn incident(&self, node: usize) -> &[usize] {
        &self.incidence[node]
    }

    pub fn kind(&self) -> InstanceKind {
        if self.demands.iter().all(|d| d.size() == 2) {
            InstanceKind::Graph
        } else {
            InstanceKind::Hypergraph
        }
    }

    pub fn is_graph(&self) -> bool {
        self.kind() == InstanceKind::Graph
    }

    /// Largest demand size (`e_max`), 0 for an instance without demands.
    pub fn max_demand_size(&self) -> usize {
        self.demands.iter().map(Demand::size).max().unwrap_or(0)
    }

    pub fn max_value(&self) -> Rational {
        self.demands
            .iter()
            .map(|d| d.value.clone())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Neighbor node indices of `node` over two-member demands, with
    /// multiplicity, in demand order.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.incidence[node]
            .iter()
            .filter_map(move |&d| self.demands[d].other(node))
    }
}

/// Incremental construction with automatic demand ids `e1, e2, ...`.
#[derive(Default, Debug, Clone)]
pub struct InstanceBuilder {
    nodes: Vec<String>,
    demands: Vec<(String, Vec<String>, Rational)>,
}

impl InstanceBuilder {
    pub fn node(mut self, name: impl Into<String>) -> Self {
        self.nodes.push(name.into());
        self
    }

    pub fn nodes<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.nodes.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn demand<S: AsRef<str>>(mut self, members: &[S], value: Rational) -> Self {
        let id = format!("e{}", self.demands.len() + 1);
        self.demands.push((
            id,
            members.iter().map(|m| m.as_ref().to_string()).collect(),
            value,
        ));
        self
    }

    pub fn demand_with_id<S: AsRef<str>>(
        mut self,
        id: impl Into<String>,
        members: &[S],
        value: Rational,
    ) -> Self {
        self.demands.push((
            id.into(),
            members.iter().map(|m| m.as_ref().to_string()).collect(),
            value,
        ));
        self
    }

    pub fn build(self) -> Result<MarketInstance> {
        MarketInstance::new(self.nodes, self.demands)
    }
}

/// One price per node, indexed like [`MarketInstance::nodes`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceProfile {
    prices: Vec<ExtPrice>,
}

impl PriceProfile {
    pub fn new(prices: Vec<ExtPrice>) -> Self {
        PriceProfile { prices }
    }

    pub fn uniform(n: usize, price: ExtPrice) -> Self {
        PriceProfile {
            prices: vec![price; n],
        }
    }

    pub fn all_infinite(instance: &MarketInstance) -> Self {
        Self::uniform(instance.num_nodes(), ExtPrice::Infinity)
    }

    pub fn all_zero(instance: &MarketInstance) -> Self {
        Self::uniform(instance.num_nodes(), ExtPrice::zero())
    }

    pub fn from_finite(prices: impl IntoIterator<Item = Rational>) -> Self {
        PriceProfile {
            prices: prices.into_iter().map(ExtPrice::Finite).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn get(&self, node: usize) -> &ExtPrice {
        &self.prices[node]
    }

    pub fn set(&mut self, node: usize, price: ExtPrice) {
        self.prices[node] = price;
    }

    pub fn as_slice(&self) -> &[ExtPrice] {
        &self.prices
    }

    /// Checks that the profile has exactly one price per node.
    pub fn check_covers(&self, instance: &MarketInstance) -> Result<()> {
        if self.prices.len() < instance.num_nodes() {
            return Err(Error::Coverage(
                instance.node_name(self.prices.len()).to_string(),
            ));
        }
        if self.prices.len() > instance.num_nodes() {
            return Err(Error::UnknownPriceNode(format!("#{}", instance.num_nodes())));
        }
        Ok(())
    }

    pub fn from_named(instance: &MarketInstance, named: &IndexMap<String, ExtPrice>) -> Result<Self> {
        for name in named.keys() {
            if instance.node_index(name).is_none() {
                return Err(Error::UnknownPriceNode(name.clone()));
            }
        }
        let prices = instance
            .nodes()
            .iter()
            .map(|n| named.get(n).cloned().ok_or_else(|| Error::Coverage(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(PriceProfile { prices })
    }

    pub fn to_named(&self, instance: &MarketInstance) -> IndexMap<String, ExtPrice> {
        instance
            .nodes()
            .iter()
            .cloned()
            .zip(self.prices.iter().cloned())
            .collect()
    }
}

/// The `{"prices": {...}}` file format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceFile {
    pub prices: IndexMap<String, ExtPrice>,
}

impl PriceFile {
    pub fn from_profile(instance: &MarketInstance, profile: &PriceProfile) -> Self {
        PriceFile {
            prices: profile.to_named(instance),
        }
    }

    pub fn to_profile(&self, instance: &MarketInstance) -> Result<PriceProfile> {
        PriceProfile::from_named(instance, &self.prices)
    }
}

/// Slack of a seller on a demand: value minus the other members' prices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slack {
    NegInfinity,
    Finite(Rational),
}

impl Slack {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Slack::Finite(r) => Some(r),
            Slack::NegInfinity => None,
        }
    }

    /// Whether a price of `p` by the seller still lets the demand buy.
    pub fn admits(&self, p: &Rational) -> bool {
        matches!(self, Slack::Finite(s) if s >= p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    /// Sold demand indices, ascending.
    pub sold: Vec<usize>,
    pub revenue_by_seller: Vec<Rational>,
    pub total_revenue: Rational,
    pub realized_welfare: Rational,
}

/// Serializable view of an [`Outcome`] with names instead of indices.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct OutcomeReport {
    pub sold: Vec<String>,
    pub revenue_by_seller: IndexMap<String, Rational>,
    pub total_revenue: Rational,
    pub realized_welfare: Rational,
}

impl Outcome {
    pub fn is_sold(&self, demand: usize) -> bool {
        self.sold.binary_search(&demand).is_ok()
    }

    pub fn report(&self, instance: &MarketInstance) -> OutcomeReport {
        OutcomeReport {
            sold: self
                .sold
                .iter()
                .map(|&d| instance.demands()[d].id.clone())
                .collect(),
            revenue_by_seller: instance
                .nodes()
                .iter()
                .cloned()
                .zip(self.revenue_by_seller.iter().cloned())
                .collect(),
            total_revenue: self.total_revenue.clone(),
            realized_welfare: self.realized_welfare.clone(),
        }
    }
}

/// Sum of member prices of a demand, infinite if any member is.
pub fn price_sum(demand: &Demand, prices: &[ExtPrice]) -> ExtPrice {
    let mut total = Rational::zero();
    for &m in &demand.members {
        match &prices[m] {
            ExtPrice::Finite(p) => total += p,
            ExtPrice::Infinity => return ExtPrice::Infinity,
        }
    }
    ExtPrice::Finite(total)
}

pub(crate) fn demand_sold(demand: &Demand, prices: &[ExtPrice]) -> bool {
    match price_sum(demand, prices) {
        ExtPrice::Finite(s) => s <= demand.value,
        ExtPrice::Infinity => false,
    }
}

pub(crate) fn slack_of(demand: &Demand, seller: usize, prices: &[ExtPrice]) -> Slack {
    let mut s = demand.value.clone();
    for &m in &demand.members {
        if m == seller {
            continue;
        }
        match &prices[m] {
            ExtPrice::Finite(p) => s -= p,
            ExtPrice::Infinity => return Slack::NegInfinity,
        }
    }
    Slack::Finite(s)
}

/// Revenue of `seller`: its price times its number of sold demands.
pub(crate) fn seller_revenue(instance: &MarketInstance, prices: &[ExtPrice], seller: usize) -> Rational {
    match &prices[seller] {
        ExtPrice::Infinity => Rational::zero(),
        ExtPrice::Finite(p) => {
            if p.is_zero() {
                return Rational::zero();
            }
            let sold = instance
                .incident(seller)
                .iter()
                .filter(|&&d| demand_sold(&instance.demands()[d], prices))
                .count();
            p * Rational::from(sold)
        }
    }
}

pub fn evaluate(instance: &MarketInstance, profile: &PriceProfile) -> Result<Outcome> {
    profile.check_covers(instance)?;
    let prices = profile.as_slice();
    let mut sold = Vec::new();
    let mut sold_count = vec![0usize; instance.num_nodes()];
    let mut realized_welfare = Rational::zero();
    for (d, demand) in instance.demands().iter().enumerate() {
        if demand_sold(demand, prices) {
            sold.push(d);
            realized_welfare += &demand.value;
            for &m in &demand.members {
                sold_count[m] += 1;
            }
        }
    }
    let revenue_by_seller: Vec<Rational> = prices
        .iter()
        .zip(&sold_count)
        .map(|(p, &c)| match p {
            ExtPrice::Finite(p) if c > 0 => p * Rational::from(c),
            _ => Rational::zero(),
        })
        .collect();
    let total_revenue = revenue_by_seller.iter().sum();
    Ok(Outcome {
        sold,
        revenue_by_seller,
        total_revenue,
        realized_welfare,
    })
}

pub fn slack(instance: &MarketInstance, profile: &PriceProfile, seller: usize, demand: usize) -> Result<Slack> {
    profile.check_covers(instance)?;
    let d = instance
        .demands()
        .get(demand)
        .ok_or_else(|| Error::UnknownDemand(format!("#{demand}")))?;
    if !d.contains(seller) {
        return Err(Error::NotMember {
            seller: instance.node_name(seller).to_string(),
            demand: d.id.clone(),
        });
    }
    Ok(slack_of(d, seller, profile.as_slice()))
}

/// True iff every member price is finite and they sum exactly to the value.
pub fn is_tight(instance: &MarketInstance, profile: &PriceProfile, demand: usize) -> bool {
    let d = &instance.demands()[demand];
    matches!(price_sum(d, profile.as_slice()), ExtPrice::Finite(s) if s == d.value)
}

pub fn max_welfare(instance: &MarketInstance) -> Rational {
    instance.demands().iter().map(|d| &d.value).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn path(values: &[i64]) -> MarketInstance {
        let names: Vec<String> = (0..=values.len()).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
        let mut b = MarketInstance::builder().nodes(names.clone());
        for (i, v) in values.iter().enumerate() {
            b = b.demand(&[&names[i], &names[i + 1]], Rational::from(*v));
        }
        b.build().unwrap()
    }

    fn prices(ps: &[i64]) -> PriceProfile {
        PriceProfile::from_finite(ps.iter().map(|&p| Rational::from(p)))
    }

    #[test]
    fn fig1_profile_sells_two_edges() {
        let inst = path(&[1, 6, 1]);
        let out = evaluate(&inst, &prices(&[0, 1, 5, 1])).unwrap();
        assert_eq!(out.sold, vec![0, 1]);
        assert_eq!(out.total_revenue, Rational::from(7i64));
        assert_eq!(out.realized_welfare, Rational::from(7i64));
        assert_eq!(max_welfare(&inst), Rational::from(8i64));
    }

    #[test]
    fn zero_prices_sell_everything() {
        let inst = path(&[3, 2, 5, 1]);
        let out = evaluate(&inst, &PriceProfile::all_zero(&inst)).unwrap();
        assert_eq!(out.sold.len(), 4);
        assert!(out.total_revenue.is_zero());
        assert_eq!(out.realized_welfare, max_welfare(&inst));
    }

    #[test]
    fn cycle_profile_sells_only_heavy_edge() {
        let inst = MarketInstance::builder()
            .nodes(["s1", "s2", "s3", "s4"])
            .demand(&["s1", "s2"], rat(1, 1))
            .demand(&["s2", "s3"], rat(6, 1))
            .demand(&["s3", "s4"], rat(1, 1))
            .demand(&["s4", "s1"], rat(6, 1))
            .build()
            .unwrap();
        let out = evaluate(&inst, &prices(&[6, 1, 5, 6])).unwrap();
        assert_eq!(out.sold, vec![1]);
        assert_eq!(out.total_revenue, rat(6, 1));
    }

    #[test]
    fn infinite_member_blocks_sale() {
        let inst = path(&[5]);
        let p = PriceProfile::new(vec![ExtPrice::zero(), ExtPrice::Infinity]);
        let out = evaluate(&inst, &p).unwrap();
        assert!(out.sold.is_empty());
        assert!(out.total_revenue.is_zero());
    }

    #[test]
    fn coverage_errors() {
        let inst = path(&[1, 1]);
        assert!(matches!(evaluate(&inst, &prices(&[0, 0])), Err(Error::Coverage(n)) if n == "C"));
        let mut named = IndexMap::new();
        named.insert("A".to_string(), ExtPrice::zero());
        assert!(matches!(PriceProfile::from_named(&inst, &named), Err(Error::Coverage(_))));
    }

    #[test]
    fn slack_cases() {
        let inst = path(&[1, 6, 1]);
        let p = prices(&[0, 1, 5, 1]);
        assert_eq!(slack(&inst, &p, 2, 1).unwrap(), Slack::Finite(rat(5, 1)));
        // tight demand: slack equals own price
        assert_eq!(slack(&inst, &p, 1, 0).unwrap(), Slack::Finite(rat(1, 1)));
        assert!(matches!(slack(&inst, &p, 0, 2), Err(Error::NotMember { .. })));
        let p_inf = PriceProfile::new(vec![
            ExtPrice::Infinity,
            ExtPrice::zero(),
            ExtPrice::zero(),
            ExtPrice::zero(),
        ]);
        assert_eq!(slack(&inst, &p_inf, 1, 0).unwrap(), Slack::NegInfinity);
    }

    #[test]
    fn hyperedge_and_singleton_slack() {
        let inst = MarketInstance::builder()
            .nodes(["a", "b", "c"])
            .demand(&["a", "b", "c"], rat(1, 1))
            .demand(&["a"], rat(3, 1))
            .build()
            .unwrap();
        let p = PriceProfile::from_finite([rat(9, 1), rat(1, 4), rat(1, 4)]);
        assert_eq!(slack(&inst, &p, 0, 0).unwrap(), Slack::Finite(rat(1, 2)));
        assert_eq!(slack(&inst, &p, 0, 1).unwrap(), Slack::Finite(rat(3, 1)));
        assert_eq!(inst.kind(), InstanceKind::Hypergraph);
    }

    #[test]
    fn tightness() {
        let inst = path(&[1]);
        assert!(is_tight(&inst, &prices(&[0, 1]), 0));
        assert!(!is_tight(&inst, &prices(&[0, 0]), 0));
        assert!(is_tight(&inst, &PriceProfile::from_finite([rat(1, 3), rat(2, 3)]), 0));
        assert!(!is_tight(&inst, &PriceProfile::new(vec![ExtPrice::Infinity, ExtPrice::zero()]), 0));
    }

    #[test]
    fn welfare_sums() {
        let empty = MarketInstance::builder().node("x").build().unwrap();
        assert!(max_welfare(&empty).is_zero());
        let star = MarketInstance::builder()
            .nodes(["c", "s1", "s2", "s3"])
            .demand(&["c", "s1"], rat(1, 1))
            .demand(&["c", "s2"], rat(1, 2))
            .demand(&["c", "s3"], rat(1, 3))
            .build()
            .unwrap();
        assert_eq!(max_welfare(&star), rat(11, 6));
    }

    #[test]
    fn validation_rejects_bad_instances() {
        assert!(matches!(
            MarketInstance::builder().nodes(["a", "a"]).build(),
            Err(Error::DuplicateNode(_))
        ));
        assert!(matches!(
            MarketInstance::builder().nodes(["a"]).demand(&["b"], rat(1, 1)).build(),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            MarketInstance::builder().nodes(["a"]).demand(&["a"], rat(0, 1)).build(),
            Err(Error::NonPositiveValue(_))
        ));
        assert!(matches!(
            MarketInstance::builder().nodes(["a", "b"]).demand(&["a", "a"], rat(1, 1)).build(),
            Err(Error::DuplicateMember { .. })
        ));
        let empty: [&str; 0] = [];
        assert!(matches!(
            MarketInstance::builder().nodes(["a"]).demand(&empty, rat(1, 1)).build(),
            Err(Error::EmptyDemand(_))
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let text = r#"{"nodes":["A","B"],"demands":[{"id":"e1","members":["A","B"],"value":"6"},{"id":"e2","members":["A","B"],"value":"1/3"}]}"#;
        let inst: MarketInstance = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::to_string(&inst).unwrap(), text);
        let prices = r#"{"prices":{"A":"0","B":"inf"}}"#;
        let pf: PriceFile = serde_json::from_str(prices).unwrap();
        assert_eq!(serde_json::to_string(&pf).unwrap(), prices);
        let profile = pf.to_profile(&inst).unwrap();
        assert_eq!(profile.get(1), &ExtPrice::Infinity);
    }
}
