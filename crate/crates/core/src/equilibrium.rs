//! Equilibrium verdicts and revenue bounds reported as exact inequalities.
//!
//! Lower bounds put an upper enclosure of every `ln` term into the divisor
//! and caps use the lower enclosure, so `holds = true` is always sound.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::best_response::is_best_responding_on;
use crate::error::{Error, Result};
use crate::instances::{gen_thm5, gen_thm6};
use crate::ln::{ln_lo_int, ln_up_int};
use crate::market::{evaluate, max_welfare, MarketInstance, PriceProfile};
use crate::metrics::{arboricity, forest_partition_bounds, is_forest, max_degree, orient_partition};
use crate::rational::{ExtPrice, Rational};

/// Graphs up to this many nodes get their exact arboricity in bound checks.
pub const EXACT_ARBORICITY_LIMIT: usize = 14;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub seller: String,
    pub current_utility: Rational,
    pub witness_price: Rational,
    pub witness_utility: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumVerdict {
    pub is_ne: bool,
    pub is_non_malicious_ne: bool,
    /// Plain violations, or refined ones when checked in refined mode.
    pub violations: Vec<Violation>,
}

/// Runs the best-response check for every seller. The profile must cover
/// the instance.
pub fn check_equilibrium(instance: &MarketInstance, profile: &PriceProfile, refined: bool) -> EquilibriumVerdict {
    let prices = profile.as_slice();
    let mut is_ne = true;
    let mut is_nm = true;
    let mut violations = Vec::new();
    for seller in 0..instance.num_nodes() {
        let plain = is_best_responding_on(instance, prices, seller, false);
        let strict = is_best_responding_on(instance, prices, seller, true);
        is_ne &= plain.best_responding;
        is_nm &= strict.best_responding;
        let shown = if refined { strict } else { plain };
        if let Some(w) = shown.witness {
            violations.push(Violation {
                seller: instance.node_name(seller).to_string(),
                current_utility: shown.current_utility,
                witness_price: w.price,
                witness_utility: w.utility,
            });
        }
    }
    EquilibriumVerdict {
        is_ne,
        is_non_malicious_ne: is_nm,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeCheck {
    pub node: String,
    pub assigned_value: Rational,
    pub bound: Rational,
    pub holds: bool,
}

/// Split of the demands of a non-malicious equilibrium on a graph into
/// all-high demands and per-node buckets of demands whose other endpoint
/// prices at most half the value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub all_high: Vec<usize>,
    /// Per node, the demands assigned to it.
    pub low_assignment: Vec<Vec<usize>>,
    pub per_node: Vec<NodeCheck>,
    pub all_high_value: Rational,
    /// `Σ 2·p_owner` over all-high demands with owners from an oriented
    /// forest partition.
    pub all_high_mapped: Rational,
    /// `2·w·total revenue`.
    pub all_high_bound: Rational,
    pub all_high_holds: bool,
    pub arboricity: usize,
}

impl Decomposition {
    pub fn holds(&self) -> bool {
        self.all_high_holds && self.per_node.iter().all(|c| c.holds)
    }
}

fn is_low(price: &ExtPrice, value: &Rational) -> bool {
    match price {
        ExtPrice::Finite(p) => p * Rational::from(2i64) <= *value,
        ExtPrice::Infinity => false,
    }
}

pub fn thm3_decomposition(instance: &MarketInstance, profile: &PriceProfile) -> Result<Decomposition> {
    if !instance.is_graph() {
        return Err(Error::NotGraph);
    }
    profile.check_covers(instance)?;
    if !check_equilibrium(instance, profile, true).is_non_malicious_ne {
        return Err(Error::NotNonMaliciousNe);
    }
    let n = instance.num_nodes();
    let prices = profile.as_slice();
    let outcome = evaluate(instance, profile)?;
    let mut all_high = Vec::new();
    let mut low_assignment = vec![Vec::new(); n];
    for (i, d) in instance.demands().iter().enumerate() {
        let (a, b) = (d.members[0], d.members[1]);
        // a demand belongs to v when v's partner is low
        let owner = [a, b]
            .into_iter()
            .filter(|&v| is_low(&prices[d.other(v).expect("graph demand")], &d.value))
            .min();
        match owner {
            Some(v) => low_assignment[v].push(i),
            None => all_high.push(i),
        }
    }

    let degree = max_degree(instance) as u64;
    let factor = Rational::from(2i64) * (ln_up_int(degree) + Rational::one());
    let per_node = (0..n)
        .map(|v| {
            let assigned_value: Rational = low_assignment[v]
                .iter()
                .map(|&d| instance.demands()[d].value.clone())
                .sum();
            let bound = &factor * &outcome.revenue_by_seller[v];
            NodeCheck {
                node: instance.node_name(v).to_string(),
                holds: assigned_value <= bound,
                assigned_value,
                bound,
            }
        })
        .collect();

    let w = arboricity(instance, EXACT_ARBORICITY_LIMIT).upper();
    let owners = orient_partition(instance, &forest_partition_bounds(instance).partition);
    let all_high_value: Rational = all_high.iter().map(|&d| instance.demands()[d].value.clone()).sum();
    let all_high_mapped: Rational = all_high
        .iter()
        .map(|&d| match &prices[owners[d]] {
            ExtPrice::Finite(p) => p * Rational::from(2i64),
            ExtPrice::Infinity => unreachable!("all-high endpoints of an equilibrium are finite"),
        })
        .sum();
    let all_high_bound = Rational::from(2 * w) * &outcome.total_revenue;
    Ok(Decomposition {
        all_high_holds: all_high_value <= all_high_mapped && all_high_value <= all_high_bound,
        all_high,
        low_assignment,
        per_node,
        all_high_value,
        all_high_mapped,
        all_high_bound,
        arboricity: w,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BoundKind {
    /// Revenue at least `W / (2(w + 1 + ln d))` on graphs.
    Thm3,
    /// The forest case of `Thm3` (`w = 1`).
    Cor1,
    /// Revenue at least `W / (e_max (w + 1 + ln d))` on hypergraphs.
    Thm8,
    /// Equilibrium revenue cap on the clique-with-gadgets construction.
    Thm5Cap { w: usize, d: usize },
    /// Equilibrium revenue cap on the doubling-path construction.
    Thm6Cap { m: usize, d: usize },
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::Thm3 => f.write_str("thm3"),
            BoundKind::Cor1 => f.write_str("cor1"),
            BoundKind::Thm8 => f.write_str("thm8"),
            BoundKind::Thm5Cap { w, d } => write!(f, "thm5-cap(w={w},d={d})"),
            BoundKind::Thm6Cap { m, d } => write!(f, "thm6-cap(m={m},d={d})"),
        }
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    /// Accepts `thm3`/`graph`, `cor1`/`forest`, `thm8`/`hypergraph`,
    /// `thm5-cap:W,D`/`clique-gadget-cap:W,D` and
    /// `thm6-cap:M,D`/`doubling-path-cap:M,D`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSize(format!("unknown bound `{s}`"));
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let pair = |a: Option<&str>| -> Result<(usize, usize)> {
            let a = a.ok_or_else(bad)?;
            let (x, y) = a.split_once(',').ok_or_else(bad)?;
            Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
        };
        match name.replace('_', "-").as_str() {
            "thm3" | "graph" => Ok(BoundKind::Thm3),
            "cor1" | "forest" => Ok(BoundKind::Cor1),
            "thm8" | "hypergraph" => Ok(BoundKind::Thm8),
            "thm5-cap" | "clique-gadget-cap" => pair(args).map(|(w, d)| BoundKind::Thm5Cap { w, d }),
            "thm6-cap" | "doubling-path-cap" => pair(args).map(|(m, d)| BoundKind::Thm6Cap { m, d }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `lhs >= rhs`
    AtLeast,
    /// `lhs <= rhs`
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: Rational,
    pub rhs: Rational,
    pub direction: Direction,
    pub holds: bool,
    pub parameters: IndexMap<String, Rational>,
}

impl BoundReport {
    fn new(name: String, lhs: Rational, rhs: Rational, direction: Direction, parameters: IndexMap<String, Rational>) -> Self {
        let holds = match direction {
            Direction::AtLeast => lhs >= rhs,
            Direction::AtMost => lhs <= rhs,
        };
        BoundReport {
            name,
            lhs,
            rhs,
            direction,
            holds,
            parameters,
        }
    }
}

fn params<const N: usize>(entries: [(&str, Rational); N]) -> IndexMap<String, Rational> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn welfare_lower_bound(
    name: String,
    instance: &MarketInstance,
    revenue: Rational,
    e_max: usize,
    w: usize,
) -> BoundReport {
    let d = max_degree(instance);
    let ln_d = ln_up_int(d as u64);
    let welfare = max_welfare(instance);
    let divisor = Rational::from(e_max) * (Rational::from(w + 1) + &ln_d);
    let rhs = if welfare.is_zero() { Rational::zero() } else { &welfare / divisor };
    BoundReport::new(
        name,
        revenue,
        rhs,
        Direction::AtLeast,
        params([
            ("d", Rational::from(d)),
            ("w", Rational::from(w)),
            ("e_max", Rational::from(e_max)),
            ("ln_d_upper", ln_d),
            ("max_welfare", welfare),
        ]),
    )
}

pub fn check_bound(instance: &MarketInstance, profile: &PriceProfile, which: &BoundKind) -> Result<BoundReport> {
    profile.check_covers(instance)?;
    let verdict = check_equilibrium(instance, profile, true);
    let revenue = evaluate(instance, profile)?.total_revenue;
    let name = which.to_string();
    let mismatch = || Error::BoundMismatch { bound: name.clone() };
    match which {
        BoundKind::Thm3 | BoundKind::Cor1 | BoundKind::Thm8 => {
            if !verdict.is_non_malicious_ne {
                return Err(Error::NotNonMaliciousNe);
            }
            match which {
                BoundKind::Thm3 => {
                    if !instance.is_graph() {
                        return Err(mismatch());
                    }
                    let w = arboricity(instance, EXACT_ARBORICITY_LIMIT).upper();
                    Ok(welfare_lower_bound(name, instance, revenue, 2, w))
                }
                BoundKind::Cor1 => {
                    if !is_forest(instance) {
                        return Err(mismatch());
                    }
                    Ok(welfare_lower_bound(name, instance, revenue, 2, 1))
                }
                _ => {
                    let w = forest_partition_bounds(instance).upper;
                    let e_max = instance.max_demand_size();
                    Ok(welfare_lower_bound(name, instance, revenue, e_max, w))
                }
            }
        }
        BoundKind::Thm5Cap { w, d } => {
            if !verdict.is_ne {
                return Err(Error::NotNe);
            }
            if *instance != gen_thm5(*w, *d).map_err(|_| mismatch())?.instance {
                return Err(mismatch());
            }
            let w1 = Rational::from(w + 1);
            let cap = Rational::from(4i64) * &w1 * &w1
                + ln_lo_int(*d as u64)
                + Rational::one()
                + &w1 * (Rational::one() + ln_lo_int(*w as u64));
            let p = params([("w", Rational::from(*w)), ("d", Rational::from(*d))]);
            Ok(BoundReport::new(name, revenue, cap, Direction::AtMost, p))
        }
        BoundKind::Thm6Cap { m, d } => {
            if !verdict.is_ne {
                return Err(Error::NotNe);
            }
            if *instance != gen_thm6(*m, *d).map_err(|_| mismatch())?.instance {
                return Err(mismatch());
            }
            let cap = Rational::from(3i64)
                + ln_lo_int(*d as u64)
                + Rational::from_integer(num_bigint::BigInt::from(2u8).pow((*m + 4) as u32));
            let p = params([("m", Rational::from(*m)), ("d", Rational::from(*d))]);
            Ok(BoundReport::new(name, revenue, cap, Direction::AtMost, p))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratios {
    pub revenue_over_welfare: Rational,
    pub realized_over_welfare: Rational,
    pub revenue_over_monopolist: Rational,
}

pub fn ratio_report(instance: &MarketInstance, profile: &PriceProfile, monopolist_revenue: &Rational) -> Result<Ratios> {
    let welfare = max_welfare(instance);
    if welfare.is_zero() {
        return Err(Error::UndefinedRatio("max welfare"));
    }
    if monopolist_revenue.is_zero() {
        return Err(Error::UndefinedRatio("monopolist revenue"));
    }
    let out = evaluate(instance, profile)?;
    Ok(Ratios {
        revenue_over_welfare: &out.total_revenue / &welfare,
        realized_over_welfare: &out.realized_welfare / &welfare,
        revenue_over_monopolist: &out.total_revenue / monopolist_revenue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn path(values: &[i64]) -> MarketInstance {
        let names: Vec<String> = (1..=values.len() + 1).map(|i| format!("v{i}")).collect();
        let mut b = MarketInstance::builder().nodes(names.clone());
        for (i, v) in values.iter().enumerate() {
            b = b.demand(&[&names[i], &names[i + 1]], Rational::from(*v));
        }
        b.build().unwrap()
    }

    fn clique(n: usize) -> MarketInstance {
        let names: Vec<String> = (1..=n).map(|i| format!("k{i}")).collect();
        let mut b = MarketInstance::builder().nodes(names.clone());
        for a in 0..n {
            for c in a + 1..n {
                b = b.demand(&[&names[a], &names[c]], Rational::one());
            }
        }
        b.build().unwrap()
    }

    fn harmonic_star(d: u64) -> MarketInstance {
        let mut b = MarketInstance::builder().node("c");
        for i in 1..=d {
            b = b.node(format!("s{i}")).demand(&["c".to_string(), format!("s{i}")], rat(1, i as i64));
        }
        b.build().unwrap()
    }

    fn one_zero_rest_one(n: usize) -> PriceProfile {
        PriceProfile::from_finite((0..n).map(|i| if i == 0 { Rational::zero() } else { Rational::one() }))
    }

    #[test]
    fn verdicts() {
        let fig1 = path(&[1, 6, 1]);
        let p = PriceProfile::from_finite([rat(0, 1), rat(1, 1), rat(5, 1), rat(1, 1)]);
        assert!(check_equilibrium(&fig1, &p, false).is_ne);

        let inf = PriceProfile::all_infinite(&fig1);
        let v = check_equilibrium(&fig1, &inf, false);
        assert!(v.is_ne && v.violations.is_empty());
        let refined = check_equilibrium(&fig1, &inf, true);
        assert!(!refined.is_non_malicious_ne);
        assert_eq!(refined.violations.len(), 4);

        let k4 = clique(4);
        let half = PriceProfile::uniform(4, ExtPrice::Finite(rat(1, 2)));
        assert!(check_equilibrium(&k4, &half, true).is_non_malicious_ne);
        assert_eq!(evaluate(&k4, &half).unwrap().total_revenue, rat(6, 1));
    }

    #[test]
    fn violations_reproduce() {
        let inst = path(&[1, 6, 1]);
        let p = PriceProfile::from_finite([rat(0, 1), rat(1, 1), rat(1, 1), rat(1, 1)]);
        let v = check_equilibrium(&inst, &p, false);
        assert!(!v.is_ne);
        for viol in &v.violations {
            let s = inst.node_index(&viol.seller).unwrap();
            let mut q = p.clone();
            q.set(s, ExtPrice::Finite(viol.witness_price.clone()));
            let out = evaluate(&inst, &q).unwrap();
            assert_eq!(out.revenue_by_seller[s], viol.witness_utility);
            assert!(viol.witness_utility > viol.current_utility);
        }
    }

    /// Brute-force recomputation of the bucket rule, independent of the
    /// implementation's owner selection.
    fn oracle_buckets(inst: &MarketInstance, p: &PriceProfile) -> (Vec<usize>, Vec<Vec<usize>>) {
        let mut high = Vec::new();
        let mut low = vec![Vec::new(); inst.num_nodes()];
        for (i, d) in inst.demands().iter().enumerate() {
            let half = &d.value / Rational::from(2i64);
            let price = |v: usize| p.get(v).as_finite().cloned();
            let a_low = price(d.members[0]).is_some_and(|x| x <= half);
            let b_low = price(d.members[1]).is_some_and(|x| x <= half);
            let mut cand = vec![];
            if b_low {
                cand.push(d.members[0]);
            }
            if a_low {
                cand.push(d.members[1]);
            }
            match cand.into_iter().min() {
                Some(v) => low[v].push(i),
                None => high.push(i),
            }
        }
        (high, low)
    }

    #[test]
    fn clique_decomposition() {
        let inst = clique(6);
        let p = one_zero_rest_one(6);
        let dec = thm3_decomposition(&inst, &p).unwrap();
        let (high, low) = oracle_buckets(&inst, &p);
        assert_eq!(dec.all_high, high);
        assert_eq!(dec.low_assignment, low);
        // the five demands at k1 go to its partners; ten remain all-high
        assert_eq!(dec.all_high.len(), 10);
        assert!(dec.low_assignment[0].is_empty());
        assert!(dec.low_assignment[1..].iter().all(|b| b.len() == 1));
        assert!(dec.holds());
        let total: usize = dec.all_high.len() + dec.low_assignment.iter().map(Vec::len).sum::<usize>();
        assert_eq!(total, inst.num_demands());
    }

    #[test]
    fn star_decomposition() {
        let inst = harmonic_star(8);
        let mut prices = vec![Rational::one()];
        prices.extend((0..8).map(|_| Rational::zero()));
        let p = PriceProfile::from_finite(prices);
        let dec = thm3_decomposition(&inst, &p).unwrap();
        assert!(dec.all_high.is_empty());
        assert_eq!(dec.low_assignment[0], (0..8).collect::<Vec<_>>());
        assert!(dec.holds());
    }

    #[test]
    fn single_edge_decomposition_and_bound() {
        let inst = path(&[5]);
        let p = PriceProfile::from_finite([rat(0, 1), rat(5, 1)]);
        let dec = thm3_decomposition(&inst, &p).unwrap();
        assert!(dec.all_high.is_empty());
        assert_eq!(dec.low_assignment, vec![vec![], vec![0]]);
        let r = check_bound(&inst, &p, &BoundKind::Thm3).unwrap();
        assert_eq!((r.lhs.clone(), r.rhs.clone()), (rat(5, 1), rat(5, 4)));
        assert!(r.holds);
    }

    #[test]
    fn decomposition_requires_refined_equilibrium() {
        let inst = path(&[1, 6, 1]);
        let p = PriceProfile::all_infinite(&inst);
        assert!(matches!(thm3_decomposition(&inst, &p), Err(Error::NotNonMaliciousNe)));
        assert!(matches!(check_bound(&inst, &p, &BoundKind::Thm3), Err(Error::NotNonMaliciousNe)));
    }

    #[test]
    fn clique_bound() {
        let inst = clique(6);
        let p = one_zero_rest_one(6);
        let r = check_bound(&inst, &p, &BoundKind::Thm3).unwrap();
        assert_eq!(r.lhs, rat(5, 1));
        assert_eq!(r.parameters["w"], rat(3, 1));
        // 15 / (2 (4 + ln 5)) with ln 5 <= 1.61
        assert!(r.rhs >= rat(15, 1) / rat(1322, 100) - rat(1, 1000));
        assert!(r.rhs < rat(5, 1));
        assert!(r.holds);
        let t8 = check_bound(&inst, &p, &BoundKind::Thm8).unwrap();
        assert!(t8.holds && t8.rhs <= r.rhs);
    }

    #[test]
    fn cor1_requires_forest() {
        let p = one_zero_rest_one(6);
        assert!(matches!(check_bound(&clique(6), &p, &BoundKind::Cor1), Err(Error::BoundMismatch { .. })));
        let inst = path(&[5]);
        let r = check_bound(&inst, &PriceProfile::from_finite([rat(0, 1), rat(5, 1)]), &BoundKind::Cor1).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn cap_needs_matching_instance() {
        let inst = path(&[5]);
        let p = PriceProfile::from_finite([rat(0, 1), rat(5, 1)]);
        let e = check_bound(&inst, &p, &BoundKind::Thm5Cap { w: 2, d: 4 });
        assert!(matches!(e, Err(Error::BoundMismatch { .. })));
    }

    #[test]
    fn bound_kind_parsing() {
        assert_eq!("thm3".parse::<BoundKind>().unwrap(), BoundKind::Thm3);
        assert_eq!("thm5-cap:2,4".parse::<BoundKind>().unwrap(), BoundKind::Thm5Cap { w: 2, d: 4 });
        assert_eq!("thm6_cap:2,30".parse::<BoundKind>().unwrap(), BoundKind::Thm6Cap { m: 2, d: 30 });
        assert_eq!("doubling-path-cap:2,30".parse::<BoundKind>().unwrap(), BoundKind::Thm6Cap { m: 2, d: 30 });
        assert_eq!("forest".parse::<BoundKind>().unwrap(), BoundKind::Cor1);
        assert!("thm5-cap".parse::<BoundKind>().is_err());
        assert!("nope".parse::<BoundKind>().is_err());
    }

    #[test]
    fn ratios() {
        let inst = path(&[1, 6, 1]);
        let p = PriceProfile::from_finite([rat(0, 1), rat(1, 1), rat(5, 1), rat(1, 1)]);
        let r = ratio_report(&inst, &p, &rat(7, 1)).unwrap();
        assert_eq!(r.revenue_over_welfare, rat(7, 8));
        assert_eq!(r.realized_over_welfare, rat(7, 8));
        assert_eq!(r.revenue_over_monopolist, Rational::one());

        let z = ratio_report(&inst, &PriceProfile::all_infinite(&inst), &rat(7, 1)).unwrap();
        assert!(z.revenue_over_welfare.is_zero() && z.revenue_over_monopolist.is_zero());

        let star = harmonic_star(8);
        let mut prices = vec![Rational::one()];
        prices.extend((0..8).map(|_| Rational::zero()));
        let r = ratio_report(&star, &PriceProfile::from_finite(prices), &Rational::harmonic(8)).unwrap();
        assert_eq!(r.revenue_over_monopolist, rat(280, 761));

        let empty = MarketInstance::builder().node("a").build().unwrap();
        assert!(matches!(
            ratio_report(&empty, &PriceProfile::all_zero(&empty), &Rational::one()),
            Err(Error::UndefinedRatio(_))
        ));
    }
}
