//! Hypergraph demands: high-slack classification and the `e_max`-scaled
//! revenue bound.

use serde::Serialize;

use crate::equilibrium::{check_bound, BoundKind, BoundReport, NodeCheck};
use crate::error::Result;
use crate::ln::ln_up_int;
use crate::market::{evaluate, slack_of, MarketInstance, PriceProfile, Slack};
use crate::metrics::{forest_partition_bounds, max_degree};
use crate::rational::Rational;

/// Demands nobody has high slack on, and the rest assigned to the
/// lowest-index member with high slack (at least `value / |e|`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HighSlackClassification {
    pub all_high: Vec<usize>,
    pub assigned: Vec<Vec<usize>>,
    /// `Σ assigned values <= r_u · e_max · (ln d + 1)` per node.
    pub per_node: Vec<NodeCheck>,
    pub all_high_value: Rational,
    /// `e_max · w_upper · total revenue`.
    pub all_high_bound: Rational,
    pub all_high_holds: bool,
    pub e_max: usize,
    pub w_upper: usize,
}

impl HighSlackClassification {
    pub fn holds(&self) -> bool {
        self.all_high_holds && self.per_node.iter().all(|c| c.holds)
    }
}

pub fn classification(instance: &MarketInstance, profile: &PriceProfile) -> Result<HighSlackClassification> {
    profile.check_covers(instance)?;
    let n = instance.num_nodes();
    let prices = profile.as_slice();
    let mut all_high = Vec::new();
    let mut assigned = vec![Vec::new(); n];
    for (i, d) in instance.demands().iter().enumerate() {
        let threshold = &d.value / Rational::from(d.size());
        let owner = d
            .members
            .iter()
            .copied()
            .filter(|&u| matches!(slack_of(d, u, prices), Slack::Finite(s) if s >= threshold))
            .min();
        match owner {
            Some(u) => assigned[u].push(i),
            None => all_high.push(i),
        }
    }

    let outcome = evaluate(instance, profile)?;
    let e_max = instance.max_demand_size();
    let factor = Rational::from(e_max) * (ln_up_int(max_degree(instance) as u64) + Rational::one());
    let per_node = (0..n)
        .map(|u| {
            let assigned_value: Rational = assigned[u].iter().map(|&d| instance.demands()[d].value.clone()).sum();
            let bound = &factor * &outcome.revenue_by_seller[u];
            NodeCheck {
                node: instance.node_name(u).to_string(),
                holds: assigned_value <= bound,
                assigned_value,
                bound,
            }
        })
        .collect();
    let w_upper = forest_partition_bounds(instance).upper;
    let all_high_value: Rational = all_high.iter().map(|&d| instance.demands()[d].value.clone()).sum();
    let all_high_bound = Rational::from(e_max * w_upper) * &outcome.total_revenue;
    Ok(HighSlackClassification {
        all_high_holds: all_high_value <= all_high_bound,
        all_high,
        assigned,
        per_node,
        all_high_value,
        all_high_bound,
        e_max,
        w_upper,
    })
}

/// Revenue at least `W / (e_max (w_upper + 1 + ln d))` for a verified
/// non-malicious equilibrium.
pub fn thm8_bound_check(instance: &MarketInstance, profile: &PriceProfile) -> Result<BoundReport> {
    check_bound(instance, profile, &BoundKind::Thm8)
}
