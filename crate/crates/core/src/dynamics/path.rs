//! Directional passes along a path: the first seller prices at 0 and every
//! next seller best responds to its predecessor, falling back to the value
//! of the edge it shares with the predecessor when it cannot earn anything.

use serde::Serialize;

use super::{DynamicsTrace, Runner, Termination};
use crate::best_response::TiePolicy;
use crate::error::Result;
use crate::market::{evaluate, MarketInstance, PriceProfile};
use crate::metrics::path_order;
use crate::rational::{ExtPrice, Rational};

#[derive(Clone, Debug, Serialize)]
pub struct PathRun {
    /// Pass starting from the endpoint listed first.
    pub forward: DynamicsTrace,
    /// The mirrored pass.
    pub backward: DynamicsTrace,
    pub forward_revenue: Rational,
    pub backward_revenue: Rational,
    /// `true` when the backward pass earned strictly more.
    pub chose_backward: bool,
    pub profile: PriceProfile,
    pub revenue: Rational,
}

pub(crate) fn directional_pass(
    instance: &MarketInstance,
    order: &[usize],
    edges: &[usize],
    algorithm: &str,
) -> DynamicsTrace {
    let n = instance.num_nodes();
    let mut runner = Runner::new(instance, vec![ExtPrice::Infinity; n], n);
    runner
        .set_price(order[0], ExtPrice::Finite(Rational::zero()))
        .expect("n >= 1 steps available");
    for k in 1..order.len() {
        let fallback = instance.demands()[edges[k - 1]].value.clone();
        runner
            .respond(order[k], &TiePolicy::PathFallback(fallback))
            .expect("one step per seller");
    }
    runner.finish(algorithm, TiePolicy::PreferLowest, None, Termination::Converged, Vec::new())
}

/// Runs both directional passes and keeps the more profitable one
/// (the forward pass on ties).
pub fn path_algorithm(instance: &MarketInstance) -> Result<PathRun> {
    let (order, edges) = path_order(instance)?;
    let forward = directional_pass(instance, &order, &edges, "path-forward");
    let rev_order: Vec<usize> = order.iter().rev().copied().collect();
    let rev_edges: Vec<usize> = edges.iter().rev().copied().collect();
    let backward = directional_pass(instance, &rev_order, &rev_edges, "path-backward");

    let fp = forward.final_prices(instance)?;
    let bp = backward.final_prices(instance)?;
    let forward_revenue = evaluate(instance, &fp)?.total_revenue;
    let backward_revenue = evaluate(instance, &bp)?.total_revenue;
    let chose_backward = backward_revenue > forward_revenue;
    let (profile, revenue) = if chose_backward {
        (bp, backward_revenue.clone())
    } else {
        (fp, forward_revenue.clone())
    };
    Ok(PathRun {
        forward,
        backward,
        forward_revenue,
        backward_revenue,
        chose_backward,
        profile,
        revenue,
    })
}
