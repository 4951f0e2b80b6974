//! Best-reply algorithm for cycles: a path-style pass around the cycle that
//! ends with seller 1, a best-reply continuation, then the same in mirrored
//! order. Uniform cycles and triangles have closed-form equilibria.

use serde::Serialize;

use super::{DynamicsTrace, Runner, Termination};
use crate::best_response::TiePolicy;
use crate::error::Result;
use crate::market::{evaluate, MarketInstance, PriceProfile};
use crate::metrics::cycle_order;
use crate::rational::{ExtPrice, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleSpecialCase {
    /// Every edge has the same value; everyone prices at half of it.
    AllEqual,
    /// Three sellers; see [`cycle_algorithm`].
    Triangle,
}

#[derive(Clone, Debug, Serialize)]
pub struct CyclePass {
    pub trace: DynamicsTrace,
    /// Steps of the initial pass around the cycle (at most `n`).
    pub path_phase_steps: usize,
    /// Steps of the best-reply continuation after the pass.
    pub continuation_steps: usize,
    pub revenue: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub special_case: Option<CycleSpecialCase>,
    /// Clockwise then counter-clockwise pass; empty for special cases.
    pub passes: Vec<CyclePass>,
    pub chose_counter_clockwise: bool,
    pub trace: DynamicsTrace,
    pub profile: PriceProfile,
    pub revenue: Rational,
}

fn pass(instance: &MarketInstance, order: &[usize], edges: &[usize], algorithm: &str) -> Result<CyclePass> {
    let n = order.len();
    let value = |e: usize| instance.demands()[edges[e]].value.clone();
    // generous: the continuation provably needs at most n steps
    let cap = 2 * n + 4 * n;
    let mut runner = Runner::new(instance, vec![ExtPrice::Infinity; instance.num_nodes()], cap);
    let capped = |_| crate::error::Error::InvalidSize("cycle pass exceeded its step budget".into());
    runner
        .set_price(order[0], ExtPrice::Finite(Rational::zero()))
        .map_err(capped)?;
    for k in (1..n).chain(std::iter::once(0)) {
        let prev_edge = if k == 0 { n - 1 } else { k - 1 };
        runner
            .respond(order[k], &TiePolicy::PathFallback(value(prev_edge)))
            .map_err(capped)?;
    }
    let path_phase_steps = runner.steps_taken();

    let mut terminated = Termination::Converged;
    let mut idle = 0;
    let mut pos = 1 % n;
    while idle < n {
        let seller = order[pos];
        pos = (pos + 1) % n;
        if runner.is_responding(seller, false) {
            idle += 1;
            continue;
        }
        match runner.respond(seller, &TiePolicy::PreferLowest) {
            Ok(_) => idle = 0,
            Err(_) => {
                terminated = Termination::CapReached;
                break;
            }
        }
    }
    let continuation_steps = runner.steps_taken() - path_phase_steps;
    let revenue = evaluate(instance, &runner.profile())?.total_revenue;
    Ok(CyclePass {
        trace: runner.finish(algorithm, TiePolicy::PreferLowest, None, terminated, Vec::new()),
        path_phase_steps,
        continuation_steps,
        revenue,
    })
}

fn closed_form(instance: &MarketInstance, prices: Vec<ExtPrice>, case: CycleSpecialCase) -> Result<CycleRun> {
    let note = match case {
        CycleSpecialCase::AllEqual => "all-equal",
        CycleSpecialCase::Triangle => "triangle",
    };
    let runner = Runner::new(instance, prices, 0);
    let profile = runner.profile();
    let revenue = evaluate(instance, &profile)?.total_revenue;
    let trace = runner.finish("cycle", TiePolicy::PreferLowest, None, Termination::Converged, vec![note.into()]);
    Ok(CycleRun {
        special_case: Some(case),
        passes: Vec::new(),
        chose_counter_clockwise: false,
        trace,
        profile,
        revenue,
    })
}

/// Equilibrium on a simple cycle with revenue at least a quarter of the
/// maximum welfare.
///
/// Seller 1 is the first node; the clockwise direction leaves it through its
/// first-listed demand. Uniform cycles price everyone at half the value. A
/// triangle with edge values `x >= y >= z` prices the node off the `z` edge
/// at 0 and the other endpoints of the `x` and `y` edges at `x` and `y`.
pub fn cycle_algorithm(instance: &MarketInstance) -> Result<CycleRun> {
    let (order, edges) = cycle_order(instance)?;
    let n = order.len();
    let demands = instance.demands();
    let first = &demands[edges[0]].value;
    if edges.iter().all(|&e| demands[e].value == *first) {
        let half = ExtPrice::Finite(first / Rational::from(2i64));
        return closed_form(instance, vec![half; n], CycleSpecialCase::AllEqual);
    }
    if n == 3 {
        let mut by_value: Vec<usize> = edges.clone();
        by_value.sort_by(|a, b| demands[*b].value.cmp(&demands[*a].value));
        let (x, y, z) = (by_value[0], by_value[1], by_value[2]);
        let hub = (0..3).find(|&v| !demands[z].contains(v)).expect("triangle");
        let mut prices = vec![ExtPrice::Finite(Rational::zero()); 3];
        for e in [x, y] {
            let other = demands[e].other(hub).expect("hub lies on x and y");
            prices[other] = ExtPrice::Finite(demands[e].value.clone());
        }
        return closed_form(instance, prices, CycleSpecialCase::Triangle);
    }

    let clockwise = pass(instance, &order, &edges, "cycle-clockwise")?;
    let mirrored: Vec<usize> = (0..n).map(|i| order[(n - i) % n]).collect();
    let mirrored_edges: Vec<usize> = (0..n).map(|i| edges[n - 1 - i]).collect();
    let counter = pass(instance, &mirrored, &mirrored_edges, "cycle-counter-clockwise")?;
    let chose_counter_clockwise = counter.revenue > clockwise.revenue;
    let chosen = if chose_counter_clockwise { &counter } else { &clockwise };
    let trace = chosen.trace.clone();
    let profile = trace.final_prices(instance)?;
    let revenue = chosen.revenue.clone();
    Ok(CycleRun {
        special_case: None,
        passes: vec![clockwise, counter],
        chose_counter_clockwise,
        trace,
        profile,
        revenue,
    })
}
