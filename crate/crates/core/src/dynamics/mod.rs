//! Best-reply procedures and the traces they leave behind.
//!
//! Every run records each price change as a [`Step`]; re-applying the steps
//! to the initial profile reproduces the final profile exactly
//! ([`DynamicsTrace::replay`]). Runs that exhaust their step budget end with
//! [`Termination::CapReached`] instead of looping forever.

mod cycle;
mod path;
mod tree;

use std::fmt;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::{best_response_on, is_best_responding_on, TiePolicy};
use crate::error::{Error, Result};
use crate::market::{seller_revenue, MarketInstance, PriceProfile};
use crate::rational::{ExtPrice, Rational};

pub use cycle::{cycle_algorithm, CyclePass, CycleRun, CycleSpecialCase};
pub use path::{path_algorithm, PathRun};
pub use tree::{tree_dynamics, tree_fixed_price, TreeFixedRun, DEFAULT_TREE_CAP_PER_NODE};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub seller: String,
    pub old: ExtPrice,
    pub new: ExtPrice,
    /// The seller's utility right after the change.
    pub utility: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    CapReached,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    RoundRobin,
    RandomUniform { seed: u64 },
    /// Visit sellers cyclically in this order; unlisted sellers follow in
    /// node order.
    FixedOrder(Vec<String>),
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::RoundRobin => f.write_str("round-robin"),
            Schedule::RandomUniform { seed } => write!(f, "random({seed})"),
            Schedule::FixedOrder(o) => write!(f, "fixed({})", o.join(",")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicsTrace {
    pub algorithm: String,
    pub policy: TiePolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    pub initial_profile: IndexMap<String, ExtPrice>,
    pub steps: Vec<Step>,
    pub final_profile: IndexMap<String, ExtPrice>,
    pub terminated: Termination,
    pub step_cap: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DynamicsTrace {
    pub fn converged(&self) -> bool {
        self.terminated == Termination::Converged
    }

    pub fn final_prices(&self, instance: &MarketInstance) -> Result<PriceProfile> {
        PriceProfile::from_named(instance, &self.final_profile)
    }

    pub fn initial_prices(&self, instance: &MarketInstance) -> Result<PriceProfile> {
        PriceProfile::from_named(instance, &self.initial_profile)
    }

    /// Re-applies every step to the initial profile, checking each step's
    /// recorded old price, and returns the reconstructed final profile. Fails
    /// if any step or the final profile disagrees.
    pub fn replay(&self, instance: &MarketInstance) -> Result<PriceProfile> {
        let mut profile = self.initial_prices(instance)?;
        for (i, step) in self.steps.iter().enumerate() {
            let node = instance
                .node_index(&step.seller)
                .ok_or_else(|| Error::UnknownNode(step.seller.clone()))?;
            if profile.get(node) != &step.old || step.index != i {
                return Err(Error::ReplayMismatch(i));
            }
            profile.set(node, step.new.clone());
        }
        if profile != self.final_prices(instance)? {
            return Err(Error::ReplayMismatch(self.steps.len()));
        }
        Ok(profile)
    }
}

/// Step budget exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CapHit;

/// Mutable run state shared by every procedure in this module.
pub(crate) struct Runner<'a> {
    pub(crate) instance: &'a MarketInstance,
    pub(crate) prices: Vec<ExtPrice>,
    initial: Vec<ExtPrice>,
    steps: Vec<Step>,
    cap: usize,
}

impl<'a> Runner<'a> {
    pub(crate) fn new(instance: &'a MarketInstance, initial: Vec<ExtPrice>, cap: usize) -> Self {
        Runner {
            instance,
            initial: initial.clone(),
            prices: initial,
            steps: Vec::new(),
            cap,
        }
    }

    pub(crate) fn steps_taken(&self) -> usize {
        self.steps.len()
    }

    /// Sets `seller` to its best response under `policy`, recording a step
    /// when the price changes.
    pub(crate) fn respond(&mut self, seller: usize, policy: &TiePolicy) -> std::result::Result<bool, CapHit> {
        let br = best_response_on(self.instance, &self.prices, seller, policy);
        self.set_price(seller, ExtPrice::Finite(br.price))
    }

    /// Records `seller` moving to `new`; a no-op when the price is unchanged.
    pub(crate) fn set_price(&mut self, seller: usize, new: ExtPrice) -> std::result::Result<bool, CapHit> {
        if self.prices[seller] == new {
            return Ok(false);
        }
        if self.steps.len() >= self.cap {
            return Err(CapHit);
        }
        let old = std::mem::replace(&mut self.prices[seller], new.clone());
        self.steps.push(Step {
            index: self.steps.len(),
            seller: self.instance.node_name(seller).to_string(),
            old,
            new,
            utility: seller_revenue(self.instance, &self.prices, seller),
        });
        Ok(true)
    }

    pub(crate) fn is_responding(&self, seller: usize, refined: bool) -> bool {
        is_best_responding_on(self.instance, &self.prices, seller, refined).best_responding
    }

    pub(crate) fn profile(&self) -> PriceProfile {
        PriceProfile::new(self.prices.clone())
    }

    pub(crate) fn finish(
        self,
        algorithm: &str,
        policy: TiePolicy,
        schedule: Option<Schedule>,
        terminated: Termination,
        notes: Vec<String>,
    ) -> DynamicsTrace {
        let named = |p: &[ExtPrice]| -> IndexMap<String, ExtPrice> {
            self.instance
                .nodes()
                .iter()
                .cloned()
                .zip(p.iter().cloned())
                .collect()
        };
        DynamicsTrace {
            algorithm: algorithm.to_string(),
            policy,
            schedule,
            initial_profile: named(&self.initial),
            final_profile: named(&self.prices),
            steps: self.steps,
            terminated,
            step_cap: self.cap,
            notes,
        }
    }
}

/// Iterated best replies under `schedule` until every seller is best
/// responding or `cap` steps have been taken. With a non-malicious policy a
/// zero-utility seller not pricing at 0 counts as not best responding.
pub fn generic_dynamics(
    instance: &MarketInstance,
    initial: &PriceProfile,
    schedule: &Schedule,
    policy: &TiePolicy,
    cap: usize,
) -> Result<DynamicsTrace> {
    initial.check_covers(instance)?;
    let n = instance.num_nodes();
    let refined = policy.is_non_malicious();
    let mut runner = Runner::new(instance, initial.as_slice().to_vec(), cap);
    let mut terminated = Termination::Converged;

    match schedule {
        Schedule::RandomUniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            loop {
                let pending: Vec<usize> = (0..n).filter(|&s| !runner.is_responding(s, refined)).collect();
                if pending.is_empty() {
                    break;
                }
                let seller = pending[rng.gen_range(0..pending.len())];
                if runner.respond(seller, policy).is_err() {
                    terminated = Termination::CapReached;
                    break;
                }
            }
        }
        Schedule::RoundRobin | Schedule::FixedOrder(_) => {
            let order = visit_order(instance, schedule)?;
            let mut idle = 0usize;
            let mut pos = 0usize;
            while idle < order.len() {
                let seller = order[pos];
                pos = (pos + 1) % order.len();
                if runner.is_responding(seller, refined) {
                    idle += 1;
                    continue;
                }
                match runner.respond(seller, policy) {
                    Ok(true) => idle = 0,
                    Ok(false) => idle += 1,
                    Err(CapHit) => {
                        terminated = Termination::CapReached;
                        break;
                    }
                }
            }
        }
    }
    Ok(runner.finish("generic", policy.clone(), Some(schedule.clone()), terminated, Vec::new()))
}

fn visit_order(instance: &MarketInstance, schedule: &Schedule) -> Result<Vec<usize>> {
    let n = instance.num_nodes();
    match schedule {
        Schedule::FixedOrder(names) => {
            let mut order = Vec::with_capacity(n);
            for name in names {
                let i = instance
                    .node_index(name)
                    .ok_or_else(|| Error::UnknownNode(name.clone()))?;
                if !order.contains(&i) {
                    order.push(i);
                }
            }
            for i in 0..n {
                if !order.contains(&i) {
                    order.push(i);
                }
            }
            Ok(order)
        }
        _ => Ok((0..n).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::check_equilibrium;
    use crate::market::evaluate;
    use crate::rational::rat;

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

    #[test]
    fn clique_from_zero_ends_one_zero_rest_one() {
        for n in [4usize, 6] {
            let inst = clique(n);
            let trace = generic_dynamics(
                &inst,
                &PriceProfile::all_zero(&inst),
                &Schedule::RoundRobin,
                &TiePolicy::non_malicious(),
                10_000,
            )
            .unwrap();
            assert!(trace.converged());
            let p = trace.final_prices(&inst).unwrap();
            let zeros = p.as_slice().iter().filter(|x| x.is_zero()).count();
            let ones = p.as_slice().iter().filter(|x| **x == ExtPrice::Finite(Rational::one())).count();
            assert_eq!((zeros, ones), (1, n - 1));
            assert_eq!(evaluate(&inst, &p).unwrap().total_revenue, Rational::from(n - 1));
            assert!(check_equilibrium(&inst, &p, true).is_non_malicious_ne);
        }
    }

    #[test]
    fn equilibrium_start_takes_no_steps() {
        let inst = MarketInstance::builder()
            .nodes(["s1", "s2", "s3", "s4"])
            .demand(&["s1", "s2"], rat(1, 1))
            .demand(&["s2", "s3"], rat(6, 1))
            .demand(&["s3", "s4"], rat(1, 1))
            .demand(&["s4", "s1"], rat(6, 1))
            .build()
            .unwrap();
        let start = PriceProfile::from_finite([rat(6, 1), rat(1, 1), rat(5, 1), rat(6, 1)]);
        for schedule in [Schedule::RoundRobin, Schedule::RandomUniform { seed: 3 }] {
            let t = generic_dynamics(&inst, &start, &schedule, &TiePolicy::PreferLowest, 100).unwrap();
            assert!(t.steps.is_empty());
            assert!(t.converged());
        }
    }

    #[test]
    fn cap_is_reported_not_hidden() {
        let inst = clique(6);
        let t = generic_dynamics(
            &inst,
            &PriceProfile::all_zero(&inst),
            &Schedule::RoundRobin,
            &TiePolicy::non_malicious(),
            2,
        )
        .unwrap();
        assert_eq!(t.terminated, Termination::CapReached);
        assert_eq!(t.steps.len(), 2);
        assert!(t.replay(&inst).is_ok());
    }

    #[test]
    fn random_schedule_is_seed_deterministic_and_replays() {
        let inst = clique(5);
        let start = PriceProfile::all_infinite(&inst);
        let run = |seed| {
            generic_dynamics(&inst, &start, &Schedule::RandomUniform { seed }, &TiePolicy::non_malicious(), 1000)
                .unwrap()
        };
        let a = run(11);
        assert_eq!(a, run(11));
        assert_eq!(a.replay(&inst).unwrap(), a.final_prices(&inst).unwrap());
        let text = serde_json::to_string(&a).unwrap();
        let back: DynamicsTrace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn tampered_trace_fails_replay() {
        let inst = clique(4);
        let mut t = generic_dynamics(
            &inst,
            &PriceProfile::all_zero(&inst),
            &Schedule::RoundRobin,
            &TiePolicy::non_malicious(),
            100,
        )
        .unwrap();
        t.steps[0].new = ExtPrice::Finite(rat(7, 1));
        assert!(matches!(t.replay(&inst), Err(Error::ReplayMismatch(_))));
    }

    #[test]
    fn fixed_order_visits_listed_sellers_first() {
        let inst = clique(4);
        let order = Schedule::FixedOrder(vec!["k4".into(), "k3".into()]);
        let t = generic_dynamics(&inst, &PriceProfile::all_zero(&inst), &order, &TiePolicy::non_malicious(), 100)
            .unwrap();
        assert_eq!(t.steps[0].seller, "k4");
        let p = t.final_prices(&inst).unwrap();
        assert!(check_equilibrium(&inst, &p, true).is_non_malicious_ne);
    }
}
