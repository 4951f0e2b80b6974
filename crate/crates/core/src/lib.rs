//! Pricing games between sellers of complementary goods on a network.
//!
//! Sellers post one price each; a single-minded buyer wanting a bundle of
//! sellers' goods buys iff the bundle's total price is at most its value.
//! The crate evaluates such markets exactly, computes best responses, runs
//! best-reply algorithms and dynamics, verifies (non-malicious) Nash
//! equilibria and checks revenue/welfare bounds with certified rational
//! arithmetic.

pub mod best_response;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod hyper;
pub mod instances;
pub mod ln;
pub mod market;
pub mod metrics;
pub mod monopolist;
pub mod rational;

pub use best_response::{best_response, candidate_prices, is_best_responding, BestResponse, TiePolicy};
pub use dynamics::{
    cycle_algorithm, generic_dynamics, path_algorithm, tree_dynamics, tree_fixed_price, DynamicsTrace, Schedule,
    Step, Termination,
};
pub use equilibrium::{check_bound, check_equilibrium, ratio_report, thm3_decomposition, BoundKind, BoundReport, EquilibriumVerdict};
pub use error::{Error, Result};
pub use instances::ConstructionBundle;
pub use monopolist::{best_single_price, evaluate_described_profile, monopolist_grid, MonopolistResult};
pub use market::{
    evaluate, is_tight, max_welfare, slack, Demand, InstanceKind, MarketInstance, Outcome, PriceFile,
    PriceProfile, Slack,
};
pub use rational::{rat, ExtPrice, Rational};
