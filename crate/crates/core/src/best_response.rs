//! Exact single-seller best response.
//!
//! With the other prices fixed, seller `i` earns `p * #{d : slack_i(d) >= p}`.
//! The curve is piecewise linear and increasing between breakpoints, so its
//! maximum over `p >= 0` is attained at `0` or at one of the seller's
//! positive finite slacks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::market::{seller_revenue, slack_of, MarketInstance, PriceProfile, Slack};
use crate::rational::{ExtPrice, Rational};

/// How a seller picks among revenue-maximizing prices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    PreferLowest,
    PreferHighest,
    /// Price 0 whenever the best achievable utility is 0, otherwise defer.
    NonMalicious(Box<TiePolicy>),
    /// Fallback price when the best achievable utility is 0, lowest
    /// maximizer otherwise.
    PathFallback(Rational),
}

impl TiePolicy {
    pub fn non_malicious() -> Self {
        TiePolicy::NonMalicious(Box::new(TiePolicy::PreferLowest))
    }

    pub fn is_non_malicious(&self) -> bool {
        matches!(self, TiePolicy::NonMalicious(_))
    }

    fn select(&self, maximizers: &[Rational], best_utility: &Rational) -> Rational {
        match self {
            TiePolicy::PreferLowest => maximizers[0].clone(),
            TiePolicy::PreferHighest => maximizers[maximizers.len() - 1].clone(),
            TiePolicy::NonMalicious(base) => {
                if best_utility.is_zero() {
                    Rational::zero()
                } else {
                    base.select(maximizers, best_utility)
                }
            }
            TiePolicy::PathFallback(fallback) => {
                if best_utility.is_zero() {
                    fallback.clone()
                } else {
                    maximizers[0].clone()
                }
            }
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TiePolicy::PreferLowest => f.write_str("prefer-lowest"),
            TiePolicy::PreferHighest => f.write_str("prefer-highest"),
            TiePolicy::NonMalicious(b) => write!(f, "non-malicious({b})"),
            TiePolicy::PathFallback(p) => write!(f, "path-fallback({p})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestResponse {
    pub price: Rational,
    pub utility: Rational,
    pub candidates_considered: Vec<Rational>,
}

fn positive_slacks(instance: &MarketInstance, prices: &[ExtPrice], seller: usize) -> Vec<Rational> {
    instance
        .incident(seller)
        .iter()
        .filter_map(|&d| match slack_of(&instance.demands()[d], seller, prices) {
            Slack::Finite(s) if s.is_positive() => Some(s),
            _ => None,
        })
        .collect()
}

pub(crate) fn candidates_from(prices: &[ExtPrice], instance: &MarketInstance, seller: usize) -> Vec<Rational> {
    let mut c = positive_slacks(instance, prices, seller);
    c.push(Rational::zero());
    c.sort();
    c.dedup();
    c
}

/// `{0}` together with every positive finite slack of `seller`, ascending.
pub fn candidate_prices(instance: &MarketInstance, profile: &PriceProfile, seller: usize) -> Vec<Rational> {
    candidates_from(profile.as_slice(), instance, seller)
}

pub(crate) fn best_response_on(
    instance: &MarketInstance,
    prices: &[ExtPrice],
    seller: usize,
    policy: &TiePolicy,
) -> BestResponse {
    let mut slacks = positive_slacks(instance, prices, seller);
    slacks.sort_by(|a, b| b.cmp(a));
    // Walking slacks in descending order, the k-th one (1-based) sells to
    // at least k demands; equal slacks collapse onto the last of the run.
    let mut curve: Vec<(Rational, Rational)> = vec![(Rational::zero(), Rational::zero())];
    for (k, s) in slacks.iter().enumerate() {
        let next_is_equal = slacks.get(k + 1).is_some_and(|n| n == s);
        if !next_is_equal {
            curve.push((s.clone(), s * Rational::from(k + 1)));
        }
    }
    curve.sort_by(|a, b| a.0.cmp(&b.0));
    let best_utility = curve
        .iter()
        .map(|(_, u)| u)
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);
    let maximizers: Vec<Rational> = curve
        .iter()
        .filter(|(_, u)| *u == best_utility)
        .map(|(p, _)| p.clone())
        .collect();
    let price = policy.select(&maximizers, &best_utility);
    let utility = if maximizers.contains(&price) {
        best_utility
    } else {
        // a fallback price off the maximizer set; only reachable at utility 0
        let mut trial = prices.to_vec();
        trial[seller] = ExtPrice::Finite(price.clone());
        seller_revenue(instance, &trial, seller)
    };
    BestResponse {
        price,
        utility,
        candidates_considered: curve.into_iter().map(|(p, _)| p).collect(),
    }
}

pub fn best_response(
    instance: &MarketInstance,
    profile: &PriceProfile,
    seller: usize,
    policy: &TiePolicy,
) -> BestResponse {
    best_response_on(instance, profile.as_slice(), seller, policy)
}

pub fn utility(instance: &MarketInstance, profile: &PriceProfile, seller: usize) -> Rational {
    seller_revenue(instance, profile.as_slice(), seller)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrVerdict {
    pub best_responding: bool,
    pub current_utility: Rational,
    pub best_utility: Rational,
    /// A strictly improving price (or 0 for a malicious zero-utility seller).
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub price: Rational,
    pub utility: Rational,
}

pub(crate) fn is_best_responding_on(
    instance: &MarketInstance,
    prices: &[ExtPrice],
    seller: usize,
    require_non_malicious: bool,
) -> BrVerdict {
    let current = seller_revenue(instance, prices, seller);
    let best = best_response_on(instance, prices, seller, &TiePolicy::PreferLowest);
    if current < best.utility {
        return BrVerdict {
            best_responding: false,
            current_utility: current,
            best_utility: best.utility.clone(),
            witness: Some(Witness {
                price: best.price,
                utility: best.utility,
            }),
        };
    }
    if require_non_malicious && current.is_zero() && !prices[seller].is_zero() {
        return BrVerdict {
            best_responding: false,
            current_utility: current,
            best_utility: best.utility,
            witness: Some(Witness {
                price: Rational::zero(),
                utility: Rational::zero(),
            }),
        };
    }
    BrVerdict {
        best_responding: true,
        current_utility: current,
        best_utility: best.utility,
        witness: None,
    }
}

pub fn is_best_responding(
    instance: &MarketInstance,
    profile: &PriceProfile,
    seller: usize,
    require_non_malicious: bool,
) -> BrVerdict {
    is_best_responding_on(instance, profile.as_slice(), seller, require_non_malicious)
}
