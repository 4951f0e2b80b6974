//! Revenue benchmarks: the best single price and an exact monopolist
//! search over a price grid.
//!
//! The grid search maximizes over every profile with prices in
//! `{0, step, 2·step, …, bound}`. Demand `e` is sold iff the members' grid
//! units sum to at most `floor(v_e / step)`, so the objective is a sum of
//! per-demand factors and bucket elimination finds the exact optimum
//! without enumerating the full product space.

use indexmap::IndexMap;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{evaluate, MarketInstance, PriceProfile};
use crate::rational::{ExtPrice, Rational};

/// Default cap on the table entries built during elimination.
pub const DEFAULT_GRID_BUDGET: u128 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonopolistMethod {
    GridExact,
    ProfileEval,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonopolistResult {
    pub revenue: Rational,
    pub prices: IndexMap<String, ExtPrice>,
    pub method: MonopolistMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_bound: Option<Rational>,
    #[serde(skip)]
    pub profile: PriceProfile,
}

/// Maximizes `p · #{s >= p}` over the positive slacks; the lowest
/// maximizing price wins ties. Returns `(0, 0)` when no slack is positive.
pub fn best_single_price(slacks: &[Rational]) -> (Rational, Rational) {
    let mut pos: Vec<&Rational> = slacks.iter().filter(|s| s.is_positive()).collect();
    pos.sort_by(|a, b| b.cmp(a));
    let mut best = (Rational::zero(), Rational::zero());
    for (k, s) in pos.iter().enumerate() {
        if pos.get(k + 1).is_some_and(|n| n == s) {
            continue;
        }
        let rev = *s * Rational::from(k + 1);
        if rev > best.1 || (rev == best.1 && **s < best.0) {
            best = ((*s).clone(), rev);
        }
    }
    best
}

/// Half the gcd of the demand values: the grid on which the monopolist
/// search is exact for integer-scaled instances.
pub fn default_grid_step(instance: &MarketInstance) -> Rational {
    let g = Rational::gcd_of(instance.demands().iter().map(|d| &d.value));
    if g.is_zero() {
        Rational::one()
    } else {
        g / Rational::from(2i64)
    }
}

struct Factor {
    scope: Vec<usize>,
    table: Vec<i64>,
}

/// Mixed-radix iteration over assignments of `scope`.
fn strides(scope: &[usize], radix: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(scope.len());
    let mut acc = 1usize;
    for &v in scope {
        s.push(acc);
        acc *= radix[v];
    }
    s
}

fn table_size(scope: &[usize], radix: &[usize]) -> u128 {
    scope.iter().map(|&v| radix[v] as u128).product()
}

fn to_i64(x: num_bigint::BigInt) -> Result<i64> {
    x.to_i64()
        .ok_or_else(|| Error::InvalidSize("grid too fine for 64-bit units".into()))
}

pub fn monopolist_grid(
    instance: &MarketInstance,
    step: &Rational,
    price_bound: &Rational,
    budget: u128,
) -> Result<MonopolistResult> {
    if !step.is_positive() {
        return Err(Error::InvalidSize("grid step must be positive".into()));
    }
    if price_bound.is_negative() {
        return Err(Error::NegativePrice(price_bound.to_string()));
    }
    let n = instance.num_nodes();
    let global = to_i64((price_bound / step).floor())?;
    let caps: Vec<i64> = instance
        .demands()
        .iter()
        .map(|d| to_i64((&d.value / step).floor()))
        .collect::<Result<_>>()?;
    // prices above every incident capacity unsell the same demands as the
    // largest capacity plus one, which never beats the capacity itself
    let radix: Vec<usize> = (0..n)
        .map(|v| {
            let local = instance.incident(v).iter().map(|&d| caps[d]).max().unwrap_or(0);
            (local.min(global).max(0) + 1) as usize
        })
        .collect();

    let mut factors: Vec<Factor> = Vec::new();
    let mut used = 0u128;
    for (d, demand) in instance.demands().iter().enumerate() {
        let mut scope = demand.members.clone();
        scope.sort_unstable();
        let size = table_size(&scope, &radix);
        used += size;
        if used > budget {
            return Err(Error::BudgetExceeded { needed: used, budget });
        }
        let mut table = vec![0i64; size as usize];
        let mut k = vec![0usize; scope.len()];
        for entry in table.iter_mut() {
            let units: i64 = k.iter().map(|&x| x as i64).sum();
            if units <= caps[d] {
                *entry = units;
            }
            for (j, &v) in scope.iter().enumerate() {
                k[j] += 1;
                if k[j] < radix[v] {
                    break;
                }
                k[j] = 0;
            }
        }
        factors.push(Factor { scope, table });
    }

    // eliminate variables, smallest resulting scope first
    let mut eliminated: Vec<(usize, Vec<usize>, Vec<u32>)> = Vec::new();
    let mut alive = vec![true; n];
    for _ in 0..n {
        let (var, scope) = (0..n)
            .filter(|&v| alive[v])
            .map(|v| {
                let mut s: Vec<usize> = factors
                    .iter()
                    .filter(|f| f.scope.contains(&v))
                    .flat_map(|f| f.scope.iter().copied())
                    .collect();
                s.sort_unstable();
                s.dedup();
                (v, s)
            })
            .min_by_key(|(v, s)| (table_size(s, &radix), *v))
            .expect("a live variable");
        alive[var] = false;
        if scope.is_empty() {
            eliminated.push((var, Vec::new(), vec![0]));
            continue;
        }
        used += table_size(&scope, &radix);
        if used > budget {
            return Err(Error::BudgetExceeded { needed: used, budget });
        }
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.scope.contains(&var));
        factors = rest;
        let out_scope: Vec<usize> = scope.iter().copied().filter(|&v| v != var).collect();
        let out_size = table_size(&out_scope, &radix) as usize;
        let mut best = vec![i64::MIN; out_size];
        let mut arg = vec![0u32; out_size];
        let out_strides = strides(&out_scope, &radix);
        let bucket_strides: Vec<Vec<usize>> = bucket.iter().map(|f| strides(&f.scope, &radix)).collect();
        // position of each bucket factor variable inside `scope`
        let positions: Vec<Vec<usize>> = bucket
            .iter()
            .map(|f| f.scope.iter().map(|v| scope.binary_search(v).expect("subset")).collect())
            .collect();
        let var_pos = scope.binary_search(&var).expect("var in scope");
        let total = table_size(&scope, &radix) as usize;
        let mut k = vec![0usize; scope.len()];
        for _ in 0..total {
            let mut value = 0i64;
            for (f, factor) in bucket.iter().enumerate() {
                let idx: usize = positions[f]
                    .iter()
                    .zip(&bucket_strides[f])
                    .map(|(&p, &s)| k[p] * s)
                    .sum();
                value += factor.table[idx];
            }
            let out_idx: usize = scope
                .iter()
                .enumerate()
                .filter(|(p, _)| *p != var_pos)
                .zip(&out_strides)
                .map(|((p, _), &s)| k[p] * s)
                .sum();
            // ascending iteration of `var` keeps the smallest maximizer
            if value > best[out_idx] {
                best[out_idx] = value;
                arg[out_idx] = k[var_pos] as u32;
            }
            for (j, &v) in scope.iter().enumerate() {
                k[j] += 1;
                if k[j] < radix[v] {
                    break;
                }
                k[j] = 0;
            }
        }
        eliminated.push((var, out_scope.clone(), arg));
        factors.push(Factor {
            scope: out_scope,
            table: best,
        });
    }
    let units: i64 = factors.iter().map(|f| f.table[0]).sum();

    let mut assignment = vec![0usize; n];
    for (var, scope, arg) in eliminated.iter().rev() {
        let s = strides(scope, &radix);
        let idx: usize = scope.iter().zip(&s).map(|(&v, &st)| assignment[v] * st).sum();
        assignment[*var] = arg[idx] as usize;
    }
    let profile = PriceProfile::from_finite(assignment.iter().map(|&k| step * Rational::from(k)));
    let revenue = step * Rational::from(units);
    debug_assert_eq!(evaluate(instance, &profile)?.total_revenue, revenue);
    Ok(MonopolistResult {
        prices: profile.to_named(instance),
        revenue,
        method: MonopolistMethod::GridExact,
        grid_step: Some(step.clone()),
        price_bound: Some(price_bound.clone()),
        profile,
    })
}

/// Grid search with the default step and the largest demand value as bound.
pub fn monopolist_grid_default(instance: &MarketInstance) -> Result<MonopolistResult> {
    monopolist_grid(
        instance,
        &default_grid_step(instance),
        &instance.max_value(),
        DEFAULT_GRID_BUDGET,
    )
}

/// Revenue of an explicit profile: a certified lower bound on the
/// monopolist's optimum.
pub fn evaluate_described_profile(instance: &MarketInstance, profile: &PriceProfile) -> Result<MonopolistResult> {
    let revenue = evaluate(instance, profile)?.total_revenue;
    Ok(MonopolistResult {
        revenue,
        prices: profile.to_named(instance),
        method: MonopolistMethod::ProfileEval,
        grid_step: None,
        price_bound: None,
        profile: profile.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_harmonic_star, gen_path, gen_random_graph_edges, gen_thm5, gen_thm6};
    use crate::market::max_welfare;
    use crate::rational::rat;

    /// Exhaustive enumeration of the full grid.
    fn naive(inst: &MarketInstance, step: &Rational, bound: &Rational) -> Rational {
        let n = inst.num_nodes();
        let k = (bound / step).floor().to_usize().unwrap() + 1;
        let mut best = Rational::zero();
        let mut idx = vec![0usize; n];
        loop {
            let p = PriceProfile::from_finite(idx.iter().map(|&i| step * Rational::from(i)));
            best = best.max(evaluate(inst, &p).unwrap().total_revenue);
            let mut j = 0;
            loop {
                if j == n {
                    return best;
                }
                idx[j] += 1;
                if idx[j] < k {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    #[test]
    fn single_price_examples() {
        let h: Vec<Rational> = (1..=6).map(|i| rat(1, i)).collect();
        assert_eq!(best_single_price(&h).1, Rational::one());
        assert_eq!(best_single_price(&[]), (Rational::zero(), Rational::zero()));
        assert_eq!(best_single_price(&[rat(-1, 1), rat(0, 1)]), (Rational::zero(), Rational::zero()));
        let three_two_two = [rat(3, 1), rat(2, 1), rat(2, 1)];
        let (p, r) = best_single_price(&three_two_two);
        assert_eq!((p, r), (rat(2, 1), rat(6, 1)));
    }

    #[test]
    fn path_oracle() {
        let inst = gen_path(&[rat(1, 1), rat(6, 1), rat(1, 1)]).unwrap().instance;
        let r = monopolist_grid(&inst, &rat(1, 2), &rat(6, 1), DEFAULT_GRID_BUDGET).unwrap();
        assert_eq!(r.revenue, rat(7, 1));
        assert_eq!(evaluate(&inst, &r.profile).unwrap().total_revenue, r.revenue);
        assert_eq!(naive(&inst, &rat(1, 2), &rat(6, 1)), rat(7, 1));
        assert_eq!(monopolist_grid_default(&inst).unwrap().revenue, rat(7, 1));
    }

    #[test]
    fn single_edge_and_star() {
        let inst = gen_path(&[rat(9, 2)]).unwrap().instance;
        assert_eq!(monopolist_grid_default(&inst).unwrap().revenue, rat(9, 2));
        let star = gen_harmonic_star(3).unwrap().instance;
        let r = monopolist_grid_default(&star).unwrap();
        assert_eq!(r.revenue, rat(11, 6));
    }

    #[test]
    fn elimination_matches_enumeration() {
        for seed in 0..25 {
            let inst = gen_random_graph_edges(4, 5, 4, seed);
            let (s, b) = (rat(1, 2), rat(4, 1));
            let fast = monopolist_grid(&inst, &s, &b, DEFAULT_GRID_BUDGET).unwrap();
            assert_eq!(fast.revenue, naive(&inst, &s, &b), "seed {seed}");
            assert!(fast.revenue <= max_welfare(&inst));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let inst = gen_random_graph_edges(6, 8, 10, 1);
        let e = monopolist_grid(&inst, &rat(1, 4), &rat(10, 1), 100);
        assert!(matches!(e, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn described_profiles() {
        let b5 = gen_thm5(2, 4).unwrap();
        let r = evaluate_described_profile(&b5.instance, &b5.reference("monopolist").unwrap()).unwrap();
        assert_eq!(r.revenue, rat(25, 4));
        let b6 = gen_thm6(2, 5).unwrap();
        let r = evaluate_described_profile(&b6.instance, &b6.reference("monopolist").unwrap()).unwrap();
        assert_eq!(r.revenue, rat(11, 3));
        let z = evaluate_described_profile(&b6.instance, &PriceProfile::all_zero(&b6.instance)).unwrap();
        assert!(z.revenue.is_zero());
    }
}
