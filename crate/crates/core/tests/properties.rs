//! Randomized checks of structural invariants: closed-form demand against
//! exhaustive search, greedy allocation against the brute-force optimum,
//! convexity consequences, pricing identities, and run accounting.

use std::collections::BTreeMap;

use proptest::prelude::*;

use posted_market_core::allocation::{audit_greedy_trace, brute_force_opt, xos_greedy_allocate};
use posted_market_core::mechanism::{
    expected_outcome, fixed_supply, run_mechanism, ArrivalPolicy, MechanismKind,
};
use posted_market_core::model::{social_welfare, CostSchedule, Good, Instance};
use posted_market_core::pricing::{
    bayesian_otf_prices, check_structural_conditions, commitment_prices, equivalence_price,
    euler_lower_bound, log2_ceil, subadditive_price_reduce, summarize_benchmark, PlanEntry,
    PricePlan, SupplySpec,
};
use posted_market_core::rational::{rat, ratio, Rat};
use posted_market_core::valuation::{AdditiveClause, ProfileDistribution, Valuation};
use posted_market_core::{GoodId, GoodSet};

fn mask_set(mask: u64, m: usize) -> GoodSet {
    GoodSet::from_iter((0..m).filter(|g| mask & (1 << g) != 0))
}

fn order_from_seed(n: usize, seed: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    let mut s = seed;
    for i in (1..n).rev() {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let j = (s >> 33) as usize % (i + 1);
        v.swap(i, j);
    }
    v
}

fn small_rat() -> impl Strategy<Value = Rat> {
    (0i64..=24, 1i64..=3).prop_map(|(n, d)| ratio(n, d))
}

fn clause(m: usize) -> impl Strategy<Value = AdditiveClause> {
    proptest::collection::vec(small_rat(), m)
        .prop_map(|ws| AdditiveClause::new(ws.into_iter().enumerate().collect()).unwrap())
}

fn xos(m: usize) -> impl Strategy<Value = Valuation> {
    proptest::collection::vec(clause(m), 1..=3).prop_map(|cs| Valuation::xos(cs).unwrap())
}

/// Non-decreasing, non-negative marginals built from increments.
fn schedule(min_len: usize, max_len: usize) -> impl Strategy<Value = CostSchedule> {
    proptest::collection::vec((0i64..=3, 1i64..=2), min_len..=max_len).prop_map(|incs| {
        let mut marginals = Vec::new();
        let mut cur = rat(0);
        for (n, d) in incs {
            cur += ratio(n, d);
            marginals.push(cur.clone());
        }
        CostSchedule::from_finite(marginals).unwrap()
    })
}

/// Full-information market with XoS buyers.
fn market(max_goods: usize, max_buyers: usize) -> impl Strategy<Value = Instance> {
    (1..=max_goods, 1..=max_buyers).prop_flat_map(|(m, n)| {
        (
            proptest::collection::vec(schedule(0, 3), m),
            proptest::collection::vec(xos(m), n),
        )
            .prop_map(|(scheds, vals)| {
                let goods = scheds
                    .into_iter()
                    .enumerate()
                    .map(|(id, cost)| Good { id, cost })
                    .collect();
                Instance::full_information(goods, vals).unwrap()
            })
    })
}

/// Small Bayesian market: uniform two-point (or degenerate) priors.
fn bayesian_market() -> impl Strategy<Value = Instance> {
    (1usize..=2, 1usize..=2).prop_flat_map(|(m, n)| {
        (
            proptest::collection::vec(schedule(0, 3), m),
            proptest::collection::vec(proptest::collection::vec(xos(m), 1..=2), n),
        )
            .prop_map(|(scheds, supports)| {
                let goods = scheds
                    .into_iter()
                    .enumerate()
                    .map(|(id, cost)| Good { id, cost })
                    .collect();
                let buyers = supports
                    .into_iter()
                    .map(|vs| {
                        let k = vs.len() as i64;
                        vs.into_iter().map(|v| (ratio(1, k), v)).collect()
                    })
                    .collect();
                Instance::new(goods, ProfileDistribution::new(buyers).unwrap()).unwrap()
            })
    })
}

/// Reference demand: enumerate every subset of `available` under the
/// documented tie-break (utility, then value, then size, then
/// lexicographically smallest id sequence).
fn demand_oracle(v: &Valuation, prices: &BTreeMap<GoodId, Rat>, available: GoodSet) -> GoodSet {
    let mut best = GoodSet::EMPTY;
    let mut best_utility = rat(0);
    let mut best_value = rat(0);
    for cand in available.subsets() {
        let value = v.value(cand).unwrap();
        let paid: Rat = cand.iter().map(|g| prices[&g].clone()).sum();
        let utility = value.clone() - paid;
        let better = (
            &utility,
            &value,
            cand.len(),
            std::cmp::Reverse(cand_key(cand)),
        ) > (
            &best_utility,
            &best_value,
            best.len(),
            std::cmp::Reverse(cand_key(best)),
        );
        if better {
            best = cand;
            best_utility = utility;
            best_value = value;
        }
    }
    best
}

/// Ascending id sequence, for lexicographic comparison.
fn cand_key(s: GoodSet) -> Vec<usize> {
    s.iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closed_form_demand_matches_exhaustive_search(
        v in xos(4),
        prices in proptest::collection::vec(small_rat(), 4),
        avail_mask in 0u64..16,
    ) {
        let avail = mask_set(avail_mask, 4);
        let price_map: BTreeMap<GoodId, Rat> = prices.into_iter().enumerate().collect();
        let got = v.demand(&price_map, avail).unwrap();
        let want = demand_oracle(&v, &price_map, avail);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn greedy_reaches_half_the_optimum_with_a_clean_audit(
        inst in market(4, 4),
        seed in any::<u64>(),
    ) {
        let profile = inst.fixed_profile().unwrap();
        let order = order_from_seed(inst.num_buyers(), seed);
        let (alloc, trace) = xos_greedy_allocate(&inst, &profile, &order).unwrap();
        let audit = audit_greedy_trace(&inst, &trace);
        prop_assert!(audit.is_clean(), "violations: {:?}", audit.violations);
        let greedy_sw = social_welfare(&inst, &profile, &alloc)
            .unwrap()
            .expect_finite("greedy only produces producible copies")
            .unwrap();
        let (_, opt_sw) = brute_force_opt(&inst, &profile).unwrap();
        prop_assert!(
            rat(2) * greedy_sw.clone() >= opt_sw.clone(),
            "greedy {} vs optimum {}",
            greedy_sw,
            opt_sw
        );
    }

    #[test]
    fn expected_cost_dominates_cost_of_expected_count(
        (sched, pmf) in schedule(0, 4).prop_flat_map(|s| {
            let cap = s.capacity();
            proptest::collection::vec(0u32..=3, cap + 1).prop_map(move |ws| {
                let total: u32 = ws.iter().sum();
                let pmf: Vec<(usize, Rat)> = if total == 0 {
                    vec![(0, rat(1))]
                } else {
                    ws.iter()
                        .enumerate()
                        .filter(|(_, w)| **w > 0)
                        .map(|(k, w)| (k, ratio(*w as i64, total as i64)))
                        .collect()
                };
                (s.clone(), pmf)
            })
        }),
    ) {
        let spec = SupplySpec::Random(pmf);
        spec.validate().unwrap();
        let expected_cost = spec.expected_cost(&sched).unwrap();
        let at_mean = sched
            .aggregate_at(&spec.expected_count())
            .unwrap()
            .expect_finite("mean within capacity")
            .unwrap();
        prop_assert!(expected_cost >= at_mean);
    }

    #[test]
    fn equivalence_price_identities(
        raw in proptest::collection::vec(small_rat(), 1..=5),
        sched in schedule(5, 5),
    ) {
        let k = raw.len();
        let cost = sched.aggregate(k).expect_finite("capacity 5").unwrap();
        // Shift every value up by the average cost so total value always
        // covers production; a constant shift keeps the sort order.
        let bump = cost.clone() / rat(k as i64);
        let mut values: Vec<Rat> = raw.into_iter().map(|v| v + bump.clone()).collect();
        values.sort_by(|a, b| b.cmp(a));
        let total: Rat = values.iter().cloned().sum();

        let p = equivalence_price(&values, &sched).unwrap();
        let revenue = rat(k as i64) * p.clone();
        let profit = revenue.clone() - cost.clone();
        let surplus = total.clone() - revenue;
        // Seller profit equals buyer surplus, and each is half the welfare.
        prop_assert_eq!(&profit, &surplus);
        prop_assert_eq!(rat(2) * profit.clone(), total - cost);
        // Any sales volume up to k is profitable at this price.
        for t in 1..=k {
            prop_assert!(
                rat(t as i64) * p.clone()
                    >= sched.aggregate(t).expect_finite("t within capacity").unwrap()
            );
        }
    }
}

/// Monotone, normalized, subadditive table valuations from two families:
/// budgeted-additive and symmetric-concave.
fn subadditive_table(m: usize) -> impl Strategy<Value = Valuation> {
    let budgeted = (proptest::collection::vec(small_rat(), m), small_rat()).prop_map(
        move |(ws, budget)| {
            let values = (0..1u64 << m)
                .map(|mask| {
                    let sum: Rat = (0..m)
                        .filter(|g| mask & (1 << g) != 0)
                        .map(|g| ws[g].clone())
                        .sum();
                    sum.min(budget.clone())
                })
                .collect();
            Valuation::table((0..m).collect(), values).unwrap()
        },
    );
    let concave = proptest::collection::vec((0i64..=6, 1i64..=2), m).prop_map(move |incs| {
        let mut deltas: Vec<Rat> = incs.into_iter().map(|(n, d)| ratio(n, d)).collect();
        deltas.sort_by(|a, b| b.cmp(a));
        let mut by_size = vec![rat(0)];
        for d in deltas {
            let next = by_size.last().unwrap().clone() + d;
            by_size.push(next);
        }
        let values = (0..1u64 << m)
            .map(|mask| by_size[mask.count_ones() as usize].clone())
            .collect();
        Valuation::table((0..m).collect(), values).unwrap()
    });
    prop_oneof![budgeted, concave]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bundle_reduction_properties(
        (m, v, mask) in (2usize..=4).prop_flat_map(|m| {
            (Just(m), subadditive_table(m), 0u64..(1u64 << m))
        }),
    ) {
        let bundle = mask_set(mask, m);
        let total = v.value(bundle).unwrap();
        let (price, core, trace) = subadditive_price_reduce(&v, bundle, m).unwrap();
        if total == rat(0) {
            prop_assert_eq!(price, rat(0));
            prop_assert!(core.is_empty());
            return Ok(());
        }
        prop_assert!(!core.is_empty());
        prop_assert!(trace.depth() >= 1);
        prop_assert!(trace.depth() <= log2_ceil(m) as usize);
        // Every sub-bundle of the core is worth its uniform price.
        for r in core.subsets() {
            prop_assert!(v.value(r).unwrap() >= price.clone() * rat(r.len() as i64));
        }
        // The core retains a 1/(2e log2 m) fraction of the bundle's value
        // as priced mass (checked with a rational lower bound on e).
        let lhs = rat(2)
            * euler_lower_bound()
            * rat(i64::from(log2_ceil(m)))
            * price
            * rat(core.len() as i64);
        prop_assert!(lhs >= total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bayesian_plans_satisfy_their_structure(inst in bayesian_market()) {
        let summary = summarize_benchmark(
            &inst,
            |p| brute_force_opt(&inst, p).map(|r| r.0),
            100_000,
        )
        .unwrap();
        // Retained goods earn non-negative welfare on positive sales;
        // totals decompose welfare exactly.
        prop_assert_eq!(
            summary.expected_alg_welfare.clone(),
            summary.expected_value_total.clone() - summary.expected_cost_total.clone()
        );
        for g in &summary.retained {
            prop_assert!(g.welfare >= rat(0));
            prop_assert!(g.expected_count > rat(0));
            let mass: Rat = g.count_dist.iter().map(|(_, p)| p.clone()).sum();
            prop_assert_eq!(mass, rat(1));
        }

        let otf = bayesian_otf_prices(&summary).unwrap();
        let commit = commitment_prices(&summary).unwrap();
        for (g, entry) in &otf.entries {
            let gs = summary.good(*g).unwrap();
            // Posted supply reproduces the benchmark's expected sales, and
            // is deterministic exactly when that expectation is integral.
            prop_assert_eq!(entry.supply.expected_count(), gs.expected_count.clone());
            match &entry.supply {
                SupplySpec::Fixed(_) => prop_assert!(gs.expected_count.is_integer()),
                SupplySpec::Random(_) => prop_assert!(!gs.expected_count.is_integer()),
            }
            // Committing to production can only lower the price.
            prop_assert!(commit.entry(*g).unwrap().price <= entry.price);
        }

        // The structural conditions behind the half-welfare guarantee hold
        // at factor 2, and the guarantee itself holds under the worst
        // arrival order.
        let report = check_structural_conditions(&inst, &otf, &summary, &rat(2)).unwrap();
        prop_assert!(report.all_pass);
        let mech = expected_outcome(
            &inst,
            &otf,
            MechanismKind::Otf,
            &ArrivalPolicy::WorstCase,
            100_000,
        )
        .unwrap();
        prop_assert!(
            rat(2) * mech.expected_welfare.clone() >= summary.expected_alg_welfare.clone(),
            "worst-order welfare {} vs benchmark {}",
            mech.expected_welfare,
            summary.expected_alg_welfare
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn run_accounting_identities(
        inst in market(3, 3),
        prices in proptest::collection::vec(small_rat(), 3),
        supplies in proptest::collection::vec(0usize..=2, 3),
        seed in any::<u64>(),
    ) {
        let m = inst.num_goods();
        let mut entries = BTreeMap::new();
        for g in 0..m {
            let cap = inst.goods()[g].cost.capacity();
            entries.insert(
                g,
                PlanEntry {
                    price: prices[g].clone(),
                    supply: SupplySpec::Fixed(supplies[g].min(cap)),
                },
            );
        }
        let plan = PricePlan::new(entries, "randomized".to_string()).unwrap();
        let supply = fixed_supply(&plan).unwrap();
        let order = order_from_seed(inst.num_buyers(), seed);
        let profile = inst.fixed_profile().unwrap();

        for kind in [MechanismKind::Otf, MechanismKind::Commitment] {
            let out = run_mechanism(&inst, &profile, &plan, kind, &order, &supply).unwrap();
            prop_assert_eq!(
                out.welfare.clone(),
                out.buyer_surplus.clone() + out.profit.clone()
            );
            let billed: Rat = (0..m)
                .map(|g| plan.entry(g).unwrap().price.clone() * rat(out.sold[g] as i64))
                .sum();
            prop_assert_eq!(out.revenue.clone(), billed);
            for g in 0..m {
                prop_assert!(out.sold[g] <= supply[&g]);
                match kind {
                    MechanismKind::Otf => prop_assert_eq!(out.produced[g], out.sold[g]),
                    MechanismKind::Commitment => prop_assert_eq!(out.produced[g], supply[&g]),
                }
            }
            // Buyers never pay more than their value.
            for (j, bundle) in out.allocation.bundles().iter().enumerate() {
                let paid: Rat = bundle
                    .iter()
                    .map(|g| plan.entry(g).unwrap().price.clone())
                    .sum();
                prop_assert!(profile[j].value(*bundle).unwrap() >= paid);
            }
            // Welfare matches the allocation's welfare, up to the sunk cost
            // of committed-but-unsold copies.
            let alloc_sw = social_welfare(&inst, &profile, &out.allocation)
                .unwrap()
                .expect_finite("sold copies are producible")
                .unwrap();
            match kind {
                MechanismKind::Otf => prop_assert_eq!(out.welfare.clone(), alloc_sw),
                MechanismKind::Commitment => prop_assert!(out.welfare <= alloc_sw),
            }

            // A fixed-order expectation over a point prior is just the run.
            let rec = expected_outcome(
                &inst,
                &plan,
                kind,
                &ArrivalPolicy::Fixed(order.clone()),
                10_000,
            )
            .unwrap();
            prop_assert_eq!(rec.expected_welfare, out.welfare);
            prop_assert_eq!(rec.expected_revenue, out.revenue);
            prop_assert_eq!(rec.expected_cost, out.production_cost);
            prop_assert_eq!(rec.expected_surplus, out.buyer_surplus);
            prop_assert_eq!(rec.expected_profit, out.profit);
        }
    }
}
