//! Running posted-price mechanisms and verifying their welfare guarantees.
//!
//! A run takes an instance, a realized valuation profile, a [`PricePlan`],
//! and an arrival order. Buyers arrive one by one and take a
//! utility-maximizing bundle of the goods still in stock at the posted
//! prices. Two cost regimes share that loop:
//!
//! * **pay-as-you-sell** ([`MechanismKind::Otf`]) — the seller produces a
//!   copy only when it sells, so production cost is `C(sold)`;
//! * **committed** ([`MechanismKind::Commitment`]) — the posted supply is
//!   produced up front and paid for whether or not it sells.
//!
//! [`expected_outcome`] evaluates a plan exactly by enumerating the
//! valuation prior, the (possibly randomized) supply draws, and — under
//! the worst-case or uniform arrival policies — every arrival order,
//! with buyer demand memoized per availability mask. [`sampled_outcome`]
//! is the seeded Monte Carlo fallback for markets too large to enumerate.
//!
//! The `verify_*` functions tie a pricing rule to its guarantee on one
//! concrete instance: price it, run it, and compare the worst-order
//! expected welfare against the rule's proven fraction of the benchmark.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::allocation::{brute_force_opt, brute_force_opt_filtered};
use crate::model::{Allocation, Instance};
use crate::pricing::{
    alpha_boundedness, bayesian_otf_prices, check_structural_conditions, commitment_prices,
    euler_upper_bound, guarantee_factor, guess_entry, guess_ranges, log2_ceil,
    subadditive_otf_prices, summarize_benchmark, BenchmarkSummary, ConditionsReport, PricePlan,
    SupplySpec,
};
use crate::rational::{rat, ExtRat, Rat};
use crate::set::GoodSet;
use crate::valuation::{ProfileDistribution, Valuation};
use crate::{BuyerId, Error, GoodId, Result};

/// Who pays for production and when.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismKind {
    /// Produce (and pay marginal cost) only for copies that sell.
    Otf,
    /// Produce the full posted supply up front; its cost is sunk.
    Commitment,
}

/// How buyers' arrival order is chosen when taking expectations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArrivalPolicy {
    Fixed(Vec<BuyerId>),
    UniformRandom,
    /// Adversarial: the order minimizing expected welfare.
    WorstCase,
}

/// Everything observable from one realized run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MechanismOutcome {
    pub allocation: Allocation,
    /// Copies sold per good.
    pub sold: Vec<usize>,
    /// Copies produced per good (equals `sold` when paying as you sell,
    /// the committed supply otherwise).
    pub produced: Vec<usize>,
    pub revenue: Rat,
    pub production_cost: Rat,
    pub buyer_surplus: Rat,
    pub profit: Rat,
    pub welfare: Rat,
}

fn check_order(order: &[BuyerId], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidOrder);
    }
    let mut seen = alloc::vec![false; n];
    for &j in order {
        if j >= n || seen[j] {
            return Err(Error::InvalidOrder);
        }
        seen[j] = true;
    }
    Ok(())
}

fn run_with<F>(
    instance: &Instance,
    profile: &[&Valuation],
    plan: &PricePlan,
    kind: MechanismKind,
    order: &[BuyerId],
    supply: &BTreeMap<GoodId, usize>,
    demand_fn: &mut F,
) -> Result<MechanismOutcome>
where
    F: FnMut(BuyerId, &Valuation, &BTreeMap<GoodId, Rat>, GoodSet) -> Result<GoodSet>,
{
    let n = profile.len();
    if n != instance.num_buyers() {
        return Err(Error::Precondition(
            "profile length does not match the instance".to_string(),
        ));
    }
    check_order(order, n)?;
    let m = instance.num_goods();
    let mut remaining: BTreeMap<GoodId, usize> = BTreeMap::new();
    for g in plan.entries.keys() {
        if *g >= m {
            return Err(Error::UnknownGood(*g));
        }
        let k = supply
            .get(g)
            .ok_or_else(|| Error::InvalidPlan(format!("no supply realization for good {}", g)))?;
        remaining.insert(*g, *k);
    }

    let mut alloc = Allocation::empty(n);
    let mut revenue = Rat::zero();
    let mut values = Rat::zero();
    for &j in order {
        let avail = GoodSet::from_iter(
            remaining
                .iter()
                .filter(|(_, k)| **k > 0)
                .map(|(g, _)| *g),
        );
        let prices: BTreeMap<GoodId, Rat> = avail
            .iter()
            .map(|g| (g, plan.entries[&g].price.clone()))
            .collect();
        let bundle = demand_fn(j, profile[j], &prices, avail)?;
        for g in bundle.iter() {
            *remaining.get_mut(&g).expect("demand within availability") -= 1;
            revenue += prices[&g].clone();
        }
        alloc.set_bundle(j, bundle);
        values += profile[j].value(bundle)?;
    }

    let sold = alloc.sold_counts(m);
    let mut produced = alloc::vec![0usize; m];
    for g in 0..m {
        produced[g] = match kind {
            MechanismKind::Otf => sold[g],
            MechanismKind::Commitment => supply.get(&g).copied().unwrap_or(0),
        };
    }
    let mut production_cost = Rat::zero();
    for g in 0..m {
        production_cost += instance.goods()[g]
            .cost
            .aggregate(produced[g])
            .expect_finite("produced copies beyond the schedule's capacity")?;
    }
    let buyer_surplus = values.clone() - revenue.clone();
    let profit = revenue.clone() - production_cost.clone();
    let welfare = values - production_cost.clone();
    Ok(MechanismOutcome {
        allocation: alloc,
        sold,
        produced,
        revenue,
        production_cost,
        buyer_surplus,
        profit,
        welfare,
    })
}

/// One realized run: fixed profile, fixed arrival order, fixed supply
/// draw (`supply` must give a count for every good in the plan; a
/// fixed-supply plan can use [`fixed_supply`]).
pub fn run_mechanism(
    instance: &Instance,
    profile: &[&Valuation],
    plan: &PricePlan,
    kind: MechanismKind,
    order: &[BuyerId],
    supply: &BTreeMap<GoodId, usize>,
) -> Result<MechanismOutcome> {
    let mut demand = |_: BuyerId, v: &Valuation, prices: &BTreeMap<GoodId, Rat>, avail| {
        v.demand(prices, avail)
    };
    run_with(instance, profile, plan, kind, order, supply, &mut demand)
}

/// The supply map of a plan whose entries are all fixed; errors if any
/// good's supply is randomized.
pub fn fixed_supply(plan: &PricePlan) -> Result<BTreeMap<GoodId, usize>> {
    plan.entries
        .iter()
        .map(|(g, e)| match &e.supply {
            SupplySpec::Fixed(k) => Ok((*g, *k)),
            SupplySpec::Random(_) => Err(Error::InvalidPlan(format!(
                "good {} has randomized supply; resolve it first",
                g
            ))),
        })
        .collect()
}

/// Draw one supply realization for every good in the plan.
pub fn resolve_supply<R: RngCore>(plan: &PricePlan, rng: &mut R) -> BTreeMap<GoodId, usize> {
    plan.entries
        .iter()
        .map(|(g, e)| {
            let k = match &e.supply {
                SupplySpec::Fixed(k) => *k,
                SupplySpec::Random(pmf) => {
                    // Exact inverse-CDF draw at 64-bit resolution.
                    let u = Rat::new(rng.next_u64().into(), (u128::from(u64::MAX) + 1).into());
                    let mut acc = Rat::zero();
                    let mut chosen = pmf.last().expect("validated non-empty").0;
                    for (k, p) in pmf {
                        acc += p;
                        if u < acc {
                            chosen = *k;
                            break;
                        }
                    }
                    chosen
                }
            };
            (*g, k)
        })
        .collect()
}

/// All joint supply realizations of a plan with their probabilities.
pub fn supply_realizations(plan: &PricePlan) -> Vec<(Rat, BTreeMap<GoodId, usize>)> {
    let mut out = alloc::vec![(Rat::one(), BTreeMap::new())];
    for (g, e) in &plan.entries {
        let support = e.supply.support();
        let mut next = Vec::with_capacity(out.len() * support.len());
        for (q, partial) in &out {
            for (k, p) in &support {
                let mut with = partial.clone();
                with.insert(*g, *k);
                next.push((q.clone() * p, with));
            }
        }
        out = next;
    }
    out
}

fn supply_realization_count(plan: &PricePlan) -> u128 {
    plan.entries
        .values()
        .map(|e| e.supply.support().len() as u128)
        .fold(1u128, |a, b| a.saturating_mul(b))
}

fn enumerate_support_indexed(
    dist: &ProfileDistribution,
    cap: u128,
) -> Result<Vec<(Rat, Vec<usize>)>> {
    let size = dist.support_size();
    if size > cap {
        return Err(Error::CapExceeded {
            what: "valuation profile support",
            needed: size,
            cap,
        });
    }
    let n = dist.num_buyers();
    let mut out = Vec::new();
    let mut idx = alloc::vec![0usize; n];
    loop {
        let mut q = Rat::one();
        for (j, &s) in idx.iter().enumerate() {
            q *= dist.buyers()[j][s].0.clone();
        }
        out.push((q, idx.clone()));
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(out);
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < dist.buyers()[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// Expectations of one plan under one arrival policy. `per_order` lists
/// the expected welfare of every order considered; for the worst-case
/// policy the headline numbers are the minimizing order's (reported in
/// `chosen_order`), for the uniform policy they are the average.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpectationRecord {
    pub expected_welfare: Rat,
    pub expected_revenue: Rat,
    pub expected_cost: Rat,
    pub expected_surplus: Rat,
    pub expected_profit: Rat,
    pub per_order: Vec<(Vec<BuyerId>, Rat)>,
    pub chosen_order: Option<Vec<BuyerId>>,
    pub runs: u128,
    pub exact: bool,
}

#[derive(Clone)]
struct Tally {
    welfare: Rat,
    revenue: Rat,
    cost: Rat,
    surplus: Rat,
    profit: Rat,
}

impl Tally {
    fn zero() -> Self {
        Tally {
            welfare: Rat::zero(),
            revenue: Rat::zero(),
            cost: Rat::zero(),
            surplus: Rat::zero(),
            profit: Rat::zero(),
        }
    }

    fn add(&mut self, q: &Rat, out: &MechanismOutcome) {
        self.welfare += q * out.welfare.clone();
        self.revenue += q * out.revenue.clone();
        self.cost += q * out.production_cost.clone();
        self.surplus += q * out.buyer_surplus.clone();
        self.profit += q * out.profit.clone();
    }

    fn scaled(&self, d: &Rat) -> Tally {
        Tally {
            welfare: self.welfare.clone() / d,
            revenue: self.revenue.clone() / d,
            cost: self.cost.clone() / d,
            surplus: self.surplus.clone() / d,
            profit: self.profit.clone() / d,
        }
    }

    fn merged(rows: &[Tally]) -> Tally {
        let mut total = Tally::zero();
        for r in rows {
            total.welfare += r.welfare.clone();
            total.revenue += r.revenue.clone();
            total.cost += r.cost.clone();
            total.surplus += r.surplus.clone();
            total.profit += r.profit.clone();
        }
        total
    }
}

fn record_from(
    orders: Vec<Vec<BuyerId>>,
    rows: Vec<Tally>,
    policy: &ArrivalPolicy,
    runs: u128,
    exact: bool,
) -> ExpectationRecord {
    let per_order: Vec<(Vec<BuyerId>, Rat)> = orders
        .iter()
        .zip(rows.iter())
        .map(|(o, t)| (o.clone(), t.welfare.clone()))
        .collect();
    let (headline, chosen) = match policy {
        ArrivalPolicy::Fixed(_) => (rows[0].clone(), Some(orders[0].clone())),
        ArrivalPolicy::UniformRandom => (
            Tally::merged(&rows).scaled(&rat(rows.len() as i64)),
            None,
        ),
        ArrivalPolicy::WorstCase => {
            let worst = (0..rows.len())
                .min_by(|&a, &b| rows[a].welfare.cmp(&rows[b].welfare))
                .expect("at least one order");
            (rows[worst].clone(), Some(orders[worst].clone()))
        }
    };
    ExpectationRecord {
        expected_welfare: headline.welfare,
        expected_revenue: headline.revenue,
        expected_cost: headline.cost,
        expected_surplus: headline.surplus,
        expected_profit: headline.profit,
        per_order,
        chosen_order: chosen,
        runs,
        exact,
    }
}

/// Exact expectations by full enumeration of valuation profiles, supply
/// draws, and (for non-fixed policies) all `n!` arrival orders. `cap`
/// bounds the number of mechanism runs. Demand queries are memoized per
/// (buyer, valuation, availability) triple, which is what makes the full
/// order enumeration affordable.
pub fn expected_outcome(
    instance: &Instance,
    plan: &PricePlan,
    kind: MechanismKind,
    policy: &ArrivalPolicy,
    cap: u128,
) -> Result<ExpectationRecord> {
    let n = instance.num_buyers();
    let orders: Vec<Vec<BuyerId>> = match policy {
        ArrivalPolicy::Fixed(o) => {
            check_order(o, n)?;
            alloc::vec![o.clone()]
        }
        _ => (0..n).permutations(n).collect(),
    };
    let profiles = instance.buyers().support_size();
    let supplies = supply_realization_count(plan);
    let runs = profiles
        .checked_mul(supplies)
        .and_then(|x| x.checked_mul(orders.len() as u128))
        .unwrap_or(u128::MAX);
    if runs > cap {
        return Err(Error::CapExceeded {
            what: "mechanism expectation runs",
            needed: runs,
            cap,
        });
    }

    let support = enumerate_support_indexed(instance.buyers(), cap)?;
    let realizations = supply_realizations(plan);
    let mut rows = alloc::vec![Tally::zero(); orders.len()];
    let mut memo: BTreeMap<(BuyerId, usize, u64), GoodSet> = BTreeMap::new();
    for (q_p, idxs) in &support {
        let profile: Vec<&Valuation> = idxs
            .iter()
            .enumerate()
            .map(|(j, &s)| &instance.buyers().buyers()[j][s].1)
            .collect();
        for (q_s, supply) in &realizations {
            let q = q_p.clone() * q_s;
            for (oi, order) in orders.iter().enumerate() {
                let mut demand_fn = |j: BuyerId,
                                     v: &Valuation,
                                     prices: &BTreeMap<GoodId, Rat>,
                                     avail: GoodSet| {
                    let key = (j, idxs[j], avail.bits());
                    if let Some(s) = memo.get(&key) {
                        return Ok(*s);
                    }
                    let s = v.demand(prices, avail)?;
                    memo.insert(key, s);
                    Ok(s)
                };
                let out = run_with(instance, &profile, plan, kind, order, supply, &mut demand_fn)?;
                rows[oi].add(&q, &out);
            }
        }
    }
    Ok(record_from(orders, rows, policy, runs, true))
}

/// Seeded Monte Carlo estimate of [`expected_outcome`] for markets whose
/// support is too large to enumerate. Profiles and supply draws are
/// sampled; arrival orders still follow the policy (the worst-case policy
/// evaluates every order against the common sample stream).
pub fn sampled_outcome(
    instance: &Instance,
    plan: &PricePlan,
    kind: MechanismKind,
    policy: &ArrivalPolicy,
    seed: u64,
    samples: u32,
) -> Result<ExpectationRecord> {
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".to_string()));
    }
    let n = instance.num_buyers();
    let orders: Vec<Vec<BuyerId>> = match policy {
        ArrivalPolicy::Fixed(o) => {
            check_order(o, n)?;
            alloc::vec![o.clone()]
        }
        ArrivalPolicy::UniformRandom => alloc::vec![(0..n).collect()],
        ArrivalPolicy::WorstCase => (0..n).permutations(n).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = alloc::vec![Tally::zero(); orders.len()];
    let one = Rat::one();
    let mut shuffled: Vec<BuyerId> = (0..n).collect();
    for _ in 0..samples {
        let profile = instance.buyers().sample_with(&mut rng);
        let supply = resolve_supply(plan, &mut rng);
        if matches!(policy, ArrivalPolicy::UniformRandom) {
            for i in (1..n).rev() {
                let j = (rng.next_u64() as usize) % (i + 1);
                shuffled.swap(i, j);
            }
            let out = run_mechanism(instance, &profile, plan, kind, &shuffled, &supply)?;
            rows[0].add(&one, &out);
        } else {
            for (oi, order) in orders.iter().enumerate() {
                let out = run_mechanism(instance, &profile, plan, kind, order, &supply)?;
                rows[oi].add(&one, &out);
            }
        }
    }
    let scale = rat(i64::from(samples));
    let rows: Vec<Tally> = rows.iter().map(|t| t.scaled(&scale)).collect();
    let runs = u128::from(samples) * orders.len() as u128;
    let mut rec = record_from(orders, rows, policy, runs, false);
    if matches!(policy, ArrivalPolicy::UniformRandom) {
        // The single accumulator row mixes sampled orders; it is not the
        // expectation of any one order.
        rec.per_order.clear();
    }
    Ok(rec)
}

/// Verdict on the pay-as-you-sell rule for one market: prices derived
/// from the optimal-welfare benchmark must clear the structural
/// conditions at factor 2, and the mechanism's worst-order expected
/// welfare must reach half the benchmark.
#[derive(Clone, Debug)]
pub struct OtfVerdict {
    pub summary: BenchmarkSummary,
    pub plan: PricePlan,
    pub conditions: ConditionsReport,
    pub expected_opt_welfare: Rat,
    pub mechanism: ExpectationRecord,
    pub bound: Rat,
    pub bound_holds: bool,
    pub pass: bool,
}

pub fn verify_otf_guarantee(instance: &Instance, cap: u128) -> Result<OtfVerdict> {
    let summary = summarize_benchmark(
        instance,
        |p| brute_force_opt(instance, p).map(|r| r.0),
        cap,
    )?;
    let plan = bayesian_otf_prices(&summary)?;
    let conditions = check_structural_conditions(instance, &plan, &summary, &rat(2))?;
    let mechanism = expected_outcome(
        instance,
        &plan,
        MechanismKind::Otf,
        &ArrivalPolicy::WorstCase,
        cap,
    )?;
    let expected_opt_welfare = summary.expected_alg_welfare.clone();
    let bound = expected_opt_welfare.clone() / rat(2);
    let bound_holds = mechanism.expected_welfare >= bound;
    let pass = bound_holds && conditions.all_pass;
    Ok(OtfVerdict {
        summary,
        plan,
        conditions,
        expected_opt_welfare,
        mechanism,
        bound,
        bound_holds,
        pass,
    })
}

/// Verdict on the committed-production rule: prices never exceed the
/// pay-as-you-sell prices, and once total value is at least twice total
/// cost (`alpha >= 2`), worst-order expected welfare reaches
/// `guarantee_factor(alpha)` of the benchmark.
#[derive(Clone, Debug)]
pub struct CommitmentVerdict {
    pub summary: BenchmarkSummary,
    pub plan: PricePlan,
    pub otf_plan: PricePlan,
    pub alpha: ExtRat,
    pub factor: Rat,
    pub expected_opt_welfare: Rat,
    pub mechanism: ExpectationRecord,
    pub bound: Rat,
    /// True when `alpha >= 2`, i.e. the welfare bound is actually claimed.
    pub bound_claimed: bool,
    pub bound_holds: bool,
    pub price_dominance: bool,
    pub pass: bool,
}

pub fn verify_commitment_guarantee(instance: &Instance, cap: u128) -> Result<CommitmentVerdict> {
    let summary = summarize_benchmark(
        instance,
        |p| brute_force_opt(instance, p).map(|r| r.0),
        cap,
    )?;
    let plan = commitment_prices(&summary)?;
    let otf_plan = bayesian_otf_prices(&summary)?;
    let alpha = alpha_boundedness(&summary);
    let factor = guarantee_factor(&alpha);
    let bound_claimed = !factor.is_zero() || alpha >= ExtRat::from_int(2);
    let mechanism = expected_outcome(
        instance,
        &plan,
        MechanismKind::Commitment,
        &ArrivalPolicy::WorstCase,
        cap,
    )?;
    let expected_opt_welfare = summary.expected_alg_welfare.clone();
    let bound = factor.clone() * expected_opt_welfare.clone();
    let bound_holds = mechanism.expected_welfare >= bound;
    let price_dominance = plan.entries.iter().all(|(g, e)| {
        otf_plan
            .entry(*g)
            .map(|o| e.price <= o.price)
            .unwrap_or(false)
    });
    let pass = price_dominance && (!bound_claimed || bound_holds);
    Ok(CommitmentVerdict {
        summary,
        plan,
        otf_plan,
        alpha,
        factor,
        expected_opt_welfare,
        mechanism,
        bound,
        bound_claimed,
        bound_holds,
        price_dominance,
        pass,
    })
}

/// Verdict on the subadditive rule over limited-supply goods: worst-order
/// expected welfare reaches the benchmark welfare divided by
/// `4 e log2(M)`.
#[derive(Clone, Debug)]
pub struct SubadditiveVerdict {
    pub plan: PricePlan,
    pub expected_alg_welfare: Rat,
    pub mechanism: ExpectationRecord,
    pub bound: Rat,
    pub bound_holds: bool,
    pub pass: bool,
}

pub fn verify_subadditive_guarantee(instance: &Instance, cap: u128) -> Result<SubadditiveVerdict> {
    for good in instance.goods() {
        if !good.cost.marginals().iter().all(|c| c.is_zero()) {
            return Err(Error::Precondition(format!(
                "good {} is not limited-supply (free up to a stock limit)",
                good.id
            )));
        }
    }
    let support = instance.buyers().enumerate_support(cap)?;
    let mut expected_alg_welfare = Rat::zero();
    for (q, profile) in &support {
        let (_, sw) = brute_force_opt(instance, profile)?;
        expected_alg_welfare += q * sw;
    }
    let plan = subadditive_otf_prices(
        instance,
        |p| brute_force_opt(instance, p).map(|r| r.0),
        cap,
    )?;
    let mechanism = expected_outcome(
        instance,
        &plan,
        MechanismKind::Otf,
        &ArrivalPolicy::WorstCase,
        cap,
    )?;
    let denom =
        rat(4) * euler_upper_bound() * rat(i64::from(log2_ceil(instance.num_goods())));
    let bound = expected_alg_welfare.clone() / denom;
    let bound_holds = mechanism.expected_welfare >= bound;
    Ok(SubadditiveVerdict {
        plan,
        expected_alg_welfare,
        mechanism,
        bound,
        bound_holds,
        pass: bound_holds,
    })
}

/// One good retained by the guess-rule benchmark: its copy count and
/// welfare share in the power-of-two-restricted optimum, and the unique
/// exponent pair that "guesses it right" (supply matches the count, and
/// the sell-out margin lands in `[share/2, share]`).
#[derive(Clone, Debug)]
pub struct GuessGoodBenchmark {
    pub good: GoodId,
    pub count: usize,
    pub welfare_share: Rat,
    pub correct_r1: u32,
    pub correct_r2: u32,
}

/// Verdict on the prior-free guess rule for a full-information market.
#[derive(Clone, Debug)]
pub struct GuessVerdict {
    pub sw_opt: Rat,
    /// Optimal welfare when every copy count is forced to 0 or a power
    /// of two.
    pub sw_pow2: Rat,
    pub retained: Vec<GuessGoodBenchmark>,
    pub discarded: Vec<GoodId>,
    /// Every draw, every order, every good: non-negative seller profit.
    pub profit_always_nonnegative: bool,
    /// Every retained good admits a correct exponent pair.
    pub correct_guess_exists: bool,
    /// Every draw's worst-order welfare covers a quarter of the shares of
    /// the goods it guessed correctly.
    pub per_draw_share_holds: bool,
    /// Worst over orders of the expected welfare over exponent draws.
    pub expected_welfare: Rat,
    pub worst_order: Vec<BuyerId>,
    pub bound: Rat,
    pub bound_holds: bool,
    pub pass: bool,
}

pub fn verify_guess_price_guarantee(instance: &Instance, cap: u128) -> Result<GuessVerdict> {
    let profile = instance.fixed_profile().ok_or_else(|| {
        Error::Precondition("guess-price verification needs a full-information market".to_string())
    })?;
    let m = instance.num_goods();
    let n = instance.num_buyers();
    let (_, sw_opt) = brute_force_opt(instance, &profile)?;
    let (alloc2, sw_pow2) = brute_force_opt_filtered(instance, &profile, |counts| {
        counts.iter().all(|&k| k == 0 || k.is_power_of_two())
    })?;

    // Per-good welfare shares of the restricted benchmark, via maximizing
    // clauses.
    let mut value = alloc::vec![Rat::zero(); m];
    for (j, bundle) in alloc2.bundles().iter().enumerate() {
        if bundle.is_empty() {
            continue;
        }
        let clause = profile[j].xos_clause(*bundle)?;
        for g in bundle.iter() {
            value[g] += clause.weight(g);
        }
    }
    let counts = alloc2.sold_counts(m);
    let threshold = sw_opt.clone() / rat(4 * m as i64);
    let (r1_max, r2_max) = guess_ranges(n, m);

    let mut retained = Vec::new();
    let mut discarded = Vec::new();
    let mut correct_guess_exists = true;
    for g in 0..m {
        let k = counts[g];
        if k == 0 {
            discarded.push(g);
            continue;
        }
        let share = value[g].clone()
            - instance.goods()[g]
                .cost
                .aggregate(k)
                .expect_finite("benchmark allocated unproducible copies")?;
        if share < threshold {
            discarded.push(g);
            continue;
        }
        debug_assert!(k.is_power_of_two());
        let correct_r1 = k.trailing_zeros();
        let mut correct_r2 = None;
        for r2 in 0..=r2_max {
            let entry = guess_entry(&instance.goods()[g].cost, m, &sw_opt, correct_r1, r2)?;
            let margin = entry.price * rat(k as i64)
                - instance.goods()[g]
                    .cost
                    .aggregate(k)
                    .expect_finite("benchmark allocated unproducible copies")?;
            if rat(2) * margin.clone() >= share && margin <= share {
                correct_r2 = Some(r2);
                break;
            }
        }
        match correct_r2 {
            Some(r2) => retained.push(GuessGoodBenchmark {
                good: g,
                count: k,
                welfare_share: share,
                correct_r1,
                correct_r2: r2,
            }),
            None => {
                correct_guess_exists = false;
                discarded.push(g);
            }
        }
    }

    // Exhaustive enumeration of the independent per-good exponent draws.
    let pairs: Vec<(u32, u32)> = (0..=r1_max)
        .flat_map(|r1| (0..=r2_max).map(move |r2| (r1, r2)))
        .collect();
    let draw_count = (pairs.len() as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    let orders: Vec<Vec<BuyerId>> = (0..n).permutations(n).collect();
    let runs = draw_count.saturating_mul(orders.len() as u128);
    if runs > cap {
        return Err(Error::CapExceeded {
            what: "guess-price draws",
            needed: runs,
            cap,
        });
    }

    let mut per_order_sum = alloc::vec![Rat::zero(); orders.len()];
    let mut profit_always_nonnegative = true;
    let mut per_draw_share_holds = true;
    let mut assignment = alloc::vec![0usize; m];
    loop {
        let mut entries = BTreeMap::new();
        for g in 0..m {
            let (r1, r2) = pairs[assignment[g]];
            entries.insert(g, guess_entry(&instance.goods()[g].cost, m, &sw_opt, r1, r2)?);
        }
        let plan = PricePlan::new(entries, "guess-price draw".to_string())?;
        let supply = fixed_supply(&plan)?;
        let guessed_share: Rat = retained
            .iter()
            .filter(|b| pairs[assignment[b.good]] == (b.correct_r1, b.correct_r2))
            .map(|b| b.welfare_share.clone())
            .sum();
        let mut worst_welfare: Option<Rat> = None;
        for (oi, order) in orders.iter().enumerate() {
            let out = run_mechanism(instance, &profile, &plan, MechanismKind::Otf, order, &supply)?;
            for (g, e) in &plan.entries {
                let sold = rat(out.sold[*g] as i64);
                let good_profit = e.price.clone() * sold
                    - instance.goods()[*g]
                        .cost
                        .aggregate(out.sold[*g])
                        .expect_finite("sold beyond capacity")?;
                if good_profit.is_negative() {
                    profit_always_nonnegative = false;
                }
            }
            if worst_welfare.as_ref().map_or(true, |w| out.welfare < *w) {
                worst_welfare = Some(out.welfare.clone());
            }
            per_order_sum[oi] += out.welfare;
        }
        if let Some(w) = worst_welfare {
            if rat(4) * w < guessed_share {
                per_draw_share_holds = false;
            }
        }
        // Next assignment (odometer over goods).
        let mut g = m;
        let done = loop {
            if g == 0 {
                break true;
            }
            g -= 1;
            assignment[g] += 1;
            if assignment[g] < pairs.len() {
                break false;
            }
            assignment[g] = 0;
        };
        if done {
            break;
        }
    }

    let draws = rat(draw_count as i64);
    let per_order_exp: Vec<Rat> = per_order_sum.iter().map(|s| s / draws.clone()).collect();
    let worst_idx = (0..orders.len())
        .min_by(|&a, &b| per_order_exp[a].cmp(&per_order_exp[b]))
        .expect("at least one order");
    let expected_welfare = per_order_exp[worst_idx].clone();
    let denom = rat(4)
        * rat(i64::from(2 + log2_ceil(m.max(2))))
        * rat(i64::from(1 + log2_ceil(n.max(2))));
    let bound = sw_opt.clone() / denom;
    let bound_holds = expected_welfare >= bound;
    let pass =
        profit_always_nonnegative && correct_guess_exists && per_draw_share_holds && bound_holds;
    Ok(GuessVerdict {
        sw_opt,
        sw_pow2,
        retained,
        discarded,
        profit_always_nonnegative,
        correct_guess_exists,
        per_draw_share_holds,
        expected_welfare,
        worst_order: orders[worst_idx].clone(),
        bound,
        bound_holds,
        pass,
    })
}
