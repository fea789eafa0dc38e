//! Allocation algorithms: the greedy posted-ask auction for XoS buyers and
//! a brute-force welfare maximizer used as the benchmark oracle.
//!
//! The greedy algorithm processes buyers in a given order. Each good keeps
//! a book of asks: the seller always offers the next copy at its marginal
//! cost, and every current holder implicitly re-offers at the clause weight
//! they "paid". The good's price is the minimum ask; buying at that price
//! either produces a new copy or takes the copy away from the cheapest
//! holder. The resulting allocation is within a factor 2 of optimal for
//! XoS valuations, and the trace it leaves behind is audited against the
//! structural invariants that proof rests on.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::model::{Allocation, Instance};
use crate::rational::{ExtRat, Rat};
use crate::set::GoodSet;
use crate::valuation::Valuation;
use crate::{BuyerId, Error, GoodId, Result};

/// Brute force enumerates `(2^M)^N` bundle tuples; keep both small.
pub const MAX_BRUTE_FORCE_BUYERS: usize = 5;
pub const MAX_BRUTE_FORCE_GOODS: usize = 5;

/// Who holds a copy of a good: the seller's standing offer of the next
/// copy, or a buyer who bought one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Holder {
    Seller,
    Buyer(BuyerId),
}

/// Ask book for one good during the greedy run.
#[derive(Clone, Debug)]
struct Book {
    seller_ask: ExtRat,
    buyer_asks: BTreeMap<BuyerId, Rat>,
}

impl Book {
    fn price(&self) -> ExtRat {
        let buyer_min = self
            .buyer_asks
            .values()
            .min()
            .map(|r| ExtRat::Finite(r.clone()));
        match buyer_min {
            Some(b) if b < self.seller_ask => b,
            _ => self.seller_ask.clone(),
        }
    }

    /// Cheapest ask; the seller wins ties (produce rather than displace),
    /// then the lowest buyer id.
    fn cheapest(&self) -> Holder {
        let price = self.price();
        if self.seller_ask == price {
            return Holder::Seller;
        }
        let (b, _) = self
            .buyer_asks
            .iter()
            .find(|(_, r)| ExtRat::Finite((*r).clone()) == price)
            .expect("price is some ask");
        Holder::Buyer(*b)
    }

    fn asks(&self) -> Vec<(Holder, ExtRat)> {
        let mut out = vec![(Holder::Seller, self.seller_ask.clone())];
        out.extend(
            self.buyer_asks
                .iter()
                .map(|(b, r)| (Holder::Buyer(*b), ExtRat::Finite(r.clone()))),
        );
        out
    }
}

/// One buyer's turn in the greedy run.
#[derive(Clone, Debug)]
pub struct GreedyRound {
    pub buyer: BuyerId,
    /// Bundle demanded at the prices the buyer saw.
    pub demanded: GoodSet,
    /// False when the round was a no-op (zero utility and zero clause
    /// weight on every demanded good; nothing changes hands).
    pub purchased: bool,
    /// Clause weights backing the purchase, one per demanded good.
    pub clause_weights: BTreeMap<GoodId, Rat>,
    pub prices_after: Vec<ExtRat>,
    pub asks_after: Vec<Vec<(Holder, ExtRat)>>,
    pub bundles_after: Vec<GoodSet>,
}

/// Everything the greedy run did, for invariant auditing and reporting.
#[derive(Clone, Debug)]
pub struct GreedyTrace {
    pub order: Vec<BuyerId>,
    pub initial_prices: Vec<ExtRat>,
    pub rounds: Vec<GreedyRound>,
}

/// Greedy allocation for clause-structured (additive/XoS) buyers.
///
/// `order` must be a permutation of the buyers. Each buyer in turn demands
/// a utility-maximizing bundle at the current prices (unavailable goods —
/// infinite price — excluded), then buys every good in it: the cheapest
/// current holder of each good is displaced unless that is the seller, in
/// which case a fresh copy is produced. The buyer's ask on each good is
/// the weight her maximizing clause puts on it.
pub fn xos_greedy_allocate(
    instance: &Instance,
    profile: &[&Valuation],
    order: &[BuyerId],
) -> Result<(Allocation, GreedyTrace)> {
    let n = instance.num_buyers();
    if profile.len() != n {
        return Err(Error::Precondition("profile size mismatch".into()));
    }
    check_permutation(order, n)?;
    if profile.iter().any(|v| !v.values_all_goods()) {
        return Err(Error::NotClauseStructured);
    }

    let mut books: Vec<Book> = instance
        .goods()
        .iter()
        .map(|g| Book {
            seller_ask: g.cost.marginal(1),
            buyer_asks: BTreeMap::new(),
        })
        .collect();
    let mut alloc = Allocation::empty(n);
    let mut trace = GreedyTrace {
        order: order.to_vec(),
        initial_prices: books.iter().map(Book::price).collect(),
        rounds: Vec::with_capacity(n),
    };

    for &i in order {
        let prices: Vec<ExtRat> = books.iter().map(Book::price).collect();
        let mut available = GoodSet::EMPTY;
        let mut price_map = BTreeMap::new();
        for (g, p) in prices.iter().enumerate() {
            if let Some(r) = p.finite() {
                available.insert(g);
                price_map.insert(g, r.clone());
            }
        }
        let demanded = profile[i].demand(&price_map, available)?;
        let clause = profile[i].xos_clause(demanded)?;
        let weights: BTreeMap<GoodId, Rat> =
            demanded.iter().map(|g| (g, clause.weight(g))).collect();

        // A demanded bundle that is worth nothing and backed by nothing is
        // left on the shelf; buying it would only pollute the ask books
        // with zero asks.
        let utility: Rat = profile[i].value(demanded)?
            - demanded.iter().map(|g| price_map[&g].clone()).sum::<Rat>();
        let purchased = !(utility.is_zero() && weights.values().all(Rat::is_zero));

        if purchased {
            for g in demanded.iter() {
                if let Holder::Buyer(b) = books[g].cheapest() {
                    books[g].buyer_asks.remove(&b);
                    alloc.remove(b, g);
                }
                books[g].buyer_asks.insert(i, weights[&g].clone());
                let copies = books[g].buyer_asks.len();
                books[g].seller_ask = instance.goods()[g].cost.marginal(copies + 1);
            }
            alloc.set_bundle(i, demanded);
        }

        trace.rounds.push(GreedyRound {
            buyer: i,
            demanded,
            purchased,
            clause_weights: weights,
            prices_after: books.iter().map(Book::price).collect(),
            asks_after: books.iter().map(Book::asks).collect(),
            bundles_after: alloc.bundles().to_vec(),
        });
    }
    Ok((alloc, trace))
}

fn check_permutation(order: &[BuyerId], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidOrder);
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return Err(Error::InvalidOrder);
        }
        seen[i] = true;
    }
    Ok(())
}

/// Violations found by [`audit_greedy_trace`]; empty means the run upheld
/// every invariant.
#[derive(Clone, Debug, Default)]
pub struct GreedyAudit {
    pub violations: Vec<String>,
}

impl GreedyAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check a greedy trace against the structural invariants of the run:
///
/// 1. prices never decrease;
/// 2. a buyer's bundle only shrinks after her own round;
/// 3. the price of a good never exceeds any current holder's ask;
/// 4. the final price of each good is at most the marginal cost of the
///    next copy beyond those allocated;
/// 5. every final holder's ask covers the marginal cost of the last copy
///    allocated (per-holder profitability).
pub fn audit_greedy_trace(instance: &Instance, trace: &GreedyTrace) -> GreedyAudit {
    let m = instance.num_goods();
    let mut audit = GreedyAudit::default();
    let mut complain = |msg: String| audit.violations.push(msg);

    let price_rows: Vec<&Vec<ExtRat>> = core::iter::once(&trace.initial_prices)
        .chain(trace.rounds.iter().map(|r| &r.prices_after))
        .collect();
    for w in price_rows.windows(2) {
        for g in 0..m {
            if w[1][g] < w[0][g] {
                complain(format!("price of good {} decreased", g));
            }
        }
    }

    for (step, round) in trace.rounds.iter().enumerate() {
        // Bundles of buyers whose round already passed only shrink.
        if step > 0 {
            let prev = &trace.rounds[step - 1];
            for past in trace.rounds[..step].iter().map(|r| r.buyer) {
                if !round.bundles_after[past].is_subset_of(prev.bundles_after[past]) {
                    complain(format!(
                        "bundle of buyer {} grew after her round",
                        past
                    ));
                }
            }
        }
        // Buyers yet to arrive hold nothing.
        for future in trace.rounds[step + 1..].iter().map(|r| r.buyer) {
            if !round.bundles_after[future].is_empty() {
                complain(format!("buyer {} holds goods before her round", future));
            }
        }
        // Price is a lower bound on (in fact the minimum of) current asks.
        for g in 0..m {
            for (h, ask) in &round.asks_after[g] {
                if *ask < round.prices_after[g] {
                    complain(format!(
                        "ask of {:?} on good {} is below its price",
                        h, g
                    ));
                }
            }
        }
    }

    if let Some(last) = trace.rounds.last() {
        let counts: Vec<usize> = {
            let alloc = Allocation::new(last.bundles_after.clone());
            alloc.sold_counts(m)
        };
        for g in 0..m {
            let next_marginal = instance.goods()[g].cost.marginal(counts[g] + 1);
            if last.prices_after[g] > next_marginal {
                complain(format!(
                    "final price of good {} exceeds next marginal cost",
                    g
                ));
            }
            let last_marginal = if counts[g] == 0 {
                ExtRat::zero()
            } else {
                instance.goods()[g].cost.marginal(counts[g])
            };
            for (h, ask) in &last.asks_after[g] {
                if matches!(h, Holder::Buyer(_)) && *ask < last_marginal {
                    complain(format!(
                        "holder {:?} of good {} asks below the marginal cost of its copies",
                        h, g
                    ));
                }
            }
        }
    }
    audit
}

/// Exact welfare maximizer by exhaustive search, with a filter on the
/// per-good copy counts of admissible allocations (always-true for the
/// plain optimum). Ties break lexicographically over the bundle tuple, so
/// the result is deterministic.
pub fn brute_force_opt_filtered(
    instance: &Instance,
    profile: &[&Valuation],
    admit: impl Fn(&[usize]) -> bool,
) -> Result<(Allocation, Rat)> {
    let n = instance.num_buyers();
    let m = instance.num_goods();
    if profile.len() != n {
        return Err(Error::Precondition("profile size mismatch".into()));
    }
    if n > MAX_BRUTE_FORCE_BUYERS || m > MAX_BRUTE_FORCE_GOODS {
        return Err(Error::CapExceeded {
            what: "brute-force allocation search",
            needed: (1u128 << m).pow(n as u32),
            cap: (1u128 << MAX_BRUTE_FORCE_GOODS).pow(MAX_BRUTE_FORCE_BUYERS as u32),
        });
    }

    // A welfare maximizer never needs goods outside a buyer's universe
    // (dropping them never lowers value and never raises cost), and the
    // lex-smallest maximizer provably avoids them, so enumerate universe
    // subsets only. Values are precomputed per candidate bundle.
    let mut candidates: Vec<Vec<(GoodSet, Rat)>> = Vec::with_capacity(n);
    for v in profile {
        let mut row = Vec::new();
        for s in v.universe().subsets() {
            row.push((s, v.value(s)?));
        }
        row.sort_by_key(|(s, _)| s.bits());
        candidates.push(row);
    }
    let capacity: Vec<usize> = instance.goods().iter().map(|g| g.cost.capacity()).collect();
    let marginals: Vec<Vec<Rat>> = instance
        .goods()
        .iter()
        .map(|g| {
            (1..=g.cost.capacity())
                .map(|t| g.cost.marginal(t).finite().expect("finite").clone())
                .collect()
        })
        .collect();

    struct Search<'a, F: Fn(&[usize]) -> bool> {
        candidates: &'a [Vec<(GoodSet, Rat)>],
        capacity: &'a [usize],
        marginals: &'a [Vec<Rat>],
        admit: F,
        counts: Vec<usize>,
        chosen: Vec<GoodSet>,
        best: Option<(Rat, Vec<GoodSet>)>,
    }

    impl<F: Fn(&[usize]) -> bool> Search<'_, F> {
        fn run(&mut self, buyer: usize, value: Rat, cost: Rat) {
            if buyer == self.candidates.len() {
                if !(self.admit)(&self.counts) {
                    return;
                }
                let welfare = value - cost;
                if self.best.as_ref().is_none_or(|(w, _)| welfare > *w) {
                    self.best = Some((welfare, self.chosen.clone()));
                }
                return;
            }
            'bundle: for (s, v) in &self.candidates[buyer] {
                let mut extra = Rat::zero();
                for g in s.iter() {
                    if self.counts[g] + 1 > self.capacity[g] {
                        continue 'bundle; // unproducible copy
                    }
                    extra += self.marginals[g][self.counts[g]].clone();
                }
                for g in s.iter() {
                    self.counts[g] += 1;
                }
                self.chosen.push(*s);
                self.run(buyer + 1, value.clone() + v.clone(), cost.clone() + extra);
                self.chosen.pop();
                for g in s.iter() {
                    self.counts[g] -= 1;
                }
            }
        }
    }

    let mut search = Search {
        candidates: &candidates,
        capacity: &capacity,
        marginals: &marginals,
        admit,
        counts: vec![0; m],
        chosen: Vec::with_capacity(n),
        best: None,
    };
    search.run(0, Rat::zero(), Rat::zero());
    let (welfare, bundles) = search.best.ok_or_else(|| {
        Error::Precondition("no admissible allocation (filter rejected everything)".into())
    })?;
    Ok((Allocation::new(bundles), welfare))
}

/// Exact welfare-optimal allocation (the benchmark everything is measured
/// against).
pub fn brute_force_opt(instance: &Instance, profile: &[&Valuation]) -> Result<(Allocation, Rat)> {
    brute_force_opt_filtered(instance, profile, |_| true)
}
