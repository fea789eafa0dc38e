//! Buyer valuations and the prior over them.
//!
//! Three classes, all monotone with `v(empty) = 0`:
//!
//! * `Additive` — one weight per good.
//! * `Xos` — max over additive clauses (fractionally subadditive). This is
//!   the class the greedy allocator and the posted-price guarantees target.
//! * `Table` — explicit values over subsets of a declared universe; the
//!   representation for general subadditive valuations.
//!
//! The demand oracle ("best bundle at these prices") breaks ties the same
//! way everywhere: highest utility, then highest value, then largest
//! bundle, then lexicographically smallest id sequence. Value-before-size
//! is what the subadditive price reduction relies on; the rest pins down a
//! single deterministic answer.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::rational::Rat;
use crate::set::{GoodSet, MAX_GOODS};
use crate::{Error, GoodId, Result};

/// Upper bound on a table valuation's universe; the subadditivity check
/// enumerates 3^u set pairs.
pub const MAX_TABLE_UNIVERSE: usize = 16;

/// Non-negative weights on goods; absent goods weigh zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditiveClause {
    weights: BTreeMap<GoodId, Rat>,
}

impl AdditiveClause {
    pub fn new(weights: BTreeMap<GoodId, Rat>) -> Result<Self> {
        for (g, w) in &weights {
            if *g >= MAX_GOODS {
                return Err(Error::UnknownGood(*g));
            }
            if w.is_negative() {
                return Err(Error::InvalidValuation(format!(
                    "negative weight on good {}",
                    g
                )));
            }
        }
        Ok(AdditiveClause { weights })
    }

    pub fn weights(&self) -> &BTreeMap<GoodId, Rat> {
        &self.weights
    }

    /// Weight of `g` (zero when absent).
    pub fn weight(&self, g: GoodId) -> Rat {
        self.weights.get(&g).cloned().unwrap_or_else(Rat::zero)
    }

    /// Additive value of a bundle.
    pub fn value(&self, s: GoodSet) -> Rat {
        self.weights
            .iter()
            .filter(|(g, _)| s.contains(**g))
            .map(|(_, w)| w)
            .sum()
    }

    /// Goods mentioned by this clause.
    pub fn support(&self) -> GoodSet {
        GoodSet::from_iter(self.weights.keys().copied())
    }
}

/// A buyer's valuation over bundles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Valuation {
    Additive(AdditiveClause),
    Xos(Vec<AdditiveClause>),
    Table {
        /// Sorted, deduplicated good ids the table speaks about.
        universe: Vec<GoodId>,
        /// `values[m]` is the value of the subset encoded by bitmask `m`
        /// over `universe` positions; length `2^universe.len()`.
        values: Vec<Rat>,
    },
}

impl Valuation {
    pub fn additive(weights: BTreeMap<GoodId, Rat>) -> Result<Self> {
        Ok(Valuation::Additive(AdditiveClause::new(weights)?))
    }

    pub fn xos(clauses: Vec<AdditiveClause>) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::InvalidValuation(
                "XoS valuation needs at least one clause".to_string(),
            ));
        }
        Ok(Valuation::Xos(clauses))
    }

    pub fn table(universe: Vec<GoodId>, values: Vec<Rat>) -> Result<Self> {
        if universe.len() > MAX_TABLE_UNIVERSE {
            return Err(Error::InvalidValuation(format!(
                "table universe capped at {} goods",
                MAX_TABLE_UNIVERSE
            )));
        }
        if universe.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidValuation(
                "table universe must be sorted and deduplicated".to_string(),
            ));
        }
        if let Some(&max) = universe.last() {
            if max >= MAX_GOODS {
                return Err(Error::UnknownGood(max));
            }
        }
        if values.len() != 1usize << universe.len() {
            return Err(Error::InvalidValuation(format!(
                "table needs {} entries, got {}",
                1usize << universe.len(),
                values.len()
            )));
        }
        Ok(Valuation::Table { universe, values })
    }

    /// Goods this valuation can assign value to. For clause-structured
    /// valuations this is the union of clause supports; bundles may still
    /// include other goods (at value zero).
    pub fn universe(&self) -> GoodSet {
        match self {
            Valuation::Additive(c) => c.support(),
            Valuation::Xos(cs) => cs
                .iter()
                .fold(GoodSet::EMPTY, |acc, c| acc.union(c.support())),
            Valuation::Table { universe, .. } => GoodSet::from_iter(universe.iter().copied()),
        }
    }

    /// Whether `value` is defined on every subset of `avail`, not just on
    /// subsets of the universe. True for clause-structured valuations.
    pub fn values_all_goods(&self) -> bool {
        !matches!(self, Valuation::Table { .. })
    }

    fn table_index(universe: &[GoodId], s: GoodSet) -> Option<usize> {
        let mut idx = 0usize;
        let mut covered = GoodSet::EMPTY;
        for (pos, g) in universe.iter().enumerate() {
            if s.contains(*g) {
                idx |= 1 << pos;
                covered.insert(*g);
            }
        }
        (covered == s).then_some(idx)
    }

    /// Value of a bundle. For tables the bundle must lie inside the
    /// declared universe.
    pub fn value(&self, s: GoodSet) -> Result<Rat> {
        match self {
            Valuation::Additive(c) => Ok(c.value(s)),
            Valuation::Xos(cs) => Ok(cs
                .iter()
                .map(|c| c.value(s))
                .max()
                .expect("non-empty by construction")),
            Valuation::Table { universe, values } => {
                let idx = Self::table_index(universe, s)
                    .ok_or_else(|| Error::UnknownGood(s.minus(self.universe()).iter().next().unwrap()))?;
                Ok(values[idx].clone())
            }
        }
    }

    /// A utility-maximizing bundle from `available` at the given prices.
    ///
    /// Every available good must carry a price. Ties break by highest
    /// value, then largest bundle, then lexicographically smallest id
    /// sequence; the empty bundle (utility zero) is always in the running.
    ///
    /// For clause-structured valuations this does not enumerate subsets:
    /// per clause, the candidate "take every good whose clause weight
    /// covers its price" dominates — restricted to available goods — every
    /// bundle whose value that clause attains, under exactly this
    /// tie-break order. Tables enumerate their universe.
    pub fn demand(&self, prices: &BTreeMap<GoodId, Rat>, available: GoodSet) -> Result<GoodSet> {
        for g in available.iter() {
            if !prices.contains_key(&g) {
                return Err(Error::MissingPrice(g));
            }
        }
        let price_of = |s: GoodSet| -> Rat { s.iter().map(|g| prices[&g].clone()).sum() };

        let mut best_set = GoodSet::EMPTY;
        let mut best_utility = Rat::zero();
        let mut best_value = Rat::zero();
        let mut consider = |cand: GoodSet, value: Rat| {
            let utility = value.clone() - price_of(cand);
            let better = match utility.cmp(&best_utility) {
                core::cmp::Ordering::Greater => true,
                core::cmp::Ordering::Less => false,
                core::cmp::Ordering::Equal => match value.cmp(&best_value) {
                    core::cmp::Ordering::Greater => true,
                    core::cmp::Ordering::Less => false,
                    core::cmp::Ordering::Equal => match cand.len().cmp(&best_set.len()) {
                        core::cmp::Ordering::Greater => true,
                        core::cmp::Ordering::Less => false,
                        core::cmp::Ordering::Equal => {
                            cand.lex_cmp(best_set) == core::cmp::Ordering::Less
                        }
                    },
                },
            };
            if better {
                best_set = cand;
                best_utility = utility;
                best_value = value;
            }
        };

        match self {
            Valuation::Additive(_) | Valuation::Xos(_) => {
                let clauses: &[AdditiveClause] = match self {
                    Valuation::Additive(c) => core::slice::from_ref(c),
                    Valuation::Xos(cs) => cs,
                    _ => unreachable!(),
                };
                for clause in clauses {
                    let cand = GoodSet::from_iter(
                        available
                            .iter()
                            .filter(|&g| clause.weight(g) >= prices[&g]),
                    );
                    let value = self.value(cand)?;
                    consider(cand, value);
                }
            }
            Valuation::Table { .. } => {
                for cand in available.intersect(self.universe()).subsets() {
                    let value = self.value(cand)?;
                    consider(cand, value);
                }
            }
        }
        Ok(best_set)
    }

    /// A clause attaining the valuation's value on `bundle` (lowest index
    /// on ties). Additive valuations return their single clause; tables
    /// have no clause structure.
    pub fn xos_clause(&self, bundle: GoodSet) -> Result<&AdditiveClause> {
        match self {
            Valuation::Additive(c) => Ok(c),
            Valuation::Xos(cs) => {
                let mut best = &cs[0];
                let mut best_val = cs[0].value(bundle);
                for c in &cs[1..] {
                    let val = c.value(bundle);
                    if val > best_val {
                        best = c;
                        best_val = val;
                    }
                }
                Ok(best)
            }
            Valuation::Table { .. } => Err(Error::NotClauseStructured),
        }
    }

    /// Check the model's ground rules: normalization (`v(empty) = 0`),
    /// monotonicity, and — for tables — subadditivity. Clause-structured
    /// valuations satisfy all three by construction; tables get an
    /// exhaustive check with a witness in the error on failure.
    pub fn validate(&self) -> Result<()> {
        let (universe, values) = match self {
            Valuation::Additive(_) | Valuation::Xos(_) => return Ok(()),
            Valuation::Table { universe, values } => (universe, values),
        };
        if !values[0].is_zero() {
            return Err(Error::InvalidValuation(
                "table value of the empty set must be 0".to_string(),
            ));
        }
        let u = universe.len();
        // Monotone: adding one good never lowers value.
        for m in 0..values.len() {
            for pos in 0..u {
                if m & (1 << pos) == 0 {
                    let bigger = m | (1 << pos);
                    if values[bigger] < values[m] {
                        return Err(Error::InvalidValuation(format!(
                            "not monotone: v(mask {:#b}) < v(mask {:#b})",
                            bigger, m
                        )));
                    }
                }
            }
        }
        // Subadditive on disjoint pairs suffices once monotone.
        for s in 0..values.len() {
            let complement = !s & (values.len() - 1);
            let mut t = complement;
            loop {
                let sum = values[s].clone() + values[t].clone();
                if values[s | t] > sum {
                    return Err(Error::InvalidValuation(format!(
                        "not subadditive: v({:#b} | {:#b}) > v each part summed",
                        s, t
                    )));
                }
                if t == 0 {
                    break;
                }
                t = (t - 1) & complement;
            }
        }
        Ok(())
    }
}

/// Independent per-buyer priors with explicit finite support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileDistribution {
    buyers: Vec<Vec<(Rat, Valuation)>>,
}

impl ProfileDistribution {
    pub fn new(buyers: Vec<Vec<(Rat, Valuation)>>) -> Result<Self> {
        if buyers.is_empty() {
            return Err(Error::InvalidDistribution("no buyers".to_string()));
        }
        for (i, dist) in buyers.iter().enumerate() {
            if dist.is_empty() {
                return Err(Error::InvalidDistribution(format!(
                    "buyer {} has empty support",
                    i
                )));
            }
            let mut total = Rat::zero();
            for (p, v) in dist {
                if !p.is_positive() {
                    return Err(Error::InvalidDistribution(format!(
                        "buyer {} has a non-positive probability",
                        i
                    )));
                }
                total += p;
                v.validate()?;
            }
            if !total.is_one() {
                return Err(Error::InvalidDistribution(format!(
                    "buyer {} probabilities sum to {}, not 1",
                    i, total
                )));
            }
        }
        Ok(ProfileDistribution { buyers })
    }

    /// Deterministic profile as a single-point prior.
    pub fn point(profile: Vec<Valuation>) -> Result<Self> {
        ProfileDistribution::new(
            profile
                .into_iter()
                .map(|v| alloc::vec![(Rat::one(), v)])
                .collect(),
        )
    }

    pub fn buyers(&self) -> &[Vec<(Rat, Valuation)>] {
        &self.buyers
    }

    pub fn num_buyers(&self) -> usize {
        self.buyers.len()
    }

    pub fn is_point(&self) -> bool {
        self.buyers.iter().all(|d| d.len() == 1)
    }

    pub fn point_profile(&self) -> Option<Vec<&Valuation>> {
        self.is_point()
            .then(|| self.buyers.iter().map(|d| &d[0].1).collect())
    }

    /// Number of profiles in the support (product of per-buyer sizes).
    pub fn support_size(&self) -> u128 {
        self.buyers
            .iter()
            .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    /// Materialize the full support with exact probabilities, in
    /// lexicographic order of per-buyer support indices.
    pub fn enumerate_support(&self, cap: u128) -> Result<Vec<(Rat, Vec<&Valuation>)>> {
        let size = self.support_size();
        if size > cap {
            return Err(Error::CapExceeded {
                what: "profile support enumeration",
                needed: size,
                cap,
            });
        }
        let mut out = Vec::with_capacity(size as usize);
        let mut idx = alloc::vec![0usize; self.buyers.len()];
        loop {
            let mut prob = Rat::one();
            let mut profile = Vec::with_capacity(self.buyers.len());
            for (b, &i) in self.buyers.iter().zip(idx.iter()) {
                prob *= b[i].0.clone();
                profile.push(&b[i].1);
            }
            out.push((prob, profile));
            // Odometer increment.
            let mut pos = self.buyers.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.buyers[pos].len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// Draw one profile with the given RNG; per-buyer draws are
    /// independent. Exact inverse-CDF over the rational probabilities.
    pub fn sample_with<'a, R: RngCore>(&'a self, rng: &mut R) -> Vec<&'a Valuation> {
        self.buyers
            .iter()
            .map(|dist| {
                let x = rng.next_u64();
                let u = Rat::new(BigInt::from(x), BigInt::from(1u128 << 64));
                let mut cum = Rat::zero();
                for (p, v) in dist {
                    cum += p;
                    if u < cum {
                        return v;
                    }
                }
                &dist.last().expect("non-empty support").1
            })
            .collect()
    }

    /// Deterministic single draw from a seed.
    pub fn sample(&self, seed: u64) -> Vec<&Valuation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn clause(pairs: &[(GoodId, Rat)]) -> AdditiveClause {
        AdditiveClause::new(pairs.iter().cloned().collect()).unwrap()
    }

    fn unit_prices(ps: &[(GoodId, Rat)]) -> BTreeMap<GoodId, Rat> {
        ps.iter().cloned().collect()
    }

    #[test]
    fn xos_value_is_max_over_clauses() {
        // Two clauses over goods {0,1}: (3,0) and (1,1).
        let v = Valuation::xos(alloc::vec![
            clause(&[(0, rat(3))]),
            clause(&[(0, rat(1)), (1, rat(1))]),
        ])
        .unwrap();
        assert_eq!(v.value(GoodSet::from_iter([0])).unwrap(), rat(3));
        assert_eq!(v.value(GoodSet::from_iter([0, 1])).unwrap(), rat(3));
        assert_eq!(v.value(GoodSet::from_iter([1])).unwrap(), rat(1));
        assert_eq!(v.value(GoodSet::EMPTY).unwrap(), rat(0));
    }

    #[test]
    fn xos_clause_picks_lowest_index_on_tie() {
        let v = Valuation::xos(alloc::vec![
            clause(&[(0, rat(2))]),
            clause(&[(1, rat(2))]),
        ])
        .unwrap();
        // On {0,1} both clauses give 2; the first wins.
        let c = v.xos_clause(GoodSet::from_iter([0, 1])).unwrap();
        assert_eq!(c.weight(0), rat(2));
    }

    #[test]
    fn table_value_errors_outside_universe() {
        let v = Valuation::table(
            alloc::vec![0, 2],
            alloc::vec![rat(0), rat(1), rat(1), rat(2)],
        )
        .unwrap();
        assert_eq!(v.value(GoodSet::from_iter([0, 2])).unwrap(), rat(2));
        assert_eq!(v.value(GoodSet::from_iter([2])).unwrap(), rat(1));
        assert_eq!(
            v.value(GoodSet::from_iter([1])).unwrap_err(),
            Error::UnknownGood(1)
        );
    }

    #[test]
    fn demand_example_additive() {
        // v = (4, 2) additive, prices (2, 3): only good 0 is worth it.
        let v = Valuation::additive([(0usize, rat(4)), (1, rat(2))].into_iter().collect())
            .unwrap();
        let s = v
            .demand(
                &unit_prices(&[(0, rat(2)), (1, rat(3))]),
                GoodSet::full(2),
            )
            .unwrap();
        assert_eq!(s, GoodSet::from_iter([0]));
    }

    #[test]
    fn demand_tie_break_prefers_value_then_size() {
        // Weight equals price on both goods: utility 0 either way; biggest
        // value, then biggest bundle wins over the empty set.
        let v = Valuation::additive([(0usize, rat(2)), (1, rat(2))].into_iter().collect())
            .unwrap();
        let s = v
            .demand(
                &unit_prices(&[(0, rat(2)), (1, rat(2))]),
                GoodSet::full(2),
            )
            .unwrap();
        assert_eq!(s, GoodSet::from_iter([0, 1]));
    }

    #[test]
    fn demand_on_table_enumerates() {
        // min(|S|, 2) over 3 goods, price 1/4 each: any 2-set has utility
        // 3/2; lex-smallest of those is {0,1}.
        let universe = alloc::vec![0usize, 1, 2];
        let values: Vec<Rat> = (0..8u32)
            .map(|m| rat(core::cmp::min(m.count_ones(), 2) as i64))
            .collect();
        let v = Valuation::table(universe, values).unwrap();
        let prices = unit_prices(&[(0, ratio(1, 4)), (1, ratio(1, 4)), (2, ratio(1, 4))]);
        let s = v.demand(&prices, GoodSet::full(3)).unwrap();
        assert_eq!(s, GoodSet::from_iter([0, 1]));
    }

    #[test]
    fn demand_ignores_unavailable_goods() {
        let v = Valuation::additive([(0usize, rat(4)), (1, rat(9))].into_iter().collect())
            .unwrap();
        let s = v
            .demand(&unit_prices(&[(0, rat(2))]), GoodSet::from_iter([0]))
            .unwrap();
        assert_eq!(s, GoodSet::from_iter([0]));
    }

    #[test]
    fn validate_catches_bad_tables() {
        // Non-monotone: v({0}) = 2 > v({0,1}) = 1.
        let bad = Valuation::table(
            alloc::vec![0, 1],
            alloc::vec![rat(0), rat(2), rat(0), rat(1)],
        )
        .unwrap();
        assert!(matches!(bad.validate(), Err(Error::InvalidValuation(_))));
        // Superadditive: v({0,1}) = 5 > 2 + 2.
        let sup = Valuation::table(
            alloc::vec![0, 1],
            alloc::vec![rat(0), rat(2), rat(2), rat(5)],
        )
        .unwrap();
        assert!(matches!(sup.validate(), Err(Error::InvalidValuation(_))));
        // Unnormalized.
        let un = Valuation::table(alloc::vec![0], alloc::vec![rat(1), rat(1)]).unwrap();
        assert!(matches!(un.validate(), Err(Error::InvalidValuation(_))));
    }

    #[test]
    fn distribution_probabilities_must_sum_to_one() {
        let v = || Valuation::additive([(0usize, rat(1))].into_iter().collect()).unwrap();
        let err = ProfileDistribution::new(alloc::vec![alloc::vec![
            (ratio(1, 2), v()),
            (ratio(1, 3), v()),
        ]])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidDistribution(_)));
    }

    #[test]
    fn support_enumeration_is_lexicographic_with_exact_probs() {
        let v1 = Valuation::additive([(0usize, rat(1))].into_iter().collect()).unwrap();
        let v2 = Valuation::additive([(0usize, rat(2))].into_iter().collect()).unwrap();
        let d = ProfileDistribution::new(alloc::vec![
            alloc::vec![(ratio(1, 2), v1.clone()), (ratio(1, 2), v2.clone())],
            alloc::vec![(ratio(1, 3), v1.clone()), (ratio(2, 3), v2.clone())],
        ])
        .unwrap();
        let support = d.enumerate_support(100).unwrap();
        assert_eq!(support.len(), 4);
        assert_eq!(support[0].0, ratio(1, 6));
        assert_eq!(support[3].0, ratio(1, 3));
        let total: Rat = support.iter().map(|(p, _)| p.clone()).sum();
        assert_eq!(total, rat(1));
        assert!(d.enumerate_support(3).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_roughly_calibrated() {
        let v1 = Valuation::additive([(0usize, rat(1))].into_iter().collect()).unwrap();
        let v2 = Valuation::additive([(0usize, rat(2))].into_iter().collect()).unwrap();
        let d = ProfileDistribution::new(alloc::vec![alloc::vec![
            (ratio(1, 4), v1.clone()),
            (ratio(3, 4), v2.clone()),
        ]])
        .unwrap();
        assert_eq!(d.sample(42), d.sample(42));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut hits = 0u32;
        for _ in 0..n {
            if d.sample_with(&mut rng)[0] == &v2 {
                hits += 1;
            }
        }
        let freq = f64::from(hits) / f64::from(n);
        assert!((freq - 0.75).abs() < 0.01, "frequency {}", freq);
    }
}
