//! Goods, convex cost schedules, market instances, and allocations.
//!
//! A good's production cost is a schedule of per-copy marginals
//! `c(1) <= c(2) <= ...`; convexity of the aggregate cost is exactly
//! non-decreasing marginals. Copies beyond the schedule cost `+inf`, which
//! is how hard supply limits are encoded (`k` zero marginals = "k free
//! units in stock, no more can be made").

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::rational::{ExtRat, Rat};
use crate::set::{GoodSet, MAX_GOODS};
use crate::valuation::{ProfileDistribution, Valuation};
use crate::{BuyerId, Error, GoodId, Result};

/// Non-decreasing, non-negative per-copy marginal costs.
///
/// `marginals[t]` is the cost of producing copy `t+1`. Copies past the end
/// of the schedule are unproducible (`+inf` marginal).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostSchedule {
    marginals: Vec<ExtRat>,
}

impl CostSchedule {
    pub fn new(marginals: Vec<ExtRat>) -> Result<Self> {
        for (i, m) in marginals.iter().enumerate() {
            match m {
                ExtRat::NegInf => return Err(Error::NegativeMarginal { index: i }),
                ExtRat::Finite(r) if r.is_negative() => {
                    return Err(Error::NegativeMarginal { index: i })
                }
                _ => {}
            }
            if i > 0 && marginals[i - 1] > *m {
                return Err(Error::NonConvexSchedule { index: i });
            }
        }
        Ok(CostSchedule { marginals })
    }

    /// `k` copies in stock at zero cost, nothing producible beyond.
    pub fn limited_supply(k: usize) -> Self {
        CostSchedule {
            marginals: vec![ExtRat::zero(); k],
        }
    }

    /// Schedule from finite marginals only.
    pub fn from_finite(marginals: Vec<Rat>) -> Result<Self> {
        CostSchedule::new(marginals.into_iter().map(ExtRat::Finite).collect())
    }

    pub fn marginals(&self) -> &[ExtRat] {
        &self.marginals
    }

    /// Marginal cost `c(n)` of the `n`-th copy (1-based). Beyond the
    /// schedule this is `+inf`.
    pub fn marginal(&self, n: usize) -> ExtRat {
        assert!(n >= 1, "copies are 1-based");
        self.marginals
            .get(n - 1)
            .cloned()
            .unwrap_or(ExtRat::PosInf)
    }

    /// Number of copies with finite marginal cost.
    pub fn capacity(&self) -> usize {
        self.marginals
            .iter()
            .take_while(|m| m.is_finite())
            .count()
    }

    /// Aggregate cost `C(t)` of producing `t` copies.
    pub fn aggregate(&self, t: usize) -> ExtRat {
        if t > self.capacity() {
            return ExtRat::PosInf;
        }
        let mut sum = Rat::zero();
        for m in &self.marginals[..t] {
            // Finite by the capacity check above.
            sum += m.finite().expect("finite prefix").clone();
        }
        ExtRat::Finite(sum)
    }

    /// Aggregate cost at a fractional copy count, by linear interpolation
    /// between integer points: `C(t + f) = C(t) + f * c(t+1)`.
    ///
    /// This is the convex piecewise-linear extension used when comparing an
    /// expected cost against the cost of the expected (possibly fractional)
    /// quantity.
    pub fn aggregate_at(&self, t: &Rat) -> Result<ExtRat> {
        if t.is_negative() {
            return Err(Error::Precondition(
                "fractional copy count must be non-negative".to_string(),
            ));
        }
        let floor = t.floor();
        let whole = floor
            .to_integer()
            .to_usize()
            .ok_or_else(|| Error::Precondition("copy count out of range".to_string()))?;
        let frac = t - floor;
        let base = self.aggregate(whole);
        if frac.is_zero() {
            return Ok(base);
        }
        Ok(base + ExtRat::Finite(frac) * self.marginal(whole + 1))
    }
}

/// How much steeper than linear a schedule is, measured as
/// `min { k*c(k) / C(k) : 3 <= k <= k_max }`.
///
/// A ratio of 1 is linear cost; higher means the tail marginals dominate.
/// Terms with `C(k) = 0` contribute `+inf` (free copies make any allocation
/// of them profitable), so an all-zero schedule maps to `+inf`.
pub fn gamma_convexity(schedule: &CostSchedule, k_max: usize) -> Result<ExtRat> {
    if k_max < 3 {
        return Err(Error::Precondition(
            "gamma-convexity needs k_max >= 3".to_string(),
        ));
    }
    if schedule.capacity() < k_max {
        return Err(Error::Precondition(
            "gamma-convexity needs finite marginals through k_max".to_string(),
        ));
    }
    let mut best = ExtRat::PosInf;
    for k in 3..=k_max {
        let c_k = schedule.marginal(k);
        let agg = schedule.aggregate(k);
        let term = match agg {
            ExtRat::Finite(ref a) if a.is_zero() => ExtRat::PosInf,
            ExtRat::Finite(a) => {
                let num = ExtRat::Finite(Rat::from_integer(k.into())) * c_k;
                num / ExtRat::Finite(a)
            }
            _ => unreachable!("capacity checked above"),
        };
        if term < best {
            best = term;
        }
    }
    Ok(best)
}

/// A good for sale: its id within the instance and its production costs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Good {
    pub id: GoodId,
    pub cost: CostSchedule,
}

/// A market: goods with cost schedules plus a product prior over buyer
/// valuations. Full-information markets are the special case where every
/// buyer's distribution has a single support point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    goods: Vec<Good>,
    buyers: ProfileDistribution,
}

impl Instance {
    pub fn new(goods: Vec<Good>, buyers: ProfileDistribution) -> Result<Self> {
        if goods.len() > MAX_GOODS {
            return Err(Error::Precondition("too many goods".to_string()));
        }
        for (i, g) in goods.iter().enumerate() {
            if g.id != i {
                return Err(Error::Precondition(
                    "good ids must be contiguous from 0 in order".to_string(),
                ));
            }
        }
        let all = GoodSet::full(goods.len());
        for dist in buyers.buyers() {
            for (_, v) in dist {
                if !v.universe().is_subset_of(all) {
                    let bad = v.universe().minus(all).iter().next().unwrap();
                    return Err(Error::UnknownGood(bad));
                }
            }
        }
        Ok(Instance { goods, buyers })
    }

    /// A market with known (deterministic) valuations.
    pub fn full_information(goods: Vec<Good>, profile: Vec<Valuation>) -> Result<Self> {
        Instance::new(goods, ProfileDistribution::point(profile)?)
    }

    pub fn goods(&self) -> &[Good] {
        &self.goods
    }

    pub fn good(&self, id: GoodId) -> Result<&Good> {
        self.goods.get(id).ok_or(Error::UnknownGood(id))
    }

    pub fn num_goods(&self) -> usize {
        self.goods.len()
    }

    pub fn num_buyers(&self) -> usize {
        self.buyers.num_buyers()
    }

    pub fn all_goods(&self) -> GoodSet {
        GoodSet::full(self.goods.len())
    }

    pub fn buyers(&self) -> &ProfileDistribution {
        &self.buyers
    }

    pub fn is_full_information(&self) -> bool {
        self.buyers.is_point()
    }

    /// The deterministic profile of a full-information market.
    pub fn fixed_profile(&self) -> Option<Vec<&Valuation>> {
        self.buyers.point_profile()
    }
}

/// Who gets what: one bundle per buyer. Goods may appear in several
/// bundles (multiple copies get produced).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    bundles: Vec<GoodSet>,
}

impl Allocation {
    pub fn empty(num_buyers: usize) -> Self {
        Allocation {
            bundles: vec![GoodSet::EMPTY; num_buyers],
        }
    }

    pub fn new(bundles: Vec<GoodSet>) -> Self {
        Allocation { bundles }
    }

    pub fn bundles(&self) -> &[GoodSet] {
        &self.bundles
    }

    pub fn bundle(&self, buyer: BuyerId) -> GoodSet {
        self.bundles[buyer]
    }

    pub fn set_bundle(&mut self, buyer: BuyerId, s: GoodSet) {
        self.bundles[buyer] = s;
    }

    pub fn remove(&mut self, buyer: BuyerId, good: GoodId) {
        self.bundles[buyer].remove(good);
    }

    /// Copies of `good` allocated across all buyers.
    pub fn sold_count(&self, good: GoodId) -> usize {
        self.bundles.iter().filter(|b| b.contains(good)).count()
    }

    /// Per-good copy counts, indexed by good id.
    pub fn sold_counts(&self, num_goods: usize) -> Vec<usize> {
        let mut counts = vec![0usize; num_goods];
        for b in &self.bundles {
            for g in b.iter() {
                counts[g] += 1;
            }
        }
        counts
    }

    /// Buyers holding `good`, ascending.
    pub fn holders(&self, good: GoodId) -> Vec<BuyerId> {
        self.bundles
            .iter()
            .enumerate()
            .filter(|(_, b)| b.contains(good))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Social welfare of an allocation under a concrete valuation profile:
/// total buyer value minus total production cost. Allocating more copies
/// than a schedule can produce yields `-inf` (infeasible).
pub fn social_welfare(
    instance: &Instance,
    profile: &[&Valuation],
    alloc: &Allocation,
) -> Result<ExtRat> {
    if profile.len() != instance.num_buyers() || alloc.bundles().len() != profile.len() {
        return Err(Error::Precondition(
            "profile/allocation size mismatch".to_string(),
        ));
    }
    let mut value = Rat::zero();
    for (v, b) in profile.iter().zip(alloc.bundles()) {
        value += v.value(*b)?;
    }
    let mut total = ExtRat::Finite(value);
    for (good, count) in instance.goods().iter().zip(alloc.sold_counts(instance.num_goods())) {
        total = total - good.cost.aggregate(count);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn sched(ms: &[i64]) -> CostSchedule {
        CostSchedule::from_finite(ms.iter().map(|&m| rat(m)).collect()).unwrap()
    }

    #[test]
    fn rejects_decreasing_marginals() {
        let err = CostSchedule::from_finite(vec![rat(3), rat(1)]).unwrap_err();
        assert_eq!(err, Error::NonConvexSchedule { index: 1 });
    }

    #[test]
    fn rejects_finite_after_infinite() {
        let err = CostSchedule::new(vec![ExtRat::PosInf, ExtRat::from_int(1)]).unwrap_err();
        assert_eq!(err, Error::NonConvexSchedule { index: 1 });
    }

    #[test]
    fn aggregate_and_capacity() {
        let c = CostSchedule::new(vec![
            ExtRat::from_int(1),
            ExtRat::from_int(3),
            ExtRat::PosInf,
        ])
        .unwrap();
        assert_eq!(c.capacity(), 2);
        assert_eq!(c.aggregate(0), ExtRat::zero());
        assert_eq!(c.aggregate(2), ExtRat::from_int(4));
        assert_eq!(c.aggregate(3), ExtRat::PosInf);
        assert_eq!(c.marginal(7), ExtRat::PosInf);
    }

    #[test]
    fn limited_supply_is_free_then_unproducible() {
        let c = CostSchedule::limited_supply(2);
        assert_eq!(c.aggregate(2), ExtRat::zero());
        assert_eq!(c.aggregate(3), ExtRat::PosInf);
    }

    #[test]
    fn interpolated_aggregate() {
        // C(1.5) on marginals (1,3): 1 + 0.5*3 = 5/2.
        let c = sched(&[1, 3]);
        assert_eq!(
            c.aggregate_at(&ratio(3, 2)).unwrap(),
            ExtRat::Finite(ratio(5, 2))
        );
        // Fractional part beyond capacity is unproducible.
        let lim = CostSchedule::limited_supply(1);
        assert_eq!(lim.aggregate_at(&ratio(3, 2)).unwrap(), ExtRat::PosInf);
        assert_eq!(lim.aggregate_at(&rat(1)).unwrap(), ExtRat::zero());
    }

    #[test]
    fn gamma_of_increasing_and_flat_marginals() {
        // c(n) = 2n: C(k) = k(k+1), k*c(k)/C(k) = 2k/(k+1) -> min at k=3 is 3/2.
        let c = sched(&[2, 4, 6, 8]);
        assert_eq!(
            gamma_convexity(&c, 4).unwrap(),
            ExtRat::Finite(ratio(3, 2))
        );
        // Constant marginals: k*c/(kc) = 1 everywhere.
        let flat = sched(&[5, 5, 5]);
        assert_eq!(gamma_convexity(&flat, 3).unwrap(), ExtRat::from_int(1));
    }

    #[test]
    fn gamma_of_quadratic_marginals_at_three() {
        // c(n) = n^2: 3*9/(1+4+9) = 27/14.
        let c = sched(&[1, 4, 9]);
        assert_eq!(
            gamma_convexity(&c, 3).unwrap(),
            ExtRat::Finite(ratio(27, 14))
        );
    }

    #[test]
    fn gamma_with_free_prefix_is_infinite() {
        let c = CostSchedule::limited_supply(4);
        assert_eq!(gamma_convexity(&c, 4).unwrap(), ExtRat::PosInf);
    }

    #[test]
    fn gamma_needs_three_copies() {
        let c = sched(&[1, 2]);
        assert!(gamma_convexity(&c, 2).is_err());
        assert!(gamma_convexity(&sched(&[1, 2, 3]), 4).is_err());
    }
}
