//! JSON representations of instances, plans, and outcomes.
//!
//! Numbers are exact: a rational serializes as `{"num": "...", "den": "..."}`
//! with arbitrary-precision decimal strings, and an extended rational is
//! either that object or the string `"inf"` (or `"-inf"`). All maps are
//! `BTreeMap`s keyed by decimal good ids, so emission is deterministic:
//! equal values produce identical bytes.

use std::collections::BTreeMap;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use posted_market_core::mechanism::{ExpectationRecord, MechanismOutcome};
use posted_market_core::model::{CostSchedule, Good, Instance};
use posted_market_core::pricing::{PlanEntry, PricePlan, SupplySpec};
use posted_market_core::valuation::{AdditiveClause, ProfileDistribution, Valuation};
use posted_market_core::{ExtRat, GoodId, Rat};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatDto {
    pub num: String,
    pub den: String,
}

/// A finite rational or the strings `"inf"` / `"-inf"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtRatDto {
    Word(String),
    Finite(RatDto),
}

pub fn rat_to_dto(r: &Rat) -> RatDto {
    RatDto {
        num: r.numer().to_string(),
        den: r.denom().to_string(),
    }
}

pub fn rat_from_dto(d: &RatDto) -> Result<Rat> {
    let num = BigInt::from_str(d.num.trim()).with_context(|| format!("bad numerator {:?}", d.num))?;
    let den = BigInt::from_str(d.den.trim()).with_context(|| format!("bad denominator {:?}", d.den))?;
    if den <= BigInt::from(0) {
        bail!("denominator must be positive, got {}", den);
    }
    Ok(Rat::new(num, den))
}

pub fn ext_to_dto(e: &ExtRat) -> ExtRatDto {
    match e {
        ExtRat::PosInf => ExtRatDto::Word("inf".to_string()),
        ExtRat::NegInf => ExtRatDto::Word("-inf".to_string()),
        ExtRat::Finite(r) => ExtRatDto::Finite(rat_to_dto(r)),
    }
}

pub fn ext_from_dto(d: &ExtRatDto) -> Result<ExtRat> {
    match d {
        ExtRatDto::Word(w) => match w.as_str() {
            "inf" => Ok(ExtRat::PosInf),
            "-inf" => Ok(ExtRat::NegInf),
            other => bail!("unknown extended-rational token {:?}", other),
        },
        ExtRatDto::Finite(r) => Ok(ExtRat::Finite(rat_from_dto(r)?)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ValuationDto {
    /// Weights keyed by decimal good id; absent goods weigh zero.
    Additive { weights: BTreeMap<String, RatDto> },
    /// Max over additive clauses.
    Xos { clauses: Vec<BTreeMap<String, RatDto>> },
    /// Explicit values over subsets of `universe`: `values[k]` is the
    /// subset whose bitmask over universe positions is `k`.
    Table {
        universe: Vec<GoodId>,
        values: Vec<RatDto>,
    },
}

fn weights_to_dto(c: &AdditiveClause) -> BTreeMap<String, RatDto> {
    c.weights()
        .iter()
        .map(|(g, w)| (g.to_string(), rat_to_dto(w)))
        .collect()
}

fn weights_from_dto(w: &BTreeMap<String, RatDto>) -> Result<BTreeMap<GoodId, Rat>> {
    w.iter()
        .map(|(k, v)| {
            let g: GoodId = k
                .parse()
                .with_context(|| format!("weight key {:?} is not a good id", k))?;
            Ok((g, rat_from_dto(v)?))
        })
        .collect()
}

pub fn valuation_to_dto(v: &Valuation) -> ValuationDto {
    match v {
        Valuation::Additive(c) => ValuationDto::Additive {
            weights: weights_to_dto(c),
        },
        Valuation::Xos(cs) => ValuationDto::Xos {
            clauses: cs.iter().map(weights_to_dto).collect(),
        },
        Valuation::Table { universe, values } => ValuationDto::Table {
            universe: universe.clone(),
            values: values.iter().map(rat_to_dto).collect(),
        },
    }
}

pub fn valuation_from_dto(d: &ValuationDto) -> Result<Valuation> {
    Ok(match d {
        ValuationDto::Additive { weights } => Valuation::additive(weights_from_dto(weights)?)?,
        ValuationDto::Xos { clauses } => Valuation::xos(
            clauses
                .iter()
                .map(|c| Ok(AdditiveClause::new(weights_from_dto(c)?)?))
                .collect::<Result<Vec<_>>>()?,
        )?,
        ValuationDto::Table { universe, values } => Valuation::table(
            universe.clone(),
            values.iter().map(rat_from_dto).collect::<Result<Vec<_>>>()?,
        )?,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodDto {
    pub id: GoodId,
    /// Marginal cost of the n-th copy, in order; shorter lists mean a hard
    /// supply limit (further copies are unproducible).
    pub marginal_costs: Vec<ExtRatDto>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportPointDto {
    pub prob: RatDto,
    pub valuation: ValuationDto,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuyerDto {
    pub support: Vec<SupportPointDto>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDto {
    pub goods: Vec<GoodDto>,
    pub buyers: Vec<BuyerDto>,
}

pub fn instance_to_dto(inst: &Instance) -> InstanceDto {
    InstanceDto {
        goods: inst
            .goods()
            .iter()
            .map(|g| GoodDto {
                id: g.id,
                marginal_costs: g.cost.marginals().iter().map(ext_to_dto).collect(),
            })
            .collect(),
        buyers: inst
            .buyers()
            .buyers()
            .iter()
            .map(|support| BuyerDto {
                support: support
                    .iter()
                    .map(|(p, v)| SupportPointDto {
                        prob: rat_to_dto(p),
                        valuation: valuation_to_dto(v),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn instance_from_dto(dto: &InstanceDto) -> Result<Instance> {
    let mut goods = Vec::with_capacity(dto.goods.len());
    for g in &dto.goods {
        let marginals = g
            .marginal_costs
            .iter()
            .map(ext_from_dto)
            .collect::<Result<Vec<_>>>()
            .with_context(|| format!("good {}", g.id))?;
        goods.push(Good {
            id: g.id,
            cost: CostSchedule::new(marginals).with_context(|| format!("good {}", g.id))?,
        });
    }
    goods.sort_by_key(|g| g.id);
    let buyers = dto
        .buyers
        .iter()
        .map(|b| {
            b.support
                .iter()
                .map(|s| Ok((rat_from_dto(&s.prob)?, valuation_from_dto(&s.valuation)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance::new(goods, ProfileDistribution::new(buyers)?)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyDto {
    Fixed(usize),
    /// Probability mass over supply counts, ascending, summing to one.
    Random(Vec<(usize, RatDto)>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntryDto {
    pub price: RatDto,
    pub supply: SupplyDto,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDto {
    /// Keyed by decimal good id; goods missing from the plan are not for
    /// sale.
    pub entries: BTreeMap<String, PlanEntryDto>,
    pub provenance: String,
}

pub fn plan_to_dto(plan: &PricePlan) -> PlanDto {
    PlanDto {
        entries: plan
            .entries
            .iter()
            .map(|(g, e)| {
                let supply = match &e.supply {
                    SupplySpec::Fixed(k) => SupplyDto::Fixed(*k),
                    SupplySpec::Random(pmf) => SupplyDto::Random(
                        pmf.iter().map(|(k, p)| (*k, rat_to_dto(p))).collect(),
                    ),
                };
                (
                    g.to_string(),
                    PlanEntryDto {
                        price: rat_to_dto(&e.price),
                        supply,
                    },
                )
            })
            .collect(),
        provenance: plan.provenance.clone(),
    }
}

pub fn plan_from_dto(dto: &PlanDto) -> Result<PricePlan> {
    let mut entries = BTreeMap::new();
    for (k, e) in &dto.entries {
        let g: GoodId = k
            .parse()
            .with_context(|| format!("plan key {:?} is not a good id", k))?;
        let supply = match &e.supply {
            SupplyDto::Fixed(n) => SupplySpec::Fixed(*n),
            SupplyDto::Random(pmf) => SupplySpec::Random(
                pmf.iter()
                    .map(|(n, p)| Ok((*n, rat_from_dto(p)?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        entries.insert(
            g,
            PlanEntry {
                price: rat_from_dto(&e.price)?,
                supply,
            },
        );
    }
    Ok(PricePlan::new(entries, dto.provenance.clone())?)
}

/// One realized run, with the inputs that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeDto {
    pub mechanism: String,
    pub order: Vec<usize>,
    /// Realized supply per good (decimal id keys).
    pub supply: BTreeMap<String, usize>,
    /// Bundle per buyer, ascending good ids.
    pub allocation: Vec<Vec<GoodId>>,
    pub sold: Vec<usize>,
    pub produced: Vec<usize>,
    pub revenue: RatDto,
    pub production_cost: RatDto,
    pub buyer_surplus: RatDto,
    pub profit: RatDto,
    pub welfare: RatDto,
}

pub fn outcome_to_dto(
    mechanism: &str,
    order: &[usize],
    supply: &BTreeMap<GoodId, usize>,
    out: &MechanismOutcome,
) -> OutcomeDto {
    OutcomeDto {
        mechanism: mechanism.to_string(),
        order: order.to_vec(),
        supply: supply.iter().map(|(g, k)| (g.to_string(), *k)).collect(),
        allocation: out
            .allocation
            .bundles()
            .iter()
            .map(|b| b.iter().collect())
            .collect(),
        sold: out.sold.clone(),
        produced: out.produced.clone(),
        revenue: rat_to_dto(&out.revenue),
        production_cost: rat_to_dto(&out.production_cost),
        buyer_surplus: rat_to_dto(&out.buyer_surplus),
        profit: rat_to_dto(&out.profit),
        welfare: rat_to_dto(&out.welfare),
    }
}

/// Expectations of a plan under an arrival policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectationDto {
    pub mechanism: String,
    pub order_policy: String,
    pub expected_welfare: RatDto,
    pub expected_revenue: RatDto,
    pub expected_cost: RatDto,
    pub expected_surplus: RatDto,
    pub expected_profit: RatDto,
    /// Expected welfare of each arrival order considered (worst-case and
    /// uniform policies enumerate all of them).
    pub per_order: Vec<(Vec<usize>, RatDto)>,
    pub chosen_order: Option<Vec<usize>>,
    pub runs: String,
    pub exact: bool,
}

pub fn expectation_to_dto(
    mechanism: &str,
    order_policy: &str,
    rec: &ExpectationRecord,
) -> ExpectationDto {
    ExpectationDto {
        mechanism: mechanism.to_string(),
        order_policy: order_policy.to_string(),
        expected_welfare: rat_to_dto(&rec.expected_welfare),
        expected_revenue: rat_to_dto(&rec.expected_revenue),
        expected_cost: rat_to_dto(&rec.expected_cost),
        expected_surplus: rat_to_dto(&rec.expected_surplus),
        expected_profit: rat_to_dto(&rec.expected_profit),
        per_order: rec
            .per_order
            .iter()
            .map(|(o, w)| (o.clone(), rat_to_dto(w)))
            .collect(),
        chosen_order: rec.chosen_order.clone(),
        runs: rec.runs.to_string(),
        exact: rec.exact,
    }
}

/// Pretty JSON with a trailing newline; deterministic for our DTOs (all
/// maps are ordered).
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
