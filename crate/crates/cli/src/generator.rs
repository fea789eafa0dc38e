//! Seeded random market generators.
//!
//! A [`GenSpec`] describes a family of markets (buyer/good counts, a
//! valuation class, a cost family, prior support size); [`gen_instance`]
//! draws one deterministically from a seed. Costs are deterministic given
//! the spec; randomness goes into the valuations.

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use posted_market_core::model::{CostSchedule, Good, Instance};
use posted_market_core::rational::{rat, ratio, Rat};
use posted_market_core::valuation::{AdditiveClause, ProfileDistribution, Valuation};

use crate::format::{ext_from_dto, ExtRatDto};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ValuationSpec {
    /// Independent uniform integer weights per good.
    Additive,
    /// Max over 1..=max_clauses additive clauses.
    Xos { max_clauses: usize },
    /// `v(S) = min(sum of weights in S, budget)` as an explicit table.
    BudgetedAdditive,
    /// Each good covers a random subset of `items`; `v(S)` is the total
    /// weight of the items S covers. As an explicit table.
    Coverage { items: usize },
    /// Symmetric concave: `v(S) = f(|S|)` with decreasing increments.
    Symmetric,
}

impl ValuationSpec {
    /// Whether instances of this class are explicit tables (as opposed to
    /// clause-structured valuations).
    pub fn is_table(&self) -> bool {
        !matches!(self, ValuationSpec::Additive | ValuationSpec::Xos { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CostSpec {
    /// `stock` free copies, nothing beyond.
    LimitedSupply { stock: usize },
    /// Marginals `slope, 2*slope, ...` up to `copies`.
    Linear { slope: u64, copies: usize },
    /// Marginals `1, 4, 9, ...` up to `copies`.
    Quadratic { copies: usize },
    /// Explicit marginal schedule.
    Custom { marginals: Vec<ExtRatDto> },
}

impl CostSpec {
    pub fn schedule(&self) -> Result<CostSchedule> {
        Ok(match self {
            CostSpec::LimitedSupply { stock } => CostSchedule::limited_supply(*stock),
            CostSpec::Linear { slope, copies } => CostSchedule::from_finite(
                (1..=*copies).map(|n| rat(*slope as i64 * n as i64)).collect(),
            )?,
            CostSpec::Quadratic { copies } => CostSchedule::from_finite(
                (1..=*copies).map(|n| rat((n * n) as i64)).collect(),
            )?,
            CostSpec::Custom { marginals } => CostSchedule::new(
                marginals.iter().map(ext_from_dto).collect::<Result<Vec<_>>>()?,
            )?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenSpec {
    pub buyers: usize,
    pub goods: usize,
    pub valuation: ValuationSpec,
    pub cost: CostSpec,
    /// Valuations per buyer in the prior, uniformly weighted. 1 means a
    /// full-information market.
    #[serde(default = "one")]
    pub support_size: usize,
    /// Integer weights are drawn uniformly from 0..=value_scale.
    #[serde(default = "default_scale")]
    pub value_scale: u64,
}

fn one() -> usize {
    1
}

fn default_scale() -> u64 {
    16
}

fn draw_weight(rng: &mut ChaCha8Rng, scale: u64) -> Rat {
    rat(rng.gen_range(0..=scale) as i64)
}

fn draw_clause(rng: &mut ChaCha8Rng, m: usize, scale: u64) -> AdditiveClause {
    AdditiveClause::new((0..m).map(|g| (g, draw_weight(rng, scale))).collect())
        .expect("non-negative weights")
}

fn table_values<F: Fn(u64) -> Rat>(m: usize, value_of_mask: F) -> Vec<Rat> {
    (0..1u64 << m).map(value_of_mask).collect()
}

fn draw_valuation(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Result<Valuation> {
    let m = spec.goods;
    let scale = spec.value_scale;
    Ok(match &spec.valuation {
        ValuationSpec::Additive => Valuation::Additive(draw_clause(rng, m, scale)),
        ValuationSpec::Xos { max_clauses } => {
            if *max_clauses == 0 {
                bail!("xos needs at least one clause");
            }
            let k = rng.gen_range(1..=*max_clauses);
            Valuation::xos((0..k).map(|_| draw_clause(rng, m, scale)).collect())?
        }
        ValuationSpec::BudgetedAdditive => {
            let weights: Vec<Rat> = (0..m).map(|_| draw_weight(rng, scale)).collect();
            let budget = rat(rng.gen_range(1..=scale.max(1)) as i64);
            let values = table_values(m, |mask| {
                let sum: Rat = (0..m)
                    .filter(|g| mask & (1 << g) != 0)
                    .map(|g| weights[g].clone())
                    .sum();
                sum.min(budget.clone())
            });
            Valuation::table((0..m).collect(), values)?
        }
        ValuationSpec::Coverage { items } => {
            if *items == 0 {
                bail!("coverage needs at least one item");
            }
            let item_weights: Vec<Rat> = (0..*items).map(|_| draw_weight(rng, scale)).collect();
            let covers: Vec<u64> = (0..m).map(|_| rng.gen_range(0..1u64 << items)).collect();
            let values = table_values(m, |mask| {
                let mut covered = 0u64;
                for g in 0..m {
                    if mask & (1 << g) != 0 {
                        covered |= covers[g];
                    }
                }
                (0..*items)
                    .filter(|i| covered & (1 << i) != 0)
                    .map(|i| item_weights[i].clone())
                    .sum()
            });
            Valuation::table((0..m).collect(), values)?
        }
        ValuationSpec::Symmetric => {
            let mut deltas: Vec<Rat> = (0..m).map(|_| draw_weight(rng, scale)).collect();
            deltas.sort_by(|a, b| b.cmp(a));
            let mut by_size = vec![rat(0)];
            for d in deltas {
                let next = by_size.last().unwrap().clone() + d;
                by_size.push(next);
            }
            let values = table_values(m, |mask| by_size[mask.count_ones() as usize].clone());
            Valuation::table((0..m).collect(), values)?
        }
    })
}

/// Draw one market. The same `(spec, seed)` pair always produces the same
/// instance.
pub fn gen_instance(spec: &GenSpec, seed: u64) -> Result<Instance> {
    if spec.buyers == 0 || spec.goods == 0 {
        bail!("need at least one buyer and one good");
    }
    if spec.support_size == 0 {
        bail!("support_size must be at least 1");
    }
    let schedule = spec.cost.schedule().context("cost family")?;
    let goods: Vec<Good> = (0..spec.goods)
        .map(|id| Good {
            id,
            cost: schedule.clone(),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = ratio(1, spec.support_size as i64);
    let buyers: Vec<Vec<(Rat, Valuation)>> = (0..spec.buyers)
        .map(|_| {
            (0..spec.support_size)
                .map(|_| Ok((p.clone(), draw_valuation(&mut rng, spec)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance::new(goods, ProfileDistribution::new(buyers)?)?)
}
