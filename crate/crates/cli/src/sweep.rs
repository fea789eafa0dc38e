//! Batch experiments: a config file describes generated markets and the
//! pricing rule to exercise on each; the output is one CSV row per market
//! with the measured welfare ratio and a pass flag against the rule's
//! guarantee. Per-row seeds are derived from the base seed by index, so
//! rows are independent and the whole file is reproducible byte for byte.

use anyhow::{bail, Context, Result};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use posted_market_core::mechanism::{
    expected_outcome, sampled_outcome, verify_guess_price_guarantee, ArrivalPolicy,
    ExpectationRecord, MechanismKind,
};
use posted_market_core::model::Instance;
use posted_market_core::pricing::{
    alpha_boundedness, bayesian_otf_prices, check_structural_conditions, commitment_prices,
    euler_upper_bound, guarantee_factor, log2_ceil, subadditive_otf_prices, summarize_benchmark,
    BenchmarkSummary,
};
use posted_market_core::rational::{rat, Rat};
use posted_market_core::ExtRat;

use crate::generator::{gen_instance, GenSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Otf,
    Commitment,
    Subadditive,
    Guess,
}

impl Rule {
    fn mechanism(self) -> MechanismKind {
        match self {
            Rule::Commitment => MechanismKind::Commitment,
            _ => MechanismKind::Otf,
        }
    }

    fn mechanism_name(self) -> &'static str {
        match self.mechanism() {
            MechanismKind::Otf => "otf",
            MechanismKind::Commitment => "commitment",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Otf => "otf",
            Rule::Commitment => "commitment",
            Rule::Subadditive => "subadditive",
            Rule::Guess => "guess",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    /// Buyers arrive in index order.
    Fixed,
    /// Expectation over a uniformly random order.
    Random,
    /// The order minimizing expected welfare.
    Worst,
}

impl OrderPolicy {
    fn arrival(self, n: usize) -> ArrivalPolicy {
        match self {
            OrderPolicy::Fixed => ArrivalPolicy::Fixed((0..n).collect()),
            OrderPolicy::Random => ArrivalPolicy::UniformRandom,
            OrderPolicy::Worst => ArrivalPolicy::WorstCase,
        }
    }
}

impl fmt::Display for OrderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderPolicy::Fixed => "fixed",
            OrderPolicy::Random => "random",
            OrderPolicy::Worst => "worst",
        })
    }
}

fn worst() -> OrderPolicy {
    OrderPolicy::Worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub instance_id: String,
    pub gen: GenSpec,
    pub rule: Rule,
    #[serde(default = "worst")]
    pub order_policy: OrderPolicy,
    /// When set, estimate by Monte Carlo with this many draws instead of
    /// exact enumeration (still seeded, still reproducible).
    #[serde(default)]
    pub samples: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base_seed: u64,
    pub rows: Vec<SweepRow>,
}

/// SplitMix64 finalizer over `base + index`; decorrelates per-row seeds
/// so neighbouring rows don't share generator streams.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct RowResult {
    expected_welfare: Rat,
    benchmark_welfare: Rat,
    alpha: Option<ExtRat>,
    pass: bool,
}

fn run_record(
    instance: &Instance,
    plan: &posted_market_core::pricing::PricePlan,
    kind: MechanismKind,
    row: &SweepRow,
    seed: u64,
    cap: u128,
) -> Result<ExpectationRecord> {
    let policy = row.order_policy.arrival(instance.num_buyers());
    Ok(match row.samples {
        Some(s) => sampled_outcome(instance, plan, kind, &policy, seed, s)?,
        None => expected_outcome(instance, plan, kind, &policy, cap)?,
    })
}

fn clause_summary(instance: &Instance, cap: u128) -> Result<BenchmarkSummary> {
    Ok(summarize_benchmark(
        instance,
        |p| posted_market_core::allocation::brute_force_opt(instance, p).map(|r| r.0),
        cap,
    )?)
}

fn eval_row(row: &SweepRow, seed: u64, cap: u128) -> Result<RowResult> {
    let instance = gen_instance(&row.gen, seed)?;
    match row.rule {
        Rule::Otf => {
            let summary = clause_summary(&instance, cap)?;
            let plan = bayesian_otf_prices(&summary)?;
            let conditions = check_structural_conditions(&instance, &plan, &summary, &rat(2))?;
            let rec = run_record(&instance, &plan, MechanismKind::Otf, row, seed, cap)?;
            let benchmark = summary.expected_alg_welfare.clone();
            let pass = conditions.all_pass
                && rat(2) * rec.expected_welfare.clone() >= benchmark;
            Ok(RowResult {
                expected_welfare: rec.expected_welfare,
                benchmark_welfare: benchmark,
                alpha: Some(alpha_boundedness(&summary)),
                pass,
            })
        }
        Rule::Commitment => {
            let summary = clause_summary(&instance, cap)?;
            let plan = commitment_prices(&summary)?;
            let otf_plan = bayesian_otf_prices(&summary)?;
            let dominance = plan.entries.iter().all(|(g, e)| {
                otf_plan
                    .entries
                    .get(g)
                    .is_some_and(|o| e.price <= o.price)
            });
            let alpha = alpha_boundedness(&summary);
            let factor = guarantee_factor(&alpha);
            let rec = run_record(&instance, &plan, MechanismKind::Commitment, row, seed, cap)?;
            let benchmark = summary.expected_alg_welfare.clone();
            let claimed = alpha >= ExtRat::from_int(2);
            let pass = dominance
                && (!claimed || rec.expected_welfare >= factor * benchmark.clone());
            Ok(RowResult {
                expected_welfare: rec.expected_welfare,
                benchmark_welfare: benchmark,
                alpha: Some(alpha),
                pass,
            })
        }
        Rule::Subadditive => {
            let plan = subadditive_otf_prices(
                &instance,
                |p| posted_market_core::allocation::brute_force_opt(&instance, p).map(|r| r.0),
                cap,
            )?;
            let support = instance.buyers().enumerate_support(cap)?;
            let mut benchmark = Rat::zero();
            for (q, profile) in &support {
                let (_, sw) =
                    posted_market_core::allocation::brute_force_opt(&instance, profile)?;
                benchmark += q * sw;
            }
            let rec = run_record(&instance, &plan, MechanismKind::Otf, row, seed, cap)?;
            let m = instance.num_goods();
            let denom = rat(4) * euler_upper_bound() * rat(log2_ceil(m.max(2)) as i64);
            let pass = rec.expected_welfare.clone() * denom >= benchmark;
            Ok(RowResult {
                expected_welfare: rec.expected_welfare,
                benchmark_welfare: benchmark,
                alpha: None,
                pass,
            })
        }
        Rule::Guess => {
            if row.order_policy != OrderPolicy::Worst {
                bail!(
                    "row {}: the guess rule is verified under the worst arrival order only",
                    row.instance_id
                );
            }
            let verdict = verify_guess_price_guarantee(&instance, cap)?;
            Ok(RowResult {
                expected_welfare: verdict.expected_welfare,
                benchmark_welfare: verdict.sw_opt,
                alpha: None,
                pass: verdict.pass,
            })
        }
    }
}

fn csv_cell(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

pub const CSV_HEADER: &str =
    "instance_id,rule,mechanism,order_policy,expected_welfare,benchmark_welfare,ratio,alpha,pass";

/// Run every row and emit the results table. Deterministic for a fixed
/// config: per-row seeds derive from `base_seed` and the row index.
pub fn run_sweep(config: &SweepConfig, cap: u128) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, row) in config.rows.iter().enumerate() {
        let seed = mix_seed(config.base_seed, i as u64);
        let res = eval_row(row, seed, cap)
            .with_context(|| format!("row {} ({})", i, row.instance_id))?;
        let ratio = if res.benchmark_welfare.is_positive() {
            (res.expected_welfare.clone() / res.benchmark_welfare.clone()).to_string()
        } else {
            String::new()
        };
        let alpha = res.alpha.map(|a| a.to_string()).unwrap_or_default();
        let cells = [
            csv_cell(&row.instance_id),
            row.rule.to_string(),
            row.rule.mechanism_name().to_string(),
            row.order_policy.to_string(),
            res.expected_welfare.to_string(),
            res.benchmark_welfare.to_string(),
            ratio,
            alpha,
            res.pass.to_string(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}
