//! Randomized invariant suites. Case `i` draws from its own ChaCha8 stream,
//! so results do not depend on execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generators::{perturb, random_calibrated_plan, random_transcript};
use crate::error::{CalibError, Result};
use crate::exec::{map_indexed, Execution};
use crate::metrics::{caldist_exact, ece, smce};
use crate::transport::{consolidate_general, consolidate_sparse, lower_caldist_grid, round_plan, technical_inequality_slacks};
use crate::types::{calibration_check, plan_calibration_check, plan_cost, Transcript, DEFAULT_TOLERANCE};

pub const SUITES: [&str; 5] = ["sandwich", "lipschitz", "rounding", "consolidation", "inequalities"];

/// Counterexamples kept verbatim in a report.
const MAX_REPORTED: usize = 20;
/// Inequality triples drawn per RNG stream.
const TRIPLE_BATCH: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Number of cases; `None` uses the suite's default budget.
    pub cases: Option<usize>,
    pub grid_k: usize,
    /// Per-step perturbation radius for `lipschitz`.
    pub perturbation: f64,
    pub exec: Execution,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            cases: None,
            grid_k: 1000,
            perturbation: 0.1,
            exec: Execution::best_available(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub failed: usize,
    /// First counterexamples, in case order.
    pub counterexamples: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

pub fn default_cases(suite: &str) -> Option<usize> {
    Some(match suite {
        "sandwich" | "lipschitz" => 500,
        "rounding" | "consolidation" => 200,
        "inequalities" => 1_000_000,
        _ => return None,
    })
}

pub fn property_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    property_suite_with(name, seed, &SuiteOptions::default())
}

pub fn property_suite_with(name: &str, seed: u64, opts: &SuiteOptions) -> Result<SuiteReport> {
    let budget = default_cases(name).ok_or_else(|| CalibError::UnknownName {
        kind: "property suite",
        name: name.to_string(),
    })?;
    let cases = opts.cases.unwrap_or(budget);
    let k = opts.grid_k;
    let outcomes: Vec<Result<Vec<String>>> = match name {
        "inequalities" => {
            let batches = cases.div_ceil(TRIPLE_BATCH);
            map_indexed(batches, opts.exec, |b| {
                let n = TRIPLE_BATCH.min(cases - b * TRIPLE_BATCH);
                Ok(inequality_batch(&mut case_rng(seed, b), n))
            })
        }
        "sandwich" => map_indexed(cases, opts.exec, |i| sandwich_case(&mut case_rng(seed, i), k)),
        "lipschitz" => map_indexed(cases, opts.exec, |i| {
            lipschitz_case(&mut case_rng(seed, i), k, opts.perturbation)
        }),
        "rounding" => map_indexed(cases, opts.exec, |i| rounding_case(&mut case_rng(seed, i))),
        "consolidation" => map_indexed(cases, opts.exec, |i| {
            consolidation_case(&mut case_rng(seed, i), k)
        }),
        _ => unreachable!("default_cases covers every suite"),
    };
    let mut failed = 0;
    let mut counterexamples = Vec::new();
    for (i, out) in outcomes.into_iter().enumerate() {
        let found = out.map_err(|e| CalibError::InvalidParameter(format!("case {i}: {e}")))?;
        failed += found.len();
        for msg in found {
            if counterexamples.len() < MAX_REPORTED {
                counterexamples.push(format!("case {i}: {msg}"));
            }
        }
    }
    Ok(SuiteReport {
        suite: name.to_string(),
        cases,
        failed,
        counterexamples,
    })
}

fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    rng
}

fn describe(tr: &Transcript) -> String {
    format!("x={:?} p={:?}", tr.outcomes(), tr.predictions())
}

fn inequality_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut bad = Vec::new();
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
        let (alpha, beta) = if a <= b { (a, b) } else { (b, a) };
        let p: f64 = rng.gen();
        let (s1, s2) = technical_inequality_slacks(alpha, beta, p);
        if s1 < -1e-12 || s2 < -1e-12 {
            bad.push(format!("alpha={alpha:?} beta={beta:?} p={p:?} slacks=({s1:e}, {s2:e})"));
        }
    }
    bad
}

fn sandwich_case(rng: &mut ChaCha8Rng, k: usize) -> Result<Vec<String>> {
    let tr = random_transcript(rng, 10, 10);
    let s = smce(&tr)?.value;
    let lower = lower_caldist_grid(&tr, k)?.value;
    let exact = caldist_exact(&tr, 10)?.value;
    let e = ece(&tr);
    let slack = 2.0 * tr.len() as f64 / k as f64;
    let mut bad = Vec::new();
    if lower < s / 2.0 - 1e-9 {
        bad.push(format!("lower {lower} < smce/2 {} on {}", s / 2.0, describe(&tr)));
    }
    let cap = (2.0 * s).min(exact) + slack + 1e-9;
    if lower > cap {
        bad.push(format!("lower {lower} > {cap} (smce {s}, exact {exact}) on {}", describe(&tr)));
    }
    if exact > e + 1e-12 {
        bad.push(format!("exact {exact} > ece {e} on {}", describe(&tr)));
    }
    Ok(bad)
}

fn lipschitz_case(rng: &mut ChaCha8Rng, k: usize, radius: f64) -> Result<Vec<String>> {
    let tr = random_transcript(rng, 10, 10);
    let moved = perturb(rng, tr.predictions(), radius);
    let other = Transcript::new(tr.outcomes().to_vec(), moved)?;
    let dist: f64 = tr
        .predictions()
        .iter()
        .zip(other.predictions())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let d_exact = (caldist_exact(&tr, 10)?.value - caldist_exact(&other, 10)?.value).abs();
    let d_smce = (smce(&tr)?.value - smce(&other)?.value).abs();
    let d_lower = (lower_caldist_grid(&tr, k)?.value - lower_caldist_grid(&other, k)?.value).abs();
    let grid_slack = 4.0 * tr.len() as f64 / k as f64;
    let mut bad = Vec::new();
    if d_exact > dist + 1e-9 {
        bad.push(format!("caldist moved {d_exact} > {dist}: {} vs {:?}", describe(&tr), other.predictions()));
    }
    if d_smce > 2.0 * dist + 1e-9 {
        bad.push(format!("smce moved {d_smce} > 2·{dist}: {} vs {:?}", describe(&tr), other.predictions()));
    }
    if d_lower > dist + grid_slack + 1e-9 {
        bad.push(format!("lower moved {d_lower} > {dist} + {grid_slack}: {} vs {:?}", describe(&tr), other.predictions()));
    }
    Ok(bad)
}

fn rounding_case(rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let (x, p, plan) = random_calibrated_plan(rng, 50, 10);
    let q = round_plan(&x, &p, &plan)?;
    let support = plan.destinations().len() as f64;
    let cost = plan_cost(&p, &plan)?;
    let moved = q.distance(&p);
    let mut bad = Vec::new();
    if !calibration_check(&x, q.values(), DEFAULT_TOLERANCE)? {
        bad.push(format!("rounded predictions not calibrated: x={x:?} p={p:?} plan={plan:?}"));
    }
    if moved > cost + 4.0 * support + 1e-9 {
        bad.push(format!("rounding cost {moved} > {cost} + 4·{support}: x={x:?} p={p:?} plan={plan:?}"));
    }
    Ok(bad)
}

fn consolidation_case(rng: &mut ChaCha8Rng, k: usize) -> Result<Vec<String>> {
    let tr = random_transcript(rng, 50, 10);
    let (x, p) = (tr.outcomes(), tr.predictions());
    let horizon = tr.len() as f64;
    let lower = lower_caldist_grid(&tr, k)?;
    let m = (horizon.sqrt().ceil() as usize).max(1);
    let general = consolidate_general(x, p, &lower.plan, m)?;
    let general_cost = plan_cost(p, &general)?;
    let mut bad = Vec::new();
    if general_cost > lower.value + horizon / m as f64 + 1e-9 {
        bad.push(format!("general cost {general_cost} > {} + T/{m} on {}", lower.value, describe(&tr)));
    }
    if general.support_size() > m {
        bad.push(format!("general support {} > {m} on {}", general.support_size(), describe(&tr)));
    }
    let sparse = consolidate_sparse(x, p, &lower.plan)?;
    let distinct = tr.distinct_predictions();
    if sparse.plan.support_size() > 2 * distinct + 3 {
        bad.push(format!("sparse support {} > 2·{distinct}+3 on {}", sparse.plan.support_size(), describe(&tr)));
    }
    if !plan_calibration_check(x, &sparse.plan, DEFAULT_TOLERANCE)? {
        bad.push(format!("sparse plan not calibrated on {}", describe(&tr)));
    }
    let bound = 20.0 * (lower.value + 2.0 * horizon / k as f64) + 1e-6;
    if sparse.output_cost > bound {
        bad.push(format!("sparse cost {} > {bound} on {}", sparse.output_cost, describe(&tr)));
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(cases: usize) -> SuiteOptions {
        SuiteOptions {
            cases: Some(cases),
            ..SuiteOptions::default()
        }
    }

    #[test]
    fn every_suite_passes_a_small_budget() {
        for name in SUITES {
            let r = property_suite_with(name, 1, &small(20)).unwrap();
            assert!(r.passed(), "{name}: {:?}", r.counterexamples);
            assert_eq!(r.cases, 20);
        }
    }

    #[test]
    fn zero_perturbation_is_trivial() {
        let opts = SuiteOptions {
            perturbation: 0.0,
            ..small(10)
        };
        assert!(property_suite_with("lipschitz", 4, &opts).unwrap().passed());
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(
            property_suite("monotone", 0),
            Err(CalibError::UnknownName { .. })
        ));
    }

    #[test]
    fn order_independent() {
        let seq = SuiteOptions {
            exec: Execution::Sequential,
            ..small(30)
        };
        let par = SuiteOptions {
            exec: Execution::Parallel,
            ..small(30)
        };
        assert_eq!(
            property_suite_with("rounding", 3, &seq).unwrap(),
            property_suite_with("rounding", 3, &par).unwrap()
        );
    }
}
