//! Transport-plan relaxation of calibration distance and the rounding
//! pipeline that turns a plan back into calibrated predictions.
//!
//! The grid LP moves every step's unit of mass onto `{0, 1/K, …, 1}` subject
//! to exact calibration at each grid point. Consolidation shrinks the support
//! of a calibrated plan; rounding then produces a genuine calibrated vector.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, LpError, Result};
use crate::lp::{LinearProgram, Relation, SimplexOptions};
use crate::types::{
    plan_cost, value_key, CalibratedPredictions, TransportPlan, Transcript, DEFAULT_TOLERANCE,
};

/// Entries below this are treated as zero when reading plans.
const MASS_EPS: f64 = 1e-12;

/// `max(1000, 10·T)`.
pub fn default_grid_k(horizon: usize) -> usize {
    1000.max(10 * horizon)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GridDiagnostics {
    pub grid_k: usize,
    pub classes: usize,
    pub grid_points_used: usize,
    pub rounds: usize,
    pub pivots: usize,
    pub duality_gap: f64,
    /// Worst reduced-cost violation over the full grid, including points the
    /// restricted LP never saw.
    pub dual_infeasibility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerCaldist {
    pub value: f64,
    pub plan: TransportPlan,
    pub diagnostics: GridDiagnostics,
}

struct Class {
    value: f64,
    bit: u8,
    steps: Vec<usize>,
}

fn source_classes(tr: &Transcript) -> Vec<Class> {
    let mut index: HashMap<(u64, u8), usize> = HashMap::new();
    let mut classes: Vec<Class> = Vec::new();
    for (t, s) in tr.steps().enumerate() {
        let c = *index
            .entry((value_key(s.prediction), s.outcome))
            .or_insert_with(|| {
                classes.push(Class {
                    value: s.prediction,
                    bit: s.outcome,
                    steps: Vec::new(),
                });
                classes.len() - 1
            });
        classes[c].steps.push(t);
    }
    classes.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.bit.cmp(&b.bit)));
    classes
}

/// Lower calibration distance restricted to the grid `{j/K}`.
///
/// Sources are aggregated by `(prediction, outcome)` class. The LP is solved
/// over a growing subset of grid points; points outside the subset are priced
/// against the current duals until none would improve the objective, so the
/// final dual is feasible for the full-grid problem.
pub fn lower_caldist_grid(tr: &Transcript, k: usize) -> Result<LowerCaldist> {
    if k < 2 {
        return Err(CalibError::InvalidParameter(format!(
            "grid size K must be at least 2, got {k}"
        )));
    }
    let classes = source_classes(tr);
    let grid = |j: usize| j as f64 / k as f64;

    let mut active: Vec<usize> = vec![0, k];
    for c in &classes {
        let scaled = c.value * k as f64;
        active.push((scaled.floor() as usize).min(k));
        active.push((scaled.ceil() as usize).min(k));
    }
    active.sort_unstable();
    active.dedup();

    let opts = SimplexOptions::default();
    let mut pivots = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let sol = solve_restricted(&classes, &active, k, &opts)?;
        pivots += sol.pivots;
        let objective_scale = sol.objective.abs().max(1.0);
        let priced = price_grid(&classes, &active, k, &sol.class_duals);
        let worst = priced.first().map_or(0.0, |&(_, v)| v);
        let tol = opts.certificate_tol * objective_scale;
        if worst <= tol || rounds >= 200 {
            let dual_infeasibility = worst.max(sol.dual_infeasibility);
            if dual_infeasibility > tol || sol.gap > tol {
                return Err(LpError::Certificate {
                    gap: sol.gap,
                    dual_infeasibility,
                }
                .into());
            }
            let plan = expand_plan(tr.len(), &classes, &active, &sol.mass, grid)?;
            let value = plan_cost(tr.predictions(), &plan)?;
            return Ok(LowerCaldist {
                value,
                diagnostics: GridDiagnostics {
                    grid_k: k,
                    classes: classes.len(),
                    grid_points_used: active.len(),
                    rounds,
                    pivots,
                    duality_gap: sol.gap,
                    dual_infeasibility,
                },
                plan,
            });
        }
        let budget = (2 * classes.len()).max(4);
        active.extend(priced.iter().take(budget).map(|&(j, _)| j));
        active.sort_unstable();
        active.dedup();
    }
}

struct Restricted {
    /// `mass[c][a]`: mass of class `c` sent to `active[a]`.
    mass: Vec<Vec<f64>>,
    class_duals: Vec<f64>,
    objective: f64,
    gap: f64,
    dual_infeasibility: f64,
    pivots: usize,
}

fn solve_restricted(
    classes: &[Class],
    active: &[usize],
    k: usize,
    opts: &SimplexOptions,
) -> Result<Restricted> {
    let nc = classes.len();
    let na = active.len();
    let var = |c: usize, a: usize| c * na + a;
    let grid = |a: usize| active[a] as f64 / k as f64;
    let mut costs = vec![0.0; nc * na];
    for (c, cls) in classes.iter().enumerate() {
        for a in 0..na {
            costs[var(c, a)] = (cls.value - grid(a)).abs();
        }
    }
    let mut lp = LinearProgram::minimize(costs);
    for (c, cls) in classes.iter().enumerate() {
        let terms: Vec<(usize, f64)> = (0..na).map(|a| (var(c, a), 1.0)).collect();
        lp.add_sparse(&terms, Relation::Eq, cls.steps.len() as f64);
    }
    for a in 0..na {
        let g = grid(a);
        let terms: Vec<(usize, f64)> = classes
            .iter()
            .enumerate()
            .map(|(c, cls)| (var(c, a), f64::from(cls.bit) - g))
            .collect();
        lp.add_sparse(&terms, Relation::Eq, 0.0);
    }
    let sol = lp.solve_with(opts)?;
    Ok(Restricted {
        mass: (0..nc)
            .map(|c| (0..na).map(|a| sol.x[var(c, a)]).collect())
            .collect(),
        class_duals: sol.duals[..nc].to_vec(),
        objective: sol.objective,
        gap: sol.stats.duality_gap,
        dual_infeasibility: sol.stats.dual_infeasibility,
        pivots: sol.stats.iterations,
    })
}

/// Best achievable dual violation at every inactive grid point, sorted
/// worst first. A point is violated when no multiplier `w` satisfies
/// `(b_c − g)·w ≤ |v_c − g| − u_c` for every class.
fn price_grid(classes: &[Class], active: &[usize], k: usize, u: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut is_active = vec![false; k + 1];
    for &j in active {
        is_active[j] = true;
    }
    for (j, &skip) in is_active.iter().enumerate().take(k).skip(1) {
        if skip {
            continue;
        }
        let g = j as f64 / k as f64;
        let mut upper = f64::INFINITY;
        let mut lower = f64::NEG_INFINITY;
        for (c, cls) in classes.iter().enumerate() {
            let r = (cls.value - g).abs() - u[c];
            if cls.bit == 1 {
                upper = upper.min(r / (1.0 - g));
            } else {
                lower = lower.max(-r / g);
            }
        }
        let w = match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        };
        let violation = classes
            .iter()
            .enumerate()
            .map(|(c, cls)| (f64::from(cls.bit) - g) * w - ((cls.value - g).abs() - u[c]))
            .fold(0.0, f64::max);
        if violation > 0.0 {
            out.push((j, violation));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

fn expand_plan(
    horizon: usize,
    classes: &[Class],
    active: &[usize],
    mass: &[Vec<f64>],
    grid: impl Fn(usize) -> f64,
) -> Result<TransportPlan> {
    let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); horizon];
    for (c, cls) in classes.iter().enumerate() {
        let n = cls.steps.len() as f64;
        let row: Vec<(f64, f64)> = active
            .iter()
            .zip(&mass[c])
            .filter(|(_, &m)| m / n > MASS_EPS)
            .map(|(&j, &m)| (grid(j), m / n))
            .collect();
        for &t in &cls.steps {
            rows[t] = row.clone();
        }
    }
    TransportPlan::from_sparse_rows(&rows, 0.0)
}

/// Sorts each outcome class by prediction and refills the rows from the
/// pooled destination mass in ascending order, one unit per step.
pub fn monotone_rearrange(outcomes: &[u8], predictions: &[f64], plan: &TransportPlan) -> Result<TransportPlan> {
    check_inputs(outcomes, predictions, plan)?;
    let ns = plan.destinations().len();
    let mut rows = vec![vec![0.0; ns]; outcomes.len()];
    for bit in [0u8, 1] {
        let mut order: Vec<usize> = (0..outcomes.len()).filter(|&t| outcomes[t] == bit).collect();
        if order.is_empty() {
            continue;
        }
        order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
        let mut avail = vec![0.0; ns];
        for &t in &order {
            for (a, w) in avail.iter_mut().zip(&plan.rows()[t]) {
                *a += w;
            }
        }
        let mut j = 0;
        let last = order.len() - 1;
        for (pos, &t) in order.iter().enumerate() {
            let row = &mut rows[t];
            if pos == last {
                for jj in j..ns {
                    if avail[jj] > 0.0 {
                        row[jj] = avail[jj];
                    }
                }
                break;
            }
            let mut need = 1.0;
            while need > MASS_EPS && j < ns {
                let take = need.min(avail[j]);
                row[j] += take;
                avail[j] -= take;
                need -= take;
                if avail[j] <= MASS_EPS {
                    j += 1;
                }
            }
        }
    }
    TransportPlan::new(plan.destinations().to_vec(), rows)
}

fn check_inputs(outcomes: &[u8], predictions: &[f64], plan: &TransportPlan) -> Result<()> {
    if predictions.len() != outcomes.len() {
        return Err(CalibError::LengthMismatch {
            what: "predictions",
            expected: outcomes.len(),
            got: predictions.len(),
        });
    }
    crate::types::validate_outcomes(outcomes)?;
    if plan.horizon() != outcomes.len() {
        return Err(CalibError::LengthMismatch {
            what: "plan rows",
            expected: outcomes.len(),
            got: plan.horizon(),
        });
    }
    Ok(())
}

/// Residual allowed when a pipeline stage checks that its input plan is
/// calibrated. Scales with the horizon to absorb summation error.
fn plan_tolerance(horizon: usize) -> f64 {
    DEFAULT_TOLERANCE * (horizon.max(1) as f64)
}

fn require_calibrated(outcomes: &[u8], plan: &TransportPlan) -> Result<()> {
    let tol = plan_tolerance(outcomes.len());
    for (j, &s) in plan.destinations().iter().enumerate() {
        let r: f64 = outcomes
            .iter()
            .zip(plan.rows())
            .map(|(&x, row)| (f64::from(x) - s) * row[j])
            .sum();
        if r.abs() > tol {
            return Err(CalibError::NotCalibrated {
                destination: s,
                residual: r,
            });
        }
    }
    Ok(())
}

/// Rounds a calibrated plan to calibrated predictions.
///
/// After monotone rearrangement, steps whose row is a point mass ("pure")
/// take the outcome frequency of all pure steps sharing that destination;
/// every other step takes its own outcome.
pub fn round_plan(outcomes: &[u8], predictions: &[f64], plan: &TransportPlan) -> Result<CalibratedPredictions> {
    check_inputs(outcomes, predictions, plan)?;
    require_calibrated(outcomes, plan)?;
    let arranged = monotone_rearrange(outcomes, predictions, plan)?;
    let ns = arranged.destinations().len();
    let mut pure_of: Vec<Option<usize>> = vec![None; outcomes.len()];
    let mut ones = vec![0usize; ns];
    let mut count = vec![0usize; ns];
    for (t, row) in arranged.rows().iter().enumerate() {
        let (j, &w) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty row");
        if w >= 1.0 - MASS_EPS {
            pure_of[t] = Some(j);
            ones[j] += usize::from(outcomes[t]);
            count[j] += 1;
        }
    }
    let q: Vec<f64> = (0..outcomes.len())
        .map(|t| match pure_of[t] {
            Some(j) => ones[j] as f64 / count[j] as f64,
            None => f64::from(outcomes[t]),
        })
        .collect();
    Ok(CalibratedPredictions::from_values(q))
}

/// Interval index of `s` among `m` equal-width intervals, the last closed.
fn equal_interval(s: f64, m: usize) -> usize {
    ((s * m as f64).floor() as usize).min(m - 1)
}

/// Redirects all mass landing in each of `m` equal intervals to the
/// interval's ones-fraction.
pub fn consolidate_general(outcomes: &[u8], predictions: &[f64], plan: &TransportPlan, m: usize) -> Result<TransportPlan> {
    check_inputs(outcomes, predictions, plan)?;
    if m == 0 {
        return Err(CalibError::InvalidParameter("m must be at least 1".into()));
    }
    require_calibrated(outcomes, plan)?;
    let dests = plan.destinations();
    let mut total = vec![0.0; m];
    let mut ones = vec![0.0; m];
    for (row, &x) in plan.rows().iter().zip(outcomes) {
        for (&w, &s) in row.iter().zip(dests) {
            let i = equal_interval(s, m);
            total[i] += w;
            ones[i] += w * f64::from(x);
        }
    }
    let mu: Vec<f64> = total
        .iter()
        .zip(&ones)
        .map(|(&w, &o)| if w > 0.0 { (o / w).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let rows: Vec<Vec<(f64, f64)>> = plan
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(dests)
                .filter(|(&w, _)| w > 0.0)
                .map(|(&w, &s)| (mu[equal_interval(s, m)], w))
                .collect()
        })
        .collect();
    TransportPlan::from_sparse_rows(&rows, 0.0)
}

/// Per-interval bookkeeping for sparse consolidation. "Left" mass comes from
/// steps predicting at most `lo`; "right" mass from steps predicting at least
/// `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalTally {
    pub lo: f64,
    pub hi: f64,
    pub unit_l0: f64,
    pub unit_l1: f64,
    pub unit_r0: f64,
    pub unit_r1: f64,
    pub delta_l: f64,
    pub delta_r: f64,
    pub rule: SecondPhase,
}

impl IntervalTally {
    fn new(lo: f64, hi: f64, units: [f64; 4]) -> Self {
        let [l0, l1, r0, r1] = units;
        Self {
            lo,
            hi,
            unit_l0: l0,
            unit_l1: l1,
            unit_r0: r0,
            unit_r1: r1,
            delta_l: l1 - (l0 + l1) * lo,
            delta_r: r1 - (r0 + r1) * hi,
            rule: SecondPhase::Outward,
        }
    }
}

/// How the unsettled bits of an interval are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SecondPhase {
    /// Leftover zeros to 0, leftover ones to 1.
    Outward,
    /// Everything left over merged at its ones-fraction.
    Merge(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseConsolidation {
    pub plan: TransportPlan,
    pub tallies: Vec<IntervalTally>,
    pub input_cost: f64,
    pub output_cost: f64,
    /// `20 · input_cost`; the output never exceeds it. With an input plan
    /// within `ε` of the lower calibration distance this is the
    /// `20·LowerCalDist + 20ε` guarantee.
    pub cost_bound: f64,
}

/// `(step, mass)` entries feeding one side of an interval.
type Pool = Vec<(usize, f64)>;

/// Consolidates a calibrated plan onto at most `2m + 3` destinations, where
/// `m` is the number of distinct predictions.
pub fn consolidate_sparse(outcomes: &[u8], predictions: &[f64], plan: &TransportPlan) -> Result<SparseConsolidation> {
    check_inputs(outcomes, predictions, plan)?;
    require_calibrated(outcomes, plan)?;
    let input_cost = plan_cost(predictions, plan)?;

    let mut split: Vec<f64> = predictions.to_vec();
    split.push(0.0);
    split.push(1.0);
    split.sort_by(f64::total_cmp);
    split.dedup_by(|a, b| value_key(*a) == value_key(*b));
    let intervals = split.len() - 1;
    let interval_of = |s: f64| split.partition_point(|&v| v <= s).saturating_sub(1).min(intervals - 1);

    // pools[i][side][bit] lists (step, mass); side 0 = left, 1 = right
    let mut pools: Vec<[[Pool; 2]; 2]> = vec![Default::default(); intervals];
    for (t, row) in plan.rows().iter().enumerate() {
        for (&w, &s) in row.iter().zip(plan.destinations()) {
            if w <= 0.0 {
                continue;
            }
            let i = interval_of(s);
            let side = usize::from(predictions[t] > split[i]);
            pools[i][side][usize::from(outcomes[t])].push((t, w));
        }
    }

    let mut rows: Vec<Vec<(f64, f64)>> = vec![Vec::new(); outcomes.len()];
    let mut tallies = Vec::with_capacity(intervals);
    for (i, pool) in pools.iter().enumerate() {
        let (lo, hi) = (split[i], split[i + 1]);
        let unit = |side: usize, bit: usize| pool[side][bit].iter().map(|e| e.1).sum::<f64>();
        let units = [unit(0, 0), unit(0, 1), unit(1, 0), unit(1, 1)];
        let mut tally = IntervalTally::new(lo, hi, units);

        // settle coexisting zeros and ones at the endpoint they arrived at
        let settle = |u0: f64, u1: f64, s: f64| -> (f64, f64) {
            let by_zeros = if s < 1.0 { u0 / (1.0 - s) } else { f64::INFINITY };
            let by_ones = if s > 0.0 { u1 / s } else { f64::INFINITY };
            let mu = by_zeros.min(by_ones);
            ((mu * (1.0 - s)).min(u0), (mu * s).min(u1))
        };
        let (sl0, sl1) = settle(units[0], units[1], lo);
        let (sr0, sr1) = settle(units[2], units[3], hi);
        let left = [(units[0] - sl0).max(0.0), (units[1] - sl1).max(0.0)];
        let right = [(units[2] - sr0).max(0.0), (units[3] - sr1).max(0.0)];

        let leftover_ones = left[1] + right[1];
        let leftover = left[0] + left[1] + right[0] + right[1];
        let (dl, dr) = (tally.delta_l, tally.delta_r);
        let rule = if leftover <= 0.0 || dl * dr >= 0.0 {
            SecondPhase::Outward
        } else {
            let mu = (leftover_ones / leftover).clamp(0.0, 1.0);
            if dl > 0.0 {
                SecondPhase::Merge(mu)
            } else {
                let merge = (left[0] + left[1]) * (mu - lo).abs() + (right[0] + right[1]) * (mu - hi).abs();
                let outward = left[0] * lo + left[1] * (1.0 - lo) + right[0] * hi + right[1] * (1.0 - hi);
                if merge <= outward {
                    SecondPhase::Merge(mu)
                } else {
                    SecondPhase::Outward
                }
            }
        };
        tally.rule = rule;

        let endpoints = [lo, hi];
        let settled = [[sl0, sl1], [sr0, sr1]];
        for side in 0..2 {
            for bit in 0..2 {
                let total = units[side * 2 + bit];
                if total <= 0.0 {
                    continue;
                }
                let keep = settled[side][bit] / total;
                let target = match rule {
                    SecondPhase::Merge(mu) => mu,
                    SecondPhase::Outward => bit as f64,
                };
                for &(t, w) in &pool[side][bit] {
                    if keep > 0.0 {
                        rows[t].push((endpoints[side], w * keep));
                    }
                    if keep < 1.0 {
                        rows[t].push((target, w * (1.0 - keep)));
                    }
                }
            }
        }
        tallies.push(tally);
    }
    let out = TransportPlan::from_sparse_rows(&rows, 0.0)?;
    let output_cost = plan_cost(predictions, &out)?;
    Ok(SparseConsolidation {
        plan: out,
        tallies,
        input_cost,
        output_cost,
        cost_bound: 20.0 * input_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsolidationMode {
    General,
    Sparse,
}

impl std::str::FromStr for ConsolidationMode {
    type Err = CalibError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Self::General),
            "sparse" => Ok(Self::Sparse),
            _ => Err(CalibError::UnknownName {
                kind: "consolidation mode",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperBound {
    pub value: f64,
    pub certificate: CalibratedPredictions,
    pub lp_value: f64,
    pub consolidated_cost: f64,
    pub consolidated_support: usize,
    /// The bound the construction guarantees for this instance.
    pub guarantee: f64,
    pub diagnostics: GridDiagnostics,
}

/// Grid LP, then consolidation, then rounding: a calibrated certificate whose
/// distance upper-bounds the calibration distance.
pub fn caldist_upper_bound(tr: &Transcript, mode: ConsolidationMode) -> Result<UpperBound> {
    caldist_upper_bound_with_k(tr, mode, default_grid_k(tr.len()))
}

pub fn caldist_upper_bound_with_k(tr: &Transcript, mode: ConsolidationMode, k: usize) -> Result<UpperBound> {
    let (x, p) = (tr.outcomes(), tr.predictions());
    let lower = lower_caldist_grid(tr, k)?;
    let horizon = tr.len() as f64;
    let (plan, guarantee) = match mode {
        ConsolidationMode::General => {
            let m = (horizon.sqrt().ceil() as usize).max(1);
            (
                consolidate_general(x, p, &lower.plan, m)?,
                lower.value + 6.0 * horizon.sqrt() + 8.0,
            )
        }
        ConsolidationMode::Sparse => {
            let m = tr.distinct_predictions() as f64;
            (
                consolidate_sparse(x, p, &lower.plan)?.plan,
                20.0 * lower.value + 8.0 * m + 20.0,
            )
        }
    };
    let certificate = round_plan(x, p, &plan)?;
    Ok(UpperBound {
        value: certificate.distance(p),
        certificate,
        lp_value: lower.value,
        consolidated_cost: plan_cost(p, &plan)?,
        consolidated_support: plan.support_size(),
        guarantee,
        diagnostics: lower.diagnostics,
    })
}

/// Evaluates both two-point transport inequalities used by the sparse
/// consolidation argument at `(alpha, beta, p)`; true iff each holds with
/// slack at least `-1e-12`.
pub fn technical_inequalities_check(alpha: f64, beta: f64, p: f64) -> bool {
    let (first, second) = technical_inequality_slacks(alpha, beta, p);
    first >= -1e-12 && second >= -1e-12
}

/// `(rhs − lhs)` for the factor-2 and factor-10 inequalities.
pub fn technical_inequality_slacks(alpha: f64, beta: f64, p: f64) -> (f64, f64) {
    let q = 1.0 - p;
    let lhs1 = p * (p - alpha).abs() + q * (p - beta).abs();
    let rhs1 = 2.0
        * ((p * (1.0 - alpha) - q * beta).abs()
            + (beta - alpha) * (p * (1.0 - alpha)).min(q * beta));
    let lhs2 = (q * (p - alpha).abs() + p * (p - beta).abs()).min(q * alpha + p * (1.0 - beta));
    let rhs2 = 10.0
        * ((q * alpha - p * (1.0 - beta)).abs()
            + (beta - alpha) * (q * alpha).min(p * (1.0 - beta)));
    (rhs1 - lhs1, rhs2 - lhs2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::smce;
    use crate::types::{calibration_check, plan_calibration_check};

    fn tr(x: &[u8], p: &[f64]) -> Transcript {
        Transcript::new(x.to_vec(), p.to_vec()).unwrap()
    }

    fn split_instance(eps: f64) -> (Transcript, TransportPlan) {
        let lo = 0.5 - eps;
        let hi = 0.5 + eps;
        let beta = lo / hi;
        let plan = TransportPlan::new(
            vec![lo, 0.5, hi],
            vec![
                vec![1.0, 0.0, 0.0],
                vec![beta, 1.0 - beta, 0.0],
                vec![0.0, 1.0 - beta, beta],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        (tr(&[0, 1, 0, 1], &[lo, lo, hi, hi]), plan)
    }

    #[test]
    fn grid_lp_on_split_instance() {
        let (t, _) = split_instance(0.02);
        let r = lower_caldist_grid(&t, 1000).unwrap();
        assert!(r.value <= 0.00307693, "{}", r.value);
        let s = smce(&t).unwrap().value;
        assert!(r.value >= s / 2.0 - 1e-9);
        assert!(plan_calibration_check(t.outcomes(), &r.plan, 1e-9).unwrap());
        assert!(r.diagnostics.duality_gap <= 1e-9);
        assert!(r.diagnostics.dual_infeasibility <= 1e-9);
    }

    #[test]
    fn grid_lp_calibrated_input_is_free() {
        let t = tr(&[0, 1, 1, 0, 1], &[0.5, 0.5, 1.0, 0.0, 1.0]);
        let r = lower_caldist_grid(&t, 10).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(r.plan.rows().iter().all(|row| row.iter().any(|&w| w > 1.0 - 1e-12)));
    }

    #[test]
    fn grid_lp_rejects_small_k() {
        let t = tr(&[1], &[0.5]);
        assert!(matches!(lower_caldist_grid(&t, 1), Err(CalibError::InvalidParameter(_))));
    }

    #[test]
    fn rearrange_swaps_crossed_rows() {
        let plan = TransportPlan::new(vec![0.1, 0.9], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = [0.2, 0.8];
        assert!((plan_cost(&p, &plan).unwrap() - 1.4).abs() < 1e-12);
        let out = monotone_rearrange(&[1, 1], &p, &plan).unwrap();
        assert_eq!(out.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((plan_cost(&p, &out).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rounding_split_instance() {
        let (t, plan) = split_instance(0.02);
        let q = round_plan(t.outcomes(), t.predictions(), &plan).unwrap();
        assert!(calibration_check(t.outcomes(), q.values(), 1e-9).unwrap());
        assert!(q.distance(t.predictions()) <= 0.00308 + 12.0);
    }

    #[test]
    fn rounding_degenerate_plan_keeps_values() {
        let x = [0, 1, 1, 1];
        let q = [0.5, 0.5, 1.0, 1.0];
        let plan = TransportPlan::degenerate(&q).unwrap();
        let p = [0.4, 0.6, 0.9, 1.0];
        let out = round_plan(&x, &p, &plan).unwrap();
        assert_eq!(out.values(), &q);
        assert!((out.distance(&p) - plan_cost(&p, &plan).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rounding_rejects_uncalibrated() {
        let plan = TransportPlan::degenerate(&[0.5]).unwrap();
        assert!(matches!(
            round_plan(&[1], &[0.5], &plan),
            Err(CalibError::NotCalibrated { .. })
        ));
    }

    #[test]
    fn general_consolidation_means_stay_in_interval() {
        let (t, plan) = split_instance(0.02);
        for m in 1..6 {
            let out = consolidate_general(t.outcomes(), t.predictions(), &plan, m).unwrap();
            assert!(out.destinations().len() <= m);
            for &mu in out.destinations() {
                let i = equal_interval(mu, m) as f64;
                assert!(mu >= i / m as f64 - 1e-12 && mu <= (i + 1.0) / m as f64 + 1e-12);
            }
            assert!(plan_calibration_check(t.outcomes(), &out, 1e-12).unwrap());
            let grow = plan_cost(t.predictions(), &out).unwrap() - plan_cost(t.predictions(), &plan).unwrap();
            assert!(grow <= 4.0 / m as f64 + 1e-12);
        }
    }

    #[test]
    fn sparse_consolidation_keeps_zero_one_plan() {
        let x = [0, 1, 0, 1];
        let plan = TransportPlan::new(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = [0.2, 0.3, 0.6, 0.7];
        let out = consolidate_sparse(&x, &p, &plan).unwrap();
        assert_eq!(out.plan.rows(), plan.rows());
        assert_eq!(out.plan.destinations(), plan.destinations());
    }

    #[test]
    fn sparse_consolidation_naive_merge_counterexample() {
        let k = 50;
        let eps = 1.0 / (2 * k) as f64;
        let mut x = vec![1u8];
        x.extend(std::iter::repeat_n(0, k - 1));
        x.extend(std::iter::repeat_n(1, k - 1));
        x.push(0);
        let p: Vec<f64> = (0..2 * k).map(|t| if t < k { eps } else { 1.0 - eps }).collect();
        let lo = 1.0 / k as f64;
        let targets: Vec<f64> = (0..2 * k).map(|t| if t < k { lo } else { 1.0 - lo }).collect();
        let plan = TransportPlan::degenerate(&targets).unwrap();
        assert!((plan_cost(&p, &plan).unwrap() - 1.0).abs() < 1e-9);
        let out = consolidate_sparse(&x, &p, &plan).unwrap();
        assert!(out.output_cost <= 20.0 * out.input_cost + 1e-9);
        assert!(out.output_cost < 5.0, "{}", out.output_cost);
        assert!(out.plan.support_size() <= 7);
        assert!(plan_calibration_check(&x, &out.plan, 1e-9).unwrap());
    }

    #[test]
    fn upper_bound_split_instance() {
        let (t, _) = split_instance(0.02);
        for mode in [ConsolidationMode::General, ConsolidationMode::Sparse] {
            let r = caldist_upper_bound(&t, mode).unwrap();
            assert!(r.value >= 0.08 - 1e-12);
            assert!(r.value <= r.guarantee);
            assert!(r.certificate.verify(t.outcomes(), 1e-9).unwrap());
        }
    }

    #[test]
    fn inequality_examples() {
        assert!(technical_inequalities_check(0.0, 1.0, 0.5));
        assert!(technical_inequalities_check(0.3, 0.31, 0.305));
    }
}
