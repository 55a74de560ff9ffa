//! Calibration measures on complete transcripts.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::exec::{map_indexed, Execution};
use crate::lp::{LinearProgram, LpStats, Relation};
use crate::types::{
    bias_profile, sgn, validate_outcomes, value_key, CalibratedPredictions, LipschitzWitness,
    Transcript,
};

/// Default horizon cap for [`caldist_exact`].
pub const DEFAULT_ORACLE_CAP: usize = 12;

/// `Σ_α |Δ_α|`.
pub fn ece(tr: &Transcript) -> f64 {
    bias_profile(tr).entries().iter().map(|e| e.bias.abs()).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmceResult {
    pub value: f64,
    pub witness: LipschitzWitness,
    pub stats: LpStats,
}

/// Smooth calibration error: the best 1-Lipschitz, `[-1, 1]`-valued test
/// function against the bias profile, solved as an LP over the sorted
/// distinct prediction values.
pub fn smce(tr: &Transcript) -> Result<SmceResult> {
    let profile = bias_profile(tr);
    let entries = profile.entries();
    let m = entries.len();

    // Shift f = g - 1 so every variable is non-negative: g ∈ [0, 2].
    let mut lp = LinearProgram::minimize(entries.iter().map(|e| -e.bias).collect());
    for i in 0..m {
        lp.add_sparse(&[(i, 1.0)], Relation::Le, 2.0);
    }
    for i in 0..m.saturating_sub(1) {
        let gap = entries[i + 1].value - entries[i].value;
        lp.add_sparse(&[(i + 1, 1.0), (i, -1.0)], Relation::Le, gap);
        lp.add_sparse(&[(i, 1.0), (i + 1, -1.0)], Relation::Le, gap);
    }
    let sol = lp.solve()?;

    let knots = entries
        .iter()
        .zip(&sol.x)
        .map(|(e, g)| (e.value, (g - 1.0).clamp(-1.0, 1.0)))
        .collect();
    let witness = LipschitzWitness::new(knots)?;
    let value = witness.objective(&profile).max(0.0);
    Ok(SmceResult {
        value,
        witness,
        stats: sol.stats,
    })
}

/// Closed-form witness for a two-point bias profile and its objective value.
///
/// Same-sign biases take the constant `±1`. Opposite signs take a tent of
/// height `sgn(Δ)` centred on the point with the larger `|Δ|` (`alpha` wins
/// ties).
pub fn two_point_witness(
    alpha: f64,
    beta: f64,
    delta_alpha: f64,
    delta_beta: f64,
) -> (LipschitzWitness, f64) {
    if delta_alpha * delta_beta >= 0.0 {
        let s = sgn(delta_alpha + delta_beta);
        let s = if s == 0.0 { 1.0 } else { s };
        return (
            LipschitzWitness::constant(s),
            delta_alpha.abs() + delta_beta.abs(),
        );
    }
    let (centre, d_large) = if delta_alpha.abs() >= delta_beta.abs() {
        (alpha, delta_alpha)
    } else {
        (beta, delta_beta)
    };
    let s = sgn(d_large);
    let mut knots = vec![(0.0, s * (1.0 - centre)), (centre, s), (1.0, s * centre)];
    knots.dedup_by(|b, a| a.0 == b.0);
    let witness = LipschitzWitness::new(knots).expect("tent is 1-Lipschitz");
    let value = (delta_alpha + delta_beta).abs()
        + (alpha - beta).abs() * delta_alpha.abs().min(delta_beta.abs());
    (witness, value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaldistResult {
    pub value: f64,
    pub certificate: CalibratedPredictions,
}

/// Calibrated predictions with `q_t` the frequency of ones among steps that
/// share `p_t`. Their distance from `p` equals the ECE.
pub fn bucket_mean_predictions(tr: &Transcript) -> CalibratedPredictions {
    let bins = CalibratedPredictions::from_values(tr.predictions().to_vec());
    CalibratedPredictions::from_partition(tr.outcomes(), bins.partition().to_vec())
        .expect("bins partition the steps")
}

/// Exact calibration distance by enumerating every set partition of the
/// steps. The returned certificate is the first optimal partition in
/// restricted-growth-string order.
pub fn caldist_exact(tr: &Transcript, max_t: usize) -> Result<CaldistResult> {
    caldist_exact_with(tr, max_t, Execution::best_available())
}

pub fn caldist_exact_with(tr: &Transcript, max_t: usize, exec: Execution) -> Result<CaldistResult> {
    let n = tr.len();
    check_cap(n, max_t)?;
    let block_cost = float_block_costs(tr.outcomes(), tr.predictions());
    let best = search(n, exec, || FloatSearch::new(&block_cost));
    let (_, labels) = best.expect("at least one partition");
    let certificate =
        CalibratedPredictions::from_partition(tr.outcomes(), labels_to_blocks(&labels))?;
    Ok(CaldistResult {
        value: certificate.distance(tr.predictions()),
        certificate,
    })
}

/// Exact-arithmetic variant: predictions are decimal strings and every
/// block mean and cost is a rational number.
#[derive(Debug, Clone)]
pub struct ExactCaldist {
    pub value: BigRational,
    pub values: Vec<BigRational>,
    pub result: CaldistResult,
}

pub fn caldist_exact_decimal(
    outcomes: &[u8],
    predictions: &[&str],
    max_t: usize,
) -> Result<ExactCaldist> {
    validate_outcomes(outcomes)?;
    if predictions.len() != outcomes.len() {
        return Err(CalibError::LengthMismatch {
            what: "predictions",
            expected: outcomes.len(),
            got: predictions.len(),
        });
    }
    let n = outcomes.len();
    check_cap(n, max_t)?;
    let exact: Vec<BigRational> = predictions
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let v = parse_decimal(s).ok_or_else(|| CalibError::Parse {
                line: t + 1,
                message: format!("`{s}` is not a decimal number"),
            })?;
            if v.is_negative() || v > BigRational::from_integer(1.into()) {
                return Err(CalibError::InvalidPrediction {
                    step: t,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let approx: Vec<f64> = exact.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
    let float_cost = float_block_costs(outcomes, &approx);
    let exact_cost = exact_block_costs(outcomes, &exact);
    let best = search(n, Execution::best_available(), || {
        ExactSearch::new(&float_cost, &exact_cost)
    });
    let (value, labels) = best.expect("at least one partition");
    let blocks = labels_to_blocks(&labels);
    let mut values = vec![BigRational::zero(); n];
    for block in &blocks {
        let ones: i64 = block.iter().map(|&t| i64::from(outcomes[t])).sum();
        let mean = BigRational::new(ones.into(), (block.len() as i64).into());
        for &t in block {
            values[t] = mean.clone();
        }
    }
    let certificate = CalibratedPredictions::from_partition(outcomes, blocks)?;
    Ok(ExactCaldist {
        result: CaldistResult {
            value: value.to_f64().unwrap_or(f64::NAN),
            certificate,
        },
        value,
        values,
    })
}

/// Parses `[-]digits[.digits][e[+-]digits]` into an exact rational.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let scale = exp - frac_part.len() as i32 - 1;
    let ten = BigInt::from(10);
    let mut v = BigRational::from_integer(digits);
    if scale >= 0 {
        v *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        v /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -v } else { v })
}

fn check_cap(n: usize, max_t: usize) -> Result<()> {
    if n > max_t {
        return Err(CalibError::TooLarge {
            horizon: n,
            cap: max_t,
        });
    }
    if n > 30 {
        return Err(CalibError::InvalidParameter(
            "exact oracle supports at most 30 steps".into(),
        ));
    }
    Ok(())
}

fn float_block_costs(outcomes: &[u8], predictions: &[f64]) -> Vec<f64> {
    let n = outcomes.len();
    (0..1usize << n)
        .map(|mask| {
            let members = (0..n).filter(|t| mask >> t & 1 == 1);
            let size = mask.count_ones() as f64;
            let ones: f64 = members.clone().map(|t| f64::from(outcomes[t])).sum();
            let mean = if size > 0.0 { ones / size } else { 0.0 };
            members.map(|t| (predictions[t] - mean).abs()).sum()
        })
        .collect()
}

fn exact_block_costs(outcomes: &[u8], predictions: &[BigRational]) -> Vec<BigRational> {
    let n = outcomes.len();
    (0..1usize << n)
        .map(|mask| {
            let members: Vec<usize> = (0..n).filter(|t| mask >> t & 1 == 1).collect();
            if members.is_empty() {
                return BigRational::zero();
            }
            let ones: i64 = members.iter().map(|&t| i64::from(outcomes[t])).sum();
            let mean = BigRational::new(ones.into(), (members.len() as i64).into());
            members
                .iter()
                .map(|&t| (&predictions[t] - &mean).abs())
                .fold(BigRational::zero(), |acc, v| acc + v)
        })
        .collect()
}

fn labels_to_blocks(labels: &[u8]) -> Vec<Vec<usize>> {
    let k = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut blocks = vec![Vec::new(); k];
    for (t, &l) in labels.iter().enumerate() {
        blocks[l as usize].push(t);
    }
    blocks
}

/// Leaf visitor for the partition search. `masks[b]` is the step set of
/// block `b`.
trait Visitor {
    type Cost: Clone + PartialOrd + Send;
    fn visit(&mut self, masks: &[u32], labels: &[u8]);
    fn finish(self) -> Option<(Self::Cost, Vec<u8>)>;
}

struct FloatSearch<'a> {
    cost: &'a [f64],
    best: Option<(f64, Vec<u8>)>,
}

impl<'a> FloatSearch<'a> {
    fn new(cost: &'a [f64]) -> Self {
        Self { cost, best: None }
    }
}

impl Visitor for FloatSearch<'_> {
    type Cost = f64;
    fn visit(&mut self, masks: &[u32], labels: &[u8]) {
        let c: f64 = masks.iter().map(|&m| self.cost[m as usize]).sum();
        if self.best.as_ref().is_none_or(|(b, _)| c < *b) {
            self.best = Some((c, labels.to_vec()));
        }
    }
    fn finish(self) -> Option<(f64, Vec<u8>)> {
        self.best
    }
}

/// Screens leaves with float costs and settles near-ties exactly.
struct ExactSearch<'a> {
    float_cost: &'a [f64],
    exact_cost: &'a [BigRational],
    best_float: f64,
    best: Option<(BigRational, Vec<u8>)>,
}

impl<'a> ExactSearch<'a> {
    fn new(float_cost: &'a [f64], exact_cost: &'a [BigRational]) -> Self {
        Self {
            float_cost,
            exact_cost,
            best_float: f64::INFINITY,
            best: None,
        }
    }
}

impl Visitor for ExactSearch<'_> {
    type Cost = BigRational;
    fn visit(&mut self, masks: &[u32], labels: &[u8]) {
        let c: f64 = masks.iter().map(|&m| self.float_cost[m as usize]).sum();
        if c > self.best_float + 1e-9 {
            return;
        }
        self.best_float = self.best_float.min(c);
        let exact = masks
            .iter()
            .fold(BigRational::zero(), |acc, &m| acc + &self.exact_cost[m as usize]);
        if self.best.as_ref().is_none_or(|(b, _)| exact < *b) {
            self.best = Some((exact, labels.to_vec()));
        }
    }
    fn finish(self) -> Option<(BigRational, Vec<u8>)> {
        self.best
    }
}

/// Number of leading steps fixed per parallel task.
const PREFIX_LEN: usize = 6;

/// Enumerates restricted growth strings of length `n` in lexicographic order.
/// Work is split by prefix; the reduction keeps the smallest cost and, among
/// equal costs, the earliest prefix, which reproduces the sequential order.
fn search<V, F>(n: usize, exec: Execution, make: F) -> Option<(V::Cost, Vec<u8>)>
where
    V: Visitor,
    F: Fn() -> V + Sync + Send,
{
    let split = n.min(PREFIX_LEN);
    let mut prefixes = Vec::new();
    collect_prefixes(&mut vec![0u8; split], 0, 0, &mut prefixes);
    let results = map_indexed(prefixes.len(), exec, |i| {
        let prefix = &prefixes[i];
        let mut labels = vec![0u8; n];
        labels[..split].copy_from_slice(prefix);
        let mut masks: Vec<u32> = Vec::with_capacity(n);
        for (t, &l) in prefix.iter().enumerate() {
            if l as usize == masks.len() {
                masks.push(0);
            }
            masks[l as usize] |= 1 << t;
        }
        let mut v = make();
        extend(&mut labels, &mut masks, split, &mut v);
        v.finish()
    });
    results.into_iter().flatten().fold(None, |acc, cand| match acc {
        Some(best) if cand.0.partial_cmp(&best.0) != Some(std::cmp::Ordering::Less) => Some(best),
        _ => Some(cand),
    })
}

fn collect_prefixes(buf: &mut Vec<u8>, t: usize, max_label: u8, out: &mut Vec<Vec<u8>>) {
    if t == buf.len() {
        out.push(buf.clone());
        return;
    }
    let top = if t == 0 { 0 } else { max_label + 1 };
    for l in 0..=top {
        buf[t] = l;
        collect_prefixes(buf, t + 1, max_label.max(l), out);
    }
}

fn extend<V: Visitor>(labels: &mut [u8], masks: &mut Vec<u32>, t: usize, v: &mut V) {
    if t == labels.len() {
        v.visit(masks, labels);
        return;
    }
    for l in 0..masks.len() {
        labels[t] = l as u8;
        masks[l] |= 1 << t;
        extend(labels, masks, t + 1, v);
        masks[l] &= !(1 << t);
    }
    labels[t] = masks.len() as u8;
    masks.push(1 << t);
    extend(labels, masks, t + 1, v);
    masks.pop();
}

/// Groups steps by exact prediction value; exposed for callers that need the
/// bins of [`ece`] directly.
pub fn prediction_bins(tr: &Transcript) -> Vec<(f64, Vec<usize>)> {
    let cp = CalibratedPredictions::from_values(tr.predictions().to_vec());
    let mut bins: Vec<(f64, Vec<usize>)> = cp
        .partition()
        .iter()
        .map(|b| (tr.predictions()[b[0]], b.clone()))
        .collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    debug_assert!(bins
        .windows(2)
        .all(|w| value_key(w[0].0) != value_key(w[1].0)));
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::calibration_check;

    fn tr(x: &[u8], p: &[f64]) -> Transcript {
        Transcript::new(x.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn ece_examples() {
        assert_eq!(ece(&tr(&[0, 1], &[0.5, 0.5])), 0.0);
        assert!((ece(&tr(&[1, 0], &[0.9, 0.4])) - 0.5).abs() < 1e-15);
        let v = ece(&tr(&[0, 1, 0, 1], &[0.501, 0.502, 0.503, 0.504]));
        assert!((v - 1.998).abs() < 1e-12);
    }

    #[test]
    fn smce_examples() {
        let r = smce(&tr(&[1], &[0.3])).unwrap();
        assert!((r.value - 0.7).abs() < 1e-12);
        assert_eq!(smce(&tr(&[0, 1], &[0.5, 0.5])).unwrap().value, 0.0);

        let r = smce(&tr(&[1, 0], &[0.3, 0.6])).unwrap();
        assert!((r.value - 0.28).abs() < 1e-12);
        assert!((r.witness.eval(0.3) - 1.0).abs() < 1e-12);
        assert!((r.witness.eval(0.6) - 0.7).abs() < 1e-12);
        assert!(r.stats.duality_gap <= 1e-9);
    }

    #[test]
    fn two_point_examples() {
        let (w, v) = two_point_witness(0.2, 0.8, 1.0, 2.0);
        assert_eq!(v, 3.0);
        assert_eq!(w.eval(0.5), 1.0);

        let (w, v) = two_point_witness(0.3, 0.6, 0.7, -0.6);
        assert!((v - 0.28).abs() < 1e-15);
        assert!((w.eval(0.3) * 0.7 + w.eval(0.6) * -0.6 - v).abs() < 1e-15);

        let (_, v) = two_point_witness(0.5, 0.5, 1.0, -1.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn caldist_examples() {
        let t = tr(&[0, 1, 0, 1], &[0.48, 0.48, 0.52, 0.52]);
        let r = caldist_exact(&t, 12).unwrap();
        assert!((r.value - 0.08).abs() < 1e-12);
        assert!(r.certificate.verify(t.outcomes(), 1e-12).unwrap());

        assert_eq!(caldist_exact(&tr(&[1, 0], &[1.0, 0.0]), 12).unwrap().value, 0.0);
        let r = caldist_exact(&tr(&[1, 0], &[0.9, 0.4]), 12).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        assert!(r.certificate.verify(&[1, 0], 1e-12).unwrap());
    }

    #[test]
    fn caldist_cap_error_names_cap() {
        let t = tr(&[0; 13], &[0.5; 13]);
        let err = caldist_exact(&t, 12).unwrap_err();
        assert_eq!(err, CalibError::TooLarge { horizon: 13, cap: 12 });
        assert!(err.to_string().contains("12"));
    }

    #[test]
    fn caldist_parallel_matches_sequential() {
        let t = tr(
            &[1, 0, 1, 1, 0, 0, 1, 0, 1],
            &[0.1, 0.2, 0.2, 0.7, 0.9, 0.5, 0.5, 0.3, 0.6],
        );
        let a = caldist_exact_with(&t, 12, Execution::Sequential).unwrap();
        let b = caldist_exact_with(&t, 12, Execution::Parallel).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.certificate, b.certificate);
    }

    #[test]
    fn exact_mode_matches_split_instance() {
        let r = caldist_exact_decimal(&[0, 1, 0, 1], &["0.48", "0.48", "0.52", "0.52"], 12)
            .unwrap();
        assert_eq!(r.value, BigRational::new(2.into(), 25.into()));
        for block in r.result.certificate.partition() {
            let sum = block.iter().fold(BigRational::zero(), |acc, &t| {
                acc + BigRational::from_integer([0, 1, 0, 1][t].into()) - &r.values[t]
            });
            assert!(sum.is_zero());
        }
    }

    #[test]
    fn decimal_parser() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(parse_decimal("0.48"), Some(q(12, 25)));
        assert_eq!(parse_decimal("1"), Some(q(1, 1)));
        assert_eq!(parse_decimal(".5"), Some(q(1, 2)));
        assert_eq!(parse_decimal("2.5e-1"), Some(q(1, 4)));
        assert_eq!(parse_decimal("-0.1"), Some(q(-1, 10)));
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn bucket_means() {
        let q = bucket_mean_predictions(&tr(&[1, 0], &[0.9, 0.4]));
        assert_eq!(q.values(), &[1.0, 0.0]);
        let t = tr(&[1, 1, 0], &[0.7, 0.7, 0.7]);
        let q = bucket_mean_predictions(&t);
        assert!(q.values().iter().all(|&v| (v - 2.0 / 3.0).abs() < 1e-15));
        assert!(calibration_check(t.outcomes(), q.values(), 1e-12).unwrap());
        assert!((q.distance(t.predictions()) - ece(&t)).abs() < 1e-12);
    }
}
