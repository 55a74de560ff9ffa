mod common;

use calib_core::harness::generators::random_calibrated_plan;
use calib_core::harness::fit_loglog;
use calib_core::metrics::{caldist_exact, ece, smce};
use calib_core::transport::{
    caldist_upper_bound_with_k, consolidate_general, consolidate_sparse, lower_caldist_grid, monotone_rearrange,
    ConsolidationMode,
};
use calib_core::{
    bias_profile, calibration_check, plan_calibration_check, plan_cost, running_bias, CalibratedPredictions,
    TransportPlan, Transcript,
};
use common::transcript;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(max_t: usize, palette: usize) -> impl Strategy<Value = Transcript> {
    (1..=max_t, prop::collection::vec(0.0f64..=1.0, 1..=palette), any::<bool>()).prop_flat_map(
        |(t, pal, grid)| {
            let pal: Vec<f64> = if grid {
                pal.iter().map(|v| (v * 20.0).round() / 20.0).collect()
            } else {
                pal
            };
            let k = pal.len();
            (
                prop::collection::vec(0u8..=1, t),
                prop::collection::vec(0..k, t).prop_map(move |ix| ix.iter().map(|&i| pal[i]).collect::<Vec<f64>>()),
            )
                .prop_map(|(x, p)| transcript(&x, &p))
        },
    )
}

fn partition(t: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..t, t)
}

fn row_totals(plan: &TransportPlan, outcomes: &[u8], bit: u8) -> Vec<f64> {
    let mut out = vec![0.0; plan.destinations().len()];
    for (row, &x) in plan.rows().iter().zip(outcomes) {
        if x == bit {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w;
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bias_profile_sums_to_running_bias(tr in instance(40, 8)) {
        let total = bias_profile(&tr).total();
        let last = *running_bias(&tr).last().unwrap();
        prop_assert!((total - last).abs() <= 1e-12);
    }

    #[test]
    fn block_means_are_calibrated((tr, labels) in instance(30, 6).prop_flat_map(|tr| {
        let t = tr.len();
        (Just(tr), partition(t))
    })) {
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); tr.len()];
        for (t, &l) in labels.iter().enumerate() {
            blocks[l].push(t);
        }
        blocks.retain(|b| !b.is_empty());
        let q = CalibratedPredictions::from_partition(tr.outcomes(), blocks).unwrap();
        prop_assert!(calibration_check(tr.outcomes(), q.values(), 1e-9).unwrap());
    }

    #[test]
    fn plan_cost_ignores_destination_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, p, plan) = random_calibrated_plan(&mut rng, 20, 6);
        let reversed: Vec<Vec<(f64, f64)>> = plan
            .rows()
            .iter()
            .map(|row| plan.destinations().iter().copied().zip(row.iter().copied()).rev().collect())
            .collect();
        let rebuilt = TransportPlan::from_sparse_rows(&reversed, 0.0).unwrap();
        let a = plan_cost(&p, &plan).unwrap();
        let b = plan_cost(&p, &rebuilt).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn exact_below_ece_and_smce_above_total_bias(tr in instance(9, 9)) {
        let exact = caldist_exact(&tr, 12).unwrap().value;
        prop_assert!(exact <= ece(&tr) + 1e-12);
        let s = smce(&tr).unwrap();
        let total: f64 = tr.steps().map(|s| s.bias()).sum();
        prop_assert!(s.value >= total.abs() - 1e-9);
        prop_assert!(s.witness.max_violation() <= 1e-9);
    }

    #[test]
    fn rearrange_idempotent_and_cheaper(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, p, plan) = random_calibrated_plan(&mut rng, 30, 8);
        let once = monotone_rearrange(&x, &p, &plan).unwrap();
        let twice = monotone_rearrange(&x, &p, &once).unwrap();
        for (a, b) in once.rows().iter().zip(twice.rows()) {
            for (u, v) in a.iter().zip(b) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
        prop_assert!(plan_cost(&p, &once).unwrap() <= plan_cost(&p, &plan).unwrap() + 1e-12);
        for bit in [0, 1] {
            for (u, v) in row_totals(&plan, &x, bit).iter().zip(row_totals(&once, &x, bit)) {
                prop_assert!((u - v).abs() <= 1e-9);
            }
        }
        prop_assert!(plan_calibration_check(&x, &once, 1e-9).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_and_order(tr in instance(8, 8)) {
        let k = 400;
        let slack = 2.0 * tr.len() as f64 / k as f64;
        let s = smce(&tr).unwrap().value;
        let lower = lower_caldist_grid(&tr, k).unwrap().value;
        let exact = caldist_exact(&tr, 12).unwrap().value;
        prop_assert!(lower >= s / 2.0 - 1e-9);
        prop_assert!(lower <= 2.0 * s + slack + 1e-9);
        prop_assert!(lower - slack <= exact + 1e-9);
        for mode in [ConsolidationMode::General, ConsolidationMode::Sparse] {
            let ub = caldist_upper_bound_with_k(&tr, mode, k).unwrap();
            prop_assert!(exact <= ub.value + 1e-9, "{mode:?}: exact {exact} > {}", ub.value);
            prop_assert!(ub.value <= ub.guarantee + 1e-9);
            prop_assert!(calibration_check(tr.outcomes(), ub.certificate.values(), 1e-9).unwrap());
        }
    }

    #[test]
    fn consolidation_bounds(tr in instance(40, 8)) {
        let (x, p) = (tr.outcomes(), tr.predictions());
        let lower = lower_caldist_grid(&tr, 1000).unwrap();
        let horizon = tr.len() as f64;
        let m = horizon.sqrt().ceil() as usize;
        let general = consolidate_general(x, p, &lower.plan, m).unwrap();
        prop_assert!(general.support_size() <= m);
        prop_assert!(plan_cost(p, &general).unwrap() <= lower.value + horizon.sqrt() + 1.0);
        for &mu in general.destinations() {
            prop_assert!((0.0..=1.0).contains(&mu));
        }
        let sparse = consolidate_sparse(x, p, &lower.plan).unwrap();
        prop_assert!(sparse.plan.support_size() <= 2 * tr.distinct_predictions() + 3);
        prop_assert!(plan_calibration_check(x, &sparse.plan, 1e-9).unwrap());
        prop_assert!(sparse.output_cost <= 20.0 * lower.value + 2.0 * horizon / 1000.0 + 1e-6);
    }

    #[test]
    fn slope_fit_recovers_exponent(c in 0.01f64..100.0, a in -1.0f64..2.0) {
        let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5].iter().map(|&t: &f64| (t, c * t.powf(a))).collect();
        let fit = fit_loglog("synthetic", &pts).unwrap();
        prop_assert!((fit.slope - a).abs() <= 1e-6);
    }
}
