mod common;

use common::*;
use dsa_core::metrics::average_precision;
use dsa_core::oracle::{optimal_config, safe_set};
use dsa_core::policy::{fit_static, fit_static_per_category, StaticPolicy};
use dsa_core::simulator::{simulate_stream, Policy};
use dsa_core::trace::{drifting_scenario, generate_synthetic, load_trace, trace_to_string, EmulatorParams, Split};
use dsa_core::{ApproxConfig, BBox, CostModel, Scope};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_trace(seed: u64, clutter: f64, jitter: f64) -> dsa_core::DetectionTrace {
    let params = EmulatorParams { clutter_rate: clutter, jitter, seed, ..EmulatorParams::default() };
    generate_synthetic(&random_scenario(seed, 4, 5, Split::Test), &params).unwrap()
}

fn any_config() -> impl Strategy<Value = ApproxConfig> {
    (0..HEIGHTS.len(), 0..PROPOSALS.len()).prop_map(|(h, p)| ApproxConfig::new(HEIGHTS[h], PROPOSALS[p]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generation_is_a_function_of_its_inputs(seed in 0u64..1000, clutter in 0.0f64..4.0, jitter in 0.0f64..1.0) {
        let a = small_trace(seed, clutter, jitter);
        let b = small_trace(seed, clutter, jitter);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(load_trace(trace_to_string(&a).as_bytes()).unwrap(), a);
    }

    #[test]
    fn safe_sets_hold_the_baseline_and_optimum(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_raw_frame(&mut rng, 0);
        let grid = default_grid();
        let cost = CostModel::rfcn();
        for scope in [Scope::Any, Scope::Category(dsa_core::CategoryId(1))] {
            let set = safe_set(&grid, &frame, scope, 0.5).unwrap();
            prop_assert!(set.contains(grid.baseline()));
            let best = optimal_config(&grid, &frame, scope, &cost, 0.5).unwrap();
            prop_assert!(set.contains(best));
            let fps = cost.fps_lookup(best).unwrap();
            prop_assert!(set.members.iter().all(|c| cost.fps_lookup(*c).unwrap() <= fps));
            prop_assert_eq!(set.metric_neutral, set.members.len() == grid.len() && set.baseline_ap.is_none());
        }
    }

    #[test]
    fn ap_is_bounded_and_order_invariant_for_distinct_scores(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_raw_frame(&mut rng, 0);
        let mut dets = frame.outputs[&ApproxConfig::new(480, 300)].clone();
        for (i, d) in dets.iter_mut().enumerate() {
            d.score = 1.0 - i as f64 * 0.1;
        }
        let forward = average_precision(&dets, &frame.gts, 0.5);
        dets.reverse();
        prop_assert_eq!(forward, average_precision(&dets, &frame.gts, 0.5));
        if let Some(ap) = forward {
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }

    #[test]
    fn constant_policy_time_is_additive(seed in 0u64..1000, config in any_config()) {
        let trace = small_trace(seed, 1.0, 0.0);
        let cost = CostModel::faster_rcnn();
        let policy = Policy::Static(StaticPolicy::oblivious(config));
        let r = simulate_stream(&trace, &policy, &cost, 0.5).unwrap();
        let n = trace.frame_count() as f64;
        prop_assert!((r.total_time - n / cost.fps_lookup(config).unwrap()).abs() < 1e-9);
        prop_assert!((r.baseline_time - n / 2.08).abs() < 1e-9);
        prop_assert_eq!(r.decisions, 0);

        let mut reversed = trace.clone();
        reversed.videos.reverse();
        let rr = simulate_stream(&reversed, &policy, &cost, 0.5).unwrap();
        prop_assert!((rr.total_time - r.total_time).abs() < 1e-9);
        prop_assert_eq!(rr.map, r.map);
    }

    #[test]
    fn per_category_static_is_at_least_as_fast_as_oblivious(seed in 0u64..1000) {
        let params = EmulatorParams { clutter_rate: 1.0, seed, ..EmulatorParams::default() };
        let train = generate_synthetic(&drifting_scenario("faster-rcnn", Split::Train, seed, 6, 6), &params).unwrap();
        let cost = CostModel::faster_rcnn();
        let oblivious = fit_static(&train, &cost, Scope::Any, 0.5).unwrap();
        let aware = fit_static_per_category(&train, &cost, 0.5).unwrap();
        let ro = simulate_stream(&train, &Policy::Static(oblivious), &cost, 0.5).unwrap();
        let ra = simulate_stream(&train, &Policy::Static(aware), &cost, 0.5).unwrap();
        for (a, o) in ra.categories.iter().zip(&ro.categories) {
            prop_assert_eq!(a.category, o.category);
            prop_assert!(a.speedup >= o.speedup);
            prop_assert!(a.map >= a.baseline_map && o.map >= o.baseline_map);
        }
    }
}

#[test]
fn loose_boxes_below_threshold_never_count() {
    let g = [gt(BBox::new(0.0, 0.0, 10.0, 10.0), 0)];
    // IoU 1/3 against the object
    let d = [det(BBox::new(5.0, 0.0, 15.0, 10.0), 0.9, 0)];
    assert_eq!(average_precision(&d, &g, 0.5), Some(0.0));
    assert_eq!(average_precision(&d, &g, 0.3), Some(1.0));
}
