mod common;

use common::{PUBLISHED_TABLE, TAU_LOOP_NS};
use proptest::prelude::*;
use zenopm::analysis::{expectation, relative_performance, sigma_pm, sigma_sm, ArrivalHistogram};

fn histogram() -> impl Strategy<Value = ArrivalHistogram> {
    (-50.0f64..50.0, 0.001f64..1.0, prop::collection::vec(0u32..1000, 1..200))
        .prop_filter("needs counts", |(_, _, c)| c.iter().any(|&x| x > 0))
        .prop_map(|(origin, bin, counts)| {
            ArrivalHistogram::from_counts(origin, bin, counts.into_iter().map(f64::from).collect()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn window_is_idempotent(h in histogram(), fraction in 0.0f64..1.0) {
        let once = h.window(fraction).unwrap();
        prop_assert_eq!(once.window(fraction).unwrap(), once);
    }

    #[test]
    fn window_keeps_the_peak(h in histogram(), fraction in 0.0f64..1.0) {
        let w = h.window(fraction).unwrap();
        let peak = h.counts[h.peak_index().unwrap()];
        prop_assert_eq!(w.counts[w.peak_index().unwrap()], peak);
        prop_assert!(w.counts.iter().all(|&c| c >= fraction * peak));
    }

    #[test]
    fn subdividing_bins_keeps_the_mean(h in histogram(), k in 1usize..10) {
        let a = h.moments().unwrap();
        let b = h.subdivide(k).moments().unwrap();
        let scale = 1.0 + h.origin_ns.abs() + h.bin_ns * h.counts.len() as f64;
        prop_assert!((a.mean_ns - b.mean_ns).abs() < 1e-12 * scale);
        // spreading each bin uniformly adds its own width's variance
        let extra = h.bin_ns.powi(2) * ((k * k) as f64 - 1.0) / (12.0 * (k * k) as f64);
        prop_assert!((b.std_ns.powi(2) - a.std_ns.powi(2) - extra).abs() < 1e-10 * scale * scale);
        prop_assert!((a.counts - b.counts).abs() < 1e-9 * a.counts);
    }

    #[test]
    fn ratio_does_not_depend_on_time_units(
        mean in 0.0f64..7.0,
        std in 0.01f64..2.0,
        loops in 1usize..20,
        tau in 0.1f64..1.0,
    ) {
        let in_ns = {
            let o = expectation(mean, loops, tau).unwrap();
            relative_performance(sigma_sm(o), sigma_pm(std, loops, tau).unwrap())
        };
        let in_ps = {
            let o = expectation(mean * 1e3, loops, tau * 1e3).unwrap();
            relative_performance(sigma_sm(o), sigma_pm(std * 1e3, loops, tau * 1e3).unwrap())
        };
        prop_assert!((in_ns - in_ps).abs() < 1e-12 * in_ns.max(1.0));
    }
}

#[test]
fn published_rows_are_self_consistent() {
    for row in &PUBLISHED_TABLE {
        let o = expectation(row.mean_ns, row.loops, TAU_LOOP_NS).unwrap();
        let s = sigma_pm(row.std_ns, row.loops, TAU_LOOP_NS).unwrap();
        assert!((o - row.expectation).abs() <= 0.01, "row {}: ⟨O⟩ {o:.4} vs {}", row.label, row.expectation);
        assert!((s - row.sigma_pm).abs() <= 0.01, "row {}: σ_PM {s:.4} vs {}", row.label, row.sigma_pm);
    }
}

#[test]
fn both_uncertainties_zero_gives_zero_ratio() {
    assert_eq!(relative_performance(0.0, 0.0), 0.0);
    assert_eq!(sigma_sm(1.02), 0.0);
}
