use proptest::prelude::*;

use poisson_lab::analytics::{closed_form_binary, closed_form_mary, estimate_bernoulli};
use poisson_lab::channel::{path_energy, Decoder, EncoderPolicy, TraversedSegment};
use poisson_lab::process::{poisson_pmf, sample_homogeneous, Timeline};
use poisson_lab::schemes::make_mary;
use poisson_lab::{MeanAccumulator, RandomSource};

proptest! {
    #[test]
    fn pmf_sums_to_one(mean in 0.0f64..=50.0) {
        let total: f64 = (0..=200).map(|k| poisson_pmf(mean, k).unwrap()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12, "{total}");
    }

    #[test]
    fn wilson_is_ordered_and_shrinks(n in 1u64..1_000_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let e = estimate_bernoulli(k, n).unwrap();
        prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.mean && e.mean <= e.ci_high && e.ci_high <= 1.0);
        prop_assert!(e.stderr >= 0.0);
        let bigger = estimate_bernoulli(4 * k, 4 * n).unwrap();
        prop_assert!(bigger.half_width() < e.half_width());
    }

    #[test]
    fn merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let mut all = MeanAccumulator::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (MeanAccumulator::default(), MeanAccumulator::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        prop_assert_eq!(a.count(), all.count());
        prop_assert!((a.mean() - all.mean()).abs() <= 1e-9 * (1.0 + all.mean().abs()));
        prop_assert!((a.sample_variance() - all.sample_variance()).abs() <= 1e-7 * (1.0 + all.sample_variance()));
    }

    #[test]
    fn binary_closed_form_is_monotone(a in 0.01f64..50.0, t in 0.01f64..5.0, step in 1.01f64..2.0) {
        let base = closed_form_binary(a, t).unwrap();
        for r in [closed_form_binary(a * step, t).unwrap(), closed_form_binary(a, t * step).unwrap()] {
            prop_assert!(r.p_err_given[1] < base.p_err_given[1]);
            // 1 - e^{-AT} rounds to 1.0 once AT passes about 37
            prop_assert!(r.energy_given[1] >= base.energy_given[1]);
            prop_assert!(r.energy_given[1] <= 1.0);
        }
    }

    #[test]
    fn correct_equals_energy_exactly(m in 2usize..20, a in 0.01f64..100.0, t in 0.001f64..10.0) {
        let r = closed_form_mary(m, a, t).unwrap();
        prop_assert_eq!(r.p_err_given[0], 0.0);
        prop_assert_eq!(r.energy_given[0], 0.0);
        for k in 1..m {
            prop_assert_eq!(1.0 - r.p_err_given[k], r.energy_given[k]);
        }
    }

    /// A count anywhere in the window where message `k` transmits, including
    /// the window's closing instant, decodes to `k`.
    #[test]
    fn decoder_inverts_encoder(m in 2usize..40, t in 0.001f64..100.0, k in 1usize..40, u in 0.0f64..=1.0) {
        let k = 1 + (k - 1) % (m - 1).max(1);
        let s = make_mary(m, 1.0, t).unwrap();
        let empty = Timeline::new(t).unwrap();
        let mut rng = RandomSource::new(0, 0).private_rng();
        let mut now = 0.0;
        let mut seg = s.query(k, now, &empty, &mut rng);
        while seg.rate == 0.0 {
            now = seg.valid_until;
            seg = s.query(k, now, &empty, &mut rng);
        }
        let (start, end) = (now, seg.valid_until);
        prop_assert!(start < end && end <= t);
        let at = (start + u * (end - start)).max(start.next_up()).min(end);
        prop_assert_eq!(s.decode(&Timeline::from_events(t, vec![at]).unwrap()), k);
    }

    #[test]
    fn counts_are_additive(seed in any::<u64>(), rate in 0.0f64..20.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let horizon = 3.0;
        let tl = sample_homogeneous(rate, horizon, &mut RandomSource::new(seed, 0).channel_rng()).unwrap();
        let (lo, hi) = if a <= b { (a * horizon, b * horizon) } else { (b * horizon, a * horizon) };
        prop_assert_eq!(tl.count_between(0.0, lo) + tl.count_between(lo, hi) + tl.count_between(hi, horizon), tl.len());
        prop_assert!(tl.events().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(tl.events().iter().all(|&x| (0.0..=horizon).contains(&x)));
    }

    #[test]
    fn path_energy_is_the_sum(segs in prop::collection::vec((0.0f64..100.0, 0.0f64..10.0), 0..50)) {
        let e = path_energy(segs.iter().map(|&(rate, duration)| TraversedSegment { rate, duration })).unwrap();
        let direct: f64 = segs.iter().map(|(r, d)| r * d).sum();
        prop_assert!(e >= 0.0);
        prop_assert!((e - direct).abs() <= 1e-9 * (1.0 + direct));
    }

    #[test]
    fn sources_are_reproducible(seed in any::<u64>(), stream in any::<u64>()) {
        let src = RandomSource::new(seed, stream);
        let a = sample_homogeneous(5.0, 2.0, &mut src.channel_rng()).unwrap();
        let b = sample_homogeneous(5.0, 2.0, &mut src.channel_rng()).unwrap();
        prop_assert_eq!(a.events(), b.events());
    }
}
