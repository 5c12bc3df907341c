//! Property tests for the static splitters, the Loop 3 dispatcher and tree harmonization.

use std::sync::Arc;

use ampgemm::model::{max_mc_for_l2, CacheConfig, ClusterSpec, CoarseLoop, CoreClass, Range, Ratio};
use ampgemm::scheduler::{harmonize_trees, split_even, split_ratio, ChunkDispatcher};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_tiling(parts: &[Range], extent: usize) {
    let mut at = 0;
    for r in parts {
        assert_eq!(r.begin, at, "gap or overlap at {at}: {parts:?}");
        assert!(r.begin <= r.end);
        at = r.end;
    }
    assert_eq!(at, extent);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn split_even_tiles_aligned_and_balanced(extent in 0usize..5000, parts in 1usize..17, align in 1usize..17) {
        let v = split_even(extent, parts, align);
        prop_assert_eq!(v.len(), parts);
        assert_tiling(&v, extent);
        for r in &v[..parts - 1] {
            prop_assert_eq!(r.end % align, 0);
        }
        let lens: Vec<usize> = v.iter().map(|r| r.len()).collect();
        let (lo, hi) = (*lens.iter().min().unwrap(), *lens.iter().max().unwrap());
        prop_assert!(hi - lo <= align, "{lens:?}");
        // remainder units go to the lowest indices
        let units: Vec<usize> = v[..parts - 1].iter().map(|r| r.len() / align).collect();
        prop_assert!(units.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn split_ratio_tiles_and_rounds(extent in 0usize..100_000, num in 1u64..50, den in 1u64..50, align in 1usize..17) {
        let ratio = Ratio::new(num, den);
        let (f, s) = split_ratio(extent, ratio, align);
        assert_tiling(&[f, s], extent);
        if f.end != extent {
            prop_assert_eq!(f.end % align, 0);
        }
        // s is the multiple of align nearest to extent * R / (R + 1), clamped
        let exact = extent as f64 * num as f64 / (num + den) as f64;
        let dist = (f.end as f64 - exact).abs();
        prop_assert!(dist <= align as f64 / 2.0 + 1e-9 || f.end == extent, "s={} exact={exact}", f.end);
    }

    #[test]
    fn ratio_one_matches_even_split(extent in 0usize..100_000, align in 1usize..33) {
        let (f, s) = split_ratio(extent, Ratio::integer(1), align);
        prop_assert_eq!(vec![f, s], split_even(extent, 2, align));
    }

    #[test]
    fn fast_share_grows_with_ratio(extent in 0usize..100_000, align in 1usize..17,
                                   a in (1u64..40, 1u64..40), b in (1u64..40, 1u64..40)) {
        let (ra, rb) = (Ratio::new(a.0, a.1), Ratio::new(b.0, b.1));
        let (lo, hi) = if ra.as_f64() <= rb.as_f64() { (ra, rb) } else { (rb, ra) };
        prop_assert!(split_ratio(extent, lo, align).0.end <= split_ratio(extent, hi, align).0.end);
    }

    #[test]
    fn dispatcher_covers_once_with_bounded_chunks(extent in 0usize..=100_000, fast in 1usize..400,
                                                  slow in 1usize..400, seed in any::<u64>()) {
        let d = ChunkDispatcher::new(extent, fast, slow);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chunks = Vec::new();
        let mut last_cursor = 0;
        loop {
            let class = if rng.gen_bool(0.5) { CoreClass::Fast } else { CoreClass::Slow };
            match d.next_chunk(class) {
                Some(r) => {
                    prop_assert!(r.len() >= 1 && r.len() <= d.chunk_size(class));
                    chunks.push(r);
                }
                None => break,
            }
            prop_assert!(d.cursor() >= last_cursor && d.cursor() <= extent);
            last_cursor = d.cursor();
        }
        assert_tiling(&chunks, extent);
        prop_assert!(d.next_chunk(CoreClass::Fast).is_none());
    }

    #[test]
    fn harmonize_is_idempotent(k_fast in 1usize..2000, m_fast in 1usize..64, k_slow in 1usize..2000,
                               m_slow in 1usize..64, l2_kib in 64usize..4096, ovr in proptest::option::of(1usize..64),
                               coarse3 in any::<bool>()) {
        let fast = CacheConfig::new(4096, k_fast, 4 * m_fast, 4, 4).unwrap();
        let slow = CacheConfig::new(4096, k_slow, 4 * m_slow, 4, 4).unwrap();
        let cluster = ClusterSpec::new(CoreClass::Slow, 4, 32768, l2_kib * 1024, slow);
        let coarse = if coarse3 { Some(CoarseLoop::Loop3) } else { Some(CoarseLoop::Loop1) };
        let ovr = ovr.map(|m| 4 * m);
        if let Ok((f1, s1)) = harmonize_trees(&fast, &slow, coarse, ovr, &cluster) {
            let (f2, s2) = harmonize_trees(&f1, &s1, coarse, ovr, &cluster).unwrap();
            prop_assert_eq!((f1, s1), (f2, s2));
            if coarse3 {
                prop_assert_eq!(s1.k_c, fast.k_c);
            } else {
                prop_assert_eq!((f1, s1), (fast, slow));
            }
        }
    }

    #[test]
    fn max_mc_is_the_largest_fitting_multiple(k_c in 1usize..4000, l2 in 1usize..(8 << 20), m_r in 1usize..9) {
        let m = max_mc_for_l2(k_c, l2, 8, m_r, 0.5);
        prop_assert_eq!(m % m_r, 0);
        prop_assert!((m * k_c * 8) as f64 <= 0.5 * l2 as f64);
        prop_assert!(((m + m_r) * k_c * 8) as f64 > 0.5 * l2 as f64);
    }
}

#[test]
fn spec_examples() {
    assert_eq!(split_even(10, 4, 1), vec![Range::new(0, 3), Range::new(3, 6), Range::new(6, 8), Range::new(8, 10)]);
    assert_eq!(split_even(0, 3, 4), vec![Range::new(0, 0); 3]);
    assert_eq!(split_ratio(1024, Ratio::integer(3), 4), (Range::new(0, 768), Range::new(768, 1024)));
    assert_eq!(split_ratio(100, Ratio::integer(5), 4), (Range::new(0, 84), Range::new(84, 100)));
}

#[test]
fn dispatcher_hand_simulation() {
    let d = ChunkDispatcher::new(304, 152, 32);
    assert_eq!(d.next_chunk(CoreClass::Fast), Some(Range::new(0, 152)));
    assert_eq!(d.next_chunk(CoreClass::Slow), Some(Range::new(152, 184)));
    assert_eq!(d.next_chunk(CoreClass::Fast), Some(Range::new(184, 304)));
    assert_eq!(d.next_chunk(CoreClass::Slow), None);
    assert_eq!(d.next_chunk(CoreClass::Slow), None);
}

#[test]
fn dispatcher_under_concurrent_leaders() {
    for seed in 0..20u64 {
        let extent = 100_000 - seed as usize * 37;
        let d = Arc::new(ChunkDispatcher::new(extent, 152, 32));
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let d = Arc::clone(&d);
                std::thread::spawn(move || {
                    let class = if t % 2 == 0 { CoreClass::Fast } else { CoreClass::Slow };
                    let mut got = Vec::new();
                    while let Some(r) = d.next_chunk(class) {
                        assert!(r.len() <= d.chunk_size(class));
                        got.push(r);
                        if (r.begin as u64 ^ seed) % 7 == 0 {
                            std::thread::yield_now();
                        }
                    }
                    got
                })
            })
            .collect();
        let mut all: Vec<Range> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        all.sort_by_key(|r| r.begin);
        assert_tiling(&all, extent);
    }
}
