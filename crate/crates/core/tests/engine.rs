//! Engine invariants: oracle equivalence, tile coverage, barrier structure,
//! ownership and determinism.

mod common;

use std::sync::Arc;

use ampgemm::engine::PackingGroup;
use ampgemm::reference::{max_relative_error, naive_gemm, tolerance};
use ampgemm::scheduler::SchedulingPolicy;
use ampgemm::{gemm, CoarseLoop, Error, FineLoops, GemmRequest, Matrix, Ratio, Topology, Trees};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FINES: [FineLoops; 3] = [FineLoops::Loop4, FineLoops::Loop5, FineLoops::Both];

fn check(policy: SchedulingPolicy, ratio: u64, coarse: CoarseLoop, fine: FineLoops, (m, n, k): (usize, usize, usize), seed: u64) {
    let s = setup(policy, ratio, Some(coarse), fine);
    let plan = s.plan(m, n, k).unwrap();
    let a = Matrix::random(m, k, seed);
    let b = Matrix::random(k, n, seed + 1);
    let c0 = Matrix::random(m, n, seed + 2);
    let mut want = c0.clone();
    naive_gemm(&a, &b, &mut want);
    let mut got = c0.clone();
    let stats = run(&plan, &a, &b, &mut got);
    let label = format!("{policy} R={ratio} coarse={coarse:?} fine={} {m}x{n}x{k}", fine.label());
    let err = max_relative_error(&got, &want, &a, &b, &c0);
    assert!(err <= tolerance(k), "{label}: error {err:e}");
    assert!(got.bitwise_eq(&sequential_oracle(&plan, &a, &b, &c0)), "{label}: differs from sequential");
    assert_eq!(stats.total_microkernels(), expected_microkernels(&plan), "{label}: tile count");
    assert_eq!(stats.ownership_conflicts, 0, "{label}");
}

#[test]
fn every_policy_and_loop_choice_matches_the_oracle() {
    let sizes = [(1, 1, 1), (5, 7, 3), (37, 29, 41), (64, 64, 64), (97, 130, 50)];
    for (i, &size) in sizes.iter().enumerate() {
        for fine in FINES {
            for coarse in [CoarseLoop::Loop1, CoarseLoop::Loop3] {
                check(SchedulingPolicy::Sss, 1, coarse, fine, size, i as u64);
                check(SchedulingPolicy::Sas, 3, coarse, fine, size, i as u64);
                check(SchedulingPolicy::CaSas, 5, coarse, fine, size, i as u64);
            }
            check(SchedulingPolicy::Das, 1, CoarseLoop::Loop3, fine, size, i as u64);
            check(SchedulingPolicy::CaDas, 1, CoarseLoop::Loop3, fine, size, i as u64);
        }
    }
}

#[test]
fn random_rectangles() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for t in 0..12 {
        let size = (rng.gen_range(1..=160), rng.gen_range(1..=160), rng.gen_range(1..=160));
        check(SchedulingPolicy::CaSas, 2, CoarseLoop::Loop1, FineLoops::Loop4, size, t);
        check(SchedulingPolicy::CaDas, 1, CoarseLoop::Loop3, FineLoops::Loop5, size, t);
    }
}

#[test]
fn loop1_split_never_crosses_clusters() {
    for policy in [SchedulingPolicy::Sss, SchedulingPolicy::Sas, SchedulingPolicy::CaSas] {
        let plan = setup(policy, 3, Some(CoarseLoop::Loop1), FineLoops::Loop4).plan(100, 150, 90).unwrap();
        let a = Matrix::random(100, 90, 1);
        let b = Matrix::random(90, 150, 2);
        let mut c = Matrix::zeros(100, 150);
        let stats = run(&plan, &a, &b, &mut c);
        assert_eq!(stats.global_barriers, 0, "{policy}");
        assert!(stats.clusters.iter().all(|cs| cs.barriers > 0));
        assert!(stats.clusters.iter().all(|cs| cs.packed_b_bytes > 0), "each cluster packs its own B_c");
    }
}

#[test]
fn loop3_split_shares_b_across_clusters() {
    let plan = setup(SchedulingPolicy::CaDas, 1, Some(CoarseLoop::Loop3), FineLoops::Loop4).plan(100, 150, 90).unwrap();
    let a = Matrix::random(100, 90, 1);
    let b = Matrix::random(90, 150, 2);
    let mut c = Matrix::zeros(100, 150);
    let stats = run(&plan, &a, &b, &mut c);
    assert!(stats.global_barriers > 0);
    // B is packed exactly once per (j_c, p_c) in total
    let packed: u64 = stats.clusters.iter().map(|c| c.packed_b_bytes).sum();
    let cfg = fast_cfg();
    let expect = 150usize.div_ceil(cfg.n_r) * cfg.n_r * 90 * 8;
    assert_eq!(packed, expect as u64);
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    for policy in [SchedulingPolicy::Sas, SchedulingPolicy::CaDas] {
        let coarse = if policy.is_dynamic() { CoarseLoop::Loop3 } else { CoarseLoop::Loop1 };
        let plan = setup(policy, 3, Some(coarse), FineLoops::Both).plan(77, 91, 130).unwrap();
        let a = Matrix::random(77, 130, 5);
        let b = Matrix::random(130, 91, 6);
        let first = {
            let mut c = Matrix::zeros(77, 91);
            run(&plan, &a, &b, &mut c);
            c
        };
        for _ in 0..5 {
            let mut c = Matrix::zeros(77, 91);
            run(&plan, &a, &b, &mut c);
            assert!(c.bitwise_eq(&first), "{policy}");
        }
    }
}

#[test]
fn gemm_request_api() {
    let s = setup(SchedulingPolicy::Sas, 3, Some(CoarseLoop::Loop1), FineLoops::Loop4);
    let a = Matrix::random(40, 30, 1);
    let b = Matrix::random(30, 50, 2);
    let mut c = Matrix::zeros(40, 50);
    let mut want = c.clone();
    naive_gemm(&a, &b, &mut want);
    let stats = gemm(GemmRequest {
        a: &a,
        b: &b,
        c: &mut c,
        topology: &s.topology,
        policy: s.policy,
        trees: &s.trees,
        ratio: s.ratio,
    })
    .unwrap();
    assert_eq!(stats.threads.len(), 8);
    assert!(max_relative_error(&c, &want, &a, &b, &Matrix::zeros(40, 50)) <= tolerance(30));

    let mut bad_c = Matrix::zeros(41, 50);
    let err = gemm(GemmRequest {
        a: &a,
        b: &b,
        c: &mut bad_c,
        topology: &s.topology,
        policy: s.policy,
        trees: &s.trees,
        ratio: s.ratio,
    })
    .unwrap_err();
    assert!(matches!(err, Error::Conformance(_)));
}

#[test]
fn plan_errors() {
    let topo = Topology::big_little(fast_cluster(4), slow_cluster(4)).unwrap();
    let s = setup(SchedulingPolicy::Das, 1, Some(CoarseLoop::Loop1), FineLoops::Loop4);
    assert!(matches!(s.plan(64, 64, 64), Err(Error::DynamicLoop1)));
    let s = setup(SchedulingPolicy::Sas, 1, Some(CoarseLoop::Loop1), FineLoops::Loop4);
    let zero = ampgemm::make_plan(SchedulingPolicy::Sas, 8, 8, 8, &topo, &s.trees, Ratio::integer(0));
    assert!(matches!(zero, Err(Error::NonPositiveRatio(_))));
    let one_tree = ampgemm::make_plan(SchedulingPolicy::CaSas, 8, 8, 8, &topo, &s.trees, Ratio::integer(2));
    assert!(matches!(one_tree, Err(Error::TreeCount { expected: 2, got: 1, .. })));
    assert!(matches!(s.trees, Trees::Single(_)));
}

#[test]
fn empty_dimensions_leave_c_alone() {
    for (m, n, k) in [(0, 5, 5), (5, 0, 5), (5, 5, 0)] {
        let plan = setup(SchedulingPolicy::CaDas, 1, Some(CoarseLoop::Loop3), FineLoops::Loop4).plan(m, n, k).unwrap();
        let a = Matrix::random(m, k, 1);
        let b = Matrix::random(k, n, 2);
        let c0 = Matrix::random(m, n, 3);
        let mut c = c0.clone();
        let stats = run(&plan, &a, &b, &mut c);
        assert!(c.bitwise_eq(&c0));
        assert_eq!(stats.total_microkernels(), 0);
    }
}

#[test]
fn packing_barrier_publishes_every_slice() {
    // Four members fill disjoint quarters in a random order with random
    // delays; after the barrier each member checks the whole buffer.
    for round in 0..50u64 {
        let group = Arc::new(PackingGroup::new(4));
        let buf: Arc<Vec<std::sync::atomic::AtomicU64>> =
            Arc::new((0..400).map(|_| std::sync::atomic::AtomicU64::new(0)).collect());
        let handles: Vec<_> = (0..4u64)
            .map(|t| {
                let (group, buf) = (Arc::clone(&group), Arc::clone(&buf));
                std::thread::spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(round * 4 + t);
                    for _ in 0..rng.gen_range(0..4) {
                        std::thread::yield_now();
                    }
                    for i in (t as usize * 100)..(t as usize + 1) * 100 {
                        buf[i].store(i as u64 + 1, std::sync::atomic::Ordering::Relaxed);
                    }
                    group.synchronize_packing();
                    let sum: u64 = buf.iter().map(|v| v.load(std::sync::atomic::Ordering::Relaxed)).sum();
                    assert_eq!(sum, 400 * 401 / 2);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(group.completed(), 1);
    }
    let solo = PackingGroup::new(1);
    solo.synchronize_packing();
}
