#![allow(dead_code)]

use ampgemm::bench::Setup;
use ampgemm::engine::{gemm_parallel_with, EngineOptions};
use ampgemm::scheduler::{CoarseWork, SchedulingPolicy, WorkPlan};
use ampgemm::{
    gemm_sequential, CacheConfig, ClusterSpec, CoarseLoop, ControlTree, CoreClass, ExecutionStats, FineLoops, Matrix,
    Ratio,
};

/// Scaled-down fast-class blocking so that small problems span several blocks.
pub fn fast_cfg() -> CacheConfig {
    CacheConfig::new(64, 48, 24, 4, 4).unwrap()
}

/// Scaled-down slow-class blocking with its own, smaller `k_c`.
pub fn slow_cfg() -> CacheConfig {
    CacheConfig::new(64, 20, 12, 4, 4).unwrap()
}

pub fn fast_cluster(cores: usize) -> ClusterSpec {
    ClusterSpec::new(CoreClass::Fast, cores, 32768, 1 << 20, fast_cfg())
}

/// L2 sized so that the shared `k_c = 48` leaves `m_c = 8` after harmonization.
pub fn slow_cluster(cores: usize) -> ClusterSpec {
    ClusterSpec::new(CoreClass::Slow, cores, 32768, 6144, slow_cfg())
}

pub fn setup(policy: SchedulingPolicy, ratio: u64, coarse: Option<CoarseLoop>, fine: FineLoops) -> Setup {
    Setup::new(policy, fast_cluster(4), Some(slow_cluster(4)), coarse, fine, Ratio::integer(ratio)).unwrap()
}

pub fn run(plan: &WorkPlan, a: &Matrix, b: &Matrix, c: &mut Matrix) -> ExecutionStats {
    let opts = EngineOptions {
        track_ownership: true,
        ..Default::default()
    };
    gemm_parallel_with(a.view(), b.view(), c.view_mut(), plan, opts).unwrap()
}

/// Sequential result that a parallel run must match bit for bit: the
/// sequential nest with each cluster's effective `k_c` over the columns that
/// cluster owns.
pub fn sequential_oracle(plan: &WorkPlan, a: &Matrix, b: &Matrix, c0: &Matrix) -> Matrix {
    let seq = |cfg: CacheConfig| {
        let mut c = c0.clone();
        gemm_sequential(a.view(), b.view(), c.view_mut(), &ControlTree::sequential(cfg)).unwrap();
        c
    };
    let mut out = seq(plan.clusters[0].tree.cache_config);
    if plan.coarse == Some(CoarseLoop::Loop1) {
        for cp in &plan.clusters[1..] {
            if let CoarseWork::Static(cols) = cp.coarse {
                let other = seq(cp.tree.cache_config);
                for j in cols.begin..cols.end {
                    for i in 0..out.rows() {
                        out[(i, j)] = other[(i, j)];
                    }
                }
            }
        }
    }
    out
}

/// Number of micro-kernel calls the plan must make: one per micro-tile per
/// `k_c` block, counted with each cluster's own blocking over its share.
pub fn expected_microkernels(plan: &WorkPlan) -> u64 {
    let (m, n, k) = (plan.m as u64, plan.n as u64, plan.k as u64);
    if m == 0 || n == 0 || k == 0 {
        return 0;
    }
    match plan.coarse {
        Some(CoarseLoop::Loop1) if plan.clusters.len() > 1 => plan
            .clusters
            .iter()
            .map(|cp| {
                let cfg = cp.tree.cache_config;
                let cols = match cp.coarse {
                    CoarseWork::Static(r) => r.len() as u64,
                    _ => n,
                };
                m.div_ceil(cfg.m_r as u64) * cols.div_ceil(cfg.n_r as u64) * k.div_ceil(cfg.k_c as u64)
            })
            .sum(),
        _ => {
            // Loop 3 split (static or dynamic) or a single cluster: rows are
            // divided in multiples of m_r, so the tile count is that of the whole.
            let cfg = plan.clusters[0].tree.cache_config;
            m.div_ceil(cfg.m_r as u64) * n.div_ceil(cfg.n_r as u64) * k.div_ceil(cfg.k_c as u64)
        }
    }
}
