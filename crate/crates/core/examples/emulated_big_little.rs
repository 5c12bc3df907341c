//! Runs SSS, SAS and CA-DAS on an emulated asymmetric pair of clusters and
//! reports wall time and the fast/slow micro-kernel split.
//!
//! The slow cluster repeats each micro-kernel's arithmetic on scratch data,
//! so it is about four times slower per call. Timings are only meaningful on
//! a host with at least eight hardware threads.
//!
//! `cargo run --release --example emulated_big_little -- 768`

use ampgemm::bench::{bench_options, Setup};
use ampgemm::engine::gemm_parallel_with;
use ampgemm::{CacheConfig, ClusterSpec, CoarseLoop, CoreClass, FineLoops, Matrix, Ratio, SchedulingPolicy};

fn main() -> ampgemm::Result<()> {
    let r: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(768);
    let fast = ClusterSpec::new(CoreClass::Fast, 4, 32768, 1 << 20, CacheConfig::new(4096, 256, 64, 4, 4)?);
    let slow = ClusterSpec::new(CoreClass::Slow, 4, 32768, 64 * 1024, CacheConfig::new(4096, 128, 32, 4, 4)?)
        .with_slowdown(4.0);
    let a = Matrix::random(r, r, 1);
    let b = Matrix::random(r, r, 2);

    println!("host threads: {:?}", std::thread::available_parallelism().map(|n| n.get()));
    println!("{:<8} {:>3} {:>6} {:>9} {:>10} {:>10}", "policy", "R", "coarse", "wall_s", "uk_fast", "uk_slow");
    let mut cases = vec![(SchedulingPolicy::Sss, 1, CoarseLoop::Loop1)];
    cases.extend((1..=7).map(|ratio| (SchedulingPolicy::Sas, ratio, CoarseLoop::Loop1)));
    cases.push((SchedulingPolicy::CaDas, 1, CoarseLoop::Loop3));
    for (policy, ratio, coarse) in cases {
        let setup = Setup::new(policy, fast.clone(), Some(slow.clone()), Some(coarse), FineLoops::Loop4, Ratio::integer(ratio))?;
        let plan = setup.plan(r, r, r)?;
        let mut c = Matrix::zeros(r, r);
        let stats = gemm_parallel_with(a.view(), b.view(), c.view_mut(), &plan, bench_options())?;
        println!(
            "{:<8} {:>3} {:>6} {:>9.3} {:>10} {:>10}",
            policy.name(),
            ratio,
            coarse.id(),
            stats.wall.as_secs_f64(),
            stats.microkernels_by_class(CoreClass::Fast),
            stats.microkernels_by_class(CoreClass::Slow)
        );
    }
    Ok(())
}
