//! Two-phase `(m_c, k_c)` search on a synthetic surface, then a short real
//! search with timed sequential GEMMs.
//!
//! `cargo run --release --example tune_synthetic`

use ampgemm::bench::WallTimer;
use ampgemm::tuner::{timed_evaluator, tune, Phase, SearchSpec};
use ampgemm::ClusterSpec;

fn main() -> ampgemm::Result<()> {
    let a15 = ClusterSpec::exynos_a15();
    let spec = SearchSpec {
        m_grid: (8..=200).step_by(32).collect(),
        k_grid: (64..=1024).step_by(128).collect(),
        step_m: 8,
        step_k: 8,
        ..SearchSpec::default()
    };
    let res = tune(
        &spec,
        |m, k| {
            let (dm, dk) = (m as f64 - 152.0, (k as f64 - 952.0) / 8.0);
            Ok(-(dm * dm + dk * dk))
        },
        &a15,
    )?;
    let filtered = res.log.iter().filter(|e| e.phase == Phase::Filtered).count();
    println!("synthetic peak at (152, 952): found {:?} after {} points ({filtered} filtered)", res.best, res.log.len());

    let a7 = ClusterSpec::exynos_a7();
    let small = SearchSpec {
        m_grid: vec![16, 32, 64],
        k_grid: vec![64, 128, 256],
        radius: 1,
        step_m: 16,
        step_k: 64,
        reps: 1,
        r: 256,
        ..SearchSpec::default()
    };
    let mut timer = WallTimer::new();
    let eval = timed_evaluator(&a7, small.r, small.reps, 7, &mut timer);
    let res = tune(&small, eval, &a7)?;
    println!("timed search on the slow cluster: best {:?} at {:.2} GFLOPS", res.best, res.best_score);
    for ((m, k), s) in res.surface() {
        println!("  m_c {m:>4} k_c {k:>4}  {s:.2}");
    }
    println!("tuned config: {:?}", res.apply(&a7).cache_config);
    Ok(())
}
