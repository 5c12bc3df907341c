//! Prints the work plan of every policy on the default big.LITTLE topology.
//!
//! `cargo run --example plan_dump`

use ampgemm::bench::Setup;
use ampgemm::scheduler::render_plan;
use ampgemm::{ClusterSpec, CoarseLoop, FineLoops, Ratio, SchedulingPolicy};

fn main() -> ampgemm::Result<()> {
    let cases = [
        (SchedulingPolicy::Sss, CoarseLoop::Loop1, 1),
        (SchedulingPolicy::Sas, CoarseLoop::Loop1, 3),
        (SchedulingPolicy::CaSas, CoarseLoop::Loop3, 5),
        (SchedulingPolicy::Das, CoarseLoop::Loop3, 1),
        (SchedulingPolicy::CaDas, CoarseLoop::Loop3, 1),
    ];
    for (policy, coarse, ratio) in cases {
        let setup = Setup::new(
            policy,
            ClusterSpec::exynos_a15(),
            Some(ClusterSpec::exynos_a7()),
            Some(coarse),
            FineLoops::Loop4,
            Ratio::integer(ratio),
        )?;
        println!("== {policy} (coarse loop {}, R = {ratio})", coarse.id());
        println!("{}", render_plan(&setup.plan(2048, 2048, 2048)?));
    }

    // Loop 2 as coarse loop is refused.
    let err = Setup::new(
        SchedulingPolicy::Sas,
        ClusterSpec::exynos_a15(),
        Some(ClusterSpec::exynos_a7()),
        Some(CoarseLoop::Loop3),
        FineLoops::Loop4,
        Ratio::integer(1),
    )
    .and_then(|s| {
        let mut tree = match &s.trees {
            ampgemm::Trees::Single(t) => t.clone(),
            ampgemm::Trees::Dual { fast, .. } => fast.clone(),
        };
        tree.loop_degrees = [1, 2, 1, 4, 1];
        Ok(ampgemm::validate_control_tree(&tree, &s.topology))
    })?;
    println!("Loop 2 degree 2: {err:?}");
    Ok(())
}
