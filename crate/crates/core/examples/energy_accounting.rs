//! Energy and GFLOPS/W from a power trace, a constant sensor and a replayed
//! trace attached to a benchmark run.
//!
//! `cargo run --release --example energy_accounting`

use ampgemm::bench::{run_bench, write_csv, Setup, SyntheticTimer};
use ampgemm::energy::{format_trace, integrate_energy, ConstantPower, PowerSample, ReplaySampler};
use ampgemm::{ClusterSpec, CoarseLoop, FineLoops, Ratio, SchedulingPolicy};

fn main() -> ampgemm::Result<()> {
    // 40 samples at the nominal 250 ms period: A15, A7, GPU, memory.
    let trace: Vec<PowerSample> =
        (0..40).map(|i| PowerSample::new(i as f64 * 0.25, [2.0 + 0.05 * i as f64, 0.5, 0.25, 0.25])).collect();
    let report = integrate_energy(&trace, 1.0, 8.0).expect("window inside the trace");
    println!("energy over [1, 8] s: {:.3} J total, {:.3} W average", report.total_joules, report.avg_watts);
    println!("per domain: {:?}", report.joules);
    print!("first samples:\n{}", format_trace(&trace[..3]));

    let setup = Setup::new(
        SchedulingPolicy::CaSas,
        ClusterSpec::exynos_a15(),
        Some(ClusterSpec::exynos_a7()),
        Some(CoarseLoop::Loop1),
        FineLoops::Loop4,
        Ratio::integer(3),
    )?;
    let sizes = [(128, 128, 128), (192, 192, 192)];

    // Mock clock plus constant sensor: the CSV is identical on every run.
    let recs = run_bench(&setup, &sizes, 2, 1, &mut SyntheticTimer::new(4.0), &mut ConstantPower::new(3.0))?;
    write_csv(&recs, std::io::stdout())?;

    let mut replay = ReplaySampler::new(trace).map_err(ampgemm::Error::Config)?;
    let recs = run_bench(&setup, &sizes, 2, 1, &mut SyntheticTimer::new(4.0), &mut replay)?;
    write_csv(&recs, std::io::stdout())?;
    Ok(())
}
