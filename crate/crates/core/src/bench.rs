//! Benchmark driver: size sweeps, oracle validation and plan dumps.
//!
//! Records are emitted as CSV with the fixed header
//! `policy,ratio,coarse,fine,m,n,k,time_s,gflops,joules,gflops_per_watt,uk_fast,uk_slow`.
//! Energy columns are empty when no power source is configured.
//! With a mock clock and a mock power source the output is reproducible byte
//! for byte, except `uk_fast`/`uk_slow` under the dynamic policies, whose
//! split is decided at run time.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::energy::PowerSampler;
use crate::engine::{gemm_parallel_with, gemm_sequential, EngineOptions, ExecutionStats, LabelOnly};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ClusterSpec, CoarseLoop, ControlTree, CoreClass, FineLoops, Ratio, Topology};
use crate::reference::{max_relative_error, naive_gemm, tolerance};
use crate::scheduler::{make_plan, plan_rows, render_plan, thread_label, SchedulingPolicy, Trees, WorkPlan};

/// `2 m n k / seconds / 1e9`.
pub fn gflops(m: usize, n: usize, k: usize, seconds: f64) -> f64 {
    2.0 * m as f64 * n as f64 * k as f64 / seconds / 1e9
}

/// Measures timed regions on a benchmark timeline (seconds).
pub trait Timer {
    /// Current position on the timeline.
    fn now(&self) -> f64;
    /// Runs `work` and returns its duration; `flops` is the work's flop count.
    fn time(&mut self, flops: f64, work: &mut dyn FnMut() -> Result<()>) -> Result<f64>;
}

/// Wall-clock timer; the timeline starts when the timer is created.
#[derive(Clone, Copy, Debug)]
pub struct WallTimer {
    origin: Instant,
}

impl WallTimer {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for WallTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl Timer for WallTimer {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }

    fn time(&mut self, _: f64, work: &mut dyn FnMut() -> Result<()>) -> Result<f64> {
        let t0 = Instant::now();
        work()?;
        Ok(t0.elapsed().as_secs_f64())
    }
}

/// Mock clock: runs the work, then charges `flops / (gflops * 1e9)` seconds.
/// Output depends only on the inputs, so benchmark tables are reproducible.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticTimer {
    pub gflops: f64,
    clock: f64,
}

impl SyntheticTimer {
    pub fn new(gflops: f64) -> Self {
        assert!(gflops > 0.0, "synthetic rate must be positive");
        Self { gflops, clock: 0.0 }
    }
}

impl Timer for SyntheticTimer {
    fn now(&self) -> f64 {
        self.clock
    }

    fn time(&mut self, flops: f64, work: &mut dyn FnMut() -> Result<()>) -> Result<f64> {
        work()?;
        let dt = flops / (self.gflops * 1e9);
        self.clock += dt;
        Ok(dt)
    }
}

/// Mock clock charging the same duration for every region.
#[derive(Clone, Copy, Debug)]
pub struct FixedTimer {
    pub seconds: f64,
    clock: f64,
}

impl FixedTimer {
    pub fn new(seconds: f64) -> Self {
        Self { seconds, clock: 0.0 }
    }
}

impl Timer for FixedTimer {
    fn now(&self) -> f64 {
        self.clock
    }

    fn time(&mut self, _: f64, work: &mut dyn FnMut() -> Result<()>) -> Result<f64> {
        work()?;
        self.clock += self.seconds;
        Ok(self.seconds)
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Everything needed to plan a GEMM except its size.
#[derive(Clone, Debug)]
pub struct Setup {
    pub policy: SchedulingPolicy,
    pub topology: Topology,
    pub trees: Trees,
    pub ratio: Ratio,
    pub coarse: Option<CoarseLoop>,
    pub fine: FineLoops,
}

impl Setup {
    /// Builds the topology and control trees for `policy`. Architecture-oblivious
    /// policies run the fast configuration on every cluster; cache-aware ones get
    /// one tree per class. `slow = None` (or the `single` policy) uses only the
    /// fast cluster.
    pub fn new(
        policy: SchedulingPolicy,
        fast: ClusterSpec,
        slow: Option<ClusterSpec>,
        coarse: Option<CoarseLoop>,
        fine: FineLoops,
        ratio: Ratio,
    ) -> Result<Self> {
        let slow = if policy == SchedulingPolicy::SingleCluster {
            None
        } else {
            slow.filter(|s| s.core_count > 0)
        };
        let topology = match &slow {
            Some(s) => {
                if s.core_count != fast.core_count {
                    return Err(Error::Topology(format!(
                        "both clusters must run the same number of threads (fast {}, slow {}): \
                         one control tree's loop degrees must multiply to the total thread count",
                        fast.core_count, s.core_count
                    )));
                }
                Topology::big_little(fast.clone(), s.clone())?
            }
            None => Topology::single(fast.clone())?,
        };
        let coarse = if topology.clusters().len() == 1 && !policy.is_dynamic() {
            None
        } else {
            coarse
        };
        let trees = if policy.is_cache_aware() {
            let slow = slow.ok_or_else(|| Error::Topology(format!("policy {policy} needs a slow cluster")))?;
            Trees::Dual {
                fast: ControlTree::for_topology(fast.cache_config, coarse, fine, &topology),
                slow: ControlTree::for_topology(slow.cache_config, coarse, fine, &topology),
                slow_mc_override: None,
            }
        } else {
            Trees::Single(ControlTree::for_topology(fast.cache_config, coarse, fine, &topology))
        };
        Ok(Self {
            policy,
            topology,
            trees,
            ratio,
            coarse,
            fine,
        })
    }

    /// Coarse loop used when none is requested: Loop 3 for dynamic policies,
    /// Loop 1 for static ones.
    pub fn default_coarse(policy: SchedulingPolicy) -> CoarseLoop {
        if policy.is_dynamic() {
            CoarseLoop::Loop3
        } else {
            CoarseLoop::Loop1
        }
    }

    pub fn with_slow_mc_override(mut self, m_c: Option<usize>) -> Self {
        if let Trees::Dual { slow_mc_override, .. } = &mut self.trees {
            *slow_mc_override = m_c;
        }
        self
    }

    pub fn plan(&self, m: usize, n: usize, k: usize) -> Result<WorkPlan> {
        make_plan(self.policy, m, n, k, &self.topology, &self.trees, self.ratio)
    }

    pub fn coarse_label(&self) -> String {
        self.coarse.map_or_else(|| "none".into(), |c| c.id().to_string())
    }
}

/// Engine options used for timed runs: no ownership tracking, no pinning.
pub fn bench_options() -> EngineOptions<'static> {
    EngineOptions {
        affinity: &LabelOnly,
        track_ownership: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub policy: String,
    pub ratio: String,
    pub coarse: String,
    pub fine: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub time_s: f64,
    pub gflops: f64,
    pub joules: Option<f64>,
    pub gflops_per_watt: Option<f64>,
    pub uk_fast: u64,
    pub uk_slow: u64,
}

/// Runs one warm-up and `reps` timed GEMMs per size; the median time is
/// reported. The sampler brackets the timed repetitions; the energy of one
/// run is the window's mean power times the median time.
pub fn run_bench(
    setup: &Setup,
    sizes: &[(usize, usize, usize)],
    reps: usize,
    seed: u64,
    timer: &mut dyn Timer,
    sampler: &mut dyn PowerSampler,
) -> Result<Vec<BenchRecord>> {
    let reps = reps.max(1);
    let mut out = Vec::with_capacity(sizes.len());
    for &(m, n, k) in sizes {
        let plan = setup.plan(m, n, k)?;
        let a = Matrix::random(m, k, seed);
        let b = Matrix::random(k, n, seed.wrapping_add(1));
        let mut c = Matrix::zeros(m, n);
        let mut last = ExecutionStats::default();
        let run = |c: &mut Matrix| -> Result<ExecutionStats> {
            gemm_parallel_with(a.view(), b.view(), c.view_mut(), &plan, bench_options())
        };
        run(&mut c)?;
        let flops = 2.0 * m as f64 * n as f64 * k as f64;
        let mut times = Vec::with_capacity(reps);
        sampler.start(timer.now());
        for _ in 0..reps {
            let t = timer.time(flops, &mut || {
                last = run(&mut c)?;
                Ok(())
            })?;
            times.push(t);
        }
        let energy = sampler.stop(timer.now());
        let time_s = median(&mut times);
        let gf = gflops(m, n, k, time_s);
        out.push(BenchRecord {
            policy: setup.policy.name().into(),
            ratio: setup.ratio.to_string(),
            coarse: setup.coarse_label(),
            fine: setup.fine.label().into(),
            m,
            n,
            k,
            time_s,
            gflops: gf,
            joules: energy.map(|e| e.avg_watts * time_s),
            gflops_per_watt: energy.map(|e| gf / e.avg_watts),
            uk_fast: last.microkernels_by_class(CoreClass::Fast),
            uk_slow: last.microkernels_by_class(CoreClass::Slow),
        });
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "policy",
            "ratio",
            "coarse",
            "fine",
            "m",
            "n",
            "k",
            "time_s",
            "gflops",
            "joules",
            "gflops_per_watt",
            "uk_fast",
            "uk_slow",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `a,b,c` into square sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad size {p:?} in {s:?}")))
        })
        .collect()
}

/// Parses `lo:hi:step` into the inclusive range `lo, lo+step, ..., <= hi`.
pub fn parse_size_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("size range must be lo:hi:step, got {s:?}"));
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [lo, hi, step] if step > 0 && lo <= hi => Ok((lo..=hi).step_by(step).collect()),
        _ => Err(bad()),
    }
}

/// One checked policy/loop combination at one size.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationRow {
    pub policy: SchedulingPolicy,
    pub ratio: Ratio,
    pub coarse: Option<CoarseLoop>,
    pub fine: FineLoops,
    pub size: (usize, usize, usize),
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// Largest relative error, within tolerance.
    Pass(f64),
    /// Largest relative error, beyond tolerance.
    Mismatch(f64),
    /// The combination could not be planned.
    Rejected(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| matches!(r.outcome, Outcome::Pass(_)))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let (m, n, k) = r.size;
            let status = match &r.outcome {
                Outcome::Pass(e) => format!("ok        max_rel_err={e:.3e} tol={:.3e}", tolerance(k)),
                Outcome::Mismatch(e) => format!("MISMATCH  max_rel_err={e:.3e} tol={:.3e}", tolerance(k)),
                Outcome::Rejected(msg) => format!("REJECTED  {msg}"),
            };
            s.push_str(&format!(
                "{:<7} ratio={:<4} coarse={:<4} fine={:<2} {m}x{n}x{k}  {status}\n",
                r.policy.name(),
                r.ratio.to_string(),
                r.coarse.map_or_else(|| "none".into(), |c| c.id().to_string()),
                r.fine.label()
            ));
        }
        s
    }
}

/// One policy/ratio/coarse/fine combination to validate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Combo {
    pub policy: SchedulingPolicy,
    pub ratio: Ratio,
    pub coarse: Option<CoarseLoop>,
    pub fine: FineLoops,
}

/// Cross product of the given axes, leaving out combinations that are
/// illegal by construction (dynamic policies over Loop 1, a coarse loop for
/// the single-cluster policy).
pub fn legal_combos(
    policies: &[SchedulingPolicy],
    ratios: &[Ratio],
    coarse: &[CoarseLoop],
    fine: &[FineLoops],
) -> Vec<Combo> {
    let mut out = Vec::new();
    for &policy in policies {
        let rs: &[Ratio] = if policy.uses_ratio() { ratios } else { &[Ratio::integer(1)] };
        let cs: Vec<Option<CoarseLoop>> = match policy {
            SchedulingPolicy::SingleCluster => vec![None],
            p if p.is_dynamic() => coarse.iter().filter(|c| **c == CoarseLoop::Loop3).map(|c| Some(*c)).collect(),
            _ => coarse.iter().map(|c| Some(*c)).collect(),
        };
        for &ratio in rs {
            for &c in &cs {
                for &f in fine {
                    out.push(Combo {
                        policy,
                        ratio,
                        coarse: c,
                        fine: f,
                    });
                }
            }
        }
    }
    out
}

/// Checks every combination at every size against the naive oracle.
pub fn validate_cmd(
    fast: &ClusterSpec,
    slow: Option<&ClusterSpec>,
    combos: &[Combo],
    sizes: &[(usize, usize, usize)],
    seed: u64,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    for &(m, n, k) in sizes {
        let a = Matrix::random(m, k, seed);
        let b = Matrix::random(k, n, seed.wrapping_add(1));
        let c0 = Matrix::random(m, n, seed.wrapping_add(2));
        let mut want = c0.clone();
        naive_gemm(&a, &b, &mut want);
        for combo in combos {
            let outcome = (|| -> Result<Outcome> {
                let setup = Setup::new(combo.policy, fast.clone(), slow.cloned(), combo.coarse, combo.fine, combo.ratio)?;
                let plan = setup.plan(m, n, k)?;
                let mut got = c0.clone();
                gemm_parallel_with(a.view(), b.view(), got.view_mut(), &plan, EngineOptions::default())?;
                let err = max_relative_error(&got, &want, &a, &b, &c0);
                Ok(if err <= tolerance(k) {
                    Outcome::Pass(err)
                } else {
                    Outcome::Mismatch(err)
                })
            })()
            .unwrap_or_else(|e| Outcome::Rejected(e.to_string()));
            report.rows.push(ValidationRow {
                policy: combo.policy,
                ratio: combo.ratio,
                coarse: combo.coarse,
                fine: combo.fine,
                size: (m, n, k),
                outcome,
            });
        }
    }
    report
}

/// Sequential five-loop result for `tree`, used as the bitwise reference.
pub fn sequential_reference(a: &Matrix, b: &Matrix, c0: &Matrix, tree: &ControlTree) -> Result<Matrix> {
    let mut c = c0.clone();
    gemm_sequential(a.view(), b.view(), c.view_mut(), &ControlTree::sequential(tree.cache_config))?;
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanFormat {
    Text,
    Csv,
}

/// Dumps the plan of `setup` for an `m x n x k` problem.
pub fn plan_cmd(setup: &Setup, m: usize, n: usize, k: usize, format: PlanFormat) -> Result<String> {
    let plan = setup.plan(m, n, k)?;
    Ok(match format {
        PlanFormat::Text => render_plan(&plan),
        PlanFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["loop", "begin", "end", "threads", "note"])?;
            for r in plan_rows(&plan) {
                let (b, e) = r.range.map_or((String::new(), String::new()), |x| (x.begin.to_string(), x.end.to_string()));
                w.write_record([r.loop_id.to_string(), b, e, thread_label(r.threads), r.note.to_string()])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8")
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{ConstantPower, NoSampler};

    fn tiny(class: CoreClass, cores: usize) -> ClusterSpec {
        let cfg = crate::model::CacheConfig::new(32, 24, 16, 4, 4).unwrap();
        ClusterSpec::new(class, cores, 32768, 1 << 20, cfg)
    }

    #[test]
    fn gflops_formula() {
        assert!((gflops(1000, 1000, 1000, 0.2083) - 9.6015).abs() < 1e-3);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_sizes("64, 128,256").unwrap(), vec![64, 128, 256]);
        assert_eq!(parse_size_range("64:256:64").unwrap(), vec![64, 128, 192, 256]);
        assert!(parse_size_range("64:32:8").is_err());
        assert!(parse_sizes("a").is_err());
    }

    #[test]
    fn constant_power_identity_is_exact() {
        let setup = Setup::new(
            SchedulingPolicy::Sss,
            tiny(CoreClass::Fast, 2),
            Some(tiny(CoreClass::Slow, 2)),
            Some(CoarseLoop::Loop1),
            FineLoops::Loop4,
            Ratio::integer(1),
        )
        .unwrap();
        let recs = run_bench(&setup, &[(96, 96, 96)], 3, 7, &mut WallTimer::new(), &mut ConstantPower::new(4.0)).unwrap();
        let r = &recs[0];
        assert_eq!(r.gflops_per_watt.unwrap(), r.gflops / 4.0);
        assert_eq!(r.joules.unwrap(), 4.0 * r.time_s);
        assert_eq!(r.uk_fast + r.uk_slow, 24 * 24 * 4);
    }

    #[test]
    fn csv_is_byte_stable_with_mock_clock() {
        // Static split: the per-class micro-kernel counts are fixed by the plan.
        let setup = Setup::new(
            SchedulingPolicy::CaSas,
            tiny(CoreClass::Fast, 2),
            Some(tiny(CoreClass::Slow, 2)),
            Some(CoarseLoop::Loop3),
            FineLoops::Loop4,
            Ratio::integer(3),
        )
        .unwrap();
        let run = || {
            let recs = run_bench(&setup, &[(64, 64, 64)], 2, 1, &mut SyntheticTimer::new(2.0), &mut ConstantPower::new(3.0)).unwrap();
            let mut buf = Vec::new();
            write_csv(&recs, &mut buf).unwrap();
            buf
        };
        let first = run();
        assert!(String::from_utf8_lossy(&first).starts_with(
            "policy,ratio,coarse,fine,m,n,k,time_s,gflops,joules,gflops_per_watt,uk_fast,uk_slow\n"
        ));
        assert_eq!(first, run());
    }

    #[test]
    fn no_sampler_leaves_energy_empty() {
        let setup = Setup::new(
            SchedulingPolicy::SingleCluster,
            tiny(CoreClass::Fast, 1),
            None,
            None,
            FineLoops::Loop4,
            Ratio::integer(1),
        )
        .unwrap();
        let recs = run_bench(&setup, &[(8, 8, 8)], 1, 0, &mut FixedTimer::new(1.0), &mut NoSampler).unwrap();
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",,,"), "{text}");
    }

    #[test]
    fn unequal_clusters_are_rejected() {
        let e = Setup::new(
            SchedulingPolicy::Sss,
            tiny(CoreClass::Fast, 4),
            Some(tiny(CoreClass::Slow, 2)),
            Some(CoarseLoop::Loop1),
            FineLoops::Loop4,
            Ratio::integer(1),
        )
        .unwrap_err();
        assert!(e.to_string().contains("same number of threads"));
    }

    #[test]
    fn legal_combos_skip_dynamic_loop1() {
        let combos = legal_combos(
            &SchedulingPolicy::ALL,
            &[Ratio::integer(3)],
            &[CoarseLoop::Loop1, CoarseLoop::Loop3],
            &[FineLoops::Loop4],
        );
        assert!(!combos.iter().any(|c| c.policy.is_dynamic() && c.coarse == Some(CoarseLoop::Loop1)));
        assert_eq!(combos.len(), 1 + 2 + 2 + 2 + 1 + 1);
    }

    #[test]
    fn validation_passes_small_sizes() {
        let combos = legal_combos(
            &SchedulingPolicy::ALL[1..],
            &[Ratio::integer(3)],
            &[CoarseLoop::Loop1, CoarseLoop::Loop3],
            &[FineLoops::Loop4, FineLoops::Loop5],
        );
        let report = validate_cmd(&tiny(CoreClass::Fast, 2), Some(&tiny(CoreClass::Slow, 2)), &combos, &[(7, 7, 7), (37, 29, 41)], 3);
        assert!(report.passed(), "{}", report.render());
    }
}
