//! Blocking parameters, machine topology, control trees and their validation.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size in bytes of one matrix element.
pub const F64_BYTES: usize = std::mem::size_of::<f64>();

/// Strides of the five-loop nest, in elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheConfig {
    pub n_c: usize,
    pub k_c: usize,
    pub m_c: usize,
    pub m_r: usize,
    pub n_r: usize,
}

impl CacheConfig {
    /// Rejects zero values. Multiplicity of `m_c`/`n_c` is left to
    /// [`validate_control_tree`] so that it shows up as a named violation.
    pub fn new(n_c: usize, k_c: usize, m_c: usize, m_r: usize, n_r: usize) -> Result<Self> {
        let cfg = Self {
            n_c,
            k_c,
            m_c,
            m_r,
            n_r,
        };
        if [n_c, k_c, m_c, m_r, n_r].contains(&0) {
            return Err(Error::Config(format!("all blocking parameters must be >= 1: {cfg:?}")));
        }
        Ok(cfg)
    }

    /// Cortex-A15 optimum on the Exynos 5422.
    pub const fn exynos_a15() -> Self {
        Self {
            n_c: 4096,
            k_c: 952,
            m_c: 152,
            m_r: 4,
            n_r: 4,
        }
    }

    /// Cortex-A7 optimum on the Exynos 5422.
    pub const fn exynos_a7() -> Self {
        Self {
            n_c: 4096,
            k_c: 352,
            m_c: 80,
            m_r: 4,
            n_r: 4,
        }
    }

    /// Cortex-A7 re-tuned for a `k_c` shared with the A15 cluster.
    pub const fn exynos_a7_shared_kc() -> Self {
        Self {
            n_c: 4096,
            k_c: 952,
            m_c: 32,
            m_r: 4,
            n_r: 4,
        }
    }

    pub fn ac_bytes(&self, elem_bytes: usize) -> usize {
        self.m_c * self.k_c * elem_bytes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreClass {
    Fast,
    Slow,
}

impl fmt::Display for CoreClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoreClass::Fast => "fast",
            CoreClass::Slow => "slow",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub class: CoreClass,
    pub core_count: usize,
    pub l1d_bytes: usize,
    pub l2_bytes: usize,
    pub cache_config: CacheConfig,
    /// Busy-work multiplier applied to every micro-kernel call on this
    /// cluster. `1.0` disables emulation.
    pub emulated_slowdown: f64,
}

impl ClusterSpec {
    pub fn new(
        class: CoreClass,
        core_count: usize,
        l1d_bytes: usize,
        l2_bytes: usize,
        cache_config: CacheConfig,
    ) -> Self {
        Self {
            class,
            core_count,
            l1d_bytes,
            l2_bytes,
            cache_config,
            emulated_slowdown: 1.0,
        }
    }

    pub fn with_slowdown(mut self, slowdown: f64) -> Self {
        self.emulated_slowdown = slowdown;
        self
    }

    pub fn with_cores(mut self, cores: usize) -> Self {
        self.core_count = cores;
        self
    }

    /// Quad-core Cortex-A15 cluster: 32 KiB L1d, 2 MiB L2.
    pub fn exynos_a15() -> Self {
        Self::new(CoreClass::Fast, 4, 32 * 1024, 2 * 1024 * 1024, CacheConfig::exynos_a15())
    }

    /// Quad-core Cortex-A7 cluster: 32 KiB L1d, 512 KiB L2.
    pub fn exynos_a7() -> Self {
        Self::new(CoreClass::Slow, 4, 32 * 1024, 512 * 1024, CacheConfig::exynos_a7())
    }

    pub fn check(&self) -> Result<()> {
        if self.core_count == 0 {
            return Err(Error::Topology(format!("{} cluster has no cores", self.class)));
        }
        if self.l1d_bytes == 0 || self.l2_bytes == 0 {
            return Err(Error::Topology(format!("{} cluster has a zero cache size", self.class)));
        }
        if !(self.emulated_slowdown >= 1.0 && self.emulated_slowdown.is_finite()) {
            return Err(Error::Topology(format!(
                "emulated_slowdown must be a finite value >= 1.0, got {}",
                self.emulated_slowdown
            )));
        }
        Ok(())
    }
}

/// One or two clusters, stored FAST first so that fast threads take the
/// lowest thread indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    clusters: Vec<ClusterSpec>,
}

impl Topology {
    pub fn new(mut clusters: Vec<ClusterSpec>) -> Result<Self> {
        match clusters.len() {
            1 => {}
            2 if clusters[0].class != clusters[1].class => {}
            2 => return Err(Error::Topology("two clusters must have different classes".into())),
            n => return Err(Error::Topology(format!("expected 1 or 2 clusters, got {n}"))),
        }
        for c in &clusters {
            c.check()?;
        }
        clusters.sort_by_key(|c| c.class);
        Ok(Self { clusters })
    }

    pub fn single(cluster: ClusterSpec) -> Result<Self> {
        Self::new(vec![cluster])
    }

    pub fn big_little(fast: ClusterSpec, slow: ClusterSpec) -> Result<Self> {
        Self::new(vec![fast, slow])
    }

    /// Exynos 5422: 4 x Cortex-A15 + 4 x Cortex-A7.
    pub fn exynos5422() -> Self {
        Self::big_little(ClusterSpec::exynos_a15(), ClusterSpec::exynos_a7())
            .expect("static topology is valid")
    }

    pub fn clusters(&self) -> &[ClusterSpec] {
        &self.clusters
    }

    pub fn total_cores(&self) -> usize {
        self.clusters.iter().map(|c| c.core_count).sum()
    }

    pub fn cluster(&self, class: CoreClass) -> Option<&ClusterSpec> {
        self.clusters.iter().find(|c| c.class == class)
    }
}

/// Half-open index range `[begin, end)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Range {
    pub begin: usize,
    pub end: usize,
}

impl Range {
    pub fn new(begin: usize, end: usize) -> Self {
        debug_assert!(begin <= end);
        Self { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.begin, self.end)
    }
}

/// Fast:slow workload proportion as an exact rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    /// `den` must be non-zero. A zero numerator is representable so that
    /// planners can reject it with a proper diagnostic.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "ratio denominator must be non-zero");
        let g = num.gcd(&den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn integer(n: u64) -> Self {
        Self::new(n, 1)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Self::integer(1)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Ratio {
    type Err = Error;

    /// Accepts `"3"`, `"5/2"` and `"2.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::NonPositiveRatio(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Self::new(n, d));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let den = 10u64.pow(frac.len() as u32);
            let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
            return Ok(Self::new(int * den + frac, den));
        }
        s.parse::<u64>().map(Self::integer).map_err(|_| bad())
    }
}

/// Identifier of one of the five loops (1-based).
pub type LoopId = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoarseLoop {
    Loop1,
    Loop3,
}

impl CoarseLoop {
    pub fn id(self) -> LoopId {
        match self {
            CoarseLoop::Loop1 => 1,
            CoarseLoop::Loop3 => 3,
        }
    }

    pub fn from_id(id: LoopId) -> Option<Self> {
        match id {
            1 => Some(CoarseLoop::Loop1),
            3 => Some(CoarseLoop::Loop3),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum FineLoops {
    #[default]
    Loop4,
    Loop5,
    Both,
}

impl FineLoops {
    pub fn ids(self) -> &'static [LoopId] {
        match self {
            FineLoops::Loop4 => &[4],
            FineLoops::Loop5 => &[5],
            FineLoops::Both => &[4, 5],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FineLoops::Loop4 => "4",
            FineLoops::Loop5 => "5",
            FineLoops::Both => "45",
        }
    }

    /// Splits `threads` into `(loop4, loop5)` degrees.
    pub fn degrees(self, threads: usize) -> (usize, usize) {
        match self {
            FineLoops::Loop4 => (threads, 1),
            FineLoops::Loop5 => (1, threads),
            FineLoops::Both => {
                let d5 = (1..=threads)
                    .take_while(|d| d * d <= threads)
                    .filter(|d| threads % d == 0)
                    .last()
                    .unwrap_or(1);
                (threads / d5, d5)
            }
        }
    }
}

impl FromStr for FineLoops {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "4" => Ok(FineLoops::Loop4),
            "5" => Ok(FineLoops::Loop5),
            "45" | "4,5" | "4+5" => Ok(FineLoops::Both),
            other => Err(Error::Config(format!("fine loop set must be 4, 5 or 45, got {other:?}"))),
        }
    }
}

/// Blocking parameters plus the per-loop parallelization of one GEMM execution.
///
/// Fields are public and deliberately permissive; [`validate_control_tree`]
/// decides whether a tree can be executed.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlTree {
    pub cache_config: CacheConfig,
    /// Degree of parallelism of loops 1..=5 (index 0 is Loop 1).
    pub loop_degrees: [usize; 5],
    pub coarse_loop: Option<LoopId>,
    pub fine_loops: Vec<LoopId>,
    pub ratio: Ratio,
}

impl ControlTree {
    /// Single-threaded tree: every degree is 1.
    pub fn sequential(cache_config: CacheConfig) -> Self {
        Self {
            cache_config,
            loop_degrees: [1; 5],
            coarse_loop: None,
            fine_loops: Vec::new(),
            ratio: Ratio::default(),
        }
    }

    /// Tree for `clusters` clusters of `threads_per_cluster` threads each.
    /// The coarse loop gets one degree per cluster; the fine loops share the
    /// threads of one cluster.
    pub fn parallel(
        cache_config: CacheConfig,
        coarse: Option<CoarseLoop>,
        fine: FineLoops,
        clusters: usize,
        threads_per_cluster: usize,
    ) -> Self {
        let mut loop_degrees = [1; 5];
        if let Some(c) = coarse {
            loop_degrees[c.id() as usize - 1] = clusters;
        }
        let (d4, d5) = fine.degrees(threads_per_cluster);
        loop_degrees[3] = d4;
        loop_degrees[4] = d5;
        Self {
            cache_config,
            loop_degrees,
            coarse_loop: coarse.map(CoarseLoop::id),
            fine_loops: fine.ids().to_vec(),
            ratio: Ratio::default(),
        }
    }

    /// Tree shaped for `topology`, which must have equally sized clusters.
    pub fn for_topology(
        cache_config: CacheConfig,
        coarse: Option<CoarseLoop>,
        fine: FineLoops,
        topology: &Topology,
    ) -> Self {
        Self::parallel(
            cache_config,
            coarse,
            fine,
            topology.clusters().len(),
            topology.clusters()[0].core_count,
        )
    }

    pub fn with_ratio(mut self, ratio: Ratio) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn coarse(&self) -> Option<CoarseLoop> {
        self.coarse_loop.and_then(CoarseLoop::from_id)
    }

    pub fn fine(&self) -> FineLoops {
        let has4 = self.fine_loops.contains(&4);
        let has5 = self.fine_loops.contains(&5);
        match (has4, has5) {
            (true, true) => FineLoops::Both,
            (false, true) => FineLoops::Loop5,
            _ => FineLoops::Loop4,
        }
    }

    pub fn degree(&self, loop_id: LoopId) -> usize {
        self.loop_degrees[loop_id as usize - 1]
    }
}

/// A rule broken by a control tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Loop 2 parallelized: threads would race on the same C entries.
    Loop2Race { degree: usize },
    CoarseLoopInvalid { loop_id: LoopId },
    FineLoopInvalid { loop_id: LoopId },
    /// A loop that is neither coarse nor fine carries a degree above 1.
    UnselectedLoopParallel { loop_id: LoopId, degree: usize },
    DegreeProduct { product: usize, threads: usize },
    McNotMultipleOfMr { m_c: usize, m_r: usize },
    NcNotMultipleOfNr { n_c: usize, n_r: usize },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::Loop2Race { .. } => "LOOP2_RACE",
            Violation::CoarseLoopInvalid { .. } => "COARSE_LOOP_INVALID",
            Violation::FineLoopInvalid { .. } => "FINE_LOOP_INVALID",
            Violation::UnselectedLoopParallel { .. } => "UNSELECTED_LOOP_PARALLEL",
            Violation::DegreeProduct { .. } => "DEGREE_PRODUCT",
            Violation::McNotMultipleOfMr { .. } => "MC_NOT_MULTIPLE_OF_MR",
            Violation::NcNotMultipleOfNr { .. } => "NC_NOT_MULTIPLE_OF_NR",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.code())?;
        match self {
            Violation::Loop2Race { degree } => write!(
                f,
                "Loop 2 has degree {degree}; parallelizing it makes threads update the same \
                 C entries concurrently (race condition)"
            ),
            Violation::CoarseLoopInvalid { loop_id } => {
                write!(f, "coarse loop must be 1, 3 or none, got {loop_id}")
            }
            Violation::FineLoopInvalid { loop_id } => {
                write!(f, "fine loops must be a subset of {{4, 5}}, got {loop_id}")
            }
            Violation::UnselectedLoopParallel { loop_id, degree } => write!(
                f,
                "Loop {loop_id} has degree {degree} but is neither the coarse nor a fine loop"
            ),
            Violation::DegreeProduct { product, threads } => write!(
                f,
                "product of loop degrees is {product} but the topology has {threads} threads"
            ),
            Violation::McNotMultipleOfMr { m_c, m_r } => {
                write!(f, "m_c = {m_c} is not a multiple of m_r = {m_r}")
            }
            Violation::NcNotMultipleOfNr { n_c, n_r } => {
                write!(f, "n_c = {n_c} is not a multiple of n_r = {n_r}")
            }
        }
    }
}

/// Checks `tree` against the parallelization rules and `topology`'s thread
/// count. An empty result means the tree is executable.
pub fn validate_control_tree(tree: &ControlTree, topology: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    let cfg = &tree.cache_config;

    if tree.degree(2) > 1 {
        out.push(Violation::Loop2Race {
            degree: tree.degree(2),
        });
    }
    if let Some(c) = tree.coarse_loop {
        if CoarseLoop::from_id(c).is_none() {
            out.push(Violation::CoarseLoopInvalid { loop_id: c });
        }
    }
    for &f in &tree.fine_loops {
        if f != 4 && f != 5 {
            out.push(Violation::FineLoopInvalid { loop_id: f });
        }
    }
    for loop_id in [1u8, 3, 4, 5] {
        let d = tree.degree(loop_id);
        let selected = tree.coarse_loop == Some(loop_id) || tree.fine_loops.contains(&loop_id);
        if d > 1 && !selected {
            out.push(Violation::UnselectedLoopParallel { loop_id, degree: d });
        }
    }
    let product: usize = tree.loop_degrees.iter().product();
    if product != topology.total_cores() {
        out.push(Violation::DegreeProduct {
            product,
            threads: topology.total_cores(),
        });
    }
    if cfg.m_r == 0 || cfg.m_c % cfg.m_r != 0 {
        out.push(Violation::McNotMultipleOfMr {
            m_c: cfg.m_c,
            m_r: cfg.m_r,
        });
    }
    if cfg.n_r == 0 || cfg.n_c % cfg.n_r != 0 {
        out.push(Violation::NcNotMultipleOfNr {
            n_c: cfg.n_c,
            n_r: cfg.n_r,
        });
    }
    out
}

/// Footprints of the L1-resident `B_r` micro-panel and the L2-resident `A_c` block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FitReport {
    pub br_bytes: usize,
    pub ac_bytes: usize,
    pub br_fits: bool,
    pub ac_fits: bool,
}

impl FitReport {
    pub fn fits(&self) -> bool {
        self.br_fits && self.ac_fits
    }
}

/// `occupancy` is the usable fraction of each cache level.
pub fn cache_fit_check(
    cfg: &CacheConfig,
    cluster: &ClusterSpec,
    elem_bytes: usize,
    occupancy: f64,
) -> FitReport {
    let br_bytes = cfg.k_c * cfg.n_r * elem_bytes;
    let ac_bytes = cfg.m_c * cfg.k_c * elem_bytes;
    FitReport {
        br_bytes,
        ac_bytes,
        br_fits: br_bytes as f64 <= occupancy * cluster.l1d_bytes as f64,
        ac_fits: ac_bytes as f64 <= occupancy * cluster.l2_bytes as f64,
    }
}

/// Largest multiple of `m_r` whose `A_c` block (`m_c x k_c`) fits in
/// `safety * l2_bytes`; 0 when not even one micro-panel fits.
pub fn max_mc_for_l2(k_c: usize, l2_bytes: usize, elem_bytes: usize, m_r: usize, safety: f64) -> usize {
    assert!(k_c >= 1 && m_r >= 1 && elem_bytes >= 1);
    let rows = (safety * l2_bytes as f64 / (k_c * elem_bytes) as f64).floor();
    if !(rows >= 0.0) {
        return 0;
    }
    let rows = rows as usize;
    rows / m_r * m_r
}
