//! Work plans for the symmetric, ratio-based, cache-aware and dynamic policies.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::kernel::MicroKernel;
use crate::model::{
    max_mc_for_l2, validate_control_tree, CacheConfig, ClusterSpec, CoarseLoop, ControlTree, CoreClass, FineLoops,
    Range, Ratio, Topology, F64_BYTES,
};

/// Share of the `L2` cache the fallback `m_c` rule is allowed to use.
pub const HARMONIZE_L2_SAFETY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchedulingPolicy {
    /// One cluster only.
    SingleCluster,
    /// Architecture-oblivious: even split across clusters.
    Sss,
    /// Ratio-based static split, one control tree.
    Sas,
    /// Ratio-based static split, one control tree per class.
    CaSas,
    /// Leader-dispatched Loop 3 chunks, one control tree.
    Das,
    /// Leader-dispatched Loop 3 chunks, one control tree per class.
    CaDas,
}

impl SchedulingPolicy {
    pub const ALL: [SchedulingPolicy; 6] = [
        SchedulingPolicy::SingleCluster,
        SchedulingPolicy::Sss,
        SchedulingPolicy::Sas,
        SchedulingPolicy::CaSas,
        SchedulingPolicy::Das,
        SchedulingPolicy::CaDas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulingPolicy::SingleCluster => "single",
            SchedulingPolicy::Sss => "sss",
            SchedulingPolicy::Sas => "sas",
            SchedulingPolicy::CaSas => "ca-sas",
            SchedulingPolicy::Das => "das",
            SchedulingPolicy::CaDas => "ca-das",
        }
    }

    pub fn is_cache_aware(self) -> bool {
        matches!(self, SchedulingPolicy::CaSas | SchedulingPolicy::CaDas)
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, SchedulingPolicy::Das | SchedulingPolicy::CaDas)
    }

    pub fn uses_ratio(self) -> bool {
        matches!(self, SchedulingPolicy::Sas | SchedulingPolicy::CaSas)
    }
}

impl fmt::Display for SchedulingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|p| p.name() == norm || (norm == "single-cluster" && *p == SchedulingPolicy::SingleCluster))
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

/// The control tree(s) handed to the planner.
#[derive(Clone, Debug)]
pub enum Trees {
    Single(ControlTree),
    Dual {
        fast: ControlTree,
        slow: ControlTree,
        /// Replaces the fallback `m_c` rule when Loop 3 forces a shared `k_c`.
        slow_mc_override: Option<usize>,
    },
}

impl Trees {
    pub fn count(&self) -> usize {
        match self {
            Trees::Single(_) => 1,
            Trees::Dual { .. } => 2,
        }
    }

    pub fn fast(&self) -> &ControlTree {
        match self {
            Trees::Single(t) => t,
            Trees::Dual { fast, .. } => fast,
        }
    }
}

/// Even range of part `index` when `extent` is split into `parts` pieces
/// whose boundaries are multiples of `align`. Remainder units go to the
/// lowest indices; the ragged tail goes to the last part.
pub fn even_share(extent: usize, parts: usize, index: usize, align: usize) -> Range {
    assert!(parts >= 1 && align >= 1 && index < parts);
    let units = extent / align;
    let (q, r) = (units / parts, units % parts);
    let start_units = index * q + index.min(r);
    let own = q + usize::from(index < r);
    let begin = (start_units * align).min(extent);
    let end = if index + 1 == parts {
        extent
    } else {
        ((start_units + own) * align).min(extent)
    };
    Range::new(begin, end)
}

/// Splits `[0, extent)` into `parts` contiguous ranges.
pub fn split_even(extent: usize, parts: usize, align: usize) -> Vec<Range> {
    (0..parts).map(|i| even_share(extent, parts, i, align)).collect()
}

/// Splits `[0, extent)` so that the fast side gets `R/(R+1)` of it, rounded
/// half-up to a multiple of `align` and clamped to `extent`.
pub fn split_ratio(extent: usize, ratio: Ratio, align: usize) -> (Range, Range) {
    assert!(align >= 1);
    let (num, den) = (ratio.num() as u128, ratio.den() as u128);
    let e = extent as u128;
    let d = (num + den) * align as u128;
    let units = (2 * e * num + d) / (2 * d);
    let s = ((units * align as u128).min(e)) as usize;
    (Range::new(0, s), Range::new(s, extent))
}

/// Reconciles per-class configurations with the coarse loop. Splitting Loop 3
/// shares `B_c`, so the slow tree takes the fast `k_c` and a new `m_c`.
pub fn harmonize_trees(
    fast: &CacheConfig,
    slow: &CacheConfig,
    coarse: Option<CoarseLoop>,
    override_mc_slow: Option<usize>,
    slow_cluster: &ClusterSpec,
) -> Result<(CacheConfig, CacheConfig)> {
    if coarse != Some(CoarseLoop::Loop3) {
        return Ok((*fast, *slow));
    }
    let mut slow2 = *slow;
    slow2.k_c = fast.k_c;
    slow2.m_c = match override_mc_slow {
        Some(m) => m,
        None => max_mc_for_l2(fast.k_c, slow_cluster.l2_bytes, F64_BYTES, slow.m_r, HARMONIZE_L2_SAFETY),
    };
    if slow2.m_c == 0 {
        return Err(Error::Config(format!(
            "no m_c fits the slow cluster L2 ({} bytes) with shared k_c = {}",
            slow_cluster.l2_bytes, fast.k_c
        )));
    }
    Ok((*fast, slow2))
}

/// Shared Loop 3 cursor handing out chunks whose size depends on the caller's class.
#[derive(Debug)]
pub struct ChunkDispatcher {
    extent: usize,
    chunk: [usize; 2],
    cursor: Mutex<usize>,
}

impl ChunkDispatcher {
    pub fn new(extent: usize, fast_chunk: usize, slow_chunk: usize) -> Self {
        assert!(fast_chunk >= 1 && slow_chunk >= 1);
        Self {
            extent,
            chunk: [fast_chunk, slow_chunk],
            cursor: Mutex::new(0),
        }
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn chunk_size(&self, class: CoreClass) -> usize {
        self.chunk[class as usize]
    }

    /// Claims the next chunk, truncated at `extent`; `None` once exhausted.
    pub fn next_chunk(&self, class: CoreClass) -> Option<Range> {
        let mut cursor = self.cursor.lock().expect("dispatcher lock poisoned");
        if *cursor >= self.extent {
            return None;
        }
        let begin = *cursor;
        let end = (begin + self.chunk_size(class)).min(self.extent);
        *cursor = end;
        Some(Range::new(begin, end))
    }

    pub fn cursor(&self) -> usize {
        *self.cursor.lock().expect("dispatcher lock poisoned")
    }
}

/// How a thread partitions the fine loops of its cluster's macro-kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FineAssignment {
    pub loop4_parts: usize,
    pub loop4_index: usize,
    pub loop5_parts: usize,
    pub loop5_index: usize,
}

impl FineAssignment {
    /// Micro-panel range of Loop 4 (`n_r` units) owned by this thread.
    pub fn loop4(&self, panels: usize) -> Range {
        even_share(panels, self.loop4_parts, self.loop4_index, 1)
    }

    /// Micro-panel range of Loop 5 (`m_r` units) owned by this thread.
    pub fn loop5(&self, panels: usize) -> Range {
        even_share(panels, self.loop5_parts, self.loop5_index, 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoarseWork {
    /// No coarse split: the cluster covers the whole iteration space.
    Whole,
    /// Static share of the coarse loop's iteration space.
    Static(Range),
    /// Loop 3 chunks claimed at run time by the cluster leader.
    Dynamic,
}

#[derive(Clone, Debug)]
pub struct ClusterPlan {
    pub class: CoreClass,
    pub tree: ControlTree,
    /// Global thread ids of this cluster.
    pub threads: Range,
    pub leader: usize,
    pub coarse: CoarseWork,
    pub slowdown: f64,
    pub kernel: MicroKernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThreadPlan {
    pub id: usize,
    pub cluster: usize,
    pub local: usize,
    pub class: CoreClass,
    pub fine: FineAssignment,
}

#[derive(Clone, Debug)]
pub struct WorkPlan {
    pub policy: SchedulingPolicy,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub coarse: Option<CoarseLoop>,
    pub fine: FineLoops,
    pub ratio: Ratio,
    pub clusters: Vec<ClusterPlan>,
    pub threads: Vec<ThreadPlan>,
}

impl WorkPlan {
    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn is_dynamic(&self) -> bool {
        self.clusters.iter().any(|c| c.coarse == CoarseWork::Dynamic)
    }

    /// Dispatcher over Loop 3 for one `(j_c, p_c)` iteration.
    pub fn new_dispatcher(&self) -> ChunkDispatcher {
        let mc = |class| {
            self.clusters
                .iter()
                .find(|c| c.class == class)
                .map(|c| c.tree.cache_config.m_c)
        };
        let fast = mc(CoreClass::Fast).or(mc(CoreClass::Slow)).unwrap_or(1);
        let slow = mc(CoreClass::Slow).unwrap_or(fast);
        ChunkDispatcher::new(self.m, fast, slow)
    }

    /// `(n_c, k_c, n_r)` of the loops shared by all threads when Loop 3 is split.
    pub fn shared_outer(&self) -> CacheConfig {
        self.clusters[0].tree.cache_config
    }
}

/// Builds the work plan for `policy`.
pub fn make_plan(
    policy: SchedulingPolicy,
    m: usize,
    n: usize,
    k: usize,
    topology: &Topology,
    trees: &Trees,
    ratio: Ratio,
) -> Result<WorkPlan> {
    let expected = if policy.is_cache_aware() { 2 } else { 1 };
    if trees.count() != expected {
        return Err(Error::TreeCount {
            policy: policy.name(),
            expected,
            got: trees.count(),
        });
    }
    let clusters = topology.clusters();
    let fast_tree = trees.fast();
    let coarse_id = fast_tree.coarse_loop;
    let coarse = fast_tree.coarse();
    let fine = fast_tree.fine();

    if policy == SchedulingPolicy::SingleCluster && clusters.len() != 1 {
        return Err(Error::Topology("policy single runs on exactly one cluster".into()));
    }
    if policy.is_cache_aware() && clusters.len() != 2 {
        return Err(Error::Topology(format!("policy {policy} needs a fast and a slow cluster")));
    }
    if policy.is_dynamic() {
        match coarse_id {
            Some(1) => return Err(Error::DynamicLoop1),
            Some(3) => {}
            _ => {
                return Err(Error::CoarseLoopRequired {
                    policy: policy.name(),
                    required: "3",
                })
            }
        }
    } else if clusters.len() == 2 && coarse.is_none() && coarse_id.is_none() {
        return Err(Error::CoarseLoopRequired {
            policy: policy.name(),
            required: "1 or 3",
        });
    }
    if policy.uses_ratio() && !ratio.is_positive() {
        return Err(Error::NonPositiveRatio(ratio.to_string()));
    }

    // Effective tree per cluster.
    let mut effective: Vec<ControlTree> = match trees {
        Trees::Single(t) => vec![t.clone(); clusters.len()],
        Trees::Dual {
            fast,
            slow,
            slow_mc_override,
        } => {
            let slow_cluster = topology.cluster(CoreClass::Slow).expect("checked two clusters");
            let (f, s) = harmonize_trees(
                &fast.cache_config,
                &slow.cache_config,
                coarse,
                *slow_mc_override,
                slow_cluster,
            )?;
            let mut ft = fast.clone();
            ft.cache_config = f;
            let mut st = slow.clone();
            st.cache_config = s;
            vec![ft, st]
        }
    };
    for t in &mut effective {
        t.ratio = ratio;
    }
    let mut violations = Vec::new();
    for t in &effective {
        for v in validate_control_tree(t, topology) {
            if !violations.contains(&v) {
                violations.push(v);
            }
        }
    }
    if let Trees::Dual { slow, .. } = trees {
        if slow.coarse_loop != fast_tree.coarse_loop || slow.fine_loops != fast_tree.fine_loops {
            return Err(Error::Config("both control trees must select the same coarse and fine loops".into()));
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidControlTree(violations));
    }
    if coarse == Some(CoarseLoop::Loop3) && effective.len() == 2 {
        let (a, b) = (&effective[0].cache_config, &effective[1].cache_config);
        if a.k_c != b.k_c || a.n_c != b.n_c || a.n_r != b.n_r {
            return Err(Error::Config(
                "splitting Loop 3 shares B_c: both trees need the same n_c, k_c and n_r".into(),
            ));
        }
    }

    // Coarse shares.
    let coarse_work: Vec<CoarseWork> = match coarse {
        _ if clusters.len() == 1 && !policy.is_dynamic() => vec![CoarseWork::Whole],
        None => vec![CoarseWork::Whole; clusters.len()],
        Some(_) if policy.is_dynamic() => vec![CoarseWork::Dynamic; clusters.len()],
        Some(c) => {
            let (extent, align) = match c {
                CoarseLoop::Loop1 => (n, effective[0].cache_config.n_r),
                CoarseLoop::Loop3 => (m, effective.iter().map(|t| t.cache_config.m_r).max().unwrap_or(1)),
            };
            let (a, b) = if policy.uses_ratio() {
                split_ratio(extent, ratio, align)
            } else {
                let v = split_even(extent, 2, align);
                (v[0], v[1])
            };
            vec![CoarseWork::Static(a), CoarseWork::Static(b)]
        }
    };

    let mut plans = Vec::with_capacity(clusters.len());
    let mut threads = Vec::with_capacity(topology.total_cores());
    let mut next_id = 0;
    for (ci, (spec, tree)) in clusters.iter().zip(effective).enumerate() {
        let count = spec.core_count;
        let (d4, d5) = fine.degrees(count);
        for local in 0..count {
            threads.push(ThreadPlan {
                id: next_id + local,
                cluster: ci,
                local,
                class: spec.class,
                fine: FineAssignment {
                    loop4_parts: d4,
                    loop4_index: local / d5,
                    loop5_parts: d5,
                    loop5_index: local % d5,
                },
            });
        }
        let cfg = tree.cache_config;
        plans.push(ClusterPlan {
            class: spec.class,
            tree,
            threads: Range::new(next_id, next_id + count),
            leader: next_id,
            coarse: coarse_work[ci],
            slowdown: spec.emulated_slowdown,
            kernel: MicroKernel::for_shape(cfg.m_r, cfg.n_r),
        });
        next_id += count;
    }

    Ok(WorkPlan {
        policy,
        m,
        n,
        k,
        coarse,
        fine,
        ratio,
        clusters: plans,
        threads,
    })
}

/// One line of a plan dump: a loop, a range of it, and the threads owning it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanRow {
    pub loop_id: u8,
    pub range: Option<Range>,
    pub threads: Range,
    pub note: &'static str,
}

/// Per-loop iteration-space partition, in the style of the classic
/// "Loop / range / threads" figures. Fine loops are shown for the first
/// block of each cluster.
pub fn plan_rows(plan: &WorkPlan) -> Vec<PlanRow> {
    let mut rows = Vec::new();
    let all = Range::new(0, plan.thread_count());
    let whole_n = Range::new(0, plan.n);
    let whole_m = Range::new(0, plan.m);
    let cluster_share = |c: &ClusterPlan, lp: u8| match (c.coarse, plan.coarse) {
        (CoarseWork::Static(r), Some(cl)) if cl.id() == lp => Some(r),
        (CoarseWork::Dynamic, _) if lp == 3 => None,
        _ => Some(if lp == 1 { whole_n } else { whole_m }),
    };
    for lp in [1u8, 2, 3] {
        match lp {
            2 => rows.push(PlanRow {
                loop_id: 2,
                range: Some(Range::new(0, plan.k)),
                threads: all,
                note: "sequential",
            }),
            _ if plan.coarse.map(CoarseLoop::id) == Some(lp) && plan.is_dynamic() => rows.push(PlanRow {
                loop_id: lp,
                range: None,
                threads: all,
                note: "dynamic (leader-dispatched, chunk = class m_c)",
            }),
            _ if plan.coarse.map(CoarseLoop::id) == Some(lp) => {
                for c in &plan.clusters {
                    rows.push(PlanRow {
                        loop_id: lp,
                        range: cluster_share(c, lp),
                        threads: c.threads,
                        note: "",
                    });
                }
            }
            _ => rows.push(PlanRow {
                loop_id: lp,
                range: Some(if lp == 1 { whole_n } else { whole_m }),
                threads: all,
                note: "",
            }),
        }
    }
    for c in &plan.clusters {
        let cfg = c.tree.cache_config;
        let n_share = cluster_share(c, 1).unwrap_or(whole_n);
        let nc_eff = cfg.n_c.min(n_share.len());
        let m_share = cluster_share(c, 3).unwrap_or(Range::new(0, cfg.m_c.min(plan.m)));
        let mc_eff = cfg.m_c.min(m_share.len());
        let j_panels = nc_eff.div_ceil(cfg.n_r);
        let i_panels = mc_eff.div_ceil(cfg.m_r);
        for t in plan.threads.iter().filter(|t| c.threads.begin <= t.id && t.id < c.threads.end) {
            if plan.fine.ids().contains(&4) {
                let r = t.fine.loop4(j_panels);
                rows.push(PlanRow {
                    loop_id: 4,
                    range: Some(Range::new((r.begin * cfg.n_r).min(nc_eff), (r.end * cfg.n_r).min(nc_eff))),
                    threads: Range::new(t.id, t.id + 1),
                    note: "",
                });
            }
            if plan.fine.ids().contains(&5) {
                let r = t.fine.loop5(i_panels);
                rows.push(PlanRow {
                    loop_id: 5,
                    range: Some(Range::new((r.begin * cfg.m_r).min(mc_eff), (r.end * cfg.m_r).min(mc_eff))),
                    threads: Range::new(t.id, t.id + 1),
                    note: "",
                });
            }
        }
    }
    rows
}

/// Renders `Th4` or `Th0–Th3`.
pub fn thread_label(r: Range) -> String {
    match r.len() {
        0 => "-".into(),
        1 => format!("Th{}", r.begin),
        _ => format!("Th{}–Th{}", r.begin, r.end - 1),
    }
}

/// Human-readable plan dump: one line per loop, ranges separated by ` / `.
pub fn render_plan(plan: &WorkPlan) -> String {
    let mut out = format!(
        "policy {}  m={} n={} k={}  coarse={}  fine={}  ratio={}\n",
        plan.policy,
        plan.m,
        plan.n,
        plan.k,
        plan.coarse.map(|c| c.id().to_string()).unwrap_or_else(|| "none".into()),
        plan.fine.label(),
        plan.ratio
    );
    let rows = plan_rows(plan);
    for lp in 1..=5u8 {
        let parts: Vec<String> = rows
            .iter()
            .filter(|r| r.loop_id == lp)
            .map(|r| match (r.range, r.note) {
                (None, note) => format!("{note} {}", thread_label(r.threads)),
                (Some(range), "") => format!("{range} {}", thread_label(r.threads)),
                (Some(range), note) => format!("{range} {} ({note})", thread_label(r.threads)),
            })
            .collect();
        if !parts.is_empty() {
            out.push_str(&format!("Loop {lp}: {}\n", parts.join(" / ")));
        }
    }
    for c in &plan.clusters {
        let cfg = c.tree.cache_config;
        out.push_str(&format!(
            "cluster {} {}: n_c={} k_c={} m_c={} m_r={} n_r={} leader=Th{} slowdown={}\n",
            c.class,
            thread_label(c.threads),
            cfg.n_c,
            cfg.k_c,
            cfg.m_c,
            cfg.m_r,
            cfg.n_r,
            c.leader,
            c.slowdown
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClusterSpec;

    fn r(b: usize, e: usize) -> Range {
        Range::new(b, e)
    }

    #[test]
    fn split_even_examples() {
        assert_eq!(split_even(1024, 2, 4), vec![r(0, 512), r(512, 1024)]);
        assert_eq!(split_even(10, 4, 1), vec![r(0, 3), r(3, 6), r(6, 8), r(8, 10)]);
        assert_eq!(split_even(0, 3, 4), vec![r(0, 0); 3]);
        assert_eq!(split_even(9, 2, 4), vec![r(0, 4), r(4, 9)]);
    }

    #[test]
    fn split_ratio_examples() {
        assert_eq!(split_ratio(1024, Ratio::integer(3), 4), (r(0, 768), r(768, 1024)));
        assert_eq!(split_ratio(1024, Ratio::integer(1), 4), (r(0, 512), r(512, 1024)));
        assert_eq!(split_ratio(100, Ratio::integer(5), 4), (r(0, 84), r(84, 100)));
        assert_eq!(split_ratio(7, Ratio::integer(1000), 4), (r(0, 7), r(7, 7)));
    }

    #[test]
    fn harmonize_examples() {
        let a15 = CacheConfig::exynos_a15();
        let a7 = CacheConfig::exynos_a7();
        let slow = ClusterSpec::exynos_a7();
        assert_eq!(
            harmonize_trees(&a15, &a7, Some(CoarseLoop::Loop1), None, &slow).unwrap(),
            (a15, a7)
        );
        let (_, s) = harmonize_trees(&a15, &a7, Some(CoarseLoop::Loop3), Some(32), &slow).unwrap();
        assert_eq!((s.m_c, s.k_c), (32, 952));
        let (_, s) = harmonize_trees(&a15, &a7, Some(CoarseLoop::Loop3), None, &slow).unwrap();
        assert_eq!((s.m_c, s.k_c), (32, 952));
        let tiny = ClusterSpec::exynos_a7();
        let tiny = ClusterSpec { l2_bytes: 1024, ..tiny };
        assert!(harmonize_trees(&a15, &a7, Some(CoarseLoop::Loop3), None, &tiny).is_err());
    }

    #[test]
    fn dispatcher_mixed_classes() {
        let d = ChunkDispatcher::new(304, 152, 32);
        assert_eq!(d.next_chunk(CoreClass::Fast), Some(r(0, 152)));
        assert_eq!(d.next_chunk(CoreClass::Slow), Some(r(152, 184)));
        assert_eq!(d.next_chunk(CoreClass::Fast), Some(r(184, 304)));
        assert_eq!(d.next_chunk(CoreClass::Slow), None);
        assert_eq!(d.next_chunk(CoreClass::Slow), None);
    }

    #[test]
    fn dispatcher_edges() {
        assert_eq!(ChunkDispatcher::new(0, 4, 4).next_chunk(CoreClass::Fast), None);
        let d = ChunkDispatcher::new(456, 152, 152);
        let got: Vec<_> = std::iter::from_fn(|| d.next_chunk(CoreClass::Fast)).collect();
        assert_eq!(got, vec![r(0, 152), r(152, 304), r(304, 456)]);
    }

    fn exynos_trees(coarse: CoarseLoop) -> Trees {
        Trees::Dual {
            fast: ControlTree::parallel(CacheConfig::exynos_a15(), Some(coarse), FineLoops::Loop4, 2, 4),
            slow: ControlTree::parallel(CacheConfig::exynos_a7(), Some(coarse), FineLoops::Loop4, 2, 4),
            slow_mc_override: None,
        }
    }

    #[test]
    fn ca_das_plan_has_two_leaders() {
        let topo = Topology::exynos5422();
        let plan = make_plan(
            SchedulingPolicy::CaDas,
            2000,
            2000,
            2000,
            &topo,
            &exynos_trees(CoarseLoop::Loop3),
            Ratio::default(),
        )
        .unwrap();
        assert!(plan.is_dynamic());
        let leaders: Vec<_> = plan.clusters.iter().map(|c| c.leader).collect();
        assert_eq!(leaders, vec![0, 4]);
        assert_eq!(plan.clusters[1].tree.cache_config.m_c, 32);
        assert_eq!(plan.clusters[1].tree.cache_config.k_c, 952);
        let d = plan.new_dispatcher();
        assert_eq!(d.chunk_size(CoreClass::Fast), 152);
        assert_eq!(d.chunk_size(CoreClass::Slow), 32);
    }

    #[test]
    fn single_cluster_sss_splits_loop4_only() {
        let topo = Topology::single(ClusterSpec::exynos_a15()).unwrap();
        let tree = ControlTree::parallel(CacheConfig::exynos_a15(), None, FineLoops::Loop4, 1, 4);
        let plan = make_plan(SchedulingPolicy::Sss, 512, 512, 512, &topo, &Trees::Single(tree), Ratio::default())
            .unwrap();
        assert_eq!(plan.clusters.len(), 1);
        assert_eq!(plan.clusters[0].coarse, CoarseWork::Whole);
        let shares: Vec<_> = plan.threads.iter().map(|t| t.fine.loop4(128)).collect();
        assert_eq!(shares, split_even(128, 4, 1));
    }

    #[test]
    fn dynamic_loop1_rejected() {
        let topo = Topology::exynos5422();
        let tree = ControlTree::parallel(CacheConfig::exynos_a15(), Some(CoarseLoop::Loop1), FineLoops::Loop4, 2, 4);
        let e = make_plan(SchedulingPolicy::Das, 64, 64, 64, &topo, &Trees::Single(tree), Ratio::default())
            .unwrap_err();
        assert!(matches!(e, Error::DynamicLoop1));
        assert!(e.to_string().contains("too large to dynamically distribute"));
    }

    #[test]
    fn zero_ratio_rejected() {
        let topo = Topology::exynos5422();
        let tree = ControlTree::parallel(CacheConfig::exynos_a15(), Some(CoarseLoop::Loop1), FineLoops::Loop4, 2, 4);
        let e = make_plan(SchedulingPolicy::Sas, 64, 64, 64, &topo, &Trees::Single(tree), Ratio::integer(0));
        assert!(matches!(e, Err(Error::NonPositiveRatio(_))));
    }

    #[test]
    fn wrong_tree_count() {
        let topo = Topology::exynos5422();
        let tree = ControlTree::parallel(CacheConfig::exynos_a15(), Some(CoarseLoop::Loop1), FineLoops::Loop4, 2, 4);
        let e = make_plan(SchedulingPolicy::CaSas, 64, 64, 64, &topo, &Trees::Single(tree), Ratio::integer(3));
        assert!(matches!(e, Err(Error::TreeCount { expected: 2, got: 1, .. })));
    }

    #[test]
    fn render_sss_and_sas() {
        let topo = Topology::exynos5422();
        let tree = ControlTree::parallel(CacheConfig::exynos_a15(), Some(CoarseLoop::Loop1), FineLoops::Loop4, 2, 4);
        let sss = make_plan(SchedulingPolicy::Sss, 1024, 1024, 1024, &topo, &Trees::Single(tree.clone()), Ratio::default())
            .unwrap();
        let text = render_plan(&sss);
        assert!(text.contains("Loop 1: [0,512) Th0–Th3 / [512,1024) Th4–Th7"), "{text}");
        let sas = make_plan(SchedulingPolicy::Sas, 1024, 1024, 1024, &topo, &Trees::Single(tree), Ratio::integer(3))
            .unwrap();
        assert!(render_plan(&sas).contains("Loop 1: [0,768) Th0–Th3 / [768,1024) Th4–Th7"));
        let dynamic = make_plan(
            SchedulingPolicy::CaDas,
            1024,
            1024,
            1024,
            &topo,
            &exynos_trees(CoarseLoop::Loop3),
            Ratio::default(),
        )
        .unwrap();
        assert!(render_plan(&dynamic).contains("Loop 3: dynamic (leader-dispatched, chunk = class m_c)"));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in SchedulingPolicy::ALL {
            assert_eq!(p.name().parse::<SchedulingPolicy>().unwrap(), p);
        }
        assert_eq!("CA_DAS".parse::<SchedulingPolicy>().unwrap(), SchedulingPolicy::CaDas);
    }
}
