//! The five-loop blocked GEMM, sequential and multi-threaded.
//!
//! Loop order is `j_c -> p_c -> i_c -> j_r -> i_r` with strides
//! `n_c, k_c, m_c, n_r, m_r`. `B_c` is packed once per `(j_c, p_c)` and `A_c`
//! once per `(i_c, p_c)`. Every C element receives one micro-kernel
//! contribution per `k_c` block, in increasing `p_c` order, whatever the
//! thread layout; results are therefore bitwise identical to the sequential
//! nest as long as `k_c` matches.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Barrier, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::kernel::MicroKernel;
use crate::matrix::{MatMut, MatRef, Matrix};
use crate::model::{
    validate_control_tree, CacheConfig, ClusterSpec, CoarseLoop, ControlTree, CoreClass, Range, Ratio, Topology,
    F64_BYTES,
};
use crate::packing::{pack_a_panels, pack_b_panels, packed_len, panel_count};
use crate::scheduler::{even_share, make_plan, ChunkDispatcher, CoarseWork, SchedulingPolicy, ThreadPlan, Trees, WorkPlan};

/// A complete parallel GEMM invocation: `C += A * B`.
pub struct GemmRequest<'a> {
    pub a: &'a Matrix,
    pub b: &'a Matrix,
    pub c: &'a mut Matrix,
    pub topology: &'a Topology,
    pub policy: SchedulingPolicy,
    pub trees: &'a Trees,
    pub ratio: Ratio,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThreadStats {
    pub id: usize,
    pub cluster: usize,
    pub class: Option<CoreClass>,
    pub microkernels: u64,
    pub busy: Duration,
    pub barrier_wait: Duration,
    pub packed_a_bytes: u64,
    pub packed_b_bytes: u64,
    pub bound: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClusterStats {
    pub class: Option<CoreClass>,
    pub packed_a_bytes: u64,
    pub packed_b_bytes: u64,
    /// Completed cluster-local barrier episodes.
    pub barriers: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionStats {
    pub threads: Vec<ThreadStats>,
    pub clusters: Vec<ClusterStats>,
    /// Completed barrier episodes spanning every thread.
    pub global_barriers: u64,
    pub wall: Duration,
    /// C elements updated twice within one `k_c` block. Only tracked when
    /// [`EngineOptions::track_ownership`] is set; always 0 for a correct plan.
    pub ownership_conflicts: u64,
}

impl ExecutionStats {
    pub fn total_microkernels(&self) -> u64 {
        self.threads.iter().map(|t| t.microkernels).sum()
    }

    pub fn microkernels_by_class(&self, class: CoreClass) -> u64 {
        self.threads
            .iter()
            .filter(|t| t.class == Some(class))
            .map(|t| t.microkernels)
            .sum()
    }
}

/// Binds worker threads to cores. Returning `false` leaves the thread
/// unbound; classes are still told apart by label and emulated slowdown.
pub trait AffinityHook: Sync {
    fn bind(&self, thread: &ThreadPlan) -> bool;
}

/// Never binds.
#[derive(Clone, Copy, Debug, Default)]
pub struct LabelOnly;

impl AffinityHook for LabelOnly {
    fn bind(&self, _: &ThreadPlan) -> bool {
        false
    }
}

#[derive(Clone, Copy)]
pub struct EngineOptions<'a> {
    pub affinity: &'a dyn AffinityHook,
    pub track_ownership: bool,
}

impl Default for EngineOptions<'_> {
    fn default() -> Self {
        Self {
            affinity: &LabelOnly,
            track_ownership: cfg!(debug_assertions),
        }
    }
}

fn check_conformance(a: MatRef<'_>, b: MatRef<'_>, c_rows: usize, c_cols: usize) -> Result<()> {
    if a.cols() != b.rows() || a.rows() != c_rows || b.cols() != c_cols {
        return Err(Error::Conformance(format!(
            "A is {}x{}, B is {}x{}, C is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            c_rows,
            c_cols
        )));
    }
    Ok(())
}

/// Plans and runs `req` on the threads described by its topology.
pub fn gemm(req: GemmRequest<'_>) -> Result<ExecutionStats> {
    let (m, k, n) = (req.a.rows(), req.a.cols(), req.b.cols());
    check_conformance(req.a.view(), req.b.view(), req.c.rows(), req.c.cols())?;
    let plan = make_plan(req.policy, m, n, k, req.topology, req.trees, req.ratio)?;
    gemm_parallel(req.a.view(), req.b.view(), req.c.view_mut(), &plan)
}

/// Single-threaded five-loop GEMM. `tree` must have every degree equal to 1.
pub fn gemm_sequential(a: MatRef<'_>, b: MatRef<'_>, mut c: MatMut<'_>, tree: &ControlTree) -> Result<ExecutionStats> {
    check_conformance(a, b, c.rows(), c.cols())?;
    let cfg = tree.cache_config;
    let one = Topology::single(ClusterSpec::new(CoreClass::Fast, 1, 1, 1, cfg)).expect("one-core topology");
    let violations = validate_control_tree(tree, &one);
    if !violations.is_empty() {
        return Err(Error::InvalidControlTree(violations));
    }
    let start = Instant::now();
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut ts = ThreadStats {
        class: Some(CoreClass::Fast),
        ..Default::default()
    };
    if m > 0 && n > 0 && k > 0 {
        let kernel = MicroKernel::for_shape(cfg.m_r, cfg.n_r);
        let mut a_c = vec![0.0; packed_len(cfg.m_c.min(m), cfg.m_r, cfg.k_c.min(k))];
        let mut b_c = vec![0.0; packed_len(cfg.n_c.min(n), cfg.n_r, cfg.k_c.min(k))];
        let ld = c.ld();
        let cptr = CPtr(c.as_mut_ptr());
        for jc in (0..n).step_by(cfg.n_c) {
            let ncb = cfg.n_c.min(n - jc);
            for pc in (0..k).step_by(cfg.k_c) {
                let kcb = cfg.k_c.min(k - pc);
                let jp = panel_count(ncb, cfg.n_r);
                let blen = jp * cfg.n_r * kcb;
                pack_b_panels(b.submatrix(pc, jc, kcb, ncb), cfg.n_r, Range::new(0, jp), &mut b_c[..blen]);
                ts.packed_b_bytes += (blen * F64_BYTES) as u64;
                for ic in (0..m).step_by(cfg.m_c) {
                    let mcb = cfg.m_c.min(m - ic);
                    let ip = panel_count(mcb, cfg.m_r);
                    let alen = ip * cfg.m_r * kcb;
                    pack_a_panels(a.submatrix(ic, pc, mcb, kcb), cfg.m_r, Range::new(0, ip), &mut a_c[..alen]);
                    ts.packed_a_bytes += (alen * F64_BYTES) as u64;
                    let block = Block {
                        ic,
                        jc,
                        pc,
                        mcb,
                        ncb,
                        kcb,
                    };
                    // SAFETY: single thread, C pointer derived from the exclusive borrow.
                    ts.microkernels += unsafe {
                        macro_kernel(
                            &kernel,
                            &cfg,
                            &a_c[..alen],
                            &b_c[..blen],
                            cptr,
                            ld,
                            &block,
                            Range::new(0, jp),
                            Range::new(0, ip),
                            1.0,
                            None,
                        )
                    };
                }
            }
        }
    }
    let wall = start.elapsed();
    ts.busy = wall;
    Ok(ExecutionStats {
        clusters: vec![ClusterStats {
            class: Some(CoreClass::Fast),
            packed_a_bytes: ts.packed_a_bytes,
            packed_b_bytes: ts.packed_b_bytes,
            barriers: 0,
        }],
        threads: vec![ts],
        global_barriers: 0,
        wall,
        ownership_conflicts: 0,
    })
}

/// Runs `plan` with default options.
pub fn gemm_parallel(a: MatRef<'_>, b: MatRef<'_>, c: MatMut<'_>, plan: &WorkPlan) -> Result<ExecutionStats> {
    gemm_parallel_with(a, b, c, plan, EngineOptions::default())
}

pub fn gemm_parallel_with(
    a: MatRef<'_>,
    b: MatRef<'_>,
    mut c: MatMut<'_>,
    plan: &WorkPlan,
    opts: EngineOptions<'_>,
) -> Result<ExecutionStats> {
    check_conformance(a, b, c.rows(), c.cols())?;
    if (a.rows(), a.cols(), b.cols()) != (plan.m, plan.k, plan.n) {
        return Err(Error::Conformance(format!(
            "plan built for {}x{}x{}, operands are {}x{}x{}",
            plan.m,
            plan.n,
            plan.k,
            a.rows(),
            b.cols(),
            a.cols()
        )));
    }
    if plan.thread_count() == 0 {
        return Err(Error::Topology("plan has no threads".into()));
    }
    let start = Instant::now();
    let empty_stats = |wall| ExecutionStats {
        threads: plan
            .threads
            .iter()
            .map(|t| ThreadStats {
                id: t.id,
                cluster: t.cluster,
                class: Some(t.class),
                ..Default::default()
            })
            .collect(),
        clusters: plan
            .clusters
            .iter()
            .map(|c| ClusterStats {
                class: Some(c.class),
                ..Default::default()
            })
            .collect(),
        wall,
        ..Default::default()
    };
    if plan.m == 0 || plan.n == 0 || plan.k == 0 {
        return Ok(empty_stats(start.elapsed()));
    }

    let ld = c.ld();
    let shared = Shared::new(a, b, CPtr(c.as_mut_ptr()), ld, plan, opts.track_ownership);
    let mut results: Vec<ThreadStats> = std::thread::scope(|s| {
        let handles: Vec<_> = plan
            .threads
            .iter()
            .map(|tp| {
                let shared = &shared;
                let affinity = opts.affinity;
                s.spawn(move || {
                    let bound = affinity.bind(tp);
                    let mut w = Worker::new(shared, tp);
                    w.stats.bound = bound;
                    let t0 = Instant::now();
                    w.run();
                    w.stats.busy = t0.elapsed().saturating_sub(w.stats.barrier_wait);
                    w.stats
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("GEMM worker panicked"))
            .collect()
    });
    results.sort_by_key(|t| t.id);

    let mut stats = empty_stats(start.elapsed());
    for (ci, cs) in stats.clusters.iter_mut().enumerate() {
        for t in results.iter().filter(|t| t.cluster == ci) {
            cs.packed_a_bytes += t.packed_a_bytes;
            cs.packed_b_bytes += t.packed_b_bytes;
        }
        cs.barriers = shared.clusters[ci].barrier.episodes();
    }
    stats.threads = results;
    stats.global_barriers = shared.global.episodes();
    stats.ownership_conflicts = shared.ownership.as_ref().map_or(0, |o| o.conflicts.load(Ordering::Relaxed));
    Ok(stats)
}

#[derive(Clone, Copy)]
struct CPtr(*mut f64);
// SAFETY: threads only write disjoint C tiles, as assigned by the plan.
unsafe impl Send for CPtr {}
unsafe impl Sync for CPtr {}

/// Packed buffer written cooperatively: each thread fills a disjoint slice,
/// then a barrier publishes the whole buffer to the readers.
struct SharedBuf {
    data: Box<[UnsafeCell<f64>]>,
}

// SAFETY: access is coordinated by barriers (disjoint writes, then reads).
unsafe impl Sync for SharedBuf {}

impl SharedBuf {
    fn new(len: usize) -> Self {
        Self {
            data: (0..len).map(|_| UnsafeCell::new(0.0)).collect(),
        }
    }

    /// # Safety
    /// No other thread may access `begin..end` while the slice is alive.
    #[allow(clippy::mut_from_ref)]
    unsafe fn slice_mut(&self, begin: usize, end: usize) -> &mut [f64] {
        assert!(begin <= end && end <= self.data.len());
        std::slice::from_raw_parts_mut(UnsafeCell::raw_get(self.data.as_ptr().add(begin)), end - begin)
    }

    /// # Safety
    /// No thread may write `0..len` while the slice is alive.
    unsafe fn slice(&self, len: usize) -> &[f64] {
        assert!(len <= self.data.len());
        std::slice::from_raw_parts(UnsafeCell::raw_get(self.data.as_ptr()), len)
    }
}

/// Barrier over a fixed group of threads that counts completed episodes.
struct GroupBarrier {
    size: usize,
    barrier: Barrier,
    episodes: AtomicU64,
}

impl GroupBarrier {
    fn new(size: usize) -> Self {
        Self {
            size,
            barrier: Barrier::new(size),
            episodes: AtomicU64::new(0),
        }
    }

    fn wait(&self, wait_time: &mut Duration) {
        if self.size <= 1 {
            return;
        }
        let t0 = Instant::now();
        if self.barrier.wait().is_leader() {
            self.episodes.fetch_add(1, Ordering::Relaxed);
        }
        *wait_time += t0.elapsed();
    }

    fn episodes(&self) -> u64 {
        self.episodes.load(Ordering::Relaxed)
    }
}

/// Synchronizes a group after cooperative packing: nobody reads the packed
/// buffer until every member has written its slice. A group of one is a no-op.
pub struct PackingGroup {
    inner: GroupBarrier,
}

impl PackingGroup {
    pub fn new(size: usize) -> Self {
        Self {
            inner: GroupBarrier::new(size),
        }
    }

    pub fn synchronize_packing(&self) {
        let mut t = Duration::ZERO;
        self.inner.wait(&mut t);
    }

    pub fn completed(&self) -> u64 {
        self.inner.episodes()
    }
}

/// Debug map recording the `p_c` block that last updated each C element.
struct Ownership {
    last: Vec<AtomicU64>,
    ld: usize,
    conflicts: AtomicU64,
}

impl Ownership {
    fn new(ld: usize, cols: usize) -> Self {
        Self {
            last: (0..ld * cols).map(|_| AtomicU64::new(0)).collect(),
            ld,
            conflicts: AtomicU64::new(0),
        }
    }

    fn claim(&self, row0: usize, col0: usize, rows: usize, cols: usize, pc: usize) {
        let tag = pc as u64 + 1;
        for j in col0..col0 + cols {
            for i in row0..row0 + rows {
                if self.last[i + j * self.ld].swap(tag, Ordering::Relaxed) == tag {
                    self.conflicts.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }
}

struct ClusterShared {
    barrier: GroupBarrier,
    a_c: SharedBuf,
    /// Private `B_c` when the coarse split is over Loop 1 (or absent).
    b_c: SharedBuf,
    /// Chunk published by the leader under dynamic scheduling.
    slot: Mutex<Option<Range>>,
}

struct Shared<'a> {
    a: MatRef<'a>,
    b: MatRef<'a>,
    c: CPtr,
    ldc: usize,
    plan: &'a WorkPlan,
    global: GroupBarrier,
    clusters: Vec<ClusterShared>,
    /// `B_c` shared by all threads when Loop 3 is split.
    shared_b: SharedBuf,
    /// One dispatcher per `(j_c, p_c)` iteration.
    dispatchers: Vec<ChunkDispatcher>,
    ownership: Option<Ownership>,
}

impl<'a> Shared<'a> {
    fn new(a: MatRef<'a>, b: MatRef<'a>, c: CPtr, ldc: usize, plan: &'a WorkPlan, track: bool) -> Self {
        let shares_b = plan.coarse == Some(CoarseLoop::Loop3) && plan.clusters.len() > 1 || plan.is_dynamic();
        let clusters = plan
            .clusters
            .iter()
            .map(|cp| {
                let cfg = cp.tree.cache_config;
                ClusterShared {
                    barrier: GroupBarrier::new(cp.threads.len()),
                    a_c: SharedBuf::new(packed_len(cfg.m_c.min(plan.m), cfg.m_r, cfg.k_c.min(plan.k))),
                    b_c: SharedBuf::new(if shares_b {
                        0
                    } else {
                        packed_len(cfg.n_c.min(plan.n), cfg.n_r, cfg.k_c.min(plan.k))
                    }),
                    slot: Mutex::new(None),
                }
            })
            .collect();
        let outer = plan.shared_outer();
        let (shared_b, dispatchers) = if shares_b {
            let iters = plan.n.div_ceil(outer.n_c) * plan.k.div_ceil(outer.k_c);
            (
                SharedBuf::new(packed_len(outer.n_c.min(plan.n), outer.n_r, outer.k_c.min(plan.k))),
                if plan.is_dynamic() {
                    (0..iters).map(|_| plan.new_dispatcher()).collect()
                } else {
                    Vec::new()
                },
            )
        } else {
            (SharedBuf::new(0), Vec::new())
        };
        Self {
            a,
            b,
            c,
            ldc,
            plan,
            global: GroupBarrier::new(plan.thread_count()),
            clusters,
            shared_b,
            dispatchers,
            ownership: track.then(|| Ownership::new(ldc, plan.n)),
        }
    }
}

/// One `(i_c, j_c, p_c)` block of the loop nest.
struct Block {
    ic: usize,
    jc: usize,
    pc: usize,
    mcb: usize,
    ncb: usize,
    kcb: usize,
}

/// Loops 4 and 5 over the given micro-panel ranges. Returns the number of
/// micro-kernel calls.
///
/// # Safety
/// The caller must own the C tiles addressed by `jr x ir` for this block.
#[allow(clippy::too_many_arguments)]
unsafe fn macro_kernel(
    kernel: &MicroKernel,
    cfg: &CacheConfig,
    a_c: &[f64],
    b_c: &[f64],
    c: CPtr,
    ldc: usize,
    blk: &Block,
    jr: Range,
    ir: Range,
    slowdown: f64,
    ownership: Option<&Ownership>,
) -> u64 {
    let (m_r, n_r, k) = (cfg.m_r, cfg.n_r, blk.kcb);
    let mut calls = 0;
    for q in jr.begin..jr.end {
        let col0 = q * n_r;
        let cols = n_r.min(blk.ncb - col0);
        let b_panel = &b_c[q * n_r * k..(q + 1) * n_r * k];
        for p in ir.begin..ir.end {
            let row0 = p * m_r;
            let rows = m_r.min(blk.mcb - row0);
            let a_panel = &a_c[p * m_r * k..(p + 1) * m_r * k];
            let (gi, gj) = (blk.ic + row0, blk.jc + col0);
            if let Some(o) = ownership {
                o.claim(gi, gj, rows, cols, blk.pc);
            }
            kernel.run_raw(k, a_panel, b_panel, c.0.add(gi + gj * ldc), ldc, rows, cols, slowdown);
            calls += 1;
        }
    }
    calls
}

struct Worker<'s, 'a> {
    sh: &'s Shared<'a>,
    tp: &'s ThreadPlan,
    cs: &'s ClusterShared,
    cfg: CacheConfig,
    kernel: MicroKernel,
    slowdown: f64,
    team: usize,
    stats: ThreadStats,
}

impl<'s, 'a> Worker<'s, 'a> {
    fn new(sh: &'s Shared<'a>, tp: &'s ThreadPlan) -> Self {
        let cp = &sh.plan.clusters[tp.cluster];
        Self {
            sh,
            tp,
            cs: &sh.clusters[tp.cluster],
            cfg: cp.tree.cache_config,
            kernel: cp.kernel,
            slowdown: cp.slowdown,
            team: cp.threads.len(),
            stats: ThreadStats {
                id: tp.id,
                cluster: tp.cluster,
                class: Some(tp.class),
                ..Default::default()
            },
        }
    }

    fn cluster_barrier(&mut self) {
        self.cs.barrier.wait(&mut self.stats.barrier_wait);
    }

    fn global_barrier(&mut self) {
        self.sh.global.wait(&mut self.stats.barrier_wait);
    }

    fn run(&mut self) {
        let plan = self.sh.plan;
        let cp = &plan.clusters[self.tp.cluster];
        match (cp.coarse, plan.coarse) {
            (CoarseWork::Whole, _) => self.private_b(Range::new(0, plan.n)),
            (CoarseWork::Static(cols), Some(CoarseLoop::Loop1)) => self.private_b(cols),
            (CoarseWork::Static(rows), _) => self.shared_b(Some(rows)),
            (CoarseWork::Dynamic, _) => self.shared_b(None),
        }
    }

    /// Cluster-private `B_c`: the cluster runs the whole nest over `cols`.
    fn private_b(&mut self, cols: Range) {
        let (m, k) = (self.sh.plan.m, self.sh.plan.k);
        let cfg = self.cfg;
        for jc in (cols.begin..cols.end).step_by(cfg.n_c) {
            let ncb = cfg.n_c.min(cols.end - jc);
            for pc in (0..k).step_by(cfg.k_c) {
                let kcb = cfg.k_c.min(k - pc);
                let jp = panel_count(ncb, cfg.n_r);
                let mine = even_share(jp, self.team, self.tp.local, 1);
                let cs = self.cs;
                self.pack_b(&cs.b_c, cfg.n_r, jc, pc, ncb, kcb, mine);
                self.cluster_barrier();
                // SAFETY: B_c was fully written before the barrier and is not
                // rewritten until every cluster thread passes the final barrier below.
                let b_c = unsafe { cs.b_c.slice(jp * cfg.n_r * kcb) };
                for ic in (0..m).step_by(cfg.m_c) {
                    let mcb = cfg.m_c.min(m - ic);
                    self.a_block_and_compute(b_c, ic, jc, pc, mcb, ncb, kcb);
                }
            }
        }
    }

    /// `B_c` shared by all threads; clusters split Loop 3 statically (`rows`)
    /// or through the dispatcher (`None`).
    fn shared_b(&mut self, rows: Option<Range>) {
        let plan = self.sh.plan;
        let outer = plan.shared_outer();
        let (n, k) = (plan.n, plan.k);
        let total = plan.thread_count();
        let mut iter = 0;
        for jc in (0..n).step_by(outer.n_c) {
            let ncb = outer.n_c.min(n - jc);
            for pc in (0..k).step_by(outer.k_c) {
                let kcb = outer.k_c.min(k - pc);
                let jp = panel_count(ncb, outer.n_r);
                let mine = even_share(jp, total, self.tp.id, 1);
                let sh = self.sh;
                self.pack_b(&sh.shared_b, outer.n_r, jc, pc, ncb, kcb, mine);
                self.global_barrier();
                // SAFETY: published by the global barrier; rewritten only after the next one.
                let b_c = unsafe { sh.shared_b.slice(jp * outer.n_r * kcb) };
                match rows {
                    Some(r) => {
                        for ic in (r.begin..r.end).step_by(self.cfg.m_c) {
                            let mcb = self.cfg.m_c.min(r.end - ic);
                            self.a_block_and_compute(b_c, ic, jc, pc, mcb, ncb, kcb);
                        }
                    }
                    None => self.dynamic_loop3(&sh.dispatchers[iter], b_c, jc, pc, ncb, kcb),
                }
                self.global_barrier();
                iter += 1;
            }
        }
    }

    /// Leader claims a chunk, publishes it through the cluster slot, and the
    /// whole cluster works on it. An empty slot ends the loop for everyone.
    #[allow(clippy::too_many_arguments)]
    fn dynamic_loop3(&mut self, d: &ChunkDispatcher, b_c: &[f64], jc: usize, pc: usize, ncb: usize, kcb: usize) {
        let leader = self.sh.plan.clusters[self.tp.cluster].leader == self.tp.id;
        loop {
            if leader {
                *self.cs.slot.lock().expect("slot lock") = d.next_chunk(self.tp.class);
            }
            self.cluster_barrier();
            let Some(chunk) = *self.cs.slot.lock().expect("slot lock") else {
                break;
            };
            for ic in (chunk.begin..chunk.end).step_by(self.cfg.m_c) {
                let mcb = self.cfg.m_c.min(chunk.end - ic);
                self.a_block_and_compute(b_c, ic, jc, pc, mcb, ncb, kcb);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn pack_b(&mut self, buf: &SharedBuf, n_r: usize, jc: usize, pc: usize, ncb: usize, kcb: usize, panels: Range) {
        let len = n_r * kcb;
        // SAFETY: panel ranges of different threads are disjoint.
        let dst = unsafe { buf.slice_mut(panels.begin * len, panels.end * len) };
        pack_b_panels(self.sh.b.submatrix(pc, jc, kcb, ncb), n_r, panels, dst);
        self.stats.packed_b_bytes += (dst.len() * F64_BYTES) as u64;
    }

    /// Packs `A_c` for rows `ic..ic+mcb` cooperatively, then runs this
    /// thread's share of the macro-kernel.
    #[allow(clippy::too_many_arguments)]
    fn a_block_and_compute(&mut self, b_c: &[f64], ic: usize, jc: usize, pc: usize, mcb: usize, ncb: usize, kcb: usize) {
        let cfg = self.cfg;
        let ip = panel_count(mcb, cfg.m_r);
        let mine = even_share(ip, self.team, self.tp.local, 1);
        let plen = cfg.m_r * kcb;
        {
            // SAFETY: disjoint panel ranges per thread.
            let dst = unsafe { self.cs.a_c.slice_mut(mine.begin * plen, mine.end * plen) };
            pack_a_panels(self.sh.a.submatrix(ic, pc, mcb, kcb), cfg.m_r, mine, dst);
            self.stats.packed_a_bytes += (dst.len() * F64_BYTES) as u64;
        }
        self.cluster_barrier();
        // SAFETY: A_c published by the barrier above; rewritten only after the one below.
        let a_c = unsafe { self.cs.a_c.slice(ip * plen) };
        let jp = panel_count(ncb, cfg.n_r);
        let blk = Block {
            ic,
            jc,
            pc,
            mcb,
            ncb,
            kcb,
        };
        let jr = self.tp.fine.loop4(jp);
        let ir = self.tp.fine.loop5(ip);
        // SAFETY: the (jr, ir) shares of the cluster's threads tile the block
        // disjointly, and clusters own disjoint row or column ranges.
        self.stats.microkernels += unsafe {
            macro_kernel(
                &self.kernel,
                &cfg,
                a_c,
                b_c,
                self.sh.c,
                self.sh.ldc,
                &blk,
                jr,
                ir,
                self.slowdown,
                self.sh.ownership.as_ref(),
            )
        };
        self.cluster_barrier();
    }
}

#[cfg(target_os = "linux")]
mod linux_affinity {
    use super::AffinityHook;
    use crate::scheduler::ThreadPlan;

    /// Pins thread `i` to logical CPU `i` when that CPU exists.
    #[derive(Clone, Copy, Debug, Default)]
    pub struct PinToCpu;

    impl AffinityHook for PinToCpu {
        fn bind(&self, thread: &ThreadPlan) -> bool {
            let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
            if thread.id >= cpus || thread.id >= libc::CPU_SETSIZE as usize {
                return false;
            }
            // SAFETY: plain libc calls on a zeroed cpu_set_t for the current thread.
            unsafe {
                let mut set: libc::cpu_set_t = std::mem::zeroed();
                libc::CPU_SET(thread.id, &mut set);
                libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
            }
        }
    }
}

#[cfg(target_os = "linux")]
pub use linux_affinity::PinToCpu;
