//! Two-phase empirical search for `(m_c, k_c)`.
//!
//! Phase one scores every point of a coarse grid. Phase two scores a
//! `(2 * radius + 1)^2` neighborhood around the best coarse point at a finer
//! step. Points whose `A_c` block or `B_r` micro-panel would not fit in cache
//! are logged as filtered and never scored. Higher scores are better.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::{gflops, median, Timer};
use crate::engine::gemm_sequential;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{cache_fit_check, CacheConfig, ClusterSpec, ControlTree, F64_BYTES};

/// `n_c` used while tuning.
pub const TUNING_NC: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    /// Coarse `m_c` values, ascending multiples of `m_r`.
    pub m_grid: Vec<usize>,
    /// Coarse `k_c` values, ascending.
    pub k_grid: Vec<usize>,
    pub radius: usize,
    pub step_m: usize,
    pub step_k: usize,
    /// Timed runs per point for [`timed_evaluator`].
    pub reps: usize,
    /// Problem order for [`timed_evaluator`].
    pub r: usize,
    /// Usable fraction of each cache level in the fit check.
    pub occupancy: f64,
}

impl Default for SearchSpec {
    /// `m_c` in 8..=256 step 24, `k_c` in 64..=1024 step 96, radius 2,
    /// refinement steps 8 and 24.
    fn default() -> Self {
        Self {
            m_grid: (8..=256).step_by(24).collect(),
            k_grid: (64..=1024).step_by(96).collect(),
            radius: 2,
            step_m: 8,
            step_k: 24,
            reps: 3,
            r: 1000,
            occupancy: 1.0,
        }
    }
}

impl SearchSpec {
    pub fn check(&self, m_r: usize) -> Result<()> {
        let sorted = |g: &[usize]| !g.is_empty() && g.windows(2).all(|w| w[0] < w[1]) && g[0] > 0;
        if !sorted(&self.m_grid) || !sorted(&self.k_grid) {
            return Err(Error::Config("search grids must be non-empty, positive and strictly ascending".into()));
        }
        if self.m_grid.iter().any(|m| m % m_r != 0) {
            return Err(Error::Config(format!("every m_c in the grid must be a multiple of m_r = {m_r}")));
        }
        if self.step_m == 0 || self.step_k == 0 || self.reps == 0 {
            return Err(Error::Config("refinement steps and repetitions must be positive".into()));
        }
        if self.step_m % m_r != 0 {
            return Err(Error::Config(format!("step_m = {} is not a multiple of m_r = {m_r}", self.step_m)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Coarse,
    Refine,
    /// Rejected by the cache-fit check; never scored.
    Filtered,
}

/// One line of the search log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub m_c: usize,
    pub k_c: usize,
    pub score: Option<f64>,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub best: (usize, usize),
    pub best_score: f64,
    pub log: Vec<LogEntry>,
}

impl TuneResult {
    /// Every scored point.
    pub fn surface(&self) -> BTreeMap<(usize, usize), f64> {
        self.log
            .iter()
            .filter_map(|e| e.score.map(|s| ((e.m_c, e.k_c), s)))
            .collect()
    }

    /// Writes the log as JSON lines.
    pub fn write_log<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.log {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// `cluster` with the tuned `m_c`, `k_c` and the tuning `n_c`.
    pub fn apply(&self, cluster: &ClusterSpec) -> ClusterSpec {
        let mut c = cluster.clone();
        c.cache_config.m_c = self.best.0;
        c.cache_config.k_c = self.best.1;
        c.cache_config.n_c = TUNING_NC;
        c
    }
}

pub fn parse_log(text: &str) -> Result<Vec<LogEntry>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// `a` beats `b`: higher score, then smaller `A_c` footprint, then smaller `m_c`.
fn better(a: (usize, usize, f64), b: (usize, usize, f64)) -> bool {
    if a.2 != b.2 {
        return a.2 > b.2;
    }
    let (fa, fb) = (a.0 * a.1, b.0 * b.1);
    if fa != fb {
        return fa < fb;
    }
    a.0 < b.0
}

fn config_for(cluster: &ClusterSpec, m_c: usize, k_c: usize) -> CacheConfig {
    CacheConfig {
        n_c: TUNING_NC,
        k_c,
        m_c,
        ..cluster.cache_config
    }
}

/// Runs the two-phase search. `evaluator` scores one `(m_c, k_c)` point.
pub fn tune(
    spec: &SearchSpec,
    mut evaluator: impl FnMut(usize, usize) -> Result<f64>,
    cluster: &ClusterSpec,
) -> Result<TuneResult> {
    let m_r = cluster.cache_config.m_r;
    spec.check(m_r)?;
    let mut log = Vec::new();
    let mut seen = BTreeMap::new();
    let mut best = None;

    type Best = Option<(usize, usize, f64)>;
    let mut visit = |m: usize, k: usize, phase: Phase, log: &mut Vec<LogEntry>, best: &mut Best| -> Result<()> {
        if seen.contains_key(&(m, k)) {
            return Ok(());
        }
        let fit = cache_fit_check(&config_for(cluster, m, k), cluster, F64_BYTES, spec.occupancy);
        if !fit.fits() {
            seen.insert((m, k), None);
            log.push(LogEntry {
                m_c: m,
                k_c: k,
                score: None,
                phase: Phase::Filtered,
            });
            return Ok(());
        }
        let score = evaluator(m, k)?;
        seen.insert((m, k), Some(score));
        log.push(LogEntry {
            m_c: m,
            k_c: k,
            score: Some(score),
            phase,
        });
        if best.map_or(true, |b| better((m, k, score), b)) {
            *best = Some((m, k, score));
        }
        Ok(())
    };

    for &m in &spec.m_grid {
        for &k in &spec.k_grid {
            visit(m, k, Phase::Coarse, &mut log, &mut best)?;
        }
    }
    let (m0, k0, _) = best.ok_or(Error::EmptySearch)?;
    let r = spec.radius as isize;
    for di in -r..=r {
        for dj in -r..=r {
            let m = m0 as isize + di * spec.step_m as isize;
            let k = k0 as isize + dj * spec.step_k as isize;
            if m < m_r as isize || k < 1 {
                continue;
            }
            visit(m as usize, k as usize, Phase::Refine, &mut log, &mut best)?;
        }
    }
    let (m, k, s) = best.expect("coarse phase found a point");
    Ok(TuneResult {
        best: (m, k),
        best_score: s,
        log,
    })
}

/// Scores a point by timing `reps` sequential `r x r x r` GEMMs on one core
/// of `cluster` and returning GFLOPS of the median run.
pub fn timed_evaluator<'t>(
    cluster: &ClusterSpec,
    r: usize,
    reps: usize,
    seed: u64,
    timer: &'t mut dyn Timer,
) -> impl FnMut(usize, usize) -> Result<f64> + 't {
    let a = Matrix::random(r, r, seed);
    let b = Matrix::random(r, r, seed.wrapping_add(1));
    let base = cluster.clone();
    let reps = reps.max(1);
    move |m_c, k_c| {
        let tree = ControlTree::sequential(config_for(&base, m_c, k_c));
        let mut c = Matrix::zeros(r, r);
        let flops = 2.0 * (r as f64).powi(3);
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t = timer.time(flops, &mut || {
                gemm_sequential(a.view(), b.view(), c.view_mut(), &tree)?;
                Ok(())
            })?;
            times.push(t);
        }
        Ok(gflops(r, r, r, median(&mut times)))
    }
}
