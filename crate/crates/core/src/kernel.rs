//! The micro-kernel: an `m_r x n_r` tile of C updated by `k` rank-1 updates
//! of one packed `A` micro-panel and one packed `B` micro-panel.

use std::hint::black_box;

/// Largest supported register tile.
pub const MAX_MR: usize = 16;
pub const MAX_NR: usize = 16;

/// Location of a micro-tile inside C's storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MicroTileView {
    /// Offset of element `(0, 0)` of the tile in C's buffer.
    pub offset: usize,
    pub valid_rows: usize,
    pub valid_cols: usize,
    pub ld: usize,
}

type KernelBody = unsafe fn(usize, &[f64], &[f64], *mut f64, usize, usize, usize, usize, usize);

/// A micro-kernel implementation for a fixed register tile.
#[derive(Clone, Copy)]
pub struct MicroKernel {
    pub name: &'static str,
    pub m_r: usize,
    pub n_r: usize,
    body: KernelBody,
}

impl std::fmt::Debug for MicroKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MicroKernel")
            .field("name", &self.name)
            .field("m_r", &self.m_r)
            .field("n_r", &self.n_r)
            .finish()
    }
}

impl MicroKernel {
    /// Best shipped kernel for the given register tile.
    pub fn for_shape(m_r: usize, n_r: usize) -> Self {
        assert!((1..=MAX_MR).contains(&m_r) && (1..=MAX_NR).contains(&n_r), "unsupported tile {m_r}x{n_r}");
        if m_r == 4 && n_r == 4 {
            Self {
                name: "scalar-4x4",
                m_r,
                n_r,
                body: kernel_4x4,
            }
        } else {
            Self::generic(m_r, n_r)
        }
    }

    /// Shape-agnostic kernel. Same summation order as the specialized ones.
    pub fn generic(m_r: usize, n_r: usize) -> Self {
        assert!((1..=MAX_MR).contains(&m_r) && (1..=MAX_NR).contains(&n_r), "unsupported tile {m_r}x{n_r}");
        Self {
            name: "scalar-generic",
            m_r,
            n_r,
            body: kernel_generic,
        }
    }

    /// Safe entry point: updates the tile of `c` described by `tile`.
    pub fn run(&self, a_panel: &[f64], b_panel: &[f64], c: &mut [f64], tile: MicroTileView, k: usize, slowdown: f64) {
        assert!(tile.valid_rows <= self.m_r && tile.valid_cols <= self.n_r);
        assert!(a_panel.len() >= k * self.m_r && b_panel.len() >= k * self.n_r);
        if tile.valid_rows == 0 || tile.valid_cols == 0 {
            return;
        }
        let last = tile.offset + (tile.valid_cols - 1) * tile.ld + tile.valid_rows;
        assert!(last <= c.len() && tile.valid_rows <= tile.ld, "tile outside C");
        // SAFETY: the tile was bounds-checked against `c` above.
        unsafe {
            self.run_raw(
                k,
                a_panel,
                b_panel,
                c.as_mut_ptr().add(tile.offset),
                tile.ld,
                tile.valid_rows,
                tile.valid_cols,
                slowdown,
            )
        }
    }

    /// # Safety
    /// `c` must point to a tile with `rows x cols` writable elements at
    /// column stride `ld`, not concurrently accessed by anyone else.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    pub(crate) unsafe fn run_raw(
        &self,
        k: usize,
        a: &[f64],
        b: &[f64],
        c: *mut f64,
        ld: usize,
        rows: usize,
        cols: usize,
        slowdown: f64,
    ) {
        if k == 0 {
            return;
        }
        (self.body)(k, a, b, c, ld, rows, cols, self.m_r, self.n_r);
        if slowdown > 1.0 {
            busy_work(a, b, k, self.m_r, self.n_r, slowdown);
        }
    }
}

/// Free-function form of [`MicroKernel::run`] using the kernel for `m_r x n_r`.
#[allow(clippy::too_many_arguments)]
pub fn microkernel(
    a_panel: &[f64],
    b_panel: &[f64],
    c: &mut [f64],
    tile: MicroTileView,
    k: usize,
    m_r: usize,
    n_r: usize,
    slowdown: f64,
) {
    MicroKernel::for_shape(m_r, n_r).run(a_panel, b_panel, c, tile, k, slowdown)
}

#[allow(clippy::too_many_arguments)]
unsafe fn kernel_4x4(k: usize, a: &[f64], b: &[f64], c: *mut f64, ld: usize, rows: usize, cols: usize, _: usize, _: usize) {
    let mut acc = [[0.0f64; 4]; 4];
    for (ap, bp) in a[..4 * k].chunks_exact(4).zip(b[..4 * k].chunks_exact(4)) {
        for j in 0..4 {
            let bj = bp[j];
            for i in 0..4 {
                acc[j][i] += ap[i] * bj;
            }
        }
    }
    for (j, col) in acc.iter().enumerate().take(cols) {
        let cj = c.add(j * ld);
        for (i, v) in col.iter().enumerate().take(rows) {
            *cj.add(i) += *v;
        }
    }
}

#[allow(clippy::too_many_arguments)]
unsafe fn kernel_generic(k: usize, a: &[f64], b: &[f64], c: *mut f64, ld: usize, rows: usize, cols: usize, m_r: usize, n_r: usize) {
    let mut acc = [0.0f64; MAX_MR * MAX_NR];
    for p in 0..k {
        let ap = &a[p * m_r..(p + 1) * m_r];
        let bp = &b[p * n_r..(p + 1) * n_r];
        for j in 0..n_r {
            let bj = bp[j];
            for i in 0..m_r {
                acc[i + j * m_r] += ap[i] * bj;
            }
        }
    }
    for j in 0..cols {
        let cj = c.add(j * ld);
        for i in 0..rows {
            *cj.add(i) += acc[i + j * m_r];
        }
    }
}

/// Repeats rank-1 updates on a scratch tile, `(slowdown - 1) * k` of them.
/// Spins rather than sleeps so the core stays occupied.
fn busy_work(a: &[f64], b: &[f64], k: usize, m_r: usize, n_r: usize, slowdown: f64) {
    let mut remaining = ((slowdown - 1.0) * k as f64).round() as usize;
    let mut scratch = [0.0f64; MAX_MR * MAX_NR];
    while remaining > 0 {
        let steps = remaining.min(k);
        for p in 0..steps {
            let ap = &a[p * m_r..(p + 1) * m_r];
            let bp = &b[p * n_r..(p + 1) * n_r];
            for j in 0..n_r {
                for i in 0..m_r {
                    scratch[i + j * m_r] += ap[i] * bp[j];
                }
            }
        }
        black_box(&mut scratch);
        remaining -= steps;
    }
}
