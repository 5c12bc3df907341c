//! Packing of `A` and `B` macro-panels into micro-panel ordered buffers.
//!
//! `A_c` is stored as `ceil(mc/m_r)` micro-panels of `m_r` rows; inside a
//! micro-panel the data is column by column (`m_r` values per column).
//! `B_c` is the dual: micro-panels of `n_r` columns, stored row by row.
//! Rows (columns) past the edge of the source are zero.

use crate::matrix::{MatRef, Matrix};
use crate::model::Range;

/// Number of micro-panels covering `dim` with width `r`.
#[inline]
pub fn panel_count(dim: usize, r: usize) -> usize {
    dim.div_ceil(r)
}

/// Exact buffer length for a packed block: `ceil(dim/r) * r * k`.
#[inline]
pub fn packed_len(dim: usize, r: usize, k: usize) -> usize {
    panel_count(dim, r) * r * k
}

#[derive(Clone, Debug, PartialEq)]
pub struct PackedBlockA {
    pub mc_eff: usize,
    pub kc_eff: usize,
    pub m_r: usize,
    pub buffer: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PackedBlockB {
    pub kc_eff: usize,
    pub nc_eff: usize,
    pub n_r: usize,
    pub buffer: Vec<f64>,
}

pub fn pack_a(a: MatRef<'_>, m_r: usize) -> PackedBlockA {
    assert!(m_r >= 1);
    let (mc, kc) = (a.rows(), a.cols());
    if mc == 0 || kc == 0 {
        return PackedBlockA {
            mc_eff: mc,
            kc_eff: kc,
            m_r,
            buffer: Vec::new(),
        };
    }
    let mut buffer = vec![0.0; packed_len(mc, m_r, kc)];
    pack_a_panels(a, m_r, Range::new(0, panel_count(mc, m_r)), &mut buffer);
    PackedBlockA {
        mc_eff: mc,
        kc_eff: kc,
        m_r,
        buffer,
    }
}

/// Packs micro-panels `panels` of `a` into `dst`, which holds exactly those
/// panels (`panels.len() * m_r * a.cols()` values). Used for cooperative
/// packing, where each thread owns a disjoint panel range.
pub fn pack_a_panels(a: MatRef<'_>, m_r: usize, panels: Range, dst: &mut [f64]) {
    let (mc, kc) = (a.rows(), a.cols());
    let panel_len = m_r * kc;
    assert_eq!(dst.len(), panels.len() * panel_len, "A_c slice size");
    for (local, p) in (panels.begin..panels.end).enumerate() {
        let row0 = p * m_r;
        let rows = m_r.min(mc - row0);
        let out = &mut dst[local * panel_len..(local + 1) * panel_len];
        for (col, lane) in out.chunks_exact_mut(m_r).enumerate() {
            let src = &a.col(col)[row0..row0 + rows];
            lane[..rows].copy_from_slice(src);
            lane[rows..].fill(0.0);
        }
    }
}

pub fn pack_b(b: MatRef<'_>, n_r: usize) -> PackedBlockB {
    assert!(n_r >= 1);
    let (kc, nc) = (b.rows(), b.cols());
    if kc == 0 || nc == 0 {
        return PackedBlockB {
            kc_eff: kc,
            nc_eff: nc,
            n_r,
            buffer: Vec::new(),
        };
    }
    let mut buffer = vec![0.0; packed_len(nc, n_r, kc)];
    pack_b_panels(b, n_r, Range::new(0, panel_count(nc, n_r)), &mut buffer);
    PackedBlockB {
        kc_eff: kc,
        nc_eff: nc,
        n_r,
        buffer,
    }
}

/// Dual of [`pack_a_panels`] for `B`.
pub fn pack_b_panels(b: MatRef<'_>, n_r: usize, panels: Range, dst: &mut [f64]) {
    let (kc, nc) = (b.rows(), b.cols());
    let panel_len = n_r * kc;
    assert_eq!(dst.len(), panels.len() * panel_len, "B_c slice size");
    for (local, q) in (panels.begin..panels.end).enumerate() {
        let col0 = q * n_r;
        let cols = n_r.min(nc - col0);
        let out = &mut dst[local * panel_len..(local + 1) * panel_len];
        for j in 0..cols {
            let src = b.col(col0 + j);
            for (p, &v) in src.iter().enumerate() {
                out[p * n_r + j] = v;
            }
        }
        for j in cols..n_r {
            for p in 0..kc {
                out[p * n_r + j] = 0.0;
            }
        }
    }
}

/// Inverse of [`pack_a`] on the non-padded region.
pub fn unpack_a(p: &PackedBlockA) -> Matrix {
    let (m_r, kc) = (p.m_r, p.kc_eff);
    Matrix::from_fn(p.mc_eff, kc, |i, j| {
        let (panel, lane) = (i / m_r, i % m_r);
        p.buffer[panel * m_r * kc + j * m_r + lane]
    })
}

/// Inverse of [`pack_b`] on the non-padded region.
pub fn unpack_b(p: &PackedBlockB) -> Matrix {
    let (n_r, kc) = (p.n_r, p.kc_eff);
    Matrix::from_fn(kc, p.nc_eff, |i, j| {
        let (panel, lane) = (j / n_r, j % n_r);
        p.buffer[panel * n_r * kc + i * n_r + lane]
    })
}
