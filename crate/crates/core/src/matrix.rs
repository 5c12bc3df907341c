//! Column-major dense matrices and borrowed views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Owned column-major matrix of `f64`. Element `(i, j)` lives at `i + j * ld`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    ld: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::zeros_with_ld(rows, cols, rows.max(1))
    }

    /// Zero matrix with an explicit leading dimension; panics if `ld < rows`.
    pub fn zeros_with_ld(rows: usize, cols: usize, ld: usize) -> Self {
        assert!(ld >= rows, "leading dimension {ld} < rows {rows}");
        Self {
            rows,
            cols,
            ld,
            data: vec![0.0; ld * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major data with `ld == rows`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length must be rows * cols");
        Self {
            rows,
            cols,
            ld: rows.max(1),
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Uniform entries in `[-1, 1)` from a seeded ChaCha stream.
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ld(&self) -> usize {
        self.ld
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn view(&self) -> MatRef<'_> {
        MatRef {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
        }
    }

    pub fn view_mut(&mut self) -> MatMut<'_> {
        MatMut {
            data: &mut self.data,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
        }
    }

    /// Bitwise comparison of the logical `rows x cols` region (padding rows ignored).
    pub fn bitwise_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && (0..self.cols).all(|j| {
                (0..self.rows).all(|i| self[(i, j)].to_bits() == other[(i, j)].to_bits())
            })
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.ld]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.ld]
    }
}

/// Borrowed column-major view. `data[0]` is element `(0, 0)` of the view.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    ld: usize,
}

impl<'a> MatRef<'a> {
    /// Wraps a column-major slice. Panics if the slice is too short for the shape.
    pub fn new(data: &'a [f64], rows: usize, cols: usize, ld: usize) -> Self {
        assert!(ld >= rows, "leading dimension {ld} < rows {rows}");
        if rows > 0 && cols > 0 {
            assert!(data.len() >= (cols - 1) * ld + rows, "slice too short for view");
        }
        Self {
            data,
            rows,
            cols,
            ld,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ld(&self) -> usize {
        self.ld
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.ld]
    }

    /// Column `j` as a contiguous slice of length `rows`.
    #[inline]
    pub fn col(&self, j: usize) -> &'a [f64] {
        let start = j * self.ld;
        &self.data[start..start + self.rows]
    }

    /// Sub-view of `rows x cols` elements starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatRef<'a> {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "submatrix out of bounds");
        if rows == 0 || cols == 0 {
            return MatRef {
                data: &[],
                rows,
                cols,
                ld: self.ld,
            };
        }
        let start = r0 + c0 * self.ld;
        MatRef {
            data: &self.data[start..],
            rows,
            cols,
            ld: self.ld,
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

/// Mutable column-major view. `data[0]` is element `(0, 0)` of the view.
#[derive(Debug)]
pub struct MatMut<'a> {
    data: &'a mut [f64],
    rows: usize,
    cols: usize,
    ld: usize,
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], rows: usize, cols: usize, ld: usize) -> Self {
        assert!(ld >= rows, "leading dimension {ld} < rows {rows}");
        if rows > 0 && cols > 0 {
            assert!(data.len() >= (cols - 1) * ld + rows, "slice too short for view");
        }
        Self { data, rows, cols, ld }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ld(&self) -> usize {
        self.ld
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.ld]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.ld] = v;
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef {
            data: self.data,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
        }
    }

    pub fn submatrix_mut(&mut self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatMut<'_> {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "submatrix out of bounds");
        let ld = self.ld;
        if rows == 0 || cols == 0 {
            return MatMut {
                data: &mut [],
                rows,
                cols,
                ld,
            };
        }
        MatMut {
            data: &mut self.data[r0 + c0 * ld..],
            rows,
            cols,
            ld,
        }
    }

    /// Raw pointer to element `(0, 0)`; valid for the lifetime of the borrow.
    pub(crate) fn as_mut_ptr(&mut self) -> *mut f64 {
        self.data.as_mut_ptr()
    }
}
