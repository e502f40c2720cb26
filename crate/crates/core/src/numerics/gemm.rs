//! Thin safe wrapper over `matrixmultiply::sgemm`.

/// Row/column strides of a matrix operand, in elements.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub row: isize,
    pub col: isize,
}

impl Layout {
    /// Row-major `rows x cols` storage.
    pub fn row_major(cols: usize) -> Self {
        Self {
            row: cols as isize,
            col: 1,
        }
    }

    /// Transposed view of row-major storage whose stored row length is `stored_cols`.
    pub fn transposed(stored_cols: usize) -> Self {
        Self {
            row: 1,
            col: stored_cols as isize,
        }
    }
}

fn max_offset(rows: usize, cols: usize, l: Layout) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    (rows - 1) * l.row as usize + (cols - 1) * l.col as usize
}

/// `c = a·b + beta·c` with `a: m×k`, `b: k×n`, `c: m×n` row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    la: Layout,
    b: &[f32],
    lb: Layout,
    beta: f32,
    c: &mut [f32],
) {
    assert!(max_offset(m, k, la) < a.len().max(1));
    assert!(max_offset(k, n, lb) < b.len().max(1));
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every index the kernel touches lies inside the asserted bounds above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            la.row,
            la.col,
            b.as_ptr(),
            lb.row,
            lb.col,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
