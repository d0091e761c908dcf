//! Row-major matrix and channel-major rank-3 tensor.

use super::Real;

/// Dense row-major matrix, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<R> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<R>,
}

impl<R: Real> Mat<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[R] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [R] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> R {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: R) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transposed(&self) -> Mat<R> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            for (c, &v) in row.iter().enumerate() {
                out.data[c * self.rows + r] = v;
            }
        }
        out
    }

    /// Rows `lo..hi` as a borrowed sub-matrix view (copy).
    pub fn slice_rows(&self, lo: usize, hi: usize) -> Mat<R> {
        assert!(lo <= hi && hi <= self.rows);
        Mat {
            rows: hi - lo,
            cols: self.cols,
            data: self.data[lo * self.cols..hi * self.cols].to_vec(),
        }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[R]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_f64_mat(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn to_f32_mat(&self) -> Mat<f32> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.as_f64() as f32).collect(),
        }
    }
}

/// Rank-3 tensor laid out `[channel][height][width]`, contiguous.
///
/// In the speaker network `height` is utterance time and `width` is the
/// frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ten3<R> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<R>,
}

impl<R: Real> Ten3<R> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Ten3 {
            c,
            h,
            w,
            data: vec![R::zero(); c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<R>) -> Self {
        assert_eq!(c * h * w, data.len(), "tensor data length mismatch");
        Ten3 { c, h, w, data }
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.h + y) * self.w + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> R {
        self.data[self.idx(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: R) {
        let i = self.idx(c, y, x);
        self.data[i] = v;
    }

    /// Contiguous row `(c, y, ..)`.
    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[R] {
        let start = (c * self.h + y) * self.w;
        &self.data[start..start + self.w]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize, y: usize) -> &mut [R] {
        let start = (c * self.h + y) * self.w;
        &mut self.data[start..start + self.w]
    }
}
