//! Dense matrix-multiply kernels.
//!
//! Training and extraction spend most of their time in the affine and
//! time-delay layers, which reduce to `A * B^T` products over row-major
//! slices. The kernel below processes four output rows at a time with
//! eight-way unrolled accumulators; the unroll fixes the floating-point
//! summation order in the source, so results are deterministic while still
//! giving the compiler straight-line code it can vectorize.

use super::tensor::Mat;
use super::Real;

/// Rows of `b` per cache block: 64 rows x 1536 cols of f32 is ~400 KB,
/// comfortably L2-resident, and gets reused across every row of `a`.
const BLOCK_ROWS: usize = 64;

/// `out = a * b^T`, where `a` is `m x k` and `b` is `n x k`, both row-major.
/// `out` must be `m x n` and is overwritten.
///
/// Blocked over rows of `b` to keep memory traffic down; each output cell is
/// still one fixed-order dot product, so results do not depend on the
/// blocking.
pub fn matmul_nt<R: Real>(a: &Mat<R>, b: &Mat<R>, out: &mut Mat<R>) {
    assert_eq!(a.cols, b.cols, "inner dimensions differ");
    assert_eq!(out.rows, a.rows);
    assert_eq!(out.cols, b.rows);
    let k = a.cols;
    let n = b.rows;

    let mut j0 = 0;
    while j0 < n {
        let j1 = (j0 + BLOCK_ROWS).min(n);
        let mut i = 0;
        while i + 4 <= a.rows {
            let a0 = a.row(i);
            let a1 = a.row(i + 1);
            let a2 = a.row(i + 2);
            let a3 = a.row(i + 3);
            for j in j0..j1 {
                let br = b.row(j);
                let (d0, d1, d2, d3) = dot4(a0, a1, a2, a3, br, k);
                out.data[i * n + j] = d0;
                out.data[(i + 1) * n + j] = d1;
                out.data[(i + 2) * n + j] = d2;
                out.data[(i + 3) * n + j] = d3;
            }
            i += 4;
        }
        while i < a.rows {
            let ar = a.row(i);
            for j in j0..j1 {
                out.data[i * n + j] = dot(ar, b.row(j));
            }
            i += 1;
        }
        j0 = j1;
    }
}

/// Dot product with a fixed 8-lane accumulation order.
#[inline]
pub fn dot<R: Real>(x: &[R], y: &[R]) -> R {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len();
    let chunks = n / 8;
    let mut acc = [R::zero(); 8];
    for c in 0..chunks {
        let xa = &x[c * 8..c * 8 + 8];
        let ya = &y[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] = acc[l] + xa[l] * ya[l];
        }
    }
    let mut tail = R::zero();
    for t in chunks * 8..n {
        tail = tail + x[t] * y[t];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Four simultaneous dot products against one shared right-hand row.
#[inline]
#[allow(clippy::too_many_arguments)]
fn dot4<R: Real>(a0: &[R], a1: &[R], a2: &[R], a3: &[R], b: &[R], k: usize) -> (R, R, R, R) {
    let chunks = k / 4;
    let mut s0 = [R::zero(); 4];
    let mut s1 = [R::zero(); 4];
    let mut s2 = [R::zero(); 4];
    let mut s3 = [R::zero(); 4];
    for c in 0..chunks {
        let o = c * 4;
        let bb = &b[o..o + 4];
        let x0 = &a0[o..o + 4];
        let x1 = &a1[o..o + 4];
        let x2 = &a2[o..o + 4];
        let x3 = &a3[o..o + 4];
        for l in 0..4 {
            s0[l] = s0[l] + x0[l] * bb[l];
            s1[l] = s1[l] + x1[l] * bb[l];
            s2[l] = s2[l] + x2[l] * bb[l];
            s3[l] = s3[l] + x3[l] * bb[l];
        }
    }
    let (mut d0, mut d1, mut d2, mut d3) = (
        (s0[0] + s0[2]) + (s0[1] + s0[3]),
        (s1[0] + s1[2]) + (s1[1] + s1[3]),
        (s2[0] + s2[2]) + (s2[1] + s2[3]),
        (s3[0] + s3[2]) + (s3[1] + s3[3]),
    );
    for t in chunks * 4..k {
        d0 = d0 + a0[t] * b[t];
        d1 = d1 + a1[t] * b[t];
        d2 = d2 + a2[t] * b[t];
        d3 = d3 + a3[t] * b[t];
    }
    (d0, d1, d2, d3)
}

/// `out += coef * src`, elementwise.
#[inline]
pub fn axpy<R: Real>(out: &mut [R], coef: R, src: &[R]) {
    debug_assert_eq!(out.len(), src.len());
    for (o, &s) in out.iter_mut().zip(src.iter()) {
        *o += coef * s;
    }
}
