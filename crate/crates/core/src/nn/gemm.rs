//! Dense kernels behind the fully connected and convolutional layers.
//!
//! Plain safe Rust arranged for autovectorization: reductions carry several
//! independent accumulators so the compiler can keep them in SIMD lanes, and
//! loops stream memory row-major. All arithmetic happens in a fixed order,
//! so results are bit-reproducible run to run.

use crate::scalar::Scalar;

/// `y[i] += alpha * x[i]`.
#[inline]
pub fn axpy<T: Scalar>(y: &mut [T], x: &[T], alpha: T) {
    debug_assert_eq!(y.len(), x.len());
    for (y, &x) in y.iter_mut().zip(x) {
        *y = *y + alpha * x;
    }
}

/// Dot product with eight independent accumulators.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ac = a.chunks_exact(8);
    let bc = b.chunks_exact(8);
    let mut tail = T::zero();
    for (&x, &y) in ac.remainder().iter().zip(bc.remainder()) {
        tail = tail + x * y;
    }
    for (ca, cb) in ac.zip(bc) {
        for i in 0..8 {
            acc[i] = acc[i] + ca[i] * cb[i];
        }
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

/// `out[m][n] (+)= a[m][l] * b[l][n]` (`C = A * B`), all row-major.
///
/// Rows of `a` are processed four at a time: each streamed row of `b` then
/// feeds four independent multiply-add sweeps whose output rows stay hot in
/// cache. This is the workhorse for the dense layers; with `acc` the result
/// accumulates into `out` instead of overwriting it.
pub fn gemm_nn<T: Scalar>(a: &[T], b: &[T], m: usize, l: usize, n: usize, acc: bool, out: &mut [T]) {
    assert_eq!(a.len(), m * l, "gemm_nn: a");
    assert_eq!(b.len(), l * n, "gemm_nn: b");
    assert_eq!(out.len(), m * n, "gemm_nn: out");
    if !acc {
        out.fill(T::zero());
    }
    let mut row = 0;
    while row + 4 <= m {
        let (o0, rest) = out[row * n..].split_at_mut(n);
        let (o1, rest) = rest.split_at_mut(n);
        let (o2, rest) = rest.split_at_mut(n);
        let o3 = &mut rest[..n];
        for j in 0..l {
            let brow = &b[j * n..][..n];
            let a0 = a[row * l + j];
            let a1 = a[(row + 1) * l + j];
            let a2 = a[(row + 2) * l + j];
            let a3 = a[(row + 3) * l + j];
            for c in 0..n {
                let bv = brow[c];
                o0[c] = o0[c] + a0 * bv;
                o1[c] = o1[c] + a1 * bv;
                o2[c] = o2[c] + a2 * bv;
                o3[c] = o3[c] + a3 * bv;
            }
        }
        row += 4;
    }
    while row < m {
        let orow = &mut out[row * n..][..n];
        for j in 0..l {
            axpy(orow, &b[j * n..][..n], a[row * l + j]);
        }
        row += 1;
    }
}

/// `out[m][n] = dot(a row m, b row n)`, i.e. `C = A * B^T` with both inputs
/// row-major (`a` is `m x k`, `b` is `n x k`).
pub fn gemm_nt<T: Scalar>(a: &[T], b: &[T], m: usize, n: usize, k: usize, out: &mut [T]) {
    assert_eq!(a.len(), m * k, "gemm_nt: a");
    assert_eq!(b.len(), n * k, "gemm_nt: b");
    assert_eq!(out.len(), m * n, "gemm_nt: out");
    let mut row = 0;
    while row + 4 <= m {
        let a0 = &a[row * k..][..k];
        let a1 = &a[(row + 1) * k..][..k];
        let a2 = &a[(row + 2) * k..][..k];
        let a3 = &a[(row + 3) * k..][..k];
        for col in 0..n {
            let brow = &b[col * k..][..k];
            let mut s0 = [T::zero(); 4];
            let mut s1 = [T::zero(); 4];
            let mut s2 = [T::zero(); 4];
            let mut s3 = [T::zero(); 4];
            let mut i = 0;
            while i + 4 <= k {
                for u in 0..4 {
                    let bv = brow[i + u];
                    s0[u] = s0[u] + a0[i + u] * bv;
                    s1[u] = s1[u] + a1[i + u] * bv;
                    s2[u] = s2[u] + a2[i + u] * bv;
                    s3[u] = s3[u] + a3[i + u] * bv;
                }
                i += 4;
            }
            let (mut t0, mut t1, mut t2, mut t3) = (T::zero(), T::zero(), T::zero(), T::zero());
            while i < k {
                let bv = brow[i];
                t0 = t0 + a0[i] * bv;
                t1 = t1 + a1[i] * bv;
                t2 = t2 + a2[i] * bv;
                t3 = t3 + a3[i] * bv;
                i += 1;
            }
            out[row * n + col] = (s0[0] + s0[1]) + (s0[2] + s0[3]) + t0;
            out[(row + 1) * n + col] = (s1[0] + s1[1]) + (s1[2] + s1[3]) + t1;
            out[(row + 2) * n + col] = (s2[0] + s2[1]) + (s2[2] + s2[3]) + t2;
            out[(row + 3) * n + col] = (s3[0] + s3[1]) + (s3[2] + s3[3]) + t3;
        }
        row += 4;
    }
    while row < m {
        let arow = &a[row * k..][..k];
        for col in 0..n {
            out[row * n + col] = dot(arow, &b[col * k..][..k]);
        }
        row += 1;
    }
}

/// `out[k][n] += dot(a column k, b column n)`, i.e. `C += A^T * B` with both
/// inputs row-major (`a` is `r x k`, `b` is `r x n`).
///
/// Streams both inputs row by row while the `k x n` output stays resident,
/// so it only pays off when the output is small. That is exactly the shape
/// of a convolution weight gradient, where `k * n` is a few thousand
/// elements, and it avoids transposing the much larger patch matrix.
pub fn gemm_tn_acc<T: Scalar>(a: &[T], b: &[T], r: usize, k: usize, n: usize, out: &mut [T]) {
    assert_eq!(a.len(), r * k, "gemm_tn_acc: a");
    assert_eq!(b.len(), r * n, "gemm_tn_acc: b");
    assert_eq!(out.len(), k * n, "gemm_tn_acc: out");
    for row in 0..r {
        let arow = &a[row * k..][..k];
        let brow = &b[row * n..][..n];
        for (kk, &av) in arow.iter().enumerate() {
            axpy(&mut out[kk * n..][..n], brow, av);
        }
    }
}

/// Tiled row-major transpose, `out[j][i] = a[i][j]` for `a` of shape `m x n`.
pub fn transpose<T: Scalar>(a: &[T], m: usize, n: usize, out: &mut [T]) {
    assert_eq!(a.len(), m * n);
    assert_eq!(out.len(), m * n);
    const TILE: usize = 32;
    for i0 in (0..m).step_by(TILE) {
        for j0 in (0..n).step_by(TILE) {
            for i in i0..(i0 + TILE).min(m) {
                for j in j0..(j0 + TILE).min(n) {
                    out[j * m + i] = a[i * n + j];
                }
            }
        }
    }
}
