//! Dense helpers on top of nalgebra for the sizes the fit works at.

use nalgebra::DMatrix;

/// Block size routing the bulk of the work through GEMM.
const BLOCK: usize = 64;

/// Inverse of a lower-triangular matrix.
///
/// Right-to-left blocked algorithm: scalar substitution on the diagonal
/// blocks, two GEMMs per sub-diagonal panel. Roughly an order of magnitude
/// faster than column-by-column substitution at n ~ 1000.
pub(crate) fn invert_lower_triangular(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    debug_assert_eq!(n, l.ncols());
    let mut w = DMatrix::<f64>::zeros(n, n);
    let nblocks = n.div_ceil(BLOCK);
    for jb in (0..nblocks).rev() {
        let j0 = jb * BLOCK;
        let j1 = (j0 + BLOCK).min(n);
        let bw = j1 - j0;

        // Diagonal block by forward substitution, one unit column at a time.
        for c in 0..bw {
            w[(j0 + c, j0 + c)] = 1.0 / l[(j0 + c, j0 + c)];
            for r in (c + 1)..bw {
                let mut s = 0.0;
                for k in c..r {
                    s += l[(j0 + r, j0 + k)] * w[(j0 + k, j0 + c)];
                }
                w[(j0 + r, j0 + c)] = -s / l[(j0 + r, j0 + r)];
            }
        }

        // Panel below the diagonal block:
        // inv([[A, 0], [C, B]]) has lower-left block -B^-1 C A^-1, and B^-1
        // is already in place because block columns are processed
        // right-to-left.
        if j1 < n {
            let wtrail = w.view((j1, j1), (n - j1, n - j1));
            let lpanel = l.view((j1, j0), (n - j1, bw));
            let wdiag = w.view((j0, j0), (bw, bw));
            let panel = -(wtrail * lpanel) * wdiag;
            w.view_mut((j1, j0), (n - j1, bw)).copy_from(&panel);
        }
    }
    w
}

/// Inverse of a symmetric positive-definite matrix from its Cholesky factor
/// `L`: `inv = W' W` with `W = L^-1`, both steps GEMM-speed.
pub(crate) fn spd_inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    let w = invert_lower_triangular(l);
    w.transpose() * w
}
