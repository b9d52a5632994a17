//! Small dense helpers shared by the backends.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Symmetric part `(m + mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes a row-major `d×d` buffer in place.
pub fn symmetrize_in_place(buf: &mut [f64], d: usize) {
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (buf[i * d + j] + buf[j * d + i]);
            buf[i * d + j] = v;
            buf[j * d + i] = v;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Extreme eigenvalues of a symmetric row-major buffer; closed form for `d ≤ 2`.
pub fn sym_eig_extremes(buf: &[f64], d: usize) -> (f64, f64) {
    match d {
        1 => (buf[0], buf[0]),
        2 => {
            let (a, b, c) = (buf[0], 0.5 * (buf[1] + buf[2]), buf[3]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            (mid - rad, mid + rad)
        }
        _ => {
            let m = DMatrix::from_row_slice(d, d, buf);
            (min_eigenvalue(&m), max_eigenvalue(&m))
        }
    }
}

/// Spectral square root of a symmetric positive-semidefinite matrix.
///
/// Negative eigenvalues are clipped to zero; the clipped magnitude relative to
/// the spectral radius is returned alongside the root.
pub fn psd_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0.0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut clipped = 0.0_f64;
    let roots = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&l| {
            if l < 0.0 {
                clipped = clipped.max(-l);
                0.0
            } else {
                l.sqrt()
            }
        }),
    );
    let v = &eig.eigenvectors;
    let root = v * DMatrix::from_diagonal(&roots) * v.transpose();
    let rel = if scale > 0.0 { clipped / scale } else { 0.0 };
    (symmetrize(&root), rel)
}

/// In-place square root of a symmetric PSD row-major buffer for `d ≤ 2`,
/// general `d` through [`psd_sqrt`].
pub fn psd_sqrt_small(buf: &[f64], d: usize, out: &mut [f64]) {
    match d {
        1 => out[0] = buf[0].max(0.0).sqrt(),
        2 => {
            let (a, b, c) = (buf[0], 0.5 * (buf[1] + buf[2]), buf[3]);
            let det = (a * c - b * b).max(0.0);
            let s = det.sqrt();
            let tr = a + c + 2.0 * s;
            if tr <= 0.0 {
                out.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
            let k = 1.0 / tr.sqrt();
            out[0] = (a + s) * k;
            out[1] = b * k;
            out[2] = b * k;
            out[3] = (c + s) * k;
        }
        _ => {
            let (root, _) = psd_sqrt(&DMatrix::from_row_slice(d, d, buf));
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = root[(i, j)];
                }
            }
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_2x2_closed_form_matches_spectral() {
        let m = [2.0, 0.3, 0.3, 1.0];
        let mut out = [0.0; 4];
        psd_sqrt_small(&m, 2, &mut out);
        let (root, _) = psd_sqrt(&DMatrix::from_row_slice(2, 2, &m));
        for i in 0..2 {
            for j in 0..2 {
                assert!((out[i * 2 + j] - root[(i, j)]).abs() < 1e-13);
            }
        }
        let sq = &root * &root;
        assert!((sq[(0, 1)] - 0.3).abs() < 1e-13);
    }

    #[test]
    fn negative_roundoff_is_clipped() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-15]);
        let (root, rel) = psd_sqrt(&m);
        assert!(rel < 1e-12);
        assert!(root.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn eig_extremes_2x2() {
        let (lo, hi) = sym_eig_extremes(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
    }
}
