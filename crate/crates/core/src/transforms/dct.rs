use nalgebra::DMatrix;

use crate::image::GrayImage;

/// Orthonormal DCT-II matrix: `C[k][n] = α(k) cos(π (2n + 1) k / 2N)`.
pub(crate) fn dct_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, i| {
        let alpha = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

fn to_matrix(img: &GrayImage) -> DMatrix<f64> {
    DMatrix::from_row_slice(img.rows(), img.cols(), img.pixels())
}

fn from_matrix(m: &DMatrix<f64>) -> GrayImage {
    GrayImage::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Orthonormal 2-D DCT-II, computed separably as `C1 X C2ᵀ`.
pub fn dct2(img: &GrayImage) -> GrayImage {
    let c1 = dct_matrix(img.rows());
    let c2 = dct_matrix(img.cols());
    from_matrix(&(&c1 * to_matrix(img) * c2.transpose()))
}

/// Inverse of [`dct2`].
pub fn idct2(coeffs: &GrayImage) -> GrayImage {
    let c1 = dct_matrix(coeffs.rows());
    let c2 = dct_matrix(coeffs.cols());
    from_matrix(&(c1.transpose() * to_matrix(coeffs) * &c2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dct_direct(x: &GrayImage) -> GrayImage {
        let (n1, n2) = x.dims();
        let a = |k: usize, n: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        GrayImage::from_fn(n1, n2, |k1, k2| {
            let mut s = 0.0;
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    s += x.get(i1, i2)
                        * (PI * (2 * i1 + 1) as f64 * k1 as f64 / (2 * n1) as f64).cos()
                        * (PI * (2 * i2 + 1) as f64 * k2 as f64 / (2 * n2) as f64).cos();
                }
            }
            a(k1, n1) * a(k2, n2) * s
        })
    }

    #[test]
    fn single_pixel_and_constant() {
        let one = GrayImage::filled(1, 1, 42.0);
        assert!((dct2(&one).get(0, 0) - 42.0).abs() < 1e-12);
        let c = GrayImage::filled(6, 4, 3.0);
        let y = dct2(&c);
        assert!((y.get(0, 0) - 3.0 * 24f64.sqrt()).abs() < 1e-9);
        let rest: f64 = y.pixels()[1..].iter().map(|v| v.abs()).sum();
        assert!(rest < 1e-9);
    }

    #[test]
    fn matches_direct_formula_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = GrayImage::from_fn(8, 8, |_, _| rng.random_range(0.0..255.0));
        let fast = dct2(&x);
        let slow = dct_direct(&x);
        for (a, b) in fast.pixels().iter().zip(slow.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
        let ex: f64 = x.pixels().iter().map(|v| v * v).sum();
        let ey: f64 = fast.pixels().iter().map(|v| v * v).sum();
        assert!((ex - ey).abs() / ex < 1e-12);
        let back = idct2(&fast);
        for (a, b) in back.pixels().iter().zip(x.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
