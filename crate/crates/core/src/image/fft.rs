use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GrayImage;
use crate::error::{Error, Result};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

// The planner memoizes plans by length, so repeated transforms of one padded
// size share a plan across the whole process.
fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        p.plan_fft_inverse(len)
    } else {
        p.plan_fft_forward(len)
    }
}

/// Smallest integer `>= n` whose only prime factors are 2, 3 and 5.
pub fn next_smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Complex 2-D spectrum of a zero-padded raster.
#[derive(Clone, Debug)]
pub struct Spectrum {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Pointwise product, i.e. convolution in the spatial domain.
    pub fn mul(&self, other: &Spectrum) -> Result<Spectrum> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::dims(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(Spectrum {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

fn fft2_inplace(data: &mut Vec<Complex64>, rows: usize, cols: usize, inverse: bool) {
    plan(cols, inverse).process(data);
    let mut t = transpose(data, rows, cols);
    plan(rows, inverse).process(&mut t);
    *data = transpose(&t, cols, rows);
    if inverse {
        let norm = 1.0 / (rows * cols) as f64;
        data.iter_mut().for_each(|v| *v *= norm);
    }
}

fn padded_dims(m1: usize, n1: usize, m2: usize, n2: usize) -> (usize, usize) {
    (
        next_smooth_size(m1 + m2 - 1),
        next_smooth_size(n1 + n2 - 1),
    )
}

/// Forward transform of `img` zero-padded for a linear convolution of an
/// `m1 x n1` operand with an `m2 x n2` operand.
pub fn fft2p(img: &GrayImage, m1: usize, n1: usize, m2: usize, n2: usize) -> Result<Spectrum> {
    if m1 == 0 || n1 == 0 || m2 == 0 || n2 == 0 {
        return Err(Error::param("fft2p operand dims must be positive"));
    }
    let (rows, cols) = padded_dims(m1, n1, m2, n2);
    if img.rows() > rows || img.cols() > cols {
        return Err(Error::dims(
            format!("at most {rows}x{cols}"),
            format!("{}x{}", img.rows(), img.cols()),
        ));
    }
    let mut data = vec![Complex64::default(); rows * cols];
    for r in 0..img.rows() {
        for (c, &v) in img.row(r).iter().enumerate() {
            data[r * cols + c] = Complex64::new(v, 0.0);
        }
    }
    fft2_inplace(&mut data, rows, cols, false);
    Ok(Spectrum { rows, cols, data })
}

fn inverse_real(spec: &Spectrum) -> Vec<f64> {
    let mut data = spec.data.clone();
    fft2_inplace(&mut data, spec.rows, spec.cols, true);
    data.into_iter().map(|v| v.re).collect()
}

/// Inverse of [`fft2p`], cropped to rows `m2-1 .. m1` and cols `n2-1 .. n1`:
/// the positions where an `m2 x n2` kernel lies fully inside the `m1 x n1`
/// operand. With `m2 = n2 = 1` this is the plain round trip.
pub fn ifft2p(spec: &Spectrum, m1: usize, n1: usize, m2: usize, n2: usize) -> Result<GrayImage> {
    if m2 == 0 || n2 == 0 || m2 > m1 || n2 > n1 {
        return Err(Error::param(format!(
            "kernel {m2}x{n2} does not fit operand {m1}x{n1}"
        )));
    }
    let (rows, cols) = padded_dims(m1, n1, m2, n2);
    if (rows, cols) != (spec.rows, spec.cols) {
        return Err(Error::dims(
            format!("{rows}x{cols}"),
            format!("{}x{}", spec.rows, spec.cols),
        ));
    }
    let real = inverse_real(spec);
    let (out_r, out_c) = (m1 - m2 + 1, n1 - n2 + 1);
    Ok(GrayImage::from_fn(out_r, out_c, |r, c| {
        real[(r + m2 - 1) * cols + c + n2 - 1]
    }))
}

/// Full 2-D linear convolution, `(ra + rb - 1) x (ca + cb - 1)`, via FFT.
pub fn conv2(a: &GrayImage, b: &GrayImage) -> GrayImage {
    let (m1, n1) = a.dims();
    let (m2, n2) = b.dims();
    // padded_dims is symmetric in its operands, so both spectra share a size
    let fa = fft2p(a, m1, n1, m2, n2).expect("operand fits its own padding");
    let fb = fft2p(b, m1, n1, m2, n2).expect("operand fits its own padding");
    let prod = fa.mul(&fb).expect("equal padded sizes");
    let real = inverse_real(&prod);
    let cols = prod.cols;
    GrayImage::from_fn(m1 + m2 - 1, n1 + n2 - 1, |r, c| real[r * cols + c])
}

// Map a frequency index of a length-`from` transform to the index it keeps
// in a length-`to` transform, or None if it is cut off.
fn remap_freq(k: usize, from: usize, to: usize) -> Option<usize> {
    let keep = from.min(to);
    let pos = keep.div_ceil(2);
    let neg = keep - pos;
    if k < pos {
        Some(k)
    } else if k >= from - neg {
        Some(to - (from - k))
    } else {
        None
    }
}

/// Band-limited resample of `img` to `rows x cols` by truncating or
/// zero-padding its spectrum.
pub(crate) fn fourier_resample(img: &GrayImage, rows: usize, cols: usize) -> GrayImage {
    let (r0, c0) = img.dims();
    let mut data: Vec<Complex64> = img.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_inplace(&mut data, r0, c0, false);
    let mut out = vec![Complex64::default(); rows * cols];
    for r in 0..r0 {
        let Some(rr) = remap_freq(r, r0, rows) else {
            continue;
        };
        for c in 0..c0 {
            if let Some(cc) = remap_freq(c, c0, cols) {
                out[rr * cols + cc] = data[r * c0 + c];
            }
        }
    }
    fft2_inplace(&mut out, rows, cols, true);
    let gain = (rows * cols) as f64 / (r0 * c0) as f64;
    GrayImage::from_vec(rows, cols, out.into_iter().map(|v| v.re * gain).collect())
        .expect("dims match")
}
