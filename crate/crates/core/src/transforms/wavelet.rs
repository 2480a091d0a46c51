use super::filters::WaveletSpec;
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Periodic analysis step: filter with `h` and `g`, keep odd-indexed samples.
/// `a[m] = Σ_k h[k] x[(2m + 1 - k) mod N]`. `ext` is scratch space.
fn analysis_1d(x: &[f64], h: &[f64], g: &[f64], lo: &mut [f64], hi: &mut [f64], ext: &mut Vec<f64>) {
    let n = x.len();
    let k = h.len();
    // x extended on the left so that x[(i - j) mod n] = ext[i - j + k - 1]
    ext.clear();
    ext.extend((0..n + k - 1).map(|j| x[(j + n * k - (k - 1)) % n]));
    lo.fill(0.0);
    hi.fill(0.0);
    for j in 0..k {
        let (hj, gj) = (h[j], g[j]);
        let shifted = ext[k - j..].iter().step_by(2);
        for ((a, d), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(shifted) {
            *a += hj * v;
            *d += gj * v;
        }
    }
}

// Filter every row, returning the low and high halves.
fn split_rows(img: &GrayImage, w: &WaveletSpec) -> (GrayImage, GrayImage) {
    let (rows, cols) = img.dims();
    let half = cols / 2;
    let mut lo = vec![0.0; rows * half];
    let mut hi = vec![0.0; rows * half];
    let mut ext = Vec::with_capacity(cols + w.lowpass().len());
    for r in 0..rows {
        analysis_1d(
            img.row(r),
            w.lowpass(),
            w.highpass(),
            &mut lo[r * half..(r + 1) * half],
            &mut hi[r * half..(r + 1) * half],
            &mut ext,
        );
    }
    (
        GrayImage::from_vec(rows, half, lo).expect("sized"),
        GrayImage::from_vec(rows, half, hi).expect("sized"),
    )
}

// Filter every column, whole rows at a time.
fn split_cols(img: &GrayImage, w: &WaveletSpec) -> (GrayImage, GrayImage) {
    let (rows, cols) = img.dims();
    let half = rows / 2;
    let (h, g) = (w.lowpass(), w.highpass());
    let k = h.len();
    let mut lo = vec![0.0; half * cols];
    let mut hi = vec![0.0; half * cols];
    for m in 0..half {
        let lo_row = &mut lo[m * cols..(m + 1) * cols];
        let hi_row = &mut hi[m * cols..(m + 1) * cols];
        for j in 0..k {
            let src = img.row((2 * m + 1 + rows * k - j) % rows);
            for ((a, d), &v) in lo_row.iter_mut().zip(hi_row.iter_mut()).zip(src) {
                *a += h[j] * v;
                *d += g[j] * v;
            }
        }
    }
    (
        GrayImage::from_vec(half, cols, lo).expect("sized"),
        GrayImage::from_vec(half, cols, hi).expect("sized"),
    )
}

/// One level of the separable 2-D transform: `[A, Dh, Dv, Dd]`.
///
/// `Dh` is lowpass along rows and highpass along columns (it responds to
/// horizontal structure), `Dv` the converse, `Dd` highpass in both.
pub fn dwt2_level(img: &GrayImage, w: &WaveletSpec) -> Result<[GrayImage; 4]> {
    let (rows, cols) = img.dims();
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::param(format!(
            "{rows}x{cols} image cannot be halved"
        )));
    }
    let (l, h) = split_rows(img, w);
    let (ll, lh) = split_cols(&l, w);
    let (hl, hh) = split_cols(&h, w);
    Ok([ll, lh, hl, hh])
}

/// Multi-level 2-D DWT.
#[derive(Clone, Debug, PartialEq)]
pub struct Dwt2 {
    /// `[Dh, Dv, Dd]` for levels `1..=J`, finest first.
    pub details: Vec<[GrayImage; 3]>,
    pub approx: GrayImage,
}

impl Dwt2 {
    /// All coefficients in one image-sized matrix: each level is laid out as
    /// `[[A, Dh], [Dv, Dd]]`, with `A` recursively replaced by the coarser
    /// levels.
    pub fn packed(&self) -> GrayImage {
        let mut y = self.approx.clone();
        for [dh, dv, dd] in self.details.iter().rev() {
            let (r, c) = y.dims();
            let mut next = GrayImage::new(2 * r, 2 * c);
            next.paste(&y, 0, 0);
            next.paste(dh, 0, c as isize);
            next.paste(dv, r as isize, 0);
            next.paste(dd, r as isize, c as isize);
            y = next;
        }
        y
    }
}

fn check_divisible(img: &GrayImage, levels: usize) -> Result<()> {
    let d = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::param("too many levels"))?;
    if img.rows() % d != 0 || img.cols() % d != 0 {
        return Err(Error::param(format!(
            "{}x{} image is not divisible by 2^{levels}",
            img.rows(),
            img.cols()
        )));
    }
    Ok(())
}

/// `levels`-deep DWT with periodic extension.
pub fn dwt2(img: &GrayImage, w: &WaveletSpec, levels: usize) -> Result<Dwt2> {
    check_divisible(img, levels)?;
    let mut details = Vec::with_capacity(levels);
    let mut approx = img.clone();
    for _ in 0..levels {
        let [a, dh, dv, dd] = dwt2_level(&approx, w)?;
        details.push([dh, dv, dd]);
        approx = a;
    }
    Ok(Dwt2 { details, approx })
}

/// Full wavelet-packet tree to depth `levels`: `4^levels` subbands, node `i`
/// of one level splitting into nodes `4i .. 4i+3` (`A, Dh, Dv, Dd`) of the
/// next.
pub fn wpd(img: &GrayImage, w: &WaveletSpec, levels: usize) -> Result<Vec<GrayImage>> {
    check_divisible(img, levels)?;
    let mut nodes = vec![img.clone()];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(nodes.len() * 4);
        for node in &nodes {
            next.extend(dwt2_level(node, w)?);
        }
        nodes = next;
    }
    Ok(nodes)
}
