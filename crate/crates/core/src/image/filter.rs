use super::{round_half_away, GrayImage};
use crate::error::{Error, Result};

/// Cumulative-histogram equalization over `bins` equal-width intensity bins.
///
/// Pixels sharing a bin share an output level, so the remapping is monotone
/// and constant images come back unchanged.
pub fn histogram_equalize(img: &GrayImage, bins: usize) -> Result<GrayImage> {
    if !(2..=256).contains(&bins) {
        return Err(Error::param(format!("bins must be in [2,256], got {bins}")));
    }
    if !img.is_integer_mode() {
        return Err(Error::param("histogram equalization needs an integer-mode image"));
    }
    let bin_of = |v: f64| ((v as usize) * bins / 256).min(bins - 1);
    let mut hist = vec![0usize; bins];
    for &v in img.pixels() {
        hist[bin_of(v)] += 1;
    }
    let mut cdf = hist;
    for i in 1..bins {
        cdf[i] += cdf[i - 1];
    }
    let total = img.len();
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if total == cdf_min {
        return Ok(img.clone());
    }
    let span = (total - cdf_min) as f64;
    let lut: Vec<f64> = cdf
        .iter()
        .map(|&c| round_half_away(255.0 * (c.saturating_sub(cdf_min)) as f64 / span))
        .collect();
    Ok(img.map(|v| lut[bin_of(v)]))
}

/// Normalized 1-D Gaussian truncated at `±ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    Ok(k)
}

fn convolve_rows(img: &GrayImage, kernel: &[f64]) -> GrayImage {
    let radius = (kernel.len() / 2) as isize;
    GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, &w)| w * img.get_clamped(r as isize, c as isize + i as isize - radius))
            .sum()
    })
}

fn convolve_cols(img: &GrayImage, kernel: &[f64]) -> GrayImage {
    let radius = (kernel.len() / 2) as isize;
    GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, &w)| w * img.get_clamped(r as isize + i as isize - radius, c as isize))
            .sum()
    })
}

/// Separable Gaussian smoothing with edge replication. Output is real-valued.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let k = gaussian_kernel(sigma)?;
    Ok(convolve_cols(&convolve_rows(img, &k), &k))
}

/// Median over a `win_h x win_w` window, edge replication at the borders.
pub fn median_filter(img: &GrayImage, win_w: usize, win_h: usize) -> Result<GrayImage> {
    if win_w % 2 == 0 || win_h % 2 == 0 {
        return Err(Error::param(format!(
            "median window must have odd dimensions, got {win_w}x{win_h}"
        )));
    }
    let (rw, rh) = ((win_w / 2) as isize, (win_h / 2) as isize);
    let mut window = Vec::with_capacity(win_w * win_h);
    Ok(GrayImage::from_fn(img.rows(), img.cols(), |r, c| {
        window.clear();
        for dr in -rh..=rh {
            for dc in -rw..=rw {
                window.push(img.get_clamped(r as isize + dr, c as isize + dc));
            }
        }
        let mid = window.len() / 2;
        *window
            .select_nth_unstable_by(mid, |a, b| a.total_cmp(b))
            .1
    }))
}

/// Bilinear resize by a uniform factor; output dims are `round(dims * scale)`.
pub fn resize(img: &GrayImage, scale: f64) -> Result<GrayImage> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param(format!("scale must be positive, got {scale}")));
    }
    let rows = round_half_away(img.rows() as f64 * scale);
    let cols = round_half_away(img.cols() as f64 * scale);
    if rows < 1.0 || cols < 1.0 {
        return Err(Error::param(format!(
            "scale {scale} shrinks {}x{} below 1x1",
            img.rows(),
            img.cols()
        )));
    }
    resize_to(img, rows as usize, cols as usize)
}

/// Bilinear resize to explicit dimensions with pixel-center alignment.
pub fn resize_to(img: &GrayImage, rows: usize, cols: usize) -> Result<GrayImage> {
    if rows == 0 || cols == 0 {
        return Err(Error::param("resize target must be at least 1x1"));
    }
    if (rows, cols) == img.dims() {
        return Ok(img.clone());
    }
    let sy = img.rows() as f64 / rows as f64;
    let sx = img.cols() as f64 / cols as f64;
    Ok(GrayImage::from_fn(rows, cols, |r, c| {
        let y = (r as f64 + 0.5) * sy - 0.5;
        let x = (c as f64 + 0.5) * sx - 0.5;
        img.sample_bilinear(x, y)
    }))
}

/// Fourier-domain resize: the centred low-frequency block of the spectrum is
/// kept (or zero-padded) and transformed back.
pub fn resize_fourier(img: &GrayImage, scale: f64) -> Result<GrayImage> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param(format!("scale must be positive, got {scale}")));
    }
    let rows = round_half_away(img.rows() as f64 * scale);
    let cols = round_half_away(img.cols() as f64 * scale);
    if rows < 1.0 || cols < 1.0 {
        return Err(Error::param("resize result smaller than 1x1"));
    }
    Ok(super::fft::fourier_resample(img, rows as usize, cols as usize))
}

/// Local sums of every `m x n` window (valid region), via an integral image.
///
/// Output is `(rows - m + 1) x (cols - n + 1)`; entry `(i, j)` sums the window
/// whose top-left corner is `(i, j)`.
pub fn lsum2(img: &GrayImage, m: usize, n: usize) -> Result<GrayImage> {
    if m == 0 || n == 0 || m > img.rows() || n > img.cols() {
        return Err(Error::param(format!(
            "window {m}x{n} does not fit image {}x{}",
            img.rows(),
            img.cols()
        )));
    }
    let (rows, cols) = img.dims();
    let stride = cols + 1;
    let mut integral = vec![0.0f64; (rows + 1) * stride];
    for r in 0..rows {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += img.get(r, c);
            integral[(r + 1) * stride + c + 1] = integral[r * stride + c + 1] + acc;
        }
    }
    let (out_r, out_c) = (rows - m + 1, cols - n + 1);
    Ok(GrayImage::from_fn(out_r, out_c, |i, j| {
        integral[(i + m) * stride + j + n] - integral[i * stride + j + n]
            - integral[(i + m) * stride + j]
            + integral[i * stride + j]
    }))
}

/// Resample `img` onto an `out_rows x out_cols` grid through an inverse map
/// from output `(x, y)` to input `(x, y)`; bilinear with edge replication.
pub fn warp_similarity(
    img: &GrayImage,
    out_rows: usize,
    out_cols: usize,
    inverse: impl Fn(f64, f64) -> (f64, f64),
) -> GrayImage {
    GrayImage::from_fn(out_rows, out_cols, |r, c| {
        let (x, y) = inverse(c as f64, r as f64);
        img.sample_bilinear(x, y)
    })
}
