//! Normalized cross-correlation template matching: a direct reference
//! implementation, the FFT-based multi-template matcher that shares all
//! image-side work across a bank, thresholded candidate extraction and a
//! multiscale pyramid search.

use serde::{Deserialize, Serialize};

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::image::{fft2p, ifft2p, lsum2, resize, round_half_away, GrayImage};

// Windows whose variance falls below this fraction of their mean square are
// treated as flat.
const FLAT_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Template {
    pub id: usize,
    pub label: String,
    pub image: GrayImage,
    mean: f64,
    std: f64,
}

impl Template {
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }
}

/// Equally sized templates with precomputed means and standard deviations.
#[derive(Clone, Debug)]
pub struct TemplateBank {
    templates: Vec<Template>,
}

fn mean_std(img: &GrayImage) -> (f64, f64) {
    let n = img.len() as f64;
    let mean = img.mean();
    let var = img.pixels().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl TemplateBank {
    /// Templates get ids `0..` in the given order.
    pub fn new(templates: Vec<(String, GrayImage)>) -> Result<Self> {
        let Some((_, first)) = templates.first() else {
            return Err(Error::EmptyInput("template bank".into()));
        };
        let dims = first.dims();
        let mut out = Vec::with_capacity(templates.len());
        for (id, (label, image)) in templates.into_iter().enumerate() {
            if image.dims() != dims {
                return Err(Error::dims(format!("{dims:?}"), format!("{:?}", image.dims())));
            }
            let (mean, std) = mean_std(&image);
            if !(std > 0.0) {
                return Err(Error::param(format!("template {id} ({label}) is flat")));
            }
            out.push(Template {
                id,
                label,
                image,
                mean,
                std,
            });
        }
        Ok(Self { templates: out })
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// `(rows, cols)` shared by every template.
    pub fn dims(&self) -> (usize, usize) {
        self.templates[0].image.dims()
    }

    /// Bank holding only template `idx`, keeping its id.
    pub fn single(&self, idx: usize) -> TemplateBank {
        TemplateBank {
            templates: vec![self.templates[idx].clone()],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMap {
    pub values: GrayImage,
    pub template_id: usize,
}

/// How often each stage of the fast matcher ran.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NccStats {
    pub image_statistics: usize,
    pub image_ffts: usize,
    pub template_ffts: usize,
    pub inverse_ffts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredetectParams {
    pub tau: f64,
    pub tau2: usize,
    pub scales: Vec<f64>,
}

impl Default for PredetectParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            tau2: 4,
            scales: pyramid_scales(1.0, 1.0 / 1.2, 6),
        }
    }
}

impl PredetectParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::param(format!("tau must be in (0,1), got {}", self.tau)));
        }
        if !(1..=9).contains(&self.tau2) {
            return Err(Error::param(format!("tau2 must be in [1,9], got {}", self.tau2)));
        }
        if self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::param("scales must be positive"));
        }
        if self.scales.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("scales must be sorted descending"));
        }
        Ok(())
    }
}

/// `count` scales starting at `start`, each `step` times the previous.
pub fn pyramid_scales(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start * step.powi(i as i32)).collect()
}

fn check_fits(img: &GrayImage, dims: (usize, usize)) -> Result<()> {
    if dims.0 > img.rows() || dims.1 > img.cols() {
        return Err(Error::param(format!(
            "template {}x{} does not fit image {}x{}",
            dims.0,
            dims.1,
            img.rows(),
            img.cols()
        )));
    }
    Ok(())
}

/// Reference matcher: the Pearson correlation of the template with every
/// fully contained window, evaluated directly. Flat windows score 0.
pub fn ncc_direct(img: &GrayImage, tmpl: &GrayImage) -> Result<GrayImage> {
    check_fits(img, tmpl.dims())?;
    let (m1, m2) = tmpl.dims();
    let n = (m1 * m2) as f64;
    let (tm, ts) = mean_std(tmpl);
    let out_r = img.rows() - m1 + 1;
    let out_c = img.cols() - m2 + 1;
    Ok(GrayImage::from_fn(out_r, out_c, |i, j| {
        if !(ts > 0.0) {
            return 0.0;
        }
        let mut sx = 0.0;
        let mut sxx = 0.0;
        for r in 0..m1 {
            for &v in &img.row(i + r)[j..j + m2] {
                sx += v;
                sxx += v * v;
            }
        }
        let mx = sx / n;
        let mut var = 0.0;
        let mut cross = 0.0;
        for r in 0..m1 {
            for c in 0..m2 {
                let x = img.get(i + r, j + c) - mx;
                var += x * x;
                cross += x * (tmpl.get(r, c) - tm);
            }
        }
        var /= n;
        if var <= FLAT_EPS * (sxx / n).max(1.0) {
            return 0.0;
        }
        (cross / n / (var.sqrt() * ts)).clamp(-1.0, 1.0)
    }))
}

/// FFT-based normalized correlation of every template in `bank` with `img`.
/// Window means, window deviations and the image spectrum are computed once
/// and shared by all templates.
pub fn ncc_multi(img: &GrayImage, bank: &TemplateBank) -> Result<Vec<CorrelationMap>> {
    ncc_multi_with_stats(img, bank).map(|(maps, _)| maps)
}

pub fn ncc_multi_with_stats(
    img: &GrayImage,
    bank: &TemplateBank,
) -> Result<(Vec<CorrelationMap>, NccStats)> {
    if bank.is_empty() {
        return Err(Error::EmptyInput("template bank".into()));
    }
    let (m1, m2) = bank.dims();
    check_fits(img, (m1, m2))?;
    let (n1, n2) = img.dims();
    let n = (m1 * m2) as f64;
    let mut stats = NccStats::default();

    // Removing the global mean changes no correlation value but keeps the
    // FFT and running-sum arithmetic well conditioned.
    let centred = {
        let g = img.mean();
        img.map(|v| v - g)
    };
    let imx = lsum2(&centred, m1, m2)?.map(|v| v / n);
    let imx2 = lsum2(&centred.map(|v| v * v), m1, m2)?.map(|v| v / n);
    let isx = imx2.zip_map(&imx, |s2, m| (s2 - m * m).max(0.0).sqrt())?;
    let flat_scale = imx2.map(|s2| FLAT_EPS * s2.max(1.0));
    stats.image_statistics += 1;
    let ifft = fft2p(&centred, n1, n2, m1, m2)?;
    stats.image_ffts += 1;

    let mut maps = Vec::with_capacity(bank.len());
    for t in bank.templates() {
        // zero-mean, flipped and scaled template: the inverse transform of the
        // product yields M(XY) - MX*MY directly
        let kernel = t.image.rotate180().map(|v| (v - t.mean) / n);
        let tfft = fft2p(&kernel, n1, n2, m1, m2)?;
        stats.template_ffts += 1;
        let cov = ifft2p(&ifft.mul(&tfft)?, n1, n2, m1, m2)?;
        stats.inverse_ffts += 1;
        let mut values = GrayImage::new(cov.rows(), cov.cols());
        for (k, out) in values.pixels_mut().iter_mut().enumerate() {
            let sx = isx.pixels()[k];
            if sx * sx <= flat_scale.pixels()[k] {
                continue;
            }
            *out = (cov.pixels()[k] / (sx * t.std)).clamp(-1.0, 1.0);
        }
        maps.push(CorrelationMap {
            values,
            template_id: t.id,
        });
    }
    Ok((maps, stats))
}

/// Positions where `R > tau` and more than `tau2` values of the surrounding
/// 3x3 window (the position included, clipped at the border) exceed `tau`.
pub fn predetect_threshold(
    map: &CorrelationMap,
    tmpl_dims: (usize, usize),
    params: &PredetectParams,
) -> Vec<Detection> {
    let v = &map.values;
    let (rows, cols) = v.dims();
    let above = |r: isize, c: isize| {
        r >= 0
            && c >= 0
            && r < rows as isize
            && c < cols as isize
            && v.get(r as usize, c as usize) > params.tau
    };
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if v.get(r, c) <= params.tau {
                continue;
            }
            let mut count = 0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    count += usize::from(above(r as isize + dr, c as isize + dc));
                }
            }
            if count > params.tau2 {
                out.push(Detection {
                    x: c as f64,
                    y: r as f64,
                    w: tmpl_dims.1 as f64,
                    h: tmpl_dims.0 as f64,
                    scale: 1.0,
                    score: v.get(r, c),
                    template_id: map.template_id,
                    overlap_count: 0,
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct PyramidResult {
    pub detections: Vec<Detection>,
    /// One message per skipped scale.
    pub warnings: Vec<String>,
}

/// Run the bank over every scale of the pyramid and map detections back to
/// original-image coordinates.
pub fn pyramid_search(
    img: &GrayImage,
    bank: &TemplateBank,
    params: &PredetectParams,
) -> Result<PyramidResult> {
    params.validate()?;
    let (m1, m2) = bank.dims();
    let mut result = PyramidResult::default();
    for &scale in &params.scales {
        let rows = round_half_away(img.rows() as f64 * scale);
        let cols = round_half_away(img.cols() as f64 * scale);
        if rows < m1 as f64 || cols < m2 as f64 {
            let msg = format!("scale {scale}: {rows}x{cols} image is smaller than the templates");
            log::warn!("{msg}");
            result.warnings.push(msg);
            continue;
        }
        let scaled = resize(img, scale)?;
        for map in ncc_multi(&scaled, bank)? {
            for mut d in predetect_threshold(&map, (m1, m2), params) {
                d.x /= scale;
                d.y /= scale;
                d.w /= scale;
                d.h /= scale;
                d.scale = scale;
                result.detections.push(d);
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> GrayImage {
        GrayImage::from_fn(rows, cols, |_, _| rng.random_range(0..=255) as f64)
    }

    fn max_dev(a: &GrayImage, b: &GrayImage) -> f64 {
        a.pixels()
            .iter()
            .zip(b.pixels())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn self_correlation_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random(11, 25, &mut rng);
        let r = ncc_direct(&img, &img).unwrap();
        assert_eq!(r.dims(), (1, 1));
        assert!((r.get(0, 0) - 1.0).abs() < 1e-12);
        let affine = img.map(|v| 0.5 * v + 30.0);
        assert!((ncc_direct(&img, &affine).unwrap().get(0, 0) - 1.0).abs() < 1e-12);
        let neg = img.map(|v| 255.0 - v);
        assert!((ncc_direct(&img, &neg).unwrap().get(0, 0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random(64, 64, &mut rng);
        let bank = TemplateBank::new(
            (0..3)
                .map(|i| (format!("t{i}"), random(11, 25, &mut rng)))
                .collect(),
        )
        .unwrap();
        let maps = ncc_multi(&img, &bank).unwrap();
        for (map, t) in maps.iter().zip(bank.templates()) {
            let direct = ncc_direct(&img, &t.image).unwrap();
            assert!(max_dev(&map.values, &direct) < 1e-6);
        }
    }

    #[test]
    fn image_side_work_is_shared() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = random(40, 50, &mut rng);
        let bank = TemplateBank::new(
            (0..5)
                .map(|i| (format!("t{i}"), random(5, 7, &mut rng)))
                .collect(),
        )
        .unwrap();
        let (_, stats) = ncc_multi_with_stats(&img, &bank).unwrap();
        assert_eq!(stats.image_statistics, 1);
        assert_eq!(stats.image_ffts, 1);
        assert_eq!(stats.template_ffts, 5);
        assert_eq!(stats.inverse_ffts, 5);
    }

    #[test]
    fn flat_windows_score_zero() {
        let mut img = GrayImage::filled(20, 20, 50.0);
        img.set(15, 15, 200.0);
        let t = GrayImage::from_fn(3, 3, |r, c| (r + c) as f64);
        let bank = TemplateBank::new(vec![("t".into(), t.clone())]).unwrap();
        let fast = &ncc_multi(&img, &bank).unwrap()[0].values;
        let direct = ncc_direct(&img, &t).unwrap();
        assert_eq!(fast.get(0, 0), 0.0);
        assert_eq!(direct.get(0, 0), 0.0);
        assert!(max_dev(fast, &direct) < 1e-6);
    }

    #[test]
    fn bank_validation() {
        assert!(TemplateBank::new(vec![]).is_err());
        assert!(TemplateBank::new(vec![("flat".into(), GrayImage::filled(3, 3, 1.0))]).is_err());
        let a = GrayImage::from_fn(3, 3, |r, _| r as f64);
        let b = GrayImage::from_fn(3, 4, |r, _| r as f64);
        assert!(TemplateBank::new(vec![("a".into(), a), ("b".into(), b)]).is_err());
    }

    #[test]
    fn threshold_counts_neighbourhood() {
        let mut values = GrayImage::new(7, 7);
        for r in 2..5 {
            for c in 2..5 {
                values.set(r, c, 0.9);
            }
        }
        let map = CorrelationMap {
            values,
            template_id: 3,
        };
        let p = PredetectParams {
            tau: 0.5,
            tau2: 4,
            scales: vec![1.0],
        };
        let dets = predetect_threshold(&map, (11, 25), &p);
        let pos: Vec<(f64, f64)> = dets.iter().map(|d| (d.x, d.y)).collect();
        assert!(pos.contains(&(3.0, 3.0)));
        for corner in [(2.0, 2.0), (4.0, 2.0), (2.0, 4.0), (4.0, 4.0)] {
            assert!(!pos.contains(&corner));
        }
        // edge midpoints see 6 values above tau
        assert_eq!(dets.len(), 5);
        assert!(dets.iter().all(|d| d.template_id == 3 && d.w == 25.0 && d.h == 11.0));

        let mut iso = GrayImage::new(5, 5);
        iso.set(2, 2, 0.9);
        let map = CorrelationMap {
            values: iso,
            template_id: 0,
        };
        assert!(predetect_threshold(&map, (1, 1), &p).is_empty());
    }

    #[test]
    fn params_validation() {
        let mut p = PredetectParams::default();
        assert!(p.validate().is_ok());
        p.tau2 = 0;
        assert!(p.validate().is_err());
        p.tau2 = 4;
        p.scales = vec![0.5, 1.0];
        assert!(p.validate().is_err());
    }
}
