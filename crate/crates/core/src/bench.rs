//! Wall-clock benchmarks: shared-work multi-template correlation against
//! independent single-template runs, and PCA against WPD+PCA training time
//! as the training set grows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::correlation::{ncc_multi, TemplateBank};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::synth::random_images;
use crate::transforms::{pca_train, wpd_pca_train, WaveletSpec};

/// Median of `reps` timed runs of `f`, in seconds. The first result of `f`
/// is returned so the work cannot be optimized away.
pub fn time_median<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, Vec<f64>, T)> {
    if reps == 0 {
        return Err(Error::param("need at least one repetition"));
    }
    let mut samples = Vec::with_capacity(reps);
    let mut first = None;
    for _ in 0..reps {
        let t = Instant::now();
        let out = f()?;
        samples.push(t.elapsed().as_secs_f64());
        first.get_or_insert(out);
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if reps % 2 == 1 {
        sorted[reps / 2]
    } else {
        (sorted[reps / 2 - 1] + sorted[reps / 2]) / 2.0
    };
    Ok((median, samples, first.expect("reps > 0")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
}

pub fn machine_info() -> MachineInfo {
    MachineInfo {
        os: std::env::consts::OS.into(),
        arch: std::env::consts::ARCH.into(),
        cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NccBench {
    pub rows: usize,
    pub cols: usize,
    pub templates: usize,
    pub template_dims: (usize, usize),
    pub repetitions: usize,
    /// Median seconds for one shared multi-template pass.
    pub multi_s: f64,
    /// Median seconds for one fast single-template pass per template.
    pub separate_s: f64,
    /// `separate_s / multi_s`.
    pub speedup: f64,
    pub machine: MachineInfo,
}

/// Time the multi-template matcher against running it once per template on
/// random data.
pub fn bench_ncc(rows: usize, cols: usize, templates: usize, template_dims: (usize, usize), reps: usize, seed: u64) -> Result<NccBench> {
    if templates == 0 {
        return Err(Error::param("need at least one template"));
    }
    let img = random_images(1, rows, cols, seed).remove(0);
    let tmpls = random_images(templates, template_dims.0, template_dims.1, seed.wrapping_add(1));
    let bank = TemplateBank::new(tmpls.into_iter().enumerate().map(|(i, t)| (format!("t{i}"), t)).collect())?;
    let singles: Vec<TemplateBank> = (0..bank.len()).map(|i| bank.single(i)).collect();
    // warm up allocator and FFT planner caches
    ncc_multi(&img, &bank)?;
    let (multi_s, _, _) = time_median(reps, || ncc_multi(&img, &bank))?;
    let (separate_s, _, _) = time_median(reps, || {
        singles.iter().map(|b| ncc_multi(&img, b)).collect::<Result<Vec<_>>>()
    })?;
    Ok(NccBench {
        rows,
        cols,
        templates,
        template_dims,
        repetitions: reps,
        multi_s,
        separate_s,
        speedup: separate_s / multi_s,
        machine: machine_info(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPoint {
    pub images: usize,
    pub pca_s: f64,
    pub wpd_pca_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSweep {
    pub rows: usize,
    pub cols: usize,
    pub wavelet: String,
    pub level: usize,
    pub points: Vec<TrainPoint>,
    /// `(max − min) / min` of the WPD+PCA times.
    pub wpd_pca_variation: f64,
    /// Least-squares slope of log PCA time against log training-set size.
    pub pca_exponent: f64,
    /// Training-set size where PCA becomes slower than WPD+PCA, linearly
    /// interpolated between sweep points; `None` if the order never flips.
    pub crossover: Option<f64>,
    pub machine: MachineInfo,
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// First size where `pca_s − wpd_pca_s` changes sign from negative to
/// non-negative, interpolated linearly.
pub fn crossover(points: &[TrainPoint]) -> Option<f64> {
    let diff = |p: &TrainPoint| p.pca_s - p.wpd_pca_s;
    if let Some(first) = points.first() {
        if diff(first) >= 0.0 {
            return Some(first.images as f64);
        }
    }
    points.windows(2).find_map(|w| {
        let (a, b) = (diff(&w[0]), diff(&w[1]));
        (a < 0.0 && b >= 0.0).then(|| {
            let (ra, rb) = (w[0].images as f64, w[1].images as f64);
            ra + (rb - ra) * (-a) / (b - a)
        })
    })
}

/// Train both methods on `r` random images for every `r` in `sizes`; each
/// timing is the median of `reps` runs.
pub fn bench_training(sizes: &[usize], rows: usize, cols: usize, wavelet: &WaveletSpec, level: usize, reps: usize, seed: u64) -> Result<TrainSweep> {
    if sizes.len() < 2 {
        return Err(Error::param("a sweep needs at least two sizes"));
    }
    let max = *sizes.iter().max().expect("non-empty");
    let images: Vec<GrayImage> = random_images(max, rows, cols, seed);
    let mut points = Vec::new();
    for &r in sizes {
        let set = &images[..r];
        let (pca_s, _, _) = time_median(reps, || pca_train(set))?;
        let (wpd_pca_s, _, _) = time_median(reps, || wpd_pca_train(set, wavelet, level))?;
        log::info!("r={r}: PCA {pca_s:.3}s, WPD+PCA {wpd_pca_s:.3}s");
        points.push(TrainPoint { images: r, pca_s, wpd_pca_s });
    }
    let w: Vec<f64> = points.iter().map(|p| p.wpd_pca_s).collect();
    let (lo, hi) = w.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let xs: Vec<f64> = points.iter().map(|p| p.images as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.pca_s).collect();
    Ok(TrainSweep {
        rows,
        cols,
        wavelet: wavelet.name().into(),
        level,
        wpd_pca_variation: (hi - lo) / lo,
        pca_exponent: log_slope(&xs, &ys),
        crossover: crossover(&points),
        points,
        machine: machine_info(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(images: usize, pca_s: f64, wpd_pca_s: f64) -> TrainPoint {
        TrainPoint { images, pca_s, wpd_pca_s }
    }

    #[test]
    fn crossover_interpolates() {
        let pts = [pt(300, 1.0, 4.0), pt(600, 3.0, 4.0), pt(900, 5.0, 4.0)];
        assert_eq!(crossover(&pts), Some(750.0));
        assert_eq!(crossover(&pts[..2]), None);
        assert_eq!(crossover(&[pt(300, 5.0, 4.0), pt(600, 6.0, 4.0)]), Some(300.0));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(2.5)).collect();
        assert!((log_slope(&xs, &ys) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn median_of_runs() {
        let mut k = 0;
        let (m, samples, first) = time_median(3, || {
            k += 1;
            Ok(k)
        })
        .unwrap();
        assert_eq!(first, 1);
        assert_eq!(samples.len(), 3);
        assert!(m >= 0.0);
        assert!(time_median(0, || Ok(())).is_err());
    }

    #[test]
    fn small_ncc_bench_runs() {
        let b = bench_ncc(40, 40, 3, (5, 7), 1, 3).unwrap();
        assert!(b.multi_s > 0.0 && b.separate_s > 0.0);
    }
}
