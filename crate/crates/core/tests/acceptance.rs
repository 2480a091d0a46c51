use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use facekit::bench::{bench_ncc, bench_training};
use facekit::contours::{fit_conic_direct, fit_ellipse_direct};
use facekit::correlation::{ncc_direct, ncc_multi, TemplateBank};
use facekit::image::{ellipse_points, fill_polygon, GrayImage};
use facekit::matching::{
    cmc, combine_serial, contour_errors, distance, eye_error, roc, DistanceKind, DistanceMatrix, DistanceSpec,
};
use facekit::pipeline::{analyze_face, detect_faces, AnalyzeParams, DetectParams, FaceBank};
use facekit::snake::{ggvf, snake_evolve, GgvfParams, Snake, SnakeParams};
use facekit::snow::{bootstrap_train, snow_train, BootstrapParams, BootstrapReport, FeatureCode, Label, SnowModel, SnowParams};
use facekit::synth::{circle_edge_map, random_images, synthetic_background, synthetic_verifier, verifier_training_set, FaceSpec};
use facekit::transforms::{dct2, dwt2, pca_project, pca_train, wpd, WaveletSpec};
use facekit::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// Criteria run one at a time so the timing ones see an idle machine.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

// Written to the real stdout so the line shows even when output is captured.
fn report(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{tag}] {name}: {detail}");
    let _ = out.flush();
}

fn verifier() -> &'static (SnowModel, BootstrapReport) {
    static MODEL: OnceLock<(SnowModel, BootstrapReport)> = OnceLock::new();
    MODEL.get_or_init(|| synthetic_verifier(7).expect("verifier trains"))
}

fn random_gray(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> GrayImage {
    GrayImage::from_fn(rows, cols, |_, _| f64::from(rng.random_range(0u8..=255)))
}

#[test]
fn ncc_multi_matches_direct_correlation() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let rows = rng.random_range(11..=128);
        let cols = rng.random_range(25..=128);
        let img = random_gray(&mut rng, rows, cols);
        let n = rng.random_range(1..=8);
        let tmpls: Vec<(String, GrayImage)> = (0..n).map(|i| (format!("t{i}"), random_gray(&mut rng, 11, 25))).collect();
        let bank = TemplateBank::new(tmpls.clone()).unwrap();
        for (map, (_, tmpl)) in ncc_multi(&img, &bank).unwrap().iter().zip(&tmpls) {
            let direct = ncc_direct(&img, tmpl).unwrap();
            assert_eq!(map.values.dims(), direct.dims());
            for (a, b) in map.values.pixels().iter().zip(direct.pixels()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-6 && secs < 30.0;
    report("NCC oracle equivalence", pass, &format!("max |diff| {worst:.2e} (<= 1e-6), {secs:.1}s (< 30s)"));
    assert!(pass);
}

#[test]
fn multi_template_speedup() {
    let _g = serial();
    let b = bench_ncc(300, 300, 10, (11, 25), 5, 1).unwrap();
    let pass = b.speedup >= 1.1;
    report(
        "multi-template speedup",
        pass,
        &format!("shared {:.4}s vs separate {:.4}s, ratio {:.2} (>= 1.1)", b.multi_s, b.separate_s, b.speedup),
    );
    assert!(pass);
}

#[test]
fn wpd_pca_training_crossover() {
    let _g = serial();
    let t = Instant::now();
    let w = WaveletSpec::by_name("sym16").unwrap();
    let s = bench_training(&[300, 600, 900, 1200], 128, 128, &w, 3, 3, 5).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let points: Vec<String> = s
        .points
        .iter()
        .map(|p| format!("r={} PCA {:.2}s WPD+PCA {:.2}s", p.images, p.pca_s, p.wpd_pca_s))
        .collect();
    let pca_grows_superlinearly = s.pca_exponent > 1.0
        && s.points.windows(2).all(|w| w[1].pca_s / w[0].pca_s > w[1].images as f64 / w[0].images as f64);
    let flat = s.wpd_pca_variation < 0.15;
    let crossover_in_band = s.crossover.is_some_and(|r| (500.0..=1500.0).contains(&r));
    let pass = flat && pca_grows_superlinearly && crossover_in_band && secs < 600.0;
    report(
        "WPD+PCA training crossover",
        pass,
        &format!(
            "[{}]; WPD+PCA variation {:.1}% (< 15%: {flat}); PCA exponent {:.2} (superlinear: {pca_grows_superlinearly}); \
             crossover {:?} (in [500, 1500]: {crossover_in_band}); {secs:.0}s",
            points.join(", "),
            100.0 * s.wpd_pca_variation,
            s.pca_exponent,
            s.crossover.map(|r| r.round()),
        ),
    );
    assert!(pass);
}

#[test]
fn whitened_features_have_identity_covariance() {
    let _g = serial();
    let imgs = random_images(20, 16, 16, 4);
    let model = pca_train(&imgs).unwrap();
    let feats: Vec<Vec<f64>> = imgs.iter().map(|i| pca_project(&model, i, true).unwrap().values).collect();
    let (n, r) = (feats[0].len(), feats.len() as f64);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let ma = feats.iter().map(|f| f[a]).sum::<f64>() / r;
            let mb = feats.iter().map(|f| f[b]).sum::<f64>() / r;
            let c = feats.iter().map(|f| (f[a] - ma) * (f[b] - mb)).sum::<f64>() / r;
            worst = worst.max((c - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    let pass = worst < 1e-8;
    report("whitening identity", pass, &format!("{n} features, max |cov - I| {worst:.2e} (< 1e-8)"));
    assert!(pass);
}

fn dct_by_definition(x: &GrayImage) -> GrayImage {
    use std::f64::consts::PI;
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

fn energy<'a>(imgs: impl IntoIterator<Item = &'a GrayImage>) -> f64 {
    imgs.into_iter().flat_map(|i| i.pixels()).map(|v| v * v).sum()
}

#[test]
fn transforms_match_oracles() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_gray(&mut rng, 12, 20);
    let dct_err = dct2(&x)
        .pixels()
        .iter()
        .zip(dct_by_definition(&x).pixels())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let img = random_gray(&mut rng, 64, 64);
    let e0 = energy([&img]);
    let mut parseval = 0.0f64;
    let mut structure = true;
    for name in ["haar", "db12", "sym16", "coif6"] {
        let w = WaveletSpec::by_name(name).unwrap();
        let d = dwt2(&img, &w, 3).unwrap();
        let dwt_energy = energy(d.details.iter().flatten().chain([&d.approx]));
        parseval = parseval.max((dwt_energy - e0).abs() / e0);
        for l in 1..=3 {
            let bands = wpd(&img, &w, l).unwrap();
            parseval = parseval.max((energy(&bands) - e0).abs() / e0);
            let coeffs: usize = bands.iter().map(|b| b.rows() * b.cols()).sum();
            structure &= bands.len() == 4usize.pow(l as u32) && coeffs == 64 * 64;
        }
    }
    let pass = dct_err <= 1e-9 && parseval <= 1e-9 && structure;
    report(
        "transform correctness",
        pass,
        &format!("DCT max |diff| {dct_err:.2e}; Parseval rel. error {parseval:.2e}; packet counts ok: {structure}"),
    );
    assert!(pass);
}

#[test]
fn distance_identity_and_rank_invariance() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
        let wa = distance(&DistanceSpec::new(DistanceKind::WeightedAngle).with_weights(z.clone()), &x, &y).unwrap();
        let sm = distance(&DistanceSpec::new(DistanceKind::SimplifiedMahalanobis).with_weights(z), &x, &y).unwrap();
        let norms = x.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max((wa * norms - sm).abs());
    }
    let labels: Vec<String> = (0..25).map(|i| format!("p{}", i % 20)).collect();
    let gallery: Vec<String> = (0..20).map(|i| format!("p{i}")).collect();
    let values: Vec<f64> = (0..25 * 20).map(|_| rng.random_range(0.0..1.0)).collect();
    let dm = DistanceMatrix::new(labels, gallery, values).unwrap();
    let base = cmc(&dm).unwrap();
    let invariant = [0.37, 2.0, 1e3].iter().all(|&k| {
        let c = cmc(&dm.scaled(k)).unwrap();
        c.rates == base.rates && c.first1 == base.first1 && c.cum100 == base.cum100
    });
    let pass = worst <= 1e-10 && invariant;
    report(
        "distance identity and rank invariance",
        pass,
        &format!("max |WA*|x||y| - SM| {worst:.2e} (<= 1e-10); CMC scale-invariant: {invariant}"),
    );
    assert!(pass);
}

// Two-stage recognizer written out directly: shortlist by `a`, reorder the
// shortlist by `b`, keep `a`'s order for the rest.
fn two_stage_cmc(a: &DistanceMatrix, b: &DistanceMatrix, keep: usize) -> Vec<f64> {
    let g = a.n_gallery();
    let mut counts = vec![0usize; g + 1];
    for p in 0..a.n_probes() {
        let mut by_a: Vec<usize> = (0..g).collect();
        by_a.sort_by(|&i, &j| a.get(p, i).total_cmp(&a.get(p, j)));
        let (short, rest) = by_a.split_at(keep);
        let mut short = short.to_vec();
        short.sort_by(|&i, &j| b.get(p, i).total_cmp(&b.get(p, j)));
        let order: Vec<usize> = short.into_iter().chain(rest.iter().copied()).collect();
        let truth = &a.probe_labels()[p];
        let rank = 1 + order.iter().position(|&i| &a.gallery_labels()[i] == truth).unwrap();
        counts[rank] += 1;
    }
    let n = a.n_probes() as f64;
    let mut acc = 0;
    (1..=g)
        .map(|k| {
            acc += counts[k];
            100.0 * acc as f64 / n
        })
        .collect()
}

#[test]
fn serial_combining_matches_two_stage_recognizer() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let labels: Vec<String> = (0..30).map(|i| format!("p{i}")).collect();
    let mut random_dm = |bias: f64| {
        let values: Vec<f64> = (0..30 * 30)
            .map(|k| rng.random_range(0.0..1.0) - if k / 30 == k % 30 { bias } else { 0.0 })
            .collect();
        DistanceMatrix::new(labels.clone(), labels.clone(), values).unwrap()
    };
    let (a, b) = (random_dm(0.3), random_dm(0.2));
    let mut ok = true;
    for pct in [1.0, 25.0, 100.0] {
        let combined = cmc(&combine_serial(&a, &b, pct).unwrap()).unwrap();
        let keep = ((30.0 * pct / 100.0f64).ceil() as usize).clamp(1, 30);
        ok &= combined.rates == two_stage_cmc(&a, &b, keep);
    }
    let full_is_b = cmc(&combine_serial(&a, &b, 100.0).unwrap()).unwrap() == cmc(&b).unwrap();
    let pass = ok && full_is_b;
    report(
        "serial combining oracle",
        pass,
        &format!("equals two-stage CMC at 1/25/100%: {ok}; 100% reproduces B: {full_is_b}"),
    );
    assert!(pass);
}

#[test]
fn snake_recovers_circle() {
    let _g = serial();
    let t = Instant::now();
    let c = [64.0, 64.0];
    let field = ggvf(&circle_edge_map(128, c, 30.0), &GgvfParams::default()).unwrap();
    let init = Snake::from_points(&ellipse_points(c[0], c[1], 15.0, 15.0, 0.0, 100));
    let out = snake_evolve(&init, &field, &SnakeParams::default()).unwrap();
    let pts = out.points();
    let err = pts.iter().map(|q| ((q[0] - c[0]).hypot(q[1] - c[1]) - 30.0).abs()).sum::<f64>() / pts.len() as f64;
    let secs = t.elapsed().as_secs_f64();
    let pass = err < 1.5 && secs < 20.0;
    report("snake circle recovery", pass, &format!("mean radial error {err:.3} px (< 1.5), {secs:.2}s (< 20s)"));
    assert!(pass);
}

#[test]
fn ellipse_fit_recovery() {
    let _g = serial();
    let truth = [120.0, 80.0, 60.0, 35.0, 0.4];
    let exact = fit_ellipse_direct(&ellipse_points(truth[0], truth[1], truth[2], truth[3], truth[4], 60)).unwrap();
    let got = [exact.cx, exact.cy, exact.a, exact.b, exact.theta];
    let exact_err = got.iter().zip(&truth).map(|(g, t)| (g - t).abs() / t.abs()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let noisy: Vec<Point> = ellipse_points(truth[0], truth[1], truth[2], truth[3], truth[4], 200)
        .into_iter()
        .map(|[x, y]| [x + noise.sample(&mut rng), y + noise.sample(&mut rng)])
        .collect();
    let e = fit_ellipse_direct(&noisy).unwrap();
    let noisy_err = [
        (e.cx - truth[0]).hypot(e.cy - truth[1]) / truth[2],
        (e.a - truth[2]).abs() / truth[2],
        (e.b - truth[3]).abs() / truth[3],
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let (mut fitted, mut ellipses) = (0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(6..40);
        let pts: Vec<Point> = (0..n).map(|_| [rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)]).collect();
        if let Ok(c) = fit_conic_direct(&pts) {
            fitted += 1;
            ellipses += usize::from(c.discriminant() < 0.0);
        }
    }
    let pass = exact_err <= 1e-6 && noisy_err <= 0.02 && fitted == ellipses;
    report(
        "ellipse fit",
        pass,
        &format!(
            "exact rel. error {exact_err:.2e} (<= 1e-6); noisy rel. error {:.2}% (<= 2%); {ellipses}/{fitted} random fits are ellipses",
            100.0 * noisy_err
        ),
    );
    assert!(pass);
}

#[test]
fn synthetic_face_pipeline() {
    let _g = serial();
    let (model, _) = verifier();
    let bank = FaceBank::synthetic();
    let mut details = Vec::new();
    let mut pass = true;
    let fixtures = [
        ("default", FaceSpec::default()),
        ("shifted", FaceSpec { rows: 220, cols: 240, eye_mid: [130.3, 95.6], eye_distance: 34.0, seed: 3, ..FaceSpec::default() }),
    ];
    for (name, spec) in fixtures {
        let face = spec.render();
        let dets = detect_faces(&face.image, &bank, Some(model), &DetectParams::default()).unwrap();
        let Some(best) = dets.iter().max_by(|a, b| a.bbox().iou(&face.face_box).total_cmp(&b.bbox().iou(&face.face_box))) else {
            details.push(format!("{name}: no detection"));
            pass = false;
            continue;
        };
        match analyze_face(&face.image, best.bbox(), &AnalyzeParams::default()) {
            Ok(a) => {
                let err = face.oval.mean_distance(&a.contour.points());
                let t = eye_error(face.features.lec, face.features.rec, a.features.lec, a.features.rec).unwrap();
                pass &= err < 2.0;
                details.push(format!("{name}: {} detection(s), contour error {err:.2} px (< 2), eye error {t:.1}%", dets.len()));
            }
            Err(e) => {
                pass = false;
                details.push(format!("{name}: {e}"));
            }
        }
    }
    let f = FaceSpec::default().render().features;
    let self_error = eye_error(f.lec, f.rec, f.lec, f.rec).unwrap();
    pass &= self_error == 0.0;
    report(
        "end-to-end synthetic pipeline",
        pass,
        &format!("{}; eye error of the annotations against themselves {self_error}", details.join("; ")),
    );
    assert!(pass);
}

#[test]
fn snow_sanity() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let examples: Vec<(FeatureCode, Label)> = (0..300)
        .map(|i| {
            let face = i % 3 == 0;
            let mut ids: Vec<u32> = (0..30).map(|_| rng.random_range(1000..60000)).collect();
            ids.push(if face { 17 } else { 18 });
            (FeatureCode::from_ids(ids), if face { Label::Face } else { Label::Nonface })
        })
        .collect();
    let (m, summary) = snow_train(&examples, &SnowParams { epochs: 3, ..SnowParams::default() }).unwrap();
    let correct = examples.iter().filter(|(c, l)| m.classify(c).unwrap().0 == *l).count();
    let positive = |m: &SnowModel| [Label::Face, Label::Nonface].iter().all(|&l| m.stored_weights(l).all(|(_, w)| w > 0.0));

    let (faces, _) = verifier_training_set(7);
    let clean: Vec<GrayImage> = (0..4).map(|i| synthetic_background(60, 60, 100 + i)).collect();
    let (boot, boot_report) =
        bootstrap_train(&faces[..10], &clean, &BootstrapParams { rounds: 5, ..BootstrapParams::default() }, &SnowParams::default())
            .unwrap();
    let (shared, shared_report) = verifier();
    let pass = correct == examples.len()
        && summary.epochs_run <= 3
        && boot_report.fixed_point
        && shared_report.fixed_point
        && positive(&m)
        && positive(&boot)
        && positive(shared);
    report(
        "SNoW sanity",
        pass,
        &format!(
            "training accuracy {correct}/{} in {} epoch(s); bootstrap fixed point {} (negatives {:?}), synthetic verifier fixed point {}; weights positive",
            examples.len(),
            summary.epochs_run,
            boot_report.fixed_point,
            boot_report.negatives_per_round,
            shared_report.fixed_point,
        ),
    );
    assert!(pass);
}

#[test]
fn metric_formulas() {
    let _g = serial();
    let genuine: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
    let impostor: Vec<f64> = (0..50).map(|i| 1.0 + i as f64 * 0.01).collect();
    let separated = roc(&genuine, &impostor).unwrap().eer;
    let identical = roc(&genuine, &genuine).unwrap().eer;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let labels: Vec<String> = (0..40).map(|i| format!("p{i}")).collect();
    let dm = DistanceMatrix::new(labels.clone(), labels, (0..1600).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let curve = cmc(&dm).unwrap();
    let monotone = curve.rates.windows(2).all(|w| w[0] <= w[1]) && *curve.rates.last().unwrap() == 100.0;

    let a = ellipse_points(60.0, 60.0, 30.0, 30.0, 0.0, 720);
    let b = ellipse_points(60.0, 60.0, 32.0, 32.0, 0.0, 720);
    let (ra, rb) = (fill_polygon(120, 120, &a), fill_polygon(120, 120, &b));
    let same = contour_errors(&ra, &ra, &a, &a).unwrap();
    let zero = same.err1 == 0.0 && same.err2 == 0.0 && same.err3 == 0.0;
    let err3 = contour_errors(&ra, &rb, &a, &b).unwrap().err3;

    let pass = separated == 0.0 && identical == 50.0 && monotone && zero && (err3 - 2.0).abs() <= 0.1;
    report(
        "metric formulas",
        pass,
        &format!(
            "EER separated {separated}%, identical {identical}%; CMC monotone {monotone}; self errors zero {zero}; concentric err3 {err3:.3}"
        ),
    );
    assert!(pass);
}
