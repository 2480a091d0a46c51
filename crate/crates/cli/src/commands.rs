use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use facekit::bench::{bench_ncc, bench_training};
use facekit::detection::Detection;
use facekit::features::FaceFeatures;
use facekit::image::{draw_polyline, pgm, BBox, GrayImage};
use facekit::io::{fmt_f64, read_json, to_canonical_json};
use facekit::matching::{cmc, combine_serial, distance, evaluate, DistanceMatrix, DistanceSpec};
use facekit::pipeline::{analyze_face, detect_faces, detect_faces_by_ellipse, expand_box, face_features, FaceBank};
use facekit::snake::EyeAlignment;
use facekit::snow::SnowModel;
use facekit::synth::{synthetic_gallery, synthetic_verifier, FaceSpec, Oval};
use facekit::transforms::{pca_project, pca_train, wpd_pca_project, wpd_pca_train, PcaModel, WaveletSpec, WpdPcaModel};
use facekit::{Error, Point, Result};
use serde::Serialize;

use crate::config::{Method, PipelineConfig};
use crate::{BenchCommand, Command, ContourArgs, DetectArgs, EvalArgs, FeaturesArgs, FixtureCommand, RecognizeArgs, TrainArgs};

pub fn run(cmd: Command, mut cfg: PipelineConfig) -> Result<()> {
    match cmd {
        Command::Detect(a) => detect(a, &cfg),
        Command::Features(a) => features(a, &cfg),
        Command::Contour(a) => {
            if let Some(n) = a.points {
                cfg.analyze.contour.snake.n_points = n;
            }
            contour(a, &cfg)
        }
        Command::Train(a) => {
            let r = &mut cfg.recognition;
            r.method = a.method.unwrap_or(r.method);
            r.wavelet = a.wavelet.clone().unwrap_or_else(|| r.wavelet.clone());
            r.level = a.level.unwrap_or(r.level);
            train(a, &cfg)
        }
        Command::Recognize(a) => {
            let r = &mut cfg.recognition;
            r.measure = a.measure.unwrap_or(r.measure);
            r.features = a.features.unwrap_or(r.features);
            r.reject = a.reject.or(r.reject);
            r.whiten |= a.whiten;
            recognize(a, &cfg)
        }
        Command::Eval(a) => eval(a),
        Command::Bench(b) => bench(b, &cfg),
        Command::Fixture(f) => fixture(f, &cfg),
        Command::Config { out } => emit(out.as_deref(), &to_canonical_json(&cfg)?),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.into(), source }
}

/// Write to `out`, or to stdout when no path is given, ending with a newline.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let text = if text.ends_with('\n') { text.to_owned() } else { format!("{text}\n") };
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(io_err(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

fn emit_json<T: Serialize + ?Sized>(out: Option<&Path>, value: &T) -> Result<()> {
    emit(out, &to_canonical_json(value)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Face boxes from a detections file, or the whole image.
fn face_boxes(img: &GrayImage, detections: Option<&Path>) -> Result<Vec<BBox>> {
    match detections {
        Some(p) => Ok(read_json::<Vec<Detection>>(p)?.iter().map(Detection::bbox).collect()),
        None => Ok(vec![BBox::new(0.0, 0.0, img.cols() as f64, img.rows() as f64)]),
    }
}

fn detect(a: DetectArgs, cfg: &PipelineConfig) -> Result<()> {
    let img = pgm::read(&a.image)?;
    let dets = if a.contour_mode {
        detect_faces_by_ellipse(&img, &cfg.ellipse)?
    } else {
        let dir = a.templates.as_deref().ok_or_else(|| Error::InvalidParameter("--templates is required".into()))?;
        let bank = FaceBank::load(dir)?;
        let verifier = a.verifier.as_deref().map(SnowModel::load).transpose()?;
        if verifier.is_none() {
            log::warn!("no verifier given; pre-detections are merged unverified");
        }
        detect_faces(&img, &bank, verifier.as_ref(), &cfg.detect)?
    };
    log::info!("{} face(s)", dets.len());
    emit_json(a.out.as_deref(), &dets)
}

#[derive(Serialize)]
struct FaceRecord {
    face: usize,
    features: FaceFeatures,
}

fn features(a: FeaturesArgs, cfg: &PipelineConfig) -> Result<()> {
    let img = pgm::read(&a.image)?;
    let mut found = Vec::new();
    for (i, b) in face_boxes(&img, a.detections.as_deref())?.into_iter().enumerate() {
        match face_features(&img, expand_box(b, cfg.analyze.box_margin), &cfg.analyze.features) {
            Ok(f) => found.push(FaceRecord { face: i, features: f }),
            Err(Error::EmptyInput(msg)) => log::warn!("face {i}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    if found.is_empty() {
        return Err(Error::EmptyInput("no face with both eyes and lips".into()));
    }
    emit_json(a.out.as_deref(), &found)
}

fn points_csv(pts: &[Point]) -> String {
    let mut s = String::from("x,y\n");
    for p in pts {
        s.push_str(&format!("{},{}\n", fmt_f64(p[0]), fmt_f64(p[1])));
    }
    s
}

fn contour(a: ContourArgs, cfg: &PipelineConfig) -> Result<()> {
    let img = pgm::read(&a.image)?;
    let boxes = face_boxes(&img, a.detections.as_deref())?;
    let mut last_empty = None;
    for (i, b) in boxes.into_iter().enumerate() {
        let analysis = match analyze_face(&img, b, &cfg.analyze) {
            Ok(x) => x,
            Err(Error::EmptyInput(msg)) => {
                log::warn!("face {i}: {msg}");
                last_empty = Some(msg);
                continue;
            }
            Err(e) => return Err(e),
        };
        let pts = analysis.contour.points();
        emit(Some(&a.out), &points_csv(&pts))?;
        if let Some(path) = &a.overlay {
            let align = EyeAlignment::new(&analysis.features, &cfg.analyze.contour.frame)?;
            let init: Vec<Point> = analysis.trace.init.points().into_iter().map(|q| align.to_image(q)).collect();
            let mut canvas = img.clone();
            draw_polyline(&mut canvas, &init, true, 0.0);
            draw_polyline(&mut canvas, &pts, true, 255.0);
            pgm::write(path, &canvas)?;
        }
        return Ok(());
    }
    Err(Error::EmptyInput(last_empty.unwrap_or_else(|| "no faces to fit".into())))
}

/// PGM files of a directory in name order, labelled by file stem.
fn read_dir_images(dir: &Path) -> Result<Vec<(String, GrayImage)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no PGM images in {}", dir.display())));
    }
    paths.iter().map(|p| Ok((stem(p), pgm::read(p)?))).collect()
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn train(a: TrainArgs, cfg: &PipelineConfig) -> Result<()> {
    let gallery = read_dir_images(&a.gallery)?;
    let images: Vec<GrayImage> = gallery.into_iter().map(|(_, i)| i).collect();
    let r = &cfg.recognition;
    match r.method {
        Method::Pca => pca_train(&images)?.save(&a.out),
        Method::Wpdpca => wpd_pca_train(&images, &WaveletSpec::by_name(&r.wavelet)?, r.level)?.save(&a.out),
    }
}

enum Model {
    Pca(PcaModel),
    WpdPca(WpdPcaModel),
}

impl Model {
    fn load(dir: &Path) -> Result<Self> {
        if dir.join("wpdpca.json").exists() {
            WpdPcaModel::load(dir).map(Model::WpdPca)
        } else {
            PcaModel::load(dir).map(Model::Pca)
        }
    }

    fn project(&self, img: &GrayImage, whiten: bool) -> Result<Vec<f64>> {
        Ok(match self {
            Model::Pca(m) => pca_project(m, img, whiten)?.values,
            Model::WpdPca(m) => wpd_pca_project(m, img, whiten)?.values,
        })
    }

    fn eigenvalues(&self) -> Vec<f64> {
        match self {
            Model::Pca(m) => m.eigenvalues().to_vec(),
            Model::WpdPca(m) => m.merged_eigenvalues(),
        }
    }
}

#[derive(Serialize)]
struct Ranked {
    label: String,
    distance: f64,
}

#[derive(Serialize)]
struct ProbeResult {
    probe: String,
    /// Best gallery label, or `None` when rejected.
    identity: Option<String>,
    ranking: Vec<Ranked>,
}

fn recognize(a: RecognizeArgs, cfg: &PipelineConfig) -> Result<()> {
    let r = &cfg.recognition;
    let model = Model::load(&a.model)?;
    let eig = model.eigenvalues();
    let n = r.features.min(eig.len());
    if n == 0 {
        return Err(Error::InvalidParameter("at least one feature is needed".into()));
    }
    let spec = DistanceSpec::new(r.measure).with_weights(DistanceSpec::weights_from_eigenvalues(&eig[..n])?);
    let features = |img: &GrayImage| -> Result<Vec<f64>> {
        let mut v = model.project(img, r.whiten)?;
        v.truncate(n);
        Ok(v)
    };
    let gallery: Vec<(String, Vec<f64>)> =
        read_dir_images(&a.gallery)?.iter().map(|(l, img)| Ok((l.clone(), features(img)?))).collect::<Result<_>>()?;
    let mut results = Vec::new();
    let mut values = Vec::new();
    for path in &a.probes {
        let probe = features(&pgm::read(path)?)?;
        let row: Vec<f64> = gallery.iter().map(|(_, g)| distance(&spec, &probe, g)).collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&i, &j| row[i].total_cmp(&row[j]));
        let best = order[0];
        let accepted = r.reject.is_none_or(|tau| row[best] < tau);
        results.push(ProbeResult {
            probe: stem(path),
            identity: accepted.then(|| gallery[best].0.clone()),
            ranking: order.iter().map(|&i| Ranked { label: gallery[i].0.clone(), distance: row[i] }).collect(),
        });
        values.extend(row);
    }
    if let Some(path) = &a.matrix {
        let dm = DistanceMatrix::new(
            a.probes.iter().map(|p| stem(p)).collect(),
            gallery.iter().map(|(l, _)| l.clone()).collect(),
            values,
        )?;
        dm.write_csv(path)?;
    }
    emit_json(a.out.as_deref(), &results)
}

#[derive(Serialize)]
struct EvalReport {
    metrics: facekit::matching::MetricsBundle,
    cmc: facekit::matching::CmcCurve,
    roc: facekit::matching::RocCurve,
}

fn eval(a: EvalArgs) -> Result<()> {
    let first = DistanceMatrix::read_csv(&a.distances[0])?;
    let dm = match (a.distances.get(1), a.combine_rank) {
        (Some(b), Some(p)) => combine_serial(&first, &DistanceMatrix::read_csv(b)?, p)?,
        (Some(_), None) => return Err(Error::InvalidParameter("two distance files need --combine-rank".into())),
        (None, Some(_)) => return Err(Error::InvalidParameter("--combine-rank needs two distance files".into())),
        (None, None) => first,
    };
    let (metrics, curve, roc) = evaluate(&dm)?;
    debug_assert_eq!(curve, cmc(&dm)?);
    emit_json(a.out.as_deref(), &EvalReport { metrics, cmc: curve, roc })
}

fn bench(b: BenchCommand, cfg: &PipelineConfig) -> Result<()> {
    match b {
        BenchCommand::Ncc { rows, cols, templates, template_rows, template_cols, reps, out } => {
            let r = bench_ncc(rows, cols, templates, (template_rows, template_cols), reps, cfg.seed)?;
            emit_json(out.as_deref(), &r)
        }
        BenchCommand::WpdpcaTrain { sizes, rows, cols, wavelet, level, reps, out } => {
            let w = WaveletSpec::by_name(wavelet.as_deref().unwrap_or(&cfg.recognition.wavelet))?;
            let r = bench_training(&sizes, rows, cols, &w, level.unwrap_or(cfg.recognition.level), reps, cfg.seed)?;
            emit_json(out.as_deref(), &r)
        }
    }
}

#[derive(Serialize)]
struct FaceTruth {
    features: FaceFeatures,
    oval: Oval,
    face_box: BBox,
}

fn fixture(f: FixtureCommand, cfg: &PipelineConfig) -> Result<()> {
    match f {
        FixtureCommand::Face { out, truth, rows, cols, eye_distance, angle, noise, no_lips } => {
            let spec = FaceSpec {
                rows,
                cols,
                eye_mid: [cols as f64 / 2.0, rows as f64 * 0.4],
                eye_distance,
                angle: angle.to_radians(),
                noise_sigma: noise,
                lips: !no_lips,
                seed: cfg.seed,
                ..FaceSpec::default()
            };
            let face = spec.render();
            pgm::write(&out, &face.image)?;
            if let Some(t) = truth {
                emit_json(Some(&t), &FaceTruth { features: face.features, oval: face.oval, face_box: face.face_box })?;
            }
            Ok(())
        }
        FixtureCommand::Gallery { out, persons, rows, cols } => {
            create_dir(&out)?;
            for (label, img) in synthetic_gallery(persons, rows, cols, cfg.seed) {
                pgm::write(out.join(format!("{label}.pgm")), &img)?;
            }
            Ok(())
        }
        FixtureCommand::Bank { out } => FaceBank::synthetic().save(&out),
        FixtureCommand::Verifier { out } => {
            let (model, report) = synthetic_verifier(cfg.seed)?;
            log::info!("verifier: {report:?}");
            model.save(&out)
        }
    }
}
