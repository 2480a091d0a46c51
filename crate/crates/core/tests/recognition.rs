use facekit::image::GrayImage;
use facekit::matching::{evaluate, DistanceKind, DistanceMatrix, DistanceSpec};
use facekit::synth::synthetic_gallery;
use facekit::transforms::{pca_project, pca_train, wpd_pca_project, wpd_pca_train, PcaModel, WaveletSpec, WpdPcaModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy(img: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    GrayImage::from_fn(img.rows(), img.cols(), |r, c| (img.get(r, c) + n.sample(&mut rng)).clamp(0.0, 255.0))
}

#[test]
fn saved_models_project_identically() {
    let gallery = synthetic_gallery(10, 32, 32, 4);
    let images: Vec<GrayImage> = gallery.iter().map(|(_, i)| i.clone()).collect();
    let dir = tempfile::tempdir().unwrap();

    let pca = pca_train(&images).unwrap();
    pca.save(dir.path().join("pca")).unwrap();
    let back = PcaModel::load(dir.path().join("pca")).unwrap();
    assert_eq!(pca_project(&back, &images[3], true).unwrap().values, pca_project(&pca, &images[3], true).unwrap().values);

    let w = WaveletSpec::by_name("db4").unwrap();
    let wpd = wpd_pca_train(&images, &w, 2).unwrap();
    wpd.save(dir.path().join("wpd")).unwrap();
    let back = WpdPcaModel::load(dir.path().join("wpd")).unwrap();
    assert_eq!(back.merged_order(), wpd.merged_order());
    assert_eq!(
        wpd_pca_project(&back, &images[7], false).unwrap().values,
        wpd_pca_project(&wpd, &images[7], false).unwrap().values
    );
}

#[test]
fn noisy_probes_are_recognized() {
    let gallery = synthetic_gallery(20, 64, 64, 9);
    let images: Vec<GrayImage> = gallery.iter().map(|(_, i)| i.clone()).collect();
    let model = wpd_pca_train(&images, &WaveletSpec::by_name("sym8").unwrap(), 2).unwrap();
    let features = |img: &GrayImage| wpd_pca_project(&model, img, false).unwrap().values;

    let enrolled: Vec<(String, Vec<f64>)> = gallery.iter().map(|(l, i)| (l.clone(), features(i))).collect();
    let probes: Vec<(String, Vec<f64>)> =
        gallery.iter().enumerate().map(|(k, (l, i))| (l.clone(), features(&noisy(i, 6.0, k as u64)))).collect();
    let dm = DistanceMatrix::from_features(&probes, &enrolled, &DistanceSpec::new(DistanceKind::Euclidean)).unwrap();
    let (metrics, cmc, _) = evaluate(&dm).unwrap();
    assert_eq!(metrics.first1, 100.0);
    assert_eq!(cmc.at(1), 100.0);
}
