//! File-format round trips.

use aerocamo::annotations::{load_annotations, AnnotationFormat};
use aerocamo::manifest::{DatasetManifest, ManifestEntry, Split};
use aerocamo::{patchio, weights};
use aerocamo_core::geometry::{Annotation, BBox, PatchConfig, PatchMeta};
use aerocamo_core::ingest::Provenance;
use aerocamo_core::{Patch, ToyDetector, ToyDetectorConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn patch_png_round_trip_within_quantization(h in 2usize..20, w in 2usize..20, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let mut patch = Patch::random(h, w, seed).unwrap();
        patch.meta = PatchMeta { id: "p".into(), config: Some(PatchConfig::small()), seed: Some(seed), epoch: Some(3), ..Default::default() };
        let path = dir.path().join("p.png");
        patchio::save_patch(&path, &patch).unwrap();
        let back = patchio::load_patch(&path).unwrap();
        prop_assert_eq!((back.height(), back.width()), (h, w));
        prop_assert_eq!(&back.meta, &patch.meta);
        for (a, b) in patch.pixels().iter().zip(back.pixels()) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        // A second save of the loaded patch is byte-identical.
        let again = dir.path().join("q.png");
        patchio::save_patch(&again, &back).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn detector_weights_round_trip() {
    let cfg = ToyDetectorConfig { input_size: 64, channels: [3, 4, 5, 6, 7, 8], num_classes: 2, ..Default::default() };
    let det = ToyDetector::new(cfg, 4).unwrap();
    let bytes = weights::encode_detector(&det);
    assert_eq!(&bytes[..8], b"CAMODET1");
    let (header, back) = weights::decode_detector(&bytes, "w.bin".as_ref()).unwrap();
    assert_eq!(back, det);
    assert_eq!(header.param_count, det.params().len());
    assert!(weights::decode_detector(&bytes[..bytes.len() - 1], "w.bin".as_ref()).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(weights::decode_detector(&wrong, "w.bin".as_ref()).is_err());
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = DatasetManifest::new(256, vec!["plane".into(), "ship".into()]);
    for (i, split) in [Split::Train, Split::Test].into_iter().enumerate() {
        m.entries.push(ManifestEntry {
            image: format!("images/{i}.png"),
            split,
            annotations: vec![Annotation::new(0, BBox::new(10.0, 20.0, 30.0, 40.0))],
            provenance: Provenance { source: format!("s{i}"), x: 0, y: 0, width: 256, height: 256, padded: false },
        });
    }
    let path = dir.path().join("manifest.json");
    m.save(&path).unwrap();
    assert_eq!(DatasetManifest::load(&path).unwrap(), m);
    assert!(m.leaked_sources().is_empty());
}

#[test]
fn annotation_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let dota = dir.path().join("a.txt");
    std::fs::write(
        &dota,
        "imagesource:GoogleEarth\ngsd:0.5\n10 20 50 20 50 60 10 60 plane 0\n100 100 130 90 140 120 110 130 ship 1\n",
    )
    .unwrap();
    let csv = dir.path().join("a.csv");
    std::fs::write(&csv, "class,x0,y0,x1,y1\nplane,10,20,50,60\nship,100,90,140,130\n").unwrap();
    let a = load_annotations(&dota, AnnotationFormat::Dota).unwrap();
    let b = load_annotations(&csv, AnnotationFormat::Csv).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].class, "plane");
    assert_eq!(a[1].bbox, BBox::from_corners(100.0, 90.0, 140.0, 130.0));
}
