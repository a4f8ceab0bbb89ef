//! Precision/recall, AP and NMS against exhaustive references.

mod support;

use aerocamo_core::detector::{decode, Detection, DetectorOutput};
use aerocamo_core::eval::{average_precision, precision_recall, PrPoint};
use aerocamo_core::geometry::{Annotation, BBox};
use aerocamo_core::rng;
use rand::Rng;

/// Integer-cornered box on a small canvas so overlaps are frequent and IoU
/// arithmetic is exact.
fn grid_box<R: Rng>(r: &mut R) -> BBox {
    let (x0, y0) = (r.gen_range(0..12) as f64, r.gen_range(0..12) as f64);
    let (w, h) = (r.gen_range(2..8) as f64, r.gen_range(2..8) as f64);
    BBox::from_corners(x0, y0, x0 + w, y0 + h)
}

/// Up to six ground-truth boxes and six detections spread over 1-3 images,
/// with coarse confidences so ties occur.
fn instance<R: Rng>(r: &mut R) -> (Vec<Vec<Detection>>, Vec<Vec<Annotation>>) {
    let images = r.gen_range(1..4);
    let mut gts = vec![Vec::new(); images];
    let mut dets = vec![Vec::new(); images];
    let classes = r.gen_range(1..3);
    for _ in 0..r.gen_range(1..7) {
        gts[r.gen_range(0..images)].push(Annotation::new(r.gen_range(0..classes), grid_box(r)));
    }
    for entry in 0..r.gen_range(0..7) {
        let img = r.gen_range(0..images);
        let bbox = match gts[img].get(r.gen_range(0..3)) {
            Some(g) if r.gen_bool(0.7) => {
                let g: &Annotation = g;
                BBox::new(g.bbox.cx + r.gen_range(-1..2) as f64, g.bbox.cy, g.bbox.w, g.bbox.h)
            }
            _ => grid_box(r),
        };
        dets[img].push(Detection {
            bbox,
            class_id: r.gen_range(0..classes),
            confidence: r.gen_range(1..6) as f64 / 5.0,
            entry,
        });
    }
    (dets, gts)
}

#[test]
fn pr_and_ap_match_exhaustive_reference() {
    let mut r = rng::stream(31, &[]);
    for case in 0..400 {
        let (dets, gts) = instance(&mut r);
        let got = precision_recall(&dets, &gts, 0.5).unwrap();
        let want = support::pr_table(&dets, &gts, 0.5);
        assert_eq!(got.len(), want.len(), "case {case}");
        for (g, &(t, p, rc)) in got.iter().zip(&want) {
            assert_eq!((g.threshold, g.precision, g.recall), (t, p, rc), "case {case}");
        }
        let pts: Vec<(f64, f64)> = want.iter().map(|&(_, p, rc)| (rc, p)).collect();
        assert_eq!(average_precision(&got), support::all_points_ap(&pts), "case {case}");
    }
}

#[test]
fn two_point_curve() {
    let pts = [
        PrPoint { precision: 1.0, recall: 0.5, threshold: 0.9 },
        PrPoint { precision: 0.5, recall: 1.0, threshold: 0.1 },
    ];
    assert!((average_precision(&pts) - 0.75).abs() < 1e-9);
}

#[test]
fn ap_stays_in_unit_interval_and_recall_is_monotone() {
    let mut r = rng::stream(32, &[]);
    for _ in 0..200 {
        let (dets, gts) = instance(&mut r);
        let pr = precision_recall(&dets, &gts, 0.5).unwrap();
        assert!(pr.windows(2).all(|w| w[0].recall <= w[1].recall && w[0].threshold > w[1].threshold));
        let ap = average_precision(&pr);
        assert!((0.0..=1.0).contains(&ap));
    }
}

fn random_output<R: Rng>(r: &mut R) -> DetectorOutput {
    let n = r.gen_range(1..30);
    let nc = r.gen_range(1..3);
    let mut class_probs = Vec::new();
    for _ in 0..n {
        let p: f32 = r.gen_range(1..5) as f32 / 4.0;
        class_probs.push(p);
        if nc == 2 {
            class_probs.push(1.0 - p);
        }
    }
    DetectorOutput {
        grid_w: n,
        grid_h: 1,
        anchors: 1,
        num_classes: nc,
        boxes: (0..n).map(|_| grid_box(r)).collect(),
        objectness: (0..n).map(|_| r.gen_range(0..10) as f32 / 10.0).collect(),
        class_probs,
    }
}

#[test]
fn decode_matches_reference_nms() {
    let mut r = rng::stream(33, &[]);
    for case in 0..300 {
        let o = random_output(&mut r);
        let conf = r.gen_range(0..5) as f64 / 10.0;
        let nms_iou = r.gen_range(1..9) as f64 / 10.0;
        let got: Vec<(usize, f64)> = decode(&o, conf, nms_iou).iter().map(|d| (d.entry, d.confidence)).collect();
        assert_eq!(got, support::nms(&o, conf, nms_iou), "case {case}");
    }
}
