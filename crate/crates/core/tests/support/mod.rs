//! Brute-force reference implementations shared by the integration tests.
//! They follow the definitions directly and share no code with the library
//! beyond its data types.

#![allow(dead_code)]

use aerocamo_core::detector::{Detection, DetectorOutput};
use aerocamo_core::geometry::{Annotation, BBox, Patch};
use rand::Rng;

pub const TV_EPS: f64 = 1e-8;
pub const MEAN_WEIGHT: f64 = 0.3;

fn pixel(p: &Patch, row: usize, col: usize) -> [f64; 3] {
    [p.get(0, row, col), p.get(1, row, col), p.get(2, row, col)]
}

pub fn nps(p: &Patch, colors: &[[f64; 3]]) -> f64 {
    let mut sum = 0.0;
    for row in 0..p.height() {
        for col in 0..p.width() {
            let x = pixel(p, row, col);
            let d = colors
                .iter()
                .map(|c| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            sum += d;
        }
    }
    sum / (p.height() * p.width()) as f64
}

pub fn tv(p: &Patch) -> f64 {
    let mut terms = Vec::new();
    for c in 0..3 {
        for i in 0..p.height() - 1 {
            for j in 0..p.width() - 1 {
                let dx = p.get(c, i, j + 1) - p.get(c, i, j);
                let dy = p.get(c, i + 1, j) - p.get(c, i, j);
                terms.push((dx * dx + dy * dy + TV_EPS).sqrt());
            }
        }
    }
    terms.iter().sum::<f64>() / terms.len() as f64
}

/// Two-pass mean and population deviation of the opponent channels.
pub fn saliency(p: &Patch) -> f64 {
    let mut rg = Vec::new();
    let mut yb = Vec::new();
    for row in 0..p.height() {
        for col in 0..p.width() {
            let [r, g, b] = pixel(p, row, col);
            rg.push(r - g);
            yb.push((r + g) / 2.0 - b);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let std = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let (srg, syb) = (std(&rg), std(&yb));
    let (mrg, myb) = (mean(&rg), mean(&yb));
    (srg * srg + syb * syb).sqrt() + MEAN_WEIGHT * (mrg * mrg + myb * myb).sqrt()
}

/// Mean over outputs of the largest raw objectness.
pub fn objectness(outputs: &[DetectorOutput]) -> f64 {
    let per: Vec<f64> = outputs
        .iter()
        .map(|o| o.objectness.iter().map(|&v| v as f64).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

/// Central differences of `f` with respect to every coordinate of `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between two gradients; components where both are
/// below `floor` in magnitude are compared against `floor`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

pub fn random_patch<R: Rng>(rng: &mut R, h: usize, w: usize) -> Patch {
    Patch::from_pixels(h, w, (0..3 * h * w).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

/// Moves pixels that are nearly equidistant from two printable colors (where
/// the nearest-color map is not differentiable) to a random nearby point.
pub fn break_nps_ties<R: Rng>(rng: &mut R, p: &Patch, colors: &[[f64; 3]], margin: f64) -> Patch {
    let n = p.height() * p.width();
    let mut px = p.pixels().to_vec();
    for k in 0..n {
        loop {
            let x = [px[k], px[n + k], px[2 * n + k]];
            let mut d: Vec<f64> = colors
                .iter()
                .map(|c| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt())
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if d.len() < 2 || d[1] - d[0] > margin {
                break;
            }
            for c in 0..3 {
                px[c * n + k] = (px[c * n + k] + rng.gen_range(-0.05..0.05)).clamp(0.01, 0.99);
            }
        }
    }
    Patch::from_pixels(p.height(), p.width(), px).unwrap()
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.cx + a.w / 2.0).min(b.cx + b.w / 2.0) - (a.cx - a.w / 2.0).max(b.cx - b.w / 2.0);
    let iy = (a.cy + a.h / 2.0).min(b.cy + b.h / 2.0) - (a.cy - a.h / 2.0).max(b.cy - b.h / 2.0);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// `(threshold, precision, recall)` for every distinct confidence, each
/// recomputed from scratch on the detections at or above that threshold.
pub fn pr_table(dets: &[Vec<Detection>], gts: &[Vec<Annotation>], match_iou: f64) -> Vec<(f64, f64, f64)> {
    let total_gt: usize = gts.iter().map(Vec::len).sum();
    let mut thresholds: Vec<f64> = dets.iter().flatten().map(|d| d.confidence).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    thresholds
        .into_iter()
        .map(|t| {
            let mut kept: Vec<(usize, Detection)> = Vec::new();
            for (i, ds) in dets.iter().enumerate() {
                kept.extend(ds.iter().filter(|d| d.confidence >= t).map(|d| (i, *d)));
            }
            kept.sort_by(|a, b| {
                b.1.confidence.partial_cmp(&a.1.confidence).unwrap().then(a.0.cmp(&b.0)).then(a.1.entry.cmp(&b.1.entry))
            });
            let mut used: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
            let mut tp = 0;
            for (img, d) in &kept {
                let mut best: Option<(usize, f64)> = None;
                for (j, g) in gts[*img].iter().enumerate() {
                    let o = iou(&d.bbox, &g.bbox);
                    if !used[*img][j] && g.class_id == d.class_id && o >= match_iou && best.map_or(true, |b| o > b.1) {
                        best = Some((j, o));
                    }
                }
                if let Some((j, _)) = best {
                    used[*img][j] = true;
                    tp += 1;
                }
            }
            (t, tp as f64 / kept.len() as f64, tp as f64 / total_gt as f64)
        })
        .collect()
}

/// All-points AP: for each recall level, the best precision at that or any
/// higher recall, times the recall increment.
pub fn all_points_ap(points: &[(f64, f64)]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (i, &(r, _)) in pts.iter().enumerate() {
        let env = pts[i..].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        ap += (r - prev) * env;
        prev = r;
    }
    ap
}

/// Repeatedly keeps the strongest remaining candidate and drops everything of
/// its class overlapping it at `nms_iou` or more.
pub fn nms(output: &DetectorOutput, conf: f64, nms_iou: f64) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, u32, f64)> = (0..output.len())
        .filter_map(|e| {
            let row = output.class_row(e);
            let mut c = 0;
            for k in 1..row.len() {
                if row[k] > row[c] {
                    c = k;
                }
            }
            let s = output.objectness[e] as f64 * row[c] as f64;
            (s >= conf && output.boxes[e].w > 0.0 && output.boxes[e].h > 0.0).then_some((e, c as u32, s))
        })
        .collect();
    let mut kept = Vec::new();
    while !cand.is_empty() {
        let mut top = 0;
        for i in 1..cand.len() {
            if cand[i].2 > cand[top].2 || (cand[i].2 == cand[top].2 && cand[i].0 < cand[top].0) {
                top = i;
            }
        }
        let (e, c, s) = cand.remove(top);
        kept.push((e, s));
        cand.retain(|&(o, oc, _)| oc != c || iou(&output.boxes[o], &output.boxes[e]) < nms_iou);
    }
    kept
}

/// Pearson statistic of `values` in `bins` equal-width bins over `[lo, hi)`.
pub fn chi_squared(values: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    for &v in values {
        assert!((lo..hi).contains(&v), "{v} outside [{lo}, {hi})");
        let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Upper 1% points of the chi-squared distribution.
pub fn chi2_critical_001(df: usize) -> f64 {
    match df {
        7 => 18.475,
        9 => 21.666,
        _ => panic!("no table entry for df {df}"),
    }
}
