use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{Detection, DetectorOutput};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DecodeOptions {
    pub conf_threshold: f64,
    pub nms_iou: f64,
    /// Suppress across classes instead of per class.
    pub class_agnostic: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self { conf_threshold: 0.4, nms_iou: 0.45, class_agnostic: false }
    }
}

/// Per-class greedy NMS over entries with `confidence >= conf_threshold`.
/// Output is sorted by descending confidence, ties by ascending entry index.
pub fn decode(output: &DetectorOutput, conf_threshold: f64, nms_iou: f64) -> Vec<Detection> {
    decode_with(output, &DecodeOptions { conf_threshold, nms_iou, class_agnostic: false })
}

pub fn decode_with(output: &DetectorOutput, opts: &DecodeOptions) -> Vec<Detection> {
    let mut candidates: Vec<Detection> = (0..output.len())
        .filter_map(|e| {
            let (class, p) = output.best_class(e);
            let confidence = output.objectness[e] as f64 * p as f64;
            (confidence >= opts.conf_threshold && output.boxes[e].is_valid()).then(|| Detection {
                bbox: output.boxes[e],
                class_id: class as u32,
                confidence,
                entry: e,
            })
        })
        .collect();
    candidates.sort_by(by_confidence);

    let mut kept: Vec<Detection> = Vec::new();
    for d in candidates {
        let suppressed = kept.iter().any(|k| {
            (opts.class_agnostic || k.class_id == d.class_id) && k.bbox.iou(&d.bbox) >= opts.nms_iou
        });
        if !suppressed {
            kept.push(d);
        }
    }
    kept
}

pub(crate) fn by_confidence(a: &Detection, b: &Detection) -> Ordering {
    b.confidence.partial_cmp(&a.confidence).unwrap_or(Ordering::Equal).then(a.entry.cmp(&b.entry))
}
