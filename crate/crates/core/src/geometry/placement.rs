use alloc::vec;
use alloc::vec::Vec;

use super::{Annotation, PatchConfig, Placement, PlacementMode};

/// Rectangles (before transform jitter) where the patch goes on one object.
///
/// Side placement shifts the patch right of the box center by
/// `(0.5 + rel_width / 2 + side_gap) * w`, so it sits fully outside the box.
/// Two-patch placement centers the copies at `cx -/+ w / 4`. Rectangles may
/// extend past the image; clipping happens at composite time.
pub fn patch_placements(annotation: &Annotation, config: &PatchConfig) -> Vec<Placement> {
    let b = &annotation.bbox;
    let tw = config.rel_width * b.w;
    let th = config.rel_height * b.h;
    match config.placement {
        PlacementMode::OnTopCenter => vec![Placement::new(b.cx, b.cy, tw, th)],
        PlacementMode::SideOffset => {
            let dx = (0.5 + 0.5 * config.rel_width + config.side_gap) * b.w;
            vec![Placement::new(b.cx + dx, b.cy, tw, th)]
        }
        PlacementMode::TwoOnTop => vec![
            Placement::new(b.cx - 0.25 * b.w, b.cy, tw, th),
            Placement::new(b.cx + 0.25 * b.w, b.cy, tw, th),
        ],
    }
}
