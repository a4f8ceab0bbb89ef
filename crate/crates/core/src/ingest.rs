//! Tiling of large annotated images and leakage-free train/test splits.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::geometry::{Annotation, BBox};
use crate::image::Image;
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TileSpec {
    pub tile_size: usize,
    pub overlap: usize,
    /// Clipped boxes keeping less than this fraction of their area are dropped.
    pub min_visible: f64,
    /// Tiles without a surviving box of this class are discarded. `None`
    /// keeps tiles with any surviving box.
    pub target_class: Option<u32>,
}

impl Default for TileSpec {
    fn default() -> Self {
        Self { tile_size: 1024, overlap: 0, min_visible: 0.3, target_class: None }
    }
}

/// Source window a tile was cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Provenance {
    pub source: String,
    pub x: usize,
    pub y: usize,
    /// Width and height of the window that lies inside the source.
    pub width: usize,
    pub height: usize,
    /// The tile extends past the source and was zero-padded.
    pub padded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceImage<T = u8> {
    pub id: String,
    pub image: Image<T>,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile<T = u8> {
    pub provenance: Provenance,
    pub image: Image<T>,
    pub annotations: Vec<Annotation>,
}

/// Tile origins along one axis: a regular grid with step `tile - overlap`,
/// the last origin pulled back so the final tile ends at the border. A side
/// shorter than the tile gets a single origin at 0.
pub fn tile_origins(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if len <= tile {
        return alloc::vec![0];
    }
    let step = tile - overlap;
    let mut out = Vec::new();
    let mut pos = 0;
    while pos + tile < len {
        out.push(pos);
        pos += step;
    }
    let last = len - tile;
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn clip_annotations(anns: &[Annotation], window: &BBox, min_visible: f64) -> Vec<Annotation> {
    anns.iter()
        .filter_map(|a| {
            let clipped = a.bbox.intersect(window)?;
            (clipped.area() >= min_visible * a.bbox.area())
                .then(|| Annotation::new(a.class_id, clipped.translated(-window.x0(), -window.y0())))
        })
        .collect()
}

pub fn tile_images<T: Copy + Default>(sources: &[SourceImage<T>], spec: &TileSpec) -> Result<Vec<Tile<T>>> {
    if spec.tile_size < 64 {
        return Err(Error::InvalidConfig(alloc::format!("tile_size must be >= 64, got {}", spec.tile_size)));
    }
    if spec.overlap >= spec.tile_size {
        return Err(Error::InvalidConfig("overlap must be smaller than tile_size".into()));
    }
    let t = spec.tile_size;
    let mut tiles = Vec::new();
    for src in sources {
        let (w, h) = (src.image.width(), src.image.height());
        for &y in &tile_origins(h, t, spec.overlap) {
            for &x in &tile_origins(w, t, spec.overlap) {
                let window = BBox::from_corners(x as f64, y as f64, (x + t) as f64, (y + t) as f64);
                let annotations = clip_annotations(&src.annotations, &window, spec.min_visible);
                let keep = annotations.iter().any(|a| spec.target_class.map_or(true, |c| c == a.class_id));
                if !keep {
                    continue;
                }
                let provenance = Provenance {
                    source: src.id.clone(),
                    x,
                    y,
                    width: t.min(w - x),
                    height: t.min(h - y),
                    padded: w < x + t || h < y + t,
                };
                tiles.push(Tile { provenance, image: src.image.crop_padded(x, y, t, t), annotations });
            }
        }
    }
    Ok(tiles)
}

/// Splits tiles by source image: every tile of a source lands in the same
/// split. `round(test_fraction * sources)` sources, at least one and at most
/// all but one, go to the test side.
pub fn split_by_source<E: Clone>(
    entries: &[E],
    source_of: impl Fn(&E) -> &str,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<E>, Vec<E>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let sources: BTreeSet<&str> = entries.iter().map(&source_of).collect();
    let mut sources: Vec<&str> = sources.into_iter().collect();
    if sources.len() < 2 {
        return Err(Error::TooFewSources(sources.len()));
    }
    sources.shuffle(&mut rng::stream(seed, &[rng::TAG_SPLIT]));
    let n_test = (libm::round(test_fraction * sources.len() as f64) as usize).clamp(1, sources.len() - 1);
    let test: BTreeSet<&str> = sources[..n_test].iter().copied().collect();
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for e in entries {
        if test.contains(source_of(e)) {
            held.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok((train, held))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn src(id: &str, w: usize, h: usize, anns: Vec<Annotation>) -> SourceImage<u8> {
        SourceImage { id: id.into(), image: Image::from_fn(w, h, |_, x, y| ((x + y) % 251) as u8), annotations: anns }
    }

    fn everywhere(w: usize, h: usize, step: usize) -> Vec<Annotation> {
        let mut v = Vec::new();
        let mut y = step / 2;
        while y < h {
            let mut x = step / 2;
            while x < w {
                v.push(Annotation::new(0, BBox::new(x as f64, y as f64, 20.0, 20.0)));
                x += step;
            }
            y += step;
        }
        v
    }

    #[test]
    fn exact_grid() {
        let s = src("a", 2048, 2048, everywhere(2048, 2048, 512));
        let tiles = tile_images(&[s], &TileSpec::default()).unwrap();
        assert_eq!(tiles.len(), 4);
        assert!(tiles.iter().all(|t| !t.provenance.padded));
    }

    #[test]
    fn inner_box_is_translated() {
        let b = BBox::new(1500.0, 300.0, 40.0, 30.0);
        let s = src("a", 2048, 1024, vec![Annotation::new(0, b)]);
        let tiles = tile_images(&[s], &TileSpec::default()).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!((tiles[0].provenance.x, tiles[0].provenance.y), (1024, 0));
        assert_eq!(tiles[0].annotations, vec![Annotation::new(0, b.translated(-1024.0, 0.0))]);
    }

    #[test]
    fn straddling_box_kept_in_both_halves() {
        let b = BBox::new(1024.0, 500.0, 100.0, 50.0);
        let s = src("a", 2048, 1024, vec![Annotation::new(0, b)]);
        let tiles = tile_images(&[s], &TileSpec::default()).unwrap();
        assert_eq!(tiles.len(), 2);
        assert_eq!(tiles[0].annotations[0].bbox, BBox::from_corners(974.0, 475.0, 1024.0, 525.0));
        assert_eq!(tiles[1].annotations[0].bbox, BBox::from_corners(0.0, 475.0, 50.0, 525.0));
    }

    #[test]
    fn sliver_dropped() {
        // 20% of the box lies in the right tile.
        let b = BBox::from_corners(944.0, 100.0, 1044.0, 150.0);
        let s = src("a", 2048, 1024, vec![Annotation::new(0, b)]);
        let tiles = tile_images(&[s], &TileSpec::default()).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0].provenance.x, 0);
    }

    #[test]
    fn small_source_gives_one_padded_tile() {
        let s = src("a", 300, 200, vec![Annotation::new(0, BBox::new(50.0, 50.0, 10.0, 10.0))]);
        let tiles = tile_images(&[s.clone()], &TileSpec::default()).unwrap();
        assert_eq!(tiles.len(), 1);
        let p = &tiles[0].provenance;
        assert!(p.padded);
        assert_eq!((p.width, p.height), (300, 200));
        assert_eq!(tiles[0].image.width(), 1024);
        assert_eq!(tiles[0].image.get(1, 299, 199), s.image.get(1, 299, 199));
    }

    #[test]
    fn target_class_filter_discards_tiles() {
        let s = src("a", 2048, 1024, vec![Annotation::new(3, BBox::new(100.0, 100.0, 20.0, 20.0))]);
        let spec = TileSpec { target_class: Some(0), ..Default::default() };
        assert!(tile_images(&[s], &spec).unwrap().is_empty());
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(tile_images::<u8>(&[], &TileSpec { tile_size: 32, ..Default::default() }).is_err());
        assert!(tile_images::<u8>(&[], &TileSpec { overlap: 1024, ..Default::default() }).is_err());
    }

    #[test]
    fn origins_with_overlap_reach_border() {
        assert_eq!(tile_origins(2500, 1024, 0), vec![0, 1024, 1476]);
        assert_eq!(tile_origins(2048, 1024, 24), vec![0, 1000, 1024]);
        assert_eq!(tile_origins(1024, 1024, 0), vec![0]);
    }

    #[test]
    fn split_is_by_source() {
        let entries: Vec<(String, usize)> =
            (0..10).flat_map(|s| (0..3).map(move |t| (alloc::format!("src{s}"), t))).collect();
        let (train, test) = split_by_source(&entries, |e| e.0.as_str(), 0.2, 9).unwrap();
        let tr: BTreeSet<&str> = train.iter().map(|e| e.0.as_str()).collect();
        let te: BTreeSet<&str> = test.iter().map(|e| e.0.as_str()).collect();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(tr.is_disjoint(&te));
        assert_eq!(split_by_source(&entries, |e| e.0.as_str(), 0.2, 9).unwrap(), (train, test));
    }

    #[test]
    fn split_needs_two_sources() {
        let entries = vec![("a".to_string(), 0), ("a".to_string(), 1)];
        assert_eq!(split_by_source(&entries, |e| e.0.as_str(), 0.5, 0), Err(Error::TooFewSources(1)));
    }
}
