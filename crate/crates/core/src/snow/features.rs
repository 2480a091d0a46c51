use crate::error::{Error, Result};
use crate::image::{round_half_away, GrayImage};

/// Side of the square verification template.
pub const TEMPLATE_SIZE: usize = 20;

const GRAY_SLOTS: u32 = 400;
const DIFF_SLOTS: u32 = 380;
const RECT_SLOTS: u32 = 35;

const GRAY_OFFSET: u32 = 0;
const TH_OFFSET: u32 = GRAY_SLOTS * 256;
const TV_OFFSET: u32 = TH_OFFSET + DIFF_SLOTS * 256;
const RECT_OFFSET: u32 = TV_OFFSET + DIFF_SLOTS * 256;

/// Number of active ids in every code.
pub const ACTIVE_PER_CODE: usize = (GRAY_SLOTS + 2 * DIFF_SLOTS + RECT_SLOTS) as usize;
/// Size of the id space: one id per (slot, value) pair.
pub const FEATURE_SPACE: u32 = RECT_OFFSET + RECT_SLOTS * 256;

/// Sparse binary feature vector: the strictly increasing ids of the active
/// features.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureCode(Vec<u32>);

impl FeatureCode {
    /// Sorts and deduplicates `ids`.
    pub fn from_ids(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_template(t: &GrayImage) -> Result<()> {
    if t.dims() != (TEMPLATE_SIZE, TEMPLATE_SIZE) {
        return Err(Error::dims(
            format!("{TEMPLATE_SIZE}x{TEMPLATE_SIZE}"),
            format!("{}x{}", t.rows(), t.cols()),
        ));
    }
    if !t.is_integer_mode() {
        return Err(Error::param("verification template must be integer-mode"));
    }
    Ok(())
}

/// Horizontal (`20 x 19`) and vertical (`19 x 20`) difference templates,
/// `round((a - b + 255) / 2)`.
pub fn diff_features(t: &GrayImage) -> Result<(GrayImage, GrayImage)> {
    check_template(t)?;
    let n = TEMPLATE_SIZE;
    let d = |a: f64, b: f64| round_half_away((a - b + 255.0) / 2.0);
    let th = GrayImage::from_fn(n, n - 1, |r, c| d(t.get(r, c), t.get(r, c + 1)));
    let tv = GrayImage::from_fn(n - 1, n, |r, c| d(t.get(r, c), t.get(r + 1, c)));
    Ok((th, tv))
}

/// `(top, left, height, width)` of the 35 averaged rectangles: four 10x10
/// quadrants, twenty-five 4x4 tiles, six 5-row bands starting every 3 rows.
pub fn rect_layout() -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::with_capacity(RECT_SLOTS as usize);
    for (top, left) in [(0, 0), (0, 10), (10, 0), (10, 10)] {
        out.push((top, left, 10, 10));
    }
    for r in 0..5 {
        for c in 0..5 {
            out.push((4 * r, 4 * c, 4, 4));
        }
    }
    for k in 0..6 {
        out.push((3 * k, 0, 5, 20));
    }
    out
}

/// Rounded mean gray value of each rectangle of [`rect_layout`].
pub fn rect_means(t: &GrayImage) -> Result<Vec<u8>> {
    check_template(t)?;
    Ok(rect_layout()
        .into_iter()
        .map(|(top, left, h, w)| {
            let mut s = 0.0;
            for r in top..top + h {
                for c in left..left + w {
                    s += t.get(r, c);
                }
            }
            round_half_away(s / (h * w) as f64).clamp(0.0, 255.0) as u8
        })
        .collect())
}

/// One active id per (family, position): `offset + position * 256 + value`
/// over the gray values, both difference templates and the rectangle means.
pub fn encode_features(t: &GrayImage) -> Result<FeatureCode> {
    let (th, tv) = diff_features(t)?;
    let rects = rect_means(t)?;
    let mut ids = Vec::with_capacity(ACTIVE_PER_CODE);
    let mut push = |offset: u32, values: &mut dyn Iterator<Item = f64>| {
        for (pos, v) in values.enumerate() {
            ids.push(offset + pos as u32 * 256 + v as u32);
        }
    };
    push(GRAY_OFFSET, &mut t.pixels().iter().copied());
    push(TH_OFFSET, &mut th.pixels().iter().copied());
    push(TV_OFFSET, &mut tv.pixels().iter().copied());
    push(RECT_OFFSET, &mut rects.iter().map(|&v| f64::from(v)));
    // families are laid out in increasing offset order, so ids are sorted
    debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    Ok(FeatureCode(ids))
}
