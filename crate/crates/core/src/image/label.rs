use std::collections::VecDeque;

use super::{BBox, BinaryImage, GrayImage, Region};

const NEIGHBOURS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// 8-connected components of the set pixels, labelled `1..` in scan order of
/// their first pixel. `mean_gray` is filled from `companion` when given.
pub fn label_regions(bw: &BinaryImage, companion: Option<&GrayImage>) -> Vec<Region> {
    if let Some(g) = companion {
        assert_eq!(g.dims(), bw.dims(), "companion image dims must match");
    }
    let (rows, cols) = bw.dims();
    let mut seen = vec![false; rows * cols];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for r0 in 0..rows {
        for c0 in 0..cols {
            if !bw.get(r0, c0) || seen[r0 * cols + c0] {
                continue;
            }
            seen[r0 * cols + c0] = true;
            queue.push_back((r0, c0));
            let mut pixels = Vec::new();
            while let Some((r, c)) = queue.pop_front() {
                pixels.push((r, c));
                for (dr, dc) in NEIGHBOURS_8 {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if bw.get_or_zero(nr, nc) {
                        let idx = nr as usize * cols + nc as usize;
                        if !seen[idx] {
                            seen[idx] = true;
                            queue.push_back((nr as usize, nc as usize));
                        }
                    }
                }
            }
            pixels.sort_unstable();
            regions.push(region_from_pixels(regions.len() + 1, pixels, companion));
        }
    }
    regions
}

fn region_from_pixels(
    label: usize,
    pixels: Vec<(usize, usize)>,
    companion: Option<&GrayImage>,
) -> Region {
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    let (mut sx, mut sy, mut sg) = (0.0, 0.0, 0.0);
    for &(r, c) in &pixels {
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
        sx += c as f64;
        sy += r as f64;
        if let Some(g) = companion {
            sg += g.get(r, c);
        }
    }
    let n = pixels.len() as f64;
    Region {
        label,
        area: pixels.len(),
        bbox: BBox::new(c0 as f64, r0 as f64, (c1 - c0 + 1) as f64, (r1 - r0 + 1) as f64),
        centroid: [sx / n, sy / n],
        mean_gray: if companion.is_some() { sg / n } else { 0.0 },
        pixels,
    }
}

/// Largest region by area; ties go to the earliest label.
pub fn largest_region(bw: &BinaryImage) -> BinaryImage {
    let regions = label_regions(bw, None);
    let mut out = BinaryImage::new(bw.rows(), bw.cols());
    if let Some(best) = regions
        .iter()
        .reduce(|best, r| if r.area > best.area { r } else { best })
    {
        for &(r, c) in &best.pixels {
            out.set(r, c, true);
        }
    }
    out
}

/// Set every 0-pixel not 4-connected to the image border.
pub fn fill_holes(bw: &BinaryImage) -> BinaryImage {
    let (rows, cols) = bw.dims();
    let mut outside = vec![false; rows * cols];
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            let border = r == 0 || c == 0 || r == rows - 1 || c == cols - 1;
            if border && !bw.get(r, c) {
                outside[r * cols + c] = true;
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                continue;
            }
            let idx = nr as usize * cols + nc as usize;
            if !outside[idx] && !bw.bits()[idx] {
                outside[idx] = true;
                queue.push_back((nr as usize, nc as usize));
            }
        }
    }
    BinaryImage::from_fn(rows, cols, |r, c| !outside[r * cols + c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_image_has_no_regions() {
        assert!(label_regions(&BinaryImage::new(5, 5), None).is_empty());
    }

    #[test]
    fn diagonal_pixels_connect() {
        let bw = BinaryImage::from_fn(3, 3, |r, c| (r, c) == (0, 0) || (r, c) == (1, 1));
        assert_eq!(label_regions(&bw, None).len(), 1);
    }

    #[test]
    fn three_blocks() {
        let starts = [(0usize, 0usize), (0, 5), (5, 2)];
        let bw = BinaryImage::from_fn(8, 8, |r, c| {
            starts
                .iter()
                .any(|&(sr, sc)| (sr..sr + 2).contains(&r) && (sc..sc + 2).contains(&c))
        });
        let regions = label_regions(&bw, None);
        assert_eq!(regions.len(), 3);
        for (reg, &(sr, sc)) in regions.iter().zip(&starts) {
            assert_eq!(reg.area, 4);
            assert_eq!(reg.bbox, BBox::new(sc as f64, sr as f64, 2.0, 2.0));
            assert_eq!(reg.centroid, [sc as f64 + 0.5, sr as f64 + 0.5]);
        }
    }

    #[test]
    fn mean_gray_from_companion() {
        let bw = BinaryImage::from_fn(2, 2, |r, _| r == 0);
        let g = GrayImage::from_vec(2, 2, vec![10.0, 30.0, 99.0, 99.0]).unwrap();
        assert_eq!(label_regions(&bw, Some(&g))[0].mean_gray, 20.0);
    }

    #[test]
    fn holes_fill_and_largest() {
        let ring = BinaryImage::from_fn(9, 9, |r, c| {
            (1..6).contains(&r) && (1..6).contains(&c) && !(r == 3 && c == 3)
        });
        let filled = fill_holes(&ring);
        assert!(filled.get(3, 3));
        assert!(!filled.get(0, 0));
        let mut two = filled.clone();
        two.set(8, 8, true);
        assert_eq!(largest_region(&two), filled);
    }

    proptest! {
        #[test]
        fn regions_partition_the_set_pixels(bits in prop::collection::vec(any::<bool>(), 144)) {
            let bw = BinaryImage::from_fn(12, 12, |r, c| bits[r * 12 + c]);
            let regions = label_regions(&bw, None);
            let mut covered = vec![0u32; 144];
            for reg in &regions {
                prop_assert!(reg.area >= 1);
                prop_assert!(reg.area as f64 <= reg.bbox.w * reg.bbox.h);
                for &(r, c) in &reg.pixels {
                    covered[r * 12 + c] += 1;
                }
            }
            for i in 0..144 {
                prop_assert_eq!(covered[i], u32::from(bits[i]));
            }
        }
    }
}
