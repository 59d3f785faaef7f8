//! Depth guidance: every low-res pixel proposes 11 depth candidates (its
//! 3x3 neighbourhood plus its own depth pushed forward and back by `tau`),
//! which are sorted per pixel and upsampled channel by channel.

use crate::error::{Error, Result};
use crate::image::Image;

use super::fir;

pub const CANDIDATES: usize = 11;

/// Neighbour offset `(dx, dy)` of candidate `i` in `1..=9`.
#[inline]
pub fn neighbor_offset(i: usize) -> (i64, i64) {
    assert!((1..=9).contains(&i), "neighbour index {i} outside 1..=9");
    let i = i as i64;
    ((i - 1) / 3 - 1, (i - 1) % 3 - 1)
}

fn check_depth(depth: &Image, tau: f64) -> Result<()> {
    if depth.channels() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "single-channel depth".into(),
            actual: depth.shape_string(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidRecipe(format!("tau must be positive, got {tau}")));
    }
    if depth.data().iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidRecipe("depth image has non-finite values".into()));
    }
    Ok(())
}

/// Unsorted candidates: channels 0..9 hold the neighbours in index order
/// (clamped at the borders), channel 9 is `d + tau` and channel 10 `d - tau`.
pub fn aggregate_depths(depth: &Image, tau: f64) -> Result<Image> {
    check_depth(depth, tau)?;
    Ok(Image::from_fn(depth.width(), depth.height(), CANDIDATES, |x, y, c| {
        match c {
            0..=8 => {
                let (dx, dy) = neighbor_offset(c + 1);
                depth.pixel_clamped(x as i64 + dx, y as i64 + dy)[0]
            }
            9 => (depth.get(x, y, 0) as f64 + tau) as f32,
            _ => (depth.get(x, y, 0) as f64 - tau) as f32,
        }
    }))
}

/// Ablation without neighbourhood aggregation: the centre depth fills all
/// nine neighbour slots.
pub fn centre_only_depths(depth: &Image, tau: f64) -> Result<Image> {
    check_depth(depth, tau)?;
    Ok(Image::from_fn(depth.width(), depth.height(), CANDIDATES, |x, y, c| {
        let d = depth.get(x, y, 0);
        match c {
            0..=8 => d,
            9 => (d as f64 + tau) as f32,
            _ => (d as f64 - tau) as f32,
        }
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthGuidance {
    /// `CANDIDATES` channels, non-decreasing per pixel.
    pub candidates: Image,
    pub tau: f64,
}

impl DepthGuidance {
    pub fn width(&self) -> usize {
        self.candidates.width()
    }

    pub fn height(&self) -> usize {
        self.candidates.height()
    }

    pub fn depths(&self, x: usize, y: usize) -> Vec<f64> {
        self.candidates.pixel(x, y).iter().map(|&d| d as f64).collect()
    }
}

/// Sorts each pixel's candidates, then upsamples every channel by `factor`.
/// The filter is a convex combination, so sorted order survives.
pub fn sort_and_upsample(candidates: &Image, tau: f64, factor: usize) -> Result<DepthGuidance> {
    if candidates.channels() != CANDIDATES {
        return Err(Error::ShapeMismatch {
            expected: format!("{CANDIDATES} candidate channels"),
            actual: candidates.shape_string(),
        });
    }
    let mut sorted = candidates.clone();
    for y in 0..sorted.height() {
        for x in 0..sorted.width() {
            sorted.pixel_mut(x, y).sort_by(f32::total_cmp);
        }
    }
    Ok(DepthGuidance {
        candidates: fir::upsample(&sorted, factor)?,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn offset_table() {
        // (i - 1) / 3 - 1 and (i - 1) % 3 - 1, written out
        let expected = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 0),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        for (i, e) in (1..=9).zip(expected) {
            assert_eq!(neighbor_offset(i), e, "i = {i}");
        }
    }

    #[test]
    fn probe_slots() {
        let depth = Image::from_fn(3, 3, 1, |x, y, _| (x * 10 + y) as f32);
        let c = aggregate_depths(&depth, 0.5).unwrap();
        let p = c.pixel(1, 1);
        assert_eq!(p[9], 11.5);
        assert_eq!(p[10], 10.5);
        // slot 0 is (x - 1, y - 1), slot 2 is (x - 1, y + 1)
        assert_eq!(p[0], 0.0);
        assert_eq!(p[2], 2.0);
        assert_eq!(p[4], 11.0);
        assert_eq!(p[8], 22.0);
    }

    #[test]
    fn constant_depth() {
        let depth = Image::filled(4, 4, 1, 3.0);
        let c = aggregate_depths(&depth, 0.25).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let p = c.pixel(x, y);
                assert!(p[..9].iter().all(|&d| d == 3.0));
                assert_eq!((p[9], p[10]), (3.25, 2.75));
            }
        }
        let g = sort_and_upsample(&c, 0.25, 4).unwrap();
        let mut want = vec![3.0f32; 11];
        want[0] = 2.75;
        want[10] = 3.25;
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(g.candidates.pixel(x, y), &want[..]);
            }
        }
    }

    #[test]
    fn step_edge_neighbourhood_sees_both_sides() {
        let depth = Image::from_fn(6, 4, 1, |x, _, _| if x < 3 { 2.5 } else { 3.5 });
        let c = aggregate_depths(&depth, 0.05).unwrap();
        for x in [2, 3] {
            let p = &c.pixel(x, 1)[..9];
            assert!(p.contains(&2.5) && p.contains(&3.5));
        }
        let far = &c.pixel(0, 1)[..9];
        assert!(!far.contains(&3.5));
    }

    #[test]
    fn upsampled_step_keeps_both_surfaces() {
        // two planes at d1 | d2; the true surface depths are d1 and d2
        let (d1, d2, tau) = (2.5f32, 3.5f32, 2.0 / 72.0);
        let depth = Image::from_fn(6, 4, 1, |x, _, _| if x < 3 { d1 } else { d2 });
        let g = sort_and_upsample(&aggregate_depths(&depth, tau).unwrap(), tau, 4).unwrap();
        let near = |p: &[f32], d: f32| p.iter().any(|&c| ((c - d) as f64).abs() <= tau);
        // high-res columns 11 and 12 touch the low-res edge between x = 2 and 3
        for x in [11, 12] {
            for y in 0..16 {
                let p = g.candidates.pixel(x, y);
                assert!(near(p, d1) && near(p, d2), "column {x}: {p:?}");
            }
        }
        let mid = (d1 + d2) / 2.0;
        assert!(g.candidates.data().iter().all(|&c| c != mid));
    }

    #[test]
    fn centre_only_ignores_neighbours() {
        let depth = Image::from_fn(3, 1, 1, |x, _, _| x as f32);
        let c = centre_only_depths(&depth, 0.5).unwrap();
        assert!(c.pixel(1, 0)[..9].iter().all(|&d| d == 1.0));
        assert_eq!(&c.pixel(1, 0)[9..], &[1.5, 0.5]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(aggregate_depths(&Image::new(2, 2, 1), 0.0).is_err());
        assert!(aggregate_depths(&Image::new(2, 2, 3), 0.1).is_err());
        assert!(aggregate_depths(&Image::filled(2, 2, 1, f32::NAN), 0.1).is_err());
    }

    proptest! {
        #[test]
        fn upsampled_candidates_stay_sorted(
            vals in proptest::collection::vec(2.0f32..4.0, 25),
            tau in 0.001f64..0.2,
        ) {
            let depth = Image::from_vec(5, 5, 1, vals).unwrap();
            let g = sort_and_upsample(&aggregate_depths(&depth, tau).unwrap(), tau, 4).unwrap();
            for y in 0..20 {
                for x in 0..20 {
                    let p = g.candidates.pixel(x, y);
                    prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
                    prop_assert!(p.iter().all(|&d| d as f64 >= 2.0 - tau - 1e-6 && d as f64 <= 4.0 + tau + 1e-6));
                }
            }
        }
    }
}
