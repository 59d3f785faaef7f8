//! Discrete volume-rendering quadrature.
//!
//! `alpha_i = 1 - exp(-sigma_i * delta_i)`, `T_i = prod_{j<i} (1 - alpha_j)`,
//! `w_i = T_i * alpha_i`. Every buffer is the `w`-weighted sum of its
//! integrand; opacity is `sum w_i`.

use crate::compositing::PointShading;
use crate::field::{Vec3, PART_COUNT};

/// Only samples above this weight get a normal evaluated.
pub const NORMAL_WEIGHT_MIN: f64 = 1e-4;

/// How quadrature intervals are derived from sample depths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalRule {
    /// The last sample's interval runs to here.
    pub far: f64,
    /// Lower bound on every interval.
    pub floor: f64,
}

/// `delta_i = max(t_{i+1} - t_i, floor)`, the last one `max(far - t_last,
/// floor)`.
pub fn intervals(depths: &[f64], rule: IntervalRule) -> Vec<f64> {
    let n = depths.len();
    (0..n)
        .map(|i| {
            let next = if i + 1 < n { depths[i + 1] } else { rule.far };
            (next - depths[i]).max(rule.floor)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    /// Non-decreasing.
    pub depths: Vec<f64>,
    pub shadings: Vec<PointShading>,
    pub intervals: Vec<f64>,
}

impl SampleSet {
    pub fn new(depths: Vec<f64>, shadings: Vec<PointShading>, rule: IntervalRule) -> Self {
        assert_eq!(depths.len(), shadings.len());
        debug_assert!(depths.windows(2).all(|p| p[0] <= p[1]), "depths must be sorted");
        let intervals = intervals(&depths, rule);
        SampleSet {
            depths,
            shadings,
            intervals,
        }
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        let densities: Vec<f64> = self.shadings.iter().map(|s| s.density).collect();
        quadrature_weights(&densities, &self.intervals)
    }
}

pub fn quadrature_weights(densities: &[f64], intervals: &[f64]) -> Vec<f64> {
    let mut t = 1.0;
    densities
        .iter()
        .zip(intervals)
        .map(|(&sigma, &delta)| {
            let alpha = -(-sigma * delta).exp_m1();
            let w = t * alpha;
            t *= 1.0 - alpha;
            w
        })
        .collect()
}

/// Raw quadrature sums. `normal` is normalized when any sample carried one
/// and is zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayIntegral {
    pub color: [f64; 3],
    pub semantic: [f64; PART_COUNT],
    pub depth: f64,
    pub normal: Vec3,
    pub opacity: f64,
}

pub fn integrate_ray(samples: &SampleSet) -> RayIntegral {
    let weights = samples.weights();
    let mut out = RayIntegral {
        color: [0.0; 3],
        semantic: [0.0; PART_COUNT],
        depth: 0.0,
        normal: Vec3::zeros(),
        opacity: 0.0,
    };
    for ((w, s), t) in weights.iter().zip(&samples.shadings).zip(&samples.depths) {
        if *w == 0.0 {
            continue;
        }
        for c in 0..3 {
            out.color[c] += w * s.color[c];
        }
        for k in 0..PART_COUNT {
            out.semantic[k] += w * s.semantic[k];
        }
        out.depth += w * t;
        if let Some(n) = s.normal {
            out.normal += n * *w;
        }
        out.opacity += w;
    }
    let len = out.normal.norm();
    out.normal = if len > 0.0 { out.normal / len } else { Vec3::zeros() };
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::sampling::coarse_depths;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn slab(n: usize, sigma: f64, color: [f64; 3]) -> SampleSet {
        let depths = coarse_depths(2.0, 4.0, n, None);
        let mut s = PointShading::VACUUM;
        s.density = sigma;
        s.color = color;
        s.semantic[0] = 1.0;
        SampleSet::new(depths, vec![s; n], IntervalRule { far: 4.0, floor: 0.0 })
    }

    #[test]
    fn vacuum_integrates_to_nothing() {
        let r = integrate_ray(&slab(72, 0.0, [1.0; 3]));
        assert_eq!(r.color, [0.0; 3]);
        assert_eq!(r.opacity, 0.0);
        assert_eq!(r.depth, 0.0);
        assert_eq!(r.normal, Vec3::zeros());
    }

    fn slab_error(n: usize, sigma: f64) -> f64 {
        let c = 0.7;
        // closed form: c * (1 - exp(-sigma * (t_f - t_n)))
        let exact = c * (1.0 - (-sigma * 2.0f64).exp());
        let got = integrate_ray(&slab(n, sigma, [c; 3])).color[0];
        (got - exact).abs() / exact
    }

    #[test]
    fn homogeneous_slab_matches_closed_form() {
        for sigma in [0.05, 0.5, 1.0, 3.0] {
            let err = slab_error(72, sigma);
            assert!(err <= 1e-2, "sigma {sigma}: relative error {err}");
        }
    }

    #[test]
    fn slab_error_halves_when_samples_double() {
        for sigma in [0.05, 0.5, 1.0] {
            let ratio = slab_error(72, sigma) / slab_error(144, sigma);
            assert!(ratio >= 1.9, "sigma {sigma}: ratio {ratio}");
        }
    }

    #[test]
    fn opaque_wall_returns_first_sample() {
        let depths = vec![2.5, 3.0, 3.5];
        let mut front = PointShading::VACUUM;
        front.density = 1e6;
        front.color = [0.2, 0.4, 0.6];
        front.semantic[2] = 1.0;
        front.normal = Some(Vec3::x());
        let mut back = front;
        back.color = [1.0; 3];
        back.normal = Some(Vec3::y());
        let set = SampleSet::new(depths, vec![front, back, back], IntervalRule { far: 4.0, floor: 0.0 });
        let r = integrate_ray(&set);
        assert_abs_diff_eq!(r.opacity, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.depth, 2.5, epsilon = 1e-9);
        assert_abs_diff_eq!(r.color[1], 0.4, epsilon = 1e-9);
        assert_abs_diff_eq!(r.semantic[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!((r.normal - Vec3::x()).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn interval_floor_and_tail() {
        let d = intervals(&[1.0, 1.0, 1.5], IntervalRule { far: 2.0, floor: 0.1 });
        assert_eq!(d, vec![0.1, 0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn opacity_telescopes(
            sig in proptest::collection::vec(0.0f64..500.0, 1..80),
            step in 0.001f64..0.1,
        ) {
            let deltas = vec![step; sig.len()];
            let w = quadrature_weights(&sig, &deltas);
            let opacity: f64 = w.iter().sum();
            let survive: f64 = sig.iter().map(|s| (-s * step).exp()).product();
            prop_assert!((opacity - (1.0 - survive)).abs() < 1e-6);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&opacity));
        }

        #[test]
        fn semantic_mass_equals_opacity(
            sig in proptest::collection::vec(0.0f64..300.0, 2..40),
            split in 0.0f64..1.0,
        ) {
            let n = sig.len();
            let depths: Vec<f64> = (0..n).map(|i| 2.0 + i as f64 * 0.03).collect();
            let shadings = sig.iter().map(|&s| {
                let mut p = PointShading::VACUUM;
                p.density = s;
                if s > 0.0 {
                    p.semantic[1] = split;
                    p.semantic[4] = 1.0 - split;
                }
                p
            }).collect();
            let r = integrate_ray(&SampleSet::new(depths, shadings, IntervalRule { far: 4.0, floor: 0.0 }));
            let mass: f64 = r.semantic.iter().sum();
            prop_assert!((mass - r.opacity).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_is_weighted_mean_for_full_opacity() {
        let r = integrate_ray(&slab(72, 50.0, [1.0; 3]));
        assert_relative_eq!(r.opacity, 1.0, max_relative = 1e-12);
        assert!(r.depth > 2.0 && r.depth < 2.1);
    }
}
