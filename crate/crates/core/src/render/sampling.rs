//! Depth sampling along a ray: stratified coarse samples, then inverse-CDF
//! importance samples drawn from the coarse quadrature weights.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-pixel generator. The stream depends only on the frame seed and the
/// pixel, never on which worker renders it.
pub fn pixel_rng(seed: u64, px: usize, py: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((py as u64) << 32) | px as u64);
    rng
}

/// One depth per equal-width bin of `[near, far]`: the bin midpoint when
/// `rng` is `None`, else uniform within the bin.
pub fn coarse_depths(near: f64, far: f64, n: usize, mut rng: Option<&mut ChaCha8Rng>) -> Vec<f64> {
    assert!(n >= 2, "need at least two coarse samples");
    let step = (far - near) / n as f64;
    (0..n)
        .map(|i| {
            let u = match rng.as_deref_mut() {
                Some(r) => r.gen::<f64>(),
                None => 0.5,
            };
            (near + (i as f64 + u) * step).min(far)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceDraw {
    /// Ascending.
    pub depths: Vec<f64>,
    /// The weights carried no mass and the draw fell back to uniform.
    pub fallback: bool,
}

/// Draws `m` depths from the piecewise-constant density whose `i`-th of
/// `weights.len()` equal bins over `[near, far]` has mass `weights[i]`.
/// Uses stratified uniforms `(j + u) / m`, with `u = 0.5` when `rng` is
/// `None`.
pub fn importance_depths(
    near: f64,
    far: f64,
    weights: &[f64],
    m: usize,
    mut rng: Option<&mut ChaCha8Rng>,
) -> ImportanceDraw {
    let n = weights.len();
    assert!(n > 0);
    let step = (far - near) / n as f64;
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let fallback = !(total > 0.0 && total.is_finite());

    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for w in weights {
        acc += if fallback { 1.0 } else { w.max(0.0) };
        cdf.push(acc);
    }
    let total = acc;

    let mut depths = Vec::with_capacity(m);
    let mut bin = 0;
    for j in 0..m {
        let u = match rng.as_deref_mut() {
            Some(r) => r.gen::<f64>(),
            None => 0.5,
        };
        let target = (j as f64 + u) / m as f64 * total;
        // targets increase with j, so the bin search only moves forward
        while bin + 1 < n && cdf[bin + 1] <= target {
            bin += 1;
        }
        // skip empty bins
        while bin + 1 < n && cdf[bin + 1] == cdf[bin] {
            bin += 1;
        }
        let mass = cdf[bin + 1] - cdf[bin];
        let frac = if mass > 0.0 {
            ((target - cdf[bin]) / mass).clamp(0.0, 1.0)
        } else {
            0.5
        };
        depths.push((near + (bin as f64 + frac) * step).min(far));
    }
    ImportanceDraw { depths, fallback }
}
