use semrad::compositing::DensityConfig;
use semrad::field::Recipe;
use semrad::render::{render_lowres, Camera, CameraSpec, Pose, RenderOptions};
use semrad::superres::{aggregate_depths, centre_only_depths, sort_and_upsample};

/// Where the low-res depth jumps between two opaque surfaces, the high-res
/// pixels on both sides of the jump keep a candidate within tau of each
/// surface, and none sits at the spurious midpoint.
#[test]
fn occlusion_edge_keeps_both_surfaces() {
    let scene = Recipe::occlusion().bake(128).unwrap();
    let pose = Pose::identity(scene.skeleton());
    let cfg = DensityConfig::default();
    let cam = Camera::from_spec(&CameraSpec::front(48)).unwrap();
    let opts = RenderOptions {
        jitter: false,
        ..Default::default()
    };
    let lo = render_lowres(&scene, &pose, &cam, &cfg, &opts).unwrap().buffers;
    let tau = (scene.far() - scene.near()) / 72.0;
    let with = sort_and_upsample(&aggregate_depths(&lo.depth, tau).unwrap(), tau, 4).unwrap();
    let without = sort_and_upsample(&centre_only_depths(&lo.depth, tau).unwrap(), tau, 4).unwrap();

    let near = |c: &[f64], d: f64| c.iter().any(|v| (v - d).abs() <= tau);
    let (mut pixels, mut kept, mut kept_without, mut midpoints) = (0, 0, 0, 0);
    let opaque = |x: usize, y: usize| lo.opacity.get(x, y, 0) > 0.99;
    for y in 1..46 {
        for x in 1..47 {
            // away from silhouettes: the whole neighbourhood is opaque
            if !(y - 1..=y + 2).all(|j| (x - 1..=x + 1).all(|i| opaque(i, j))) {
                continue;
            }
            let (d1, d2) = (lo.depth.get(x, y, 0) as f64, lo.depth.get(x, y + 1, 0) as f64);
            if (d1 - d2).abs() < 0.1 {
                continue;
            }
            let mid = 0.5 * (d1 + d2);
            // the high-res rows either side of the low-res boundary
            for (hx, hy) in (4 * x..4 * x + 4).flat_map(|hx| [(hx, 4 * y + 3), (hx, 4 * y + 4)]) {
                pixels += 1;
                let c = with.depths(hx, hy);
                kept += (near(&c, d1) && near(&c, d2)) as usize;
                midpoints += c.iter().any(|v| (v - mid).abs() < 1e-3) as usize;
                let c = without.depths(hx, hy);
                kept_without += (near(&c, d1) && near(&c, d2)) as usize;
            }
        }
    }
    assert!(pixels >= 40, "only {pixels} edge pixels");
    assert_eq!(kept, pixels, "aggregated candidates lost a surface");
    assert_eq!(midpoints, 0);
    assert!(kept_without < pixels, "centre-only kept {kept_without} of {pixels}");
}
