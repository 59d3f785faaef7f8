//! Depth- and semantics-guided 4x re-rendering.

pub mod fir;
pub mod gate;
pub mod guidance;
pub mod guided;
pub mod planes;

pub use gate::{upsample_semantic, SemanticGate, DEFAULT_DELTA};
pub use guidance::{aggregate_depths, centre_only_depths, neighbor_offset, sort_and_upsample, DepthGuidance, CANDIDATES};
pub use guided::{render_highres_guided, superres, SuperRes, SuperResOptions, SuperResStats, DENSE_SAMPLES};
pub use planes::{upsample_field, upsample_triplanes, HighResTriPlanes};
