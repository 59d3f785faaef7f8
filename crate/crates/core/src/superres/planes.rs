use std::sync::Arc;

use crate::error::Result;
use crate::field::{PlaneAxis, PlaneData, SemanticScene, TriPlane};
use crate::image::Image;

use super::fir;

/// Per-part tri-planes at a multiple of the stage-one resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct HighResTriPlanes {
    pub factor: usize,
    pub fields: Vec<Arc<TriPlane>>,
}

impl HighResTriPlanes {
    /// `scene` with its part fields replaced by the high-res planes.
    pub fn apply(&self, scene: &SemanticScene) -> Result<SemanticScene> {
        scene.with_fields(self.fields.clone())
    }
}

/// Upsamples one tri-plane with `upsample_plane`; zero planes stay implicit.
pub fn upsample_field(
    field: &TriPlane,
    factor: usize,
    upsample_plane: impl Fn(&Image) -> Result<Image>,
) -> Result<TriPlane> {
    let res = field.resolution();
    let mut out = TriPlane::zeros(res * factor, field.channels(), *field.bbox())?;
    for axis in PlaneAxis::ALL {
        if let PlaneData::Dense(values) = field.plane(axis) {
            let img = Image::from_vec(res, res, field.channels(), values.clone())?;
            out.set_plane(axis, upsample_plane(&img)?.into_vec())?;
        }
    }
    Ok(out)
}

pub fn upsample_triplanes(scene: &SemanticScene, factor: usize) -> Result<HighResTriPlanes> {
    let fields = scene
        .parts()
        .iter()
        .map(|p| upsample_field(&p.field, factor, |img| fir::upsample(img, factor)).map(Arc::new))
        .collect::<Result<_>>()?;
    Ok(HighResTriPlanes { factor, fields })
}
