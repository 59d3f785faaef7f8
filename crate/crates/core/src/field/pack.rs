//! Baked scene pack: a little-endian binary container for a
//! [`SemanticScene`]. Layout is documented in `docs/formats.md`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::body::{Bone, Skeleton};
use super::scene::{LabelBits, Part, SemanticScene};
use super::triplane::{Aabb, PlaneAxis, TriPlane};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const PACK_MAGIC: &[u8; 4] = b"SRAD";
pub const PACK_VERSION: u32 = 1;

const MAX_NAME: u32 = 1 << 12;
const MAX_RESOLUTION: u32 = 1 << 13;

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = r.read_u32::<LE>()?;
    if len > MAX_NAME {
        return Err(Error::format("pack", format!("name length {len} too large")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::format("pack", e.to_string()))
}

fn write_vec3(w: &mut impl Write, v: &[f64; 3]) -> Result<()> {
    for x in v {
        w.write_f64::<LE>(*x)?;
    }
    Ok(())
}

fn read_vec3(r: &mut impl Read) -> Result<[f64; 3]> {
    Ok([r.read_f64::<LE>()?, r.read_f64::<LE>()?, r.read_f64::<LE>()?])
}

fn write_bbox(w: &mut impl Write, b: &Aabb) -> Result<()> {
    write_vec3(w, &b.min)?;
    write_vec3(w, &b.max)
}

fn read_bbox(r: &mut impl Read) -> Result<Aabb> {
    Ok(Aabb {
        min: read_vec3(r)?,
        max: read_vec3(r)?,
    })
}

pub fn write_pack(scene: &SemanticScene, w: &mut impl Write) -> Result<()> {
    w.write_all(PACK_MAGIC)?;
    w.write_u32::<LE>(PACK_VERSION)?;
    w.write_u32::<LE>(scene.label_bits().bits())?;
    w.write_f64::<LE>(scene.near())?;
    w.write_f64::<LE>(scene.far())?;
    w.write_f64::<LE>(scene.body().smoothing)?;
    write_bbox(w, scene.bbox())?;

    let bones = scene.skeleton().bones();
    w.write_u32::<LE>(bones.len() as u32)?;
    for b in bones {
        write_str(w, &b.name)?;
        w.write_i32::<LE>(b.parent.map_or(-1, |p| p as i32))?;
        write_vec3(w, &b.head)?;
        write_vec3(w, &b.tail)?;
        w.write_f64::<LE>(b.radius)?;
    }

    w.write_u32::<LE>(scene.parts().len() as u32)?;
    for p in scene.parts() {
        write_str(w, &p.name)?;
        w.write_u8(p.enabled as u8)?;
        w.write_f64::<LE>(p.density_scale)?;
        let f = &p.field;
        w.write_u32::<LE>(f.resolution() as u32)?;
        w.write_u32::<LE>(f.channels() as u32)?;
        write_bbox(w, f.bbox())?;
        for axis in PlaneAxis::ALL {
            let values = f.plane_values(axis);
            let mut bytes = Vec::with_capacity(values.len() * 4);
            for v in values {
                bytes.write_f32::<LE>(v)?;
            }
            w.write_all(&bytes)?;
        }
    }
    Ok(())
}

pub fn read_pack(r: &mut impl Read) -> Result<SemanticScene> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PACK_MAGIC {
        return Err(Error::format("pack", "bad magic"));
    }
    let version = r.read_u32::<LE>()?;
    if version != PACK_VERSION {
        return Err(Error::format("pack", format!("unsupported version {version}")));
    }
    let label_bits = LabelBits::new(r.read_u32::<LE>()?)?;
    let near = r.read_f64::<LE>()?;
    let far = r.read_f64::<LE>()?;
    let smoothing = r.read_f64::<LE>()?;
    let bbox = read_bbox(r)?;

    let n_bones = r.read_u32::<LE>()?;
    if n_bones > 1024 {
        return Err(Error::format("pack", format!("{n_bones} bones")));
    }
    let mut bones = Vec::with_capacity(n_bones as usize);
    for _ in 0..n_bones {
        let name = read_str(r)?;
        let parent = r.read_i32::<LE>()?;
        bones.push(Bone {
            name,
            parent: (parent >= 0).then_some(parent as usize),
            head: read_vec3(r)?,
            tail: read_vec3(r)?,
            radius: r.read_f64::<LE>()?,
        });
    }
    let skeleton = Skeleton::new(bones).map_err(|e| Error::format("pack", e))?;

    let n_parts = r.read_u32::<LE>()?;
    if n_parts > 64 {
        return Err(Error::format("pack", format!("{n_parts} parts")));
    }
    let mut parts = Vec::with_capacity(n_parts as usize);
    for _ in 0..n_parts {
        let name = read_str(r)?;
        let enabled = r.read_u8()? != 0;
        let density_scale = r.read_f64::<LE>()?;
        let resolution = r.read_u32::<LE>()?;
        let channels = r.read_u32::<LE>()?;
        if resolution > MAX_RESOLUTION || channels > 64 {
            return Err(Error::format(
                "pack",
                format!("part `{name}` has implausible shape {resolution}x{channels}"),
            ));
        }
        let part_bbox = read_bbox(r)?;
        let mut field = TriPlane::zeros(resolution as usize, channels as usize, part_bbox)?;
        for axis in PlaneAxis::ALL {
            let mut bytes = vec![0u8; field.plane_len() * 4];
            r.read_exact(&mut bytes)?;
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            field.set_plane(axis, values)?;
        }
        parts.push(Part {
            name,
            field: Arc::new(field),
            enabled,
            density_scale,
        });
    }
    SemanticScene::new(skeleton, smoothing, parts, label_bits, near, far, bbox)
}

pub fn save_pack(scene: &SemanticScene, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_pack(scene, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn load_pack(path: impl AsRef<Path>) -> Result<SemanticScene> {
    let bytes = std::fs::read(path)?;
    read_pack(&mut bytes.as_slice())
}
