//! File output: atomic writes, PFM float images and 8-bit PNG.
//!
//! PFM files are written little-endian (negative scale) with rows stored
//! bottom to top, as the format requires. Images with a channel count other
//! than 1 or 3 are written as a single-channel PFM whose channel planes are
//! stacked vertically, channel 0 on top.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn encode_pfm(img: &Image) -> Result<Vec<u8>> {
    let (tag, channels) = match img.channels() {
        1 => ("Pf", 1),
        3 => ("PF", 3),
        c => {
            return Err(Error::ShapeMismatch {
                expected: "1 or 3 channels".into(),
                actual: format!("{c}"),
            })
        }
    };
    let mut out = format!("{tag}\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 4);
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            for c in 0..channels {
                out.extend_from_slice(&img.get(x, y, c).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let mut cursor = std::io::Cursor::new(bytes);
    let mut header = Vec::new();
    for _ in 0..3 {
        let mut line = String::new();
        cursor.read_line(&mut line)?;
        header.push(line.trim().to_string());
    }
    let channels = match header[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::format("pfm", format!("bad tag `{other}`"))),
    };
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::format("pfm", "bad dimensions")))
        .collect::<Result<_>>()?;
    let [w, h] = dims[..] else {
        return Err(Error::format("pfm", "bad dimensions"));
    };
    let scale: f32 = header[2]
        .parse()
        .map_err(|_| Error::format("pfm", "bad scale"))?;
    let little = scale < 0.0;
    let body = &bytes[cursor.position() as usize..];
    let n = w * h * channels;
    if body.len() < n * 4 {
        return Err(Error::format("pfm", "truncated pixel data"));
    }
    let mut img = Image::new(w, h, channels);
    let mut i = 0;
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..channels {
                let b = [body[i], body[i + 1], body[i + 2], body[i + 3]];
                img.pixel_mut(x, y)[c] = if little {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                };
                i += 4;
            }
        }
    }
    Ok(img)
}

/// Rearranges a K-channel image into one channel with the K planes stacked
/// vertically.
pub fn stack_planes(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    Image::from_fn(w, h * img.channels(), 1, |x, y, _| img.get(x, y % h, y / h))
}

pub fn unstack_planes(img: &Image, channels: usize) -> Result<Image> {
    if img.channels() != 1 || channels == 0 || img.height() % channels != 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("single-channel image with height divisible by {channels}"),
            actual: img.shape_string(),
        });
    }
    let h = img.height() / channels;
    Ok(Image::from_fn(img.width(), h, channels, |x, y, c| {
        img.get(x, c * h + y, 0)
    }))
}

pub fn write_pfm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let encoded = if matches!(img.channels(), 1 | 3) {
        encode_pfm(img)?
    } else {
        encode_pfm(&stack_planes(img))?
    };
    write_atomic(path, &encoded)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Image> {
    decode_pfm(&std::fs::read(path)?)
}

/// Reads a PFM holding `channels` vertically stacked planes.
pub fn read_pfm_planes(path: impl AsRef<Path>, channels: usize) -> Result<Image> {
    let img = read_pfm(path)?;
    if channels == img.channels() {
        return Ok(img);
    }
    unstack_planes(&img, channels)
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    if img.channels() != 3 {
        return Err(Error::ShapeMismatch {
            expected: "3 channels".into(),
            actual: format!("{}", img.channels()),
        });
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        let bytes: Vec<u8> = img
            .data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        writer.write_image_data(&bytes)?;
    }
    Ok(out)
}

pub fn write_png(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    write_atomic(path, &encode_png(img)?)
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let file = std::fs::File::open(path)?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format("png", "expected 8-bit RGB"));
    }
    let data = buf[..info.buffer_size()]
        .iter()
        .map(|&b| b as f32 / 255.0)
        .collect();
    Image::from_vec(info.width as usize, info.height as usize, 3, data)
}

pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}
