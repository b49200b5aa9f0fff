//! Bit-exact image input/output: PFM for lossless float data, PNG for
//! previews and normal-map input.

use crate::{Error, Result};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Row-major, channel-interleaved float image; row 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF32 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl ImageF32 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Self {
        assert!((1..=3).contains(&channels));
        assert_eq!(data.len(), width * height * channels);
        ImageF32 {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::new(width, height, channels, vec![0.0; width * height * channels])
    }
}

/// Read a PFM file (`PF` color / `Pf` grayscale). A negative scale marks
/// little-endian data; scanlines are stored bottom-up.
pub fn read_pfm(path: &Path) -> Result<ImageF32> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PFM header".into()));
        }
        let t = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::Format("non-ascii PFM header".into()))?
            .to_string();
        // consume the single whitespace after the token
        pos += 1;
        Ok(t)
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::Format(format!("bad PFM magic '{other}'"))),
    };
    let width: usize = token()?
        .parse()
        .map_err(|_| Error::Format("bad PFM width".into()))?;
    let height: usize = token()?
        .parse()
        .map_err(|_| Error::Format("bad PFM height".into()))?;
    let scale: f32 = token()?
        .parse()
        .map_err(|_| Error::Format("bad PFM scale".into()))?;
    let little_endian = scale < 0.0;
    let count = width * height * channels;
    if bytes.len() < pos + count * 4 {
        return Err(Error::Format("PFM payload shorter than header promises".into()));
    }
    let mut data = vec![0f32; count];
    for (k, v) in data.iter_mut().enumerate() {
        let o = pos + 4 * k;
        let raw: [u8; 4] = bytes[o..o + 4].try_into().unwrap();
        *v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
    }
    // flip bottom-up storage to top-down rows
    let mut flipped = vec![0f32; count];
    let row = width * channels;
    for y in 0..height {
        let src = (height - 1 - y) * row;
        flipped[y * row..(y + 1) * row].copy_from_slice(&data[src..src + row]);
    }
    Ok(ImageF32::new(width, height, channels, flipped))
}

/// Write a PFM file, little-endian, with the conventional bottom-up row
/// order. Non-finite samples are rejected.
pub fn write_pfm(img: &ImageF32, path: &Path) -> Result<()> {
    let magic = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::Format(format!(
                "PFM supports 1 or 3 channels, got {c}"
            )))
        }
    };
    if let Some(bad) = img.data.iter().find(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite sample {bad} on PFM write")));
    }
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    write!(f, "{magic}\n{} {}\n-1.0\n", img.width, img.height)?;
    let row = img.width * img.channels;
    for y in (0..img.height).rev() {
        for v in &img.data[y * row..(y + 1) * row] {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

fn srgb_encode(x: f32) -> f32 {
    if x <= 0.003_130_8 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

/// Write an 8-bit sRGB-encoded PNG after scaling by `exposure` and clipping
/// to `[0, 1]`. Encoded values are sRGB by contract; no colorspace chunk is
/// written.
pub fn write_png(img: &ImageF32, path: &Path, exposure: f32) -> Result<()> {
    let to_byte = |v: f32| {
        let c = srgb_encode((v * exposure).clamp(0.0, 1.0));
        (c * 255.0).round().clamp(0.0, 255.0) as u8
    };
    let (w, h) = (img.width as u32, img.height as u32);
    match img.channels {
        1 => {
            let buf: Vec<u8> = img.data.iter().map(|&v| to_byte(v)).collect();
            image::GrayImage::from_raw(w, h, buf)
                .expect("buffer size")
                .save(path)
                .map_err(|e| Error::Image(e.to_string()))?;
        }
        3 => {
            let buf: Vec<u8> = img.data.iter().map(|&v| to_byte(v)).collect();
            image::RgbImage::from_raw(w, h, buf)
                .expect("buffer size")
                .save(path)
                .map_err(|e| Error::Image(e.to_string()))?;
        }
        c => {
            return Err(Error::Format(format!(
                "PNG output supports 1 or 3 channels, got {c}"
            )))
        }
    }
    Ok(())
}

/// Read an 8/16-bit RGB PNG normal map with the `0.5 * (n + 1)` channel
/// mapping (linear, no transfer function).
pub fn read_png_normals(path: &Path) -> Result<ImageF32> {
    let img = image::open(path).map_err(|e| Error::Image(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f32> = match img {
        image::DynamicImage::ImageRgb8(b) => b
            .into_raw()
            .into_iter()
            .map(|v| v as f32 / 255.0 * 2.0 - 1.0)
            .collect(),
        image::DynamicImage::ImageRgb16(b) => b
            .into_raw()
            .into_iter()
            .map(|v| v as f32 / 65535.0 * 2.0 - 1.0)
            .collect(),
        other => {
            let b = other.into_rgb16();
            b.into_raw()
                .into_iter()
                .map(|v| v as f32 / 65535.0 * 2.0 - 1.0)
                .collect()
        }
    };
    Ok(ImageF32::new(w, h, 3, data))
}
