//! PNG encoding for tiles, class masks and dataset masks, plus tensor
//! conversion.

use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};
use synclay_autograd::Tensor;

use crate::error::{Error, Result};

/// Class-mask palette: background then the six CoNiC types.
pub const MASK_PALETTE: [[u8; 3]; 7] = [
    [0x00, 0x00, 0x00],
    [0xFF, 0x00, 0x00],
    [0x00, 0xFF, 0x00],
    [0xFF, 0xFF, 0x00],
    [0x00, 0x00, 0xFF],
    [0xFF, 0x00, 0xFF],
    [0x00, 0xFF, 0xFF],
];

/// Decoded 8-bit image, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: usize,
    pub data: Vec<u8>,
}

fn encoder<'a>(out: &'a mut Vec<u8>, width: u32, height: u32, color: ColorType, depth: BitDepth) -> png::Encoder<'a, &'a mut Vec<u8>> {
    let mut enc = png::Encoder::new(out, width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    enc
}

pub fn encode_rgb(width: u32, height: u32, rgb: &[u8]) -> Result<Vec<u8>> {
    check_len(rgb.len(), width, height, 3)?;
    let mut out = Vec::new();
    {
        let enc = encoder(&mut out, width, height, ColorType::Rgb, BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(rgb)?;
    }
    Ok(out)
}

/// 8-bit indexed PNG with [`MASK_PALETTE`]; labels must be below 7.
pub fn encode_class_mask(width: u32, height: u32, labels: &[u8]) -> Result<Vec<u8>> {
    check_len(labels.len(), width, height, 1)?;
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= MASK_PALETTE.len()) {
        return Err(Error::Png(format!("class label {bad} has no palette entry")));
    }
    let mut out = Vec::new();
    {
        let mut enc = encoder(&mut out, width, height, ColorType::Indexed, BitDepth::Eight);
        enc.set_palette(MASK_PALETTE.concat());
        let mut w = enc.write_header()?;
        w.write_image_data(labels)?;
    }
    Ok(out)
}

/// 16-bit grayscale PNG, one value per pixel.
pub fn encode_gray16(width: u32, height: u32, values: &[u16]) -> Result<Vec<u8>> {
    check_len(values.len(), width, height, 1)?;
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_be_bytes()).collect();
    let mut out = Vec::new();
    {
        let enc = encoder(&mut out, width, height, ColorType::Grayscale, BitDepth::Sixteen);
        let mut w = enc.write_header()?;
        w.write_image_data(&bytes)?;
    }
    Ok(out)
}

fn check_len(len: usize, width: u32, height: u32, channels: usize) -> Result<()> {
    let want = width as usize * height as usize * channels;
    if len != want {
        return Err(Error::Shape(format!(
            "{len} samples for a {width}x{height}x{channels} image (expected {want})"
        )));
    }
    Ok(())
}

fn decode(bytes: &[u8], transform: Transformations) -> Result<(png::OutputInfo, Vec<u8>, Option<Vec<u8>>)> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(transform);
    let mut reader = dec.read_info()?;
    let palette = reader.info().palette.as_ref().map(|p| p.to_vec());
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf, palette))
}

/// Decodes any 8-bit PNG to RGB, expanding palettes and gray, dropping alpha.
pub fn decode_rgb(bytes: &[u8]) -> Result<Raster> {
    let (info, buf, _) = decode(bytes, Transformations::EXPAND | Transformations::STRIP_16)?;
    let (w, h) = (info.width, info.height);
    let px = w as usize * h as usize;
    let data = match info.color_type {
        ColorType::Rgb => buf,
        ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        ColorType::Indexed => return Err(Error::Png("palette was not expanded".into())),
    };
    debug_assert_eq!(data.len(), px * 3);
    Ok(Raster {
        width: w,
        height: h,
        channels: 3,
        data,
    })
}

/// Decodes an indexed class mask back to its label indices.
pub fn decode_class_mask(bytes: &[u8]) -> Result<Raster> {
    let (info, buf, palette) = decode(bytes, Transformations::IDENTITY)?;
    if info.color_type != ColorType::Indexed || info.bit_depth != BitDepth::Eight {
        return Err(Error::Png(format!(
            "class mask must be 8-bit indexed, found {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    if palette.as_deref() != Some(&MASK_PALETTE.concat()[..]) {
        return Err(Error::Png("class mask palette differs from the standard palette".into()));
    }
    Ok(Raster {
        width: info.width,
        height: info.height,
        channels: 1,
        data: buf,
    })
}

/// Decodes a 16-bit (or 8-bit) grayscale PNG to one value per pixel.
pub fn decode_gray16(bytes: &[u8]) -> Result<(u32, u32, Vec<u16>)> {
    let (info, buf, _) = decode(bytes, Transformations::IDENTITY)?;
    if info.color_type != ColorType::Grayscale {
        return Err(Error::Png(format!("expected a grayscale mask, found {:?}", info.color_type)));
    }
    let values = match info.bit_depth {
        BitDepth::Sixteen => buf.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect(),
        BitDepth::Eight => buf.iter().map(|&b| b as u16).collect(),
        other => return Err(Error::Png(format!("unsupported mask bit depth {other:?}"))),
    };
    Ok((info.width, info.height, values))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::record(path, e.to_string()))
}

/// `[1, 3, H, W]` tensor in `[-1, 1]` from interleaved RGB bytes.
pub fn rgb_to_tensor(r: &Raster) -> Tensor {
    let (w, h) = (r.width as usize, r.height as usize);
    let mut data = vec![0.0; 3 * w * h];
    for (i, px) in r.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * w * h + i] = px[c] as f64 / 127.5 - 1.0;
        }
    }
    Tensor::new(&[1, 3, h, w], data)
}

/// Interleaved RGB bytes from a `[1, 3, H, W]` or `[3, H, W]` tensor.
pub fn tensor_to_rgb(t: &Tensor) -> Result<Raster> {
    let (h, w) = match t.shape() {
        [1, 3, h, w] | [3, h, w] => (*h, *w),
        s => return Err(Error::Shape(format!("expected a 3-channel image, got {s:?}"))),
    };
    let d = t.data();
    let mut data = Vec::with_capacity(3 * w * h);
    for i in 0..w * h {
        for c in 0..3 {
            let v = ((d[c * w * h + i] + 1.0) * 127.5).round().clamp(0.0, 255.0);
            data.push(v as u8);
        }
    }
    Ok(Raster {
        width: w as u32,
        height: h as u32,
        channels: 3,
        data,
    })
}
