//! Image representation, lossless PNG I/O and the pixel-level transforms
//! the pipeline needs (grayscale conversion, center crop, alpha
//! normalization).
//!
//! Only 8-bit, non-interlaced, non-palette PNGs are accepted; everything
//! the pipeline touches is held as raw row-major samples so that covers
//! and stegos can be compared bit for bit.

use crate::error::{Error, Result};

/// Channel layout of a [`PixelImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channels {
    Gray,
    Rgb,
    Rgba,
}

impl Channels {
    /// Samples per pixel.
    pub fn count(self) -> usize {
        match self {
            Channels::Gray => 1,
            Channels::Rgb => 3,
            Channels::Rgba => 4,
        }
    }
}

/// A rectangular grid of 8-bit samples, row-major, tightly packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelImage {
    width: u32,
    height: u32,
    channels: Channels,
    samples: Vec<u8>,
}

impl PixelImage {
    /// Builds an image from raw samples. The sample count must equal
    /// `width * height * channels.count()` and both dimensions must be
    /// at least 1.
    pub fn from_samples(
        width: u32,
        height: u32,
        channels: Channels,
        samples: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * channels.count();
        if samples.len() != expected {
            return Err(Error::Argument(format!(
                "sample buffer has {} bytes, expected {expected} for {width}x{height} {channels:?}",
                samples.len()
            )));
        }
        Ok(PixelImage {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    /// Total pixel count.
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    /// Sample value of channel `c` at pixel `(x, y)`.
    pub fn sample(&self, x: u32, y: u32, c: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height && c < self.channels.count());
        let n = self.channels.count();
        self.samples[(y as usize * self.width as usize + x as usize) * n + c]
    }

    /// Base offset of pixel index `p` (row-major) into the sample buffer.
    pub fn pixel_offset(&self, p: usize) -> usize {
        p * self.channels.count()
    }
}

/// Decodes an 8-bit Gray/RGB/RGBA PNG. Palette, sub-byte and 16-bit depths,
/// gray-alpha layouts and interlaced files are rejected.
pub fn load_png(bytes: &[u8]) -> Result<PixelImage> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let info = reader.info();
    if info.interlaced {
        return Err(Error::UnsupportedFormat("interlaced PNG".into()));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!(
            "bit depth {:?}, only 8-bit supported",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => Channels::Gray,
        png::ColorType::Rgb => Channels::Rgb,
        png::ColorType::Rgba => Channels::Rgba,
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("palette PNG".into()));
        }
        png::ColorType::GrayscaleAlpha => {
            return Err(Error::UnsupportedFormat("gray+alpha PNG".into()));
        }
    };
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    PixelImage::from_samples(frame.width, frame.height, channels, buf)
}

/// Reads a PNG file from disk.
pub fn load_png_file(path: impl AsRef<std::path::Path>) -> Result<PixelImage> {
    let bytes = std::fs::read(path)?;
    load_png(&bytes)
}

/// Encodes the image as a lossless PNG. `load_png(save_png(img))` is
/// sample-exact for every channel layout.
pub fn save_png(img: &PixelImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width, img.height);
        encoder.set_color(match img.channels {
            Channels::Gray => png::ColorType::Grayscale,
            Channels::Rgb => png::ColorType::Rgb,
            Channels::Rgba => png::ColorType::Rgba,
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Decode(e.to_string()))?;
        writer
            .write_image_data(&img.samples)
            .map_err(|e| Error::Decode(e.to_string()))?;
    }
    Ok(out)
}

/// Writes a PNG file to disk.
pub fn save_png_file(img: &PixelImage, path: impl AsRef<std::path::Path>) -> Result<()> {
    let bytes = save_png(img)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Converts to a single-channel image using ITU-R 601 luminance weights
/// with round-half-up: `round(0.299 R + 0.587 G + 0.114 B)`. Alpha is
/// dropped. Gray input is returned unchanged.
pub fn to_grayscale(img: &PixelImage) -> PixelImage {
    match img.channels {
        Channels::Gray => img.clone(),
        Channels::Rgb | Channels::Rgba => {
            let n = img.channels.count();
            let mut samples = Vec::with_capacity(img.pixel_count());
            for px in img.samples.chunks_exact(n) {
                let (r, g, b) = (px[0] as u32, px[1] as u32, px[2] as u32);
                // Integer form of round-half-up on weights summing to 1000.
                let y = (299 * r + 587 * g + 114 * b + 500) / 1000;
                samples.push(y as u8);
            }
            PixelImage {
                width: img.width,
                height: img.height,
                channels: Channels::Gray,
                samples,
            }
        }
    }
}

/// Extracts the centered `w x h` window. Offsets are
/// `floor((width - w) / 2)` and `floor((height - h) / 2)`.
pub fn center_crop(img: &PixelImage, w: u32, h: u32) -> Result<PixelImage> {
    if w == 0 || h == 0 || w > img.width || h > img.height {
        return Err(Error::Argument(format!(
            "cannot crop {w}x{h} from {}x{}",
            img.width, img.height
        )));
    }
    let ox = ((img.width - w) / 2) as usize;
    let oy = ((img.height - h) / 2) as usize;
    let n = img.channels.count();
    let src_row = img.width as usize * n;
    let dst_row = w as usize * n;
    let mut samples = Vec::with_capacity(dst_row * h as usize);
    for row in 0..h as usize {
        let start = (oy + row) * src_row + ox * n;
        samples.extend_from_slice(&img.samples[start..start + dst_row]);
    }
    Ok(PixelImage {
        width: w,
        height: h,
        channels: img.channels,
        samples,
    })
}

/// Returns an RGBA image whose every alpha sample equals `value`.
/// Gray input is replicated into R, G and B; RGB input gains an alpha
/// channel; RGBA input keeps its color samples.
pub fn force_alpha(img: &PixelImage, value: u8) -> PixelImage {
    let mut samples = Vec::with_capacity(img.pixel_count() * 4);
    match img.channels {
        Channels::Gray => {
            for &g in &img.samples {
                samples.extend_from_slice(&[g, g, g, value]);
            }
        }
        Channels::Rgb => {
            for px in img.samples.chunks_exact(3) {
                samples.extend_from_slice(&[px[0], px[1], px[2], value]);
            }
        }
        Channels::Rgba => {
            for px in img.samples.chunks_exact(4) {
                samples.extend_from_slice(&[px[0], px[1], px[2], value]);
            }
        }
    }
    PixelImage {
        width: img.width,
        height: img.height,
        channels: Channels::Rgba,
        samples,
    }
}
