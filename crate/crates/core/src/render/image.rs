//! RGB images in `[0, 1]` and their file formats (binary PPM, PNG, 16-bit depth PNG, raw f32).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::write_bytes;

/// Interleaved RGB image with channels in `[0, 1]`, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ColorImage {
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        ColorImage {
            width,
            height,
            data,
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} RGB image needs {} values, got {}",
                width,
                height,
                3 * width * height,
                data.len()
            )));
        }
        Ok(ColorImage {
            width,
            height,
            data,
        })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Quantized 8-bit RGB bytes.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize8(v)).collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::from_data(
            width,
            height,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    /// Binary `P6` PPM with maxval 255.
    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_rgb8());
        out
    }

    pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(path, m.to_string());
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated PPM header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad header"))?);
        }
        if fields[0] != "P6" {
            return Err(bad("only binary P6 PPM is supported"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PPM header number"));
        let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(bad("only 8-bit PPM is supported"));
        }
        // exactly one whitespace byte separates the header from the pixels
        let body = &bytes[pos + 1..];
        if body.len() != 3 * w * h {
            return Err(bad("PPM pixel data has the wrong length"));
        }
        Self::from_rgb8(w, h, body)
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), &self.encode_ppm())
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| image_error(path, e))
    }

    /// Writes PPM or PNG depending on the extension (`.ppm` / `.png`).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match extension(path).as_deref() {
            Some("ppm") => self.write_ppm(path),
            Some("png") => self.write_png(path),
            _ => Err(Error::format(path, "image extension must be .ppm or .png")),
        }
    }

    /// Reads a binary PPM or any PNG (converted to 8-bit RGB).
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"P6") {
            return Self::decode_ppm(&bytes, path);
        }
        let img = image::load_from_memory(&bytes).map_err(|e| image_error(path, e))?;
        let rgb = img.to_rgb8();
        Self::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

#[inline]
fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Output of rendering one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: usize,
    pub height: usize,
    /// Accumulated opacity per pixel, in `[0, 1]`.
    pub opacity: Vec<f64>,
    /// Expected termination depth; `None` for background pixels (opacity below 1/2).
    pub depth: Vec<Option<f64>>,
    /// Flat albedo composited over a white background.
    pub color: ColorImage,
    pub t_near: f64,
    pub t_far: f64,
}

/// Raw depth value written for background pixels.
pub const RAW_DEPTH_BACKGROUND: f32 = f32::INFINITY;

impl RenderedImage {
    /// Depth as 16-bit grayscale: 0 for background, `[t_near, t_far]` mapped onto `1..=65535`.
    pub fn depth_u16(&self) -> Vec<u16> {
        let span = self.t_far - self.t_near;
        self.depth
            .iter()
            .map(|d| match d {
                None => 0,
                Some(t) => {
                    let s = ((t - self.t_near) / span).clamp(0.0, 1.0);
                    1 + (s * 65534.0).round() as u16
                }
            })
            .collect()
    }

    pub fn write_depth_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_raw(self.width as u32, self.height as u32, self.depth_u16())
                .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| image_error(path, e))
    }

    /// Little-endian f32 depths, row-major; background pixels hold `+inf`.
    pub fn encode_depth_raw(&self) -> Vec<u8> {
        self.depth
            .iter()
            .flat_map(|d| d.map_or(RAW_DEPTH_BACKGROUND, |t| t as f32).to_le_bytes())
            .collect()
    }

    pub fn write_depth_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), &self.encode_depth_raw())
    }

    /// Opacity as a grayscale image replicated over RGB.
    pub fn opacity_image(&self) -> ColorImage {
        let data = self.opacity.iter().flat_map(|&a| [a, a, a]).collect();
        ColorImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image() -> ColorImage {
        let mut img = ColorImage::filled(5, 3, [0.0; 3]);
        for y in 0..3 {
            for x in 0..5 {
                img.set_pixel(x, y, [x as f64 / 4.0, y as f64 / 2.0, 0.3]);
            }
        }
        img
    }

    #[test]
    fn ppm_layout_is_exact() {
        let img = ColorImage::filled(2, 1, [1.0, 0.0, 0.5]);
        assert_eq!(img.encode_ppm(), b"P6\n2 1\n255\n\xff\x00\x80\xff\x00\x80".to_vec());
    }

    #[test]
    fn ppm_and_png_agree_after_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let img = gradient_image();
        let ppm = dir.path().join("a.ppm");
        let png = dir.path().join("a.png");
        img.write(&ppm).unwrap();
        img.write(&png).unwrap();
        let a = ColorImage::read(&ppm).unwrap();
        let b = ColorImage::read(&png).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.encode_ppm(), img.encode_ppm());
        assert!(img.write(dir.path().join("a.bmp")).is_err());
    }

    #[test]
    fn ppm_header_comments_are_skipped() {
        let bytes = b"P6\n# made by hand\n1 1\n255\n\x10\x20\x30";
        let img = ColorImage::decode_ppm(bytes, Path::new("x.ppm")).unwrap();
        assert_eq!(img.to_rgb8(), vec![0x10, 0x20, 0x30]);
        assert!(ColorImage::decode_ppm(b"P3\n1 1\n255\n0 0 0", Path::new("x.ppm")).is_err());
    }

    #[test]
    fn depth_encodings() {
        let r = RenderedImage {
            width: 3,
            height: 1,
            opacity: vec![0.0, 1.0, 1.0],
            depth: vec![None, Some(1.0), Some(3.0)],
            color: ColorImage::filled(3, 1, [1.0; 3]),
            t_near: 1.0,
            t_far: 3.0,
        };
        assert_eq!(r.depth_u16(), vec![0, 1, 65535]);
        let raw = r.encode_depth_raw();
        assert_eq!(&raw[0..4], &f32::INFINITY.to_le_bytes());
        assert_eq!(&raw[8..12], &3.0f32.to_le_bytes());
        let dir = tempfile::tempdir().unwrap();
        r.write_depth_png(dir.path().join("d.png")).unwrap();
        let back = image::open(dir.path().join("d.png")).unwrap().to_luma16();
        assert_eq!(back.as_raw(), &r.depth_u16());
    }
}
