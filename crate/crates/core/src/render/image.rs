use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Linear RGB image, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// Rec. 709 luma weights.
pub const LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

impl ImageBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        ImageBuffer {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn from_rgb(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Argument(format!(
                "{} values for a {width}x{height} RGB image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite pixel value {v}")));
        }
        Ok(ImageBuffer { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64)
            .collect()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).map(|v| *v as f64).collect()
    }

    /// 8-bit encoding: `clamp((exposure * linear)^(1 / gamma))`.
    pub fn to_rgb8(&self, exposure: f64, gamma: f64) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| {
                let x = (exposure * *v as f64).max(0.0).powf(1.0 / gamma).min(1.0);
                (x * 255.0 + 0.5) as u8
            })
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>, exposure: f64, gamma: f64) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer(
            path,
            &self.to_rgb8(exposure, gamma),
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
        )
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Decodes an 8-bit PNG back to linear values with the given gamma.
    pub fn load_png(path: impl AsRef<Path>, gamma: f64) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let data = img.as_raw().iter().map(|v| (*v as f64 / 255.0).powf(gamma) as f32).collect();
        Self::from_rgb(img.width() as usize, img.height() as usize, data)
    }

    /// Little-endian color PFM. Rows are stored bottom to top.
    pub fn write_pfm(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "PF\n{} {}\n-1.0\n", self.width, self.height)?;
        for y in (0..self.height).rev() {
            for v in &self.data[y * self.width * 3..(y + 1) * self.width * 3] {
                out.write_f32::<LittleEndian>(*v)?;
            }
        }
        Ok(())
    }

    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_pfm(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_pfm(input: &mut impl BufRead) -> Result<Self> {
        let mut header = Vec::new();
        // three whitespace-separated header lines
        for _ in 0..3 {
            let mut line = String::new();
            input
                .read_line(&mut line)
                .map_err(|e| Error::Format(format!("pfm header: {e}")))?;
            header.push(line.trim().to_string());
        }
        if header[0] != "PF" {
            return Err(Error::Format(format!("not a color PFM (magic {:?})", header[0])));
        }
        let dims: Vec<usize> = header[1]
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad PFM size {:?}", header[1]))))
            .collect::<Result<_>>()?;
        if dims.len() != 2 {
            return Err(Error::Format(format!("bad PFM size {:?}", header[1])));
        }
        let scale: f64 = header[2]
            .parse()
            .map_err(|_| Error::Format(format!("bad PFM scale {:?}", header[2])))?;
        let (w, h) = (dims[0], dims[1]);
        let mut raw = vec![0f32; w * h * 3];
        let read = if scale < 0.0 {
            input.read_f32_into::<LittleEndian>(&mut raw)
        } else {
            input.read_f32_into::<byteorder::BigEndian>(&mut raw)
        };
        read.map_err(|e| Error::Corruption(format!("pfm payload: {e}")))?;
        let mut data = vec![0f32; w * h * 3];
        for y in 0..h {
            let src = (h - 1 - y) * w * 3;
            data[y * w * 3..(y + 1) * w * 3].copy_from_slice(&raw[src..src + w * 3]);
        }
        let mut rest = Vec::new();
        input
            .read_to_end(&mut rest)
            .map_err(|e| Error::Corruption(format!("pfm payload: {e}")))?;
        if !rest.is_empty() {
            return Err(Error::Corruption(format!("{} trailing bytes after PFM payload", rest.len())));
        }
        Self::from_rgb(w, h, data)
    }

    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_pfm(&mut BufReader::new(file))
    }

    /// Loads `.pfm` exactly or `.png` through the inverse gamma.
    pub fn load(path: impl AsRef<Path>, gamma: f64) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("pfm") => Self::load_pfm(path),
            Some("png") => Self::load_png(path, gamma),
            _ => Err(Error::Argument(format!("{}: expected a .pfm or .png file", path.display()))),
        }
    }

    /// Saves by extension: `.pfm` linear, `.png` encoded.
    pub fn save(&self, path: impl AsRef<Path>, exposure: f64, gamma: f64) -> Result<()> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("pfm") => self.save_pfm(path),
            Some("png") => self.save_png(path, exposure, gamma),
            _ => Err(Error::Argument(format!("{}: expected a .pfm or .png file", path.display()))),
        }
    }
}
