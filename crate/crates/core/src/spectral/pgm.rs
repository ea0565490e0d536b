//! 8-bit binary PGM (P5) images.

use std::fs;
use std::path::Path;

use super::ScalogramImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Pgm {
    /// Quantizes `[0, 1]` values to `0..=255`.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Self {
        Self {
            width,
            height,
            pixels: values
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect(),
        }
    }

    pub fn from_image(img: &ScalogramImage) -> Self {
        Self::from_unit(img.size, img.size, &img.pixels)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

pub fn write_pgm(img: &ScalogramImage, path: &Path) -> Result<()> {
    Pgm::from_image(img).write(path)
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: &str| Error::Parse {
        path: path.into(),
        line: 0,
        message: message.to_string(),
    };
    let mut fields = Vec::new();
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
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("invalid header number"));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    let data = &bytes[pos + 1..];
    if data.len() != width * height {
        return Err(bad("pixel payload size does not match header"));
    }
    Ok(Pgm {
        width,
        height,
        pixels: data.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_full_scale_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.pgm");
        write_pgm(&ScalogramImage::zeros(8), &p).unwrap();
        let back = read_pgm(&p).unwrap();
        assert!(back.pixels.iter().all(|&b| b == 0));
        assert!(fs::read(&p).unwrap().starts_with(b"P5\n8 8\n255\n"));

        let mut full = ScalogramImage::zeros(8);
        full.pixels.iter_mut().for_each(|v| *v = 1.0);
        write_pgm(&full, &p).unwrap();
        assert!(read_pgm(&p).unwrap().pixels.iter().all(|&b| b == 0xFF));
    }

    #[test]
    fn read_back_equals_quantized_source() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.pgm");
        let mut img = ScalogramImage::zeros(12);
        for (i, v) in img.pixels.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin().abs();
        }
        write_pgm(&img, &p).unwrap();
        let back = read_pgm(&p).unwrap();
        assert_eq!((back.width, back.height), (12, 12));
        assert_eq!(back, Pgm::from_image(&img));
    }

    #[test]
    fn missing_directory_reports_path() {
        let err = write_pgm(&ScalogramImage::zeros(8), Path::new("/nonexistent/dir/x.pgm")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.pgm"));
    }
}
