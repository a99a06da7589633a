//! File formats for the experiment inputs and outputs.
//!
//! * Grayscale images: PGM, ASCII (`P2`) or binary (`P5`).
//! * Noisy observations: a 16-byte header (`b"WGF32\0\0\0"`, height and
//!   width as little-endian `u32`) followed by `height * width` little-endian
//!   `f32` values, row-major.
//! * Corpora: one document per line of whitespace-separated word ids; the
//!   vocabulary file has one `id token` pair per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader};

use super::lda::Corpus;
use crate::error::{Error, Result};

pub const FLOAT_MAGIC: [u8; 8] = *b"WGF32\0\0\0";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for {height}x{width}",
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    /// Spins `+1` for pixels brighter than the median intensity, `-1` otherwise.
    /// If that leaves a single colour (more than half the pixels share the
    /// median value) the comparison becomes `>=`.
    pub fn binarize(&self) -> Vec<i8> {
        let mut sorted = self.pixels.clone();
        sorted.sort_unstable();
        let median = sorted[(sorted.len() - 1) / 2];
        let mut spins: Vec<i8> = self
            .pixels
            .iter()
            .map(|&p| if p > median { 1 } else { -1 })
            .collect();
        if spins.iter().all(|&s| s == -1) {
            spins = self
                .pixels
                .iter()
                .map(|&p| if p >= median { 1 } else { -1 })
                .collect();
        }
        spins
    }

    pub fn from_spins(height: usize, width: usize, spins: &[i8]) -> Result<Self> {
        Self::new(
            height,
            width,
            spins.iter().map(|&s| if s > 0 { 255 } else { 0 }).collect(),
        )
    }

    /// Map values in `[-1, 1]` linearly onto `[0, 255]`, clamping outside.
    pub fn from_signed(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            height,
            width,
            values
                .iter()
                .map(|v| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8)
                .collect(),
        )
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let img = ImageReader::open(path)?
            .with_guessed_format()?
            .decode()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
            .to_luma8();
        let (w, h) = img.dimensions();
        Self::new(h as usize, w as usize, img.into_raw())
    }

    /// Writes binary (`P5`) PGM.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        self.write_pgm_encoded(path, SampleEncoding::Binary)
    }

    /// Writes ASCII (`P2`) PGM.
    pub fn write_pgm_ascii(&self, path: &Path) -> Result<()> {
        self.write_pgm_encoded(path, SampleEncoding::Ascii)
    }

    fn write_pgm_encoded(&self, path: &Path, encoding: SampleEncoding) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        PnmEncoder::new(file)
            .with_subtype(PnmSubtype::Graymap(encoding))
            .write_image(
                &self.pixels,
                self.width as u32,
                self.height as u32,
                ExtendedColorType::L8,
            )
            .map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// Deterministic 8-bit test portrait: a bright face on a darker gradient
/// with eyes and a mouth, used when no input image is supplied.
pub fn synthetic_portrait(height: usize, width: usize) -> GrayImage {
    let (h, w) = (height as f64, width as f64);
    let inside = |x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64| {
        ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
    };
    let pixels = (0..height * width)
        .map(|i| {
            let (y, x) = ((i / width) as f64 + 0.5, (i % width) as f64 + 0.5);
            let background = 30.0 + 60.0 * x / w;
            let mut v = background;
            if inside(x, y, 0.5 * w, 0.52 * h, 0.3 * w, 0.38 * h) {
                v = 210.0;
                let eye_ry = 0.05 * h;
                if inside(x, y, 0.38 * w, 0.42 * h, 0.06 * w, eye_ry)
                    || inside(x, y, 0.62 * w, 0.42 * h, 0.06 * w, eye_ry)
                {
                    v = 20.0;
                }
                if inside(x, y, 0.5 * w, 0.7 * h, 0.14 * w, 0.04 * h) {
                    v = 40.0;
                }
            }
            if y < 0.2 * h && inside(x, y, 0.5 * w, 0.2 * h, 0.32 * w, 0.12 * h) {
                v = 10.0;
            }
            v.clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        height,
        width,
        pixels,
    }
}

pub fn write_float_matrix(path: &Path, height: usize, width: usize, values: &[f64]) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {height}x{width}",
            values.len()
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&FLOAT_MAGIC)?;
    out.write_all(&(height as u32).to_le_bytes())?;
    out.write_all(&(width as u32).to_le_bytes())?;
    for v in values {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_float_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || bytes[..8] != FLOAT_MAGIC {
        return Err(Error::Parse(format!(
            "{}: not a float matrix file",
            path.display()
        )));
    }
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != h * w * 4 {
        return Err(Error::Parse(format!(
            "{}: expected {} payload bytes, found {}",
            path.display(),
            h * w * 4,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((h, w, values))
}

/// Reads a corpus. Without a vocabulary size the largest id plus one is used.
pub fn read_corpus(path: &Path, vocab_size: Option<usize>) -> Result<Corpus> {
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let doc = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u32>().map_err(|_| {
                    Error::Parse(format!("{}:{}: bad word id {tok:?}", path.display(), n + 1))
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        docs.push(doc);
    }
    let v =
        vocab_size.unwrap_or_else(|| docs.iter().flatten().max().map_or(0, |&m| m as usize + 1));
    Corpus::new(docs, v)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for doc in &corpus.documents {
        let line: Vec<String> = doc.iter().map(u32::to_string).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// `id token` per line; returns tokens indexed by id.
pub fn read_vocabulary(path: &Path) -> Result<Vec<String>> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = || Error::Parse(format!("{}:{}: expected `id token`", path.display(), n + 1));
        let id: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let token = parts.next().ok_or_else(bad)?.to_string();
        entries.push((id, token));
    }
    let size = entries.iter().map(|(i, _)| i + 1).max().unwrap_or(0);
    let mut vocab = vec![String::new(); size];
    for (id, token) in entries {
        vocab[id] = token;
    }
    Ok(vocab)
}

pub fn write_vocabulary(path: &Path, vocab: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (id, token) in vocab.iter().enumerate() {
        writeln!(out, "{id} {token}")?;
    }
    out.flush()?;
    Ok(())
}
