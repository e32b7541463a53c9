//! Reading and writing grayscale frame sequences.
//!
//! PGM and PNG sequences are directories of numbered files; Y4M is a single
//! stream whose luma plane is used (chroma, if present, is skipped). Writes
//! quantize to 8 bits with round-half-even and clamping to `[0, 255]`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Result, SrrError};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceFormat {
    Pgm,
    Png,
    Y4m,
}

impl SequenceFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "pgm" => Ok(Self::Pgm),
            "png" => Ok(Self::Png),
            "y4m" => Ok(Self::Y4m),
            other => Err(SrrError::Unsupported(format!("unknown sequence format `{other}`"))),
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Self::Pgm => "pgm",
            Self::Png => "png",
            Self::Y4m => "y4m",
        }
    }
}

/// 8-bit quantization: round-half-even, clamped to `[0, 255]`.
pub fn quantize(v: f64) -> u8 {
    v.round_ties_even().clamp(0.0, 255.0) as u8
}

fn frame_to_bytes(frame: &Frame) -> Vec<u8> {
    frame.data().iter().map(|&v| quantize(v)).collect()
}

fn bytes_to_frame(width: usize, height: usize, bytes: &[u8]) -> Frame {
    Frame::new(width, height, bytes.iter().map(|&b| b as f64).collect()).unwrap()
}

/// Write a sequence. For PGM/PNG, `path` is a directory (created if absent)
/// receiving `frame_00000.<ext>`, ...; for Y4M it is the stream file.
pub fn frames_write(path: &Path, format: SequenceFormat, frames: &[Frame]) -> Result<()> {
    if frames.is_empty() {
        return Err(SrrError::Config("refusing to write an empty sequence".into()));
    }
    match format {
        SequenceFormat::Pgm | SequenceFormat::Png => {
            fs::create_dir_all(path)?;
            for (i, f) in frames.iter().enumerate() {
                let file = path.join(format!("frame_{i:05}.{}", format.extension()));
                match format {
                    SequenceFormat::Pgm => write_pgm(&file, f)?,
                    SequenceFormat::Png => write_png(&file, f)?,
                    SequenceFormat::Y4m => unreachable!(),
                }
            }
            Ok(())
        }
        SequenceFormat::Y4m => write_y4m(path, frames),
    }
}

/// Read a sequence written by [`frames_write`] (or any conforming source).
pub fn frames_read(path: &Path, format: SequenceFormat) -> Result<Vec<Frame>> {
    match format {
        SequenceFormat::Pgm | SequenceFormat::Png => {
            let mut files: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case(format.extension()))
                })
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(SrrError::Parse(format!(
                    "no .{} files in {}",
                    format.extension(),
                    path.display()
                )));
            }
            files
                .iter()
                .map(|f| match format {
                    SequenceFormat::Pgm => read_pgm(f),
                    SequenceFormat::Png => read_png(f),
                    SequenceFormat::Y4m => unreachable!(),
                })
                .collect()
        }
        SequenceFormat::Y4m => read_y4m(path),
    }
}

// --- PGM (binary P5) ---

fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = Vec::with_capacity(frame.data().len() + 32);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", frame.width(), frame.height()).as_bytes());
    out.extend_from_slice(&frame_to_bytes(frame));
    fs::write(path, out)?;
    Ok(())
}

fn read_pgm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and `#` comments between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(SrrError::Parse("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token(&bytes)? != "P5" {
        return Err(SrrError::Parse("not a binary PGM (P5) file".into()));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse().map_err(|_| SrrError::Parse(format!("bad PGM header token `{s}`")))
    };
    let width = parse(token(&bytes)?)?;
    let height = parse(token(&bytes)?)?;
    let maxval = parse(token(&bytes)?)?;
    if maxval != 255 {
        return Err(SrrError::Unsupported(format!("unsupported bit depth (maxval {maxval})")));
    }
    pos += 1; // single whitespace byte after maxval
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(SrrError::Parse("PGM pixel data truncated".into()));
    }
    Ok(bytes_to_frame(width, height, &bytes[pos..pos + need]))
}

// --- PNG (8-bit grayscale) ---

fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    let img = image::GrayImage::from_raw(
        frame.width() as u32,
        frame.height() as u32,
        frame_to_bytes(frame),
    )
    .expect("buffer sized to frame");
    img.save(path).map_err(|e| SrrError::Parse(format!("PNG write failed: {e}")))
}

fn read_png(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| SrrError::Parse(format!("PNG read failed: {e}")))?;
    match img {
        image::DynamicImage::ImageLuma8(g) => {
            Ok(bytes_to_frame(g.width() as usize, g.height() as usize, g.as_raw()))
        }
        image::DynamicImage::ImageLuma16(_) | image::DynamicImage::ImageLumaA16(_) => {
            Err(SrrError::Unsupported("unsupported bit depth".into()))
        }
        other => Err(SrrError::Unsupported(format!(
            "unsupported PNG color type {:?}; expected 8-bit grayscale",
            other.color()
        ))),
    }
}

// --- Y4M (luma plane only) ---

fn write_y4m(path: &Path, frames: &[Frame]) -> Result<()> {
    let w = frames[0].width();
    let h = frames[0].height();
    let mut out = fs::File::create(path)?;
    write!(out, "YUV4MPEG2 W{w} H{h} F25:1 Ip A1:1 Cmono\n")?;
    for f in frames {
        f.require_same_size(&frames[0], "Y4M frame")?;
        out.write_all(b"FRAME\n")?;
        out.write_all(&frame_to_bytes(f))?;
    }
    Ok(())
}

fn read_y4m(path: &Path) -> Result<Vec<Frame>> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    let header = String::from_utf8_lossy(&header);
    if !header.starts_with("YUV4MPEG2") {
        return Err(SrrError::Parse("not a YUV4MPEG2 stream".into()));
    }
    let mut width = 0usize;
    let mut height = 0usize;
    let mut colorspace = "420jpeg".to_string();
    for tok in header.split_ascii_whitespace().skip(1) {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = val.parse().map_err(|_| SrrError::Parse("bad Y4M width".into()))?,
            "H" => height = val.parse().map_err(|_| SrrError::Parse("bad Y4M height".into()))?,
            "C" => colorspace = val.to_string(),
            _ => {}
        }
    }
    if width == 0 || height == 0 {
        return Err(SrrError::Parse("Y4M header missing dimensions".into()));
    }
    let luma = width * height;
    let chroma = match colorspace.as_str() {
        "mono" => 0,
        s if s.starts_with("420") => luma / 2,
        s if s.starts_with("422") => luma,
        s if s.starts_with("444") => 2 * luma,
        other => return Err(SrrError::Unsupported(format!("Y4M colorspace `{other}`"))),
    };

    let mut frames = Vec::new();
    loop {
        let mut line = Vec::new();
        let n = reader.read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        if !line.starts_with(b"FRAME") {
            return Err(SrrError::Parse("missing FRAME marker in Y4M stream".into()));
        }
        let mut y = vec![0u8; luma];
        reader.read_exact(&mut y).map_err(|_| SrrError::Parse("Y4M luma truncated".into()))?;
        if chroma > 0 {
            let mut skip = vec![0u8; chroma];
            reader
                .read_exact(&mut skip)
                .map_err(|_| SrrError::Parse("Y4M chroma truncated".into()))?;
        }
        frames.push(bytes_to_frame(width, height, &y));
    }
    if frames.is_empty() {
        return Err(SrrError::Parse("Y4M stream contains no frames".into()));
    }
    Ok(frames)
}
