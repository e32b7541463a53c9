use crate::error::{Result, SrrError};

/// How samples outside the frame are resolved during filtering.
///
/// `Periodic` makes every convolution an exact circulant-block operator,
/// which the engine relies on internally. `SymmetricReflect` is offered for
/// display-quality output only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    Periodic,
    SymmetricReflect,
}

/// A 2D grid of real-valued intensities, row-major.
///
/// Intensities are nominally in `[0, 255]` but are kept as `f64` throughout;
/// quantization to 8 bits happens only at file export.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(SrrError::Dimension(format!(
                "frame data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Sample with the given boundary rule; `row`/`col` may be any integers.
    #[inline]
    pub fn sample(&self, row: i64, col: i64, boundary: BoundaryRule) -> f64 {
        let (r, c) = match boundary {
            BoundaryRule::Periodic => (
                row.rem_euclid(self.height as i64) as usize,
                col.rem_euclid(self.width as i64) as usize,
            ),
            BoundaryRule::SymmetricReflect => (
                reflect_index(row, self.height),
                reflect_index(col, self.width),
            ),
        };
        self.data[r * self.width + c]
    }

    /// Sample clamping coordinates to the frame (nearest-edge replication).
    #[inline]
    pub fn sample_clamped(&self, row: i64, col: i64) -> f64 {
        let r = row.clamp(0, self.height as i64 - 1) as usize;
        let c = col.clamp(0, self.width as i64 - 1) as usize;
        self.data[r * self.width + c]
    }

    /// Bilinear interpolation at real coordinates, replicating the edges.
    pub fn bilinear(&self, row: f64, col: f64) -> f64 {
        let r0 = row.floor();
        let c0 = col.floor();
        let fr = row - r0;
        let fc = col - c0;
        let (r0, c0) = (r0 as i64, c0 as i64);
        let v00 = self.sample_clamped(r0, c0);
        let v01 = self.sample_clamped(r0, c0 + 1);
        let v10 = self.sample_clamped(r0 + 1, c0);
        let v11 = self.sample_clamped(r0 + 1, c0 + 1);
        (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) + fr * ((1.0 - fc) * v10 + fc * v11)
    }

    pub fn same_size(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn require_same_size(&self, other: &Frame, ctx: &str) -> Result<()> {
        if !self.same_size(other) {
            return Err(SrrError::Dimension(format!(
                "{ctx}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Frame, f: impl Fn(f64, f64) -> f64) -> Frame {
        debug_assert!(self.same_size(other));
        Frame {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Frame {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Frame) -> Frame {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Frame) -> Frame {
        self.zip(other, |a, b| a - b)
    }

    pub fn dot(&self, other: &Frame) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Whole-sample symmetric reflection of an out-of-range index.
fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}
