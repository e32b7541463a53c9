//! The degradation-model operators: blur, decimation, zero-insertion
//! upsampling, their adjoints, motion warping and bicubic interpolation.

use crate::error::{Result, SrrError};
use crate::frame::{BoundaryRule, Frame};
use crate::kernel::Kernel2D;

/// Integer decimation by `diag(d, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecimationSpec {
    d: usize,
}

impl DecimationSpec {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(SrrError::Config("decimation factor must be >= 1".into()));
        }
        Ok(Self { d })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// The decimation matrix, fixed to `diag(d, d)`.
    pub fn matrix(&self) -> [[i64; 2]; 2] {
        [[self.d as i64, 0], [0, self.d as i64]]
    }
}

/// Estimated inter-frame motion.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionEstimate {
    /// A single displacement in pixels, `dx` along columns and `dy` along rows.
    GlobalShift { dx: f64, dy: f64 },
    /// Per-pixel displacement fields sized like the target frame.
    DenseFlow { u: Frame, v: Frame },
}

impl MotionEstimate {
    pub fn zero() -> Self {
        MotionEstimate::GlobalShift { dx: 0.0, dy: 0.0 }
    }
}

/// 2D convolution `y(n) = sum_m k(m) x(n - m)` with the given boundary rule.
///
/// The output has the same dimensions as the input.
pub fn conv2d(frame: &Frame, kernel: &Kernel2D, boundary: BoundaryRule) -> Result<Frame> {
    // Periodic wrap is well-defined for any kernel size; reflection is not.
    if boundary == BoundaryRule::SymmetricReflect
        && (kernel.rows() > frame.height() || kernel.cols() > frame.width())
    {
        return Err(SrrError::Dimension(format!(
            "kernel {}x{} larger than frame {}x{}",
            kernel.rows(),
            kernel.cols(),
            frame.width(),
            frame.height()
        )));
    }
    let w = frame.width();
    let h = frame.height();
    let mut out = Frame::zeros(w, h);
    let offsets: Vec<(i32, i32, f64)> = kernel.offsets().filter(|&(_, _, v)| v != 0.0).collect();
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for &(dr, dc, v) in &offsets {
                acc += v * frame.sample(r as i64 - dr as i64, c as i64 - dc as i64, boundary);
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// Adjoint of [`conv2d`]: convolution with the spatially reversed kernel.
pub fn adjoint_conv2d(frame: &Frame, kernel: &Kernel2D, boundary: BoundaryRule) -> Result<Frame> {
    conv2d(frame, &kernel.flipped(), boundary)
}

/// Keep every `d`-th sample starting at coset `(0, 0)`.
pub fn decimate(frame: &Frame, spec: DecimationSpec) -> Result<Frame> {
    let d = spec.d();
    if frame.width() % d != 0 || frame.height() % d != 0 {
        return Err(SrrError::Dimension(format!(
            "frame {}x{} not divisible by d = {}",
            frame.width(),
            frame.height(),
            d
        )));
    }
    let w = frame.width() / d;
    let h = frame.height() / d;
    let mut out = Frame::zeros(w, h);
    for r in 0..h {
        for c in 0..w {
            out.set(r, c, frame.get(r * d, c * d));
        }
    }
    Ok(out)
}

/// Adjoint of [`decimate`]: insert zeros between samples.
pub fn upsample_zero(frame: &Frame, spec: DecimationSpec) -> Frame {
    let d = spec.d();
    let mut out = Frame::zeros(frame.width() * d, frame.height() * d);
    for r in 0..frame.height() {
        for c in 0..frame.width() {
            out.set(r * d, c * d, frame.get(r, c));
        }
    }
    out
}

/// Resample a frame along the estimated motion (backward bilinear warping).
///
/// With a global shift `(dx, dy)` the output at `(r, c)` reads the input at
/// `(r - dy, c - dx)`, so image content moves by `(dx, dy)`. Out-of-frame
/// samples replicate the nearest edge.
pub fn warp(frame: &Frame, motion: &MotionEstimate) -> Result<Frame> {
    match motion {
        MotionEstimate::GlobalShift { dx, dy } => {
            let mut out = Frame::zeros(frame.width(), frame.height());
            for r in 0..frame.height() {
                for c in 0..frame.width() {
                    out.set(r, c, frame.bilinear(r as f64 - dy, c as f64 - dx));
                }
            }
            Ok(out)
        }
        MotionEstimate::DenseFlow { u, v } => {
            if !u.same_size(frame) || !v.same_size(frame) {
                return Err(SrrError::Dimension(format!(
                    "flow fields {}x{} do not match frame {}x{}",
                    u.width(),
                    u.height(),
                    frame.width(),
                    frame.height()
                )));
            }
            let mut out = Frame::zeros(frame.width(), frame.height());
            for r in 0..frame.height() {
                for c in 0..frame.width() {
                    let dx = u.get(r, c);
                    let dy = v.get(r, c);
                    out.set(r, c, frame.bilinear(r as f64 - dy, c as f64 - dx));
                }
            }
            Ok(out)
        }
    }
}

/// Catmull-Rom cubic weight (a = -0.5).
fn cubic_weight(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Bicubic upsampling by an integer factor, aligned so that output pixel
/// `d * j` coincides with input pixel `j` (the decimation convention).
pub fn bicubic_upsample(frame: &Frame, d: usize) -> Frame {
    if d == 1 {
        return frame.clone();
    }
    let w = frame.width() * d;
    let h = frame.height() * d;
    let mut out = Frame::zeros(w, h);
    for r in 0..h {
        let sr = r as f64 / d as f64;
        let r0 = sr.floor() as i64;
        for c in 0..w {
            let sc = c as f64 / d as f64;
            let c0 = sc.floor() as i64;
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for ir in -1..=2i64 {
                let wr = cubic_weight(sr - (r0 + ir) as f64);
                if wr == 0.0 {
                    continue;
                }
                for ic in -1..=2i64 {
                    let wc = cubic_weight(sc - (c0 + ic) as f64);
                    if wc == 0.0 {
                        continue;
                    }
                    acc += wr * wc * frame.sample_clamped(r0 + ir, c0 + ic);
                    wsum += wr * wc;
                }
            }
            out.set(r, c, acc / wsum);
        }
    }
    out
}
