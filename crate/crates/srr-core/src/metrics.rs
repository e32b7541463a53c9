//! Full-reference image quality metrics over a 255 dynamic range.

use crate::error::Result;
use crate::frame::Frame;

/// Dynamic range assumed by PSNR and SSIM.
pub const PEAK: f64 = 255.0;

/// Per-frame quality summary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrameMetrics {
    /// Mean squared error per pixel.
    pub mse: f64,
    /// Peak signal-to-noise ratio in dB; `+inf` when `mse == 0`.
    pub psnr: f64,
    /// Structural similarity index in `[0, 1]` for non-degenerate inputs.
    pub ssim: f64,
}

impl FrameMetrics {
    pub fn compute(reference: &Frame, test: &Frame) -> Result<Self> {
        Ok(Self {
            mse: mse(reference, test)?,
            psnr: psnr(reference, test)?,
            ssim: ssim(reference, test)?,
        })
    }
}

/// Mean squared difference per pixel.
pub fn mse(reference: &Frame, test: &Frame) -> Result<f64> {
    reference.require_same_size(test, "metrics")?;
    let n = reference.data().len() as f64;
    let acc: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(acc / n)
}

/// PSNR in dB relative to a 255 peak; `+inf` for identical frames.
pub fn psnr(reference: &Frame, test: &Frame) -> Result<f64> {
    let e = mse(reference, test)?;
    if e == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (PEAK * PEAK / e).log10())
    }
}

/// Linear MSE expressed in dB (`10·log10 mse`); `-inf` for identical frames.
pub fn mse_db(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * mse.log10()
    }
}

/// 11-tap Gaussian window with sigma 1.5, normalized to unit sum.
fn ssim_window() -> [f64; 11] {
    let sigma = 1.5;
    let mut w = [0.0; 11];
    let mut sum = 0.0;
    for (i, wi) in w.iter_mut().enumerate() {
        let x = i as f64 - 5.0;
        *wi = (-x * x / (2.0 * sigma * sigma)).exp();
        sum += *wi;
    }
    for wi in &mut w {
        *wi /= sum;
    }
    w
}

/// Mean SSIM with the standard constants (K1 = 0.01, K2 = 0.03, 11x11
/// Gaussian window, sigma 1.5). The local map is evaluated only where the
/// window fits entirely inside the frame.
pub fn ssim(reference: &Frame, test: &Frame) -> Result<f64> {
    reference.require_same_size(test, "metrics")?;
    let w = reference.width();
    let h = reference.height();
    let win = ssim_window();
    let half = 5usize;
    let c1 = (0.01 * PEAK) * (0.01 * PEAK);
    let c2 = (0.03 * PEAK) * (0.03 * PEAK);
    assert!(w > 2 * half && h > 2 * half, "frame too small for SSIM window");

    // Separable windowed moments: first along rows, then along columns.
    let horiz = |f: &Frame, g: &Frame, product: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for r in 0..h {
            for c in half..w - half {
                let mut acc = 0.0;
                for (k, &wk) in win.iter().enumerate() {
                    let cc = c + k - half;
                    let v = if product {
                        f.get(r, cc) * g.get(r, cc)
                    } else {
                        f.get(r, cc)
                    };
                    acc += wk * v;
                }
                out[r * w + c] = acc;
            }
        }
        out
    };
    let vert = |row_pass: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for r in half..h - half {
            for c in half..w - half {
                let mut acc = 0.0;
                for (k, &wk) in win.iter().enumerate() {
                    acc += wk * row_pass[(r + k - half) * w + c];
                }
                out[r * w + c] = acc;
            }
        }
        out
    };
    let mu_x = vert(&horiz(reference, test, false));
    let mu_y = vert(&horiz(test, reference, false));
    let xx = vert(&horiz(reference, reference, true));
    let yy = vert(&horiz(test, test, true));
    let xy = vert(&horiz(reference, test, true));

    let mut acc = 0.0;
    let mut count = 0usize;
    for r in half..h - half {
        for c in half..w - half {
            let i = r * w + c;
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = xx[i] - mx * mx;
            let var_y = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
            acc += num / den;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}
