//! Inter-frame motion estimation: phase-correlation global shifts and
//! Horn–Schunck dense optical flow with a coarse-to-fine pyramid.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Result, SrrError};
use crate::frame::Frame;
use crate::imaging::MotionEstimate;

/// Horn–Schunck solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowParams {
    pub lambda_smooth: f64,
    pub pyramid_levels: usize,
    pub pyramid_spacing: f64,
    pub iterations_per_level: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            lambda_smooth: 1e3,
            pyramid_levels: 4,
            pyramid_spacing: 2.0,
            iterations_per_level: 10,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels == 0 {
            return Err(SrrError::Config("pyramid_levels must be >= 1".into()));
        }
        if self.pyramid_spacing <= 1.0 {
            return Err(SrrError::Config("pyramid_spacing must exceed 1".into()));
        }
        if self.lambda_smooth <= 0.0 {
            return Err(SrrError::Config("lambda_smooth must be positive".into()));
        }
        if self.iterations_per_level == 0 {
            return Err(SrrError::Config("iterations_per_level must be >= 1".into()));
        }
        Ok(())
    }
}

/// Global translation between two frames via phase correlation, refined to
/// subpixel precision by a quadratic fit around the correlation peak.
///
/// Returns the displacement mapping `prev` onto `curr`: features in `curr`
/// sit at their `prev` position plus `(dx, dy)`.
pub fn estimate_global_shift(prev: &Frame, curr: &Frame) -> Result<MotionEstimate> {
    prev.require_same_size(curr, "estimate_global_shift")?;
    let w = prev.width();
    let h = prev.height();

    // Cross-power spectrum: F(curr) * conj(F(prev)) / |...|.
    let fa = fft2(prev);
    let fb = fft2(curr);
    let mut cross: Vec<Complex<f64>> = fb
        .iter()
        .zip(&fa)
        .map(|(b, a)| {
            let p = b * a.conj();
            let n = p.norm();
            if n > 1e-12 {
                p / n
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect();
    ifft2(&mut cross, w, h);
    let corr: Vec<f64> = cross.iter().map(|c| c.re).collect();

    // Peak location.
    let (mut pi, mut pv) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in corr.iter().enumerate() {
        if v > pv {
            pv = v;
            pi = i;
        }
    }
    let pr = pi / w;
    let pc = pi % w;

    // Separable quadratic subpixel fit over the circular 3-neighborhood.
    let at = |r: i64, c: i64| -> f64 {
        let rr = r.rem_euclid(h as i64) as usize;
        let cc = c.rem_euclid(w as i64) as usize;
        corr[rr * w + cc]
    };
    let fit = |m1: f64, z: f64, p1: f64| -> f64 {
        let den = m1 - 2.0 * z + p1;
        if den.abs() < 1e-12 {
            0.0
        } else {
            0.5 * (m1 - p1) / den
        }
    };
    let dc = fit(at(pr as i64, pc as i64 - 1), pv, at(pr as i64, pc as i64 + 1));
    let dr = fit(at(pr as i64 - 1, pc as i64), pv, at(pr as i64 + 1, pc as i64));

    // Unwrap to the symmetric range.
    let unwrap = |p: usize, n: usize| -> f64 {
        if p > n / 2 {
            p as f64 - n as f64
        } else {
            p as f64
        }
    };
    let dx = unwrap(pc, w) + dc.clamp(-0.5, 0.5);
    let dy = unwrap(pr, h) + dr.clamp(-0.5, 0.5);
    Ok(MotionEstimate::GlobalShift { dx, dy })
}

fn fft2(frame: &Frame) -> Vec<Complex<f64>> {
    let w = frame.width();
    let h = frame.height();
    let mut buf: Vec<Complex<f64>> =
        frame.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2_inner(&mut buf, w, h, false);
    buf
}

fn ifft2(buf: &mut [Complex<f64>], w: usize, h: usize) {
    fft2_inner(buf, w, h, true);
    let scale = 1.0 / (w * h) as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

fn fft2_inner(buf: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    let col_fft = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    for r in 0..h {
        row_fft.process(&mut buf[r * w..(r + 1) * w]);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
}

// --- Horn–Schunck dense flow ---

fn downsample_half(f: &Frame) -> Frame {
    let w = (f.width() / 2).max(1);
    let h = (f.height() / 2).max(1);
    let mut out = Frame::zeros(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            let mut count = 0.0;
            for dr in 0..2 {
                for dc in 0..2 {
                    let rr = 2 * r + dr;
                    let cc = 2 * c + dc;
                    if rr < f.height() && cc < f.width() {
                        acc += f.get(rr, cc);
                        count += 1.0;
                    }
                }
            }
            out.set(r, c, acc / count);
        }
    }
    out
}

fn upsample_field(f: &Frame, w: usize, h: usize, gain: f64) -> Frame {
    let mut out = Frame::zeros(w, h);
    let sr = f.height() as f64 / h as f64;
    let sc = f.width() as f64 / w as f64;
    for r in 0..h {
        for c in 0..w {
            let v = f.bilinear((r as f64 + 0.5) * sr - 0.5, (c as f64 + 0.5) * sc - 0.5);
            out.set(r, c, v * gain);
        }
    }
    out
}

/// Central-difference gradients with replicate boundary.
fn gradients(f: &Frame) -> (Frame, Frame) {
    let w = f.width();
    let h = f.height();
    let mut gx = Frame::zeros(w, h);
    let mut gy = Frame::zeros(w, h);
    for r in 0..h {
        for c in 0..w {
            let xm = f.sample_clamped(r as i64, c as i64 - 1);
            let xp = f.sample_clamped(r as i64, c as i64 + 1);
            let ym = f.sample_clamped(r as i64 - 1, c as i64);
            let yp = f.sample_clamped(r as i64 + 1, c as i64);
            gx.set(r, c, 0.5 * (xp - xm));
            gy.set(r, c, 0.5 * (yp - ym));
        }
    }
    (gx, gy)
}

/// Horn–Schunck energy: data term plus `lambda_smooth` times the squared
/// forward-difference flow gradients.
fn hs_energy(ix: &Frame, iy: &Frame, it: &Frame, u: &Frame, v: &Frame, lambda: f64) -> f64 {
    let w = u.width();
    let h = u.height();
    let mut e = 0.0;
    for r in 0..h {
        for c in 0..w {
            let res = ix.get(r, c) * u.get(r, c) + iy.get(r, c) * v.get(r, c) + it.get(r, c);
            e += res * res;
            if c + 1 < w {
                e += lambda * ((u.get(r, c + 1) - u.get(r, c)).powi(2) + (v.get(r, c + 1) - v.get(r, c)).powi(2));
            }
            if r + 1 < h {
                e += lambda * ((u.get(r + 1, c) - u.get(r, c)).powi(2) + (v.get(r + 1, c) - v.get(r, c)).powi(2));
            }
        }
    }
    e
}

/// One Jacobi sweep toward the Horn–Schunck stationarity conditions. The
/// neighbor average uses the 4-neighborhood with replicate boundary; the
/// local system couples `u` and `v` through the image gradient.
fn hs_sweep(
    ix: &Frame,
    iy: &Frame,
    it: &Frame,
    u: &Frame,
    v: &Frame,
    weights: &Frame,
    lambda: f64,
) -> (Frame, Frame) {
    let w = u.width();
    let h = u.height();
    let mut nu = Frame::zeros(w, h);
    let mut nv = Frame::zeros(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut ubar = 0.0;
            let mut vbar = 0.0;
            let mut degree = 0.0;
            let mut visit = |rr: i64, cc: i64| {
                if rr >= 0 && rr < h as i64 && cc >= 0 && cc < w as i64 {
                    ubar += u.get(rr as usize, cc as usize);
                    vbar += v.get(rr as usize, cc as usize);
                    degree += 1.0;
                }
            };
            visit(r as i64 - 1, c as i64);
            visit(r as i64 + 1, c as i64);
            visit(r as i64, c as i64 - 1);
            visit(r as i64, c as i64 + 1);
            ubar /= degree;
            vbar /= degree;
            let wt = weights.get(r, c);
            let gx = ix.get(r, c);
            let gy = iy.get(r, c);
            let gt = it.get(r, c);
            // Closed-form block update: subtract the data-term correction
            // from the neighbor average.
            let denom = lambda * degree + wt * (gx * gx + gy * gy);
            let corr = wt * (gx * ubar + gy * vbar + gt) / denom;
            nu.set(r, c, ubar - gx * corr);
            nv.set(r, c, vbar - gy * corr);
        }
    }
    (nu, nv)
}

/// Solve one pyramid level, optionally logging the energy per iteration.
fn solve_level(
    prev: &Frame,
    curr: &Frame,
    u0: Frame,
    v0: Frame,
    params: &FlowParams,
    energy_log: Option<&mut Vec<f64>>,
) -> (Frame, Frame) {
    // Warp `curr` back by the current flow estimate and linearize there.
    let warped = {
        let mut out = Frame::zeros(curr.width(), curr.height());
        for r in 0..curr.height() {
            for c in 0..curr.width() {
                out.set(
                    r,
                    c,
                    curr.bilinear(r as f64 + v0.get(r, c), c as f64 + u0.get(r, c)),
                );
            }
        }
        out
    };
    let (ix, iy) = gradients(&warped);
    let it = warped.sub(prev);
    // Solve for the incremental flow du, dv from zero.
    let mut du = Frame::zeros(curr.width(), curr.height());
    let mut dv = Frame::zeros(curr.width(), curr.height());
    let mut log = energy_log;
    for _ in 0..params.iterations_per_level {
        let weights = robust_weights(&ix, &iy, &it, &du, &dv);
        let (nu, nv) = hs_sweep(&ix, &iy, &it, &du, &dv, &weights, params.lambda_smooth);
        du = nu;
        dv = nv;
        if let Some(log) = log.as_deref_mut() {
            log.push(hs_energy(&ix, &iy, &it, &du, &dv, params.lambda_smooth));
        }
    }
    (u0.add(&du), v0.add(&dv))
}

/// Iteratively-reweighted data-term weights: pixels whose brightness change
/// cannot be explained by motion (occlusions, appearing objects) are
/// down-weighted so they do not drag the flow of the rest of the frame.
fn robust_weights(ix: &Frame, iy: &Frame, it: &Frame, du: &Frame, dv: &Frame) -> Frame {
    let n = it.data().len();
    let mut res: Vec<f64> = (0..n)
        .map(|i| (it.data()[i] + ix.data()[i] * du.data()[i] + iy.data()[i] * dv.data()[i]).abs())
        .collect();
    res.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mad = res[n / 2];
    let sigma = (7.0 * mad).max(1.0);
    let mut w = Frame::zeros(it.width(), it.height());
    for r in 0..it.height() {
        for c in 0..it.width() {
            let resid = it.get(r, c) + ix.get(r, c) * du.get(r, c) + iy.get(r, c) * dv.get(r, c);
            let t = resid / sigma;
            w.set(r, c, 1.0 / (1.0 + t * t));
        }
    }
    w
}

/// Coarse-to-fine Horn–Schunck flow mapping `prev` onto `curr`; the returned
/// fields give, per pixel, the displacement of that feature from `prev` to
/// `curr` (same convention as [`estimate_global_shift`]).
pub fn estimate_dense_flow(prev: &Frame, curr: &Frame, params: &FlowParams) -> Result<MotionEstimate> {
    estimate_dense_flow_logged(prev, curr, params, None)
}

/// As [`estimate_dense_flow`], optionally appending the finest-level energy
/// after every iteration to `energy_log`.
pub fn estimate_dense_flow_logged(
    prev: &Frame,
    curr: &Frame,
    params: &FlowParams,
    mut energy_log: Option<&mut Vec<f64>>,
) -> Result<MotionEstimate> {
    prev.require_same_size(curr, "estimate_dense_flow")?;
    params.validate()?;
    let min_side = prev.width().min(prev.height());
    if min_side < 1usize << (params.pyramid_levels - 1) {
        return Err(SrrError::Dimension(format!(
            "frame side {min_side} too small for {} pyramid levels",
            params.pyramid_levels
        )));
    }

    // Build the pyramid, coarsest last.
    let mut pyr_prev = vec![prev.clone()];
    let mut pyr_curr = vec![curr.clone()];
    for _ in 1..params.pyramid_levels {
        pyr_prev.push(downsample_half(pyr_prev.last().unwrap()));
        pyr_curr.push(downsample_half(pyr_curr.last().unwrap()));
    }

    let coarse = pyr_prev.last().unwrap();
    let mut u = Frame::zeros(coarse.width(), coarse.height());
    let mut v = Frame::zeros(coarse.width(), coarse.height());
    for level in (0..params.pyramid_levels).rev() {
        let p = &pyr_prev[level];
        let c = &pyr_curr[level];
        if u.width() != p.width() || u.height() != p.height() {
            u = upsample_field(&u, p.width(), p.height(), 2.0);
            v = upsample_field(&v, p.width(), p.height(), 2.0);
        }
        let log = if level == 0 { energy_log.as_deref_mut() } else { None };
        let (nu, nv) = solve_level(p, c, u, v, params, log);
        // Median filtering of intermediate flow fields rejects outlier
        // vectors caused by occlusions and sudden content changes.
        u = median3(&nu);
        v = median3(&nv);
    }
    Ok(MotionEstimate::DenseFlow { u, v })
}

/// 3x3 median filter with replicated borders.
fn median3(f: &Frame) -> Frame {
    let (w, h) = (f.width(), f.height());
    let mut out = Frame::zeros(w, h);
    let mut window = [0.0f64; 9];
    for r in 0..h {
        for c in 0..w {
            let mut i = 0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let rr = (r as i64 + dr).clamp(0, h as i64 - 1) as usize;
                    let cc = (c as i64 + dc).clamp(0, w as i64 - 1) as usize;
                    window[i] = f.get(rr, cc);
                    i += 1;
                }
            }
            window.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.set(r, c, window[4]);
        }
    }
    out
}

/// Rescale LR-domain motion onto the HR grid.
pub fn upscale_motion(motion: &MotionEstimate, d: usize) -> MotionEstimate {
    let s = d as f64;
    match motion {
        MotionEstimate::GlobalShift { dx, dy } => {
            MotionEstimate::GlobalShift { dx: dx * s, dy: dy * s }
        }
        MotionEstimate::DenseFlow { u, v } => {
            let w = u.width() * d;
            let h = u.height() * d;
            MotionEstimate::DenseFlow {
                u: upsample_field(u, w, h, s),
                v: upsample_field(v, w, h, s),
            }
        }
    }
}
