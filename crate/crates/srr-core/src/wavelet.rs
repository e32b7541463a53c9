//! Orthogonal wavelet transforms and the shrinkage projection.
//!
//! The family is fixed to Daubechies with 5 vanishing moments. Two modes are
//! supported: the critically sampled (`Decimated`) transform, and a fully
//! undecimated transform (`CycleSpinning`) whose thresholding is equivalent
//! to complete cycle spinning of the decimated transform. Boundaries are
//! periodic in both modes.

use crate::error::{Result, SrrError};
use crate::frame::Frame;

/// Daubechies-5 scaling (low-pass) analysis filter. Orthonormal: the taps
/// sum to sqrt(2) and have unit energy; the QMF pair reconstructs perfectly.
const DB5_LO: [f64; 10] = [
    0.003335725285473771278,
    -0.012580751999081999469,
    -0.0062414902127982742742,
    0.077571493840045713523,
    -0.032244869584638374648,
    -0.24229488706638203186,
    0.13842814590132073151,
    0.72430852843777292773,
    0.60382926979718967054,
    0.16010239797419291448,
];

fn db5_hi() -> [f64; 10] {
    let mut g = [0.0; 10];
    for (k, g_k) in g.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *g_k = sign * DB5_LO[DB5_LO.len() - 1 - k];
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletMode {
    /// Critically sampled orthogonal transform.
    Decimated,
    /// Fully undecimated transform; thresholding in this domain matches
    /// complete cycle spinning of the decimated transform.
    CycleSpinning,
}

#[derive(Debug, Clone, Copy)]
pub struct WaveletPlan {
    pub levels: usize,
    pub mode: WaveletMode,
    /// Use the literal one-sided hard-threshold rule (keep `c >= lambda`)
    /// instead of the magnitude rule (keep `|c| >= lambda`).
    pub literal_hard_threshold: bool,
}

impl WaveletPlan {
    pub fn new(levels: usize, mode: WaveletMode) -> Self {
        Self { levels, mode, literal_hard_threshold: false }
    }

    /// Default configuration: 4 decomposition levels with cycle spinning.
    pub fn default_cycle_spinning() -> Self {
        Self::new(4, WaveletMode::CycleSpinning)
    }

    fn check_dims(&self, frame: &Frame) -> Result<()> {
        let div = 1usize << self.levels;
        match self.mode {
            WaveletMode::Decimated => {
                if frame.width() % div != 0 || frame.height() % div != 0 {
                    return Err(SrrError::Dimension(format!(
                        "frame {}x{} not divisible by 2^{} for the decimated transform",
                        frame.width(),
                        frame.height(),
                        self.levels
                    )));
                }
            }
            WaveletMode::CycleSpinning => {
                // Filters must not wrap onto themselves at the coarsest level.
                let reach = (1usize << (self.levels - 1)) * (DB5_LO.len() - 1);
                if frame.width() <= reach.min(frame.width()) && frame.width() < DB5_LO.len() {
                    return Err(SrrError::Dimension("frame too small for wavelet plan".into()));
                }
            }
        }
        Ok(())
    }
}

/// Detail bands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBands {
    pub lh: Frame,
    pub hl: Frame,
    pub hh: Frame,
}

/// Coefficients of a forward transform: per-level detail bands from finest
/// to coarsest, plus the final approximation band.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub mode: WaveletMode,
    pub levels: Vec<LevelBands>,
    pub approx: Frame,
}

impl WaveletCoeffs {
    /// Total energy over all stored bands.
    pub fn energy(&self) -> f64 {
        let mut acc = self.approx.dot(&self.approx);
        for l in &self.levels {
            acc += l.lh.dot(&l.lh) + l.hl.dot(&l.hl) + l.hh.dot(&l.hh);
        }
        acc
    }
}

// --- 1D filtering primitives (periodic boundary) ---

/// Decimated analysis along rows: output width w/2 per filter.
fn analyze_rows(f: &Frame, filt: &[f64]) -> Frame {
    let w = f.width();
    let h = f.height();
    let ow = w / 2;
    let mut out = Frame::zeros(ow, h);
    for r in 0..h {
        for i in 0..ow {
            let mut acc = 0.0;
            for (k, &fk) in filt.iter().enumerate() {
                acc += fk * f.get(r, (2 * i + k) % w);
            }
            out.set(r, i, acc);
        }
    }
    out
}

fn analyze_cols(f: &Frame, filt: &[f64]) -> Frame {
    let w = f.width();
    let h = f.height();
    let oh = h / 2;
    let mut out = Frame::zeros(w, oh);
    for i in 0..oh {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &fk) in filt.iter().enumerate() {
                acc += fk * f.get((2 * i + k) % h, c);
            }
            out.set(i, c, acc);
        }
    }
    out
}

/// Decimated synthesis along rows: scatter-add the transposed analysis.
fn synth_rows(lo_band: &Frame, hi_band: &Frame, lo: &[f64], hi: &[f64]) -> Frame {
    let ow = lo_band.width() * 2;
    let h = lo_band.height();
    let mut out = Frame::zeros(ow, h);
    for r in 0..h {
        for i in 0..lo_band.width() {
            let a = lo_band.get(r, i);
            let d = hi_band.get(r, i);
            for k in 0..lo.len() {
                let m = (2 * i + k) % ow;
                out.set(r, m, out.get(r, m) + a * lo[k] + d * hi[k]);
            }
        }
    }
    out
}

fn synth_cols(lo_band: &Frame, hi_band: &Frame, lo: &[f64], hi: &[f64]) -> Frame {
    let w = lo_band.width();
    let oh = lo_band.height() * 2;
    let mut out = Frame::zeros(w, oh);
    for i in 0..lo_band.height() {
        for c in 0..w {
            let a = lo_band.get(i, c);
            let d = hi_band.get(i, c);
            for k in 0..lo.len() {
                let m = (2 * i + k) % oh;
                out.set(m, c, out.get(m, c) + a * lo[k] + d * hi[k]);
            }
        }
    }
    out
}

/// Undecimated analysis along rows with taps spaced by `step`.
fn analyze_rows_undec(f: &Frame, filt: &[f64], step: usize) -> Frame {
    let w = f.width();
    let h = f.height();
    let mut out = Frame::zeros(w, h);
    for r in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (k, &fk) in filt.iter().enumerate() {
                acc += fk * f.get(r, (i + step * k) % w);
            }
            out.set(r, i, acc);
        }
    }
    out
}

fn analyze_cols_undec(f: &Frame, filt: &[f64], step: usize) -> Frame {
    let w = f.width();
    let h = f.height();
    let mut out = Frame::zeros(w, h);
    for i in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &fk) in filt.iter().enumerate() {
                acc += fk * f.get((i + step * k) % h, c);
            }
            out.set(i, c, acc);
        }
    }
    out
}

/// Undecimated synthesis along rows: transposed analysis averaged over the
/// two interleaved phases (factor 1/2).
fn synth_rows_undec(lo_band: &Frame, hi_band: &Frame, lo: &[f64], hi: &[f64], step: usize) -> Frame {
    let w = lo_band.width();
    let h = lo_band.height();
    let mut out = Frame::zeros(w, h);
    for r in 0..h {
        for m in 0..w {
            let mut acc = 0.0;
            for k in 0..lo.len() {
                let i = (m + w - (step * k) % w) % w;
                acc += lo[k] * lo_band.get(r, i) + hi[k] * hi_band.get(r, i);
            }
            out.set(r, m, 0.5 * acc);
        }
    }
    out
}

fn synth_cols_undec(lo_band: &Frame, hi_band: &Frame, lo: &[f64], hi: &[f64], step: usize) -> Frame {
    let w = lo_band.width();
    let h = lo_band.height();
    let mut out = Frame::zeros(w, h);
    for m in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for k in 0..lo.len() {
                let i = (m + h - (step * k) % h) % h;
                acc += lo[k] * lo_band.get(i, c) + hi[k] * hi_band.get(i, c);
            }
            out.set(m, c, 0.5 * acc);
        }
    }
    out
}

/// Forward transform per the plan.
pub fn dwt_forward(frame: &Frame, plan: &WaveletPlan) -> Result<WaveletCoeffs> {
    plan.check_dims(frame)?;
    let lo = &DB5_LO;
    let hi = db5_hi();
    let mut levels = Vec::with_capacity(plan.levels);
    let mut approx = frame.clone();
    match plan.mode {
        WaveletMode::Decimated => {
            for _ in 0..plan.levels {
                let l = analyze_rows(&approx, lo);
                let h = analyze_rows(&approx, &hi);
                let ll = analyze_cols(&l, lo);
                let lh = analyze_cols(&l, &hi);
                let hl = analyze_cols(&h, lo);
                let hh = analyze_cols(&h, &hi);
                levels.push(LevelBands { lh, hl, hh });
                approx = ll;
            }
        }
        WaveletMode::CycleSpinning => {
            for level in 0..plan.levels {
                let step = 1usize << level;
                let l = analyze_rows_undec(&approx, lo, step);
                let h = analyze_rows_undec(&approx, &hi, step);
                let ll = analyze_cols_undec(&l, lo, step);
                let lh = analyze_cols_undec(&l, &hi, step);
                let hl = analyze_cols_undec(&h, lo, step);
                let hh = analyze_cols_undec(&h, &hi, step);
                levels.push(LevelBands { lh, hl, hh });
                approx = ll;
            }
        }
    }
    Ok(WaveletCoeffs { mode: plan.mode, levels, approx })
}

/// Inverse transform; exact for `Decimated`, shift-averaged for
/// `CycleSpinning`.
pub fn dwt_inverse(coeffs: &WaveletCoeffs, plan: &WaveletPlan) -> Result<Frame> {
    if coeffs.mode != plan.mode || coeffs.levels.len() != plan.levels {
        return Err(SrrError::Config("wavelet plan does not match coefficients".into()));
    }
    let lo = &DB5_LO;
    let hi = db5_hi();
    let mut approx = coeffs.approx.clone();
    match plan.mode {
        WaveletMode::Decimated => {
            for bands in coeffs.levels.iter().rev() {
                let l = synth_cols(&approx, &bands.lh, lo, &hi);
                let h = synth_cols(&bands.hl, &bands.hh, lo, &hi);
                approx = synth_rows(&l, &h, lo, &hi);
            }
        }
        WaveletMode::CycleSpinning => {
            for (level, bands) in coeffs.levels.iter().enumerate().rev() {
                let step = 1usize << level;
                let l = synth_cols_undec(&approx, &bands.lh, lo, &hi, step);
                let h = synth_cols_undec(&bands.hl, &bands.hh, lo, &hi, step);
                approx = synth_rows_undec(&l, &h, lo, &hi, step);
            }
        }
    }
    Ok(approx)
}

/// Elementwise shrinkage of the detail bands; the approximation band passes
/// through untouched. `p = 1` is soft thresholding, `p = 0` hard.
pub fn threshold(coeffs: &WaveletCoeffs, p: u8, lambda_tau: f64, plan: &WaveletPlan) -> WaveletCoeffs {
    let rule = |c: f64| -> f64 {
        match p {
            1 => (c.abs() - lambda_tau).max(0.0) * c.signum(),
            0 => {
                let keep = if plan.literal_hard_threshold { c >= lambda_tau } else { c.abs() >= lambda_tau };
                if keep {
                    c
                } else {
                    0.0
                }
            }
            _ => panic!("p must be 0 or 1"),
        }
    };
    WaveletCoeffs {
        mode: coeffs.mode,
        levels: coeffs
            .levels
            .iter()
            .map(|b| LevelBands { lh: b.lh.map(rule), hl: b.hl.map(rule), hh: b.hh.map(rule) })
            .collect(),
        approx: coeffs.approx.clone(),
    }
}

/// The wavelet-sparsity projection: analyze, shrink the details, synthesize.
pub fn project_omega2(frame: &Frame, plan: &WaveletPlan, p: u8, lambda_tau: f64) -> Result<Frame> {
    let coeffs = dwt_forward(frame, plan)?;
    dwt_inverse(&threshold(&coeffs, p, lambda_tau, plan), plan)
}
