//! Experiment orchestration: run a reconstruction method over a sequence,
//! score it against ground truth, and drive Monte Carlo protocols over seeds
//! with machine-readable, reproducible reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::{cache_load, cache_store};
use crate::design::{build_cache, DesignSpec, InverseFilterbankCache, DEFAULT_RIDGE_EPS};
use crate::engine::{ltsr_step, mtsr_step, wmtsr_step, SrrParams, SrrState};
use crate::error::{Result, SrrError};
use crate::frame::Frame;
use crate::imaging::{bicubic_upsample, MotionEstimate};
use crate::metrics::FrameMetrics;
use crate::motion::{estimate_dense_flow, estimate_global_shift, FlowParams};
use crate::polyphase::Lambda1;
use crate::synth::{generate_synthetic, SyntheticSpec};
use crate::wavelet::WaveletPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bicubic,
    Ltsr,
    Mtsr,
    Wmtsr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bicubic => "bicubic",
            Method::Ltsr => "ltsr",
            Method::Mtsr => "mtsr",
            Method::Wmtsr => "wmtsr",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "bicubic" => Ok(Method::Bicubic),
            "ltsr" => Ok(Method::Ltsr),
            "mtsr" => Ok(Method::Mtsr),
            "wmtsr" => Ok(Method::Wmtsr),
            other => Err(SrrError::Config(format!("unknown method `{other}`"))),
        }
    }

    /// Reference parameters for this method.
    pub fn default_params(self) -> SrrParams {
        match self {
            Method::Bicubic | Method::Mtsr => SrrParams::mtsr_defaults(),
            Method::Ltsr => SrrParams::ltsr_defaults(),
            Method::Wmtsr => SrrParams::wmtsr_defaults(),
        }
    }
}

/// How inter-frame motion is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionMode {
    /// Phase-correlation global shift (default; matches the synthetic
    /// protocol's global displacements).
    Global,
    /// Coarse-to-fine dense optical flow.
    Dense,
}

/// Everything a reconstruction run needs besides the frames themselves.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub params: SrrParams,
    pub flow: FlowParams,
    pub motion_mode: MotionMode,
    pub wavelet: WaveletPlan,
    pub tap_radius: usize,
}

impl RunConfig {
    pub fn for_method(method: Method) -> Self {
        Self {
            method,
            params: method.default_params(),
            flow: FlowParams::default(),
            motion_mode: MotionMode::Dense,
            wavelet: WaveletPlan::default_cycle_spinning(),
            tap_radius: 7,
        }
    }

    /// The design spec implied by this run. The filterbank system absorbs
    /// both regularization weights, so the solver method's cache is keyed by
    /// `alpha + alpha_t`.
    pub fn design_spec(&self) -> DesignSpec {
        DesignSpec {
            tap_radius: self.tap_radius,
            lambda1_values: if self.params.lambda1_schedule.is_empty() {
                vec![Lambda1::Infinite]
            } else {
                let mut v: Vec<Lambda1> = self.params.lambda1_schedule.clone();
                v.dedup();
                v
            },
            alpha_t: self.params.alpha + self.params.alpha_t,
            h: self.params.h.clone(),
            s: self.params.s.clone(),
            d: self.params.d,
            ridge_eps: DEFAULT_RIDGE_EPS,
        }
    }

    /// Load the design cache from `path` if present and fresh, else build it
    /// (and store it when a path is given).
    pub fn obtain_cache(&self, path: Option<&Path>) -> Result<InverseFilterbankCache> {
        let spec = self.design_spec();
        if let Some(p) = path {
            if p.exists() {
                return cache_load(p, &spec);
            }
        }
        let cache = build_cache(&spec)?;
        if let Some(p) = path {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir)?;
            }
            cache_store(p, &cache)?;
        }
        Ok(cache)
    }
}

fn estimate_motion(prev: &Frame, curr: &Frame, config: &RunConfig) -> Result<MotionEstimate> {
    match config.motion_mode {
        MotionMode::Global => estimate_global_shift(prev, curr),
        MotionMode::Dense => estimate_dense_flow(prev, curr, &config.flow),
    }
}

/// Reconstruct a whole LR sequence with the configured method. Motion is
/// estimated between consecutive LR observations.
pub fn run_sequence(
    config: &RunConfig,
    cache: &InverseFilterbankCache,
    lr: &[Frame],
) -> Result<Vec<Frame>> {
    if lr.is_empty() {
        return Err(SrrError::Config("empty input sequence".into()));
    }
    if config.method == Method::Bicubic {
        return Ok(lr.iter().map(|y| bicubic_upsample(y, config.params.d)).collect());
    }
    let mut state = SrrState::new(config.params.clone(), cache.clone(), config.wavelet)?;
    let mut out = Vec::with_capacity(lr.len());
    for (k, y) in lr.iter().enumerate() {
        let motion = if k == 0 {
            MotionEstimate::zero()
        } else {
            estimate_motion(&lr[k - 1], y, config)?
        };
        let x = match config.method {
            Method::Mtsr => mtsr_step(&mut state, y, &motion)?,
            Method::Wmtsr => wmtsr_step(&mut state, y, &motion)?,
            Method::Ltsr => ltsr_step(&mut state, y, &motion)?,
            Method::Bicubic => unreachable!(),
        };
        out.push(x);
    }
    Ok(out)
}

/// Score a reconstruction against ground truth, frame by frame.
pub fn evaluate_sequence(reference: &[Frame], test: &[Frame]) -> Result<Vec<FrameMetrics>> {
    if reference.len() != test.len() {
        return Err(SrrError::Dimension(format!(
            "sequence length mismatch: {} vs {}",
            reference.len(),
            test.len()
        )));
    }
    reference
        .iter()
        .zip(test)
        .map(|(r, t)| FrameMetrics::compute(r, t))
        .collect()
}

/// Per-method results of one Monte Carlo experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Mean linear MSE per frame index, averaged over seeds.
    pub mse_trajectory: Vec<f64>,
    /// Mean PSNR per frame index (finite frames only contribute; identical
    /// frames propagate as `null` in JSON).
    pub psnr_trajectory: Vec<f64>,
    /// Mean SSIM per frame index.
    pub ssim_trajectory: Vec<f64>,
    /// Grand mean of the per-frame MSE means.
    pub mean_mse: f64,
    /// Wall-clock seconds spent inside reconstruction, summed over seeds.
    /// Excluded from report byte-identity requirements; see `strip_timings`.
    pub seconds: f64,
}

/// A full experiment report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seeds: Vec<u64>,
    pub frame_count: usize,
    pub methods: Vec<MethodReport>,
}

impl ExperimentReport {
    /// Serialize to JSON with timings zeroed, so identical configurations
    /// and seeds produce byte-identical bytes.
    pub fn to_deterministic_json(&self) -> String {
        let mut copy = self.clone();
        for m in &mut copy.methods {
            m.seconds = 0.0;
        }
        serde_json::to_string_pretty(&copy).expect("report serialization")
    }

    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Run `methods` over the synthetic protocol for every seed and aggregate.
///
/// `synth.rng_seed` is overridden by each seed in `seeds`. The source image
/// is regenerated per seed so sequences differ in content as well as noise.
pub fn run_experiment(
    methods: &[Method],
    configs: &[RunConfig],
    caches: &[InverseFilterbankCache],
    synth: &SyntheticSpec,
    source: &Frame,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if methods.len() != configs.len() || methods.len() != caches.len() {
        return Err(SrrError::Config("methods, configs and caches must align".into()));
    }
    if seeds.is_empty() {
        return Err(SrrError::Config("at least one seed required".into()));
    }
    let n = synth.frame_count;
    let mut sums = vec![vec![(0.0f64, 0.0f64, 0.0f64); n]; methods.len()];
    let mut seconds = vec![0.0f64; methods.len()];

    for &seed in seeds {
        let mut spec = synth.clone();
        spec.rng_seed = seed;
        let seq = generate_synthetic(&spec, source)?;
        for (mi, config) in configs.iter().enumerate() {
            let t0 = std::time::Instant::now();
            let recon = run_sequence(config, &caches[mi], &seq.lr)?;
            seconds[mi] += t0.elapsed().as_secs_f64();
            let metrics = evaluate_sequence(&seq.hr, &recon)?;
            for (k, m) in metrics.iter().enumerate() {
                sums[mi][k].0 += m.mse;
                sums[mi][k].1 += m.psnr;
                sums[mi][k].2 += m.ssim;
            }
        }
    }

    let count = seeds.len() as f64;
    let methods_out = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let mse: Vec<f64> = sums[mi].iter().map(|s| s.0 / count).collect();
            let psnr: Vec<f64> = sums[mi].iter().map(|s| s.1 / count).collect();
            let ssim: Vec<f64> = sums[mi].iter().map(|s| s.2 / count).collect();
            let mean_mse = mse.iter().sum::<f64>() / mse.len() as f64;
            MethodReport {
                method,
                mse_trajectory: mse,
                psnr_trajectory: psnr,
                ssim_trajectory: ssim,
                mean_mse,
                seconds: seconds[mi],
            }
        })
        .collect();
    Ok(ExperimentReport { seeds: seeds.to_vec(), frame_count: n, methods: methods_out })
}
