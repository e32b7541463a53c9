//! TOML configuration file schema. Every field is optional; CLI flags
//! override file values, which override built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use srr_core::error::{Result, SrrError};
use srr_core::harness::{Method, MotionMode, RunConfig};
use srr_core::imaging::DecimationSpec;
use srr_core::polyphase::Lambda1;
use srr_core::synth::{OutlierSpec, SyntheticSpec};
use srr_core::wavelet::WaveletMode;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub wavelet: WaveletSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub method: Option<String>,
    pub scale: Option<usize>,
    pub tap_radius: Option<usize>,
    /// "global" or "dense".
    pub motion: Option<String>,
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha: Option<f64>,
    pub alpha_t: Option<f64>,
    pub lambda_tau: Option<f64>,
    pub p: Option<u8>,
    pub iterations: Option<usize>,
    /// Schedule entries: the string "inf" or a positive number.
    pub lambda1_schedule: Option<Vec<toml::Value>>,
    pub mu: Option<f64>,
    pub baseline_iterations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub lambda_smooth: Option<f64>,
    pub pyramid_levels: Option<usize>,
    pub pyramid_spacing: Option<f64>,
    pub iterations_per_level: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletSection {
    pub levels: Option<usize>,
    /// "decimated" or "cycle_spinning".
    pub mode: Option<String>,
    pub literal_hard_threshold: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub window: Option<usize>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
    pub noise_variance: Option<f64>,
    pub outlier: Option<bool>,
    pub outlier_size: Option<usize>,
    pub outlier_onset: Option<usize>,
    pub outlier_offset: Option<usize>,
    pub source_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    /// Number of Monte Carlo seeds.
    pub seeds: Option<usize>,
    /// Base seed; seed i of the run is `seed + i`.
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| SrrError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_run_config(&self, method: Method) -> Result<RunConfig> {
        let mut rc = RunConfig::for_method(method);
        if let Some(d) = self.run.scale {
            rc.params.d = d;
        }
        if let Some(r) = self.run.tap_radius {
            rc.tap_radius = r;
        }
        if let Some(m) = &self.run.motion {
            rc.motion_mode = match m.as_str() {
                "global" => MotionMode::Global,
                "dense" => MotionMode::Dense,
                other => return Err(SrrError::Config(format!("unknown motion mode `{other}`"))),
            };
        }
        let p = &self.params;
        if let Some(v) = p.alpha {
            rc.params.alpha = v;
        }
        if let Some(v) = p.alpha_t {
            rc.params.alpha_t = v;
        }
        if let Some(v) = p.lambda_tau {
            rc.params.lambda_tau = v;
        }
        if let Some(v) = p.p {
            rc.params.p = v;
        }
        if let Some(v) = p.iterations {
            rc.params.iterations = v;
        }
        if let Some(schedule) = &p.lambda1_schedule {
            rc.params.lambda1_schedule = schedule
                .iter()
                .map(parse_lambda1)
                .collect::<Result<Vec<_>>>()?;
            rc.params.iterations = rc.params.lambda1_schedule.len();
        }
        if let Some(v) = p.mu {
            rc.params.mu = v;
        }
        if let Some(v) = p.baseline_iterations {
            rc.params.baseline_iterations = v;
        }
        let f = &self.flow;
        if let Some(v) = f.lambda_smooth {
            rc.flow.lambda_smooth = v;
        }
        if let Some(v) = f.pyramid_levels {
            rc.flow.pyramid_levels = v;
        }
        if let Some(v) = f.pyramid_spacing {
            rc.flow.pyramid_spacing = v;
        }
        if let Some(v) = f.iterations_per_level {
            rc.flow.iterations_per_level = v;
        }
        let w = &self.wavelet;
        if let Some(levels) = w.levels {
            rc.wavelet.levels = levels;
        }
        if let Some(mode) = &w.mode {
            rc.wavelet.mode = match mode.as_str() {
                "decimated" => WaveletMode::Decimated,
                "cycle_spinning" => WaveletMode::CycleSpinning,
                other => return Err(SrrError::Config(format!("unknown wavelet mode `{other}`"))),
            };
        }
        if let Some(v) = w.literal_hard_threshold {
            rc.wavelet.literal_hard_threshold = v;
        }
        rc.params.validate()?;
        Ok(rc)
    }

    pub fn to_synth_spec(&self) -> Result<SyntheticSpec> {
        let s = &self.synth;
        let mut spec = SyntheticSpec::example_one(s.frames.unwrap_or(40), s.seed.unwrap_or(1));
        if let Some(w) = s.window {
            spec.window_width = w;
            spec.window_height = w;
        }
        if let Some(v) = s.noise_variance {
            spec.noise_variance = v;
        }
        if let Some(d) = self.run.scale {
            spec.decimation = DecimationSpec::new(d)?;
        }
        if s.outlier == Some(false) {
            spec.outlier = None;
        } else if let Some(o) = spec.outlier.as_mut() {
            if let Some(v) = s.outlier_size {
                o.size = v;
            }
            if let Some(v) = s.outlier_onset {
                o.onset = v;
            }
            if let Some(v) = s.outlier_offset {
                o.offset = v;
            }
        } else if s.outlier == Some(true) {
            spec.outlier = Some(OutlierSpec {
                size: s.outlier_size.unwrap_or(128),
                value: 0.0,
                onset: s.outlier_onset.unwrap_or(32),
                offset: s.outlier_offset.unwrap_or(35),
            });
        }
        Ok(spec)
    }
}

fn parse_lambda1(v: &toml::Value) -> Result<Lambda1> {
    match v {
        toml::Value::String(s) if s == "inf" => Ok(Lambda1::Infinite),
        toml::Value::Float(f) if *f > 0.0 => Ok(Lambda1::Finite(*f)),
        toml::Value::Integer(i) if *i > 0 => Ok(Lambda1::Finite(*i as f64)),
        other => Err(SrrError::Config(format!(
            "lambda1_schedule entries must be \"inf\" or a positive number, got {other}"
        ))),
    }
}
