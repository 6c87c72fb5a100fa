use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mobimpute::evaluation::OnOffSchedule;
use mobimpute::features::FeatureConfig;
use mobimpute::imputer::Method;
use mobimpute::segmentation::SegmentationConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Plt,
}

/// Grid for the closed-form and simulated gap comparison, plus the
/// distance-bias experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticRun {
    pub ns: Vec<usize>,
    pub thetas: Vec<f64>,
    pub d: f64,
    pub sigma2: f64,
    pub reps: usize,
    pub semicircle_n: usize,
    pub semicircle_theta0: f64,
    pub semicircle_d: f64,
    pub jitters: Vec<f64>,
    pub missing_grid: Vec<f64>,
    pub blocks: usize,
    pub step_s: f64,
}

impl Default for AnalyticRun {
    fn default() -> Self {
        AnalyticRun {
            ns: vec![50, 200, 800],
            thetas: vec![0.0, FRAC_PI_4, FRAC_PI_2],
            d: 1.0,
            sigma2: 1.0,
            reps: 1000,
            semicircle_n: 240,
            semicircle_theta0: FRAC_PI_2,
            semicircle_d: 10_000.0,
            jitters: vec![0.0, 10.0, 40.0],
            missing_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            blocks: 8,
            step_s: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub format: InputFormat,
    /// `LI`, `TL`, `GL`, `GLC` or `UNIFORM`.
    pub kernel: String,
    pub nu: f64,
    pub scale_mult: f64,
    /// Methods scored by `evaluate`.
    pub methods: Vec<String>,
    pub segmentation: SegmentationConfig,
    pub features: FeatureConfig,
    pub schedule: OnOffSchedule,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Local time offset from UTC for day boundaries, seconds. Overrides
    /// `features.utc_offset_s` when set.
    pub utc_offset_s: Option<f64>,
    /// Drop fixes reporting a worse accuracy than this, meters.
    pub max_accuracy_m: Option<f64>,
    pub unscheduled_tolerance_s: f64,
    pub analytic: AnalyticRun,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            format: InputFormat::Csv,
            kernel: "TL".into(),
            nu: 1.0,
            scale_mult: 1.0,
            methods: vec!["LI".into(), "TL".into(), "GL".into(), "GLC".into()],
            segmentation: SegmentationConfig::default(),
            features: FeatureConfig::default(),
            schedule: OnOffSchedule { on_s: 120.0, off_s: 600.0, phase_s: 0.0 },
            replicates: 100,
            alpha: 0.05,
            seed: 0,
            out: PathBuf::from("out"),
            utc_offset_s: None,
            max_accuracy_m: None,
            unscheduled_tolerance_s: 60.0,
            analytic: AnalyticRun::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        self.schedule.validated()?;
        self.method()?;
        for m in &self.methods {
            Method::parse(m, self.nu, self.scale_mult)?;
        }
        Ok(())
    }

    pub fn method(&self) -> Result<Method> {
        Ok(Method::parse(&self.kernel, self.nu, self.scale_mult)?)
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig { utc_offset_s: self.utc_offset_s.unwrap_or(self.features.utc_offset_s), ..self.features }
    }
}
