//! TOML configuration. Every field has a default, and the defaults are the
//! reference setup: 5 presets x 10 bitrates, k = 6, L = 6, R_th = 30000 kbps,
//! T_th = 11 s.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{build_operating_grid, derive_time_threshold, Budgets, OperatingGrid, Preset, DEFAULT_BITRATES_KBPS};
use crate::error::{Error, Result};
use crate::eval::SweepOptions;
use crate::pipeline::TrainingParams;
use crate::predictors::{GbdtParams, SvmParams};
use crate::rdmodel::KMeansParams;
use crate::synth::{Archetype, SynthParams};

/// Environment variable naming a config file, used when `--config` is absent.
pub const CONFIG_ENV: &str = "PRESETPLAN_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansSection {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansSection {
    fn default() -> Self {
        let d = KMeansParams::default();
        KMeansSection {
            k: d.k,
            max_iter: d.max_iter,
            tol: d.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub num_segments: usize,
    pub hard_mode: bool,
    /// Empty means every archetype, equally weighted.
    pub archetypes: Vec<Archetype>,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            num_segments: 330,
            hard_mode: false,
            archetypes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub runs: usize,
    pub rate_budgets_kbps: Vec<f64>,
    pub time_budgets_s: Vec<f64>,
    pub baseline_preset: Preset,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            runs: 877,
            rate_budgets_kbps: DEFAULT_BITRATES_KBPS.iter().map(|&b| 6.0 * f64::from(b)).collect(),
            time_budgets_s: vec![11.0, 8.0, 5.0, 3.0],
            baseline_preset: Preset::Veryfast,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data_dir: PathBuf,
    pub models: PathBuf,
    pub reports_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            data_dir: PathBuf::from("data"),
            models: PathBuf::from("models.json"),
            reports_dir: PathBuf::from("reports"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub presets: Vec<Preset>,
    pub bitrates_kbps: Vec<u32>,
    /// L, the number of segments planned together.
    pub segments_per_plan: usize,
    pub segment_duration_s: f64,
    /// Per-segment time reserved for everything but transcoding.
    pub overhead_s: f64,
    pub rate_threshold_kbps: f64,
    pub time_threshold_s: f64,
    pub seed: u64,
    pub cv_folds: usize,
    pub kmeans: KMeansSection,
    pub gbdt: GbdtParams,
    pub svm: SvmParams,
    pub synth: SynthSection,
    pub sweep: SweepSection,
    pub paths: PathsSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            presets: Preset::slowest_first(),
            bitrates_kbps: DEFAULT_BITRATES_KBPS.to_vec(),
            segments_per_plan: 6,
            segment_duration_s: 2.0,
            overhead_s: 0.04,
            rate_threshold_kbps: 30000.0,
            time_threshold_s: 11.0,
            seed: 0,
            cv_folds: 5,
            kmeans: KMeansSection::default(),
            gbdt: GbdtParams::default(),
            svm: SvmParams::default(),
            synth: SynthSection::default(),
            sweep: SweepSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `explicit` if given, else the file named by [`CONFIG_ENV`], else
    /// returns the defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let from_env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        match explicit.map(Path::to_path_buf).or(from_env) {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Config::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(Config::default()),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.grid().map_err(|e| Error::Config(e.to_string()))?;
        self.budgets().map_err(|e| Error::Config(e.to_string()))?;
        derive_time_threshold(self.segments_per_plan, self.segment_duration_s, self.overhead_s)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.kmeans.k == 0 || self.kmeans.max_iter == 0 || !(self.kmeans.tol >= 0.0) {
            return bad("kmeans needs k >= 1, max_iter >= 1 and tol >= 0".into());
        }
        let g = &self.gbdt;
        if g.max_depth == 0 || g.min_samples_leaf == 0 || g.max_bins < 2 || !(g.learning_rate > 0.0 && g.learning_rate <= 1.0) {
            return bad("gbdt needs max_depth >= 1, min_samples_leaf >= 1, max_bins >= 2 and 0 < learning_rate <= 1".into());
        }
        if !(self.svm.c > 0.0 && self.svm.tol > 0.0) || self.svm.max_passes == 0 {
            return bad("svm needs c > 0, tol > 0 and max_passes >= 1".into());
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2".into());
        }
        if self.synth.num_segments == 0 {
            return bad("synth.num_segments must be positive".into());
        }
        if self.sweep.runs == 0 {
            return bad("sweep.runs must be positive".into());
        }
        for v in self.sweep.rate_budgets_kbps.iter().chain(&self.sweep.time_budgets_s) {
            if !(*v > 0.0) {
                return bad(format!("sweep budgets must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<OperatingGrid> {
        build_operating_grid(&self.presets, &self.bitrates_kbps)
    }

    pub fn budgets(&self) -> Result<Budgets> {
        Budgets::new(self.rate_threshold_kbps, self.time_threshold_s)
    }

    pub fn training_params(&self) -> TrainingParams {
        TrainingParams {
            gbdt: self.gbdt,
            svm: self.svm,
            kmeans: KMeansParams {
                k: self.kmeans.k,
                seed: self.seed,
                max_iter: self.kmeans.max_iter,
                tol: self.kmeans.tol,
            },
            ..TrainingParams::default()
        }
    }

    pub fn synth_params(&self) -> SynthParams {
        let mut p = SynthParams::new(self.seed, self.synth.num_segments);
        if !self.synth.archetypes.is_empty() {
            p.mix = self.synth.archetypes.iter().map(|&a| (a, 1.0)).collect();
        }
        p.hard_mode = self.synth.hard_mode;
        p
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            runs: self.sweep.runs,
            seed: self.seed,
            segments_per_run: self.segments_per_plan,
            baseline_preset: self.sweep.baseline_preset,
        }
    }
}
