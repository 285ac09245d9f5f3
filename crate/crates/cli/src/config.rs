//! Declarative pipeline configuration: one flat TOML document with a section
//! per stage. Defaults match each stage's documented defaults, and a loaded
//! config round-trips save -> load without change.

use std::path::Path;

use serde::{Deserialize, Serialize};

use peakshare_core::calendar::SeasonCalendar;
use peakshare_core::classify::{FeatureSpec, TrainOptions};
use peakshare_core::spectral::SpectralConfig;
use peakshare_core::strategies::DrSimConfig;
use peakshare_core::synth::SynthConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Master seed; stage seeds derive from it.
    pub seed: u64,
    /// Output directory for every artifact.
    pub out_dir: String,
    pub synth: SynthSection,
    pub ingest: IngestSection,
    pub spectral: SpectralSection,
    pub classify: ClassifySection,
    pub wcr: WcrSection,
    pub estimate: EstimateSection,
    pub dr: DrSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            out_dir: "out".into(),
            synth: SynthSection::default(),
            ingest: IngestSection::default(),
            spectral: SpectralSection::default(),
            classify: ClassifySection::default(),
            wcr: WcrSection::default(),
            estimate: EstimateSection::default(),
            dr: DrSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_customers: usize,
    pub start_year: i32,
    pub start_month: u32,
    pub n_months: u32,
    pub archetypes: usize,
    pub scale_median_kwh: f64,
    pub scale_sigma: f64,
    pub noise_sigma: f64,
    pub day_wave_sigma: f64,
    pub label_noise: f64,
    pub observable_fraction: f64,
    pub base_load_kw: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let base = SynthConfig::default();
        SynthSection {
            n_customers: 300,
            start_year: base.start_year,
            start_month: base.start_month,
            n_months: base.n_months,
            archetypes: base.archetypes,
            scale_median_kwh: base.scale_median_kwh,
            scale_sigma: base.scale_sigma,
            noise_sigma: base.noise_sigma,
            day_wave_sigma: base.day_wave_sigma,
            label_noise: base.label_noise,
            observable_fraction: base.observable_fraction,
            base_load_kw: base.base_load_kw,
        }
    }
}

impl SynthSection {
    pub fn to_core(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            n_customers: self.n_customers,
            start_year: self.start_year,
            start_month: self.start_month,
            n_months: self.n_months,
            seed,
            archetypes: self.archetypes,
            scale_median_kwh: self.scale_median_kwh,
            scale_sigma: self.scale_sigma,
            noise_sigma: self.noise_sigma,
            day_wave_sigma: self.day_wave_sigma,
            label_noise: self.label_noise,
            observable_fraction: self.observable_fraction,
            base_load_kw: self.base_load_kw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    pub z_threshold: f64,
    pub spring_months: Vec<u32>,
    pub summer_months: Vec<u32>,
    pub autumn_months: Vec<u32>,
    pub winter_months: Vec<u32>,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            z_threshold: 5.0,
            spring_months: vec![3, 4, 5],
            summer_months: vec![6, 7, 8],
            autumn_months: vec![9, 10, 11],
            winter_months: vec![12, 1, 2],
        }
    }
}

impl IngestSection {
    pub fn calendar(&self) -> Result<SeasonCalendar, CliError> {
        SeasonCalendar::from_month_lists(
            &self.spring_months,
            &self.summer_months,
            &self.autumn_months,
            &self.winter_months,
        )
        .map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    pub phi: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub normalize_profiles: bool,
    pub dense_eigen_threshold: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl Default for SpectralSection {
    fn default() -> Self {
        let base = SpectralConfig::default();
        SpectralSection {
            phi: base.phi,
            k_min: base.k_min,
            k_max: base.k_max,
            normalize_profiles: base.normalize_profiles,
            dense_eigen_threshold: base.dense_eigen_threshold,
            kmeans_restarts: base.kmeans_restarts,
            kmeans_max_iter: base.kmeans_max_iter,
        }
    }
}

impl SpectralSection {
    pub fn to_core(&self, seed: u64) -> SpectralConfig {
        SpectralConfig {
            phi: self.phi,
            k_min: self.k_min,
            k_max: self.k_max,
            seed,
            normalize_profiles: self.normalize_profiles,
            dense_eigen_threshold: self.dense_eigen_threshold,
            kmeans_restarts: self.kmeans_restarts,
            kmeans_max_iter: self.kmeans_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub ridge_lambda: f64,
    pub bias: bool,
    pub coarse_bins: bool,
    pub k_folds: usize,
    pub irls_max_iter: usize,
    pub irls_tol: f64,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            ridge_lambda: 1e-3,
            bias: true,
            coarse_bins: false,
            k_folds: 5,
            irls_max_iter: 100,
            irls_tol: 1e-8,
        }
    }
}

impl ClassifySection {
    pub fn feature_spec(&self) -> FeatureSpec {
        FeatureSpec {
            h: 24,
            bias: self.bias,
            coarse_bins: self.coarse_bins,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            ridge_lambda: self.ridge_lambda,
            max_iter: self.irls_max_iter,
            tol: self.irls_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WcrSection {
    pub split_ratio: f64,
}

impl Default for WcrSection {
    fn default() -> Self {
        WcrSection { split_ratio: 0.8 }
    }
}

/// Feature source for estimating unobservable customers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateFeatures {
    /// Peak-timing distributions computed from the held-out meters.
    Meter,
    /// Rows of survey.csv.
    Survey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    pub features: EstimateFeatures,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection {
            features: EstimateFeatures::Meter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrSection {
    pub n_houses: usize,
    pub selection_fraction: f64,
    pub elasticity: f64,
    pub horizon_days: u32,
    pub window_hours: u32,
}

impl Default for DrSection {
    fn default() -> Self {
        let base = DrSimConfig::default();
        DrSection {
            n_houses: base.n_houses,
            selection_fraction: base.selection_fraction,
            elasticity: base.elasticity,
            horizon_days: base.horizon_days,
            window_hours: base.window_hours,
        }
    }
}

impl DrSection {
    pub fn to_core(&self) -> DrSimConfig {
        DrSimConfig {
            n_houses: self.n_houses,
            selection_fraction: self.selection_fraction,
            elasticity: self.elasticity,
            horizon_days: self.horizon_days,
            window_hours: self.window_hours,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {path:?}: {e}")))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("cannot parse config {path:?}: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Validation(format!("cannot serialize config: {e}")))?;
        std::fs::write(path, text)
            .map_err(|e| CliError::Validation(format!("cannot write config {path:?}: {e}")))
    }

    /// Canonical serialization used for the manifest's config hash.
    pub fn canonical_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("peakshare.toml");
        let config = PipelineConfig::default();
        config.save(&path).unwrap();
        let loaded = PipelineConfig::load(&path).unwrap();
        assert_eq!(config, loaded);
        loaded.save(&path).unwrap();
        let again = PipelineConfig::load(&path).unwrap();
        assert_eq!(loaded, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "seedd = 1\n").unwrap();
        assert!(PipelineConfig::load(&path).is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partial.toml");
        std::fs::write(&path, "seed = 7\n[synth]\nn_customers = 24\n").unwrap();
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.synth.n_customers, 24);
        assert_eq!(config.dr.elasticity, 0.21);
        assert_eq!(config.wcr.split_ratio, 0.8);
    }
}
