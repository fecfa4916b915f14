//! Top-level JSON configuration tying a grid, provider, archive, sites file
//! and study design together, with cross-field validation.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::analytics::StudyDesign;
use crate::congestion::{validate_rois, CongestionPalette, RoadSegmentRoi, SitesFile};
use crate::error::{Error, Result};
use crate::geo_grid::GridSpec;
use crate::acquisition::ProviderConfig;

/// Capture cadence settings for the daemon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Hours between captures.
    pub interval_h: u32,
    /// Tick lattice origin; captures fire at `anchor + k * interval_h`.
    /// Defaults to the study baseline start.
    #[serde(default)]
    pub anchor: Option<NaiveDateTime>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            interval_h: 3,
            anchor: None,
        }
    }
}

/// Full pipeline configuration. Relative paths inside the file are
/// resolved against the config file's directory on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub grid: GridSpec,
    pub provider: ProviderConfig,
    /// Directory receiving captured tiles.
    pub archive_root: PathBuf,
    /// Replace `:` with `-` in archive filenames (portable default).
    #[serde(default = "default_true")]
    pub safe_names: bool,
    /// Road-segment polygons; required by `extract` and downstream steps.
    #[serde(default)]
    pub sites_file: Option<PathBuf>,
    /// Palette JSON overriding the built-in reference palette.
    #[serde(default)]
    pub palette_file: Option<PathBuf>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub study: StudyDesign,
    /// Directory for mosaics, CSV reports and plots.
    pub output_dir: PathBuf,
}

fn default_true() -> bool {
    true
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Config = serde_json::from_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.archive_root, &mut self.output_dir] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        for p in [
            &mut self.sites_file,
            &mut self.palette_file,
            &mut self.provider.scenario_file,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.provider.validate()?;
        self.study.validate()?;
        if self.schedule.interval_h == 0 {
            return Err(Error::domain("schedule.interval_h", "must be > 0"));
        }
        if self.schedule.interval_h != self.study.cadence_h {
            return Err(Error::domain(
                "schedule.interval_h",
                format!(
                    "capture interval ({} h) must match the study cadence ({} h)",
                    self.schedule.interval_h, self.study.cadence_h
                ),
            ));
        }
        self.palette()?.validate()?;
        if self.sites_file.is_some() {
            validate_rois(&self.rois()?, &self.grid)?;
        }
        Ok(())
    }

    /// Tick lattice origin for the daemon.
    pub fn anchor(&self) -> NaiveDateTime {
        self.schedule.anchor.unwrap_or(self.study.baseline_start)
    }

    /// The configured palette, or the built-in reference palette.
    pub fn palette(&self) -> Result<CongestionPalette> {
        match &self.palette_file {
            Some(p) => CongestionPalette::load(p),
            None => Ok(CongestionPalette::default()),
        }
    }

    /// Road-segment regions of interest from the sites file.
    pub fn rois(&self) -> Result<Vec<RoadSegmentRoi>> {
        let path = self.sites_file.as_ref().ok_or_else(|| {
            Error::Config("this step needs road segments; set sites_file".into())
        })?;
        SitesFile::load(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_grid::nyc_example_spec;
    use crate::synthmap::{demo_design, demo_scenario};

    fn base_config() -> Config {
        Config {
            grid: nyc_example_spec(),
            provider: ProviderConfig::synthetic("scenario.json"),
            archive_root: "archive".into(),
            safe_names: true,
            sites_file: None,
            palette_file: None,
            schedule: ScheduleConfig::default(),
            study: demo_design(),
            output_dir: "out".into(),
        }
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = base_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: Config = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn relative_paths_resolve_against_the_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        base_config().save(&path).unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.archive_root, dir.path().join("archive"));
        assert_eq!(
            cfg.provider.scenario_file.as_deref(),
            Some(dir.path().join("scenario.json").as_path())
        );
    }

    #[test]
    fn cadence_mismatch_is_rejected() {
        let mut cfg = base_config();
        cfg.schedule.interval_h = 2;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("cadence"), "{err}");
    }

    #[test]
    fn defaults_fill_in_missing_fields() {
        let text = serde_json::json!({
            "grid": nyc_example_spec(),
            "provider": ProviderConfig::synthetic("s.json"),
            "archive_root": "a",
            "study": demo_design(),
            "output_dir": "o",
        })
        .to_string();
        let cfg: Config = serde_json::from_str(&text).unwrap();
        assert!(cfg.safe_names);
        assert_eq!(cfg.schedule.interval_h, 3);
        assert_eq!(cfg.anchor(), cfg.study.baseline_start);
    }

    #[test]
    fn out_of_bounds_roi_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = demo_scenario();
        let rois = vec![RoadSegmentRoi {
            site_id: "x".into(),
            segment_id: "y".into(),
            description: String::new(),
            polygon: vec![
                crate::geo_grid::GeoPoint::new(10.0, 10.0).unwrap(),
                crate::geo_grid::GeoPoint::new(10.0, 10.01).unwrap(),
                crate::geo_grid::GeoPoint::new(10.01, 10.0).unwrap(),
            ],
        }];
        let sites_path = dir.path().join("sites.json");
        SitesFile::save(&sites_path, &rois).unwrap();
        let mut cfg = base_config();
        cfg.grid = scenario.grid.clone();
        cfg.sites_file = Some(sites_path);
        assert!(cfg.validate().is_err());
    }
}
