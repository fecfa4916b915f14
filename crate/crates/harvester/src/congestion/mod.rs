//! Segmentation of road pixels into the five-level congestion color code
//! (CCC) and per-ROI ordinal observations.
//!
//! Ordinal mapping, most to least congested: maroon = 1, red = 2,
//! orange = 3, green = 4, gray = 5.

mod roi;

pub use roi::{rasterize_roi, RoadSegmentRoi, SitesFile};

use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo_grid::GridSpec;
use crate::mosaic::Mosaic;

/// The five congestion colors in ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CongestionColor {
    Maroon,
    Red,
    Orange,
    Green,
    Gray,
}

pub const ALL_COLORS: [CongestionColor; 5] = [
    CongestionColor::Maroon,
    CongestionColor::Red,
    CongestionColor::Orange,
    CongestionColor::Green,
    CongestionColor::Gray,
];

impl CongestionColor {
    /// Ordinal congestion color code, 1 (most congested) to 5.
    pub fn ccc(self) -> u8 {
        match self {
            CongestionColor::Maroon => 1,
            CongestionColor::Red => 2,
            CongestionColor::Orange => 3,
            CongestionColor::Green => 4,
            CongestionColor::Gray => 5,
        }
    }

    pub fn from_ccc(ccc: u8) -> Option<Self> {
        ALL_COLORS.get(ccc.checked_sub(1)? as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            CongestionColor::Maroon => "maroon",
            CongestionColor::Red => "red",
            CongestionColor::Orange => "orange",
            CongestionColor::Green => "green",
            CongestionColor::Gray => "gray",
        }
    }
}

impl fmt::Display for CongestionColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Reference colors plus the match threshold and minimum classified
/// fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionPalette {
    /// Reference RGB per color, in ordinal order maroon..gray.
    pub colors: [[u8; 3]; 5],
    /// Maximum Euclidean RGB distance for a pixel to match a reference.
    pub tau: f64,
    /// Minimum fraction of ROI pixels that must match for an observation.
    pub f_min: f64,
    /// Where the reference colors came from; the defaults are sampled from
    /// synthetic legend tiles, not published values.
    #[serde(default)]
    pub provenance: String,
}

impl Default for CongestionPalette {
    fn default() -> Self {
        CongestionPalette {
            colors: [
                [80, 0, 40],     // maroon
                [220, 40, 30],   // red
                [255, 170, 60],  // orange
                [70, 190, 80],   // green
                [200, 200, 200], // gray
            ],
            tau: 60.0,
            f_min: 0.05,
            provenance: "sampled from synthetic legend tiles; not published reference values"
                .into(),
        }
    }
}

fn rgb_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    let d = |x: u8, y: u8| {
        let v = f64::from(x) - f64::from(y);
        v * v
    };
    (d(a[0], b[0]) + d(a[1], b[1]) + d(a[2], b[2])).sqrt()
}

impl CongestionPalette {
    /// Separability: every pair of reference colors must be more than
    /// 2 * tau apart so no pixel can match two references.
    pub fn validate(&self) -> Result<()> {
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::domain("tau", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.f_min) {
            return Err(Error::domain("f_min", "must be in [0, 1]"));
        }
        for (a, &ca) in self.colors.iter().enumerate() {
            for (b, &cb) in self.colors.iter().enumerate().skip(a + 1) {
                let d = rgb_distance(ca, cb);
                if d <= 2.0 * self.tau {
                    return Err(Error::domain(
                        "palette",
                        format!(
                            "{} and {} are {d:.1} apart, <= 2*tau = {}",
                            ALL_COLORS[a],
                            ALL_COLORS[b],
                            2.0 * self.tau
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn reference(&self, color: CongestionColor) -> [u8; 3] {
        self.colors[color.ccc() as usize - 1]
    }

    /// Nearest reference color within tau, or None for unmatched pixels.
    pub fn classify_pixel(&self, rgb: [u8; 3]) -> Option<CongestionColor> {
        let mut best: Option<(f64, CongestionColor)> = None;
        for color in ALL_COLORS {
            let d = rgb_distance(rgb, self.reference(color));
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, color));
            }
        }
        best.filter(|&(d, _)| d <= self.tau).map(|(_, c)| c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p: CongestionPalette = serde_json::from_str(&fs::read_to_string(path)?)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// One (timestamp, site, segment) CCC observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CccObservation {
    pub timestamp: NaiveDateTime,
    pub site_id: String,
    pub segment_id: String,
    /// Ordinal CCC 1..=5, or None when too few pixels matched.
    pub ccc: Option<u8>,
    /// Fraction of ROI pixels that matched some reference color.
    pub classified_fraction: f64,
    /// Matched-pixel counts per color, ordinal order.
    pub votes: [u32; 5],
    /// Pixels matching no reference color.
    pub unmatched: u32,
}

/// Classify every ROI over one mosaic. Plurality vote among matched
/// pixels; ties break toward the lower (more congested) code.
pub fn extract_ccc(
    mosaic: &Mosaic,
    rois: &[RoadSegmentRoi],
    palette: &CongestionPalette,
) -> Result<Vec<CccObservation>> {
    palette.validate()?;
    let timestamp = mosaic.timestamp.unwrap_or_default();
    let mut out = Vec::with_capacity(rois.len());
    for roi in rois {
        let pixels = rasterize_roi(roi, &mosaic.spec)?;
        out.push(observe_roi(mosaic, roi, &pixels, palette, timestamp));
    }
    Ok(out)
}

fn observe_roi(
    mosaic: &Mosaic,
    roi: &RoadSegmentRoi,
    pixels: &[(u32, u32)],
    palette: &CongestionPalette,
    timestamp: NaiveDateTime,
) -> CccObservation {
    let mut votes = [0u32; 5];
    let mut unmatched = 0u32;
    for &(row, col) in pixels {
        let p = mosaic.pixels.get_pixel(col, row).0;
        match palette.classify_pixel(p) {
            Some(c) => votes[c.ccc() as usize - 1] += 1,
            None => unmatched += 1,
        }
    }
    let total = pixels.len() as u32;
    let matched: u32 = votes.iter().sum();
    let classified_fraction = if total == 0 {
        0.0
    } else {
        f64::from(matched) / f64::from(total)
    };
    // plurality; scanning in ordinal order makes ties resolve toward the
    // more congested code
    let ccc = if classified_fraction >= palette.f_min && matched > 0 {
        let mut best = 0usize;
        for k in 1..5 {
            if votes[k] > votes[best] {
                best = k;
            }
        }
        Some(best as u8 + 1)
    } else {
        None
    };
    CccObservation {
        timestamp,
        site_id: roi.site_id.clone(),
        segment_id: roi.segment_id.clone(),
        ccc,
        classified_fraction,
        votes,
        unmatched,
    }
}

/// Validate that every ROI rasterizes inside the grid.
pub fn validate_rois(rois: &[RoadSegmentRoi], spec: &GridSpec) -> Result<()> {
    for roi in rois {
        rasterize_roi(roi, spec)?;
    }
    Ok(())
}
