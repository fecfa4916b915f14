//! Road-segment regions of interest: lat/long polygons rasterized onto
//! mosaic pixel coordinates with a scanline fill.

use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo_grid::{GeoPoint, GridSpec};

/// A polygon over one road segment, keyed by site and segment (for two-way
/// roads the two directions are separate segments of the same site).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegmentRoi {
    pub site_id: String,
    pub segment_id: String,
    #[serde(default)]
    pub description: String,
    /// At least three lat/long vertices; must be simple.
    pub polygon: Vec<GeoPoint>,
}

impl RoadSegmentRoi {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Roi {
            site_id: self.site_id.clone(),
            segment_id: self.segment_id.clone(),
            msg: msg.into(),
        }
    }
}

/// Mosaic pixels whose centers fall inside the polygon, sorted (row, col).
///
/// Even-odd scanline fill over the continuous pixel coordinates: pixel
/// (r, c) has its center at (r + 0.5, c + 0.5).
pub fn rasterize_roi(roi: &RoadSegmentRoi, spec: &GridSpec) -> Result<Vec<(u32, u32)>> {
    if roi.polygon.len() < 3 {
        return Err(roi.err("polygon needs at least 3 vertices"));
    }
    let (n_rows, n_cols) = spec.mosaic_dims();
    let mut verts = Vec::with_capacity(roi.polygon.len());
    for p in &roi.polygon {
        let (row, col) = spec.latlong_to_fractional_pixel(*p)?;
        if row < 0.0 || col < 0.0 || row > f64::from(n_rows) || col > f64::from(n_cols) {
            return Err(roi.err(format!(
                "vertex ({}, {}) outside grid (fractional row {row:.2}, col {col:.2})",
                p.lat_deg, p.long_deg
            )));
        }
        verts.push((row, col));
    }

    let row_min = verts.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let row_max = verts.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let first_row = row_min.floor().max(0.0) as u32;
    let last_row = (row_max.ceil() as u32).min(n_rows.saturating_sub(1));

    let mut out = Vec::new();
    let mut crossings: Vec<f64> = Vec::new();
    for r in first_row..=last_row {
        let y = f64::from(r) + 0.5;
        crossings.clear();
        for k in 0..verts.len() {
            let (y0, x0) = verts[k];
            let (y1, x1) = verts[(k + 1) % verts.len()];
            if (y0 <= y && y < y1) || (y1 <= y && y < y0) {
                crossings.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in crossings.chunks(2) {
            let [xa, xb] = pair else { continue };
            // pixel centers strictly between the crossing pair
            let c0 = (xa - 0.5).ceil().max(0.0) as u32;
            let c1 = (xb - 0.5).floor() as i64;
            for c in c0 as i64..=c1.min(i64::from(n_cols) - 1) {
                let x = c as f64 + 0.5;
                if *xa < x && x < *xb {
                    out.push((r, c as u32));
                }
            }
        }
    }
    if out.is_empty() {
        warn!(
            "ROI {}/{} rasterized to an empty pixel set (degenerate sliver?)",
            roi.site_id, roi.segment_id
        );
    }
    Ok(out)
}

/// JSON file of sites and their segment polygons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SitesFile {
    pub version: u32,
    pub sites: Vec<SiteEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteEntry {
    pub site_id: String,
    pub segments: Vec<SegmentEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub segment_id: String,
    #[serde(default)]
    pub description: String,
    /// [lat, long] vertex pairs.
    pub polygon: Vec<[f64; 2]>,
}

impl SitesFile {
    pub fn load(path: &Path) -> Result<Vec<RoadSegmentRoi>> {
        let file: SitesFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(file.into_rois())
    }

    pub fn into_rois(self) -> Vec<RoadSegmentRoi> {
        let mut out = Vec::new();
        for site in self.sites {
            for seg in site.segments {
                out.push(RoadSegmentRoi {
                    site_id: site.site_id.clone(),
                    segment_id: seg.segment_id,
                    description: seg.description,
                    polygon: seg
                        .polygon
                        .iter()
                        .map(|&[lat_deg, long_deg]| GeoPoint { lat_deg, long_deg })
                        .collect(),
                });
            }
        }
        out
    }

    pub fn from_rois(rois: &[RoadSegmentRoi]) -> Self {
        let mut sites: Vec<SiteEntry> = Vec::new();
        for roi in rois {
            let seg = SegmentEntry {
                segment_id: roi.segment_id.clone(),
                description: roi.description.clone(),
                polygon: roi
                    .polygon
                    .iter()
                    .map(|p| [p.lat_deg, p.long_deg])
                    .collect(),
            };
            match sites.iter_mut().find(|s| s.site_id == roi.site_id) {
                Some(site) => site.segments.push(seg),
                None => sites.push(SiteEntry {
                    site_id: roi.site_id.clone(),
                    segments: vec![seg],
                }),
            }
        }
        SitesFile { version: 1, sites }
    }

    pub fn save(path: &Path, rois: &[RoadSegmentRoi]) -> Result<()> {
        fs::write(
            path,
            serde_json::to_string_pretty(&Self::from_rois(rois))?,
        )?;
        Ok(())
    }
}
