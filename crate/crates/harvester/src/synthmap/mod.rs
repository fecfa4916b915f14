//! Deterministic synthetic tile renderer and scenario generator.
//!
//! Renders map-like tiles containing scripted road segments whose colors
//! follow a declared schedule; doubles as the offline test oracle for the
//! whole pipeline. Rendering is a pure function of (scenario, tile center,
//! zoom, timestamp).

pub mod http;

pub use http::SynthServer;

use std::fs;
use std::io::Cursor;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::congestion::{CccObservation, CongestionColor, CongestionPalette, RoadSegmentRoi};
use crate::error::{Error, Result};
use crate::geo_grid::{GeoPoint, GridSpec, TileDescriptor};
use crate::tile_archive::{truncate_to_minute, ArchiveHandle};

/// A scripted road: a polyline with a pixel width and a step-function color
/// schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub site_id: String,
    pub segment_id: String,
    /// Polyline vertices in lat/long.
    pub path: Vec<GeoPoint>,
    /// Stroke width in mosaic pixels.
    pub width_px: f64,
    /// Step function: each entry holds from its timestamp until the next.
    pub schedule: Vec<ScheduleEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub at: NaiveDateTime,
    pub color: CongestionColor,
}

impl RoadSpec {
    /// Scheduled color at a timestamp; timestamps before the first entry
    /// clamp to the first.
    pub fn color_at(&self, t: NaiveDateTime) -> Option<CongestionColor> {
        if self.schedule.is_empty() {
            return None;
        }
        let mut current = self.schedule[0].color;
        for entry in &self.schedule {
            if entry.at <= t {
                current = entry.color;
            } else {
                break;
            }
        }
        Some(current)
    }
}

/// A complete synthetic study: grid, roads, capture cadence and span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub grid: GridSpec,
    /// Map background color; must sit outside the palette.
    pub background: [u8; 3],
    pub roads: Vec<RoadSpec>,
    /// First capture timestamp.
    pub start: NaiveDateTime,
    /// Capture cadence, hours.
    pub cadence_h: u32,
    /// Total number of captures.
    pub captures: u32,
    /// Render soft road edges (exercises the classifier threshold).
    #[serde(default)]
    pub antialias: bool,
    /// Reference colors the roads are painted in.
    #[serde(default)]
    pub palette: CongestionPalette,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.palette.validate()?;
        if self.cadence_h == 0 {
            return Err(Error::domain("cadence_h", "must be > 0"));
        }
        if self.captures == 0 {
            return Err(Error::domain("captures", "must be > 0"));
        }
        for road in &self.roads {
            if road.path.len() < 2 {
                return Err(Error::domain("roads", "road path needs >= 2 vertices"));
            }
            if road.schedule.is_empty() {
                return Err(Error::domain("roads", "road schedule must not be empty"));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Scenario = serde_json::from_str(&fs::read_to_string(path)?)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn capture_times(&self) -> Vec<NaiveDateTime> {
        (0..self.captures)
            .map(|k| self.start + Duration::hours(i64::from(k) * i64::from(self.cadence_h)))
            .collect()
    }

    /// Render one tile as PNG bytes.
    pub fn render_tile(&self, tile: &TileDescriptor, t: NaiveDateTime) -> Result<Vec<u8>> {
        let raster = self.render_tile_raster(tile, t)?;
        let mut bytes = Vec::new();
        image::DynamicImage::ImageRgb8(raster)
            .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)?;
        Ok(bytes)
    }

    pub fn render_tile_raster(&self, tile: &TileDescriptor, t: NaiveDateTime) -> Result<RgbImage> {
        self.validate()?;
        let n_pix = tile.n_pix;
        let spans = self.grid.angular_spans()?;

        // global fractional pixel coordinates of this tile's NW corner; the
        // same global geometry is shared by all tiles so seams line up
        let nw = GeoPoint {
            lat_deg: tile.center.lat_deg + spans.d_lat_deg / 2.0,
            long_deg: tile.center.long_deg - spans.d_long_deg / 2.0,
        };
        let (row_off, col_off) = self.grid.latlong_to_fractional_pixel(nw)?;

        let mut img = RgbImage::new(n_pix, n_pix);
        for (x, y, p) in img.enumerate_pixels_mut() {
            let gr = (row_off + f64::from(y)).round() as i64;
            let gc = (col_off + f64::from(x)).round() as i64;
            *p = Rgb(background_pixel(self.seed, gr, gc, self.background));
        }

        for road in &self.roads {
            let Some(color) = road.color_at(t) else { continue };
            let rgb = self.palette.reference(color);
            let verts: Vec<(f64, f64)> = road
                .path
                .iter()
                .map(|p| self.grid.latlong_to_fractional_pixel(*p))
                .collect::<Result<_>>()?;
            for seg in verts.windows(2) {
                let a = (seg[0].0 - row_off, seg[0].1 - col_off);
                let b = (seg[1].0 - row_off, seg[1].1 - col_off);
                draw_thick_segment(
                    &mut img,
                    a,
                    b,
                    road.width_px / 2.0,
                    Rgb(rgb),
                    self.antialias,
                );
            }
        }
        Ok(img)
    }

    /// Ground-truth observations the pipeline should recover: one row per
    /// capture and road, straight from the schedule.
    pub fn ground_truth(&self) -> Vec<CccObservation> {
        let mut out = Vec::new();
        for t in self.capture_times() {
            let t = truncate_to_minute(t);
            for road in &self.roads {
                let ccc = road.color_at(t).map(CongestionColor::ccc);
                out.push(CccObservation {
                    timestamp: t,
                    site_id: road.site_id.clone(),
                    segment_id: road.segment_id.clone(),
                    ccc,
                    classified_fraction: if ccc.is_some() { 1.0 } else { 0.0 },
                    votes: [0; 5],
                    unmatched: 0,
                });
            }
        }
        out
    }

    /// Render and archive every capture of the study. Returns the ground
    /// truth series.
    pub fn generate_study(&self, archive: &mut ArchiveHandle) -> Result<Vec<CccObservation>> {
        self.validate()?;
        let plan = self.grid.plan()?;
        for t in self.capture_times() {
            for tile in &plan {
                let png = self.render_tile(tile, t)?;
                archive.write_tile(tile.i, tile.j, t, &png)?;
            }
        }
        Ok(self.ground_truth())
    }

    /// Snug rectangular ROIs inside each road's first segment stroke, for
    /// exact-recovery checks.
    pub fn interior_rois(&self) -> Result<Vec<RoadSegmentRoi>> {
        let mut out = Vec::new();
        for road in &self.roads {
            let a = self.grid.latlong_to_fractional_pixel(road.path[0])?;
            let b = self.grid.latlong_to_fractional_pixel(road.path[1])?;
            // inset 20% from each end, 1.5 px inside the stroke edge
            let t0 = 0.2;
            let t1 = 0.8;
            let p0 = (a.0 + (b.0 - a.0) * t0, a.1 + (b.1 - a.1) * t0);
            let p1 = (a.0 + (b.0 - a.0) * t1, a.1 + (b.1 - a.1) * t1);
            let len = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
            let half = (road.width_px / 2.0 - 1.5).max(0.5);
            // unit normal to the segment
            let n = (-((p1.1 - p0.1) / len), (p1.0 - p0.0) / len);
            let corners = [
                (p0.0 + n.0 * half, p0.1 + n.1 * half),
                (p1.0 + n.0 * half, p1.1 + n.1 * half),
                (p1.0 - n.0 * half, p1.1 - n.1 * half),
                (p0.0 - n.0 * half, p0.1 - n.1 * half),
            ];
            let polygon = corners
                .iter()
                .map(|&(r, c)| self.grid.mosaic_pixel_to_latlong(r, c))
                .collect::<Result<Vec<_>>>()?;
            out.push(RoadSegmentRoi {
                site_id: road.site_id.clone(),
                segment_id: road.segment_id.clone(),
                description: "interior of synthetic road stroke".into(),
                polygon,
            });
        }
        Ok(out)
    }
}

fn background_pixel(seed: u64, gr: i64, gc: i64, base: [u8; 3]) -> [u8; 3] {
    // deterministic speckle, kept close to the background so it never
    // enters the palette's match radius
    let mut h = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(gr as u64)
        .wrapping_mul(0xbf58_476d_1ce4_e5b9)
        .wrapping_add(gc as u64);
    h ^= h >> 31;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    if h.is_multiple_of(97) {
        let d = ((h >> 8) % 7) as u8;
        [
            base[0].saturating_sub(d),
            base[1].saturating_sub(d),
            base[2].saturating_sub(d),
        ]
    } else {
        base
    }
}

fn draw_thick_segment(
    img: &mut RgbImage,
    a: (f64, f64),
    b: (f64, f64),
    half_width: f64,
    color: Rgb<u8>,
    antialias: bool,
) {
    let pad = half_width + 1.5;
    let r0 = (a.0.min(b.0) - pad).floor().max(0.0) as u32;
    let r1 = ((a.0.max(b.0) + pad).ceil() as i64).min(i64::from(img.height()) - 1);
    let c0 = (a.1.min(b.1) - pad).floor().max(0.0) as u32;
    let c1 = ((a.1.max(b.1) + pad).ceil() as i64).min(i64::from(img.width()) - 1);
    if r1 < 0 || c1 < 0 {
        return;
    }
    for r in r0..=r1 as u32 {
        for c in c0..=c1 as u32 {
            let p = (f64::from(r) + 0.5, f64::from(c) + 0.5);
            let d = dist_point_segment(p, a, b);
            if d <= half_width {
                img.put_pixel(c, r, color);
            } else if antialias && d <= half_width + 1.0 {
                let t = d - half_width; // 0..1 edge blend
                let bg = *img.get_pixel(c, r);
                let blend = |road: u8, back: u8| {
                    (f64::from(road) * (1.0 - t) + f64::from(back) * t).round() as u8
                };
                img.put_pixel(
                    c,
                    r,
                    Rgb([
                        blend(color[0], bg[0]),
                        blend(color[1], bg[1]),
                        blend(color[2], bg[2]),
                    ]),
                );
            }
        }
    }
}

fn dist_point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap.0 * ab.0 + ap.1 * ab.1) / len2).clamp(0.0, 1.0)
    };
    let q = (a.0 + ab.0 * t, a.1 + ab.1 * t);
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Build the 28-day demonstration study: a 14-day baseline and a 14-day
/// intervention at 8 captures/day, four road segments (two one-way sites
/// plus one two-way site), a programmed +0.2 weekday shift in mean CCC and
/// no weekend shift.
pub fn demo_scenario() -> Scenario {
    use chrono::{Datelike, NaiveDate, Timelike, Weekday};

    let grid = GridSpec {
        center: GeoPoint {
            lat_deg: 40.79,
            long_deg: -73.97,
        },
        zoom: 15,
        n_pix: 128,
        n_lat: 1,
        n_long: 1,
        excluded: Default::default(),
    };
    // 2020-06-01 was a Monday; each 14-day half has 10 weekdays + 4
    // weekend days
    let start = NaiveDate::from_ymd_opt(2020, 6, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let intervention_start = start + Duration::days(14);
    let captures = 28 * 8;

    // per-window capture patterns as CCC values; windows hold 4 captures
    const WEEKDAY_CYCLE: [[u8; 4]; 4] = [
        [3, 3, 3, 3], // mean 3.00
        [3, 3, 3, 4], // mean 3.25
        [3, 3, 4, 4], // mean 3.50
        [3, 3, 3, 4], // mean 3.25
    ];
    const WEEKEND_CYCLE: [[u8; 4]; 2] = [
        [3, 3, 4, 4], // mean 3.50
        [3, 4, 4, 4], // mean 3.75
    ];

    let horizontal_road = |row: f64| -> Vec<GeoPoint> {
        vec![
            grid.mosaic_pixel_to_latlong(row, 8.0).unwrap(),
            grid.mosaic_pixel_to_latlong(row, 120.0).unwrap(),
        ]
    };
    let segments: [(&str, &str, f64); 4] = [
        ("site_a", "offramp", 24.0),
        ("site_b", "oneway", 56.0),
        ("site_c", "southbound", 88.0),
        ("site_c", "northbound", 104.0),
    ];

    let mut roads = Vec::new();
    for (road_idx, (site, segment, row)) in segments.iter().enumerate() {
        let mut schedule = Vec::new();
        // stratum window counters reset at the intervention boundary
        let mut weekday_windows: i64 = -1;
        let mut weekend_windows: i64 = -1;
        let mut last_window: Option<NaiveDateTime> = None;
        for k in 0..captures {
            let t = start + Duration::hours(3 * i64::from(k));
            let weekend = matches!(t.weekday(), Weekday::Sat | Weekday::Sun);
            let window_start = t.date().and_hms_opt(t.hour() / 12 * 12, 0, 0).unwrap();
            if last_window != Some(window_start) {
                last_window = Some(window_start);
                if window_start == intervention_start {
                    weekday_windows = -1;
                    weekend_windows = -1;
                }
                if weekend {
                    weekend_windows += 1;
                } else {
                    weekday_windows += 1;
                }
            }
            let slot = (t.hour() / 3 % 4) as usize;
            let mut ccc = if weekend {
                let idx = (weekend_windows as usize + road_idx) % WEEKEND_CYCLE.len();
                WEEKEND_CYCLE[idx][slot]
            } else {
                let idx = (weekday_windows as usize + road_idx) % WEEKDAY_CYCLE.len();
                WEEKDAY_CYCLE[idx][slot]
            };
            // intervention weekday shift: bump the first capture of 16 of
            // every 20 weekday windows by one code -> +0.2 mean exactly
            if !weekend && t >= intervention_start && slot == 0 && weekday_windows % 5 != 4 {
                ccc += 1;
            }
            schedule.push(ScheduleEntry {
                at: t,
                color: CongestionColor::from_ccc(ccc).unwrap(),
            });
        }
        roads.push(RoadSpec {
            site_id: site.to_string(),
            segment_id: segment.to_string(),
            path: horizontal_road(*row),
            width_px: 8.0,
            schedule,
        });
    }

    Scenario {
        seed: 42,
        grid,
        background: [245, 245, 238],
        roads,
        start,
        cadence_h: 3,
        captures,
        antialias: false,
        palette: CongestionPalette::default(),
    }
}

/// The study design matching [`demo_scenario`].
pub fn demo_design() -> crate::analytics::StudyDesign {
    use chrono::NaiveDate;
    let day = |d: u32| {
        NaiveDate::from_ymd_opt(2020, 6, d)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    };
    crate::analytics::StudyDesign {
        baseline_start: day(1),
        baseline_end: day(15),
        intervention_start: day(15),
        intervention_end: day(29),
        window_h: 12,
        cadence_h: 3,
        window_anchor_h: 0,
        timezone: Default::default(),
        test: Default::default(),
    }
}
