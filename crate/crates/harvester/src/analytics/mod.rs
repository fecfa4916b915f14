//! Windowed averaging of CCC observations and baseline-vs-intervention
//! comparison statistics.

mod plot;
mod stats;

pub use plot::{plot_series, PlotConfig};
pub use stats::{mann_whitney_u, mean_sd, welch_t, SignificanceTest, WelchTest};

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, FixedOffset, NaiveDateTime, Weekday as ChronoWeekday};
use serde::{Deserialize, Serialize};

use crate::congestion::CccObservation;
use crate::error::{Error, Result};

/// A UTC offset used for calendar classification, serialized as `"UTC"` or
/// `"+HH:MM"` / `"-HH:MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TzOffset(pub FixedOffset);

impl Default for TzOffset {
    fn default() -> Self {
        TzOffset(FixedOffset::east_opt(0).unwrap())
    }
}

impl FromStr for TzOffset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("utc") || s == "Z" {
            return Ok(TzOffset::default());
        }
        let bad = || Error::domain("timezone", format!("expected UTC or +HH:MM, got {s:?}"));
        let (sign, rest) = if let Some(r) = s.strip_prefix('+') {
            (1, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (-1, r)
        } else {
            return Err(bad());
        };
        let (h, m) = rest.split_once(':').ok_or_else(bad)?;
        let h: i32 = h.parse().map_err(|_| bad())?;
        let m: i32 = m.parse().map_err(|_| bad())?;
        FixedOffset::east_opt(sign * (h * 3600 + m * 60))
            .map(TzOffset)
            .ok_or_else(bad)
    }
}

impl fmt::Display for TzOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = self.0.local_minus_utc();
        let sign = if secs < 0 { '-' } else { '+' };
        let abs = secs.abs();
        write!(f, "{sign}{:02}:{:02}", abs / 3600, abs % 3600 / 60)
    }
}

impl Serialize for TzOffset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TzOffset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Baseline and intervention periods plus windowing parameters.
///
/// Period bounds are half-open `[start, end)` UTC timestamps, so a boundary
/// day belongs to the later period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub baseline_start: NaiveDateTime,
    pub baseline_end: NaiveDateTime,
    pub intervention_start: NaiveDateTime,
    pub intervention_end: NaiveDateTime,
    /// Averaging window, hours.
    #[serde(default = "default_window_h")]
    pub window_h: u32,
    /// Capture cadence, hours.
    #[serde(default = "default_cadence_h")]
    pub cadence_h: u32,
    /// Local-midnight offset of the first window of each day, hours.
    /// Zero aligns windows to local midnight.
    #[serde(default)]
    pub window_anchor_h: u32,
    /// Timezone for window alignment and weekday/weekend classification.
    #[serde(default)]
    pub timezone: TzOffset,
    /// Significance test used by `compare`.
    #[serde(default)]
    pub test: SignificanceTest,
}

fn default_window_h() -> u32 {
    12
}

fn default_cadence_h() -> u32 {
    3
}

impl StudyDesign {
    pub fn validate(&self) -> Result<()> {
        if self.baseline_start >= self.baseline_end {
            return Err(Error::domain("baseline", "start must precede end"));
        }
        if self.intervention_start >= self.intervention_end {
            return Err(Error::domain("intervention", "start must precede end"));
        }
        if self.baseline_end > self.intervention_start {
            return Err(Error::domain(
                "study",
                "baseline and intervention periods overlap or are out of order",
            ));
        }
        if self.cadence_h == 0 || self.window_h == 0 {
            return Err(Error::domain("window_h", "window and cadence must be > 0"));
        }
        if !self.window_h.is_multiple_of(self.cadence_h) {
            return Err(Error::domain(
                "window_h",
                format!(
                    "window ({} h) must be a multiple of cadence ({} h)",
                    self.window_h, self.cadence_h
                ),
            ));
        }
        Ok(())
    }

    fn to_local(&self, utc: NaiveDateTime) -> NaiveDateTime {
        utc + Duration::seconds(i64::from(self.timezone.0.local_minus_utc()))
    }

    /// UTC start of the window containing a UTC timestamp. Windows tile
    /// local time in `window_h` steps anchored at local midnight plus
    /// `window_anchor_h`.
    pub fn window_start(&self, utc: NaiveDateTime) -> NaiveDateTime {
        let window = i64::from(self.window_h) * 3600;
        let anchor = i64::from(self.window_anchor_h) * 3600;
        let local_secs = self.to_local(utc).and_utc().timestamp();
        let idx = (local_secs - anchor).div_euclid(window);
        let local_start = idx * window + anchor;
        chrono::DateTime::UNIX_EPOCH.naive_utc() + Duration::seconds(local_start)
            - Duration::seconds(i64::from(self.timezone.0.local_minus_utc()))
    }

    pub fn stratum_of(&self, window_start_utc: NaiveDateTime) -> Stratum {
        match self.to_local(window_start_utc).weekday() {
            ChronoWeekday::Sat | ChronoWeekday::Sun => Stratum::Weekend,
            _ => Stratum::Weekday,
        }
    }

    pub fn period_of(&self, window_start_utc: NaiveDateTime) -> Option<Period> {
        if window_start_utc >= self.baseline_start && window_start_utc < self.baseline_end {
            Some(Period::Baseline)
        } else if window_start_utc >= self.intervention_start
            && window_start_utc < self.intervention_end
        {
            Some(Period::Intervention)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Weekday,
    Weekend,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stratum::Weekday => "weekday",
            Stratum::Weekend => "weekend",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Period {
    Baseline,
    Intervention,
}

/// (site_id, segment_id) key.
pub type SegmentKey = (String, String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    /// UTC start of the window.
    pub start: NaiveDateTime,
    /// Mean CCC over the window's non-missing observations; in [1, 5].
    pub mean: f64,
    /// Number of observations contributing.
    pub count: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowedSeries {
    pub segments: BTreeMap<SegmentKey, Vec<WindowStat>>,
}

/// Average observations into aligned windows. Missing observations are
/// dropped; windows with zero contributing observations are omitted.
pub fn window_average(obs: &[CccObservation], design: &StudyDesign) -> Result<WindowedSeries> {
    design.validate()?;
    let mut acc: BTreeMap<SegmentKey, BTreeMap<NaiveDateTime, (f64, u32)>> = BTreeMap::new();
    for o in obs {
        let Some(ccc) = o.ccc else { continue };
        let start = design.window_start(o.timestamp);
        let cell = acc
            .entry((o.site_id.clone(), o.segment_id.clone()))
            .or_default()
            .entry(start)
            .or_insert((0.0, 0));
        cell.0 += f64::from(ccc);
        cell.1 += 1;
    }
    let mut out = WindowedSeries::default();
    for (key, windows) in acc {
        let stats = windows
            .into_iter()
            .map(|(start, (sum, count))| WindowStat {
                start,
                mean: sum / f64::from(count),
                count,
            })
            .collect();
        out.segments.insert(key, stats);
    }
    Ok(out)
}

/// One row of the Table-1-shaped report: a segment in one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub site_id: String,
    pub segment_id: String,
    pub stratum: Stratum,
    pub baseline_mean: Option<f64>,
    pub baseline_sd: Option<f64>,
    pub baseline_n: u32,
    pub intervention_mean: Option<f64>,
    pub intervention_sd: Option<f64>,
    pub intervention_n: u32,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

/// Compare baseline vs intervention window means per segment and stratum.
/// Cells with fewer than two windows in either period report no p-value.
pub fn compare(series: &WindowedSeries, design: &StudyDesign) -> Result<ComparisonReport> {
    design.validate()?;
    let mut rows = Vec::new();
    for ((site_id, segment_id), windows) in &series.segments {
        for stratum in [Stratum::Weekday, Stratum::Weekend] {
            let mut baseline = Vec::new();
            let mut intervention = Vec::new();
            for w in windows {
                if design.stratum_of(w.start) != stratum {
                    continue;
                }
                match design.period_of(w.start) {
                    Some(Period::Baseline) => baseline.push(w.mean),
                    Some(Period::Intervention) => intervention.push(w.mean),
                    None => {}
                }
            }
            let (bm, bsd) = mean_sd(&baseline);
            let (im, isd) = mean_sd(&intervention);
            rows.push(ComparisonRow {
                site_id: site_id.clone(),
                segment_id: segment_id.clone(),
                stratum,
                baseline_mean: (!baseline.is_empty()).then_some(bm),
                baseline_sd: bsd,
                baseline_n: baseline.len() as u32,
                intervention_mean: (!intervention.is_empty()).then_some(im),
                intervention_sd: isd,
                intervention_n: intervention.len() as u32,
                p_value: design.test.p_value(&baseline, &intervention),
            });
        }
    }
    Ok(ComparisonReport { rows })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into())
}

/// Write the report CSV:
/// `segment,stratum,baseline_mean,baseline_sd,baseline_n,intervention_mean,intervention_sd,intervention_n,p_value`
/// where `segment` is `site_id/segment_id`.
pub fn write_report_csv(report: &ComparisonReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record([
        "segment",
        "stratum",
        "baseline_mean",
        "baseline_sd",
        "baseline_n",
        "intervention_mean",
        "intervention_sd",
        "intervention_n",
        "p_value",
    ])?;
    for r in &report.rows {
        w.write_record([
            format!("{}/{}", r.site_id, r.segment_id),
            r.stratum.to_string(),
            opt_cell(r.baseline_mean),
            opt_cell(r.baseline_sd),
            r.baseline_n.to_string(),
            opt_cell(r.intervention_mean),
            opt_cell(r.intervention_sd),
            r.intervention_n.to_string(),
            opt_cell(r.p_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the windowed-series CSV:
/// `window_start_iso,site_id,segment_id,mean_ccc,count`.
pub fn write_series_csv(series: &WindowedSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["window_start_iso", "site_id", "segment_id", "mean_ccc", "count"])?;
    for ((site, segment), windows) in &series.segments {
        for win in windows {
            w.write_record([
                win.start.format("%Y-%m-%dT%H:%M:%S").to_string(),
                site.clone(),
                segment.clone(),
                format!("{:.6}", win.mean),
                win.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write observations:
/// `timestamp_iso,site_id,segment_id,ccc,classified_fraction`; missing CCC
/// is an empty field.
pub fn write_observations_csv(obs: &[CccObservation], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record([
        "timestamp_iso",
        "site_id",
        "segment_id",
        "ccc",
        "classified_fraction",
    ])?;
    for o in obs {
        w.write_record([
            o.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            o.site_id.clone(),
            o.segment_id.clone(),
            o.ccc.map(|c| c.to_string()).unwrap_or_default(),
            format!("{:.6}", o.classified_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations_csv(path: &Path) -> Result<Vec<CccObservation>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let ts = NaiveDateTime::parse_from_str(&record[0], "%Y-%m-%dT%H:%M:%S")
            .map_err(|e| Error::domain("timestamp_iso", e.to_string()))?;
        let ccc = if record[3].is_empty() {
            None
        } else {
            Some(
                record[3]
                    .parse::<u8>()
                    .map_err(|e| Error::domain("ccc", e.to_string()))?,
            )
        };
        let classified_fraction = record[4]
            .parse::<f64>()
            .map_err(|e| Error::domain("classified_fraction", e.to_string()))?;
        out.push(CccObservation {
            timestamp: ts,
            site_id: record[1].to_string(),
            segment_id: record[2].to_string(),
            ccc,
            classified_fraction,
            votes: [0; 5],
            unmatched: 0,
        });
    }
    Ok(out)
}
