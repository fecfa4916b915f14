//! On-disk tile archive: the `TrafficMap_{i}_{j}_{MM}_{DD}_{YY}_{HH}:{MM}.png`
//! filename codec, a flat directory layout, and a manifest indexing captures
//! by timestamp.
//!
//! Filenames are written in "safe names" mode by default, replacing the colon
//! in the time field with a dash so archives stay portable across
//! filesystems. The parser accepts both forms, plus a double underscore
//! between the date and time fields as produced by some legacy readers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PREFIX: &str = "TrafficMap";

/// Decoded form of one archived tile filename.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TileFileName {
    pub i: u32,
    pub j: u32,
    /// Capture timestamp, minute precision.
    pub stamp: NaiveDateTime,
}

impl TileFileName {
    pub fn new(i: u32, j: u32, stamp: NaiveDateTime) -> Result<Self> {
        if i < 1 || j < 1 {
            return Err(Error::domain("tile index", "i and j must be >= 1"));
        }
        Ok(TileFileName {
            i,
            j,
            stamp: truncate_to_minute(stamp),
        })
    }

    /// Canonical filename. `safe` replaces the colon with a dash.
    pub fn render(&self, safe: bool) -> String {
        let sep = if safe { '-' } else { ':' };
        format!(
            "{PREFIX}_{}_{}_{:02}_{:02}_{:02}_{:02}{}{:02}.png",
            self.i,
            self.j,
            self.stamp.month(),
            self.stamp.day(),
            self.stamp.year() % 100,
            self.stamp.hour(),
            sep,
            self.stamp.minute(),
        )
    }

    /// Parse a filename in either colon or dash form. Indices are full
    /// integer tokens, so multi-digit grid indices round-trip.
    pub fn parse(name: &str) -> Option<Self> {
        let stem = name.strip_suffix(".png")?;
        // tolerate the double-underscore date/time separator by dropping
        // empty tokens
        let tokens: Vec<&str> = stem.split('_').filter(|t| !t.is_empty()).collect();
        if tokens.len() != 7 || tokens[0] != PREFIX {
            return None;
        }
        let i: u32 = tokens[1].parse().ok()?;
        let j: u32 = tokens[2].parse().ok()?;
        if i < 1 || j < 1 {
            return None;
        }
        let month: u32 = tokens[3].parse().ok()?;
        let day: u32 = tokens[4].parse().ok()?;
        let year2: i32 = tokens[5].parse().ok()?;
        let time = tokens[6];
        let (h, m) = time.split_once([':', '-'])?;
        let hour: u32 = h.parse().ok()?;
        let minute: u32 = m.parse().ok()?;
        let date = NaiveDate::from_ymd_opt(2000 + year2, month, day)?;
        let stamp = date.and_hms_opt(hour, minute, 0)?;
        Some(TileFileName { i, j, stamp })
    }
}

impl fmt::Display for TileFileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(true))
    }
}

pub fn truncate_to_minute(t: NaiveDateTime) -> NaiveDateTime {
    t.date().and_hms_opt(t.hour(), t.minute(), 0).unwrap()
}

/// Render a timestamp the way the filename codec does, for messages and the
/// CLI (`MM_DD_YY_HH-MM`).
pub fn stamp_label(t: NaiveDateTime) -> String {
    format!(
        "{:02}_{:02}_{:02}_{:02}-{:02}",
        t.month(),
        t.day(),
        t.year() % 100,
        t.hour(),
        t.minute()
    )
}

/// Writable, scannable directory of captured tiles.
#[derive(Debug, Clone)]
pub struct ArchiveHandle {
    root: PathBuf,
    safe_names: bool,
    manifest: BTreeMap<NaiveDateTime, BTreeMap<(u32, u32), PathBuf>>,
}

impl ArchiveHandle {
    /// Open an archive directory, creating it if needed, and index its
    /// contents.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut handle = ArchiveHandle {
            root,
            safe_names: true,
            manifest: BTreeMap::new(),
        };
        handle.rescan()?;
        Ok(handle)
    }

    /// Index an existing directory; fails if it does not exist.
    pub fn scan(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::Archive {
                path: root,
                msg: "archive directory does not exist".into(),
            });
        }
        let mut handle = ArchiveHandle {
            root,
            safe_names: true,
            manifest: BTreeMap::new(),
        };
        handle.rescan()?;
        Ok(handle)
    }

    /// Use the byte-exact legacy filename form (colon in the time field).
    pub fn with_legacy_names(mut self) -> Self {
        self.safe_names = false;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Re-read the directory and rebuild the manifest. Undecodable `.png`
    /// names are skipped with a warning.
    pub fn rescan(&mut self) -> Result<()> {
        self.manifest.clear();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if !entry.file_type()?.is_file() {
                continue;
            }
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if !name.ends_with(".png") {
                continue;
            }
            match TileFileName::parse(name) {
                Some(f) => {
                    self.manifest
                        .entry(f.stamp)
                        .or_default()
                        .insert((f.i, f.j), entry.path());
                }
                None => warn!("skipping undecodable archive file name: {name}"),
            }
        }
        Ok(())
    }

    /// Write one tile atomically (temp file + rename) and record it in the
    /// manifest.
    pub fn write_tile(
        &mut self,
        i: u32,
        j: u32,
        stamp: NaiveDateTime,
        png_bytes: &[u8],
    ) -> Result<PathBuf> {
        let file = TileFileName::new(i, j, stamp)?;
        let path = self.root.join(file.render(self.safe_names));
        let tmp = self.root.join(format!(".{}.tmp", file.render(true)));
        fs::write(&tmp, png_bytes)?;
        fs::rename(&tmp, &path)?;
        self.manifest
            .entry(file.stamp)
            .or_default()
            .insert((i, j), path.clone());
        Ok(path)
    }

    /// All capture timestamps present, ascending.
    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        self.manifest.keys().copied().collect()
    }

    /// Tiles recorded for one capture. An empty result is `None`, distinct
    /// from an error.
    pub fn lookup(&self, stamp: NaiveDateTime) -> Option<&BTreeMap<(u32, u32), PathBuf>> {
        self.manifest.get(&truncate_to_minute(stamp))
    }

    /// Serializable snapshot of the manifest; regenerable from a scan and
    /// never authoritative.
    pub fn manifest_cache(&self) -> ManifestCache {
        ManifestCache {
            version: 1,
            captures: self
                .manifest
                .iter()
                .map(|(stamp, tiles)| ManifestCapture {
                    timestamp: *stamp,
                    tiles: tiles
                        .iter()
                        .map(|(&(i, j), path)| ManifestTile {
                            i,
                            j,
                            file: path
                                .file_name()
                                .map(|n| n.to_string_lossy().into_owned())
                                .unwrap_or_default(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn write_manifest_cache(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest_cache())?;
        fs::write(path, json)?;
        Ok(())
    }
}

/// JSON layout of the optional manifest cache file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCache {
    pub version: u32,
    pub captures: Vec<ManifestCapture>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCapture {
    pub timestamp: NaiveDateTime,
    pub tiles: Vec<ManifestTile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestTile {
    pub i: u32,
    pub j: u32,
    pub file: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn stamp(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, mo, d)
            .unwrap()
            .and_hms_opt(h, mi, 0)
            .unwrap()
    }

    #[test]
    fn renders_the_legacy_example_name() {
        let f = TileFileName::new(2, 3, stamp(2020, 6, 1, 9, 0)).unwrap();
        assert_eq!(f.render(false), "TrafficMap_2_3_06_01_20_09:00.png");
        assert_eq!(f.render(true), "TrafficMap_2_3_06_01_20_09-00.png");
    }

    #[test]
    fn parses_both_time_separators() {
        let expect = TileFileName::new(2, 3, stamp(2020, 6, 1, 9, 0)).unwrap();
        assert_eq!(
            TileFileName::parse("TrafficMap_2_3_06_01_20_09:00.png"),
            Some(expect)
        );
        assert_eq!(
            TileFileName::parse("TrafficMap_2_3_06_01_20_09-00.png"),
            Some(expect)
        );
    }

    #[test]
    fn parses_double_underscore_separator() {
        let expect = TileFileName::new(2, 3, stamp(2020, 6, 1, 9, 0)).unwrap();
        assert_eq!(
            TileFileName::parse("TrafficMap_2_3_06_01_20__09:00.png"),
            Some(expect)
        );
    }

    #[test]
    fn parses_multi_digit_indices() {
        let f = TileFileName::parse("TrafficMap_12_107_06_01_20_09-00.png").unwrap();
        assert_eq!((f.i, f.j), (12, 107));
    }

    #[test]
    fn rejects_garbage_names() {
        assert!(TileFileName::parse("TrafficMap_2_3_06_01_20.png").is_none());
        assert!(TileFileName::parse("Mosaic_2_3_06_01_20_09-00.png").is_none());
        assert!(TileFileName::parse("TrafficMap_0_3_06_01_20_09-00.png").is_none());
        assert!(TileFileName::parse("TrafficMap_2_3_13_01_20_09-00.png").is_none());
    }

    #[test]
    fn archive_write_and_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = ArchiveHandle::open(dir.path()).unwrap();
        let t = stamp(2020, 6, 1, 9, 0);
        for (i, j) in [(1, 1), (1, 2), (2, 1)] {
            a.write_tile(i, j, t, b"png-bytes").unwrap();
        }
        assert_eq!(a.lookup(t).unwrap().len(), 3);
        assert!(a.lookup(stamp(2020, 6, 1, 12, 0)).is_none());

        // scanning from scratch sees the same contents
        let b = ArchiveHandle::scan(dir.path()).unwrap();
        assert_eq!(b.lookup(t).unwrap().len(), 3);
        assert_eq!(b.timestamps(), vec![t]);
    }

    #[test]
    fn scan_skips_corrupt_names() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = ArchiveHandle::open(dir.path()).unwrap();
        a.write_tile(1, 1, stamp(2020, 6, 1, 9, 0), b"x").unwrap();
        fs::write(dir.path().join("TrafficMap_bogus.png"), b"y").unwrap();
        let b = ArchiveHandle::scan(dir.path()).unwrap();
        assert_eq!(b.timestamps().len(), 1);
        assert_eq!(b.lookup(stamp(2020, 6, 1, 9, 0)).unwrap().len(), 1);
    }

    #[test]
    fn scan_of_missing_directory_fails() {
        assert!(ArchiveHandle::scan("/nonexistent/archive/dir").is_err());
    }

    #[test]
    fn empty_directory_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let a = ArchiveHandle::open(dir.path()).unwrap();
        assert!(a.timestamps().is_empty());
    }

    #[test]
    fn manifest_cache_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = ArchiveHandle::open(dir.path()).unwrap();
        a.write_tile(1, 2, stamp(2020, 6, 1, 9, 0), b"x").unwrap();
        let cache_path = dir.path().join("manifest.json");
        a.write_manifest_cache(&cache_path).unwrap();
        let loaded: ManifestCache =
            serde_json::from_str(&fs::read_to_string(&cache_path).unwrap()).unwrap();
        assert_eq!(loaded.captures.len(), 1);
        assert_eq!(loaded.captures[0].tiles[0].i, 1);
        assert_eq!(loaded.captures[0].tiles[0].j, 2);
    }
}
