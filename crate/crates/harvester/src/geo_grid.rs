//! Tile-array geometry: pixel sizes, tile side lengths, angular increments and
//! the centered tile grid with exclusions.
//!
//! A grid is an `n_lat` x `n_long` array of square map tiles indexed from the
//! Southwest corner, `i = 1..=n_lat` northward and `j = 1..=n_long` eastward.
//! All angular arithmetic is done in f64; a single reference latitude (the
//! grid center) is used for the latitude increment across all rows.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum zoom level at which the equator is discretized into 2^32 pixels.
pub const MAX_ZOOM: u8 = 24;

/// Mercator-safe latitude band, degrees.
pub const MAX_ABS_LAT_DEG: f64 = 85.0;

/// Spherical model of the Earth used for all arc-length arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthModel {
    /// Equatorial radius in meters (WGS-84 semi-major axis).
    pub equatorial_radius_m: f64,
    /// Pixel size along the equator at maximum zoom, in meters.
    pub base_pixel_m: f64,
}

impl EarthModel {
    /// WGS-84 radius with the base pixel derived from it: the equator is
    /// split into 2^32 pixels at zoom 24.
    pub fn wgs84() -> Self {
        let equatorial_radius_m = 6_378_137.0;
        EarthModel {
            equatorial_radius_m,
            base_pixel_m: 2.0 * PI * equatorial_radius_m / 2f64.powi(32),
        }
    }

    pub fn equator_circumference_m(&self) -> f64 {
        2.0 * PI * self.equatorial_radius_m
    }

    /// Ground size of one map pixel at the given zoom and latitude, meters.
    pub fn pixel_size(&self, zoom: u8, lat_deg: f64) -> Result<f64> {
        if zoom > MAX_ZOOM {
            return Err(Error::domain(
                "zoom",
                format!("{zoom} outside [0, {MAX_ZOOM}]"),
            ));
        }
        if !lat_deg.is_finite() || lat_deg.abs() > MAX_ABS_LAT_DEG {
            return Err(Error::domain(
                "lat_deg",
                format!("{lat_deg} outside [-{MAX_ABS_LAT_DEG}, {MAX_ABS_LAT_DEG}]"),
            ));
        }
        Ok(self.base_pixel_m * 2f64.powi(i32::from(MAX_ZOOM - zoom)) * lat_deg.to_radians().cos())
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        Self::wgs84()
    }
}

/// Ground size of one map pixel on the default Earth model, meters.
pub fn pixel_size(zoom: u8, lat_deg: f64) -> Result<f64> {
    EarthModel::wgs84().pixel_size(zoom, lat_deg)
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub long_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, long_deg: f64) -> Result<Self> {
        let p = GeoPoint { lat_deg, long_deg };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat_deg.is_finite() || self.lat_deg.abs() > MAX_ABS_LAT_DEG {
            return Err(Error::domain(
                "lat_deg",
                format!("{} outside [-{MAX_ABS_LAT_DEG}, {MAX_ABS_LAT_DEG}]", self.lat_deg),
            ));
        }
        if !self.long_deg.is_finite() || self.long_deg < -180.0 || self.long_deg >= 180.0 {
            return Err(Error::domain(
                "long_deg",
                format!("{} outside [-180, 180)", self.long_deg),
            ));
        }
        Ok(())
    }
}

/// Angular extents of one tile plus its ground side length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularSpans {
    /// Latitude extent of one tile, degrees.
    pub d_lat_deg: f64,
    /// Longitude extent of one tile, degrees.
    pub d_long_deg: f64,
    /// Ground side length of one tile at the grid center latitude, meters.
    pub side_m: f64,
}

/// Declaration of a tile array: center, zoom, tile pixel count, grid shape
/// and excluded cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: GeoPoint,
    pub zoom: u8,
    pub n_pix: u32,
    pub n_lat: u32,
    pub n_long: u32,
    /// (i, j) index pairs omitted from the plan, 1-based from the Southwest.
    #[serde(default)]
    pub excluded: BTreeSet<(u32, u32)>,
}

/// One planned tile of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileDescriptor {
    pub i: u32,
    pub j: u32,
    pub center: GeoPoint,
    pub zoom: u8,
    pub n_pix: u32,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.center.validate()?;
        if self.zoom > MAX_ZOOM {
            return Err(Error::domain(
                "zoom",
                format!("{} outside [0, {MAX_ZOOM}]", self.zoom),
            ));
        }
        if self.n_pix < 1 {
            return Err(Error::domain("n_pix", "must be >= 1"));
        }
        if self.n_lat < 1 {
            return Err(Error::domain("n_lat", "must be >= 1"));
        }
        if self.n_long < 1 {
            return Err(Error::domain("n_long", "must be >= 1"));
        }
        for &(i, j) in &self.excluded {
            if i < 1 || i > self.n_lat || j < 1 || j > self.n_long {
                return Err(Error::domain(
                    "excluded",
                    format!("({i}, {j}) outside 1..={} x 1..={}", self.n_lat, self.n_long),
                ));
            }
        }
        Ok(())
    }

    /// Angular spans of one tile. The longitude span is independent of the
    /// center latitude; the latitude span scales with cos(center latitude).
    pub fn angular_spans(&self) -> Result<AngularSpans> {
        self.angular_spans_on(&EarthModel::wgs84())
    }

    pub fn angular_spans_on(&self, earth: &EarthModel) -> Result<AngularSpans> {
        self.validate()?;
        let side_m = f64::from(self.n_pix) * earth.pixel_size(self.zoom, self.center.lat_deg)?;
        let equatorial_side_m = f64::from(self.n_pix)
            * earth.base_pixel_m
            * 2f64.powi(i32::from(MAX_ZOOM - self.zoom));
        let d_long_deg = equatorial_side_m / earth.equator_circumference_m() * 360.0;
        let d_lat_deg = d_long_deg * self.center.lat_deg.to_radians().cos();
        Ok(AngularSpans {
            d_lat_deg,
            d_long_deg,
            side_m,
        })
    }

    fn check_indices(&self, i: u32, j: u32) -> Result<()> {
        if i < 1 || i > self.n_lat {
            return Err(Error::domain(
                "i",
                format!("{i} outside 1..={}", self.n_lat),
            ));
        }
        if j < 1 || j > self.n_long {
            return Err(Error::domain(
                "j",
                format!("{j} outside 1..={}", self.n_long),
            ));
        }
        Ok(())
    }

    /// Center coordinates of tile (i, j). (1, 1) is the Southwest corner.
    pub fn tile_center(&self, i: u32, j: u32) -> Result<GeoPoint> {
        self.check_indices(i, j)?;
        let spans = self.angular_spans()?;
        // the (n + 1)/2 offsets are evaluated in real arithmetic: even grid
        // dimensions yield half-integer offsets
        let lat_off = f64::from(i) - (f64::from(self.n_lat) + 1.0) / 2.0;
        let long_off = f64::from(j) - (f64::from(self.n_long) + 1.0) / 2.0;
        Ok(GeoPoint {
            lat_deg: self.center.lat_deg + lat_off * spans.d_lat_deg,
            long_deg: self.center.long_deg + long_off * spans.d_long_deg,
        })
    }

    /// Descriptors for every non-excluded tile, i outer ascending, j inner
    /// ascending.
    pub fn plan(&self) -> Result<Vec<TileDescriptor>> {
        self.validate()?;
        let mut out = Vec::with_capacity((self.n_lat * self.n_long) as usize);
        for i in 1..=self.n_lat {
            for j in 1..=self.n_long {
                if self.excluded.contains(&(i, j)) {
                    continue;
                }
                out.push(TileDescriptor {
                    i,
                    j,
                    center: self.tile_center(i, j)?,
                    zoom: self.zoom,
                    n_pix: self.n_pix,
                });
            }
        }
        Ok(out)
    }

    /// Total mosaic dimensions in pixels: (rows, cols).
    pub fn mosaic_dims(&self) -> (u32, u32) {
        (self.n_lat * self.n_pix, self.n_long * self.n_pix)
    }

    /// Continuous mosaic coordinates of a point: fractional (row, col)
    /// measured from the top-left (Northwest) mosaic corner. Not bounds
    /// checked.
    pub fn latlong_to_fractional_pixel(&self, p: GeoPoint) -> Result<(f64, f64)> {
        let spans = self.angular_spans()?;
        let lat_top = self.center.lat_deg + f64::from(self.n_lat) * spans.d_lat_deg / 2.0;
        let long_west = self.center.long_deg - f64::from(self.n_long) * spans.d_long_deg / 2.0;
        let row = (lat_top - p.lat_deg) / spans.d_lat_deg * f64::from(self.n_pix);
        let col = (p.long_deg - long_west) / spans.d_long_deg * f64::from(self.n_pix);
        Ok((row, col))
    }

    /// Integer mosaic pixel containing a point; rows count from the north
    /// edge, columns from the west edge.
    pub fn latlong_to_mosaic_pixel(&self, p: GeoPoint) -> Result<(u32, u32)> {
        let (row, col) = self.latlong_to_fractional_pixel(p)?;
        let (n_rows, n_cols) = self.mosaic_dims();
        if row < 0.0 || col < 0.0 || row > f64::from(n_rows) || col > f64::from(n_cols) {
            return Err(Error::OutOfBounds { row, col });
        }
        // points exactly on the south/east boundary land in the last pixel
        let r = (row.floor() as u32).min(n_rows - 1);
        let c = (col.floor() as u32).min(n_cols - 1);
        Ok((r, c))
    }

    /// Inverse of [`latlong_to_fractional_pixel`].
    pub fn mosaic_pixel_to_latlong(&self, row: f64, col: f64) -> Result<GeoPoint> {
        let spans = self.angular_spans()?;
        let lat_top = self.center.lat_deg + f64::from(self.n_lat) * spans.d_lat_deg / 2.0;
        let long_west = self.center.long_deg - f64::from(self.n_long) * spans.d_long_deg / 2.0;
        Ok(GeoPoint {
            lat_deg: lat_top - row / f64::from(self.n_pix) * spans.d_lat_deg,
            long_deg: long_west + col / f64::from(self.n_pix) * spans.d_long_deg,
        })
    }
}

/// The Manhattan grid used throughout the tests: 6 x 3 tiles at z = 15
/// centered on (40.79, -73.97), with the six non-island cells excluded.
pub fn nyc_example_spec() -> GridSpec {
    GridSpec {
        center: GeoPoint {
            lat_deg: 40.79,
            long_deg: -73.97,
        },
        zoom: 15,
        n_pix: 1000,
        n_lat: 6,
        n_long: 3,
        excluded: [(4, 1), (5, 1), (6, 1), (6, 2), (1, 3), (2, 3)]
            .into_iter()
            .collect(),
    }
}
