//! Stitching one capture's tiles into a single composite raster.
//!
//! Tile (i, j) occupies row block `n_lat - i` from the top and column block
//! `j - 1` from the left, so tile (1, 1) — the Southwest corner — lands at
//! the bottom-left of the mosaic.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDateTime;
use image::{DynamicImage, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::geo_grid::GridSpec;
use crate::tile_archive::{stamp_label, ArchiveHandle};

/// Fill color for excluded or missing tile blocks. Mid-gray, outside the
/// congestion palette so segmentation never matches filler.
pub const PLACEHOLDER_RGB: Rgb<u8> = Rgb([128, 128, 128]);

/// Stitched composite raster of one capture.
#[derive(Debug, Clone)]
pub struct Mosaic {
    pub pixels: RgbImage,
    pub spec: GridSpec,
    pub timestamp: Option<NaiveDateTime>,
    /// Grid cells that had no tile and were filled with the placeholder.
    pub missing: BTreeSet<(u32, u32)>,
}

impl Mosaic {
    pub fn export_png(&self, path: &Path) -> Result<()> {
        self.pixels.save(path)?;
        Ok(())
    }

    /// Debug overlay: draw black lines on tile boundaries. Not part of the
    /// stitch contract; for human inspection only.
    pub fn overlay_raster_lines(&mut self) {
        let (rows, cols) = (self.pixels.height(), self.pixels.width());
        let n_pix = self.spec.n_pix;
        for r in (0..rows).step_by(n_pix as usize) {
            for c in 0..cols {
                self.pixels.put_pixel(c, r, Rgb([0, 0, 0]));
            }
        }
        for c in (0..cols).step_by(n_pix as usize) {
            for r in 0..rows {
                self.pixels.put_pixel(c, r, Rgb([0, 0, 0]));
            }
        }
    }
}

/// Decode PNG bytes to RGB, flattening any alpha channel over white.
pub fn decode_tile_rgb(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory(bytes)?;
    Ok(flatten_over_white(img))
}

pub fn load_tile_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)?;
    Ok(flatten_over_white(img))
}

fn flatten_over_white(img: DynamicImage) -> RgbImage {
    match img {
        DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            let rgba = other.to_rgba8();
            let mut out = RgbImage::new(rgba.width(), rgba.height());
            for (x, y, p) in rgba.enumerate_pixels() {
                let a = u32::from(p[3]);
                let blend = |c: u8| ((u32::from(c) * a + 255 * (255 - a)) / 255) as u8;
                out.put_pixel(x, y, Rgb([blend(p[0]), blend(p[1]), blend(p[2])]));
            }
            out
        }
    }
}

/// Stitch tiles into a composite. Cells with no tile (excluded or failed)
/// are filled with `placeholder` and listed in [`Mosaic::missing`].
pub fn stitch(
    tiles: impl IntoIterator<Item = ((u32, u32), RgbImage)>,
    spec: &GridSpec,
    placeholder: Rgb<u8>,
) -> Result<Mosaic> {
    spec.validate()?;
    let n_pix = spec.n_pix;
    let (rows, cols) = spec.mosaic_dims();
    let mut pixels = RgbImage::from_pixel(cols, rows, placeholder);
    let mut seen = BTreeSet::new();

    for ((i, j), tile) in tiles {
        if i < 1 || i > spec.n_lat || j < 1 || j > spec.n_long {
            return Err(Error::Tile {
                i,
                j,
                msg: format!("index outside {}x{} grid", spec.n_lat, spec.n_long),
            });
        }
        if tile.width() != n_pix || tile.height() != n_pix {
            return Err(Error::Tile {
                i,
                j,
                msg: format!(
                    "tile is {}x{}, expected {n_pix}x{n_pix}",
                    tile.width(),
                    tile.height()
                ),
            });
        }
        if !seen.insert((i, j)) {
            return Err(Error::Tile {
                i,
                j,
                msg: "duplicate tile index".into(),
            });
        }
        let row0 = (spec.n_lat - i) * n_pix;
        let col0 = (j - 1) * n_pix;
        for y in 0..n_pix {
            for x in 0..n_pix {
                pixels.put_pixel(col0 + x, row0 + y, *tile.get_pixel(x, y));
            }
        }
    }

    let missing = (1..=spec.n_lat)
        .flat_map(|i| (1..=spec.n_long).map(move |j| (i, j)))
        .filter(|idx| !seen.contains(idx))
        .collect();

    Ok(Mosaic {
        pixels,
        spec: spec.clone(),
        timestamp: None,
        missing,
    })
}

/// Inverse of [`stitch`] on complete grids: cut a composite back into
/// `n_pix` x `n_pix` tiles keyed by (i, j).
pub fn split(image: &RgbImage, spec: &GridSpec) -> Result<Vec<((u32, u32), RgbImage)>> {
    spec.validate()?;
    let (rows, cols) = spec.mosaic_dims();
    if image.height() != rows || image.width() != cols {
        return Err(Error::domain(
            "image",
            format!(
                "{}x{} does not match mosaic dims {}x{}",
                image.width(),
                image.height(),
                cols,
                rows
            ),
        ));
    }
    let n_pix = spec.n_pix;
    let mut out = Vec::new();
    for i in 1..=spec.n_lat {
        for j in 1..=spec.n_long {
            let row0 = (spec.n_lat - i) * n_pix;
            let col0 = (j - 1) * n_pix;
            let mut tile = RgbImage::new(n_pix, n_pix);
            for y in 0..n_pix {
                for x in 0..n_pix {
                    tile.put_pixel(x, y, *image.get_pixel(col0 + x, row0 + y));
                }
            }
            out.push(((i, j), tile));
        }
    }
    Ok(out)
}

/// Load every archived tile of one capture and stitch it.
pub fn stitch_capture(
    archive: &ArchiveHandle,
    stamp: NaiveDateTime,
    spec: &GridSpec,
    placeholder: Rgb<u8>,
) -> Result<Mosaic> {
    let tiles = archive
        .lookup(stamp)
        .ok_or_else(|| Error::NoTiles(stamp_label(stamp)))?;
    let mut decoded = Vec::with_capacity(tiles.len());
    for (&(i, j), path) in tiles {
        decoded.push(((i, j), load_tile_rgb(path)?));
    }
    let mut mosaic = stitch(decoded, spec, placeholder)?;
    mosaic.timestamp = Some(stamp);
    Ok(mosaic)
}
