//! Minimal PNG line chart of windowed CCC series. Each line segment is
//! colored by the congestion color of the windowed mean's nearest integer
//! code; lower values mean more congestion.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::WindowedSeries;
use crate::congestion::{CongestionColor, CongestionPalette};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct PlotConfig {
    pub width: u32,
    pub height: u32,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig {
            width: 1200,
            height: 500,
        }
    }
}

const MARGIN: u32 = 40;
const Y_MIN: f64 = 1.0;
const Y_MAX: f64 = 5.0;

pub fn plot_series(
    series: &WindowedSeries,
    palette: &CongestionPalette,
    cfg: PlotConfig,
    path: &Path,
) -> Result<()> {
    let mut img = RgbImage::from_pixel(cfg.width, cfg.height, Rgb([255, 255, 255]));
    let (x0, x1) = (MARGIN, cfg.width.saturating_sub(MARGIN).max(MARGIN + 1));
    let (y0, y1) = (MARGIN, cfg.height.saturating_sub(MARGIN).max(MARGIN + 1));

    // frame and integer-CCC gridlines
    for x in x0..=x1 {
        img.put_pixel(x, y0, Rgb([0, 0, 0]));
        img.put_pixel(x, y1, Rgb([0, 0, 0]));
    }
    for y in y0..=y1 {
        img.put_pixel(x0, y, Rgb([0, 0, 0]));
        img.put_pixel(x1, y, Rgb([0, 0, 0]));
    }
    for ccc in 2..=4 {
        let y = value_to_y(f64::from(ccc), y0, y1);
        for x in (x0..=x1).step_by(4) {
            img.put_pixel(x, y, Rgb([220, 220, 220]));
        }
    }

    let (t_min, t_max) = time_range(series);
    for windows in series.segments.values() {
        for pair in windows.windows(2) {
            let [a, b] = pair else { continue };
            let ccc = a.mean.round().clamp(1.0, 5.0) as u8;
            let color = CongestionColor::from_ccc(ccc)
                .map(|c| palette.reference(c))
                .unwrap_or([0, 0, 0]);
            let ax = time_to_x(a.start, t_min, t_max, x0, x1);
            let bx = time_to_x(b.start, t_min, t_max, x0, x1);
            let ay = value_to_y(a.mean, y0, y1);
            let by = value_to_y(b.mean, y0, y1);
            draw_line(&mut img, ax, ay, bx, by, Rgb(color));
        }
    }

    img.save(path)?;
    Ok(())
}

fn time_range(series: &WindowedSeries) -> (i64, i64) {
    let mut t_min = i64::MAX;
    let mut t_max = i64::MIN;
    for windows in series.segments.values() {
        for w in windows {
            let t = w.start.and_utc().timestamp();
            t_min = t_min.min(t);
            t_max = t_max.max(t);
        }
    }
    if t_min > t_max {
        (0, 1)
    } else if t_min == t_max {
        (t_min, t_min + 1)
    } else {
        (t_min, t_max)
    }
}

fn time_to_x(t: chrono::NaiveDateTime, t_min: i64, t_max: i64, x0: u32, x1: u32) -> u32 {
    let frac = (t.and_utc().timestamp() - t_min) as f64 / (t_max - t_min) as f64;
    x0 + (frac * f64::from(x1 - x0)).round() as u32
}

fn value_to_y(v: f64, y0: u32, y1: u32) -> u32 {
    let frac = ((v - Y_MIN) / (Y_MAX - Y_MIN)).clamp(0.0, 1.0);
    // higher CCC (less congestion) plots higher
    y1 - (frac * f64::from(y1 - y0)).round() as u32
}

fn draw_line(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, color: Rgb<u8>) {
    let (mut x, mut y) = (x0 as i64, y0 as i64);
    let (x1, y1) = (x1 as i64, y1 as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
