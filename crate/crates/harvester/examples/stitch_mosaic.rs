//! Stitch one capture's tiles into a composite mosaic and export it as PNG,
//! with the debug raster-line overlay marking tile boundaries.

use chrono::NaiveDate;
use congestion_harvester::acquisition::{capture_grid, ProviderConfig, SyntheticProvider};
use congestion_harvester::mosaic::{stitch_capture, PLACEHOLDER_RGB};
use congestion_harvester::synthmap::demo_scenario;
use congestion_harvester::tile_archive::ArchiveHandle;

fn main() {
    let mut scenario = demo_scenario();
    scenario.grid.n_lat = 2;
    scenario.grid.n_long = 3;
    // leave one tile out so the placeholder fill is visible
    scenario.grid.excluded = [(2, 3)].into_iter().collect();

    let dir = tempfile::tempdir().unwrap();
    let mut archive = ArchiveHandle::open(dir.path()).unwrap();
    let provider = SyntheticProvider::new(scenario.clone());
    let now = NaiveDate::from_ymd_opt(2020, 6, 1)
        .unwrap()
        .and_hms_opt(9, 0, 0)
        .unwrap();
    let cfg = ProviderConfig::synthetic("unused.json");
    capture_grid(&scenario.grid, &cfg, &provider, &mut archive, now).unwrap();

    let mut mosaic = stitch_capture(&archive, now, &scenario.grid, PLACEHOLDER_RGB).unwrap();
    mosaic.overlay_raster_lines();

    let out = std::env::temp_dir().join("stitch_mosaic_example.png");
    mosaic.export_png(&out).unwrap();
    let (h, w) = scenario.grid.mosaic_dims();
    println!(
        "stitched {}x{} mosaic ({} tile missing) -> {}",
        w,
        h,
        mosaic.missing.len(),
        out.display()
    );
}
