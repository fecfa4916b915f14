//! One grid capture against the in-process synthetic provider: builds the
//! jobs, fetches every planned tile under one shared timestamp and archives
//! the results.

use chrono::NaiveDate;
use congestion_harvester::acquisition::{capture_grid, ProviderConfig, SyntheticProvider};
use congestion_harvester::synthmap::demo_scenario;
use congestion_harvester::tile_archive::ArchiveHandle;

fn main() {
    let mut scenario = demo_scenario();
    // widen the demo's single tile into a 2x2 grid for a fuller capture
    scenario.grid.n_lat = 2;
    scenario.grid.n_long = 2;

    let dir = tempfile::tempdir().unwrap();
    let mut archive = ArchiveHandle::open(dir.path()).unwrap();
    let provider = SyntheticProvider::new(scenario.clone());
    let cfg = ProviderConfig::synthetic("unused.json");
    let now = NaiveDate::from_ymd_opt(2020, 6, 1)
        .unwrap()
        .and_hms_opt(9, 0, 0)
        .unwrap();

    let report = capture_grid(&scenario.grid, &cfg, &provider, &mut archive, now).unwrap();
    println!(
        "capture {}: {} succeeded, {} failed, {} retries",
        report.timestamp,
        report.succeeded.len(),
        report.failed.len(),
        report.retries
    );
    for (i, j) in &report.succeeded {
        println!("  archived tile ({i}, {j})");
    }
}
