//! Serve synthetic tiles over local HTTP and capture them through the HTTP
//! provider — the same `?lat&long&z&n` contract a real endpoint would honor.

use chrono::NaiveDate;
use congestion_harvester::acquisition::{
    capture_grid, ProviderConfig, ProviderKind, SyntheticProvider, TileProvider,
};
use congestion_harvester::synthmap::{demo_scenario, SynthServer};
use congestion_harvester::tile_archive::ArchiveHandle;

fn main() {
    let scenario = demo_scenario();
    let server = SynthServer::start(scenario.clone(), 0).unwrap();
    println!("tile service on {}", server.base_url());

    let mut cfg = ProviderConfig::synthetic("unused.json");
    cfg.kind = ProviderKind::HttpEndpoint;
    cfg.endpoint_or_template = format!("{}/tile", server.base_url());

    let provider = congestion_harvester::acquisition::make_provider(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = ArchiveHandle::open(dir.path()).unwrap();
    let now = NaiveDate::from_ymd_opt(2020, 6, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let report = capture_grid(&scenario.grid, &cfg, provider.as_ref(), &mut archive, now).unwrap();
    println!(
        "captured {} tiles over HTTP, {} failed",
        report.succeeded.len(),
        report.failed.len()
    );

    // the served bytes match the in-process renderer exactly
    let tile = scenario.grid.plan().unwrap()[0];
    let direct = SyntheticProvider::new(scenario.clone());
    let job = congestion_harvester::acquisition::build_job(&tile, &cfg, now).unwrap();
    let http_bytes = provider.fetch(&job).unwrap();
    let direct_bytes = direct.fetch(&job).unwrap();
    println!(
        "HTTP and in-process renders identical: {}",
        http_bytes == direct_bytes
    );
}
