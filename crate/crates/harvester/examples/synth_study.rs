//! Generate the built-in 28-day synthetic study into a temporary archive
//! and show what it produced: one file set per capture plus the ground-truth
//! congestion series.

use congestion_harvester::synthmap::demo_scenario;
use congestion_harvester::tile_archive::ArchiveHandle;

fn main() {
    let scenario = demo_scenario();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = ArchiveHandle::open(dir.path()).unwrap();

    let truth = scenario.generate_study(&mut archive).unwrap();

    let stamps = archive.timestamps();
    println!(
        "generated {} captures into {} ({} ground-truth observations)",
        stamps.len(),
        dir.path().display(),
        truth.len()
    );
    println!("first capture: {}", stamps.first().unwrap());
    println!("last capture:  {}", stamps.last().unwrap());
    for obs in truth.iter().take(4) {
        println!(
            "  {} {}/{} ccc={:?}",
            obs.timestamp, obs.site_id, obs.segment_id, obs.ccc
        );
    }
}
