//! Classify road-segment pixels of one mosaic into congestion color codes:
//! render a synthetic capture, stitch it, and run the palette classifier
//! over the scenario's region-of-interest polygons.

use congestion_harvester::congestion::extract_ccc;
use congestion_harvester::mosaic::{stitch, PLACEHOLDER_RGB};
use congestion_harvester::synthmap::demo_scenario;

fn main() {
    let scenario = demo_scenario();
    let rois = scenario.interior_rois().unwrap();
    let t = scenario.capture_times()[2]; // 06:00 on day one

    let tiles = scenario
        .grid
        .plan()
        .unwrap()
        .iter()
        .map(|tile| {
            (
                (tile.i, tile.j),
                scenario.render_tile_raster(tile, t).unwrap(),
            )
        })
        .collect::<Vec<_>>();
    let mut mosaic = stitch(tiles, &scenario.grid, PLACEHOLDER_RGB).unwrap();
    mosaic.timestamp = Some(t);

    let observations = extract_ccc(&mosaic, &rois, &scenario.palette).unwrap();
    println!("capture {t}:");
    for obs in observations {
        println!(
            "  {}/{}: ccc={:?} ({:.0}% of ROI classified, votes {:?})",
            obs.site_id,
            obs.segment_id,
            obs.ccc,
            obs.classified_fraction * 100.0,
            obs.votes
        );
    }
}
