//! Plan a tile grid and print the capture table: per-tile indices, centers,
//! and the common side length. Mirrors `harvester plan` without a config file.

use congestion_harvester::geo_grid::{nyc_example_spec, GeoPoint, GridSpec};

fn print_plan(name: &str, spec: &GridSpec) {
    let spans = spec.angular_spans().unwrap();
    let plan = spec.plan().unwrap();
    println!(
        "{name}: {} tiles, side {:.1} m, spans {:.6} deg lat x {:.6} deg long",
        plan.len(),
        spans.side_m,
        spans.d_lat_deg,
        spans.d_long_deg
    );
    for tile in plan {
        println!(
            "  ({}, {})  {:.6}, {:.6}",
            tile.i, tile.j, tile.center.lat_deg, tile.center.long_deg
        );
    }
}

fn main() {
    // the 6x3 New York grid with its six water/exclusion tiles
    print_plan("new_york", &nyc_example_spec());

    // a 3x3 grid over Mexico City, no exclusions
    let mexico = GridSpec {
        center: GeoPoint::new(19.4326, -99.1332).unwrap(),
        zoom: 14,
        n_pix: 1000,
        n_lat: 3,
        n_long: 3,
        excluded: Default::default(),
    };
    print_plan("mexico_city", &mexico);
}
