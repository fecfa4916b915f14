//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `cargo test --test acceptance -- --nocapture`).

#![allow(clippy::excessive_precision)] // frozen oracle values keep all digits

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use congestion_harvester::acquisition::{run_schedule, SimClock, TickKind};
use congestion_harvester::analytics::{
    compare, welch_t, window_average, write_report_csv, Stratum,
};
use congestion_harvester::congestion::extract_ccc;
use congestion_harvester::geo_grid::{
    nyc_example_spec, pixel_size, EarthModel, GeoPoint, GridSpec,
};
use congestion_harvester::mosaic::{stitch, stitch_capture, PLACEHOLDER_RGB};
use congestion_harvester::synthmap::{demo_design, demo_scenario};
use congestion_harvester::tile_archive::{ArchiveHandle, TileFileName};

fn at(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, mo, d)
        .unwrap()
        .and_hms_opt(h, mi, 0)
        .unwrap()
}

#[test]
fn criterion_01_tile_side_length() {
    let side_m = pixel_size(15, 40.7).unwrap() * 1000.0; // 1000-pixel tile
    let side_km = side_m / 1000.0;
    assert!(
        (side_km - 3.62).abs() <= 0.05,
        "side {side_km:.4} km out of 3.62 +/- 0.05"
    );
    println!("PASS criterion 1: tile side at lat 40.7, z15, 1000 px = {side_km:.3} km (3.62 +/- 0.05)");
}

#[test]
fn criterion_02_base_pixel() {
    let base_mm = pixel_size(24, 0.0).unwrap() * 1000.0;
    assert!(
        (base_mm - 9.3).abs() <= 0.05,
        "base pixel {base_mm:.4} mm out of 9.3 +/- 0.05"
    );
    let earth = EarthModel::wgs84();
    let circumference = earth.base_pixel_m * 2f64.powi(32);
    assert!(
        (circumference - 40_075_016.7).abs() <= 1.0,
        "dx24 * 2^32 = {circumference:.1} m out of 40075016.7 +/- 1"
    );
    println!(
        "PASS criterion 2: base pixel {base_mm:.4} mm, dx24*2^32 = {circumference:.1} m (+/- 1 m)"
    );
}

fn random_spec(rng: &mut ChaCha8Rng) -> GridSpec {
    GridSpec {
        center: GeoPoint::new(rng.gen_range(-60.0..60.0), rng.gen_range(-120.0..120.0)).unwrap(),
        zoom: rng.gen_range(10..=20),
        n_pix: rng.gen_range(64..=2048),
        n_lat: rng.gen_range(1..=8),
        n_long: rng.gen_range(1..=8),
        excluded: BTreeSet::new(),
    }
}

#[test]
fn criterion_03_geometry_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(40_075);
    for _ in 0..1000 {
        let mut spec = random_spec(&mut rng);
        let lat = spec.center.lat_deg;

        // doubling law: decrementing zoom doubles the pixel size
        if spec.zoom > 1 {
            let a = pixel_size(spec.zoom, lat).unwrap();
            let b = pixel_size(spec.zoom - 1, lat).unwrap();
            assert!((b / a - 2.0).abs() < 1e-12, "doubling law at z{}", spec.zoom);
        }

        // cosine cancellation: the longitudinal span is latitude-free
        let spans = spec.angular_spans().unwrap();
        let expected_d_long =
            360.0 * f64::from(spec.n_pix) * 2f64.powi(24 - i32::from(spec.zoom)) / 2f64.powi(32);
        assert!(
            (spans.d_long_deg - expected_d_long).abs() < 1e-12 * expected_d_long.max(1.0),
            "d_long depends on latitude"
        );
        assert!(
            (spans.d_lat_deg - spans.d_long_deg * lat.to_radians().cos()).abs() < 1e-12,
            "d_lat != d_long * cos(lat)"
        );

        // centering: tile centers average to the grid center
        let plan = spec.plan().unwrap();
        let n = plan.len() as f64;
        let mean_lat = plan.iter().map(|t| t.center.lat_deg).sum::<f64>() / n;
        let mean_long = plan.iter().map(|t| t.center.long_deg).sum::<f64>() / n;
        assert!((mean_lat - spec.center.lat_deg).abs() < 1e-9, "lat centering");
        assert!((mean_long - spec.center.long_deg).abs() < 1e-9, "long centering");

        // abutment: neighbors differ by exactly one angular span
        for t in &plan {
            if t.i < spec.n_lat {
                let up = spec.tile_center(t.i + 1, t.j).unwrap();
                assert!((up.lat_deg - t.center.lat_deg - spans.d_lat_deg).abs() < 1e-9);
            }
            if t.j < spec.n_long {
                let right = spec.tile_center(t.i, t.j + 1).unwrap();
                assert!((right.long_deg - t.center.long_deg - spans.d_long_deg).abs() < 1e-9);
            }
        }

        // plan cardinality with a random exclusion set
        let k = rng.gen_range(0..=(spec.n_lat * spec.n_long / 2));
        while (spec.excluded.len() as u32) < k {
            spec.excluded.insert((
                rng.gen_range(1..=spec.n_lat),
                rng.gen_range(1..=spec.n_long),
            ));
        }
        assert_eq!(
            spec.plan().unwrap().len() + spec.excluded.len(),
            (spec.n_lat * spec.n_long) as usize
        );

        // pixel round-trip on a random interior point
        let (rows, cols) = spec.mosaic_dims();
        let row = rng.gen_range(0.0..f64::from(rows));
        let col = rng.gen_range(0.0..f64::from(cols));
        let p = spec.mosaic_pixel_to_latlong(row, col).unwrap();
        let (r2, c2) = spec.latlong_to_fractional_pixel(p).unwrap();
        assert!((r2 - row).abs() < 1e-6 && (c2 - col).abs() < 1e-6, "pixel round-trip");
    }
    println!("PASS criterion 3: doubling, cosine cancellation, centering, abutment, cardinality and pixel round-trip over 1000 random specs");
}

#[test]
fn criterion_04_plan_cardinality() {
    assert_eq!(nyc_example_spec().plan().unwrap().len(), 12);
    let mexico = GridSpec {
        center: GeoPoint::new(19.4326, -99.1332).unwrap(),
        zoom: 14,
        n_pix: 1000,
        n_lat: 3,
        n_long: 3,
        excluded: BTreeSet::new(),
    };
    assert_eq!(mexico.plan().unwrap().len(), 9);
    println!("PASS criterion 4: NYC 6x3 - 6 exclusions = 12 jobs; Mexico City 3x3 = 9 jobs");
}

#[test]
fn criterion_05_stitch_round_trip() {
    // a 3000x2000 reference raster with deterministic noise
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    let mut reference = RgbImage::new(3000, 2000);
    for p in reference.pixels_mut() {
        *p = Rgb([rng.gen(), rng.gen(), rng.gen()]);
    }
    // orientation sentinel in the very top-left corner
    reference.put_pixel(0, 0, Rgb([1, 2, 3]));

    let spec = GridSpec {
        center: GeoPoint::new(40.0, -74.0).unwrap(),
        zoom: 15,
        n_pix: 1000,
        n_lat: 2,
        n_long: 3,
        excluded: BTreeSet::new(),
    };

    // independent splitter: row block r from the top holds tile i = n_lat - r
    let mut tiles = Vec::new();
    for r in 0..2u32 {
        for c in 0..3u32 {
            let mut tile = RgbImage::new(1000, 1000);
            for y in 0..1000 {
                for x in 0..1000 {
                    tile.put_pixel(x, y, *reference.get_pixel(c * 1000 + x, r * 1000 + y));
                }
            }
            tiles.push(((spec.n_lat - r, c + 1), tile));
        }
    }

    let mosaic = stitch(tiles, &spec, PLACEHOLDER_RGB).unwrap();
    assert_eq!(mosaic.pixels.as_raw(), reference.as_raw(), "byte-for-byte round trip");
    // tile (n_lat, 1) carries the sentinel, so it landed top-left
    assert_eq!(*mosaic.pixels.get_pixel(0, 0), Rgb([1, 2, 3]));
    println!("PASS criterion 5: 3000x2000 split/stitch byte-identical; tile (n_lat,1) top-left");
}

#[test]
fn criterion_06_filename_codec() {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    for _ in 0..10_000 {
        let i = rng.gen_range(1..=999);
        let j = rng.gen_range(1..=999);
        let stamp = at(
            rng.gen_range(2000..=2068),
            rng.gen_range(1..=12),
            rng.gen_range(1..=28),
            rng.gen_range(0..24),
            rng.gen_range(0..60),
        );
        let name = TileFileName::new(i, j, stamp).unwrap();
        for safe in [false, true] {
            let parsed = TileFileName::parse(&name.render(safe)).unwrap();
            assert_eq!(parsed, name);
        }
    }
    let example = TileFileName::new(2, 3, at(2020, 6, 1, 9, 0)).unwrap();
    assert_eq!(example.render(false), "TrafficMap_2_3_06_01_20_09:00.png");
    println!("PASS criterion 6: 10,000 random codec round-trips; literal example name matches");
}

#[test]
fn criterion_07_end_to_end_oracle_study() {
    let scenario = demo_scenario();
    let design = demo_design();
    let dir = tempfile::tempdir().unwrap();
    let mut archive = ArchiveHandle::open(dir.path()).unwrap();
    let truth = scenario.generate_study(&mut archive).unwrap();

    // recover the series through the full stitch + classify pipeline
    let rois = scenario.interior_rois().unwrap();
    let mut recovered = Vec::new();
    for stamp in archive.timestamps() {
        let mosaic = stitch_capture(&archive, stamp, &scenario.grid, PLACEHOLDER_RGB).unwrap();
        recovered.extend(extract_ccc(&mosaic, &rois, &scenario.palette).unwrap());
    }
    let key = |o: &congestion_harvester::congestion::CccObservation| {
        (o.timestamp, o.site_id.clone(), o.segment_id.clone(), o.ccc)
    };
    let mut truth_keys: Vec<_> = truth.iter().map(key).collect();
    let mut recovered_keys: Vec<_> = recovered.iter().map(key).collect();
    truth_keys.sort();
    recovered_keys.sort();
    assert_eq!(recovered_keys, truth_keys, "recovered series != ground truth");

    let series = window_average(&recovered, &design).unwrap();
    let report = compare(&series, &design).unwrap();
    assert_eq!(report.rows.len(), 8);
    for row in &report.rows {
        let diff = row.intervention_mean.unwrap() - row.baseline_mean.unwrap();
        let p = row.p_value.unwrap();
        match row.stratum {
            Stratum::Weekday => {
                assert!((diff - 0.20).abs() <= 0.05, "weekday diff {diff:.4}");
                assert!(p < 0.05, "weekday p {p:.4}");
            }
            Stratum::Weekend => {
                assert!(p > 0.3, "weekend p {p:.4}");
            }
        }
    }
    println!("PASS criterion 7: 28-day oracle study recovered exactly; weekday +0.20 (p<0.05), weekend p>0.3");
}

#[test]
fn criterion_08_welch_correctness() {
    let a = [3.1, 3.4, 3.2, 3.6, 3.0, 3.3, 3.5, 3.2];
    let b = [3.5, 3.7, 3.6, 3.9, 3.4, 3.8, 3.65, 3.75];
    let w = welch_t(&a, &b).unwrap();
    assert!((w.t - -4.082482904638630).abs() < 1e-6, "t = {}", w.t);
    assert!((w.df - 13.341176470588235).abs() < 1e-6, "df = {}", w.df);
    assert!((w.p - 0.0012304650307108).abs() < 1e-6, "p = {}", w.p);
    println!("PASS criterion 8: Welch t/df/p match the hand-computed example to 1e-6");
}

#[test]
fn criterion_09_scheduler() {
    let midnight = at(2020, 6, 1, 0, 0);

    // 8 drift-free ticks per simulated day
    let clock = SimClock::new(midnight);
    let mut fired = Vec::new();
    run_schedule(
        &clock,
        Duration::hours(3),
        midnight,
        Some(midnight + Duration::days(1)),
        || false,
        |t| fired.push(t),
    )
    .unwrap();
    assert_eq!(fired.len(), 8);
    for (k, t) in fired.iter().enumerate() {
        assert_eq!(*t - midnight, Duration::hours(3 * k as i64), "tick drift");
    }

    // a 2.5-interval capture skips ticks instead of overlapping
    let clock = SimClock::new(midnight);
    let job_clock = clock.clone();
    let mut n = 0;
    let ticks = run_schedule(
        &clock,
        Duration::hours(3),
        midnight,
        Some(midnight + Duration::days(1)),
        || false,
        |_| {
            n += 1;
            if n == 1 {
                job_clock.advance(Duration::minutes(450));
            }
        },
    )
    .unwrap();
    let skipped: Vec<_> = ticks.iter().filter(|t| t.kind == TickKind::Skipped).collect();
    assert_eq!(skipped.len(), 2, "expected exactly 2 skipped ticks");
    // fired ticks stay on the lattice (no overlap, no drift)
    for t in ticks.iter().filter(|t| t.kind == TickKind::Fired) {
        assert_eq!((t.scheduled - midnight).num_minutes() % 180, 0);
    }
    println!("PASS criterion 9: 8 drift-free ticks/day; 2.5-interval capture skips 2 ticks, never overlaps");
}

#[test]
fn criterion_10_report_shape() {
    let scenario = demo_scenario();
    let design = demo_design();
    let series = window_average(&scenario.ground_truth(), &design).unwrap();
    let report = compare(&series, &design).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    write_report_csv(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    for col in [
        "baseline_mean",
        "baseline_sd",
        "baseline_n",
        "intervention_mean",
        "intervention_sd",
        "intervention_n",
        "p_value",
    ] {
        assert!(header.contains(col), "missing column {col}");
    }
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 8, "expected 4 segments x 2 strata");
    for stratum in ["weekday", "weekend"] {
        assert_eq!(
            rows.iter().filter(|r| r.contains(stratum)).count(),
            4,
            "4 segment rows per {stratum} stratum"
        );
    }
    println!("PASS criterion 10: report CSV has 4 segments x 2 strata with mean/SD/n/p columns");
}
