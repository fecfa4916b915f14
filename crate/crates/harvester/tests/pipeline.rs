//! Cross-module integration: the browser subprocess adapter against a fake
//! browser script, HTTP capture against the local tile service, and the full
//! CLI workflow from scaffold to report.

use std::path::Path;
use std::process::Command;

use chrono::NaiveDate;
use congestion_harvester::acquisition::{
    capture_grid, BrowserProvider, ProviderConfig, ProviderKind, TileProvider,
};
use congestion_harvester::synthmap::{demo_scenario, SynthServer};
use congestion_harvester::tile_archive::ArchiveHandle;

fn t0() -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(2020, 6, 1)
        .unwrap()
        .and_hms_opt(9, 0, 0)
        .unwrap()
}

#[cfg(unix)]
#[test]
fn browser_adapter_runs_the_template_and_reads_the_screenshot() {
    use std::os::unix::fs::PermissionsExt;

    let scenario = demo_scenario();
    let tile = scenario.grid.plan().unwrap()[0];
    let png = scenario.render_tile(&tile, t0()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("rendered.png");
    std::fs::write(&fixture, &png).unwrap();

    // stand-in browser: "screenshots" by copying the fixture to the
    // requested output path (second argument)
    let script = dir.path().join("fake_browser.sh");
    std::fs::write(
        &script,
        format!("#!/bin/sh\ncp {} \"$2\"\n", fixture.display()),
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();

    let template = format!("{} {{url}} {{out_path}}", script.display());
    let provider = BrowserProvider::new(template, dir.path());
    assert!(provider.serial());

    let cfg = ProviderConfig {
        kind: ProviderKind::BrowserSubprocess,
        endpoint_or_template: "http://example.invalid/map".into(),
        ..ProviderConfig::synthetic("unused.json")
    };
    let job = congestion_harvester::acquisition::build_job(&tile, &cfg, t0()).unwrap();
    let bytes = provider.fetch(&job).unwrap();
    assert_eq!(bytes, png);
}

#[cfg(unix)]
#[test]
fn missing_browser_executable_is_a_config_error() {
    use congestion_harvester::acquisition::FetchError;

    let scenario = demo_scenario();
    let tile = scenario.grid.plan().unwrap()[0];
    let dir = tempfile::tempdir().unwrap();
    let provider = BrowserProvider::new("definitely-not-a-browser-9z {url}", dir.path());
    let cfg = ProviderConfig {
        kind: ProviderKind::BrowserSubprocess,
        endpoint_or_template: "http://example.invalid/map".into(),
        ..ProviderConfig::synthetic("unused.json")
    };
    let job = congestion_harvester::acquisition::build_job(&tile, &cfg, t0()).unwrap();
    match provider.fetch(&job) {
        Err(FetchError::Config(msg)) => assert!(msg.contains("not found"), "{msg}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn http_capture_matches_the_synthetic_provider() {
    let mut scenario = demo_scenario();
    scenario.grid.n_pix = 48;
    scenario.grid.n_lat = 2;
    scenario.grid.n_long = 2;

    let server = SynthServer::start(scenario.clone(), 0).unwrap();
    let cfg = ProviderConfig {
        kind: ProviderKind::HttpEndpoint,
        endpoint_or_template: format!("{}/tile", server.base_url()),
        // the server renders at the scenario start; capture at that time
        ..ProviderConfig::synthetic("unused.json")
    };
    let provider = congestion_harvester::acquisition::make_provider(&cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut archive = ArchiveHandle::open(dir.path().join("http")).unwrap();
    let report = capture_grid(
        &scenario.grid,
        &cfg,
        provider.as_ref(),
        &mut archive,
        scenario.start,
    )
    .unwrap();
    assert_eq!(report.succeeded.len(), 4);
    assert!(report.failed.is_empty());

    // byte-identical to an in-process synthetic capture
    let mut direct = ArchiveHandle::open(dir.path().join("direct")).unwrap();
    let synth = congestion_harvester::acquisition::SyntheticProvider::new(scenario.clone());
    capture_grid(&scenario.grid, &cfg, &synth, &mut direct, scenario.start).unwrap();
    for (idx, path) in archive.lookup(scenario.start).unwrap() {
        let other = &direct.lookup(scenario.start).unwrap()[idx];
        assert_eq!(
            std::fs::read(path).unwrap(),
            std::fs::read(other).unwrap(),
            "tile {idx:?} differs between HTTP and in-process capture"
        );
    }
}

fn harvester(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_harvester"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_workflow_reproduces_the_ground_truth_report() {
    let dir = tempfile::tempdir().unwrap();
    let study = dir.path();

    let out = harvester(study, &["synth", "demo", "--out-dir", "."]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = harvester(
        study,
        &["daemon", "--simulated", "--until", "2020-06-29T00:00"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("224 captures"));

    for cmd in [&["extract", "all"][..], &["analyze"], &["plot"]] {
        let out = harvester(study, cmd);
        assert!(out.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
    }

    // extraction equals the scaffolded ground truth line for line
    let mut truth: Vec<String> = std::fs::read_to_string(study.join("ground_truth.csv"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    let mut observed: Vec<String> = std::fs::read_to_string(study.join("out/observations.csv"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    truth.sort();
    observed.sort();
    assert_eq!(observed, truth);

    let report = std::fs::read_to_string(study.join("out/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 9); // header + 4 segments x 2 strata
    assert!(study.join("out/series.png").exists());

    // a timestamp with no tiles fails with a parsable error line
    let out = harvester(study, &["stitch", "1999-01-01T00:00"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no tiles found"));
}
