//! Turning a tile plan into archived PNG files: capture URLs, pluggable
//! providers with retries and rate limiting, grid captures and the periodic
//! schedule.

mod provider;
mod schedule;

pub use provider::{
    make_provider, BrowserProvider, FetchError, HttpProvider, SyntheticProvider, TileProvider,
    DEFAULT_BROWSER_TEMPLATE,
};
pub use schedule::{
    crontab_line, run_schedule, Clock, SimClock, SystemClock, TickKind, TickRecord,
};

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::NaiveDateTime;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo_grid::{GridSpec, TileDescriptor};
use crate::mosaic::decode_tile_rgb;
use crate::tile_archive::{truncate_to_minute, ArchiveHandle, TileFileName};

/// Default environment variable holding the API key.
pub const DEFAULT_API_KEY_ENV: &str = "TRAFFIC_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    BrowserSubprocess,
    HttpEndpoint,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Page or endpoint URL; may contain an `{api_key}` placeholder filled
    /// from the environment.
    pub endpoint_or_template: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default)]
    pub min_request_interval_ms: u64,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_retry_backoff_ms")]
    pub retry_backoff_ms: u64,
    /// Subprocess command for the browser adapter, with `{url}`, `{n_pix}`
    /// and `{out_path}` placeholders.
    #[serde(default = "default_browser_template")]
    pub browser_command_template: String,
    /// Scenario file backing the synthetic provider.
    #[serde(default)]
    pub scenario_file: Option<PathBuf>,
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_timeout_s() -> u64 {
    30
}

fn default_max_retries() -> u32 {
    3
}

fn default_max_concurrency() -> usize {
    4
}

fn default_retry_backoff_ms() -> u64 {
    2000
}

fn default_browser_template() -> String {
    DEFAULT_BROWSER_TEMPLATE.to_string()
}

impl ProviderConfig {
    pub fn synthetic(scenario_file: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Synthetic,
            endpoint_or_template: "synthetic:".into(),
            api_key_env: default_api_key_env(),
            timeout_s: default_timeout_s(),
            max_retries: default_max_retries(),
            max_concurrency: default_max_concurrency(),
            min_request_interval_ms: 0,
            retry_backoff_ms: default_retry_backoff_ms(),
            browser_command_template: default_browser_template(),
            scenario_file: Some(scenario_file.into()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_s == 0 {
            return Err(Error::domain("timeout_s", "must be > 0"));
        }
        if self.max_concurrency < 1 {
            return Err(Error::domain("max_concurrency", "must be >= 1"));
        }
        Ok(())
    }
}

/// One planned fetch: the tile, its fully substituted URL and canonical
/// output name.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureJob {
    pub tile: TileDescriptor,
    pub requested_at: NaiveDateTime,
    pub url: String,
    pub output_name: String,
}

/// Outcome of one grid capture.
#[derive(Debug, Clone)]
pub struct CaptureReport {
    pub grid: GridSpec,
    pub timestamp: NaiveDateTime,
    pub succeeded: Vec<(u32, u32)>,
    pub failed: Vec<(u32, u32, String)>,
    /// Total transient retries spent across all tiles.
    pub retries: u32,
    pub duration: Duration,
}

/// Build the capture URL: `{base}?lat=..&long=..&z=..&n=..` with
/// coordinates printed to 10 decimal places. An `{api_key}` placeholder in
/// the base is substituted from the configured environment variable.
pub fn build_url(tile: &TileDescriptor, cfg: &ProviderConfig) -> Result<String> {
    let mut base = cfg.endpoint_or_template.clone();
    if base.contains("{api_key}") {
        let key = std::env::var(&cfg.api_key_env).map_err(|_| {
            Error::Config(format!(
                "URL template requires an API key but {} is not set",
                cfg.api_key_env
            ))
        })?;
        base = base.replace("{api_key}", &key);
    }
    let sep = if base.contains('?') { '&' } else { '?' };
    Ok(format!(
        "{base}{sep}lat={:.10}&long={:.10}&z={}&n={}",
        tile.center.lat_deg, tile.center.long_deg, tile.zoom, tile.n_pix
    ))
}

pub fn build_job(
    tile: &TileDescriptor,
    cfg: &ProviderConfig,
    requested_at: NaiveDateTime,
) -> Result<CaptureJob> {
    let name = TileFileName::new(tile.i, tile.j, requested_at)?;
    Ok(CaptureJob {
        tile: *tile,
        requested_at: truncate_to_minute(requested_at),
        url: build_url(tile, cfg)?,
        output_name: name.render(true),
    })
}

/// Minimum-spacing gate shared by all workers of one capture.
struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(min_interval: Duration) -> Self {
        RateLimiter {
            min_interval,
            last: Mutex::new(None),
        }
    }

    /// Block until the next provider call may start, and claim that slot.
    fn acquire(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        loop {
            let wait = {
                let mut last = self.last.lock().unwrap();
                let now = Instant::now();
                match *last {
                    Some(prev) if now.duration_since(prev) < self.min_interval => {
                        Some(self.min_interval - now.duration_since(prev))
                    }
                    _ => {
                        *last = Some(now);
                        None
                    }
                }
            };
            match wait {
                Some(d) => std::thread::sleep(d),
                None => return,
            }
        }
    }
}

/// Fetch one job with retries and exponential backoff on transient
/// failures; validates decodability and dimensions. Returns the PNG bytes
/// and the number of retries spent.
pub fn fetch_tile(
    job: &CaptureJob,
    cfg: &ProviderConfig,
    provider: &dyn TileProvider,
) -> std::result::Result<(Vec<u8>, u32), FetchError> {
    let mut retries = 0;
    loop {
        match provider.fetch(job).and_then(|bytes| {
            validate_tile_bytes(&bytes, job.tile.n_pix)?;
            Ok(bytes)
        }) {
            Ok(bytes) => return Ok((bytes, retries)),
            Err(FetchError::Transient(msg)) if retries < cfg.max_retries => {
                let delay = cfg.retry_backoff_ms.saturating_mul(1 << retries);
                warn!(
                    "tile ({}, {}): transient failure ({msg}); retrying in {delay} ms",
                    job.tile.i, job.tile.j
                );
                std::thread::sleep(Duration::from_millis(delay));
                retries += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn validate_tile_bytes(bytes: &[u8], n_pix: u32) -> std::result::Result<(), FetchError> {
    let img = decode_tile_rgb(bytes)
        .map_err(|e| FetchError::Permanent(format!("undecodable image: {e}")))?;
    if img.width() != n_pix || img.height() != n_pix {
        return Err(FetchError::Permanent(format!(
            "image is {}x{}, expected {n_pix}x{n_pix}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Capture every non-excluded tile of the grid, all stamped with one
/// timestamp taken at loop start. Individual tile failures are recorded,
/// not fatal; an unwritable archive is fatal.
pub fn capture_grid(
    spec: &GridSpec,
    cfg: &ProviderConfig,
    provider: &dyn TileProvider,
    archive: &mut ArchiveHandle,
    now: NaiveDateTime,
) -> Result<CaptureReport> {
    cfg.validate()?;
    let started = Instant::now();
    let timestamp = truncate_to_minute(now);
    let jobs: VecDeque<CaptureJob> = spec
        .plan()?
        .iter()
        .map(|tile| build_job(tile, cfg, timestamp))
        .collect::<Result<_>>()?;

    let workers = if provider.serial() {
        1
    } else {
        cfg.max_concurrency.min(jobs.len().max(1))
    };
    let queue = Mutex::new(jobs);
    let limiter = RateLimiter::new(Duration::from_millis(cfg.min_request_interval_ms));
    type FetchOutcome = ((u32, u32), std::result::Result<(Vec<u8>, u32), FetchError>);
    let results: Mutex<Vec<FetchOutcome>> = Mutex::new(Vec::new());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(job) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                limiter.acquire();
                let outcome = fetch_tile(&job, cfg, provider);
                results
                    .lock()
                    .unwrap()
                    .push(((job.tile.i, job.tile.j), outcome));
            });
        }
    });

    let mut succeeded = Vec::new();
    let mut failed = Vec::new();
    let mut retries = 0;
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(idx, _)| *idx);
    for ((i, j), outcome) in results {
        match outcome {
            Ok((bytes, r)) => {
                retries += r;
                archive.write_tile(i, j, timestamp, &bytes)?;
                succeeded.push((i, j));
            }
            Err(e) => failed.push((i, j, e.to_string())),
        }
    }
    info!(
        "capture {timestamp}: {} ok, {} failed, {retries} retries",
        succeeded.len(),
        failed.len()
    );
    Ok(CaptureReport {
        grid: spec.clone(),
        timestamp,
        succeeded,
        failed,
        retries,
        duration: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_grid::GeoPoint;
    use crate::synthmap::demo_scenario;
    use chrono::NaiveDate;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2020, 6, 1)
            .unwrap()
            .and_hms_opt(9, 0, 0)
            .unwrap()
    }

    fn tile() -> TileDescriptor {
        TileDescriptor {
            i: 1,
            j: 1,
            center: GeoPoint {
                lat_deg: 33.73,
                long_deg: -84.43,
            },
            zoom: 15,
            n_pix: 1000,
        }
    }

    fn cfg(endpoint: &str) -> ProviderConfig {
        ProviderConfig {
            kind: ProviderKind::HttpEndpoint,
            endpoint_or_template: endpoint.into(),
            api_key_env: "HARVESTER_TEST_KEY".into(),
            timeout_s: 5,
            max_retries: 3,
            max_concurrency: 4,
            min_request_interval_ms: 0,
            retry_backoff_ms: 1,
            browser_command_template: default_browser_template(),
            scenario_file: None,
        }
    }

    #[test]
    fn url_carries_the_four_parameters() {
        let url = build_url(&tile(), &cfg("file:///maps/Load_Traffic_Map.html")).unwrap();
        assert_eq!(
            url,
            "file:///maps/Load_Traffic_Map.html?lat=33.7300000000&long=-84.4300000000&z=15&n=1000"
        );
    }

    #[test]
    fn coordinates_render_to_ten_decimals() {
        let mut t = tile();
        t.center.lat_deg = 40.123456789012;
        let url = build_url(&t, &cfg("http://x/t")).unwrap();
        assert!(url.contains("lat=40.1234567890"), "{url}");
    }

    #[test]
    fn endpoint_with_existing_query_appends() {
        let url = build_url(&tile(), &cfg("http://x/tile?t=2020-06-01T09:00")).unwrap();
        assert!(url.contains("?t=2020-06-01T09:00&lat="));
    }

    #[test]
    fn missing_api_key_names_the_variable() {
        let c = cfg("http://x/t?key={api_key}");
        std::env::remove_var("HARVESTER_TEST_KEY");
        match build_url(&tile(), &c) {
            Err(Error::Config(msg)) => assert!(msg.contains("HARVESTER_TEST_KEY")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn no_placeholder_needs_no_key() {
        std::env::remove_var("HARVESTER_TEST_KEY");
        assert!(build_url(&tile(), &cfg("http://x/t")).is_ok());
    }

    struct FlakyProvider {
        fail_first: u32,
        calls: AtomicU32,
        scenario: crate::synthmap::Scenario,
    }

    impl TileProvider for FlakyProvider {
        fn fetch(&self, job: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(FetchError::Transient("injected".into()))
            } else {
                self.scenario
                    .render_tile(&job.tile, job.requested_at)
                    .map_err(|e| FetchError::Permanent(e.to_string()))
            }
        }
    }

    fn small_scenario() -> crate::synthmap::Scenario {
        let mut s = demo_scenario();
        s.grid.n_pix = 16;
        s.captures = 8;
        s.roads.clear();
        s
    }

    #[test]
    fn transient_failures_recover_with_retries() {
        let s = small_scenario();
        let provider = FlakyProvider {
            fail_first: 2,
            calls: AtomicU32::new(0),
            scenario: s.clone(),
        };
        let mut c = cfg("http://unused/");
        c.max_retries = 3;
        let dir = tempfile::tempdir().unwrap();
        let mut archive = ArchiveHandle::open(dir.path()).unwrap();
        let report = capture_grid(&s.grid, &c, &provider, &mut archive, t0()).unwrap();
        assert_eq!(report.succeeded.len(), 1);
        assert!(report.failed.is_empty());
        assert_eq!(report.retries, 2);
    }

    #[test]
    fn permanent_failures_are_not_retried() {
        struct WrongSize;
        impl TileProvider for WrongSize {
            fn fetch(&self, _: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError> {
                // a 2x2 image when the grid wants 16x16
                let img = image::RgbImage::new(2, 2);
                let mut bytes = Vec::new();
                image::DynamicImage::ImageRgb8(img)
                    .write_to(
                        &mut std::io::Cursor::new(&mut bytes),
                        image::ImageFormat::Png,
                    )
                    .unwrap();
                Ok(bytes)
            }
        }
        let s = small_scenario();
        let dir = tempfile::tempdir().unwrap();
        let mut archive = ArchiveHandle::open(dir.path()).unwrap();
        let report = capture_grid(&s.grid, &cfg("http://u/"), &WrongSize, &mut archive, t0())
            .unwrap();
        assert_eq!(report.succeeded.len(), 0);
        assert_eq!(report.failed.len(), 1);
        assert!(report.failed[0].2.contains("2x2"));
        assert!(archive.timestamps().is_empty());
    }

    #[test]
    fn capture_covers_the_whole_plan_with_one_timestamp() {
        let mut s = small_scenario();
        s.grid.n_lat = 6;
        s.grid.n_long = 3;
        s.grid.excluded = [(4, 1), (5, 1), (6, 1), (6, 2), (1, 3), (2, 3)]
            .into_iter()
            .collect();
        let provider = SyntheticProvider::new(s.clone());
        let dir = tempfile::tempdir().unwrap();
        let mut archive = ArchiveHandle::open(dir.path()).unwrap();
        let report = capture_grid(&s.grid, &cfg("http://u/"), &provider, &mut archive, t0())
            .unwrap();
        assert_eq!(report.succeeded.len(), 12);
        assert!(report.failed.is_empty());
        // report index set equals the plan index set
        let planned: Vec<(u32, u32)> =
            s.grid.plan().unwrap().iter().map(|t| (t.i, t.j)).collect();
        assert_eq!(report.succeeded, planned);
        // all twelve files share the capture timestamp
        assert_eq!(archive.timestamps(), vec![truncate_to_minute(t0())]);
        assert_eq!(archive.lookup(t0()).unwrap().len(), 12);
    }

    #[test]
    fn total_failure_leaves_archive_unchanged() {
        struct AlwaysDown;
        impl TileProvider for AlwaysDown {
            fn fetch(&self, _: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError> {
                Err(FetchError::Transient("down".into()))
            }
        }
        let mut s = small_scenario();
        s.grid.n_lat = 2;
        s.grid.n_long = 2;
        let mut c = cfg("http://u/");
        c.max_retries = 1;
        let dir = tempfile::tempdir().unwrap();
        let mut archive = ArchiveHandle::open(dir.path()).unwrap();
        let report = capture_grid(&s.grid, &c, &AlwaysDown, &mut archive, t0()).unwrap();
        assert_eq!(report.succeeded.len(), 0);
        assert_eq!(report.failed.len(), 4);
        assert!(archive.timestamps().is_empty());
    }

    #[test]
    fn rate_limit_spaces_provider_calls() {
        use std::sync::Mutex as StdMutex;
        struct Timestamped {
            scenario: crate::synthmap::Scenario,
            starts: StdMutex<Vec<Instant>>,
        }
        impl TileProvider for Timestamped {
            fn fetch(&self, job: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError> {
                self.starts.lock().unwrap().push(Instant::now());
                self.scenario
                    .render_tile(&job.tile, job.requested_at)
                    .map_err(|e| FetchError::Permanent(e.to_string()))
            }
        }
        let mut s = small_scenario();
        s.grid.n_lat = 2;
        s.grid.n_long = 2;
        let provider = Timestamped {
            scenario: s.clone(),
            starts: StdMutex::new(Vec::new()),
        };
        let mut c = cfg("http://u/");
        c.min_request_interval_ms = 30;
        let dir = tempfile::tempdir().unwrap();
        let mut archive = ArchiveHandle::open(dir.path()).unwrap();
        capture_grid(&s.grid, &c, &provider, &mut archive, t0()).unwrap();
        let mut starts = provider.starts.into_inner().unwrap();
        starts.sort();
        for pair in starts.windows(2) {
            let gap = pair[1].duration_since(pair[0]);
            assert!(gap >= Duration::from_millis(29), "gap {gap:?}");
        }
    }
}
