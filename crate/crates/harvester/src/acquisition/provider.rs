//! Tile providers: synthetic in-process renderer, HTTP endpoint, and the
//! headless-browser subprocess adapter.

use std::fmt;
use std::io::Read;
use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use super::{CaptureJob, ProviderConfig, ProviderKind};
use crate::error::{Error, Result};
use crate::synthmap::Scenario;

/// Fetch failure classes drive the retry policy: transient errors are
/// retried, permanent and configuration errors are not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchError {
    Transient(String),
    Permanent(String),
    Config(String),
}

impl fmt::Display for FetchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FetchError::Transient(m) => write!(f, "transient: {m}"),
            FetchError::Permanent(m) => write!(f, "permanent: {m}"),
            FetchError::Config(m) => write!(f, "configuration: {m}"),
        }
    }
}

impl std::error::Error for FetchError {}

/// Anything that can turn a capture job into PNG bytes.
pub trait TileProvider: Send + Sync {
    fn fetch(&self, job: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError>;

    /// Serial providers are invoked by at most one worker at a time.
    fn serial(&self) -> bool {
        false
    }
}

/// In-process deterministic renderer over a synthetic scenario.
pub struct SyntheticProvider {
    scenario: Scenario,
}

impl SyntheticProvider {
    pub fn new(scenario: Scenario) -> Self {
        SyntheticProvider { scenario }
    }
}

impl TileProvider for SyntheticProvider {
    fn fetch(&self, job: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError> {
        self.scenario
            .render_tile(&job.tile, job.requested_at)
            .map_err(|e| FetchError::Permanent(e.to_string()))
    }
}

/// GET on the configured endpoint, expecting an `image/png` response.
pub struct HttpProvider {
    timeout: Duration,
}

impl HttpProvider {
    pub fn new(timeout: Duration) -> Self {
        HttpProvider { timeout }
    }
}

impl TileProvider for HttpProvider {
    fn fetch(&self, job: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError> {
        let response = ureq::get(&job.url)
            .timeout(self.timeout)
            .call()
            .map_err(|e| match e {
                ureq::Error::Status(code, _) if code == 429 || code >= 500 => {
                    FetchError::Transient(format!("HTTP {code}"))
                }
                ureq::Error::Status(code, _) => FetchError::Permanent(format!("HTTP {code}")),
                ureq::Error::Transport(t) => FetchError::Transient(t.to_string()),
            })?;
        let mut bytes = Vec::new();
        response
            .into_reader()
            .take(64 * 1024 * 1024)
            .read_to_end(&mut bytes)
            .map_err(|e| FetchError::Transient(e.to_string()))?;
        Ok(bytes)
    }
}

/// Headless-browser subprocess: substitutes `{url}`, `{n_pix}` and
/// `{out_path}` into a command template, runs it, and reads the screenshot
/// it wrote.
pub struct BrowserProvider {
    template: String,
    work_dir: PathBuf,
}

/// Mirrors the reference download script's browser invocation.
pub const DEFAULT_BROWSER_TEMPLATE: &str = "chrome --headless --virtual-time-budget=10000000 \
     --disable-gpu --window-size={n_pix},{n_pix} --screenshot={out_path} {url}";

impl BrowserProvider {
    pub fn new(template: impl Into<String>, work_dir: impl Into<PathBuf>) -> Self {
        BrowserProvider {
            template: template.into(),
            work_dir: work_dir.into(),
        }
    }
}

impl TileProvider for BrowserProvider {
    fn fetch(&self, job: &CaptureJob) -> std::result::Result<Vec<u8>, FetchError> {
        let out_path = self.work_dir.join(format!(".capture_{}", job.output_name));
        let out_str = out_path.to_string_lossy().into_owned();
        let cmd: Vec<String> = self
            .template
            .split_whitespace()
            .map(|tok| {
                tok.replace("{url}", &job.url)
                    .replace("{n_pix}", &job.tile.n_pix.to_string())
                    .replace("{out_path}", &out_str)
            })
            .collect();
        let (program, args) = cmd
            .split_first()
            .ok_or_else(|| FetchError::Config("empty browser command template".into()))?;
        let output = Command::new(program).args(args).output().map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                FetchError::Config(format!("browser executable not found: {program}"))
            } else {
                FetchError::Transient(e.to_string())
            }
        })?;
        if !output.status.success() {
            return Err(FetchError::Transient(format!(
                "browser exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let bytes = std::fs::read(&out_path)
            .map_err(|e| FetchError::Transient(format!("screenshot not readable: {e}")))?;
        let _ = std::fs::remove_file(&out_path);
        Ok(bytes)
    }

    fn serial(&self) -> bool {
        true
    }
}

/// Instantiate the provider named by the config.
pub fn make_provider(cfg: &ProviderConfig) -> Result<Box<dyn TileProvider>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        ProviderKind::Synthetic => {
            let path = cfg.scenario_file.as_ref().ok_or_else(|| {
                Error::Config("synthetic provider requires scenario_file".into())
            })?;
            Box::new(SyntheticProvider::new(Scenario::load(path)?))
        }
        ProviderKind::HttpEndpoint => {
            Box::new(HttpProvider::new(Duration::from_secs(cfg.timeout_s)))
        }
        ProviderKind::BrowserSubprocess => Box::new(BrowserProvider::new(
            cfg.browser_command_template.clone(),
            std::env::temp_dir(),
        )),
    })
}
